//! Least squares, ridge and orthogonal matching pursuit.
//!
//! All three work on z-scored features with a centered target, then fold the
//! scaling back so the stored coefficients apply to raw inputs.

use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Column means and population standard deviations. Constant columns get
/// scale 1, so their standardized values are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[f64], n_cols: usize) -> Self {
        let n_rows = data.len() / n_cols.max(1);
        let mut means = vec![0.0; n_cols];
        for row in data.chunks(n_cols) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n_rows as f64;
        }
        let mut vars = vec![0.0; n_cols];
        for row in data.chunks(n_cols) {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let scales = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n_rows as f64).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().zip(&self.means).zip(&self.scales).map(|((v, m), s)| (v - m) / s));
    }

    pub fn transform(&self, data: &[f64]) -> Vec<f64> {
        let n_cols = self.means.len();
        let mut out = Vec::with_capacity(data.len());
        for row in data.chunks(n_cols) {
            out.extend(row.iter().zip(&self.means).zip(&self.scales).map(|((v, m), s)| (v - m) / s));
        }
        out
    }
}

/// `prediction = intercept + coef · x` on raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Features chosen by OMP in selection order; empty for the dense fits.
    pub selected: Vec<usize>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }

    fn from_standardized(std: &Standardizer, y_mean: f64, w: &[f64], selected: Vec<usize>) -> Self {
        let coef: Vec<f64> = w.iter().zip(&std.scales).map(|(w, s)| w / s).collect();
        let intercept = y_mean - coef.iter().zip(&std.means).map(|(c, m)| c * m).sum::<f64>();
        Self { coef, intercept, selected }
    }
}

struct Centered {
    std: Standardizer,
    z: DMatrix<f64>,
    yc: DVector<f64>,
    y_mean: f64,
}

fn center(data: &[f64], n_cols: usize, y: &[f64]) -> Centered {
    let std = Standardizer::fit(data, n_cols);
    let z = DMatrix::from_row_slice(y.len(), n_cols, &std.transform(data));
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    Centered { std, z, yc, y_mean }
}

fn solve_spd(mut gram: DMatrix<f64>, rhs: DVector<f64>, penalty: f64) -> Result<DVector<f64>, ModelError> {
    for i in 0..gram.nrows() {
        gram[(i, i)] += penalty;
    }
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| ModelError::Numerical("normal equations are not positive definite".into()))
}

/// Relative jitter added to the normal equations of the unpenalized fits.
const JITTER: f64 = 1e-12;

/// Ordinary least squares through the normal equations. A ridge of
/// `1e-12 · n` keeps singular designs solvable.
pub fn fit_least_squares(data: &[f64], n_cols: usize, y: &[f64]) -> Result<LinearModel, ModelError> {
    fit_ridge_penalty(data, n_cols, y, JITTER * y.len() as f64)
}

/// Ridge with penalty `alpha` on standardized coefficients; the intercept is unpenalized.
pub fn fit_ridge(data: &[f64], n_cols: usize, y: &[f64], alpha: f64) -> Result<LinearModel, ModelError> {
    fit_ridge_penalty(data, n_cols, y, alpha.max(JITTER * y.len() as f64))
}

fn fit_ridge_penalty(data: &[f64], n_cols: usize, y: &[f64], penalty: f64) -> Result<LinearModel, ModelError> {
    let c = center(data, n_cols, y);
    let gram = c.z.tr_mul(&c.z);
    let rhs = c.z.tr_mul(&c.yc);
    let w = solve_spd(gram, rhs, penalty)?;
    Ok(LinearModel::from_standardized(&c.std, c.y_mean, w.as_slice(), Vec::new()))
}

/// Greedy OMP: add the feature most correlated with the residual, refit
/// least squares on all selected features, repeat `n_nonzero` times or until
/// the residual vanishes. Constant features are never selected.
pub fn fit_omp(data: &[f64], n_cols: usize, y: &[f64], n_nonzero: usize) -> Result<LinearModel, ModelError> {
    let c = center(data, n_cols, y);
    let n = y.len() as f64;
    let usable: Vec<bool> = (0..n_cols).map(|j| c.z.column(j).norm_squared() > 0.0).collect();
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut selected: Vec<usize> = Vec::new();
    let mut residual = c.yc.clone();
    let mut w_sel = DVector::zeros(0);
    while selected.len() < n_nonzero.min(n_cols) {
        if residual.norm_squared() <= 1e-24 * scale {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n_cols {
            if !usable[j] || selected.contains(&j) {
                continue;
            }
            let corr = c.z.column(j).dot(&residual).abs();
            if best.is_none_or(|(_, b)| corr > b) {
                best = Some((j, corr));
            }
        }
        let Some((j, corr)) = best else { break };
        if corr <= 1e-12 * n * scale.sqrt() / n.sqrt() {
            break;
        }
        selected.push(j);
        let zs = c.z.select_columns(selected.iter());
        w_sel = solve_spd(zs.tr_mul(&zs), zs.tr_mul(&c.yc), JITTER * n)?;
        residual = &c.yc - &zs * &w_sel;
    }
    let mut w = vec![0.0; n_cols];
    for (k, &j) in selected.iter().enumerate() {
        w[j] = w_sel[k];
    }
    Ok(LinearModel::from_standardized(&c.std, c.y_mean, &w, selected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_linear(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            x.extend([a, b]);
            y.push(2.0 * a - b + 1.0);
        }
        (x, y)
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let (x, y) = exact_linear(50);
        let m = fit_least_squares(&x, 2, &y).unwrap();
        assert!((m.coef[0] - 2.0).abs() < 1e-8);
        assert!((m.coef[1] + 1.0).abs() < 1e-8);
        assert!((m.intercept - 1.0).abs() < 1e-8);
        assert!((m.predict_row(&[10.0, -5.0]) - 26.0).abs() < 1e-6);
    }

    #[test]
    fn ridge_shrinks_and_converges() {
        let (x, y) = exact_linear(50);
        let ols = fit_least_squares(&x, 2, &y).unwrap();
        let tiny = fit_ridge(&x, 2, &y, 1e-8).unwrap();
        let diff: f64 = ols.coef.iter().zip(&tiny.coef).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-5);
        let heavy = fit_ridge(&x, 2, &y, 1e4).unwrap();
        assert!(heavy.coef[0].abs() < ols.coef[0].abs());
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let x = vec![1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0, 7.0];
        let y = vec![2.0, 4.0, 6.0, 8.0];
        let m = fit_least_squares(&x, 2, &y).unwrap();
        assert_eq!(m.coef[1], 0.0);
        assert!((m.coef[0] - 2.0).abs() < 1e-9);
        let omp = fit_omp(&x, 2, &y, 2).unwrap();
        assert_eq!(omp.selected, vec![0]);
    }

    #[test]
    fn omp_stops_on_zero_residual() {
        let (x, y) = exact_linear(30);
        let m = fit_omp(&x, 2, &y, 10).unwrap();
        assert_eq!(m.selected.len(), 2);
        assert!((m.coef[0] - 2.0).abs() < 1e-8);
    }
}
