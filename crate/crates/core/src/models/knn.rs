use super::linear::Standardizer;

/// k-nearest-neighbour regressor over z-scored training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub standardizer: Standardizer,
    /// Standardized training rows, row-major.
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(data: &[f64], n_cols: usize, y: &[f64], k: usize) -> Self {
        let standardizer = Standardizer::fit(data, n_cols);
        let points = standardizer.transform(data);
        Self { k, standardizer, points, targets: y.to_vec() }
    }

    /// Mean target of the `k` closest rows; distance ties go to the earlier row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(row.len());
        self.standardizer.transform_row(row, &mut z);
        let width = z.len();
        let mut dist: Vec<(f64, u32)> = if width == 0 {
            (0..self.targets.len() as u32).map(|i| (0.0, i)).collect()
        } else {
            self.points
                .chunks(width)
                .enumerate()
                .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i as u32))
                .collect()
        };
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let mut nearest: Vec<(f64, u32)> = dist[..k].to_vec();
        // Sum in a fixed order so the result does not depend on the selection algorithm.
        nearest.sort_by(cmp);
        nearest.iter().map(|&(_, i)| self.targets[i as usize]).sum::<f64>() / k as f64
    }
}
