//! Portable binary model files.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64`, strings are a `u32` byte length followed by UTF-8.
//!
//! ```text
//! magic "YCMODEL1" | version u32 | family str | schema_hash str
//! | n_columns u32 | column str * n | spec_json str | family section
//! ```
//!
//! Family sections:
//! - dummy: value f64
//! - linear, ridge, omp: n u32, coef f64 * n, intercept f64, n_sel u32, selected u32 * n_sel
//! - knn: k u32, width u32, means f64 * width, scales f64 * width, rows u32,
//!   points f64 * rows * width, targets f64 * rows
//! - tree: tree
//! - forest, extra_trees: n_trees u32, tree * n_trees
//! - gbm: init f64, learning_rate f64, n_trees u32, tree * n_trees
//!
//! A tree is `n_nodes u32` then per node `feature u32, threshold f64,
//! left u32, right u32, value f64`; leaves have feature `0xFFFFFFFF`.

use std::io::{Read, Write};

use super::{Boosted, FittedModel, KnnModel, Learned, LinearModel, ModelError, ModelSpec, Node, Standardizer, Tree};

pub const MAGIC: &[u8; 8] = b"YCMODEL1";
pub const FORMAT_VERSION: u32 = 1;

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u32(&mut self, v: usize) -> Result<(), ModelError> {
        let v = u32::try_from(v).map_err(|_| ModelError::Format(format!("{v} does not fit in u32")))?;
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<(), ModelError> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64s(&mut self, v: &[f64]) -> Result<(), ModelError> {
        v.iter().try_for_each(|x| self.f64(*x))
    }
    fn str(&mut self, s: &str) -> Result<(), ModelError> {
        self.u32(s.len())?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
    fn tree(&mut self, t: &Tree) -> Result<(), ModelError> {
        self.u32(t.nodes.len())?;
        for n in &t.nodes {
            self.0.write_all(&n.feature.to_le_bytes())?;
            self.f64(n.threshold)?;
            self.0.write_all(&n.left.to_le_bytes())?;
            self.0.write_all(&n.right.to_le_bytes())?;
            self.f64(n.value)?;
        }
        Ok(())
    }
}

pub fn write_model<W: Write>(model: &FittedModel, w: W) -> Result<(), ModelError> {
    let mut o = Out(w);
    o.0.write_all(MAGIC)?;
    o.u32(FORMAT_VERSION as usize)?;
    o.str(model.family())?;
    o.str(&model.schema_hash)?;
    o.u32(model.columns.len())?;
    for c in &model.columns {
        o.str(c)?;
    }
    let spec = serde_json::to_string(&model.spec).map_err(|e| ModelError::Format(e.to_string()))?;
    o.str(&spec)?;
    match &model.learned {
        Learned::Constant(v) => o.f64(*v)?,
        Learned::Linear(m) => {
            o.u32(m.coef.len())?;
            o.f64s(&m.coef)?;
            o.f64(m.intercept)?;
            o.u32(m.selected.len())?;
            for &s in &m.selected {
                o.u32(s)?;
            }
        }
        Learned::Knn(m) => {
            o.u32(m.k)?;
            o.u32(m.standardizer.means.len())?;
            o.f64s(&m.standardizer.means)?;
            o.f64s(&m.standardizer.scales)?;
            o.u32(m.targets.len())?;
            o.f64s(&m.points)?;
            o.f64s(&m.targets)?;
        }
        Learned::Tree(t) => o.tree(t)?,
        Learned::Forest(trees) => {
            o.u32(trees.len())?;
            trees.iter().try_for_each(|t| o.tree(t))?;
        }
        Learned::Boosted(b) => {
            o.f64(b.init)?;
            o.f64(b.learning_rate)?;
            o.u32(b.trees.len())?;
            b.trees.iter().try_for_each(|t| o.tree(t))?;
        }
    }
    Ok(o.0.flush()?)
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| ModelError::Format(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn len(&mut self) -> Result<usize, ModelError> {
        Ok(self.u32()? as usize)
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String, ModelError> {
        let n = self.len()?;
        let mut buf = Vec::new();
        (&mut self.0).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return Err(ModelError::Format("truncated string".into()));
        }
        String::from_utf8(buf).map_err(|_| ModelError::Format("string is not UTF-8".into()))
    }
    fn tree(&mut self) -> Result<Tree, ModelError> {
        let n = self.len()?;
        let mut nodes = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let feature = self.u32()?;
            let threshold = self.f64()?;
            let left = self.u32()?;
            let right = self.u32()?;
            let value = self.f64()?;
            let node = Node { feature, threshold, left, right, value };
            if !node.is_leaf() && (left as usize >= n || right as usize >= n) {
                return Err(ModelError::Format("tree child index out of range".into()));
            }
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(ModelError::Format("empty tree".into()));
        }
        Ok(Tree { nodes })
    }
    fn trees(&mut self) -> Result<Vec<Tree>, ModelError> {
        let n = self.len()?;
        (0..n).map(|_| self.tree()).collect()
    }
}

pub fn read_model<R: Read>(r: R) -> Result<FittedModel, ModelError> {
    let mut i = In(r);
    if &i.bytes::<8>()? != MAGIC {
        return Err(ModelError::Format("not a model file".into()));
    }
    let version = i.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Format(format!("unsupported format version {version}")));
    }
    let family = i.str()?;
    let schema_hash = i.str()?;
    let n_cols = i.len()?;
    let columns = (0..n_cols).map(|_| i.str()).collect::<Result<Vec<_>, _>>()?;
    let spec: ModelSpec = serde_json::from_str(&i.str()?).map_err(|e| ModelError::Format(e.to_string()))?;
    if spec.family() != family {
        return Err(ModelError::Format(format!("header family {family} disagrees with spec {}", spec.family())));
    }
    let learned = match family.as_str() {
        "dummy" => Learned::Constant(i.f64()?),
        "linear" | "ridge" | "omp" => {
            let n = i.len()?;
            let coef = i.f64s(n)?;
            let intercept = i.f64()?;
            let n_sel = i.len()?;
            let selected = (0..n_sel).map(|_| i.len()).collect::<Result<Vec<_>, _>>()?;
            Learned::Linear(LinearModel { coef, intercept, selected })
        }
        "knn" => {
            let k = i.len()?;
            let width = i.len()?;
            let means = i.f64s(width)?;
            let scales = i.f64s(width)?;
            let rows = i.len()?;
            let points = i.f64s(rows * width)?;
            let targets = i.f64s(rows)?;
            Learned::Knn(KnnModel { k, standardizer: Standardizer { means, scales }, points, targets })
        }
        "tree" => Learned::Tree(i.tree()?),
        "forest" | "extra_trees" => Learned::Forest(i.trees()?),
        "gbm" => {
            let init = i.f64()?;
            let learning_rate = i.f64()?;
            Learned::Boosted(Boosted { init, learning_rate, trees: i.trees()? })
        }
        other => return Err(ModelError::Format(format!("unknown family {other}"))),
    };
    Ok(FittedModel { spec, columns, schema_hash, learned })
}

#[cfg(test)]
mod tests {
    use super::super::{fit, ModelKind, Predictor};
    use super::*;
    use crate::matrix::FeatureMatrix;

    #[test]
    fn every_family_round_trips() {
        let data: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64 * 0.5).collect();
        let x = FeatureMatrix::unnamed(3, data);
        let y: Vec<f64> = x.rows().map(|r| r[0] - 2.0 * r[1] + r[2] * r[0]).collect();
        for f in ModelKind::FAMILIES {
            let spec = ModelSpec::new(ModelKind::default_for(f).unwrap()).with_seed(3);
            let m = fit(&spec, &x, &y).unwrap();
            let mut buf = Vec::new();
            write_model(&m, &mut buf).unwrap();
            let back = read_model(buf.as_slice()).unwrap();
            assert_eq!(back, m, "{f}");
            assert_eq!(back.predict_rows(x.data()), m.predict_rows(x.data()));
        }
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(read_model(&b"NOTAMODEL"[..]).is_err());
        let x = FeatureMatrix::unnamed(1, vec![1.0, 2.0, 3.0]);
        let m = fit(&ModelSpec::new(ModelKind::default_for("gbm").unwrap()), &x, &[1.0, 2.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_model(buf.as_slice()), Err(ModelError::Format(_))));
    }
}
