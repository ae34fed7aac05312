use sha2::{Digest, Sha256};

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, data: Vec<f64>) -> Self {
        let width = columns.len().max(1);
        assert_eq!(data.len() % width, 0, "data length is not a multiple of the column count");
        if columns.is_empty() {
            assert!(data.is_empty(), "a matrix without columns cannot hold data");
        }
        Self { columns, data }
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * columns.len());
        for row in rows {
            assert_eq!(row.len(), columns.len(), "row width differs from column count");
            data.extend_from_slice(row);
        }
        Self::new(columns, data)
    }

    /// Columns named `x0, x1, ...`.
    pub fn unnamed(n_cols: usize, data: Vec<f64>) -> Self {
        Self::new((0..n_cols).map(|i| format!("x{i}")).collect(), data)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.columns.len().max(1))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.columns.len() + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { columns: self.columns.clone(), data }
    }

    pub fn schema_hash(&self) -> String {
        schema_hash(&self.columns)
    }
}

/// First 16 hex digits of SHA-256 over the newline-joined column names.
pub fn schema_hash(columns: &[String]) -> String {
    let mut hasher = Sha256::new();
    for c in columns {
        hasher.update(c.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..8])
}
