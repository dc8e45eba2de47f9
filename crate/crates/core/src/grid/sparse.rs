//! Compressed-row sparse matrices sharing a fixed sparsity pattern.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Pattern from per-row sorted, deduplicated column lists.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        CsrPattern { n, row_ptr, col_idx }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let nnz = pattern.nnz();
        CsrMatrix { pattern, values: vec![0.0; nnz] }
    }

    pub fn from_values(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch { what: "csr values", expected: pattern.nnz(), got: values.len() });
        }
        Ok(CsrMatrix { pattern, values })
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate().take(p.n) {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = &self.pattern;
        let mut s = 0.0;
        for i in 0..p.n {
            let mut r = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                r += self.values[k] * y[p.col_idx[k]];
            }
            s += x[i] * r;
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let p = &self.pattern;
        (0..p.n).map(|i| self.values[p.row_ptr[i]..p.row_ptr[i + 1]].iter().sum()).collect()
    }

    /// `a * self + b * other`; both must share the pattern.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "sparsity patterns differ"
        );
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> CsrMatrix {
        CsrMatrix { pattern: self.pattern.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, di) in d.iter().enumerate() {
            let p = self.pattern.position(i, i).expect("diagonal entry in pattern");
            self.values[p] += di;
        }
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let p = &self.pattern;
        let mut d = vec![vec![0.0; p.n]; p.n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                row[p.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_positions() {
        let pat = Arc::new(CsrPattern::from_rows(vec![vec![1, 0], vec![0, 1, 2], vec![2, 1]]));
        let m = CsrMatrix::from_values(pat, vec![2.0, -1.0, -1.0, 2.0, -1.0, -1.0, 2.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m.inner(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), -1.0);
        assert_eq!(m.row_sums(), vec![1.0, 0.0, 1.0]);
    }
}
