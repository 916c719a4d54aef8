//! Minimal sparse symmetric matrix used when a network is too large for
//! dense storage. Supports exactly what truncated-series scoring needs:
//! matrix-vector products, scaling, addition, and matrix-matrix products.

/// Row-major sparse symmetric matrix; each row holds `(column, value)`
/// pairs sorted by column. Construction keeps both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    /// Builds from canonical upper-triangle entries (`i <= j`; diagonal
    /// allowed). Entries with value 0 are dropped; duplicate pairs must not
    /// appear.
    pub fn from_upper_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows = vec![Vec::new(); n];
        for (i, j, v) in entries {
            debug_assert!(i <= j && j < n);
            if v != 0.0 {
                rows[i].push((j, v));
                if i != j {
                    rows[j].push((i, v));
                }
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
        }
        Self { n, rows }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Stored entries per row, including both triangles.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| (j, v * factor)).collect())
            .collect();
        Self { n: self.n, rows }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| merge_rows(a, b))
            .collect();
        Self { n: self.n, rows }
    }

    /// `y = A * x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    /// `C = A * B` via a dense scratch row; rows are emitted in sorted
    /// column order, so results are deterministic for identical inputs.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut scratch = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(n);
        for row_a in &self.rows {
            for &(k, a_ik) in row_a {
                for &(j, b_kj) in &other.rows[k] {
                    if scratch[j] == 0.0 {
                        touched.push(j);
                    }
                    scratch[j] += a_ik * b_kj;
                }
            }
            touched.sort_unstable();
            let mut row = Vec::with_capacity(touched.len());
            for &j in &touched {
                if scratch[j] != 0.0 {
                    row.push((j, scratch[j]));
                }
                scratch[j] = 0.0;
            }
            touched.clear();
            rows.push(row);
        }
        Self { n, rows }
    }

    /// Averages the matrix with its transpose, removing any asymmetry
    /// introduced by floating-point products.
    pub fn symmetrized(&self) -> Self {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if i == j {
                    upper.push((i, j, v));
                } else if i < j {
                    upper.push((i, j, 0.5 * (v + self.get(j, i))));
                }
            }
        }
        Self::from_upper_entries(self.n, upper)
    }
}

fn merge_rows(a: &[(usize, f64)], b: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => {
                out.push(a[ia]);
                ia += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[ib]);
                ib += 1;
            }
            std::cmp::Ordering::Equal => {
                let v = a[ia].1 + b[ib].1;
                if v != 0.0 {
                    out.push((a[ia].0, v));
                }
                ia += 1;
                ib += 1;
            }
        }
    }
    out.extend_from_slice(&a[ia..]);
    out.extend_from_slice(&b[ib..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(n: usize, seed: u64) -> (SparseSym, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::zeros(n, n);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.3) {
                    let v = rng.random_range(0.1..2.0);
                    dense[(i, j)] = v;
                    dense[(j, i)] = v;
                    entries.push((i, j, v));
                }
            }
        }
        (SparseSym::from_upper_entries(n, entries), dense)
    }

    #[test]
    fn matvec_matches_dense() {
        let (sparse, dense) = random_pair(12, 3);
        let x: Vec<f64> = (0..12).map(|i| (i as f64) * 0.5 - 2.0).collect();
        let mut y = vec![0.0; 12];
        sparse.matvec(&x, &mut y);
        let expected = &dense * DMatrix::from_column_slice(12, 1, &x);
        for i in 0..12 {
            assert!((y[i] - expected[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_matches_dense() {
        let (a, da) = random_pair(10, 11);
        let (b, db) = random_pair(10, 12);
        let c = a.matmul(&b);
        let dc = da * db;
        for i in 0..10 {
            for j in 0..10 {
                assert!((c.get(i, j) - dc[(i, j)]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn add_and_scale_match_dense() {
        let (a, da) = random_pair(9, 21);
        let (b, db) = random_pair(9, 22);
        let sum = a.scale(2.0).add(&b);
        let expected = da * 2.0 + db;
        for i in 0..9 {
            for j in 0..9 {
                assert!((sum.get(i, j) - expected[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_entries_are_not_stored() {
        let m = SparseSym::from_upper_entries(3, vec![(0, 1, 0.0), (1, 2, 1.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(2, 1), 1.5);
    }
}
