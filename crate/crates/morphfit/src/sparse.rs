//! Minimal symmetric sparse matrix support for the Newton systems.
//!
//! Assembly produces coordinate triplets per element; [`CsrMatrix::from_triplets`]
//! merges duplicates into compressed sparse row form. Only the operations the
//! MINRES solver needs are provided.

/// Compressed sparse row matrix (square, assumed symmetric by construction).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from unordered (row, col, value) triplets,
    /// summing duplicates. Zeros produced by cancellation are kept; the
    /// sparsity pattern is the union of all triplet positions.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            debug_assert!(r < n);
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        // Bucket triplets by row, then sort and merge each row by column.
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            let slot = next[r];
            cols[slot] = c;
            vals[slot] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n {
            let lo = counts[r];
            let hi = counts[r + 1];
            order.clear();
            order.extend(lo..hi);
            order.sort_unstable_by_key(|&k| cols[k]);
            let mut k = 0;
            while k < order.len() {
                let c = cols[order[k]];
                let mut v = vals[order[k]];
                k += 1;
                while k < order.len() && cols[order[k]] == c {
                    v += vals[order[k]];
                    k += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// Diagonal entries (zero where the pattern has no diagonal).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k];
                    break;
                }
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Maximum absolute asymmetry |A - A^T|; used by tests to validate
    /// assembled Hessians.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.values[k];
                let vt = self.get(c, r);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_order() {
        let t = [(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (1, 0, -1.0), (2, 2, 3.0)];
        let a = CsrMatrix::from_triplets(3, &t);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(2, 2), 3.0);
        assert_eq!(a.get(2, 0), 0.0);
        // columns sorted within each row
        for r in 0..3 {
            let cols = &a.col_idx[a.row_ptr[r]..a.row_ptr[r + 1]];
            for w in cols.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let t = [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 5.0)];
        let a = CsrMatrix::from_triplets(3, &t);
        let x = [1.0, 2.0, -1.0];
        let mut y = [0.0; 3];
        a.mul_vec(&x, &mut y);
        assert_eq!(y, [6.0, 7.0, -5.0]);
        assert_eq!(a.diagonal(), vec![4.0, 3.0, 5.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }
}
