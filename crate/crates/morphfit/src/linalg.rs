//! Small dense linear algebra used throughout the crate.
//!
//! Jacobians, target matrices and metric derivatives are at most 3x3, so a
//! fixed-size matrix with a runtime dimension avoids generics and keeps the
//! hot loops simple. A plain Gaussian elimination handles the medium-size
//! dense systems (Vandermonde inverses for simplex bases).

use crate::error::{Error, Result};

/// Square matrix of runtime dimension 1..=3, stored row-major in a fixed
/// 3x3 array. Entries outside the active block are kept at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    pub dim: usize,
    m: [[f64; 3]; 3],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!((1..=3).contains(&dim));
        SmallMat { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            a.m[i][i] = 1.0;
        }
        a
    }

    /// Builds a matrix from its columns; entries beyond `dim` are ignored.
    pub fn from_cols(dim: usize, cols: &[[f64; 3]]) -> Self {
        debug_assert_eq!(cols.len(), dim);
        let mut a = Self::zeros(dim);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..dim {
                a.m[i][j] = c[i];
            }
        }
        a
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] += v;
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!("SmallMat dim out of range"),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    /// Squared Frobenius norm of the active block.
    pub fn frob_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Singular(format!("{}x{} matrix, det = {d}", self.dim, self.dim)));
        }
        let m = &self.m;
        let mut inv = Self::zeros(self.dim);
        match self.dim {
            1 => inv.m[0][0] = 1.0 / d,
            2 => {
                inv.m[0][0] = m[1][1] / d;
                inv.m[0][1] = -m[0][1] / d;
                inv.m[1][0] = -m[1][0] / d;
                inv.m[1][1] = m[0][0] / d;
            }
            3 => {
                inv.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
                inv.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
                inv.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
                inv.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
                inv.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
                inv.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
                inv.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
                inv.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
                inv.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
            }
            _ => unreachable!(),
        }
        Ok(inv)
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.m[i][k] * other.m[k][j];
                }
                c.m[i][j] = s;
            }
        }
        c
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut r = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                r[i] += self.m[i][j] * v[j];
            }
        }
        r
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut a = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                a.m[i][j] *= c;
            }
        }
        a
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut a = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                a.m[i][j] += other.m[i][j];
            }
        }
        a
    }
}

/// Euclidean norm of the first `dim` components.
#[inline]
pub fn norm(v: [f64; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        s += v[a] * v[a];
    }
    s.sqrt()
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Euclidean norm of a slice.
pub fn norm_slice(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the dense system `a x = b` in place with partial pivoting.
/// `a` is row-major `n x n`; `b` holds `m` right-hand sides of length `n`,
/// stored contiguously, and is overwritten with the solutions.
pub fn solve_dense(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len() % n, 0);
    let m = b.len() / n;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular(format!("dense {n}x{n} system, pivot column {col}")));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            for j in 0..m {
                b.swap(j * n + col, j * n + piv);
            }
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            for j in 0..m {
                b[j * n + r] -= f * b[j * n + col];
            }
        }
    }
    for rhs in 0..m {
        let x = &mut b[rhs * n..(rhs + 1) * n];
        for row in (0..n).rev() {
            let mut s = x[row];
            for j in row + 1..n {
                s -= a[row * n + j] * x[j];
            }
            x[row] = s / a[row * n + row];
        }
    }
    Ok(())
}

/// Inverts a dense row-major `n x n` matrix. The input is consumed as scratch.
pub fn invert_dense(n: usize, a: &mut [f64]) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; n * n];
    for i in 0..n {
        rhs[i * n + i] = 1.0;
    }
    solve_dense(n, a, &mut rhs)?;
    // rhs now holds the inverse columns; transpose into row-major.
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        for row in 0..n {
            inv[row * n + col] = rhs[col * n + row];
        }
    }
    Ok(inv)
}
