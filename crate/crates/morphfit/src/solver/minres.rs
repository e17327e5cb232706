//! Minimum-residual solver for the symmetric, possibly indefinite Newton
//! systems, with Jacobi preconditioning.
//!
//! The preconditioner is M = diag(|H_ii|); absolute values keep M positive
//! definite on indefinite systems and zero entries are replaced by one so
//! M stays invertible. The iteration is the classic Lanczos-based scheme:
//! the residual norm is monotone, so the last iterate is always the best
//! one and remains a usable descent direction even when the tolerance was
//! not reached.

use crate::sparse::CsrMatrix;

/// Result of a MINRES solve. `converged` reports the tolerance test;
/// `breakdown` flags non-finite arithmetic (the caller should discard `x`
/// and fall back to the preconditioned gradient).
#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub breakdown: bool,
    /// Zero diagonal entries replaced by one in the preconditioner.
    pub replaced_zeros: usize,
}

/// Jacobi preconditioner diagonal: |H_ii| with zeros replaced by one.
pub(crate) fn jacobi_diagonal(h: &CsrMatrix) -> (Vec<f64>, usize) {
    let mut replaced = 0;
    let d = h
        .diagonal()
        .into_iter()
        .map(|v| {
            if v == 0.0 {
                replaced += 1;
                1.0
            } else {
                v.abs()
            }
        })
        .collect();
    (d, replaced)
}

/// Solves H x = b for symmetric H until the preconditioned residual drops
/// below `tol` relative to the right-hand side, or `max_iter` iterations.
pub fn minres_jacobi(h: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> MinresOutcome {
    let n = h.n;
    let (m, replaced_zeros) = jacobi_diagonal(h);
    let mut x = vec![0.0; n];

    // Lanczos vectors: r1, r2 unpreconditioned, y = M⁻¹ r2.
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y: Vec<f64> = b.iter().zip(&m).map(|(v, d)| v / d).collect();
    let beta1 = dotp(b, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return MinresOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            breakdown: false,
            replaced_zeros,
        };
    }

    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut iterations = 0;

    for itn in 1..=max_iter {
        iterations = itn;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        let mut hy = vec![0.0; n];
        h.mul_vec(&v, &mut hy);
        if itn >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                hy[i] -= c * r1[i];
            }
        }
        let alfa = dotp(&v, &hy);
        let c = alfa / beta;
        for i in 0..n {
            hy[i] -= c * r2[i];
        }
        r1 = std::mem::replace(&mut r2, hy);
        for i in 0..n {
            y[i] = r2[i] / m[i];
        }
        oldb = beta;
        beta = dotp(&r2, &y).max(0.0).sqrt();

        // Rotate the new tridiagonal column into upper-triangular form.
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        for i in 0..n {
            let wi = (v[i] - oldeps * w2[i] - delta * w[i]) / gamma;
            w2[i] = w[i];
            w[i] = wi;
            x[i] += phi * wi;
        }

        if !phibar.is_finite() || !beta.is_finite() {
            return MinresOutcome {
                x,
                iterations,
                rel_residual: f64::NAN,
                converged: false,
                breakdown: true,
                replaced_zeros,
            };
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }

    let rel_residual = phibar / beta1;
    let breakdown = x.iter().any(|v| !v.is_finite());
    MinresOutcome {
        x,
        iterations,
        rel_residual,
        converged: rel_residual <= tol,
        breakdown,
        replaced_zeros,
    }
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(h: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let mut hx = vec![0.0; h.n];
        h.mul_vec(x, &mut hx);
        let num: f64 = hx.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|c| c * c).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn identity_returns_rhs() {
        let t: Vec<_> = (0..5).map(|i| (i, i, 1.0)).collect();
        let h = CsrMatrix::from_triplets(5, &t);
        let b = [3.0, -1.0, 0.5, 2.0, 8.0];
        let out = minres_jacobi(&h, &b, 1e-12, 50);
        assert!(out.converged && !out.breakdown);
        for (xi, bi) in out.x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_solves_componentwise() {
        let d = [2.0, -3.0, 5.0, 9.0, -1.0];
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let h = CsrMatrix::from_triplets(5, &t);
        let b = [4.0, 6.0, -10.0, 18.0, 0.5];
        let out = minres_jacobi(&h, &b, 1e-12, 50);
        assert!(out.converged);
        for i in 0..5 {
            assert!((out.x[i] - b[i] / d[i]).abs() < 1e-10, "component {i}");
        }
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 5;
        let mut bmat = vec![0.0; n * n];
        for v in bmat.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        // H = BᵀB + I is symmetric positive definite.
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += bmat[k * n + i] * bmat[k * n + j];
                }
                dense[i * n + j] = s;
            }
        }
        let t: Vec<_> = (0..n * n).map(|k| (k / n, k % n, dense[k])).collect();
        let h = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let out = minres_jacobi(&h, &b, 1e-12, 100);
        let mut a = dense.clone();
        let mut exact = b.clone();
        solve_dense(n, &mut a, &mut exact).unwrap();
        for i in 0..n {
            assert!((out.x[i] - exact[i]).abs() < 1e-8 * exact[i].abs().max(1.0));
        }
        assert!(residual(&h, &out.x, &b) < 1e-8);
    }

    #[test]
    fn indefinite_saddle_system() {
        // [[2I, B], [Bᵀ, 0]]: symmetric, indefinite, zero diagonal block.
        let t = vec![
            (0, 0, 2.0),
            (1, 1, 2.0),
            (0, 2, 1.0),
            (2, 0, 1.0),
            (1, 2, -1.0),
            (2, 1, -1.0),
        ];
        let h = CsrMatrix::from_triplets(3, &t);
        let b = [1.0, 2.0, 0.5];
        let out = minres_jacobi(&h, &b, 1e-12, 100);
        assert!(out.converged);
        assert_eq!(out.replaced_zeros, 1);
        assert!(residual(&h, &out.x, &b) < 1e-10);
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let h = CsrMatrix::from_triplets(4, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
        let out = minres_jacobi(&h, &[0.0; 4], 1e-10, 10);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_flags_unconverged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + rng.gen_range(0.0..1.0)));
            if i + 1 < n {
                let v = rng.gen_range(-0.5..0.5);
                t.push((i, i + 1, v));
                t.push((i + 1, i, v));
            }
        }
        let h = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = minres_jacobi(&h, &b, 1e-14, 2);
        assert!(!out.converged && !out.breakdown);
        assert!(out.x.iter().all(|v| v.is_finite()));
        let full = minres_jacobi(&h, &b, 1e-14, 200);
        assert!(residual(&h, &full.x, &b) <= residual(&h, &out.x, &b));
    }
}
