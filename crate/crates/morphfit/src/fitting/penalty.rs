//! The weighted fitting penalty and its derivatives.
//!
//! F_σ(x) = w_σ Σ_{s∈𝒮} σ(x_s)² pulls every fitted node onto the zero set
//! of σ. The mesh basis is nodal, so the position of node s moves only
//! with its own degrees of freedom: the gradient carries one d-vector per
//! fitted node and the Hessian one d×d diagonal block,
//!
//!   ∂F_σ/∂x_{a,s}      = 2 w_σ σ ∂_aσ,
//!   ∂²F_σ/∂x_{a,s}∂x_{b,s} = 2 w_σ (∂_aσ ∂_bσ + σ ∂²_{ab}σ),
//!
//! all evaluated at the current x_s. Rows follow the mesh coordinate
//! layout, component-major: degree of freedom (a, s) sits at a·n + s.

use crate::error::{Error, Result};
use crate::geometry::{eval_levelset, LevelSetField};
use crate::mesh::{HighOrderMesh, NodeSet};

/// The penalty F_σ = w_σ Σ_{s∈𝒮} σ(x_s)². An empty set contributes zero.
pub fn objective_sigma(
    mesh: &HighOrderMesh,
    ls: &LevelSetField,
    set: &NodeSet,
    w: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for s in set.iter() {
        let sigma = eval_levelset(ls, mesh.node(s))?.sigma;
        total += sigma * sigma;
    }
    Ok(w * total)
}

/// Gradient of F_σ, length dim·n_nodes, zero off the fitted nodes.
pub fn grad_sigma(
    mesh: &HighOrderMesh,
    ls: &LevelSetField,
    set: &NodeSet,
    w: f64,
) -> Result<Vec<f64>> {
    let n = mesh.num_nodes();
    let dim = mesh.dim();
    let mut g = vec![0.0; dim * n];
    for s in set.iter() {
        let ev = eval_levelset(ls, mesh.node(s))?;
        for a in 0..dim {
            g[a * n + s] = 2.0 * w * ev.sigma * ev.grad[a];
        }
    }
    Ok(g)
}

/// Hessian of F_σ as triplets, one dim×dim block per fitted node.
pub fn hess_sigma(
    mesh: &HighOrderMesh,
    ls: &LevelSetField,
    set: &NodeSet,
    w: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let n = mesh.num_nodes();
    let dim = mesh.dim();
    let mut triplets = Vec::with_capacity(dim * dim * set.len());
    for s in set.iter() {
        let ev = eval_levelset(ls, mesh.node(s))?;
        for a in 0..dim {
            for b in 0..dim {
                let v = 2.0 * w * (ev.grad[a] * ev.grad[b] + ev.sigma * ev.hess[a][b]);
                triplets.push((a * n + s, b * n + s, v));
            }
        }
    }
    Ok(triplets)
}

/// Interface error max_{s∈𝒮} |σ(x_s)|.
pub fn fit_error(mesh: &HighOrderMesh, ls: &LevelSetField, set: &NodeSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyFitSet("fit error over an empty node set".into()));
    }
    let mut worst = 0.0f64;
    for s in set.iter() {
        worst = worst.max(eval_levelset(ls, mesh.node(s))?.sigma.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_shape, LevelSetField, PrimitiveTree};
    use crate::mesh::{make_cartesian, NodeSet};
    use crate::refelem::Geom;
    use approx::assert_relative_eq;

    fn halfspace_y(c: f64) -> LevelSetField {
        LevelSetField::analytic(
            PrimitiveTree::Halfspace { point: [0.0, c, 0.0], normal: [0.0, 1.0, 0.0] },
            2,
        )
    }

    #[test]
    fn objective_of_one_offset_node() {
        // One fitted node at σ = 0.1 under w = 10³ gives F_σ = 10.
        let mesh = make_cartesian(Geom::Quad, [1, 1, 1], 1).unwrap();
        let s = (0..4).find(|&i| mesh.node(i)[1] == 1.0).unwrap();
        let set = NodeSet::from_iter([s]);
        let f = objective_sigma(&mesh, &halfspace_y(0.9), &set, 1e3).unwrap();
        assert_relative_eq!(f, 10.0, max_relative = 1e-12);
        let e = fit_error(&mesh, &halfspace_y(0.9), &set).unwrap();
        assert_relative_eq!(e, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn gradient_of_one_offset_node() {
        // σ = x₁ − 1/2 and a fitted node at x₁ = 0.7: the only nonzero
        // gradient entry is 2σ∂₁σ = 0.4 in that node's x₁ slot.
        let mut mesh = make_cartesian(Geom::Quad, [1, 1, 1], 1).unwrap();
        let n = mesh.num_nodes();
        let s = (0..n).find(|&i| mesh.node(i)[1] == 1.0).unwrap();
        mesh.coords_mut()[n + s] = 0.7;
        let set = NodeSet::from_iter([s]);
        let g = grad_sigma(&mesh, &halfspace_y(0.5), &set, 1.0).unwrap();
        for (k, &v) in g.iter().enumerate() {
            if k == n + s {
                assert_relative_eq!(v, 0.4, max_relative = 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn zero_on_the_zero_set() {
        // Nodes placed exactly on the circle contribute nothing.
        let mesh = make_cartesian(Geom::Quad, [1, 1, 1], 1).unwrap();
        let mut mesh = mesh;
        let n = mesh.num_nodes();
        for i in 0..n {
            let ang = i as f64;
            mesh.coords_mut()[i] = 0.5 + 0.3 * ang.cos();
            mesh.coords_mut()[n + i] = 0.5 + 0.3 * ang.sin();
        }
        let ls = builtin_shape("circle").unwrap();
        let set = NodeSet::from_iter(0..n);
        assert!(objective_sigma(&mesh, &ls, &set, 1e6).unwrap() < 1e-20);
        assert!(fit_error(&mesh, &ls, &set).unwrap() < 1e-12);
        assert!(grad_sigma(&mesh, &ls, &set, 1e6).unwrap().iter().all(|&v| v.abs() < 1e-6));
    }

    #[test]
    fn empty_set_is_inert() {
        let mesh = make_cartesian(Geom::Quad, [2, 2, 1], 1).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let set = NodeSet::from_iter([]);
        assert_eq!(objective_sigma(&mesh, &ls, &set, 1e3).unwrap(), 0.0);
        assert!(grad_sigma(&mesh, &ls, &set, 1e3).unwrap().iter().all(|&v| v == 0.0));
        assert!(hess_sigma(&mesh, &ls, &set, 1e3).unwrap().is_empty());
        assert!(matches!(fit_error(&mesh, &ls, &set), Err(Error::EmptyFitSet(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let n = mesh.num_nodes();
        let set = NodeSet::from_iter((0..n).step_by(7));
        let w = 3.7;
        let g = grad_sigma(&mesh, &ls, &set, w).unwrap();

        let h = 1e-6;
        for s in set.iter() {
            for a in 0..2 {
                let k = a * n + s;
                let mut plus = mesh.clone();
                plus.coords_mut()[k] += h;
                let mut minus = mesh.clone();
                minus.coords_mut()[k] -= h;
                let fd = (objective_sigma(&plus, &ls, &set, w).unwrap()
                    - objective_sigma(&minus, &ls, &set, w).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(g[k], fd, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mesh = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let n = mesh.num_nodes();
        let set = NodeSet::from_iter((0..n).step_by(11));
        let w = 2.25;
        let mut hess = std::collections::BTreeMap::new();
        for (r, c, v) in hess_sigma(&mesh, &ls, &set, w).unwrap() {
            *hess.entry((r, c)).or_insert(0.0) += v;
        }

        let h = 1e-5;
        for s in set.iter() {
            for b in 0..2 {
                let k = b * n + s;
                let mut plus = mesh.clone();
                plus.coords_mut()[k] += h;
                let mut minus = mesh.clone();
                minus.coords_mut()[k] -= h;
                let gp = grad_sigma(&plus, &ls, &set, w).unwrap();
                let gm = grad_sigma(&minus, &ls, &set, w).unwrap();
                for a in 0..2 {
                    let r = a * n + s;
                    let fd = (gp[r] - gm[r]) / (2.0 * h);
                    let have = hess.get(&(r, k)).copied().unwrap_or(0.0);
                    assert_relative_eq!(have, fd, max_relative = 1e-5, epsilon = 1e-9);
                }
            }
        }
    }
}
