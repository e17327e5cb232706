//! Level-set machinery: analytic primitives and CSG trees, adaptively
//! refined background fields, signed-distance construction and point
//! location. Everything here is immutable after construction, so point
//! queries are safe to issue concurrently.

mod background;
mod distance;
mod locate;
mod primitives;

pub use background::{build_background, load_background, save_background, BackgroundField};
pub use distance::distance_field;
pub use locate::MeshLocator;
pub use primitives::{load_tree, parse_tree, PrimitiveTree};

use crate::error::{Error, Result};

/// σ together with its first and second derivatives at a point.
#[derive(Debug, Clone, Copy)]
pub struct LevelEval {
    pub sigma: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl LevelEval {
    pub fn zero() -> Self {
        LevelEval { sigma: 0.0, grad: [0.0; 3], hess: [[0.0; 3]; 3] }
    }

    /// The triple of −σ.
    pub fn negated(&self) -> Self {
        let mut out = *self;
        out.sigma = -out.sigma;
        for a in 0..3 {
            out.grad[a] = -out.grad[a];
            for b in 0..3 {
                out.hess[a][b] = -out.hess[a][b];
            }
        }
        out
    }
}

/// The level-set function σ used for alignment: either a closed-form
/// primitive tree or a discrete field sampled on a background tree.
#[derive(Debug, Clone)]
pub enum LevelSetField {
    Analytic { tree: PrimitiveTree, dim: usize },
    Discrete(BackgroundField),
}

impl LevelSetField {
    pub fn analytic(tree: PrimitiveTree, dim: usize) -> Self {
        LevelSetField::Analytic { tree, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            LevelSetField::Analytic { dim, .. } => *dim,
            LevelSetField::Discrete(bg) => bg.dim(),
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> Result<LevelEval> {
        match self {
            LevelSetField::Analytic { tree, dim } => Ok(tree.eval(x, *dim)),
            LevelSetField::Discrete(bg) => bg.eval(x),
        }
    }
}

/// σ, ∇σ, ∇²σ at x. The discrete variant answers only inside its domain.
pub fn eval_levelset(ls: &LevelSetField, x: [f64; 3]) -> Result<LevelEval> {
    ls.eval(x)
}

/// Two-material step 𝒢(x) = ∓1 from the composed membership function;
/// σ = 0 counts as inside (−1).
pub fn csg_step(tree: &PrimitiveTree, x: [f64; 3], dim: usize) -> f64 {
    if tree.eval(x, dim).sigma <= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Named shapes used by the examples and the test suite, so no external
/// geometry files are needed: `circle` and `sphere` (radius 0.3, centered),
/// plus 2D/3D composites `csg2d` and `csg3d` (cube ∩ sphere with
/// axis-aligned cylinders removed; in 2D, strips stand in for cylinders).
pub fn builtin_shape(name: &str) -> Result<LevelSetField> {
    let c2 = [0.5, 0.5, 0.0];
    let c3 = [0.5, 0.5, 0.5];
    match name {
        "circle" => Ok(LevelSetField::analytic(
            PrimitiveTree::Sphere { center: c2, radius: 0.3 },
            2,
        )),
        "sphere" => Ok(LevelSetField::analytic(
            PrimitiveTree::Sphere { center: c3, radius: 0.3 },
            3,
        )),
        "csg2d" => {
            let body = PrimitiveTree::Intersection(vec![
                PrimitiveTree::Box { center: c2, halfwidths: [0.25, 0.25, 0.0] },
                PrimitiveTree::Sphere { center: c2, radius: 0.3 },
            ]);
            let strips = PrimitiveTree::Union(vec![
                PrimitiveTree::Box { center: c2, halfwidths: [0.25, 0.15, 0.0] },
                PrimitiveTree::Box { center: c2, halfwidths: [0.15, 0.25, 0.0] },
            ]);
            Ok(LevelSetField::analytic(
                PrimitiveTree::Difference(Box::new(body), Box::new(strips)),
                2,
            ))
        }
        "csg3d" => {
            let body = PrimitiveTree::Intersection(vec![
                PrimitiveTree::Box { center: c3, halfwidths: [0.25, 0.25, 0.25] },
                PrimitiveTree::Sphere { center: c3, radius: 0.3 },
            ]);
            let cyl = |axis: [f64; 3]| PrimitiveTree::Cylinder {
                center: c3,
                axis,
                radius: 0.15,
                length: 0.5,
            };
            let holes = PrimitiveTree::Union(vec![
                cyl([1.0, 0.0, 0.0]),
                cyl([0.0, 1.0, 0.0]),
                cyl([0.0, 0.0, 1.0]),
            ]);
            Ok(LevelSetField::analytic(
                PrimitiveTree::Difference(Box::new(body), Box::new(holes)),
                3,
            ))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown builtin shape '{other}' (expected circle, sphere, csg2d or csg3d)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_signs_and_ties() {
        let LevelSetField::Analytic { tree, dim } = builtin_shape("sphere").unwrap() else {
            unreachable!()
        };
        assert_eq!(csg_step(&tree, [0.5, 0.5, 0.5], dim), -1.0);
        assert_eq!(csg_step(&tree, [0.95, 0.5, 0.5], dim), 1.0);
        // Exactly on a boundary (σ = 0): inside by the documented tie-break.
        let plane = PrimitiveTree::Halfspace { point: [0.0; 3], normal: [1.0, 0.0, 0.0] };
        assert_eq!(csg_step(&plane, [0.0, 0.3, 0.0], 2), -1.0);
        assert_eq!(csg_step(&plane, [1e-12, 0.3, 0.0], 2), 1.0);
    }

    #[test]
    fn builtin_csg_shapes() {
        let csg2 = builtin_shape("csg2d").unwrap();
        // The strips cover the center, so it is outside the kept region.
        assert!(csg2.eval([0.5, 0.5, 0.0]).unwrap().sigma > 0.0);
        // A diagonal lobe point survives.
        assert!(csg2.eval([0.3, 0.3, 0.0]).unwrap().sigma < 0.0);
        let csg3 = builtin_shape("csg3d").unwrap();
        // A body-diagonal point clear of all three bores survives.
        assert!(csg3.eval([0.6443, 0.6443, 0.6443]).unwrap().sigma < 0.0);
        // Cube corners are cut off by the sphere.
        assert!(csg3.eval([0.75, 0.75, 0.75]).unwrap().sigma > 0.0);
        // Near-corner points inside the cube but outside the sphere.
        assert!(csg3.eval([0.26, 0.26, 0.26]).unwrap().sigma > 0.0);
        // Cylinder bores are removed.
        assert!(csg3.eval([0.5, 0.5, 0.6]).unwrap().sigma > 0.0);
        assert!(builtin_shape("torus").is_err());
    }
}
