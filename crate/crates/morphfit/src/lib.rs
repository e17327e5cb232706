//! Morphs high-order finite element meshes so that selected faces align with
//! the zero isocontour of an implicit function, while keeping element quality
//! under control.
//!
//! The library combines two ingredients:
//!
//! * a target-matrix mesh quality objective evaluated on high-order elements
//!   ([`tmop`]), and
//! * a penalty term that pulls a chosen set of mesh nodes onto the zero level
//!   set of a scalar field ([`fitting`]),
//!
//! minimized jointly over the mesh node positions with a damped Newton
//! iteration ([`solver`]). Level-set fields can be analytic primitives, CSG
//! compositions of primitives, or piecewise polynomial fields stored on an
//! adaptively refined background tree ([`geometry`]).
//!
//! A typical interface-fitting run looks like:
//!
//! ```
//! use morphfit::geometry::builtin_shape;
//! use morphfit::mesh::make_cartesian;
//! use morphfit::refelem::Geom;
//! use morphfit::fitting::{
//!     mark_integral, relabel, select_fit_nodes, split_quads, FitMode, WeightState,
//! };
//! use morphfit::solver::{newton_fit, SolverConfig};
//! use morphfit::tmop::{MetricId, TargetSpec};
//!
//! let coarse = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
//! let ls = builtin_shape("circle").unwrap();
//! let eta = mark_integral(&coarse, &ls).unwrap();
//! let (labels, requests) = relabel(&coarse, &eta);
//! let mut mesh = split_quads(&coarse, &labels, &requests).unwrap();
//! let set = select_fit_nodes(&mesh, &FitMode::Interface).unwrap();
//! let fixed = mesh.boundary_node_set().without(&set);
//! let mut weight = WeightState::adaptive(10.0);
//! let cfg = SolverConfig { max_iter: 40, ..SolverConfig::default() };
//! let report = newton_fit(
//!     &mut mesh,
//!     &TargetSpec::identity(),
//!     MetricId::Mu2,
//!     &ls,
//!     &set,
//!     &fixed,
//!     &mut weight,
//!     &cfg,
//! )
//! .unwrap();
//! assert!(report.final_fit_error().unwrap() < 1e-4);
//! ```

pub mod error;
pub mod fitting;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod refelem;
pub mod solver;
pub mod sparse;
pub mod tmop;

pub use error::{Error, Result};
