//! Everything specific to surface fitting: marking elements against the
//! level set, relabeling and splitting so no element straddles the
//! interface badly, choosing the fitted node set 𝒮, and the weighted
//! penalty with its adaptation schedule.
//!
//! The usual pipeline is mark → relabel → split → select, after which the
//! solver drives the fitted nodes onto {σ = 0}:
//!
//! 1. [`mark_integral`] or [`mark_sign_at_max`] labels each element with a
//!    material indicator η from the sign of σ.
//! 2. [`relabel`] flips labels so every element keeps at most one
//!    interface face, emitting split requests where flipping cannot help.
//! 3. [`split_quads`] replaces the requested elements by conforming
//!    templates; [`trim`] optionally extracts one material as a new mesh
//!    for boundary fitting.
//! 4. [`select_fit_nodes`] collects 𝒮, the nodes the penalty acts on.

pub mod marking;
pub mod penalty;
pub mod split;
pub mod weight;

pub use marking::{interface_face_counts, mark_integral, mark_sign_at_max, relabel, SplitRequest};
pub use penalty::{fit_error, grad_sigma, hess_sigma, objective_sigma};
pub use split::{split_quads, trim};
pub use weight::{CounterMode, WeightState};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mesh::{face_map, HighOrderMesh, NodeSet};
use crate::refelem::local_face_nodes;

/// Where the fitted nodes come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitMode {
    /// Nodes of interior faces shared by elements whose material labels
    /// differ. The mesh must carry a material column.
    Interface,
    /// Nodes of boundary faces carrying one of the given attributes.
    Boundary(Vec<i32>),
}

/// Collects the fitted node set 𝒮 under the given mode. Every node of a
/// qualifying face belongs to 𝒮, corners and mid-face nodes alike; an
/// empty result is an error since fitting would be a silent no-op.
pub fn select_fit_nodes(mesh: &HighOrderMesh, mode: &FitMode) -> Result<NodeSet> {
    let geom = mesh.geom();
    let p = mesh.order();
    let mut ids = BTreeSet::new();
    match mode {
        FitMode::Interface => {
            let eta = mesh.material().ok_or_else(|| {
                Error::InvalidArgument(
                    "interface fitting needs a mesh with a material column".into(),
                )
            })?;
            for sides in face_map(mesh).values() {
                if let [(e0, f0), (e1, _)] = sides[..] {
                    if eta[e0] != eta[e1] {
                        let conn = mesh.elem_nodes(e0);
                        for l in local_face_nodes(geom, p, f0) {
                            ids.insert(conn[l]);
                        }
                    }
                }
            }
            if ids.is_empty() {
                return Err(Error::EmptyFitSet(
                    "no interior face separates differing materials".into(),
                ));
            }
        }
        FitMode::Boundary(attrs) => {
            for bf in mesh.boundary_faces() {
                if attrs.contains(&bf.attr) {
                    let conn = mesh.elem_nodes(bf.elem);
                    for l in local_face_nodes(geom, p, bf.local_face) {
                        ids.insert(conn[l]);
                    }
                }
            }
            if ids.is_empty() {
                return Err(Error::EmptyFitSet(format!(
                    "no boundary face carries an attribute from {attrs:?}"
                )));
            }
        }
    }
    Ok(NodeSet::from_iter(ids))
}
