//! Material marking: classifies elements against the zero level set and
//! cleans the resulting interface up with the two-pass relabeling rule.

use crate::error::Result;
use crate::geometry::{eval_levelset, LevelSetField};
use crate::mesh::{elem_neighbors, HighOrderMesh};

/// An element that kept two or more interface faces after relabeling and
/// should be subdivided by [`split_quads`](crate::fitting::split_quads).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRequest {
    pub elem: usize,
    /// Local faces of `elem` on the material interface, ascending.
    pub marked_faces: Vec<usize>,
}

/// Physical position of quadrature point `q` of element `e`.
pub(crate) fn position_at_q(mesh: &HighOrderMesh, e: usize, q: usize) -> [f64; 3] {
    let vals = mesh.ref_elem().qvalues(q);
    let mut x = [0.0; 3];
    for (i, &id) in mesh.elem_nodes(e).iter().enumerate() {
        let p = mesh.node(id);
        for (a, c) in x.iter_mut().enumerate() {
            *c += p[a] * vals[i];
        }
    }
    x
}

/// Marks each element by the sign of ∫_E σ, evaluated with the mesh
/// quadrature: η_E = 0 where the integral is nonnegative, 1 otherwise.
pub fn mark_integral(mesh: &HighOrderMesh, ls: &LevelSetField) -> Result<Vec<i32>> {
    let rule = mesh.ref_elem().quadrature();
    let mut eta = Vec::with_capacity(mesh.num_elems());
    for e in 0..mesh.num_elems() {
        let mut total = 0.0;
        for q in 0..rule.points.len() {
            let sigma = eval_levelset(ls, position_at_q(mesh, e, q))?.sigma;
            total += rule.weights[q] * mesh.jacobian_at_q(e, q).det() * sigma;
        }
        eta.push(if total >= 0.0 { 0 } else { 1 });
    }
    Ok(eta)
}

/// Marks each element by the sign of σ at the quadrature point where |σ| is
/// largest, the max-norm variant of [`mark_integral`]. Both agree wherever
/// σ keeps one sign over the element; they can differ on straddling
/// elements when the smaller-area side carries the larger excursion.
pub fn mark_sign_at_max(mesh: &HighOrderMesh, ls: &LevelSetField) -> Result<Vec<i32>> {
    let rule = mesh.ref_elem().quadrature();
    let mut eta = Vec::with_capacity(mesh.num_elems());
    for e in 0..mesh.num_elems() {
        let mut best_abs = f64::NEG_INFINITY;
        let mut best = 0.0;
        for q in 0..rule.points.len() {
            let sigma = eval_levelset(ls, position_at_q(mesh, e, q))?.sigma;
            if sigma.abs() > best_abs {
                best_abs = sigma.abs();
                best = sigma;
            }
        }
        eta.push(if best >= 0.0 { 0 } else { 1 });
    }
    Ok(eta)
}

/// Local faces of `e` currently shared with an element of the other
/// material, given the neighbor table and the labels `eta`.
fn marked_faces(neighbors: &[Vec<Option<usize>>], eta: &[i32], e: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (f, nb) in neighbors[e].iter().enumerate() {
        if let Some(n) = nb {
            if eta[*n] != eta[e] {
                out.push(f);
            }
        }
    }
    out
}

/// Per-element count of interface faces N_{E,M} under the labels `eta`.
pub fn interface_face_counts(mesh: &HighOrderMesh, eta: &[i32]) -> Vec<usize> {
    let neighbors = elem_neighbors(mesh);
    (0..mesh.num_elems()).map(|e| marked_faces(&neighbors, eta, e).len()).collect()
}

/// Two-pass interface cleanup. Within each pass elements are visited in
/// ascending id and N_{E,M} is counted against the labels current at that
/// point: at most one interface face keeps the label, all-but-one flips it.
/// The first pass visits the elements marked η_E = 0, the second the
/// η_E = 1 ones, so adjacent elements cannot both flip. Elements still
/// holding two or more interface faces afterwards keep their label and are
/// returned as split requests.
pub fn relabel(mesh: &HighOrderMesh, eta: &[i32]) -> (Vec<i32>, Vec<SplitRequest>) {
    assert_eq!(eta.len(), mesh.num_elems(), "one η entry per element");
    let neighbors = elem_neighbors(mesh);
    let nf = mesh.geom().num_faces();
    let mut labels = eta.to_vec();
    for pass_value in [0, 1] {
        for e in 0..mesh.num_elems() {
            if eta[e] != pass_value {
                continue;
            }
            if marked_faces(&neighbors, &labels, e).len() == nf - 1 {
                labels[e] = 1 - labels[e];
            }
        }
    }
    let mut requests = Vec::new();
    for e in 0..mesh.num_elems() {
        let faces = marked_faces(&neighbors, &labels, e);
        if faces.len() > 1 {
            requests.push(SplitRequest { elem: e, marked_faces: faces });
        }
    }
    (labels, requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_shape, LevelSetField, PrimitiveTree};
    use crate::mesh::{make_cartesian, make_cartesian_tri, TriSplit};
    use crate::refelem::Geom;

    fn halfspace(point: [f64; 3], normal: [f64; 3]) -> LevelSetField {
        LevelSetField::analytic(PrimitiveTree::Halfspace { point, normal }, 2)
    }

    #[test]
    fn uniform_sign_marks_everything_alike() {
        let mesh = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        // σ = y + 5 > 0 everywhere, then σ = y - 5 < 0 everywhere.
        let above = halfspace([0.0, -5.0, 0.0], [0.0, 1.0, 0.0]);
        let below = halfspace([0.0, 5.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(mark_integral(&mesh, &above).unwrap(), vec![0; 9]);
        assert_eq!(mark_integral(&mesh, &below).unwrap(), vec![1; 9]);
        assert_eq!(mark_sign_at_max(&mesh, &above).unwrap(), vec![0; 9]);
        assert_eq!(mark_sign_at_max(&mesh, &below).unwrap(), vec![1; 9]);
    }

    /// Independent oracle: the sign of the element mean of σ from a dense
    /// midpoint-rule sample, avoiding the mesh quadrature entirely.
    fn mean_sign_oracle(mesh: &HighOrderMesh, ls: &LevelSetField) -> Vec<i32> {
        let n = 40;
        (0..mesh.num_elems())
            .map(|e| {
                let mut total = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        let xr = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64, 0.0];
                        let x = mesh.position(e, xr).unwrap();
                        total += eval_levelset(ls, x).unwrap().sigma;
                    }
                }
                if total >= 0.0 {
                    0
                } else {
                    1
                }
            })
            .collect()
    }

    #[test]
    fn circle_marking_matches_area_oracle() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let eta = mark_integral(&mesh, &ls).unwrap();
        assert_eq!(eta, mean_sign_oracle(&mesh, &ls));
        // The circle of radius 0.3 about the center covers the four central
        // elements and no others.
        assert_eq!(eta.iter().filter(|&&v| v == 1).count(), 4);
        for (e, &v) in eta.iter().enumerate() {
            let c = mesh.position(e, [0.5, 0.5, 0.0]).unwrap();
            let d = ((c[0] - 0.5).powi(2) + (c[1] - 0.5).powi(2)).sqrt();
            assert_eq!(v == 1, d < 0.2, "element {e} at distance {d}");
        }
    }

    #[test]
    fn sign_at_max_picks_the_dominant_excursion() {
        // σ = y - (-0.8 + 8x - 8x²) on the unit square: the element mean is
        // -1/30 (integral rule marks 1) but the largest excursion is +1.8 at
        // the upper corners against -1.2 at the parabola crest, so the
        // max-norm rule marks 0.
        let mesh = make_cartesian(Geom::Quad, [1, 1, 1], 2).unwrap();
        let ls =
            LevelSetField::analytic(PrimitiveTree::Parabola { coeffs: [-0.8, 8.0, -8.0] }, 2);
        assert_eq!(mark_integral(&mesh, &ls).unwrap(), vec![1]);
        assert_eq!(mark_sign_at_max(&mesh, &ls).unwrap(), vec![0]);
    }

    #[test]
    fn marks_agree_where_sigma_keeps_one_sign() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let by_integral = mark_integral(&mesh, &ls).unwrap();
        let by_max = mark_sign_at_max(&mesh, &ls).unwrap();
        for e in 0..mesh.num_elems() {
            let mut signs = [false, false];
            for j in 0..20 {
                for i in 0..20 {
                    let xr = [(i as f64 + 0.5) / 20.0, (j as f64 + 0.5) / 20.0, 0.0];
                    let s = eval_levelset(&ls, mesh.position(e, xr).unwrap()).unwrap().sigma;
                    signs[if s <= 0.0 { 0 } else { 1 }] = true;
                }
            }
            if !(signs[0] && signs[1]) {
                assert_eq!(by_integral[e], by_max[e], "element {e}");
            }
        }
    }

    #[test]
    fn single_interface_face_is_kept() {
        let mesh = make_cartesian(Geom::Quad, [2, 1, 1], 1).unwrap();
        let (labels, requests) = relabel(&mesh, &[0, 1]);
        assert_eq!(labels, vec![0, 1]);
        assert!(requests.is_empty());
    }

    #[test]
    fn triangle_with_two_interface_faces_flips() {
        // Two-way split of a 2×1 grid: triangle 0 borders triangles 1 and 3.
        // With η = [0, 1, 0, 1] it has two of its three faces on the
        // interface and flips in the first pass; afterwards every element
        // has at most one interface face and nothing is requested.
        let mesh = make_cartesian_tri([2, 1, 1], 1, TriSplit::Two).unwrap();
        let (labels, requests) = relabel(&mesh, &[0, 1, 0, 1]);
        assert_eq!(labels, vec![1, 1, 0, 1]);
        assert!(requests.is_empty());
        let counts = interface_face_counts(&mesh, &labels);
        assert!(counts.iter().all(|&c| c <= 1), "counts {counts:?}");
    }

    #[test]
    fn corner_quads_are_requested_not_flipped() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let eta = mark_integral(&mesh, &ls).unwrap();
        let (labels, requests) = relabel(&mesh, &eta);
        // The 2×2 marked block survives relabeling: each of its elements
        // keeps two adjacent interface faces and requests a split.
        assert_eq!(labels, eta);
        assert_eq!(requests.len(), 4);
        for req in &requests {
            assert_eq!(req.marked_faces.len(), 2);
            let [f, g] = req.marked_faces[..] else { unreachable!() };
            assert_ne!(f / 2, g / 2, "faces {f},{g} should meet at a corner");
        }
    }

    #[test]
    fn relabel_is_deterministic_and_permutation_equivariant() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let ls = builtin_shape("circle").unwrap();
        let eta = mark_integral(&mesh, &ls).unwrap();
        let (labels, requests) = relabel(&mesh, &eta);
        let (labels2, requests2) = relabel(&mesh, &eta);
        assert_eq!(labels, labels2);
        assert_eq!(requests, requests2);

        // Reverse the element storage order and relabel the permuted mesh:
        // labels must follow the permutation.
        let npe = mesh.ref_elem().num_nodes();
        let n = mesh.num_elems();
        let mut elems = Vec::new();
        for e in (0..n).rev() {
            elems.extend_from_slice(mesh.elem_nodes(e));
        }
        let nodes: Vec<[f64; 3]> = (0..mesh.num_nodes()).map(|i| mesh.node(i)).collect();
        let permuted = HighOrderMesh::from_parts(
            mesh.ref_elem().clone(),
            nodes,
            elems,
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(permuted.ref_elem().num_nodes(), npe);
        let eta_p: Vec<i32> = (0..n).map(|e| eta[n - 1 - e]).collect();
        let (labels_p, _) = relabel(&permuted, &eta_p);
        for e in 0..n {
            assert_eq!(labels_p[e], labels[n - 1 - e], "permuted element {e}");
        }
    }
}
