//! Structured mesh generation on the unit square/cube.
//!
//! Tensor meshes index nodes on an exact per-axis lattice (element index
//! times order plus local Gauss-Lobatto index), so shared nodes are created
//! once and reloaded bit-identically. Simplex meshes place their equispaced
//! nodes on a half-cell integer lattice and weld through exact integer keys;
//! no floating-point tolerance is involved anywhere.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::faces::face_map;
use crate::mesh::{BoundaryFace, HighOrderMesh};
use crate::refelem::{gauss_lobatto_nodes, Geom, ReferenceElement};

/// How each grid cell is split into triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriSplit {
    /// Two triangles along the cell diagonal.
    Two,
    /// Four triangles through the cell center.
    Four,
}

/// Cartesian mesh of the unit domain: `counts` cells per direction (the
/// third entry is ignored in 2D), elements of the given `order`. Triangles
/// use the two-way diagonal split (see [`make_cartesian_tri`] for the
/// four-way option); each hex cell splits into 24 tets, four per face
/// through the cell center.
pub fn make_cartesian(geom: Geom, counts: [usize; 3], order: usize) -> Result<HighOrderMesh> {
    match geom {
        Geom::Quad | Geom::Hex => tensor_mesh(geom, counts, order),
        Geom::Tri => make_cartesian_tri(counts, order, TriSplit::Two),
        Geom::Tet => tet_mesh(counts, order),
        Geom::Segment => Err(Error::UnsupportedGeometry("segment meshes".into())),
    }
}

/// Triangle mesh of the unit square with an explicit split pattern.
pub fn make_cartesian_tri(counts: [usize; 3], order: usize, split: TriSplit) -> Result<HighOrderMesh> {
    let n = check_counts(2, counts)?;
    let p = order;
    let ref_elem = ReferenceElement::new(Geom::Tri, p)?;
    let mut welder = Welder::new(2, p, n);
    let mut elems: Vec<usize> = Vec::new();
    let s = (2 * p) as i64;
    for ey in 0..n[1] as i64 {
        for ex in 0..n[0] as i64 {
            let c00 = [s * ex, s * ey, 0];
            let c10 = [s * (ex + 1), s * ey, 0];
            let c01 = [s * ex, s * (ey + 1), 0];
            let c11 = [s * (ex + 1), s * (ey + 1), 0];
            // The right-angle vertex comes first so each triangle maps from
            // the reference by a rotation and scale: det A > 0 and the
            // shape metrics see the unperturbed mesh as already ideal.
            let tris: Vec<[[i64; 3]; 3]> = match split {
                TriSplit::Two => vec![[c10, c11, c00], [c01, c00, c11]],
                TriSplit::Four => {
                    let m = [s * ex + p as i64, s * ey + p as i64, 0];
                    vec![[m, c00, c10], [m, c10, c11], [m, c11, c01], [m, c01, c00]]
                }
            };
            for t in tris {
                append_simplex_nodes(&mut elems, &mut welder, p, &t);
            }
        }
    }
    finish(ref_elem, welder.nodes, elems)
}

fn tet_mesh(counts: [usize; 3], order: usize) -> Result<HighOrderMesh> {
    let n = check_counts(3, counts)?;
    let p = order;
    let ref_elem = ReferenceElement::new(Geom::Tet, p)?;
    let mut welder = Welder::new(3, p, n);
    let mut elems: Vec<usize> = Vec::new();
    let s = (2 * p) as i64;
    let h = p as i64;
    for ez in 0..n[2] as i64 {
        for ey in 0..n[1] as i64 {
            for ex in 0..n[0] as i64 {
                let e = [ex, ey, ez];
                let body = [s * ex + h, s * ey + h, s * ez + h];
                for axis in 0..3usize {
                    let (u, w) = match axis {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    for side in 0..2i64 {
                        let mut fc = body;
                        fc[axis] = s * (e[axis] + side);
                        // Face corners in cyclic order over the free axes.
                        let cyc = [(0i64, 0i64), (1, 0), (1, 1), (0, 1)];
                        let corner = |su: i64, sw: i64| {
                            let mut c = [0i64; 3];
                            c[axis] = s * (e[axis] + side);
                            c[u] = s * (e[u] + su);
                            c[w] = s * (e[w] + sw);
                            c
                        };
                        for t in 0..4 {
                            let mut q0 = corner(cyc[t].0, cyc[t].1);
                            let mut q1 = corner(cyc[(t + 1) % 4].0, cyc[(t + 1) % 4].1);
                            if orient3(q0, q1, fc, body) < 0 {
                                std::mem::swap(&mut q0, &mut q1);
                            }
                            append_simplex_nodes(&mut elems, &mut welder, p, &[q0, q1, fc, body]);
                        }
                    }
                }
            }
        }
    }
    finish(ref_elem, welder.nodes, elems)
}

fn tensor_mesh(geom: Geom, counts: [usize; 3], order: usize) -> Result<HighOrderMesh> {
    let d = geom.dim();
    let n = check_counts(d, counts)?;
    let p = order;
    let ref_elem = ReferenceElement::new(geom, p)?;
    let gl = gauss_lobatto_nodes(p)?;
    let mut m = [1usize; 3];
    for a in 0..d {
        m[a] = n[a] * p + 1;
    }
    let coord1 = |a: usize, g: usize| -> f64 {
        let e = (g / p).min(n[a] - 1);
        (e as f64 + gl[g - e * p]) / n[a] as f64
    };
    let mut nodes = Vec::with_capacity(m[0] * m[1] * m[2]);
    for gz in 0..m[2] {
        for gy in 0..m[1] {
            for gx in 0..m[0] {
                let mut x = [0.0; 3];
                x[0] = coord1(0, gx);
                x[1] = coord1(1, gy);
                if d == 3 {
                    x[2] = coord1(2, gz);
                }
                nodes.push(x);
            }
        }
    }
    let node_id = |g: [usize; 3]| g[0] + m[0] * (g[1] + m[1] * g[2]);
    let mut elems = Vec::new();
    let per = p + 1;
    let ez_max = if d == 3 { n[2] } else { 1 };
    for ez in 0..ez_max {
        for ey in 0..n[1] {
            for ex in 0..n[0] {
                let kmax = if d == 3 { per } else { 1 };
                for k in 0..kmax {
                    for j in 0..per {
                        for i in 0..per {
                            elems.push(node_id([ex * p + i, ey * p + j, ez * p + k]));
                        }
                    }
                }
            }
        }
    }
    finish(ref_elem, nodes, elems)
}

fn check_counts(d: usize, counts: [usize; 3]) -> Result<[usize; 3]> {
    let mut n = [1usize; 3];
    for a in 0..d {
        if counts[a] < 1 {
            return Err(Error::InvalidArgument(format!(
                "cell count {} in direction {a} (need at least 1)",
                counts[a]
            )));
        }
        n[a] = counts[a];
    }
    Ok(n)
}

/// Welds simplex nodes through exact integer lattice keys. Keys live on the
/// half-cell lattice: cell corners at multiples of 2p, cell/face centers at
/// odd multiples of p.
struct Welder {
    map: BTreeMap<[i64; 3], usize>,
    nodes: Vec<[f64; 3]>,
    denom: [f64; 3],
    dim: usize,
}

impl Welder {
    fn new(dim: usize, p: usize, n: [usize; 3]) -> Self {
        let mut denom = [1.0; 3];
        for a in 0..dim {
            denom[a] = (2 * p * n[a]) as f64;
        }
        Welder { map: BTreeMap::new(), nodes: Vec::new(), denom, dim }
    }

    fn id(&mut self, key: [i64; 3]) -> usize {
        if let Some(&id) = self.map.get(&key) {
            return id;
        }
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = key[a] as f64 / self.denom[a];
        }
        let id = self.nodes.len();
        self.nodes.push(x);
        self.map.insert(key, id);
        id
    }
}

/// Emits the equispaced lattice nodes of one simplex given its vertex keys,
/// in the reference-element node ordering.
fn append_simplex_nodes(elems: &mut Vec<usize>, welder: &mut Welder, p: usize, verts: &[[i64; 3]]) {
    let v0 = verts[0];
    let steps: Vec<[i64; 3]> = verts[1..]
        .iter()
        .map(|v| {
            let mut ddir = [0i64; 3];
            for a in 0..3 {
                debug_assert_eq!((v[a] - v0[a]) % p as i64, 0);
                ddir[a] = (v[a] - v0[a]) / p as i64;
            }
            ddir
        })
        .collect();
    let key_at = |ijk: [usize; 3]| {
        let mut k = v0;
        for (t, step) in steps.iter().enumerate() {
            for a in 0..3 {
                k[a] += ijk[t] as i64 * step[a];
            }
        }
        k
    };
    if verts.len() == 3 {
        for j in 0..=p {
            for i in 0..=(p - j) {
                elems.push(welder.id(key_at([i, j, 0])));
            }
        }
    } else {
        for k in 0..=p {
            for j in 0..=(p - k) {
                for i in 0..=(p - k - j) {
                    elems.push(welder.id(key_at([i, j, k])));
                }
            }
        }
    }
}

fn orient3(v0: [i64; 3], v1: [i64; 3], v2: [i64; 3], v3: [i64; 3]) -> i64 {
    let d1 = [v1[0] - v0[0], v1[1] - v0[1], v1[2] - v0[2]];
    let d2 = [v2[0] - v0[0], v2[1] - v0[1], v2[2] - v0[2]];
    let d3 = [v3[0] - v0[0], v3[1] - v0[1], v3[2] - v0[2]];
    d1[0] * (d2[1] * d3[2] - d2[2] * d3[1]) - d1[1] * (d2[0] * d3[2] - d2[2] * d3[0])
        + d1[2] * (d2[0] * d3[1] - d2[1] * d3[0])
}

/// Attaches geometry-derived boundary faces (attribute 2·axis + side + 1,
/// so x=0 → 1, x=1 → 2, y=0 → 3, ...) and wraps everything in a mesh.
fn finish(ref_elem: ReferenceElement, nodes: Vec<[f64; 3]>, elems: Vec<usize>) -> Result<HighOrderMesh> {
    let mut mesh = HighOrderMesh::from_parts(ref_elem, nodes, elems, Vec::new(), None)?;
    let d = mesh.dim();
    let mut bdr = Vec::new();
    for (key, sides) in face_map(&mesh) {
        if sides.len() != 1 {
            continue;
        }
        let (e, f) = sides[0];
        let mut attr = 0;
        'outer: for axis in 0..d {
            for side in 0..2usize {
                let v = side as f64;
                if key.iter().all(|&id| (mesh.node(id)[axis] - v).abs() < 1e-12) {
                    attr = (2 * axis + side + 1) as i32;
                    break 'outer;
                }
            }
        }
        bdr.push(BoundaryFace { elem: e, local_face: f, attr });
    }
    bdr.sort_by_key(|bf| (bf.elem, bf.local_face));
    mesh.set_boundary_faces(bdr);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_and_node_counts() {
        let m = make_cartesian(Geom::Quad, [1, 1, 1], 1).unwrap();
        assert_eq!(m.num_elems(), 1);
        assert_eq!(m.num_nodes(), 4);

        let m = make_cartesian(Geom::Hex, [8, 8, 8], 3).unwrap();
        assert_eq!(m.num_elems(), 512);
        assert_eq!(m.num_nodes(), 25 * 25 * 25);

        let m = make_cartesian(Geom::Tet, [4, 4, 4], 1).unwrap();
        assert_eq!(m.num_elems(), 64 * 24);

        let m = make_cartesian(Geom::Tri, [3, 2, 1], 2).unwrap();
        assert_eq!(m.num_elems(), 12);
        // 2-split triangles share the full tensor lattice plus nothing extra.
        assert_eq!(m.num_nodes(), 7 * 5);

        let m = make_cartesian_tri([2, 2, 1], 1, TriSplit::Four).unwrap();
        assert_eq!(m.num_elems(), 16);
        assert_eq!(m.num_nodes(), 9 + 4);
    }

    #[test]
    fn all_cartesian_meshes_are_valid() {
        for (geom, counts, order) in [
            (Geom::Quad, [4usize, 3, 1], 3),
            (Geom::Tri, [3, 3, 1], 2),
            (Geom::Hex, [2, 2, 2], 2),
            (Geom::Tet, [2, 2, 2], 2),
        ] {
            let mesh = make_cartesian(geom, counts, order).unwrap();
            assert!(mesh.min_det_a() > 0.0, "{}", geom.name());
            crate::mesh::check_conforming(&mesh).unwrap();
        }
    }

    #[test]
    fn meshes_fill_the_unit_domain() {
        // Σ_E Σ_q w_q det(A) = volume of the unit box; exact for affine
        // elements, and a strong check of tet orientations and quadrature.
        for (geom, counts) in [
            (Geom::Quad, [3usize, 2, 1]),
            (Geom::Tri, [2, 3, 1]),
            (Geom::Hex, [2, 2, 2]),
            (Geom::Tet, [2, 2, 2]),
        ] {
            let mesh = make_cartesian(geom, counts, 2).unwrap();
            let rule = mesh.ref_elem().quadrature();
            let mut vol = 0.0;
            for e in 0..mesh.num_elems() {
                for q in 0..rule.points.len() {
                    vol += rule.weights[q] * mesh.jacobian_at_q(e, q).det();
                }
            }
            assert!((vol - 1.0).abs() < 1e-12, "{}: volume {vol}", geom.name());
        }
        let mesh = make_cartesian_tri([3, 3, 1], 3, TriSplit::Four).unwrap();
        let rule = mesh.ref_elem().quadrature();
        let mut vol = 0.0;
        for e in 0..mesh.num_elems() {
            for q in 0..rule.points.len() {
                vol += rule.weights[q] * mesh.jacobian_at_q(e, q).det();
            }
        }
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_attributes_by_side() {
        let mesh = make_cartesian(Geom::Quad, [2, 2, 1], 1).unwrap();
        assert_eq!(mesh.boundary_faces().len(), 8);
        for bf in mesh.boundary_faces() {
            assert!(bf.attr >= 1 && bf.attr <= 4);
        }
        // Two faces per side.
        for attr in 1..=4 {
            assert_eq!(mesh.boundary_faces().iter().filter(|b| b.attr == attr).count(), 2);
        }
        let mesh = make_cartesian(Geom::Hex, [2, 1, 1], 1).unwrap();
        assert_eq!(mesh.boundary_faces().len(), 10);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(make_cartesian(Geom::Quad, [0, 1, 1], 1).is_err());
        assert!(make_cartesian(Geom::Hex, [1, 1, 0], 1).is_err());
    }

    #[test]
    fn shared_nodes_are_bitwise_equal() {
        // Nodes on shared faces must be generated once: the count proves it
        // for tensor meshes; for simplices also check a diagonal node's
        // coordinates are plain lattice fractions.
        let mesh = make_cartesian(Geom::Tri, [2, 2, 1], 3).unwrap();
        for i in 0..mesh.num_nodes() {
            let p = mesh.node(i);
            for a in 0..2 {
                let scaled = p[a] * 12.0; // 2·p·n = 12 half-steps
                assert!((scaled - scaled.round()).abs() < 1e-12);
            }
        }
    }
}
