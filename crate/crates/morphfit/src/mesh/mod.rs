//! High-order mesh container: the global coordinate vector, connectivity,
//! element maps and their Jacobians, validity checks, I/O and structured
//! mesh generation.
//!
//! Coordinates are stored component-major: the global vector keeps all x
//! components first, then all y, then all z, so the solver can treat it
//! directly as the optimization vector. The entry for component `a` of node
//! `i` sits at index `a * n_nodes + i`.

mod cartesian;
mod faces;
mod io;
mod vtk;

pub use cartesian::{make_cartesian, make_cartesian_tri, TriSplit};
pub use faces::{check_conforming, elem_neighbors, face_map, FaceKey};
pub use io::{load, save, save_csv};
pub use vtk::save_vtk;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::refelem::{local_face_nodes, Geom, ReferenceElement};

/// A boundary face: element id, local face index, integer attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub elem: usize,
    pub local_face: usize,
    pub attr: i32,
}

/// The set 𝒮 of global node ids selected for fitting. BTreeSet keeps every
/// traversal deterministic.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    pub ids: BTreeSet<usize>,
}

impl NodeSet {
    pub fn from_iter(it: impl IntoIterator<Item = usize>) -> Self {
        NodeSet { ids: it.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids.iter().copied()
    }

    /// The ids of `self` that are not in `other`.
    pub fn without(&self, other: &NodeSet) -> NodeSet {
        NodeSet { ids: self.ids.difference(&other.ids).copied().collect() }
    }
}

/// A conforming mesh of a single element geometry and order.
#[derive(Debug, Clone)]
pub struct HighOrderMesh {
    ref_elem: ReferenceElement,
    /// Component-major coordinate vector, length dim * n_nodes.
    coords: Vec<f64>,
    n_nodes: usize,
    /// Flattened connectivity, n_elems * nodes_per_elem global node ids.
    elems: Vec<usize>,
    bdr_faces: Vec<BoundaryFace>,
    material: Option<Vec<i32>>,
}

impl HighOrderMesh {
    /// Builds a mesh from per-node positions and flattened connectivity,
    /// checking index validity. Boundary faces and material are optional
    /// extras; conformity is checked separately by [`check_conforming`].
    pub fn from_parts(
        ref_elem: ReferenceElement,
        nodes: Vec<[f64; 3]>,
        elems: Vec<usize>,
        bdr_faces: Vec<BoundaryFace>,
        material: Option<Vec<i32>>,
    ) -> Result<Self> {
        let npe = ref_elem.num_nodes();
        if !elems.len().is_multiple_of(npe) {
            return Err(Error::InvalidMesh(format!(
                "connectivity length {} is not a multiple of {npe} nodes per element",
                elems.len()
            )));
        }
        let n_nodes = nodes.len();
        let n_elems = elems.len() / npe;
        let mut seen = BTreeSet::new();
        for e in 0..n_elems {
            seen.clear();
            for &id in &elems[e * npe..(e + 1) * npe] {
                if id >= n_nodes {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} references node {id}, mesh has {n_nodes}"
                    )));
                }
                if !seen.insert(id) {
                    return Err(Error::InvalidMesh(format!("element {e} repeats node {id}")));
                }
            }
        }
        for f in &bdr_faces {
            if f.elem >= n_elems || f.local_face >= ref_elem.geom().num_faces() {
                return Err(Error::InvalidMesh(format!(
                    "boundary face ({}, {}) out of range",
                    f.elem, f.local_face
                )));
            }
        }
        if let Some(m) = &material {
            if m.len() != n_elems {
                return Err(Error::InvalidMesh(format!(
                    "material column has {} entries for {n_elems} elements",
                    m.len()
                )));
            }
        }
        let dim = ref_elem.dim();
        let mut coords = vec![0.0; dim * n_nodes];
        for (i, p) in nodes.iter().enumerate() {
            for a in 0..dim {
                coords[a * n_nodes + i] = p[a];
            }
        }
        Ok(HighOrderMesh { ref_elem, coords, n_nodes, elems, bdr_faces, material })
    }

    pub fn ref_elem(&self) -> &ReferenceElement {
        &self.ref_elem
    }

    pub fn geom(&self) -> Geom {
        self.ref_elem.geom()
    }

    pub fn order(&self) -> usize {
        self.ref_elem.order()
    }

    pub fn dim(&self) -> usize {
        self.ref_elem.dim()
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn num_elems(&self) -> usize {
        self.elems.len() / self.ref_elem.num_nodes()
    }

    /// The global coordinate vector 𝐱 (component-major).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn set_coords(&mut self, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.coords.len());
        self.coords.copy_from_slice(coords);
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.coords[a * self.n_nodes + i];
        }
        p
    }

    pub fn set_node(&mut self, i: usize, p: [f64; 3]) {
        for a in 0..self.dim() {
            self.coords[a * self.n_nodes + i] = p[a];
        }
    }

    pub fn elem_nodes(&self, e: usize) -> &[usize] {
        let npe = self.ref_elem.num_nodes();
        &self.elems[e * npe..(e + 1) * npe]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.bdr_faces
    }

    /// Global ids of every node that lies on a boundary face.
    pub fn boundary_node_set(&self) -> NodeSet {
        let mut ids = BTreeSet::new();
        for bf in &self.bdr_faces {
            let conn = self.elem_nodes(bf.elem);
            for l in local_face_nodes(self.geom(), self.order(), bf.local_face) {
                ids.insert(conn[l]);
            }
        }
        NodeSet { ids }
    }

    pub fn set_boundary_faces(&mut self, faces: Vec<BoundaryFace>) {
        self.bdr_faces = faces;
    }

    pub fn material(&self) -> Option<&[i32]> {
        self.material.as_deref()
    }

    pub fn set_material(&mut self, material: Option<Vec<i32>>) -> Result<()> {
        if let Some(m) = &material {
            if m.len() != self.num_elems() {
                return Err(Error::InvalidMesh(format!(
                    "material column has {} entries for {} elements",
                    m.len(),
                    self.num_elems()
                )));
            }
        }
        self.material = material;
        Ok(())
    }

    fn check_elem(&self, e: usize) -> Result<()> {
        if e >= self.num_elems() {
            return Err(Error::InvalidMesh(format!(
                "element id {e} out of range ({} elements)",
                self.num_elems()
            )));
        }
        Ok(())
    }

    /// Physical position Φ_E(x̄) = Σᵢ 𝐱_{E,i} w̄ᵢ(x̄).
    pub fn position(&self, e: usize, xref: [f64; 3]) -> Result<[f64; 3]> {
        self.check_elem(e)?;
        let be = self.ref_elem.eval_basis(xref);
        let mut x = [0.0; 3];
        for (i, &id) in self.elem_nodes(e).iter().enumerate() {
            let w = be.values[i];
            for a in 0..self.dim() {
                x[a] += self.coords[a * self.n_nodes + id] * w;
            }
        }
        Ok(x)
    }

    /// Jacobian A(x̄) = Σᵢ 𝐱_{E,i} [∇w̄ᵢ(x̄)]ᵀ.
    pub fn jacobian(&self, e: usize, xref: [f64; 3]) -> Result<SmallMat> {
        self.check_elem(e)?;
        let be = self.ref_elem.eval_basis(xref);
        let d = self.dim();
        let mut a = SmallMat::zeros(d);
        for (i, &id) in self.elem_nodes(e).iter().enumerate() {
            for r in 0..d {
                let xr = self.coords[r * self.n_nodes + id];
                for c in 0..d {
                    a.add_to(r, c, xr * be.grads[i][c]);
                }
            }
        }
        Ok(a)
    }

    /// Jacobian at tabulated quadrature point q of element e (hot path).
    pub fn jacobian_at_q(&self, e: usize, q: usize) -> SmallMat {
        let d = self.dim();
        let grads = self.ref_elem.qgrads(q);
        let mut a = SmallMat::zeros(d);
        for (i, &id) in self.elem_nodes(e).iter().enumerate() {
            for r in 0..d {
                let xr = self.coords[r * self.n_nodes + id];
                for c in 0..d {
                    a.add_to(r, c, xr * grads[i][c]);
                }
            }
        }
        a
    }

    /// Minimum of det(A) over all elements and quadrature points.
    pub fn min_det_a(&self) -> f64 {
        let nq = self.ref_elem.quadrature().points.len();
        let mut min = f64::INFINITY;
        for e in 0..self.num_elems() {
            for q in 0..nq {
                min = min.min(self.jacobian_at_q(e, q).det());
            }
        }
        min
    }

    /// Axis-aligned bounding box over all nodes.
    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..self.n_nodes {
            let p = self.node(i);
            for a in 0..self.dim() {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        for a in self.dim()..3 {
            lo[a] = 0.0;
            hi[a] = 0.0;
        }
        (lo, hi)
    }

    /// Diagonal length of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        let mut s = 0.0;
        for a in 0..3 {
            s += (hi[a] - lo[a]) * (hi[a] - lo[a]);
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_quad(order: usize) -> HighOrderMesh {
        make_cartesian(Geom::Quad, [1, 1, 1], order).unwrap()
    }

    #[test]
    fn position_at_nodes_is_lagrange() {
        let mesh = make_cartesian(Geom::Quad, [2, 3, 1], 3).unwrap();
        for e in 0..mesh.num_elems() {
            for (i, &id) in mesh.elem_nodes(e).iter().enumerate() {
                let x = mesh.position(e, mesh.ref_elem().nodes()[i]).unwrap();
                let stored = mesh.node(id);
                for a in 0..2 {
                    assert!((x[a] - stored[a]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn square_element_center_and_jacobian() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let x = mesh.position(0, [0.5, 0.5, 0.0]).unwrap();
        assert!((x[0] - 0.125).abs() < 1e-14);
        assert!((x[1] - 0.125).abs() < 1e-14);
        let a = mesh.jacobian(0, [0.5, 0.5, 0.0]).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 0.25 } else { 0.0 };
                assert!((a.get(r, c) - expect).abs() < 1e-13);
            }
        }
        // Uniform n×n unit-square mesh: min det(A) = (1/n)².
        assert!((mesh.min_det_a() - 0.0625).abs() < 1e-13);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_curved_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mesh = unit_quad(2);
        // Perturb interior nodes to curve the element.
        for i in 0..mesh.num_nodes() {
            let p = mesh.node(i);
            if p[0] > 0.01 && p[0] < 0.99 && p[1] > 0.01 && p[1] < 0.99 {
                let q = [p[0] + rng.gen_range(-0.05..0.05), p[1] + rng.gen_range(-0.05..0.05), 0.0];
                mesh.set_node(i, q);
            }
        }
        let h = 1e-6;
        for _ in 0..10 {
            let xr = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), 0.0];
            let a = mesh.jacobian(0, xr).unwrap();
            for c in 0..2 {
                let mut xp = xr;
                let mut xm = xr;
                xp[c] += h;
                xm[c] -= h;
                let fp = mesh.position(0, xp).unwrap();
                let fm = mesh.position(0, xm).unwrap();
                for r in 0..2 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    let scale = a.get(r, c).abs().max(1.0);
                    assert!((fd - a.get(r, c)).abs() / scale < 1e-7);
                }
            }
        }
    }

    #[test]
    fn global_scaling_scales_det() {
        let mesh = make_cartesian(Geom::Quad, [2, 2, 1], 2).unwrap();
        let d0 = mesh.min_det_a();
        let mut scaled = mesh.clone();
        for v in scaled.coords_mut() {
            *v *= 3.0;
        }
        assert!((scaled.min_det_a() - 9.0 * d0).abs() < 1e-12);
    }

    #[test]
    fn curved_p2_position_matches_direct_polynomial() {
        // Bend the top edge of a single quad and compare Φ against direct
        // evaluation of the interpolant from the same nodal data.
        let mut mesh = unit_quad(2);
        let top_mid_id = {
            let mut found = None;
            for i in 0..mesh.num_nodes() {
                let p = mesh.node(i);
                if (p[0] - 0.5).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12 {
                    found = Some(i);
                }
            }
            found.unwrap()
        };
        mesh.set_node(top_mid_id, [0.5, 1.15, 0.0]);
        let re = mesh.ref_elem();
        let xr = [0.3, 0.7, 0.0];
        let be = re.eval_basis(xr);
        let mut expect = [0.0; 3];
        for (i, &id) in mesh.elem_nodes(0).iter().enumerate() {
            let p = mesh.node(id);
            for a in 0..2 {
                expect[a] += be.values[i] * p[a];
            }
        }
        let got = mesh.position(0, xr).unwrap();
        assert_eq!(got[0], expect[0]);
        assert_eq!(got[1], expect[1]);
    }

    #[test]
    fn invalid_ids_rejected() {
        let re = ReferenceElement::new(Geom::Quad, 1).unwrap();
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        // Out-of-range node id.
        let bad = HighOrderMesh::from_parts(re.clone(), nodes.clone(), vec![0, 1, 2, 7], vec![], None);
        assert!(bad.is_err());
        // Repeated node id within an element.
        let bad = HighOrderMesh::from_parts(re.clone(), nodes.clone(), vec![0, 1, 2, 2], vec![], None);
        assert!(bad.is_err());
        let ok = HighOrderMesh::from_parts(re, nodes, vec![0, 1, 2, 3], vec![], None);
        assert!(ok.is_ok());
        assert!(ok.unwrap().position(3, [0.0; 3]).is_err());
    }

    #[test]
    fn inverted_element_detected() {
        let re = ReferenceElement::new(Geom::Quad, 1).unwrap();
        // Swap two corners: negative Jacobian somewhere.
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let mesh = HighOrderMesh::from_parts(re, nodes, vec![1, 0, 2, 3], vec![], None).unwrap();
        assert!(mesh.min_det_a() < 0.0);
    }
}
