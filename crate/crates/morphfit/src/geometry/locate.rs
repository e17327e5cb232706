//! Point location on a high-order mesh: a uniform bin grid proposes
//! candidate elements, then Newton inversion of the element map Φ_E from
//! the reference centroid confirms containment and returns reference
//! coordinates.

use crate::error::{Error, Result};
use crate::mesh::HighOrderMesh;

/// Spatial index over the elements of one mesh.
pub struct MeshLocator<'a> {
    mesh: &'a HighOrderMesh,
    lo: [f64; 3],
    nb: [usize; 3],
    width: [f64; 3],
    bins: Vec<Vec<usize>>,
    tol: f64,
}

impl<'a> MeshLocator<'a> {
    pub fn new(mesh: &'a HighOrderMesh) -> Self {
        let dim = mesh.dim();
        let (lo, hi) = mesh.bbox();
        let per_axis = (mesh.num_elems() as f64).powf(1.0 / dim as f64).ceil() as usize;
        let mut nb = [1; 3];
        let mut width = [1.0; 3];
        for a in 0..dim {
            nb[a] = per_axis.clamp(1, 64);
            width[a] = ((hi[a] - lo[a]) / nb[a] as f64).max(1e-300);
        }
        let mut bins = vec![Vec::new(); nb[0] * nb[1] * nb[2]];
        for e in 0..mesh.num_elems() {
            // Node bounding box, padded for curvature between nodes.
            let mut elo = [f64::INFINITY; 3];
            let mut ehi = [f64::NEG_INFINITY; 3];
            for &id in mesh.elem_nodes(e) {
                let p = mesh.node(id);
                for a in 0..dim {
                    elo[a] = elo[a].min(p[a]);
                    ehi[a] = ehi[a].max(p[a]);
                }
            }
            let mut blo = [0usize; 3];
            let mut bhi = [0usize; 3];
            for a in 0..dim {
                let pad = 0.1 * (ehi[a] - elo[a]) + 1e-12;
                blo[a] = (((elo[a] - pad - lo[a]) / width[a]).floor().max(0.0)) as usize;
                bhi[a] = (((ehi[a] + pad - lo[a]) / width[a]).floor() as isize)
                    .clamp(0, nb[a] as isize - 1) as usize;
            }
            for k in blo[2].min(nb[2] - 1)..=bhi[2] {
                for j in blo[1].min(nb[1] - 1)..=bhi[1] {
                    for i in blo[0].min(nb[0] - 1)..=bhi[0] {
                        bins[i + nb[0] * (j + nb[1] * k)].push(e);
                    }
                }
            }
        }
        let tol = 1e-11 * mesh.diameter().max(1e-30);
        MeshLocator { mesh, lo, nb, width, bins, tol }
    }

    /// Newton inversion of Φ_E from the reference centroid; `None` when the
    /// iteration leaves the element or stalls.
    fn invert(&self, e: usize, x: [f64; 3]) -> Option<[f64; 3]> {
        let dim = self.mesh.dim();
        let geom = self.mesh.geom();
        let mut xi = geom.centroid();
        for _ in 0..40 {
            let pos = self.mesh.position(e, xi).ok()?;
            let mut r = [0.0; 3];
            let mut rn = 0.0;
            for a in 0..dim {
                r[a] = x[a] - pos[a];
                rn += r[a] * r[a];
            }
            if rn.sqrt() <= self.tol {
                return geom.contains(xi, 1e-9).then_some(xi);
            }
            let jac = self.mesh.jacobian(e, xi).ok()?;
            let step = jac.inverse().ok()?.mul_vec(r);
            for a in 0..dim {
                // Keep the iterate near the reference element so wrong
                // candidates fail fast instead of wandering.
                xi[a] = (xi[a] + step[a]).clamp(-0.5, 1.5);
            }
        }
        None
    }

    /// Containing element and reference coordinates for a physical point.
    pub fn find_point(&self, x: [f64; 3]) -> Result<(usize, [f64; 3])> {
        let dim = self.mesh.dim();
        let mut bin = 0;
        let mut stride = 1;
        for a in 0..dim {
            let i = (((x[a] - self.lo[a]) / self.width[a]).floor() as isize)
                .clamp(0, self.nb[a] as isize - 1) as usize;
            bin += stride * i;
            stride *= self.nb[a];
        }
        for &e in &self.bins[bin] {
            if let Some(xi) = self.invert(e, x) {
                return Ok((e, xi));
            }
        }
        // Candidate exhaustion: sweep everything before giving up, so
        // points straddling bin boundaries of curved elements still land.
        for e in 0..self.mesh.num_elems() {
            if let Some(xi) = self.invert(e, x) {
                return Ok((e, xi));
            }
        }
        Err(Error::OutOfDomain(x[0], x[1], x[2]))
    }
}
