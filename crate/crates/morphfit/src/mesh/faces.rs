//! Face topology: face keys, interior/boundary classification, neighbor
//! lookup and the conformity check.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::HighOrderMesh;
use crate::refelem::local_face_nodes;

/// A face is identified by the sorted list of its global node ids; two
/// element-local faces describe the same mesh face exactly when their keys
/// are equal, which is also the conformity condition.
pub type FaceKey = Vec<usize>;

pub fn face_key(mesh: &HighOrderMesh, e: usize, local_face: usize) -> FaceKey {
    let nodes = mesh.elem_nodes(e);
    let mut key: Vec<usize> = local_face_nodes(mesh.geom(), mesh.order(), local_face)
        .iter()
        .map(|&i| nodes[i])
        .collect();
    key.sort_unstable();
    key
}

/// Maps every face key to the (element, local-face) pairs that share it,
/// in ascending element order.
pub fn face_map(mesh: &HighOrderMesh) -> BTreeMap<FaceKey, Vec<(usize, usize)>> {
    let mut map: BTreeMap<FaceKey, Vec<(usize, usize)>> = BTreeMap::new();
    let nf = mesh.geom().num_faces();
    for e in 0..mesh.num_elems() {
        for f in 0..nf {
            map.entry(face_key(mesh, e, f)).or_default().push((e, f));
        }
    }
    map
}

/// For each element, the neighbor across each local face (None on the
/// boundary).
pub fn elem_neighbors(mesh: &HighOrderMesh) -> Vec<Vec<Option<usize>>> {
    let nf = mesh.geom().num_faces();
    let mut out = vec![vec![None; nf]; mesh.num_elems()];
    for sides in face_map(mesh).values() {
        if sides.len() == 2 {
            let (e0, f0) = sides[0];
            let (e1, f1) = sides[1];
            out[e0][f0] = Some(e1);
            out[e1][f1] = Some(e0);
        }
    }
    out
}

/// Verifies that every face is shared by at most two elements and that the
/// recorded boundary faces are exactly the single-sided ones.
pub fn check_conforming(mesh: &HighOrderMesh) -> Result<()> {
    let map = face_map(mesh);
    for (key, sides) in &map {
        if sides.len() > 2 {
            return Err(Error::InvalidMesh(format!(
                "face {key:?} is shared by {} elements",
                sides.len()
            )));
        }
    }
    let mut bdr_keys: Vec<FaceKey> = map
        .iter()
        .filter(|(_, sides)| sides.len() == 1)
        .map(|(k, _)| k.clone())
        .collect();
    bdr_keys.sort();
    let mut listed: Vec<FaceKey> =
        mesh.boundary_faces().iter().map(|bf| face_key(mesh, bf.elem, bf.local_face)).collect();
    listed.sort();
    listed.dedup();
    if !mesh.boundary_faces().is_empty() && listed != bdr_keys {
        return Err(Error::InvalidMesh(format!(
            "boundary list has {} distinct faces, mesh topology has {}",
            listed.len(),
            bdr_keys.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_cartesian;
    use crate::refelem::Geom;

    #[test]
    fn interior_faces_appear_twice() {
        for (geom, counts) in [
            (Geom::Quad, [3usize, 2, 1]),
            (Geom::Tri, [2, 2, 1]),
            (Geom::Hex, [2, 2, 2]),
            (Geom::Tet, [2, 1, 1]),
        ] {
            let mesh = make_cartesian(geom, counts, 2).unwrap();
            check_conforming(&mesh).unwrap();
            let map = face_map(&mesh);
            for sides in map.values() {
                assert!(sides.len() == 1 || sides.len() == 2);
            }
            let n_bdr = map.values().filter(|s| s.len() == 1).count();
            assert_eq!(n_bdr, mesh.boundary_faces().len());
        }
    }

    #[test]
    fn neighbors_symmetric() {
        let mesh = make_cartesian(Geom::Quad, [3, 3, 1], 1).unwrap();
        let nbrs = elem_neighbors(&mesh);
        for e in 0..mesh.num_elems() {
            for f in 0..4 {
                if let Some(n) = nbrs[e][f] {
                    assert!(nbrs[n].iter().any(|&x| x == Some(e)));
                }
            }
        }
        // Center element of a 3×3 grid has 4 neighbors.
        let center = 4;
        assert_eq!(nbrs[center].iter().filter(|x| x.is_some()).count(), 4);
    }
}
