//! Conforming splits for elements that keep several interface faces, and
//! the submesh extraction used for boundary fitting.
//!
//! A quad holding two adjacent interface faces is cut by a diagonal from
//! the corner those faces share to the element center: the corner vertex is
//! bisected and each marked face stays whole on its own child. The far-face
//! midpoints this introduces are absorbed by straight cuts on the
//! neighbors, escalated until every halved face is halved from both sides;
//! cut directions are chosen so refinement never crosses the interface.
//! Opposite-pair requests use a midline cut and three- or four-face
//! requests an inset frame, neither of which touches the parent faces or
//! the neighbors. Triangles split toward the centroid.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::marking::SplitRequest;
use crate::mesh::{face_map, BoundaryFace, HighOrderMesh};
use crate::refelem::Geom;

/// How one parent element is subdivided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plan {
    Keep,
    /// Straight cut at x_a = 1/2; halves the two faces of the other axis.
    Bisect(usize),
    /// Diagonal from corner (cx, cy) to the center plus midpoints on the
    /// two far faces; the faces through the corner stay whole.
    Corner(usize, usize),
    /// Half-refined transition: every face halved except `whole`.
    Tee(usize),
    /// Full 2×2 refinement; halves all four faces.
    Full,
    /// Inset frame: four trapezoids and a center quad, no face midpoints.
    Frame,
    /// Triangle split toward the centroid, no face midpoints.
    Centroid,
}

impl Plan {
    /// Parent faces this plan cuts at their midpoint.
    fn splits(self) -> [bool; 4] {
        let mut s = [false; 4];
        match self {
            Plan::Keep | Plan::Frame | Plan::Centroid => {}
            Plan::Bisect(a) => {
                s[2 * (1 - a)] = true;
                s[2 * (1 - a) + 1] = true;
            }
            Plan::Corner(cx, cy) => {
                s[1 - cx] = true;
                s[3 - cy] = true;
            }
            Plan::Tee(whole) => {
                s = [true; 4];
                s[whole] = false;
            }
            Plan::Full => s = [true; 4],
        }
        s
    }
}

/// Applies an axis swap and per-axis reflections to template corners,
/// reversing the winding whenever the transform flips orientation.
fn xform(children: Vec<[[f64; 2]; 4]>, swap: bool, fx: bool, fy: bool) -> Vec<[[f64; 2]; 4]> {
    let flips = usize::from(swap) + usize::from(fx) + usize::from(fy);
    children
        .into_iter()
        .map(|c| {
            let mut out = c.map(|p| {
                let q = if swap { [p[1], p[0]] } else { p };
                [if fx { 1.0 - q[0] } else { q[0] }, if fy { 1.0 - q[1] } else { q[1] }]
            });
            if flips % 2 == 1 {
                out.reverse();
            }
            out
        })
        .collect()
}

/// Child quads of a plan as counterclockwise corner lists in the parent
/// reference square. All coordinates are dyadic, so the parent-face tests
/// in [`parent_face_of`] are exact.
fn quad_children(plan: Plan) -> Vec<[[f64; 2]; 4]> {
    match plan {
        Plan::Keep => vec![[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]],
        Plan::Bisect(a) => xform(
            vec![
                [[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]],
                [[0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 1.0]],
            ],
            a == 1,
            false,
            false,
        ),
        Plan::Corner(cx, cy) => xform(
            vec![
                [[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5]],
                [[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 1.0]],
                [[0.0, 0.0], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]],
            ],
            false,
            cx == 1,
            cy == 1,
        ),
        Plan::Tee(whole) => {
            // The base pattern leaves face 1 (x = 1) whole.
            let base = vec![
                [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
                [[0.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]],
                [[0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 1.0]],
            ];
            match whole {
                1 => base,
                0 => xform(base, false, true, false),
                3 => xform(base, true, false, false),
                _ => xform(base, true, false, true),
            }
        }
        Plan::Full => vec![
            [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            [[0.5, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5]],
            [[0.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]],
            [[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 1.0]],
        ],
        Plan::Frame => vec![
            [[0.0, 0.0], [1.0, 0.0], [0.75, 0.25], [0.25, 0.25]],
            [[1.0, 0.0], [1.0, 1.0], [0.75, 0.75], [0.75, 0.25]],
            [[1.0, 1.0], [0.0, 1.0], [0.25, 0.75], [0.75, 0.75]],
            [[0.0, 1.0], [0.0, 0.0], [0.25, 0.25], [0.25, 0.75]],
            [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]],
        ],
        Plan::Centroid => unreachable!("triangle plans go through tri_children"),
    }
}

fn tri_children() -> Vec<[[f64; 2]; 3]> {
    let g = [1.0 / 3.0, 1.0 / 3.0];
    vec![
        [[0.0, 0.0], [1.0, 0.0], g],
        [[1.0, 0.0], [0.0, 1.0], g],
        [[0.0, 1.0], [0.0, 0.0], g],
    ]
}

/// Corner indices (into the counterclockwise corner list) of a local face.
fn face_corners(geom: Geom, f: usize) -> [usize; 2] {
    match (geom, f) {
        (Geom::Quad, 0) => [0, 3],
        (Geom::Quad, 1) => [1, 2],
        (Geom::Quad, 2) => [0, 1],
        (Geom::Quad, _) => [3, 2],
        (_, 0) => [0, 1],
        (_, 1) => [1, 2],
        (_, _) => [0, 2],
    }
}

/// The parent face both corner points lie on, if any. Template corners are
/// dyadic, so the float comparisons are exact.
fn parent_face_of(geom: Geom, a: [f64; 2], b: [f64; 2]) -> Option<usize> {
    match geom {
        Geom::Quad => (0..4).find(|fp| {
            let (axis, side) = (fp / 2, (fp % 2) as f64);
            a[axis] == side && b[axis] == side
        }),
        _ => {
            if a[1] == 0.0 && b[1] == 0.0 {
                Some(0)
            } else if a[0] + a[1] == 1.0 && b[0] + b[1] == 1.0 {
                Some(1)
            } else if a[0] == 0.0 && b[0] == 0.0 {
                Some(2)
            } else {
                None
            }
        }
    }
}

/// Template for a requested quad, from its marked-face list (ascending).
fn request_plan(marked: &[usize]) -> Result<Plan> {
    match marked[..] {
        [f, g] if f / 2 == g / 2 => Ok(Plan::Bisect(f / 2)),
        [f, g] => Ok(Plan::Corner(f % 2, g % 2)),
        [_, _, _] | [_, _, _, _] => Ok(Plan::Frame),
        _ => Err(Error::InvalidArgument(format!(
            "split request must carry 2 to 4 marked faces, got {}",
            marked.len()
        ))),
    }
}

/// Smallest plan whose split set covers `need`, never cutting an interface
/// face: a single-midpoint cut that would run onto the opposite interface
/// face is redirected into a corner cut toward an interface-free side.
fn escalate(need: [bool; 4], interface: [bool; 4]) -> Result<Plan> {
    let faces: Vec<usize> = (0..4).filter(|&f| need[f]).collect();
    match faces[..] {
        [] => Ok(Plan::Keep),
        [f] => {
            if !interface[f ^ 1] {
                return Ok(Plan::Bisect(1 - f / 2));
            }
            let side_axis = 1 - f / 2;
            let g = [2 * side_axis, 2 * side_axis + 1]
                .into_iter()
                .find(|&g| !interface[g])
                .ok_or_else(|| {
                    Error::InvalidMesh("no interface-free direction to absorb a split".into())
                })?;
            let (sx, sy) = if f / 2 == 0 { (f % 2, g % 2) } else { (g % 2, f % 2) };
            Ok(Plan::Corner(1 - sx, 1 - sy))
        }
        [f, g] if f / 2 == g / 2 => Ok(Plan::Bisect(1 - f / 2)),
        [f, g] => Ok(Plan::Corner(1 - f % 2, 1 - g % 2)),
        [_, _, _] => Ok(Plan::Tee((0..4).find(|&f| !need[f]).unwrap())),
        _ => Ok(Plan::Full),
    }
}

/// Tolerance-welding node table: positions within `tol` of each other share
/// one id. Buckets are cubes of side 4·tol, so a match always sits in the
/// same or an adjacent bucket.
struct Welder {
    tol: f64,
    cell: f64,
    grid: BTreeMap<[i64; 3], Vec<usize>>,
    nodes: Vec<[f64; 3]>,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Welder { tol, cell: 4.0 * tol, grid: BTreeMap::new(), nodes: Vec::new() }
    }

    fn insert(&mut self, x: [f64; 3]) -> usize {
        let k = [0, 1, 2].map(|a| (x[a] / self.cell).floor() as i64);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &id in ids {
                        let p = self.nodes[id];
                        let d2: f64 = (0..3).map(|a| (p[a] - x[a]).powi(2)).sum();
                        if d2 <= self.tol * self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.nodes.len();
        self.nodes.push(x);
        self.grid.entry(k).or_default().push(id);
        id
    }
}

/// Maps child reference coordinates to the parent reference element.
fn map_to_parent(corners: &[[f64; 2]], u: f64, v: f64) -> [f64; 2] {
    if let [c0, c1, c2, c3] = corners[..] {
        [0, 1].map(|a| {
            c0[a] * (1.0 - u) * (1.0 - v)
                + c1[a] * u * (1.0 - v)
                + c2[a] * u * v
                + c3[a] * (1.0 - u) * v
        })
    } else {
        let [c0, c1, c2] = corners[..] else { unreachable!() };
        [0, 1].map(|a| c0[a] + u * (c1[a] - c0[a]) + v * (c2[a] - c0[a]))
    }
}

/// Subdivides every requested element conformingly so that each element of
/// the result exposes at most one interface face. `eta` are the relabeled
/// per-element indicators η̃; children inherit their parent's value and the
/// returned mesh carries the labels as its material column. Only 2D meshes
/// can be split; quads use the corner/midline/frame templates, triangles
/// the centroid split.
pub fn split_quads(
    mesh: &HighOrderMesh,
    eta: &[i32],
    requests: &[SplitRequest],
) -> Result<HighOrderMesh> {
    if eta.len() != mesh.num_elems() {
        return Err(Error::InvalidArgument(format!(
            "η has {} entries for {} elements",
            eta.len(),
            mesh.num_elems()
        )));
    }
    match mesh.geom() {
        Geom::Quad | Geom::Tri => {}
        g => {
            return Err(Error::UnsupportedGeometry(format!(
                "conforming splits of {} elements",
                g.name()
            )))
        }
    }
    if requests.is_empty() {
        let mut out = mesh.clone();
        out.set_material(Some(eta.to_vec()))?;
        return Ok(out);
    }

    let n = mesh.num_elems();
    let mut pairs: Vec<[(usize, usize); 2]> = Vec::new();
    let mut interface = vec![[false; 4]; n];
    for sides in face_map(mesh).values() {
        if let [a, b] = sides[..] {
            pairs.push([a, b]);
            if eta[a.0] != eta[b.0] {
                interface[a.0][a.1] = true;
                interface[b.0][b.1] = true;
            }
        }
    }

    let mut plans = vec![Plan::Keep; n];
    let mut requested = vec![false; n];
    for req in requests {
        if req.elem >= n {
            return Err(Error::InvalidArgument(format!(
                "split request for element {} of a {n}-element mesh",
                req.elem
            )));
        }
        plans[req.elem] = if mesh.geom() == Geom::Tri {
            Plan::Centroid
        } else {
            let marked: Vec<usize> = (0..4).filter(|&f| interface[req.elem][f]).collect();
            request_plan(&marked)?
        };
        requested[req.elem] = true;
    }

    // Escalate neighbor plans until every halved face is halved from both
    // sides. Split sets only grow, so the loop reaches a fixed point.
    loop {
        let mut changed = false;
        for [a, b] in &pairs {
            for (me, other) in [(a, b), (b, a)] {
                let (e, f) = *me;
                let (ne, nf) = *other;
                if plans[ne].splits()[nf] && !plans[e].splits()[f] {
                    if requested[e] {
                        return Err(Error::InvalidMesh(
                            "split closure ran onto a marked face of a requested element".into(),
                        ));
                    }
                    let mut need = plans[e].splits();
                    need[f] = true;
                    plans[e] = escalate(need, interface[e])?;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let re = mesh.ref_elem();
    let lattice = re.nodes();
    let npe = re.num_nodes();
    let mut welder = Welder::new(1e-9 * mesh.diameter());
    let mut old_to_new = vec![usize::MAX; mesh.num_nodes()];

    // Kept elements first, reusing their coordinates exactly; split-element
    // nodes weld onto them wherever faces are shared whole.
    for e in 0..n {
        if plans[e] == Plan::Keep {
            for &id in mesh.elem_nodes(e) {
                if old_to_new[id] == usize::MAX {
                    old_to_new[id] = welder.insert(mesh.node(id));
                }
            }
        }
    }

    let identity: Vec<[f64; 2]> = if mesh.geom() == Geom::Quad {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    } else {
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    };
    let mut elems: Vec<usize> = Vec::new();
    let mut material: Vec<i32> = Vec::new();
    let mut owners: Vec<(usize, Vec<[f64; 2]>)> = Vec::new();
    for e in 0..n {
        if plans[e] == Plan::Keep {
            for &id in mesh.elem_nodes(e) {
                elems.push(old_to_new[id]);
            }
            material.push(eta[e]);
            owners.push((e, identity.clone()));
            continue;
        }
        let children: Vec<Vec<[f64; 2]>> = if plans[e] == Plan::Centroid {
            tri_children().into_iter().map(|c| c.to_vec()).collect()
        } else {
            quad_children(plans[e]).into_iter().map(|c| c.to_vec()).collect()
        };
        for corners in children {
            for l in 0..npe {
                let r = map_to_parent(&corners, lattice[l][0], lattice[l][1]);
                let x = mesh.position(e, [r[0], r[1], 0.0])?;
                elems.push(welder.insert(x));
            }
            material.push(eta[e]);
            owners.push((e, corners));
        }
    }

    let old_attr: BTreeMap<(usize, usize), i32> =
        mesh.boundary_faces().iter().map(|bf| ((bf.elem, bf.local_face), bf.attr)).collect();
    let nf = mesh.geom().num_faces();
    let mut bdr = Vec::new();
    for (new_e, (parent, corners)) in owners.iter().enumerate() {
        for f in 0..nf {
            let [i, j] = face_corners(mesh.geom(), f);
            if let Some(fp) = parent_face_of(mesh.geom(), corners[i], corners[j]) {
                if let Some(&attr) = old_attr.get(&(*parent, fp)) {
                    bdr.push(BoundaryFace { elem: new_e, local_face: f, attr });
                }
            }
        }
    }

    HighOrderMesh::from_parts(re.clone(), welder.nodes, elems, bdr, Some(material))
}

/// Submesh of the elements labeled `keep`. Unreferenced nodes are dropped
/// and the boundary list is rebuilt from the surviving topology: faces of
/// the original boundary keep their attribute, newly exposed faces (the
/// former interface) get a fresh attribute one past the largest existing
/// one.
pub fn trim(mesh: &HighOrderMesh, eta: &[i32], keep: i32) -> Result<HighOrderMesh> {
    if eta.len() != mesh.num_elems() {
        return Err(Error::InvalidArgument(format!(
            "η has {} entries for {} elements",
            eta.len(),
            mesh.num_elems()
        )));
    }
    let kept: Vec<usize> = (0..mesh.num_elems()).filter(|&e| eta[e] == keep).collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!("no element has η = {keep}")));
    }
    let mut new_id = vec![usize::MAX; mesh.num_nodes()];
    let mut nodes = Vec::new();
    let mut elems = Vec::new();
    for &e in &kept {
        for &id in mesh.elem_nodes(e) {
            if new_id[id] == usize::MAX {
                new_id[id] = nodes.len();
                nodes.push(mesh.node(id));
            }
            elems.push(new_id[id]);
        }
    }
    let material = mesh.material().map(|m| kept.iter().map(|&e| m[e]).collect());
    let mut out =
        HighOrderMesh::from_parts(mesh.ref_elem().clone(), nodes, elems, vec![], material)?;
    let old_attr: BTreeMap<(usize, usize), i32> =
        mesh.boundary_faces().iter().map(|bf| ((bf.elem, bf.local_face), bf.attr)).collect();
    let fresh = mesh.boundary_faces().iter().map(|bf| bf.attr).max().unwrap_or(0) + 1;
    let mut bdr = Vec::new();
    for sides in face_map(&out).values() {
        if let [(e, f)] = sides[..] {
            let attr = old_attr.get(&(kept[e], f)).copied().unwrap_or(fresh);
            bdr.push(BoundaryFace { elem: e, local_face: f, attr });
        }
    }
    out.set_boundary_faces(bdr);
    Ok(out)
}
