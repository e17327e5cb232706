//! Legacy VTK export. High-order elements are subdivided into linear
//! sub-cells on the nodal lattice (p² quads/triangles per element in 2D,
//! p³ hexes/tets in 3D), which visualizes the curved geometry without
//! requiring high-order cell support in the viewer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::mesh::HighOrderMesh;
use crate::refelem::Geom;

pub fn save_vtk(mesh: &HighOrderMesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_vtk_string(mesh))?;
    Ok(())
}

pub fn to_vtk_string(mesh: &HighOrderMesh) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmorphfit mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for i in 0..mesh.num_nodes() {
        let p = mesh.node(i);
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    let p = mesh.order();
    let (sub_cells, vtk_type) = sub_cells(mesh.geom(), p);
    let corners = sub_cells[0].len();
    let n_cells = mesh.num_elems() * sub_cells.len();
    let _ = writeln!(s, "CELLS {} {}", n_cells, n_cells * (corners + 1));
    for e in 0..mesh.num_elems() {
        let ids = mesh.elem_nodes(e);
        for cell in &sub_cells {
            let _ = write!(s, "{corners}");
            for &local in cell {
                let _ = write!(s, " {}", ids[local]);
            }
            s.push('\n');
        }
    }
    let _ = writeln!(s, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        let _ = writeln!(s, "{vtk_type}");
    }
    if let Some(mat) = mesh.material() {
        let _ = writeln!(s, "CELL_DATA {n_cells}");
        s.push_str("SCALARS material int 1\nLOOKUP_TABLE default\n");
        for e in 0..mesh.num_elems() {
            for _ in 0..sub_cells.len() {
                let _ = writeln!(s, "{}", mat[e]);
            }
        }
    }
    s
}

/// Linear sub-cells of one high-order element, as local node indices, plus
/// the VTK cell type.
fn sub_cells(geom: Geom, p: usize) -> (Vec<Vec<usize>>, u8) {
    match geom {
        Geom::Quad => {
            let per = p + 1;
            let at = |i: usize, j: usize| i + per * j;
            let mut cells = Vec::with_capacity(p * p);
            for j in 0..p {
                for i in 0..p {
                    cells.push(vec![at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
            (cells, 9)
        }
        Geom::Hex => {
            let per = p + 1;
            let at = |i: usize, j: usize, k: usize| i + per * (j + per * k);
            let mut cells = Vec::with_capacity(p * p * p);
            for k in 0..p {
                for j in 0..p {
                    for i in 0..p {
                        cells.push(vec![
                            at(i, j, k),
                            at(i + 1, j, k),
                            at(i + 1, j + 1, k),
                            at(i, j + 1, k),
                            at(i, j, k + 1),
                            at(i + 1, j, k + 1),
                            at(i + 1, j + 1, k + 1),
                            at(i, j + 1, k + 1),
                        ]);
                    }
                }
            }
            (cells, 12)
        }
        Geom::Tri => {
            let offset = |j: usize| -> usize { (0..j).map(|r| p + 1 - r).sum() };
            let at = |i: usize, j: usize| offset(j) + i;
            let mut cells = Vec::with_capacity(p * p);
            for j in 0..p {
                for i in 0..p - j {
                    cells.push(vec![at(i, j), at(i + 1, j), at(i, j + 1)]);
                    if i + j < p - 1 {
                        cells.push(vec![at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                    }
                }
            }
            (cells, 5)
        }
        Geom::Tet => {
            let mut index = std::collections::BTreeMap::new();
            let mut idx = 0;
            for k in 0..=p {
                for j in 0..=(p - k) {
                    for i in 0..=(p - k - j) {
                        index.insert((i, j, k), idx);
                        idx += 1;
                    }
                }
            }
            let at = |i: usize, j: usize, k: usize| index[&(i, j, k)];
            let mut cells = Vec::new();
            // Principal-lattice decomposition: corner tets, octahedra split
            // into four, and inverted tets; p³ sub-tets in total.
            for k in 0..p {
                for j in 0..p - k {
                    for i in 0..p - k - j {
                        cells.push(vec![at(i, j, k), at(i + 1, j, k), at(i, j + 1, k), at(i, j, k + 1)]);
                        if i + j + k < p - 1 {
                            // Octahedron vertices around the cell interior,
                            // split along the a-f diagonal.
                            let a = at(i + 1, j, k);
                            let b = at(i, j + 1, k);
                            let c = at(i, j, k + 1);
                            let d = at(i + 1, j + 1, k);
                            let e = at(i + 1, j, k + 1);
                            let f = at(i, j + 1, k + 1);
                            cells.push(vec![a, d, b, f]);
                            cells.push(vec![a, e, d, f]);
                            cells.push(vec![a, c, e, f]);
                            cells.push(vec![a, b, c, f]);
                        }
                        if i + j + k < p.saturating_sub(2) {
                            cells.push(vec![
                                at(i + 1, j, k + 1),
                                at(i + 1, j + 1, k),
                                at(i, j + 1, k + 1),
                                at(i + 1, j + 1, k + 1),
                            ]);
                        }
                    }
                }
            }
            (cells, 10)
        }
        Geom::Segment => {
            let cells = (0..p).map(|i| vec![i, i + 1]).collect();
            (cells, 3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_cartesian;

    fn tet_volume(pts: &[[f64; 3]]) -> f64 {
        let d = |a: usize| [pts[a][0] - pts[0][0], pts[a][1] - pts[0][1], pts[a][2] - pts[0][2]];
        let (u, v, w) = (d(1), d(2), d(3));
        (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
            + u[2] * (v[0] * w[1] - v[1] * w[0]))
            / 6.0
    }

    #[test]
    fn sub_cell_counts() {
        for p in 1..=4 {
            assert_eq!(sub_cells(Geom::Quad, p).0.len(), p * p);
            assert_eq!(sub_cells(Geom::Tri, p).0.len(), p * p);
            assert_eq!(sub_cells(Geom::Hex, p).0.len(), p * p * p);
            assert_eq!(sub_cells(Geom::Tet, p).0.len(), p * p * p);
        }
    }

    #[test]
    fn sub_tets_tile_with_positive_volume() {
        for p in 1..=4 {
            let (cells, _) = sub_cells(Geom::Tet, p);
            // Reference lattice coordinates.
            let mut nodes = Vec::new();
            for k in 0..=p {
                for j in 0..=(p - k) {
                    for i in 0..=(p - k - j) {
                        nodes.push([
                            i as f64 / p as f64,
                            j as f64 / p as f64,
                            k as f64 / p as f64,
                        ]);
                    }
                }
            }
            let mut total = 0.0;
            for cell in &cells {
                let pts: Vec<[f64; 3]> = cell.iter().map(|&i| nodes[i]).collect();
                let v = tet_volume(&pts);
                assert!(v > 0.0, "p={p}: sub-tet with volume {v}");
                total += v;
            }
            assert!((total - 1.0 / 6.0).abs() < 1e-12, "p={p}: total {total}");
        }
    }

    #[test]
    fn vtk_output_shape() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 2, 1], 2).unwrap();
        mesh.set_material(Some(vec![0, 1, 1, 0])).unwrap();
        let text = to_vtk_string(&mesh);
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("POINTS 25 double"));
        assert!(text.contains("CELLS 16 80"));
        assert!(text.contains("SCALARS material int 1"));
        let nines = text.lines().filter(|l| *l == "9").count();
        assert_eq!(nines, 16);
    }
}
