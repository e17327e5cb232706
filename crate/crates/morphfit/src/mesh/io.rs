//! Native text format and CSV node dumps.
//!
//! Layout (one header line, then sections):
//!
//! ```text
//! morphfit-mesh v1 <dim> <geom> <order> <n_nodes> <n_elems>
//! nodes
//! <x> <y> [<z>]          one line per node
//! elements
//! <id> <id> ...          one line per element
//! boundary <n>
//! <elem> <local-face> <attr>
//! materials              optional section
//! <eta>                  one line per element
//! ```
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so save → load → save is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryFace, HighOrderMesh};
use crate::refelem::{Geom, ReferenceElement};

pub fn save(mesh: &HighOrderMesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(mesh))?;
    Ok(())
}

pub fn to_string(mesh: &HighOrderMesh) -> String {
    let mut s = String::new();
    let d = mesh.dim();
    let _ = writeln!(
        s,
        "morphfit-mesh v1 {d} {} {} {} {}",
        mesh.geom().name(),
        mesh.order(),
        mesh.num_nodes(),
        mesh.num_elems()
    );
    s.push_str("nodes\n");
    for i in 0..mesh.num_nodes() {
        let p = mesh.node(i);
        for a in 0..d {
            if a > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", p[a]);
        }
        s.push('\n');
    }
    s.push_str("elements\n");
    for e in 0..mesh.num_elems() {
        let ids = mesh.elem_nodes(e);
        for (k, id) in ids.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{id}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_faces().len());
    for bf in mesh.boundary_faces() {
        let _ = writeln!(s, "{} {} {}", bf.elem, bf.local_face, bf.attr);
    }
    if let Some(mat) = mesh.material() {
        s.push_str("materials\n");
        for m in mat {
            let _ = writeln!(s, "{m}");
        }
    }
    s
}

pub fn load(path: &Path) -> Result<HighOrderMesh> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

struct Lines<'a> {
    lines: std::str::Lines<'a>,
    num: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for line in self.lines.by_ref() {
            self.num += 1;
            if !line.trim().is_empty() {
                return Ok((self.num, line.trim()));
            }
        }
        Err(Error::Parse { line: self.num + 1, msg: "unexpected end of file".into() })
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("invalid {what}: {tok:?}") })
}

pub fn from_str(text: &str) -> Result<HighOrderMesh> {
    let mut lines = Lines { lines: text.lines(), num: 0 };
    let (hline, header) = lines.next()?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.is_empty() || toks[0] != "morphfit-mesh" {
        return Err(Error::Parse { line: hline, msg: "expected morphfit-mesh header".into() });
    }
    if toks.len() != 7 {
        return Err(Error::Parse { line: hline, msg: "header needs 7 fields".into() });
    }
    if toks[1] != "v1" {
        return Err(Error::UnsupportedVersion(toks[1].to_string()));
    }
    let dim: usize = parse(toks[2], hline, "dimension")?;
    let geom = Geom::from_name(toks[3])?;
    if geom.dim() != dim {
        return Err(Error::Parse {
            line: hline,
            msg: format!("geometry {} is {}D, header says {dim}D", toks[3], geom.dim()),
        });
    }
    let order: usize = parse(toks[4], hline, "order")?;
    let n_nodes: usize = parse(toks[5], hline, "node count")?;
    let n_elems: usize = parse(toks[6], hline, "element count")?;
    let ref_elem = ReferenceElement::new(geom, order)?;

    let (l, s) = lines.next()?;
    if s != "nodes" {
        return Err(Error::Parse { line: l, msg: format!("expected 'nodes', got {s:?}") });
    }
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (l, s) = lines.next()?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != dim {
            return Err(Error::Parse { line: l, msg: format!("expected {dim} coordinates") });
        }
        let mut p = [0.0; 3];
        for a in 0..dim {
            p[a] = parse(toks[a], l, "coordinate")?;
        }
        nodes.push(p);
    }

    let (l, s) = lines.next()?;
    if s != "elements" {
        return Err(Error::Parse { line: l, msg: format!("expected 'elements', got {s:?}") });
    }
    let npe = ref_elem.num_nodes();
    let mut elems = Vec::with_capacity(n_elems * npe);
    for _ in 0..n_elems {
        let (l, s) = lines.next()?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != npe {
            return Err(Error::Parse { line: l, msg: format!("expected {npe} node ids") });
        }
        for t in toks {
            elems.push(parse::<usize>(t, l, "node id")?);
        }
    }

    let (l, s) = lines.next()?;
    let toks: Vec<&str> = s.split_whitespace().collect();
    if toks.len() != 2 || toks[0] != "boundary" {
        return Err(Error::Parse { line: l, msg: format!("expected 'boundary <n>', got {s:?}") });
    }
    let n_bdr: usize = parse(toks[1], l, "boundary count")?;
    let mut bdr = Vec::with_capacity(n_bdr);
    for _ in 0..n_bdr {
        let (l, s) = lines.next()?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse { line: l, msg: "expected 'elem local-face attr'".into() });
        }
        bdr.push(BoundaryFace {
            elem: parse(toks[0], l, "element id")?,
            local_face: parse(toks[1], l, "local face")?,
            attr: parse(toks[2], l, "attribute")?,
        });
    }

    let mut material = None;
    if let Ok((l, s)) = lines.next() {
        if s != "materials" {
            return Err(Error::Parse { line: l, msg: format!("unexpected section {s:?}") });
        }
        let mut m = Vec::with_capacity(n_elems);
        for _ in 0..n_elems {
            let (l, s) = lines.next()?;
            m.push(parse::<i32>(s, l, "material")?);
        }
        material = Some(m);
    }

    HighOrderMesh::from_parts(ref_elem, nodes, elems, bdr, material)
}

/// Plain CSV dump of the node coordinates.
pub fn save_csv(mesh: &HighOrderMesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    let d = mesh.dim();
    s.push_str(if d == 2 { "id,x,y\n" } else { "id,x,y,z\n" });
    for i in 0..mesh.num_nodes() {
        let p = mesh.node(i);
        let _ = write!(s, "{i}");
        for a in 0..d {
            let _ = write!(s, ",{}", p[a]);
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}
