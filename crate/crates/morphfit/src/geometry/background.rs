//! Adaptively refined background fields: a quadtree/octree over a bounding
//! box whose leaf cells carry tensor-product Lagrange polynomials of order
//! p_B on Gauss-Lobatto nodes. Cells are split where the sampled source
//! changes sign, so leaves containing the zero isocontour sit at maximum
//! depth. The tree is nonconforming by design; it is only ever
//! point-sampled, never assembled.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::LevelEval;
use crate::refelem::{gauss_lobatto_nodes, lagrange_1d};

#[derive(Debug, Clone)]
struct Cell {
    lo: [f64; 3],
    hi: [f64; 3],
    depth: usize,
    /// 2^dim children ids, or empty for leaves.
    children: Vec<usize>,
    /// (order+1)^dim nodal values; filled for leaves only.
    values: Vec<f64>,
}

/// A discrete level-set field on an adaptively refined cell tree.
#[derive(Debug, Clone)]
pub struct BackgroundField {
    dim: usize,
    order: usize,
    cells: Vec<Cell>,
    nodes_1d: Vec<f64>,
}

fn node_count(order: usize, dim: usize) -> usize {
    (order + 1).pow(dim as u32)
}

impl BackgroundField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> ([f64; 3], [f64; 3]) {
        (self.cells[0].lo, self.cells[0].hi)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.cells.iter().filter(|c| c.children.is_empty()).count()
    }

    /// (depth, lo, hi) for every leaf cell, in tree order.
    pub fn leaf_boxes(&self) -> Vec<(usize, [f64; 3], [f64; 3])> {
        self.cells
            .iter()
            .filter(|c| c.children.is_empty())
            .map(|c| (c.depth, c.lo, c.hi))
            .collect()
    }

    /// Diameter of the deepest (smallest) leaf cell.
    pub fn finest_cell_diameter(&self) -> f64 {
        let mut best: Option<&Cell> = None;
        for c in &self.cells {
            if c.children.is_empty() && best.map_or(true, |b| c.depth > b.depth) {
                best = Some(c);
            }
        }
        let c = best.expect("tree has at least the root cell");
        (0..self.dim).map(|a| (c.hi[a] - c.lo[a]).powi(2)).sum::<f64>().sqrt()
    }

    pub(crate) fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&i| self.cells[i].children.is_empty())
    }

    pub(crate) fn cell_box(&self, id: usize) -> ([f64; 3], [f64; 3]) {
        (self.cells[id].lo, self.cells[id].hi)
    }

    /// Physical positions of the nodal lattice of one cell, x-fastest.
    pub(crate) fn cell_node_positions(&self, id: usize) -> Vec<[f64; 3]> {
        let c = &self.cells[id];
        let n1 = self.order + 1;
        let mut out = Vec::with_capacity(node_count(self.order, self.dim));
        let nk = if self.dim == 3 { n1 } else { 1 };
        for k in 0..nk {
            for j in 0..n1 {
                for i in 0..n1 {
                    let t = [self.nodes_1d[i], self.nodes_1d[j], self.nodes_1d[k]];
                    let mut p = [0.0; 3];
                    for a in 0..self.dim {
                        p[a] = c.lo[a] + (c.hi[a] - c.lo[a]) * t[a];
                    }
                    out.push(p);
                }
            }
        }
        out
    }

    fn locate(&self, x: [f64; 3]) -> Result<usize> {
        let (lo, hi) = self.domain();
        let pad: f64 = (0..self.dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max) * 1e-12;
        for a in 0..self.dim {
            if x[a] < lo[a] - pad || x[a] > hi[a] + pad {
                return Err(Error::OutOfDomain(x[0], x[1], x[2]));
            }
        }
        let mut id = 0;
        while !self.cells[id].children.is_empty() {
            let c = &self.cells[id];
            let mut idx = 0;
            for a in 0..self.dim {
                if x[a] >= 0.5 * (c.lo[a] + c.hi[a]) {
                    idx |= 1 << a;
                }
            }
            id = c.children[idx];
        }
        Ok(id)
    }

    /// Interpolates the stored polynomial and its derivatives at x.
    pub fn eval(&self, x: [f64; 3]) -> Result<LevelEval> {
        let id = self.locate(x)?;
        let c = &self.cells[id];
        let n1 = self.order + 1;
        let mut basis = Vec::with_capacity(self.dim);
        let mut h = [1.0; 3];
        for a in 0..self.dim {
            h[a] = c.hi[a] - c.lo[a];
            let xi = ((x[a] - c.lo[a]) / h[a]).clamp(0.0, 1.0);
            basis.push(lagrange_1d(&self.nodes_1d, xi));
        }
        let mut out = LevelEval::zero();
        let nk = if self.dim == 3 { n1 } else { 1 };
        for k in 0..nk {
            for j in 0..n1 {
                for i in 0..n1 {
                    let v = c.values[i + n1 * (j + n1 * k)];
                    let idx = [i, j, k];
                    // Per-axis value, first and second derivative factors.
                    let mut f0 = [1.0; 3];
                    let mut f1 = [0.0; 3];
                    let mut f2 = [0.0; 3];
                    for a in 0..self.dim {
                        f0[a] = basis[a].0[idx[a]];
                        f1[a] = basis[a].1[idx[a]];
                        f2[a] = basis[a].2[idx[a]];
                    }
                    let prod = |skip: usize, skip2: usize| -> f64 {
                        let mut p = 1.0;
                        for a in 0..self.dim {
                            if a != skip && a != skip2 {
                                p *= f0[a];
                            }
                        }
                        p
                    };
                    out.sigma += v * prod(usize::MAX, usize::MAX);
                    for a in 0..self.dim {
                        out.grad[a] += v * f1[a] * prod(a, usize::MAX) / h[a];
                        out.hess[a][a] += v * f2[a] * prod(a, usize::MAX) / (h[a] * h[a]);
                        for b in 0..a {
                            let cross = v * f1[a] * f1[b] * prod(a, b) / (h[a] * h[b]);
                            out.hess[a][b] += cross;
                            out.hess[b][a] += cross;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Value-only interpolation (hot path for root finding).
    pub(crate) fn eval_value(&self, x: [f64; 3]) -> Result<f64> {
        let id = self.locate(x)?;
        let c = &self.cells[id];
        let n1 = self.order + 1;
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            let xi = ((x[a] - c.lo[a]) / (c.hi[a] - c.lo[a])).clamp(0.0, 1.0);
            vals.push(lagrange_1d(&self.nodes_1d, xi).0);
        }
        let mut sigma = 0.0;
        let nk = if self.dim == 3 { n1 } else { 1 };
        for k in 0..nk {
            let fk = if self.dim == 3 { vals[2][k] } else { 1.0 };
            for j in 0..n1 {
                let fjk = vals[1][j] * fk;
                for i in 0..n1 {
                    sigma += c.values[i + n1 * (j + n1 * k)] * vals[0][i] * fjk;
                }
            }
        }
        Ok(sigma)
    }

    /// Same tree, values resampled from `f` at every leaf node.
    pub fn with_values<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Self {
        self.resampled(self.order, f)
    }

    /// Same tree with (possibly different) polynomial order, values from `f`.
    pub fn resampled<F: Fn([f64; 3]) -> f64>(&self, order: usize, f: F) -> Self {
        let mut out = BackgroundField {
            dim: self.dim,
            order,
            cells: self.cells.clone(),
            nodes_1d: gauss_lobatto_nodes(order).expect("order validated at build"),
        };
        for id in 0..out.cells.len() {
            out.cells[id].values.clear();
            if out.cells[id].children.is_empty() {
                let vals: Vec<f64> =
                    out.cell_node_positions(id).into_iter().map(&f).collect();
                out.cells[id].values = vals;
            }
        }
        out
    }
}

/// Sample points for the refinement decision: the nodal lattice plus the
/// centroid and all face midpoints.
fn refinement_samples(dim: usize, lo: [f64; 3], hi: [f64; 3], nodes_1d: &[f64]) -> Vec<[f64; 3]> {
    let n1 = nodes_1d.len();
    let mut pts = Vec::new();
    let nk = if dim == 3 { n1 } else { 1 };
    for k in 0..nk {
        for j in 0..n1 {
            for i in 0..n1 {
                let t = [nodes_1d[i], nodes_1d[j], nodes_1d[k]];
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = lo[a] + (hi[a] - lo[a]) * t[a];
                }
                pts.push(p);
            }
        }
    }
    let mut mid = [0.0; 3];
    for a in 0..dim {
        mid[a] = 0.5 * (lo[a] + hi[a]);
    }
    pts.push(mid);
    for a in 0..dim {
        let mut p = mid;
        p[a] = lo[a];
        pts.push(p);
        p[a] = hi[a];
        pts.push(p);
    }
    pts
}

/// Builds the refined tree for `source` over [lo, hi] and stores its values
/// at the leaf nodes. Cells split (up to `max_depth`) wherever the sampled
/// source takes both signs; σ = 0 counts with the negative side.
pub fn build_background<F: Fn([f64; 3]) -> f64>(
    source: F,
    dim: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    order: usize,
    max_depth: usize,
) -> Result<BackgroundField> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("background dim {dim} not supported")));
    }
    if order < 1 {
        return Err(Error::InvalidOrder { order, msg: "background order must be at least 1".into() });
    }
    for a in 0..dim {
        if !(hi[a] > lo[a]) {
            return Err(Error::InvalidArgument(format!(
                "degenerate bounding box along axis {a}: [{}, {}]",
                lo[a], hi[a]
            )));
        }
    }
    if order == 1 {
        eprintln!(
            "warning: background order 1 stores zero second derivatives; \
             Newton degenerates to Gauss-Newton on the fit term"
        );
    }
    let nodes_1d = gauss_lobatto_nodes(order)?;
    let mut lo3 = [0.0; 3];
    let mut hi3 = [0.0; 3];
    lo3[..dim].copy_from_slice(&lo[..dim]);
    hi3[..dim].copy_from_slice(&hi[..dim]);
    let mut cells =
        vec![Cell { lo: lo3, hi: hi3, depth: 0, children: Vec::new(), values: Vec::new() }];
    let mut queue = vec![0usize];
    while let Some(id) = queue.pop() {
        let (clo, chi, depth) = (cells[id].lo, cells[id].hi, cells[id].depth);
        if depth >= max_depth {
            continue;
        }
        let samples = refinement_samples(dim, clo, chi, &nodes_1d);
        let mut neg = false;
        let mut pos = false;
        for p in samples {
            if source(p) <= 0.0 {
                neg = true;
            } else {
                pos = true;
            }
        }
        if !(neg && pos) {
            continue;
        }
        let mut children = Vec::with_capacity(1 << dim);
        for idx in 0..1usize << dim {
            let mut klo = clo;
            let mut khi = chi;
            for a in 0..dim {
                let mid = 0.5 * (clo[a] + chi[a]);
                if idx & (1 << a) == 0 {
                    khi[a] = mid;
                } else {
                    klo[a] = mid;
                }
            }
            let child = cells.len();
            cells.push(Cell {
                lo: klo,
                hi: khi,
                depth: depth + 1,
                children: Vec::new(),
                values: Vec::new(),
            });
            children.push(child);
            queue.push(child);
        }
        cells[id].children = children;
    }
    let mut bg = BackgroundField { dim, order, cells, nodes_1d };
    bg = bg.with_values(source);
    Ok(bg)
}

// ---------------------------------------------------------------------------
// Native save/load with explicit cell-tree encoding.
//
//   morphfit-bg v1 <dim> <order> <ncells>
//   domain <lo0> <lo1> <lo2> <hi0> <hi1> <hi2>
//   cell <depth> internal <child ids...>
//   cell <depth> leaf <nodal values...>
//
// Cells appear in index order; boxes are reconstructed from the domain and
// the tree structure.

pub fn background_to_string(bg: &BackgroundField) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "morphfit-bg v1 {} {} {}", bg.dim, bg.order, bg.cells.len());
    let (lo, hi) = bg.domain();
    let _ = writeln!(s, "domain {} {} {} {} {} {}", lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]);
    for c in &bg.cells {
        if c.children.is_empty() {
            let _ = write!(s, "cell {} leaf", c.depth);
            for v in &c.values {
                let _ = write!(s, " {v}");
            }
        } else {
            let _ = write!(s, "cell {} internal", c.depth);
            for id in &c.children {
                let _ = write!(s, " {id}");
            }
        }
        s.push('\n');
    }
    s
}

pub fn save_background(bg: &BackgroundField, path: &Path) -> Result<()> {
    std::fs::write(path, background_to_string(bg))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    num: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            let line = self
                .inner
                .next()
                .ok_or(Error::Parse { line: self.num, msg: "unexpected end of file".into() })?;
            self.num += 1;
            if !line.trim().is_empty() {
                return Ok((self.num, line.trim()));
            }
        }
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { line, msg: format!("expected {what}") })
}

pub fn background_from_str(text: &str) -> Result<BackgroundField> {
    let mut lines = Lines { inner: text.lines(), num: 0 };
    let (ln, header) = lines.next()?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "morphfit-bg" {
        return Err(Error::Parse { line: ln, msg: "expected 'morphfit-bg v1 dim order ncells'".into() });
    }
    if toks[1] != "v1" {
        return Err(Error::UnsupportedVersion(toks[1].into()));
    }
    let dim: usize = field(Some(toks[2]), ln, "dim")?;
    let order: usize = field(Some(toks[3]), ln, "order")?;
    let ncells: usize = field(Some(toks[4]), ln, "cell count")?;
    if dim != 2 && dim != 3 {
        return Err(Error::Parse { line: ln, msg: format!("unsupported dim {dim}") });
    }
    let (ln, dom) = lines.next()?;
    let toks: Vec<&str> = dom.split_whitespace().collect();
    if toks.len() != 7 || toks[0] != "domain" {
        return Err(Error::Parse { line: ln, msg: "expected 'domain lo... hi...'".into() });
    }
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        lo[a] = field(Some(toks[1 + a]), ln, "domain bound")?;
        hi[a] = field(Some(toks[4 + a]), ln, "domain bound")?;
    }
    let nvals = node_count(order, dim);
    let mut cells = Vec::with_capacity(ncells);
    for _ in 0..ncells {
        let (ln, line) = lines.next()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 || toks[0] != "cell" {
            return Err(Error::Parse { line: ln, msg: "expected a 'cell' record".into() });
        }
        let depth: usize = field(Some(toks[1]), ln, "cell depth")?;
        let mut cell =
            Cell { lo: [0.0; 3], hi: [0.0; 3], depth, children: Vec::new(), values: Vec::new() };
        match toks[2] {
            "internal" => {
                if toks.len() != 3 + (1 << dim) {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("internal cell needs {} children", 1 << dim),
                    });
                }
                for t in &toks[3..] {
                    let id: usize = field(Some(t), ln, "child id")?;
                    if id >= ncells {
                        return Err(Error::Parse { line: ln, msg: format!("child id {id} out of range") });
                    }
                    cell.children.push(id);
                }
            }
            "leaf" => {
                if toks.len() != 3 + nvals {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("leaf cell needs {nvals} values, got {}", toks.len() - 3),
                    });
                }
                for t in &toks[3..] {
                    cell.values.push(field(Some(t), ln, "nodal value")?);
                }
            }
            other => {
                return Err(Error::Parse { line: ln, msg: format!("unknown cell kind '{other}'") })
            }
        }
        cells.push(cell);
    }
    // Reconstruct boxes from the root box and the split structure.
    cells[0].lo = lo;
    cells[0].hi = hi;
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let (clo, chi) = (cells[id].lo, cells[id].hi);
        let children = cells[id].children.clone();
        for (idx, &ch) in children.iter().enumerate() {
            let mut klo = clo;
            let mut khi = chi;
            for a in 0..dim {
                let mid = 0.5 * (clo[a] + chi[a]);
                if idx & (1 << a) == 0 {
                    khi[a] = mid;
                } else {
                    klo[a] = mid;
                }
            }
            cells[ch].lo = klo;
            cells[ch].hi = khi;
            stack.push(ch);
        }
    }
    Ok(BackgroundField { dim, order, cells, nodes_1d: gauss_lobatto_nodes(order)? })
}

pub fn load_background(path: &Path) -> Result<BackgroundField> {
    background_from_str(&std::fs::read_to_string(path)?)
}
