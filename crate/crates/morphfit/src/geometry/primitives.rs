//! Analytic level-set primitives and their CSG composition.
//!
//! Every leaf evaluates to a signed distance (sphere, box) or a sign-correct
//! level function (cylinder, halfspace, parabola, trapezium) with the
//! inside-negative convention. Boolean nodes compose children pointwise:
//! intersection keeps the largest σ, union the smallest, and exclusion
//! A\B = max(σ_A, −σ_B). Derivatives at a point are those of the active
//! branch, so gradients and Hessians are exact away from the measure-zero
//! kink sets where branches tie.
//!
//! Trees are described in a small s-expression format:
//!
//! ```text
//! ; centered unit-cell composite
//! (difference
//!   (intersection
//!     (box :center (0.5 0.5 0.5) :halfwidths (0.25 0.25 0.25))
//!     (sphere :center (0.5 0.5 0.5) :radius 0.3))
//!   (union
//!     (cylinder :center (0.5 0.5 0.5) :axis (1 0 0) :radius 0.15 :length 0.5)
//!     (cylinder :center (0.5 0.5 0.5) :axis (0 1 0) :radius 0.15 :length 0.5)))
//! ```
//!
//! Operator aliases `∩`, `∪` and `\` are accepted for `intersection`,
//! `union` and `difference`. Vectors take two or three components; a third
//! component defaults to zero. Comments run from `;` to end of line.

use crate::error::{Error, Result};
use crate::geometry::LevelEval;

/// A CSG tree of analytic level-set primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveTree {
    Sphere { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], halfwidths: [f64; 3] },
    Cylinder { center: [f64; 3], axis: [f64; 3], radius: f64, length: f64 },
    Halfspace { point: [f64; 3], normal: [f64; 3] },
    /// σ = y − (c₀ + c₁x + c₂x²); inside is below the curve.
    Parabola { coeffs: [f64; 3] },
    /// Convex quadrilateral; vertices are normalized to counter-clockwise
    /// order on construction.
    Trapezium { vertices: [[f64; 2]; 4] },
    Union(Vec<PrimitiveTree>),
    Intersection(Vec<PrimitiveTree>),
    Difference(Box<PrimitiveTree>, Box<PrimitiveTree>),
}

fn vsub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn vdot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = vdot(v, v).sqrt();
    if n < 1e-300 {
        return Err(Error::InvalidArgument("zero direction vector".into()));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

impl PrimitiveTree {
    /// σ, ∇σ and ∇²σ at x. Only the first `dim` coordinates participate.
    pub fn eval(&self, x: [f64; 3], dim: usize) -> LevelEval {
        match self {
            PrimitiveTree::Sphere { center, radius } => {
                let y = vsub(x, *center);
                let rho = (0..dim).map(|a| y[a] * y[a]).sum::<f64>().sqrt();
                let mut out = LevelEval { sigma: rho - radius, ..LevelEval::zero() };
                if rho > 1e-14 {
                    let mut u = [0.0; 3];
                    for a in 0..dim {
                        u[a] = y[a] / rho;
                    }
                    out.grad = u;
                    for a in 0..dim {
                        for b in 0..dim {
                            let delta = if a == b { 1.0 } else { 0.0 };
                            out.hess[a][b] = (delta - u[a] * u[b]) / rho;
                        }
                    }
                }
                out
            }
            PrimitiveTree::Box { center, halfwidths } => {
                let mut a = [0.0; 3];
                let mut s = [1.0; 3];
                for i in 0..dim {
                    let y = x[i] - center[i];
                    s[i] = if y < 0.0 { -1.0 } else { 1.0 };
                    a[i] = y.abs() - halfwidths[i];
                }
                let mut out = LevelEval::zero();
                if (0..dim).all(|i| a[i] <= 0.0) {
                    // Inside: distance to the nearest face.
                    let k = (0..dim).fold(0, |k, i| if a[i] > a[k] { i } else { k });
                    out.sigma = a[k];
                    out.grad[k] = s[k];
                } else {
                    // Outside: distance to the nearest face, edge or corner.
                    let rho = (0..dim).map(|i| a[i].max(0.0).powi(2)).sum::<f64>().sqrt();
                    out.sigma = rho;
                    let mut u = [0.0; 3];
                    for i in 0..dim {
                        if a[i] > 0.0 {
                            u[i] = a[i] / rho;
                        }
                    }
                    for i in 0..dim {
                        out.grad[i] = s[i] * u[i];
                        for j in 0..dim {
                            if a[i] > 0.0 && a[j] > 0.0 {
                                let delta = if i == j { 1.0 } else { 0.0 };
                                out.hess[i][j] = s[i] * s[j] * (delta - u[i] * u[j]) / rho;
                            }
                        }
                    }
                }
                out
            }
            PrimitiveTree::Cylinder { center, axis, radius, length } => {
                // max of the infinite-cylinder wall and the cap slab.
                let p = vsub(x, *center);
                let z = vdot(p, *axis);
                let mut w = [0.0; 3];
                for i in 0..3 {
                    w[i] = p[i] - z * axis[i];
                }
                let rho = vdot(w, w).sqrt();
                let side = rho - radius;
                let cap = z.abs() - 0.5 * length;
                if side >= cap {
                    let mut out = LevelEval { sigma: side, ..LevelEval::zero() };
                    if rho > 1e-14 {
                        let u = [w[0] / rho, w[1] / rho, w[2] / rho];
                        out.grad = u;
                        for i in 0..3 {
                            for j in 0..3 {
                                let delta = if i == j { 1.0 } else { 0.0 };
                                out.hess[i][j] = (delta - axis[i] * axis[j] - u[i] * u[j]) / rho;
                            }
                        }
                    }
                    out
                } else {
                    let s = if z < 0.0 { -1.0 } else { 1.0 };
                    let mut out = LevelEval { sigma: cap, ..LevelEval::zero() };
                    for i in 0..3 {
                        out.grad[i] = s * axis[i];
                    }
                    out
                }
            }
            PrimitiveTree::Halfspace { point, normal } => {
                let mut out = LevelEval::zero();
                out.sigma = vdot(vsub(x, *point), *normal);
                out.grad = *normal;
                out
            }
            PrimitiveTree::Parabola { coeffs } => {
                let [c0, c1, c2] = *coeffs;
                let mut out = LevelEval::zero();
                out.sigma = x[1] - (c0 + c1 * x[0] + c2 * x[0] * x[0]);
                out.grad = [-c1 - 2.0 * c2 * x[0], 1.0, 0.0];
                out.hess[0][0] = -2.0 * c2;
                out
            }
            PrimitiveTree::Trapezium { vertices } => {
                let mut best = LevelEval::zero();
                best.sigma = f64::NEG_INFINITY;
                for e in 0..4 {
                    let v = vertices[e];
                    let w = vertices[(e + 1) % 4];
                    let d = [w[0] - v[0], w[1] - v[1]];
                    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    // Outward normal of a CCW edge.
                    let n = [d[1] / len, -d[0] / len];
                    let sigma = (x[0] - v[0]) * n[0] + (x[1] - v[1]) * n[1];
                    if sigma > best.sigma {
                        best.sigma = sigma;
                        best.grad = [n[0], n[1], 0.0];
                    }
                }
                best
            }
            PrimitiveTree::Union(children) => {
                let mut best: Option<LevelEval> = None;
                for c in children {
                    let ev = c.eval(x, dim);
                    if best.as_ref().map_or(true, |b| ev.sigma < b.sigma) {
                        best = Some(ev);
                    }
                }
                best.expect("union has at least one child")
            }
            PrimitiveTree::Intersection(children) => {
                let mut best: Option<LevelEval> = None;
                for c in children {
                    let ev = c.eval(x, dim);
                    if best.as_ref().map_or(true, |b| ev.sigma > b.sigma) {
                        best = Some(ev);
                    }
                }
                best.expect("intersection has at least one child")
            }
            PrimitiveTree::Difference(a, b) => {
                let ea = a.eval(x, dim);
                let eb = b.eval(x, dim).negated();
                if ea.sigma >= eb.sigma {
                    ea
                } else {
                    eb
                }
            }
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            PrimitiveTree::Sphere { radius, .. } | PrimitiveTree::Cylinder { radius, .. }
                if radius <= 0.0 =>
            {
                Err(Error::InvalidArgument(format!("radius {radius} must be positive")))
            }
            PrimitiveTree::Cylinder { center, axis, radius, length } => {
                if length <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "cylinder length {length} must be positive"
                    )));
                }
                Ok(PrimitiveTree::Cylinder { center, axis: normalize(axis)?, radius, length })
            }
            PrimitiveTree::Halfspace { point, normal } => {
                Ok(PrimitiveTree::Halfspace { point, normal: normalize(normal)? })
            }
            PrimitiveTree::Box { halfwidths, .. }
                if halfwidths.iter().take(2).any(|&h| h <= 0.0) =>
            {
                Err(Error::InvalidArgument("box halfwidths must be positive".into()))
            }
            PrimitiveTree::Trapezium { mut vertices } => {
                // Shoelace orientation; flip clockwise input to CCW.
                let mut area2 = 0.0;
                for e in 0..4 {
                    let v = vertices[e];
                    let w = vertices[(e + 1) % 4];
                    area2 += v[0] * w[1] - w[0] * v[1];
                }
                if area2.abs() < 1e-300 {
                    return Err(Error::InvalidArgument("degenerate trapezium".into()));
                }
                if area2 < 0.0 {
                    vertices.reverse();
                }
                Ok(PrimitiveTree::Trapezium { vertices })
            }
            PrimitiveTree::Union(c) | PrimitiveTree::Intersection(c) if c.is_empty() => {
                Err(Error::InvalidArgument("boolean node needs at least one child".into()))
            }
            other => Ok(other),
        }
    }
}

// ---------------------------------------------------------------------------
// s-expression reader

enum Sexpr {
    Atom(String, usize),
    List(Vec<Sexpr>, usize),
}

impl Sexpr {
    fn line(&self) -> usize {
        match self {
            Sexpr::Atom(_, l) | Sexpr::List(_, l) => *l,
        }
    }
}

struct Tokenizer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(text: &'a str) -> Self {
        Tokenizer { chars: text.chars().peekable(), line: 1 }
    }

    /// Next token: Some(("(", line)), Some((")", line)) or an atom.
    fn next(&mut self) -> Option<(String, usize)> {
        loop {
            let &c = self.chars.peek()?;
            if c == '\n' {
                self.line += 1;
                self.chars.next();
            } else if c.is_whitespace() {
                self.chars.next();
            } else if c == ';' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.chars.next();
                }
            } else if c == '(' || c == ')' {
                self.chars.next();
                return Some((c.to_string(), self.line));
            } else {
                let start = self.line;
                let mut atom = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    self.chars.next();
                }
                return Some((atom, start));
            }
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn read_sexpr(tok: &mut Tokenizer, first: (String, usize)) -> Result<Sexpr> {
    if first.0 == "(" {
        let mut items = Vec::new();
        loop {
            let t = tok.next().ok_or_else(|| parse_err(tok.line, "unclosed '('"))?;
            if t.0 == ")" {
                return Ok(Sexpr::List(items, first.1));
            }
            items.push(read_sexpr(tok, t)?);
        }
    } else if first.0 == ")" {
        Err(parse_err(first.1, "unexpected ')'"))
    } else {
        Ok(Sexpr::Atom(first.0, first.1))
    }
}

fn as_number(s: &Sexpr) -> Result<f64> {
    match s {
        Sexpr::Atom(a, line) => {
            a.parse().map_err(|_| parse_err(*line, format!("expected a number, got '{a}'")))
        }
        Sexpr::List(_, line) => Err(parse_err(*line, "expected a number, got a list")),
    }
}

fn as_vector(s: &Sexpr) -> Result<[f64; 3]> {
    match s {
        Sexpr::List(items, line) => {
            if items.len() != 2 && items.len() != 3 {
                return Err(parse_err(*line, format!("expected 2 or 3 components, got {}", items.len())));
            }
            let mut v = [0.0; 3];
            for (i, it) in items.iter().enumerate() {
                v[i] = as_number(it)?;
            }
            Ok(v)
        }
        Sexpr::Atom(a, line) => Err(parse_err(*line, format!("expected a vector, got '{a}'"))),
    }
}

/// Collects `:key value` pairs from the tail of a leaf form.
fn keyword_args<'a>(items: &'a [Sexpr], line: usize) -> Result<Vec<(&'a str, &'a Sexpr)>> {
    if !items.len().is_multiple_of(2) {
        return Err(parse_err(line, "keyword arguments must come in pairs"));
    }
    let mut out = Vec::new();
    for pair in items.chunks(2) {
        match &pair[0] {
            Sexpr::Atom(k, l) if k.starts_with(':') => out.push((&k[1..], &pair[1], *l)),
            other => return Err(parse_err(other.line(), "expected a :keyword")),
        }
    }
    Ok(out.into_iter().map(|(k, v, _)| (k, v)).collect())
}

fn take<'a>(args: &[(&str, &'a Sexpr)], key: &str, line: usize) -> Result<&'a Sexpr> {
    args.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| parse_err(line, format!("missing :{key}")))
}

fn build_tree(s: &Sexpr) -> Result<PrimitiveTree> {
    let (items, line) = match s {
        Sexpr::List(items, line) => (items, *line),
        Sexpr::Atom(a, line) => {
            return Err(parse_err(*line, format!("expected a form, got '{a}'")))
        }
    };
    let (head, hline) = match items.first() {
        Some(Sexpr::Atom(h, l)) => (h.as_str(), *l),
        _ => return Err(parse_err(line, "form must start with an operator or primitive name")),
    };
    let tail = &items[1..];
    let tree = match head {
        "sphere" => {
            let args = keyword_args(tail, hline)?;
            PrimitiveTree::Sphere {
                center: as_vector(take(&args, "center", hline)?)?,
                radius: as_number(take(&args, "radius", hline)?)?,
            }
        }
        "box" => {
            let args = keyword_args(tail, hline)?;
            PrimitiveTree::Box {
                center: as_vector(take(&args, "center", hline)?)?,
                halfwidths: as_vector(take(&args, "halfwidths", hline)?)?,
            }
        }
        "cylinder" => {
            let args = keyword_args(tail, hline)?;
            PrimitiveTree::Cylinder {
                center: as_vector(take(&args, "center", hline)?)?,
                axis: as_vector(take(&args, "axis", hline)?)?,
                radius: as_number(take(&args, "radius", hline)?)?,
                length: as_number(take(&args, "length", hline)?)?,
            }
        }
        "halfspace" => {
            let args = keyword_args(tail, hline)?;
            PrimitiveTree::Halfspace {
                point: as_vector(take(&args, "point", hline)?)?,
                normal: as_vector(take(&args, "normal", hline)?)?,
            }
        }
        "parabola" => {
            let args = keyword_args(tail, hline)?;
            let v = as_vector(take(&args, "coeffs", hline)?)?;
            PrimitiveTree::Parabola { coeffs: v }
        }
        "trapezium" => {
            let args = keyword_args(tail, hline)?;
            let verts = match take(&args, "vertices", hline)? {
                Sexpr::List(vs, vline) => {
                    if vs.len() != 4 {
                        return Err(parse_err(*vline, "trapezium needs exactly 4 vertices"));
                    }
                    let mut out = [[0.0; 2]; 4];
                    for (i, v) in vs.iter().enumerate() {
                        let p = as_vector(v)?;
                        out[i] = [p[0], p[1]];
                    }
                    out
                }
                Sexpr::Atom(a, l) => {
                    return Err(parse_err(*l, format!("expected a vertex list, got '{a}'")))
                }
            };
            PrimitiveTree::Trapezium { vertices: verts }
        }
        "union" | "∪" => {
            PrimitiveTree::Union(tail.iter().map(build_tree).collect::<Result<_>>()?)
        }
        "intersection" | "∩" => {
            PrimitiveTree::Intersection(tail.iter().map(build_tree).collect::<Result<_>>()?)
        }
        "difference" | "\\" => {
            if tail.len() != 2 {
                return Err(parse_err(hline, "difference takes exactly two subtrees"));
            }
            PrimitiveTree::Difference(
                Box::new(build_tree(&tail[0])?),
                Box::new(build_tree(&tail[1])?),
            )
        }
        other => return Err(parse_err(hline, format!("unknown form '{other}'"))),
    };
    tree.validate()
}

/// Parses a primitive-tree description; see the module docs for the grammar.
pub fn parse_tree(text: &str) -> Result<PrimitiveTree> {
    let mut tok = Tokenizer::new(text);
    let first = tok.next().ok_or_else(|| parse_err(1, "empty primitive description"))?;
    let sexpr = read_sexpr(&mut tok, first)?;
    if let Some((t, line)) = tok.next() {
        return Err(parse_err(line, format!("trailing input '{t}' after the tree")));
    }
    build_tree(&sexpr)
}

/// Reads a primitive-tree file.
pub fn load_tree(path: &std::path::Path) -> Result<PrimitiveTree> {
    parse_tree(&std::fs::read_to_string(path)?)
}
