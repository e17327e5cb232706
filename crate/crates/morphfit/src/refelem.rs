//! Reference elements: Gauss-Lobatto nodal bases, their derivatives, and
//! quadrature rules for segments, quads, triangles, hexes and tets.
//!
//! Conventions:
//! * tensor-product elements live on [0,1]^d, simplices on the unit right
//!   simplex {x ≥ 0, Σx ≤ 1};
//! * tensor elements carry Gauss-Lobatto nodes, simplices equispaced lattice
//!   nodes (adequate for the supported simplex orders p ≤ 4);
//! * node ordering is lexicographic with the x index fastest;
//! * quadrature is Gauss-Legendre, tensorized for quads/hexes and collapsed
//!   (Duffy) for simplices, with extra points in the collapsed directions to
//!   absorb the collapse Jacobian. An n-point-per-direction rule is exact
//!   for polynomial degree 2n-1 on every geometry.

use crate::error::{Error, Result};
use crate::linalg::invert_dense;

/// Supported reference geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geom {
    Segment,
    Quad,
    Tri,
    Hex,
    Tet,
}

impl Geom {
    pub fn dim(self) -> usize {
        match self {
            Geom::Segment => 1,
            Geom::Quad | Geom::Tri => 2,
            Geom::Hex | Geom::Tet => 3,
        }
    }

    pub fn is_simplex(self) -> bool {
        matches!(self, Geom::Tri | Geom::Tet)
    }

    pub fn num_nodes(self, p: usize) -> usize {
        match self {
            Geom::Segment => p + 1,
            Geom::Quad => (p + 1) * (p + 1),
            Geom::Tri => (p + 1) * (p + 2) / 2,
            Geom::Hex => (p + 1) * (p + 1) * (p + 1),
            Geom::Tet => (p + 1) * (p + 2) * (p + 3) / 6,
        }
    }

    pub fn num_faces(self) -> usize {
        match self {
            Geom::Segment => 2,
            Geom::Quad => 4,
            Geom::Tri => 3,
            Geom::Hex => 6,
            Geom::Tet => 4,
        }
    }

    /// Measure of the reference element.
    pub fn measure(self) -> f64 {
        match self {
            Geom::Segment | Geom::Quad | Geom::Hex => 1.0,
            Geom::Tri => 0.5,
            Geom::Tet => 1.0 / 6.0,
        }
    }

    /// Reference centroid; used as the Newton start for inverse mapping.
    pub fn centroid(self) -> [f64; 3] {
        match self {
            Geom::Segment => [0.5, 0.0, 0.0],
            Geom::Quad => [0.5, 0.5, 0.0],
            Geom::Hex => [0.5, 0.5, 0.5],
            Geom::Tri => [1.0 / 3.0, 1.0 / 3.0, 0.0],
            Geom::Tet => [0.25, 0.25, 0.25],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Geom::Segment => "segment",
            Geom::Quad => "quad",
            Geom::Tri => "tri",
            Geom::Hex => "hex",
            Geom::Tet => "tet",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "segment" => Ok(Geom::Segment),
            "quad" => Ok(Geom::Quad),
            "tri" => Ok(Geom::Tri),
            "hex" => Ok(Geom::Hex),
            "tet" => Ok(Geom::Tet),
            _ => Err(Error::UnsupportedGeometry(s.to_string())),
        }
    }

    /// True if x̄ lies inside the reference element, within `pad`.
    pub fn contains(self, x: [f64; 3], pad: f64) -> bool {
        let d = self.dim();
        for a in 0..d {
            if x[a] < -pad || x[a] > 1.0 + pad {
                return false;
            }
        }
        if self.is_simplex() {
            let s: f64 = x[..d].iter().sum();
            if s > 1.0 + pad {
                return false;
            }
        }
        true
    }
}

fn check_order(geom: Geom, p: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidOrder { order: p, msg: "order must be at least 1".into() });
    }
    let max = if geom.is_simplex() { 4 } else { 12 };
    if p > max {
        return Err(Error::InvalidOrder {
            order: p,
            msg: format!("{} elements support orders up to {max}", geom.name()),
        });
    }
    Ok(())
}

/// Legendre polynomial P_n and its derivative at x (on [-1,1]).
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut pm, mut p) = (1.0, x);
    for k in 1..n {
        let pn = ((2 * k + 1) as f64 * x * p - k as f64 * pm) / (k + 1) as f64;
        pm = p;
        p = pn;
    }
    let dp = n as f64 * (x * p - pm) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Lobatto points on [0,1]: endpoints plus the roots of P'_p.
pub fn gauss_lobatto_nodes(p: usize) -> Result<Vec<f64>> {
    if p < 1 {
        return Err(Error::InvalidOrder { order: p, msg: "order must be at least 1".into() });
    }
    let mut t = vec![0.0; p + 1];
    t[0] = -1.0;
    t[p] = 1.0;
    for i in 1..p {
        // Chebyshev-Lobatto start, Newton on P'_p with
        // P''_p = (2x P'_p - p(p+1) P_p) / (1 - x²).
        let mut x = -(std::f64::consts::PI * i as f64 / p as f64).cos();
        for _ in 0..60 {
            let (v, dv) = legendre(p, x);
            let d2 = (2.0 * x * dv - (p * (p + 1)) as f64 * v) / (1.0 - x * x);
            let step = dv / d2;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        t[i] = x;
    }
    // Enforce exact symmetry, then map to [0,1].
    let mut out = vec![0.0; p + 1];
    for i in 0..=p {
        let s = 0.5 * (t[i] - t[p - i]);
        out[i] = 0.5 + 0.5 * s;
    }
    Ok(out)
}

/// n-point Gauss-Legendre rule on [0,1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidOrder { order: n, msg: "rule needs at least 1 point".into() });
    }
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (4 * i + 3) as f64 / (4 * n + 2) as f64).cos();
        for _ in 0..60 {
            let (v, dv) = legendre(n, x);
            let step = v / dv;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dv) = legendre(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dv * dv);
    }
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (xs[i] - xs[n - 1 - i])).collect();
    for i in 0..n {
        xs[i] = 0.5 + 0.5 * sym[i];
        ws[i] *= 0.5;
    }
    Ok((xs, ws))
}

/// Values and first/second derivatives of the 1D Lagrange basis on `nodes`
/// at `x`, via the product form (robust at and between nodes).
pub fn lagrange_1d(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut vals = vec![0.0; n];
    let mut d1s = vec![0.0; n];
    let mut d2s = vec![0.0; n];
    for i in 0..n {
        let mut denom = 1.0;
        let mut val = 1.0;
        for j in 0..n {
            if j != i {
                denom *= nodes[i] - nodes[j];
                val *= x - nodes[j];
            }
        }
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut pk = 1.0;
            for j in 0..n {
                if j != i && j != k {
                    pk *= x - nodes[j];
                }
            }
            d1 += pk;
            for m in 0..n {
                if m == i || m == k {
                    continue;
                }
                let mut pm = 1.0;
                for j in 0..n {
                    if j != i && j != k && j != m {
                        pm *= x - nodes[j];
                    }
                }
                d2 += pm;
            }
        }
        vals[i] = val / denom;
        d1s[i] = d1 / denom;
        d2s[i] = d2 / denom;
    }
    (vals, d1s, d2s)
}

/// A quadrature rule on a reference element.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Builds the rule for `geom` with `npts` Gauss-Legendre points per direction.
pub fn quadrature_rule(geom: Geom, npts: usize) -> Result<QuadratureRule> {
    let (xs, ws) = gauss_legendre(npts)?;
    let n = npts;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match geom {
        Geom::Segment => {
            for i in 0..n {
                points.push([xs[i], 0.0, 0.0]);
                weights.push(ws[i]);
            }
        }
        Geom::Quad => {
            for j in 0..n {
                for i in 0..n {
                    points.push([xs[i], xs[j], 0.0]);
                    weights.push(ws[i] * ws[j]);
                }
            }
        }
        Geom::Hex => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        points.push([xs[i], xs[j], xs[k]]);
                        weights.push(ws[i] * ws[j] * ws[k]);
                    }
                }
            }
        }
        Geom::Tri => {
            // Duffy collapse of the unit square: x = u, y = v(1-u), Jacobian
            // (1-u). The collapse raises the u-degree of the integrand by
            // one, so the u-direction gets an extra point to keep the rule
            // exact for total degree 2n-1, same as the tensor case.
            let (xu, wu) = gauss_legendre(npts + 1)?;
            for j in 0..n {
                for i in 0..n + 1 {
                    let (u, v) = (xu[i], xs[j]);
                    points.push([u, v * (1.0 - u), 0.0]);
                    weights.push(wu[i] * ws[j] * (1.0 - u));
                }
            }
        }
        Geom::Tet => {
            // x = u, y = v(1-u), z = w(1-u)(1-v), Jacobian (1-u)²(1-v); the
            // u- and v-degrees rise by 2 and 1, so both get an extra point.
            let (xu, wu) = gauss_legendre(npts + 1)?;
            for k in 0..n {
                for j in 0..n + 1 {
                    for i in 0..n + 1 {
                        let (u, v, w) = (xu[i], xu[j], xs[k]);
                        let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                        points.push([u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        weights.push(wu[i] * wu[j] * ws[k] * jac);
                    }
                }
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Basis values and derivatives at one reference point.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// grads[i][a] = ∂w̄_i/∂x̄_a
    pub grads: Vec<[f64; 3]>,
    /// hessians[i][a][b] = ∂²w̄_i/∂x̄_a∂x̄_b
    pub hessians: Vec<[[f64; 3]; 3]>,
}

/// Reference element for a (geometry, order) pair with tabulated basis data
/// at its quadrature points. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    geom: Geom,
    order: usize,
    nodes: Vec<[f64; 3]>,
    rule: QuadratureRule,
    /// Tensor elements: the 1D Gauss-Lobatto nodes.
    nodes_1d: Vec<f64>,
    /// Simplex elements: coefficients of each basis function over the
    /// monomial list, row i = basis i (inverse Vandermonde, transposed).
    coeffs: Vec<f64>,
    monomials: Vec<[usize; 3]>,
    /// Basis values/gradients tabulated at the quadrature points.
    qvalues: Vec<Vec<f64>>,
    qgrads: Vec<Vec<[f64; 3]>>,
}

fn simplex_nodes(geom: Geom, p: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mut nodes = Vec::new();
    let mut lattice = Vec::new();
    let h = 1.0 / p as f64;
    match geom {
        Geom::Tri => {
            for j in 0..=p {
                for i in 0..=(p - j) {
                    nodes.push([i as f64 * h, j as f64 * h, 0.0]);
                    lattice.push([i, j, 0]);
                }
            }
        }
        Geom::Tet => {
            for k in 0..=p {
                for j in 0..=(p - k) {
                    for i in 0..=(p - k - j) {
                        nodes.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                        lattice.push([i, j, k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    (nodes, lattice)
}

fn monomial_eval(m: [usize; 3], x: [f64; 3], dim: usize) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let pow = |x: f64, n: usize| x.powi(n as i32);
    let mut comp = [1.0; 3]; // x_a^{m_a}
    let mut d1 = [0.0; 3]; // d/dx_a of x_a^{m_a}
    let mut d2 = [0.0; 3];
    for a in 0..dim {
        comp[a] = pow(x[a], m[a]);
        if m[a] >= 1 {
            d1[a] = m[a] as f64 * pow(x[a], m[a] - 1);
        }
        if m[a] >= 2 {
            d2[a] = (m[a] * (m[a] - 1)) as f64 * pow(x[a], m[a] - 2);
        }
    }
    let mut val = 1.0;
    for a in 0..dim {
        val *= comp[a];
    }
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for a in 0..dim {
        let mut g = d1[a];
        for b in 0..dim {
            if b != a {
                g *= comp[b];
            }
        }
        grad[a] = g;
        for b in 0..dim {
            let mut h = if a == b { d2[a] } else { d1[a] * d1[b] };
            for c in 0..dim {
                if c != a && c != b {
                    h *= comp[c];
                }
            }
            hess[a][b] = h;
        }
    }
    (val, grad, hess)
}

impl ReferenceElement {
    /// Element with the default quadrature of order+2 points per direction.
    pub fn new(geom: Geom, order: usize) -> Result<Self> {
        Self::with_quadrature(geom, order, order + 2)
    }

    pub fn with_quadrature(geom: Geom, order: usize, npts: usize) -> Result<Self> {
        check_order(geom, order)?;
        let rule = quadrature_rule(geom, npts)?;
        let mut elem = if geom.is_simplex() {
            let (nodes, lattice) = simplex_nodes(geom, order);
            let n = nodes.len();
            let monomials: Vec<[usize; 3]> = lattice; // same index pattern: exponents i+j+k ≤ p
            let mut vand = vec![0.0; n * n];
            for (k, &node) in nodes.iter().enumerate() {
                for (j, &m) in monomials.iter().enumerate() {
                    vand[k * n + j] = monomial_eval(m, node, geom.dim()).0;
                }
            }
            let vinv = invert_dense(n, &mut vand)?;
            // coeffs[i*n + j]: weight of monomial j in basis i.
            let mut coeffs = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    coeffs[i * n + j] = vinv[j * n + i];
                }
            }
            ReferenceElement {
                geom,
                order,
                nodes,
                rule,
                nodes_1d: Vec::new(),
                coeffs,
                monomials,
                qvalues: Vec::new(),
                qgrads: Vec::new(),
            }
        } else {
            let n1 = gauss_lobatto_nodes(order)?;
            let d = geom.dim();
            let per = order + 1;
            let total = geom.num_nodes(order);
            let mut nodes = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut x = [0.0; 3];
                for a in 0..d {
                    x[a] = n1[rem % per];
                    rem /= per;
                }
                nodes.push(x);
            }
            ReferenceElement {
                geom,
                order,
                nodes,
                rule,
                nodes_1d: n1,
                coeffs: Vec::new(),
                monomials: Vec::new(),
                qvalues: Vec::new(),
                qgrads: Vec::new(),
            }
        };
        for q in 0..elem.rule.points.len() {
            let be = elem.eval_basis(elem.rule.points[q]);
            elem.qvalues.push(be.values);
            elem.qgrads.push(be.grads);
        }
        Ok(elem)
    }

    pub fn geom(&self) -> Geom {
        self.geom
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Tabulated basis values at quadrature point q.
    pub fn qvalues(&self, q: usize) -> &[f64] {
        &self.qvalues[q]
    }

    /// Tabulated basis gradients at quadrature point q.
    pub fn qgrads(&self, q: usize) -> &[[f64; 3]] {
        &self.qgrads[q]
    }

    /// Values, gradients and Hessians of all basis functions at x̄.
    /// Evaluation outside the reference element extrapolates the polynomials.
    pub fn eval_basis(&self, x: [f64; 3]) -> BasisEval {
        let n = self.num_nodes();
        let d = self.dim();
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0; 3]; n];
        let mut hessians = vec![[[0.0; 3]; 3]; n];
        if self.geom.is_simplex() {
            for i in 0..n {
                let mut v = 0.0;
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for (j, &m) in self.monomials.iter().enumerate() {
                    let c = self.coeffs[i * n + j];
                    if c == 0.0 {
                        continue;
                    }
                    let (mv, mg, mh) = monomial_eval(m, x, d);
                    v += c * mv;
                    for a in 0..d {
                        g[a] += c * mg[a];
                        for b in 0..d {
                            h[a][b] += c * mh[a][b];
                        }
                    }
                }
                values[i] = v;
                grads[i] = g;
                hessians[i] = h;
            }
        } else {
            let per = self.order + 1;
            let mut vals1 = Vec::with_capacity(d);
            let mut d1s = Vec::with_capacity(d);
            let mut d2s = Vec::with_capacity(d);
            for a in 0..d {
                let (v, d1, d2) = lagrange_1d(&self.nodes_1d, x[a]);
                vals1.push(v);
                d1s.push(d1);
                d2s.push(d2);
            }
            for idx in 0..n {
                let mut rem = idx;
                let mut ik = [0usize; 3];
                for a in 0..d {
                    ik[a] = rem % per;
                    rem /= per;
                }
                let mut v = 1.0;
                for a in 0..d {
                    v *= vals1[a][ik[a]];
                }
                values[idx] = v;
                for a in 0..d {
                    let mut g = d1s[a][ik[a]];
                    for b in 0..d {
                        if b != a {
                            g *= vals1[b][ik[b]];
                        }
                    }
                    grads[idx][a] = g;
                    for b in 0..d {
                        let mut h = if a == b { d2s[a][ik[a]] } else { d1s[a][ik[a]] * d1s[b][ik[b]] };
                        for c in 0..d {
                            if c != a && c != b {
                                h *= vals1[c][ik[c]];
                            }
                        }
                        hessians[idx][a][b] = h;
                    }
                }
            }
        }
        BasisEval { values, grads, hessians }
    }
}

/// Global node indices (into the element's node list) of a local face,
/// in a deterministic order.
///
/// Face numbering: tensor elements use (axis, side) pairs
/// 0:x=0, 1:x=1, 2:y=0, 3:y=1, 4:z=0, 5:z=1; triangles use 0:y=0,
/// 1:hypotenuse, 2:x=0; tets use 0:x=0, 1:y=0, 2:z=0, 3:diagonal face.
pub fn local_face_nodes(geom: Geom, p: usize, face: usize) -> Vec<usize> {
    let per = p + 1;
    match geom {
        Geom::Segment => vec![if face == 0 { 0 } else { p }],
        Geom::Quad => {
            let axis = face / 2;
            let side = face % 2;
            let fixed = side * p;
            let mut out = Vec::with_capacity(per);
            for t in 0..per {
                let (i, j) = if axis == 0 { (fixed, t) } else { (t, fixed) };
                out.push(i + per * j);
            }
            out
        }
        Geom::Hex => {
            let axis = face / 2;
            let side = face % 2;
            let fixed = side * p;
            let mut out = Vec::with_capacity(per * per);
            for t2 in 0..per {
                for t1 in 0..per {
                    let (i, j, k) = match axis {
                        0 => (fixed, t1, t2),
                        1 => (t1, fixed, t2),
                        _ => (t1, t2, fixed),
                    };
                    out.push(i + per * (j + per * k));
                }
            }
            out
        }
        Geom::Tri => {
            // Node (i,j) lives at index offset(j) + i with
            // offset(j) = Σ_{r<j} (p+1-r).
            let offset = |j: usize| -> usize { (0..j).map(|r| p + 1 - r).sum() };
            match face {
                0 => (0..per).collect(),
                1 => (0..per).map(|j| offset(j) + (p - j)).collect(),
                2 => (0..per).map(|j| offset(j)).collect(),
                _ => panic!("triangle has 3 faces"),
            }
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
            let mut out = Vec::new();
            match face {
                0 => {
                    for k in 0..=p {
                        for j in 0..=(p - k) {
                            out.push(index[&(0, j, k)]);
                        }
                    }
                }
                1 => {
                    for k in 0..=p {
                        for i in 0..=(p - k) {
                            out.push(index[&(i, 0, k)]);
                        }
                    }
                }
                2 => {
                    for j in 0..=p {
                        for i in 0..=(p - j) {
                            out.push(index[&(i, j, 0)]);
                        }
                    }
                }
                3 => {
                    for k in 0..=p {
                        for j in 0..=(p - k) {
                            out.push(index[&(p - j - k, j, k)]);
                        }
                    }
                }
                _ => panic!("tet has 4 faces"),
            }
            out
        }
    }
}
