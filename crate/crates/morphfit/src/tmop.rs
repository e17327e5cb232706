//! Target-matrix mesh quality: metrics μ(T), target matrices W, and the
//! quality objective
//!
//!   F_μ(𝐱) = Σ_E Σ_q w_q det(W) μ(T(x̄_q)),   T = A W⁻¹,
//!
//! together with its exact gradient and Hessian with respect to the global
//! coordinate vector.
//!
//! The metric derivatives follow from matrix calculus with K = T⁻ᵀ:
//! ∂τ/∂T = τK and ∂K_ac/∂T_be = -K_bc K_ae. Every supported metric has a
//! Hessian of the common form
//!
//!   ∂²μ/∂T_ac∂T_be = α δ_ab δ_ce + β (T_ac K_be + K_ac T_be)
//!                  + γ₁ K_ac K_be + γ₂ K_bc K_ae,
//!
//! which the assembly exploits: contracting with the per-node vectors
//! G_i = W⁻ᵀ∇w̄_i, U_i = K G_i, V_i = T G_i reduces each node-pair block to a
//! handful of rank-one products.

use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::mesh::HighOrderMesh;
use crate::refelem::Geom;
use crate::sparse::CsrMatrix;

/// Target matrix selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub kind: TargetKind,
    /// Uniform scale applied to the target; must be positive.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Identity,
    IdealSimplex,
}

impl TargetSpec {
    pub fn identity() -> Self {
        TargetSpec { kind: TargetKind::Identity, scale: 1.0 }
    }

    pub fn ideal_simplex() -> Self {
        TargetSpec { kind: TargetKind::IdealSimplex, scale: 1.0 }
    }
}

/// W for the given target and geometry. Identity works everywhere; the
/// ideal-simplex target maps the unit right triangle to the equilateral
/// triangle (right tet to the regular tet) and rejects tensor geometries.
pub fn target_matrix(spec: &TargetSpec, geom: Geom) -> Result<SmallMat> {
    if !(spec.scale > 0.0) {
        return Err(Error::InvalidArgument(format!("target scale {} must be positive", spec.scale)));
    }
    let d = geom.dim();
    let w = match spec.kind {
        TargetKind::Identity => SmallMat::identity(d),
        TargetKind::IdealSimplex => match geom {
            Geom::Tri => SmallMat::from_cols(
                2,
                &[[1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]],
            ),
            Geom::Tet => SmallMat::from_cols(
                3,
                &[
                    [1.0, 0.0, 0.0],
                    [0.5, 3f64.sqrt() / 2.0, 0.0],
                    [0.5, 3f64.sqrt() / 6.0, 6f64.sqrt() / 3.0],
                ],
            ),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "ideal-simplex target is undefined for {} elements",
                    geom.name()
                )))
            }
        },
    };
    Ok(w.scaled(spec.scale))
}

/// Quality metric identifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricId {
    /// Shape metric |T|²/(2τ) - 1 (scale-invariant in 2D).
    Mu2,
    /// Size metric ½(τ - 1/τ)².
    Mu77,
    /// Convex combination γ·μ2 + (1-γ)·μ77.
    Mu80(f64),
    /// Shape metric |T|²/(3τ^{2/3}) - 1 (scale-invariant in 3D).
    Mu303,
}

/// Coefficients of the common Hessian form; see the module docs.
#[derive(Debug, Clone, Copy, Default)]
pub struct HessCoeffs {
    pub alpha: f64,
    pub tk: f64,
    pub kk: f64,
    pub kswap: f64,
}

impl HessCoeffs {
    fn axpy(&mut self, c: f64, o: &HessCoeffs) {
        self.alpha += c * o.alpha;
        self.tk += c * o.tk;
        self.kk += c * o.kk;
        self.kswap += c * o.kswap;
    }
}

/// Dense d²×d² metric Hessian, h[a][c][b][e] = ∂²μ/∂T_ac∂T_be.
#[derive(Debug, Clone)]
pub struct MetricHessian {
    pub dim: usize,
    h: [[[[f64; 3]; 3]; 3]; 3],
}

impl MetricHessian {
    pub fn get(&self, a: usize, c: usize, b: usize, e: usize) -> f64 {
        self.h[a][c][b][e]
    }
}

fn tau_checked(id: &str, t: &SmallMat) -> Result<f64> {
    let tau = t.det();
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::MetricUndefined(format!("{id} requires det(T) > 0, got {tau}")));
    }
    Ok(tau)
}

impl MetricId {
    /// μ80 with a validated interpolation parameter.
    pub fn mu80(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("mu80 gamma {gamma} outside [0,1]")));
        }
        Ok(MetricId::Mu80(gamma))
    }

    /// Metric from its conventional number (2, 77, 80, 303).
    pub fn from_number(n: u32, gamma: f64) -> Result<Self> {
        match n {
            2 => Ok(MetricId::Mu2),
            77 => Ok(MetricId::Mu77),
            80 => Self::mu80(gamma),
            303 => Ok(MetricId::Mu303),
            _ => Err(Error::InvalidArgument(format!("unknown metric {n}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            MetricId::Mu2 => "mu2".into(),
            MetricId::Mu77 => "mu77".into(),
            MetricId::Mu80(g) => format!("mu80({g})"),
            MetricId::Mu303 => "mu303".into(),
        }
    }

    pub fn eval(&self, t: &SmallMat) -> Result<f64> {
        match *self {
            MetricId::Mu2 => {
                let tau = tau_checked("mu2", t)?;
                Ok(t.frob_sq() / (2.0 * tau) - 1.0)
            }
            MetricId::Mu77 => {
                let tau = tau_checked("mu77", t)?;
                let g = tau - 1.0 / tau;
                Ok(0.5 * g * g)
            }
            MetricId::Mu80(gamma) => {
                Ok(gamma * MetricId::Mu2.eval(t)? + (1.0 - gamma) * MetricId::Mu77.eval(t)?)
            }
            MetricId::Mu303 => {
                let tau = tau_checked("mu303", t)?;
                Ok(t.frob_sq() / (3.0 * tau.powf(2.0 / 3.0)) - 1.0)
            }
        }
    }

    /// ∂μ/∂T.
    pub fn grad(&self, t: &SmallMat) -> Result<SmallMat> {
        let d = t.dim;
        match *self {
            MetricId::Mu2 => {
                let tau = tau_checked("mu2", t)?;
                let k = t.inverse()?.transpose();
                Ok(t.scaled(1.0 / tau).add(&k.scaled(-t.frob_sq() / (2.0 * tau))))
            }
            MetricId::Mu77 => {
                let tau = tau_checked("mu77", t)?;
                let k = t.inverse()?.transpose();
                let c1 = (tau - 1.0 / tau) * (1.0 + 1.0 / (tau * tau));
                Ok(k.scaled(c1 * tau))
            }
            MetricId::Mu80(gamma) => {
                let g2 = MetricId::Mu2.grad(t)?;
                let g77 = MetricId::Mu77.grad(t)?;
                Ok(g2.scaled(gamma).add(&g77.scaled(1.0 - gamma)))
            }
            MetricId::Mu303 => {
                let tau = tau_checked("mu303", t)?;
                let k = t.inverse()?.transpose();
                let s = 2.0 / (3.0 * tau.powf(2.0 / 3.0));
                let mut g = SmallMat::zeros(d);
                let f2 = t.frob_sq();
                for a in 0..d {
                    for c in 0..d {
                        g.set(a, c, s * (t.get(a, c) - f2 / 3.0 * k.get(a, c)));
                    }
                }
                Ok(g)
            }
        }
    }

    /// Coefficients of the structured Hessian form at T.
    pub fn hess_coeffs(&self, t: &SmallMat) -> Result<HessCoeffs> {
        match *self {
            MetricId::Mu2 => {
                let tau = tau_checked("mu2", t)?;
                let f2 = t.frob_sq();
                Ok(HessCoeffs {
                    alpha: 1.0 / tau,
                    tk: -1.0 / tau,
                    kk: f2 / (2.0 * tau),
                    kswap: f2 / (2.0 * tau),
                })
            }
            MetricId::Mu77 => {
                let tau = tau_checked("mu77", t)?;
                let g = tau - 1.0 / tau;
                let dg = 1.0 + 1.0 / (tau * tau);
                let c1 = g * dg;
                let c2 = dg * dg - 2.0 * g / (tau * tau * tau);
                Ok(HessCoeffs {
                    alpha: 0.0,
                    tk: 0.0,
                    kk: c2 * tau * tau + c1 * tau,
                    kswap: -c1 * tau,
                })
            }
            MetricId::Mu80(gamma) => {
                let mut c = HessCoeffs::default();
                c.axpy(gamma, &MetricId::Mu2.hess_coeffs(t)?);
                c.axpy(1.0 - gamma, &MetricId::Mu77.hess_coeffs(t)?);
                Ok(c)
            }
            MetricId::Mu303 => {
                let tau = tau_checked("mu303", t)?;
                let f2 = t.frob_sq();
                let s = tau.powf(2.0 / 3.0);
                Ok(HessCoeffs {
                    alpha: 2.0 / (3.0 * s),
                    tk: -4.0 / (9.0 * s),
                    kk: 4.0 * f2 / (27.0 * s),
                    kswap: 2.0 * f2 / (9.0 * s),
                })
            }
        }
    }

    /// Dense metric Hessian (test/validation path; assembly uses the
    /// coefficient form directly).
    pub fn hess(&self, t: &SmallMat) -> Result<MetricHessian> {
        let d = t.dim;
        let c = self.hess_coeffs(t)?;
        let k = t.inverse()?.transpose();
        let mut h = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..d {
            for cc in 0..d {
                for b in 0..d {
                    for e in 0..d {
                        let mut v = 0.0;
                        if a == b && cc == e {
                            v += c.alpha;
                        }
                        v += c.tk * (t.get(a, cc) * k.get(b, e) + k.get(a, cc) * t.get(b, e));
                        v += c.kk * k.get(a, cc) * k.get(b, e);
                        v += c.kswap * k.get(b, cc) * k.get(a, e);
                        h[a][cc][b][e] = v;
                    }
                }
            }
        }
        Ok(MetricHessian { dim: d, h })
    }
}

struct TargetCtx {
    winv_t: SmallMat,
    detw: f64,
    identity: bool,
}

fn target_ctx(spec: &TargetSpec, geom: Geom) -> Result<TargetCtx> {
    let w = target_matrix(spec, geom)?;
    let detw = w.det();
    let winv = w.inverse()?;
    let identity = spec.kind == TargetKind::Identity && spec.scale == 1.0;
    Ok(TargetCtx { winv_t: winv.transpose(), detw, identity })
}

fn invalid_mesh(e: usize, err: Error) -> Error {
    match err {
        Error::MetricUndefined(msg) => {
            Error::InvalidMesh(format!("nonpositive Jacobian in element {e}: {msg}"))
        }
        other => other,
    }
}

/// F_μ over the whole mesh.
pub fn objective_mu(mesh: &HighOrderMesh, spec: &TargetSpec, metric: MetricId) -> Result<f64> {
    let ctx = target_ctx(spec, mesh.geom())?;
    let rule = mesh.ref_elem().quadrature();
    let mut total = 0.0;
    for e in 0..mesh.num_elems() {
        for q in 0..rule.points.len() {
            let a = mesh.jacobian_at_q(e, q);
            let t = if ctx.identity { a } else { a.mul(&ctx.winv_t.transpose()) };
            let mu = metric.eval(&t).map_err(|err| invalid_mesh(e, err))?;
            total += rule.weights[q] * ctx.detw * mu;
        }
    }
    Ok(total)
}

/// Gradient of F_μ with respect to the coordinate vector (component-major).
pub fn grad_mu(mesh: &HighOrderMesh, spec: &TargetSpec, metric: MetricId) -> Result<Vec<f64>> {
    let ctx = target_ctx(spec, mesh.geom())?;
    let rule = mesh.ref_elem().quadrature();
    let d = mesh.dim();
    let nn = mesh.num_nodes();
    let np = mesh.ref_elem().num_nodes();
    let mut grad = vec![0.0; d * nn];
    let mut gt = vec![[0.0; 3]; np];
    for e in 0..mesh.num_elems() {
        let ids = mesh.elem_nodes(e);
        for q in 0..rule.points.len() {
            let a = mesh.jacobian_at_q(e, q);
            let t = if ctx.identity { a } else { a.mul(&ctx.winv_t.transpose()) };
            let p = metric.grad(&t).map_err(|err| invalid_mesh(e, err))?;
            let scale = rule.weights[q] * ctx.detw;
            let grads = mesh.ref_elem().qgrads(q);
            for i in 0..np {
                gt[i] = if ctx.identity { grads[i] } else { ctx.winv_t.mul_vec(grads[i]) };
            }
            for (i, &gid) in ids.iter().enumerate() {
                for comp in 0..d {
                    let mut s = 0.0;
                    for c in 0..d {
                        s += p.get(comp, c) * gt[i][c];
                    }
                    grad[comp * nn + gid] += scale * s;
                }
            }
        }
    }
    Ok(grad)
}

/// Hessian of F_μ (sparse symmetric, element-local coupling).
pub fn hess_mu(mesh: &HighOrderMesh, spec: &TargetSpec, metric: MetricId) -> Result<CsrMatrix> {
    let ctx = target_ctx(spec, mesh.geom())?;
    let rule = mesh.ref_elem().quadrature();
    let d = mesh.dim();
    let nn = mesh.num_nodes();
    let np = mesh.ref_elem().num_nodes();
    let nloc = d * np;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.num_elems() * nloc * nloc);
    let mut local = vec![0.0; nloc * nloc];
    let mut gt = vec![[0.0; 3]; np];
    let mut u = vec![[0.0; 3]; np];
    let mut v = vec![[0.0; 3]; np];
    for e in 0..mesh.num_elems() {
        let ids = mesh.elem_nodes(e);
        local.iter_mut().for_each(|x| *x = 0.0);
        for q in 0..rule.points.len() {
            let a = mesh.jacobian_at_q(e, q);
            let t = if ctx.identity { a } else { a.mul(&ctx.winv_t.transpose()) };
            let coeffs = metric.hess_coeffs(&t).map_err(|err| invalid_mesh(e, err))?;
            let k = t.inverse()?.transpose();
            let scale = rule.weights[q] * ctx.detw;
            let grads = mesh.ref_elem().qgrads(q);
            for i in 0..np {
                gt[i] = if ctx.identity { grads[i] } else { ctx.winv_t.mul_vec(grads[i]) };
                u[i] = k.mul_vec(gt[i]);
                v[i] = t.mul_vec(gt[i]);
            }
            for i in 0..np {
                for j in 0..np {
                    let mut gg = 0.0;
                    for c in 0..d {
                        gg += gt[i][c] * gt[j][c];
                    }
                    for a_ in 0..d {
                        let row = a_ * np + i;
                        for b in 0..d {
                            let mut h = coeffs.tk * (v[i][a_] * u[j][b] + u[i][a_] * v[j][b])
                                + coeffs.kk * u[i][a_] * u[j][b]
                                + coeffs.kswap * u[i][b] * u[j][a_];
                            if a_ == b {
                                h += coeffs.alpha * gg;
                            }
                            local[row * nloc + b * np + j] += scale * h;
                        }
                    }
                }
            }
        }
        for a_ in 0..d {
            for (i, &gi) in ids.iter().enumerate() {
                let row = a_ * np + i;
                for b in 0..d {
                    for (j, &gj) in ids.iter().enumerate() {
                        triplets.push((a_ * nn + gi, b * nn + gj, local[row * nloc + b * np + j]));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(d * nn, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_cartesian, HighOrderMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_t(rng: &mut ChaCha8Rng, d: usize) -> SmallMat {
        loop {
            let mut t = SmallMat::identity(d);
            for i in 0..d {
                for j in 0..d {
                    t.add_to(i, j, rng.gen_range(-0.5..0.5));
                }
            }
            if t.det() > 0.05 {
                return t;
            }
        }
    }

    const METRICS: [MetricId; 4] =
        [MetricId::Mu2, MetricId::Mu77, MetricId::Mu80(0.3), MetricId::Mu303];

    #[test]
    fn metrics_vanish_at_identity() {
        // Each metric in its natural dimension: mu2/mu80 are 2D shape
        // metrics, mu303 is the 3D analogue, mu77 is dimension-agnostic.
        let id2 = SmallMat::identity(2);
        let id3 = SmallMat::identity(3);
        for (m, id) in [
            (MetricId::Mu2, &id2),
            (MetricId::Mu77, &id2),
            (MetricId::Mu77, &id3),
            (MetricId::Mu80(0.3), &id2),
            (MetricId::Mu303, &id3),
        ] {
            assert!(m.eval(id).unwrap().abs() < 1e-14, "{}", m.name());
        }
    }

    #[test]
    fn metric_hand_values() {
        let t = SmallMat::from_cols(2, &[[2.0, 0.0, 0.0], [0.0, 0.5, 0.0]]);
        assert!((MetricId::Mu2.eval(&t).unwrap() - 1.125).abs() < 1e-14);
        let t = SmallMat::from_cols(2, &[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!((MetricId::Mu77.eval(&t).unwrap() - 1.125).abs() < 1e-14);
        let g = MetricId::Mu80(0.25);
        let expect = 0.25 * MetricId::Mu2.eval(&t).unwrap() + 0.75 * 1.125;
        assert!((g.eval(&t).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_tau_rejected() {
        let mut t = SmallMat::identity(2);
        t.set(0, 0, -1.0);
        for m in METRICS {
            assert!(matches!(m.eval(&t), Err(Error::MetricUndefined(_))));
        }
    }

    #[test]
    fn mu2_nonnegative_in_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let t = random_t(&mut rng, 2);
            assert!(MetricId::Mu2.eval(&t).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn metric_grad_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for d in [2, 3] {
            for m in METRICS {
                for _ in 0..20 {
                    let t = random_t(&mut rng, d);
                    let g = m.grad(&t).unwrap();
                    for a in 0..d {
                        for c in 0..d {
                            let mut tp = t;
                            let mut tm = t;
                            tp.add_to(a, c, h);
                            tm.add_to(a, c, -h);
                            let fd = (m.eval(&tp).unwrap() - m.eval(&tm).unwrap()) / (2.0 * h);
                            let scale = g.get(a, c).abs().max(1.0);
                            assert!(
                                (fd - g.get(a, c)).abs() / scale < 1e-6,
                                "{} d={d}: {} vs {}",
                                m.name(),
                                fd,
                                g.get(a, c)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn metric_hess_matches_fd_of_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for d in [2, 3] {
            for m in METRICS {
                for _ in 0..10 {
                    let t = random_t(&mut rng, d);
                    let hess = m.hess(&t).unwrap();
                    for b in 0..d {
                        for e in 0..d {
                            let mut tp = t;
                            let mut tm = t;
                            tp.add_to(b, e, h);
                            tm.add_to(b, e, -h);
                            let gp = m.grad(&tp).unwrap();
                            let gm = m.grad(&tm).unwrap();
                            for a in 0..d {
                                for c in 0..d {
                                    let fd = (gp.get(a, c) - gm.get(a, c)) / (2.0 * h);
                                    let v = hess.get(a, c, b, e);
                                    let scale = v.abs().max(1.0);
                                    assert!(
                                        (fd - v).abs() / scale < 1e-5,
                                        "{} hess ({a}{c},{b}{e}): {fd} vs {v}",
                                        m.name()
                                    );
                                }
                            }
                        }
                    }
                    // Symmetry of the dense form.
                    for a in 0..d {
                        for c in 0..d {
                            for b in 0..d {
                                for e in 0..d {
                                    let diff = hess.get(a, c, b, e) - hess.get(b, e, a, c);
                                    assert!(diff.abs() < 1e-12);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn target_matrices() {
        let w = target_matrix(&TargetSpec::identity(), Geom::Quad).unwrap();
        assert_eq!(w, SmallMat::identity(2));
        let w = target_matrix(&TargetSpec::ideal_simplex(), Geom::Tri).unwrap();
        assert!((w.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((w.get(1, 1) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((w.det() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let w = target_matrix(&TargetSpec::ideal_simplex(), Geom::Tet).unwrap();
        assert!((w.det() - 2f64.sqrt() / 2.0).abs() < 1e-14);
        assert!(target_matrix(&TargetSpec::ideal_simplex(), Geom::Quad).is_err());
        let spec = TargetSpec { kind: TargetKind::Identity, scale: 0.0 };
        assert!(target_matrix(&spec, Geom::Quad).is_err());
    }

    fn perturb_interior(mesh: &mut HighOrderMesh, rng: &mut ChaCha8Rng, amp: f64) {
        for i in 0..mesh.num_nodes() {
            let p = mesh.node(i);
            let interior = (0..mesh.dim()).all(|a| p[a] > 1e-9 && p[a] < 1.0 - 1e-9);
            if interior {
                let mut q = p;
                for a in 0..mesh.dim() {
                    q[a] += rng.gen_range(-amp..amp);
                }
                mesh.set_node(i, q);
            }
        }
        assert!(mesh.min_det_a() > 0.0, "perturbation untangled the test mesh");
    }

    #[test]
    fn objective_zero_on_uniform_mesh() {
        let mesh = make_cartesian(Geom::Quad, [4, 4, 1], 2).unwrap();
        let f = objective_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2).unwrap();
        assert!(f.abs() < 1e-13, "F = {f}");
        let g = grad_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn objective_nonnegative_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut mesh = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        perturb_interior(&mut mesh, &mut rng, 0.03);
        let spec = TargetSpec::identity();
        let f = objective_mu(&mesh, &spec, MetricId::Mu2).unwrap();
        assert!(f > 0.0);
        let mut scaled = mesh.clone();
        for v in scaled.coords_mut() {
            *v *= 2.7;
        }
        let fs = objective_mu(&scaled, &spec, MetricId::Mu2).unwrap();
        assert!((fs - f).abs() / f < 1e-12);

        let mut mesh3 = make_cartesian(Geom::Hex, [2, 2, 2], 2).unwrap();
        perturb_interior(&mut mesh3, &mut rng, 0.02);
        let f3 = objective_mu(&mesh3, &spec, MetricId::Mu303).unwrap();
        let mut scaled3 = mesh3.clone();
        for v in scaled3.coords_mut() {
            *v *= 0.3;
        }
        let fs3 = objective_mu(&scaled3, &spec, MetricId::Mu303).unwrap();
        assert!((fs3 - f3).abs() / f3 < 1e-12);
    }

    #[test]
    fn objective_matches_brute_force_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut mesh = make_cartesian(Geom::Tri, [2, 2, 1], 2).unwrap();
        perturb_interior(&mut mesh, &mut rng, 0.03);
        let spec = TargetSpec::ideal_simplex();
        let metric = MetricId::Mu2;
        let f = objective_mu(&mesh, &spec, metric).unwrap();
        // Independent summation through the public point-wise API.
        let w = target_matrix(&spec, Geom::Tri).unwrap();
        let winv = w.inverse().unwrap();
        let rule = mesh.ref_elem().quadrature().clone();
        let mut brute = 0.0;
        for e in 0..mesh.num_elems() {
            for (q, &pt) in rule.points.iter().enumerate() {
                let a = mesh.jacobian(e, pt).unwrap();
                let t = a.mul(&winv);
                brute += rule.weights[q] * w.det() * metric.eval(&t).unwrap();
            }
        }
        assert!((f - brute).abs() < 1e-13 * brute.abs().max(1.0));
    }

    #[test]
    fn objective_rejects_inverted_mesh() {
        let re = crate::refelem::ReferenceElement::new(Geom::Quad, 1).unwrap();
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let mesh = HighOrderMesh::from_parts(re, nodes, vec![1, 0, 2, 3], vec![], None).unwrap();
        assert!(matches!(
            objective_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn grad_mu_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (geom, metric, spec) in [
            (Geom::Quad, MetricId::Mu2, TargetSpec::identity()),
            (Geom::Tri, MetricId::Mu80(0.5), TargetSpec::ideal_simplex()),
            (Geom::Hex, MetricId::Mu303, TargetSpec::identity()),
        ] {
            let counts = if geom.dim() == 2 { [2, 2, 1] } else { [2, 2, 2] };
            let mut mesh = make_cartesian(geom, counts, 2).unwrap();
            perturb_interior(&mut mesh, &mut rng, 0.02);
            let g = grad_mu(&mesh, &spec, metric).unwrap();
            let gnorm = crate::linalg::norm_slice(&g);
            let h = 1e-6;
            // Check a deterministic sample of coordinate directions.
            let n = g.len();
            for idx in (0..n).step_by(n / 23 + 1) {
                let mut mp = mesh.clone();
                mp.coords_mut()[idx] += h;
                let mut mm = mesh.clone();
                mm.coords_mut()[idx] -= h;
                let fd = (objective_mu(&mp, &spec, metric).unwrap()
                    - objective_mu(&mm, &spec, metric).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - g[idx]).abs() / gnorm.max(1.0) < 1e-6,
                    "{} {}: idx {idx}: {fd} vs {}",
                    geom.name(),
                    metric.name(),
                    g[idx]
                );
            }
        }
    }

    #[test]
    fn grad_mu_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut mesh = make_cartesian(Geom::Quad, [2, 2, 1], 3).unwrap();
        perturb_interior(&mut mesh, &mut rng, 0.02);
        let g0 = grad_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2).unwrap();
        let nn = mesh.num_nodes();
        for i in 0..nn {
            mesh.coords_mut()[i] += 0.37;
            mesh.coords_mut()[nn + i] -= 1.21;
        }
        let g1 = grad_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hess_mu_matches_fd_of_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (geom, metric) in [(Geom::Quad, MetricId::Mu2), (Geom::Tri, MetricId::Mu77)] {
            let mut mesh = make_cartesian(geom, [2, 2, 1], 2).unwrap();
            perturb_interior(&mut mesh, &mut rng, 0.02);
            let spec = TargetSpec::identity();
            let hess = hess_mu(&mesh, &spec, metric).unwrap();
            assert!(hess.asymmetry() < 1e-11);
            let h = 1e-6;
            let n = mesh.coords().len();
            for col in (0..n).step_by(n / 17 + 1) {
                let mut mp = mesh.clone();
                mp.coords_mut()[col] += h;
                let mut mm = mesh.clone();
                mm.coords_mut()[col] -= h;
                let gp = grad_mu(&mp, &spec, metric).unwrap();
                let gm = grad_mu(&mm, &spec, metric).unwrap();
                for row in 0..n {
                    let fd = (gp[row] - gm[row]) / (2.0 * h);
                    let v = hess.get(row, col);
                    let scale = v.abs().max(1.0);
                    assert!(
                        (fd - v).abs() / scale < 1e-5,
                        "{} {}: ({row},{col}): {fd} vs {v}",
                        geom.name(),
                        metric.name()
                    );
                }
            }
        }
    }
}
