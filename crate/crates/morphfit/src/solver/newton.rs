//! The damped Newton loop for mesh quality optimization and interface
//! fitting.
//!
//! Both entry points share one driver. Each iteration assembles the
//! gradient 𝒥 and Hessian ℋ of the combined objective F = F_μ + F_σ,
//! solves ℋΔ𝐱 = 𝒥 with preconditioned MINRES, applies the backtracking
//! line search from [`super::line_search`] to 𝐱 − αΔ𝐱 and, when fitting,
//! advances the penalization weight from the change of the interface
//! error. The loop runs while |σ|_{𝒮,∞} > ε_σ, the weight counter n_σ is
//! within its budget N_σ and fewer than N_opt iterations were taken; a
//! small relative gradient stops early in either mode. Every state the
//! report records is an accepted iterate, so the run can be audited
//! against the step-acceptance rules after the fact.
//!
//! Both entry points take a set of nodes to hold fixed. The shape metrics
//! cost nothing on locally conformal deformations, so a mesh whose nodes
//! are all free can slide entire regions toward the fitted interface and
//! collapse elements against the Jacobian floor; pinning the domain
//! boundary (minus any fitted boundary nodes) anchors those modes. Fixed
//! nodes keep their gradient entries at zero and their Hessian rows and
//! columns replaced by the unit diagonal, which the step solve and line
//! search then never move.

use crate::error::{Error, Result};
use crate::fitting::{fit_error, grad_sigma, hess_sigma, objective_sigma, WeightState};
use crate::geometry::LevelSetField;
use crate::linalg::norm_slice;
use crate::mesh::{HighOrderMesh, NodeSet};
use crate::solver::line_search::{backtrack, StepCriteria, StepEval};
use crate::solver::minres::{jacobi_diagonal, minres_jacobi};
use crate::sparse::CsrMatrix;
use crate::tmop::{grad_mu, hess_mu, objective_mu, MetricId, TargetSpec};

/// Knobs of the Newton loop and its inner linear solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative-gradient tolerance ε: stop once ‖𝒥‖ ≤ ε·‖𝒥(𝐱₀)‖.
    pub grad_tol: f64,
    /// Fit tolerance ε_σ on |σ|_{𝒮,∞}.
    pub fit_tol: f64,
    /// Newton iteration budget N_opt.
    pub max_iter: usize,
    /// Weight-adaptation budget N_σ, compared against the counter carried
    /// by the [`WeightState`].
    pub n_sigma: usize,
    /// Line-search halving budget.
    pub max_halvings: usize,
    /// MINRES relative residual tolerance.
    pub minres_tol: f64,
    /// MINRES iteration cap; 0 picks twice the system size.
    pub minres_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            fit_tol: 1e-5,
            max_iter: 100,
            n_sigma: 10,
            max_halvings: 30,
            minres_tol: 1e-8,
            minres_max_iter: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.grad_tol <= 0.0 || self.fit_tol <= 0.0 || self.minres_tol <= 0.0 {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// |σ|_{𝒮,∞} reached ε_σ.
    FitTolerance,
    /// ‖𝒥‖ fell to ε relative to the initial gradient.
    GradientTolerance,
    /// The weight counter n_σ used up its budget N_σ.
    AdaptationLimit,
    /// N_opt iterations were taken.
    IterationLimit,
    /// No acceptable step length was found.
    LineSearchFailure,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::FitTolerance => "fit-tolerance",
            Termination::GradientTolerance => "gradient-tolerance",
            Termination::AdaptationLimit => "adaptation-limit",
            Termination::IterationLimit => "iteration-limit",
            Termination::LineSearchFailure => "line-search-failure",
        }
    }
}

/// One accepted iterate. Row 0 is the initial state; later rows carry the
/// step that produced them together with the reference values their line
/// search compared against, so the acceptance rules can be re-audited
/// from the report alone.
#[derive(Debug, Clone)]
pub struct IterationRow {
    pub iter: usize,
    pub f_mu: f64,
    pub f_sigma: f64,
    /// |σ|_{𝒮,∞}; absent in quality-only runs.
    pub fit_error: Option<f64>,
    pub grad_norm: f64,
    pub min_det: f64,
    /// Accepted step length; 0 on the initial row.
    pub alpha: f64,
    /// Penalization weight used during this step.
    pub weight: f64,
    pub minres_iters: usize,
    /// F, ‖𝒥‖ and |σ|_{𝒮,∞} of the iterate the step started from.
    pub ref_f: f64,
    pub ref_grad_norm: f64,
    pub ref_fit_error: Option<f64>,
}

/// Full record of a solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub rows: Vec<IterationRow>,
    pub termination: Termination,
    /// min det A of the initial mesh; the line search floors every
    /// iterate at 0.001 times this value.
    pub initial_min_det: f64,
}

impl SolverReport {
    /// Newton iterations taken (the initial state is not one).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// |σ|_{𝒮,∞} at the final iterate, when fitting.
    pub fn final_fit_error(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.fit_error)
    }

    /// Re-checks every accepted iterate against the five step-acceptance
    /// rules using only recorded values.
    pub fn check_constraints(&self) -> Result<()> {
        for r in self.rows.iter().skip(1) {
            let fit_ok = match (r.fit_error, r.ref_fit_error) {
                (Some(e), Some(p)) => e < 1.2 * p,
                _ => true,
            };
            let ok = r.f_mu + r.f_sigma < 1.2 * r.ref_f
                && r.grad_norm < 1.2 * r.ref_grad_norm
                && r.min_det > 0.0
                && r.min_det > 1e-3 * self.initial_min_det
                && fit_ok;
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "iteration {} violates a line-search acceptance rule",
                    r.iter
                )));
            }
        }
        Ok(())
    }

    /// Stable CSV rendering, one row per accepted iterate.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("iter,f_mu,f_sigma,fit_error,grad_norm,min_det,alpha,w_sigma,minres_iters\n");
        for r in &self.rows {
            let fit = r.fit_error.map(|v| format!("{v:.10e}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{:.10e},{:.10e},{},{:.10e},{:.10e},{:.10e},{:.10e},{}\n",
                r.iter,
                r.f_mu,
                r.f_sigma,
                fit,
                r.grad_norm,
                r.min_det,
                r.alpha,
                r.weight,
                r.minres_iters
            ));
        }
        s
    }
}

/// The combined objective; `fit` is None for quality-only runs and
/// `fixed` masks the degrees of freedom of pinned nodes.
struct Objective<'a> {
    spec: &'a TargetSpec,
    metric: MetricId,
    fit: Option<(&'a LevelSetField, &'a NodeSet)>,
    fixed: Option<Vec<bool>>,
}

/// Component-major DOF mask for the pinned nodes, or None when every
/// node is free.
fn dof_mask(mesh: &HighOrderMesh, fixed: &NodeSet) -> Option<Vec<bool>> {
    if fixed.is_empty() {
        return None;
    }
    let nn = mesh.num_nodes();
    let mut mask = vec![false; mesh.dim() * nn];
    for i in fixed.iter() {
        for a in 0..mesh.dim() {
            mask[a * nn + i] = true;
        }
    }
    Some(mask)
}

/// Everything the loop needs to know about one iterate.
struct State {
    f_mu: f64,
    f_sigma: f64,
    grad: Vec<f64>,
    grad_norm: f64,
    fit_err: Option<f64>,
    min_det: f64,
}

impl State {
    fn f(&self) -> f64 {
        self.f_mu + self.f_sigma
    }
}

/// Softens recoverable evaluation failures during line-search trials:
/// tangled metrics and out-of-domain σ reject the step instead of
/// aborting the run.
fn guard<T>(r: Result<T>, trial: bool) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::MetricUndefined(_) | Error::OutOfDomain(..)) if trial => Ok(None),
        Err(e) => Err(e),
    }
}

impl Objective<'_> {
    fn evaluate(&self, mesh: &HighOrderMesh, w: f64, trial: bool) -> Result<Option<State>> {
        let min_det = mesh.min_det_a();
        if min_det <= 0.0 {
            if trial {
                return Ok(None);
            }
            return Err(Error::InvalidMesh(format!(
                "mesh is inverted (min det A = {min_det:.3e})"
            )));
        }
        let Some(f_mu) = guard(objective_mu(mesh, self.spec, self.metric), trial)? else {
            return Ok(None);
        };
        let Some(mut grad) = guard(grad_mu(mesh, self.spec, self.metric), trial)? else {
            return Ok(None);
        };
        let mut f_sigma = 0.0;
        let mut fit_err = None;
        if let Some((ls, set)) = self.fit {
            let Some(err) = guard(fit_error(mesh, ls, set), trial)? else {
                return Ok(None);
            };
            fit_err = Some(err);
            if w != 0.0 {
                let Some(fs) = guard(objective_sigma(mesh, ls, set, w), trial)? else {
                    return Ok(None);
                };
                f_sigma = fs;
                let Some(gs) = guard(grad_sigma(mesh, ls, set, w), trial)? else {
                    return Ok(None);
                };
                for (g, add) in grad.iter_mut().zip(&gs) {
                    *g += add;
                }
            }
        }
        if let Some(mask) = &self.fixed {
            for (g, dead) in grad.iter_mut().zip(mask) {
                if *dead {
                    *g = 0.0;
                }
            }
        }
        let grad_norm = norm_slice(&grad);
        Ok(Some(State { f_mu, f_sigma, grad, grad_norm, fit_err, min_det }))
    }

    fn evaluate_strict(&self, mesh: &HighOrderMesh, w: f64) -> Result<State> {
        Ok(self.evaluate(mesh, w, false)?.expect("strict evaluation yields a state"))
    }

    fn hessian(&self, mesh: &HighOrderMesh, w: f64) -> Result<CsrMatrix> {
        let h = hess_mu(mesh, self.spec, self.metric)?;
        let pen = match self.fit {
            Some((ls, set)) if w != 0.0 => hess_sigma(mesh, ls, set, w)?,
            _ => Vec::new(),
        };
        if pen.is_empty() && self.fixed.is_none() {
            return Ok(h);
        }
        let mut trip = Vec::with_capacity(h.nnz() + pen.len());
        for r in 0..h.n {
            for k in h.row_ptr[r]..h.row_ptr[r + 1] {
                trip.push((r, h.col_idx[k], h.values[k]));
            }
        }
        trip.extend(pen);
        if let Some(mask) = &self.fixed {
            trip.retain(|&(r, c, _)| !mask[r] && !mask[c]);
            for (d, dead) in mask.iter().enumerate() {
                if *dead {
                    trip.push((d, d, 1.0));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(h.n, &trip))
    }
}

fn drive(
    mesh: &mut HighOrderMesh,
    obj: &Objective,
    weight: &mut WeightState,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    cfg.validate()?;
    let min_det0 = mesh.min_det_a();
    if min_det0 <= 0.0 {
        return Err(Error::InvalidMesh(format!(
            "solver requires a non-inverted initial mesh (min det A = {min_det0:.3e})"
        )));
    }
    let fitting = obj.fit.is_some();
    let mut state = obj.evaluate_strict(mesh, weight.w_sigma)?;
    let gnorm0 = state.grad_norm;
    let mut rows = vec![IterationRow {
        iter: 0,
        f_mu: state.f_mu,
        f_sigma: state.f_sigma,
        fit_error: state.fit_err,
        grad_norm: state.grad_norm,
        min_det: state.min_det,
        alpha: 0.0,
        weight: weight.w_sigma,
        minres_iters: 0,
        ref_f: state.f(),
        ref_grad_norm: state.grad_norm,
        ref_fit_error: state.fit_err,
    }];

    let mut k = 0;
    let termination = loop {
        if fitting {
            if state.fit_err.unwrap_or(0.0) <= cfg.fit_tol {
                break Termination::FitTolerance;
            }
            if weight.n_sigma >= cfg.n_sigma {
                break Termination::AdaptationLimit;
            }
        }
        // Relative to the initial gradient, with an absolute floor so a
        // mesh that starts at the optimum terminates immediately.
        if state.grad_norm <= cfg.grad_tol * gnorm0.max(1.0) {
            break Termination::GradientTolerance;
        }
        if k >= cfg.max_iter {
            break Termination::IterationLimit;
        }

        let h = obj.hessian(mesh, weight.w_sigma)?;
        let cap = if cfg.minres_max_iter == 0 { 2 * h.n } else { cfg.minres_max_iter };
        let mr = minres_jacobi(&h, &state.grad, cfg.minres_tol, cap);
        let dir = if mr.breakdown {
            // Fall back to the preconditioned gradient so the iteration
            // structure survives an intractable linear system.
            let (d, _) = jacobi_diagonal(&h);
            state.grad.iter().zip(&d).map(|(g, di)| g / di).collect()
        } else {
            mr.x
        };

        let base = mesh.coords().to_vec();
        let crit = StepCriteria {
            f: state.f(),
            grad_norm: state.grad_norm,
            fit_error: state.fit_err.unwrap_or(f64::INFINITY),
            floor_det: 1e-3 * min_det0,
        };
        let mut cached: Option<State> = None;
        let search = backtrack(
            |alpha| {
                let c = mesh.coords_mut();
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci = base[i] - alpha * dir[i];
                }
                match obj.evaluate(mesh, weight.w_sigma, true)? {
                    Some(s) => {
                        let ev = StepEval {
                            f: s.f(),
                            grad_norm: s.grad_norm,
                            fit_error: s.fit_err.unwrap_or(f64::INFINITY),
                            min_det: s.min_det,
                        };
                        cached = Some(s);
                        Ok(Some(ev))
                    }
                    None => {
                        cached = None;
                        Ok(None)
                    }
                }
            },
            &crit,
            cfg.max_halvings,
        );
        let alpha = match search {
            Ok((alpha, _)) => alpha,
            Err(Error::LineSearchFailure { .. }) => {
                mesh.coords_mut().copy_from_slice(&base);
                break Termination::LineSearchFailure;
            }
            Err(other) => return Err(other),
        };
        let new_state = cached.expect("accepted step carries its evaluation");
        k += 1;
        rows.push(IterationRow {
            iter: k,
            f_mu: new_state.f_mu,
            f_sigma: new_state.f_sigma,
            fit_error: new_state.fit_err,
            grad_norm: new_state.grad_norm,
            min_det: new_state.min_det,
            alpha,
            weight: weight.w_sigma,
            minres_iters: mr.iterations,
            ref_f: crit.f,
            ref_grad_norm: crit.grad_norm,
            ref_fit_error: state.fit_err,
        });

        if fitting {
            let prev = state.fit_err.expect("fit runs track σ");
            let next = new_state.fit_err.expect("fit runs track σ");
            if weight.update(prev, next) {
                // The weight changed: recompute the reference objective
                // and gradient at the new iterate under the new weight.
                state = obj.evaluate_strict(mesh, weight.w_sigma)?;
            } else {
                state = new_state;
            }
        } else {
            state = new_state;
        }
    };

    Ok(SolverReport { rows, termination, initial_min_det: min_det0 })
}

/// Quality-only r-adaptivity: minimizes F_μ over the nodes not in `fixed`
/// until the relative gradient drops below ε or the budget runs out.
pub fn newton_quality(
    mesh: &mut HighOrderMesh,
    spec: &TargetSpec,
    metric: MetricId,
    fixed: &NodeSet,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    let obj = Objective { spec, metric, fit: None, fixed: dof_mask(mesh, fixed) };
    let mut weight = WeightState::fixed(1.0);
    drive(mesh, &obj, &mut weight, cfg)
}

/// Interface fitting: minimizes F_μ + F_σ over the node positions while
/// adapting w_σ whenever the interface error stalls. Nodes in `fixed`
/// never move; a node cannot be fitted and fixed at once.
pub fn newton_fit(
    mesh: &mut HighOrderMesh,
    spec: &TargetSpec,
    metric: MetricId,
    ls: &LevelSetField,
    set: &NodeSet,
    fixed: &NodeSet,
    weight: &mut WeightState,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    if set.is_empty() {
        return Err(Error::EmptyFitSet("newton_fit needs at least one fitted node".into()));
    }
    if let Some(id) = set.iter().find(|&i| fixed.contains(i)) {
        return Err(Error::InvalidArgument(format!(
            "node {id} is both fitted and fixed"
        )));
    }
    let obj = Objective { spec, metric, fit: Some((ls, set)), fixed: dof_mask(mesh, fixed) };
    drive(mesh, &obj, weight, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LevelSetField, PrimitiveTree};
    use crate::mesh::make_cartesian;
    use crate::refelem::Geom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jiggle_interior(mesh: &mut HighOrderMesh, amp: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mesh.num_nodes();
        for i in 0..n {
            let p = mesh.node(i);
            let interior = (0..2).all(|a| p[a] > 1e-9 && p[a] < 1.0 - 1e-9);
            let dx = rng.gen_range(-amp..amp);
            let dy = rng.gen_range(-amp..amp);
            if interior {
                mesh.coords_mut()[i] += dx;
                mesh.coords_mut()[n + i] += dy;
            }
        }
        assert!(mesh.min_det_a() > 0.0, "perturbation must keep the mesh valid");
    }

    fn vertical_line(c: f64) -> LevelSetField {
        LevelSetField::analytic(
            PrimitiveTree::Halfspace { point: [c, 0.0, 0.0], normal: [1.0, 0.0, 0.0] },
            2,
        )
    }

    #[test]
    fn ideal_mesh_stops_at_zero_iterations() {
        // A single unit cell matches the identity target exactly, so the
        // assembled gradient is zero in floating point.
        let mut mesh = make_cartesian(Geom::Quad, [1, 1, 1], 1).unwrap();
        let cfg = SolverConfig::default();
        let report =
            newton_quality(&mut mesh, &TargetSpec::identity(), MetricId::Mu2, &NodeSet::default(), &cfg)
                .unwrap();
        assert_eq!(report.iterations(), 0);
        assert_eq!(report.termination, Termination::GradientTolerance);
    }

    #[test]
    fn perturbed_mesh_recovers_quality() {
        // The shape+size metric has an isolated optimum (a lattice of unit
        // squares), unlike pure μ2 whose scale invariance makes −𝐱 an exact
        // solution of every Newton system.
        let metric = MetricId::mu80(0.5).unwrap();
        let mut mesh = make_cartesian(Geom::Quad, [2, 2, 1], 2).unwrap();
        jiggle_interior(&mut mesh, 0.03, 11);
        let f0 = objective_mu(&mesh, &TargetSpec::identity(), metric).unwrap();
        let cfg = SolverConfig { max_iter: 200, ..SolverConfig::default() };
        let report =
            newton_quality(&mut mesh, &TargetSpec::identity(), metric, &NodeSet::default(), &cfg)
                .unwrap();
        assert_eq!(report.termination, Termination::GradientTolerance);
        let last = report.rows.last().unwrap();
        assert!(last.f_mu < 1e-12 * f0);
        assert!(last.grad_norm <= 1e-10 * report.rows[0].grad_norm);
        assert!(last.min_det > 0.0);
        report.check_constraints().unwrap();
    }

    #[test]
    fn fit_pulls_interface_onto_the_line() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 1, 1], 2).unwrap();
        mesh.set_material(Some(vec![0, 1])).unwrap();
        let ls = vertical_line(0.55);
        let set = crate::fitting::select_fit_nodes(&mesh, &crate::fitting::FitMode::Interface)
            .unwrap();
        let mut weight = WeightState::adaptive(1.0);
        let cfg = SolverConfig { max_iter: 60, ..SolverConfig::default() };
        let report = newton_fit(
            &mut mesh,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &ls,
            &set,
            &NodeSet::default(),
            &mut weight,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.termination, Termination::FitTolerance);
        assert!(report.final_fit_error().unwrap() <= 1e-5);
        for s in set.iter() {
            assert!((mesh.node(s)[0] - 0.55).abs() <= 2e-5);
        }
        assert!(mesh.min_det_a() > 0.0);
        report.check_constraints().unwrap();
    }

    #[test]
    fn already_fitted_mesh_returns_immediately() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 1, 1], 2).unwrap();
        mesh.set_material(Some(vec![0, 1])).unwrap();
        let ls = vertical_line(0.5);
        let set = crate::fitting::select_fit_nodes(&mesh, &crate::fitting::FitMode::Interface)
            .unwrap();
        let mut weight = WeightState::adaptive(10.0);
        let report = newton_fit(
            &mut mesh,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &ls,
            &set,
            &NodeSet::default(),
            &mut weight,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(report.iterations(), 0);
        assert_eq!(report.termination, Termination::FitTolerance);
    }

    #[test]
    fn empty_fit_set_is_rejected() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 1, 1], 2).unwrap();
        let ls = vertical_line(0.5);
        let set = NodeSet::from_iter([]);
        let mut weight = WeightState::adaptive(1.0);
        let err = newton_fit(
            &mut mesh,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &ls,
            &set,
            &NodeSet::default(),
            &mut weight,
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyFitSet(_)));
    }

    #[test]
    fn inverted_initial_mesh_is_rejected() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 2, 1], 1).unwrap();
        for v in mesh.coords_mut().iter_mut().take(9) {
            *v = -*v;
        }
        let err = newton_quality(
            &mut mesh,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &NodeSet::default(),
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn zero_weight_fit_matches_quality_step() {
        // With w_σ = 0 and a σ too far away to trip the jump rule, the
        // first fit iterate coincides bitwise with the quality iterate.
        let cfg = SolverConfig { max_iter: 1, ..SolverConfig::default() };
        let mut quality = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        jiggle_interior(&mut quality, 0.03, 23);
        let mut fit = quality.clone();
        fit.set_material(Some(vec![0, 0, 0, 0, 1, 0, 0, 0, 0])).unwrap();

        newton_quality(&mut quality, &TargetSpec::identity(), MetricId::Mu2, &NodeSet::default(), &cfg)
            .unwrap();

        let ls = vertical_line(5.0);
        let set = crate::fitting::select_fit_nodes(&fit, &crate::fitting::FitMode::Interface)
            .unwrap();
        let mut weight = WeightState::fixed(f64::MIN_POSITIVE);
        weight.w_sigma = 0.0;
        newton_fit(
            &mut fit,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &ls,
            &set,
            &NodeSet::default(),
            &mut weight,
            &cfg,
        )
        .unwrap();

        assert_eq!(quality.coords(), fit.coords());
    }

    #[test]
    fn fixed_boundary_smoothing_restores_the_lattice() {
        // With the boundary pinned, μ2 with identity targets has a unique
        // zero at the uniform lattice, so the conformal looseness that a
        // fully free mesh exhibits is gone.
        let mut mesh = make_cartesian(Geom::Quad, [3, 3, 1], 2).unwrap();
        let before = mesh.coords().to_vec();
        jiggle_interior(&mut mesh, 0.04, 7);
        let f0 = objective_mu(&mesh, &TargetSpec::identity(), MetricId::Mu2).unwrap();
        let fixed = mesh.boundary_node_set();
        let cfg = SolverConfig { max_iter: 100, ..SolverConfig::default() };
        let report =
            newton_quality(&mut mesh, &TargetSpec::identity(), MetricId::Mu2, &fixed, &cfg)
                .unwrap();
        assert_eq!(report.termination, Termination::GradientTolerance);
        let last = report.rows.last().unwrap();
        assert!(last.f_mu < 1e-12 * f0);
        let n = mesh.num_nodes();
        for i in fixed.iter() {
            assert_eq!(mesh.coords()[i], before[i], "fixed node {i} moved in x");
            assert_eq!(mesh.coords()[n + i], before[n + i], "fixed node {i} moved in y");
        }
        report.check_constraints().unwrap();
    }

    #[test]
    fn fitted_node_cannot_be_fixed() {
        let mut mesh = make_cartesian(Geom::Quad, [2, 1, 1], 2).unwrap();
        mesh.set_material(Some(vec![0, 1])).unwrap();
        let ls = vertical_line(0.55);
        let set = crate::fitting::select_fit_nodes(&mesh, &crate::fitting::FitMode::Interface)
            .unwrap();
        let fixed = NodeSet::from_iter(set.iter().take(1));
        let mut weight = WeightState::adaptive(1.0);
        let err = newton_fit(
            &mut mesh,
            &TargetSpec::identity(),
            MetricId::Mu2,
            &ls,
            &set,
            &fixed,
            &mut weight,
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn reports_are_reproducible() {
        let make = || {
            let mut mesh = make_cartesian(Geom::Quad, [2, 1, 1], 2).unwrap();
            mesh.set_material(Some(vec![0, 1])).unwrap();
            let ls = vertical_line(0.55);
            let set =
                crate::fitting::select_fit_nodes(&mesh, &crate::fitting::FitMode::Interface)
                    .unwrap();
            let mut weight = WeightState::adaptive(1.0);
            let cfg = SolverConfig { max_iter: 40, ..SolverConfig::default() };
            newton_fit(
                &mut mesh,
                &TargetSpec::identity(),
                MetricId::Mu2,
                &ls,
                &set,
                &NodeSet::default(),
                &mut weight,
                &cfg,
            )
            .unwrap()
            .to_csv()
        };
        let a = make();
        assert_eq!(a, make());
        assert!(a.starts_with("iter,f_mu,f_sigma,fit_error,grad_norm,min_det,alpha,w_sigma,minres_iters\n"));
    }
}
