//! Adaptive penalization weight for the fitting term.
//!
//! The weight w_σ starts small so early Newton steps can untangle and
//! smooth the mesh, then grows whenever the interface error max|σ| stalls:
//! a relative drop below ε_Δσ multiplies w_σ by α_σ. A counter n_σ tracks
//! consecutive stalled iterations; once it reaches its limit N_σ the solver
//! stops, since repeated adaptation without progress means the mesh
//! topology cannot track the interface any closer.

/// Which iterations the adaptation counter n_σ counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterMode {
    /// Count Newton iterations since the last weight change, so the run
    /// stops after N_σ steps in a row with enough progress. This mirrors
    /// a published bookkeeping variant; it halts exactly when the error
    /// is improving steadily, so it is not the default.
    ResetOnAdapt,
    /// Count consecutive weight adaptations; an iteration with enough
    /// progress resets the counter. The run stops only after N_σ stalls
    /// in a row, the intended "topology cannot do better" signal.
    CountAdaptations,
}

/// State of the penalization weight across Newton iterations.
#[derive(Debug, Clone)]
pub struct WeightState {
    /// Current penalization weight w_σ.
    pub w_sigma: f64,
    /// Growth factor α_σ applied when the interface error stalls.
    pub alpha_sigma: f64,
    /// Relative-progress threshold ε_Δσ below which a step counts as
    /// stalled.
    pub eps_delta_sigma: f64,
    /// Adaptation counter n_σ.
    pub n_sigma: usize,
    /// Budget N_σ; the weight loop stops once n_σ reaches it.
    pub n_limit: usize,
    mode: CounterMode,
    adaptive: bool,
}

impl WeightState {
    /// Adaptive weight starting from `w0` with the default schedule
    /// (α_σ = 10, ε_Δσ = 10⁻³, N_σ = 10, counting consecutive stalls).
    pub fn adaptive(w0: f64) -> Self {
        assert!(w0 > 0.0, "initial weight must be positive");
        WeightState {
            w_sigma: w0,
            alpha_sigma: 10.0,
            eps_delta_sigma: 1e-3,
            n_sigma: 0,
            n_limit: 10,
            mode: CounterMode::CountAdaptations,
            adaptive: true,
        }
    }

    /// Fixed weight `w0`; [`update`](Self::update) never changes it.
    pub fn fixed(w0: f64) -> Self {
        let mut w = Self::adaptive(w0);
        w.adaptive = false;
        w
    }

    /// Overrides the counter semantics.
    pub fn with_mode(mut self, mode: CounterMode) -> Self {
        self.mode = mode;
        self
    }

    /// Whether the weight adapts at all.
    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    /// Advances the schedule after one Newton iteration that moved the
    /// interface error from `err_prev` to `err_next`. Returns true when
    /// the weight was increased. Progress is measured relative to the new
    /// error, (prev − next) / next, so a drop to zero always counts as
    /// sufficient.
    pub fn update(&mut self, err_prev: f64, err_next: f64) -> bool {
        if !self.adaptive {
            return false;
        }
        let rel = if err_next > 0.0 { (err_prev - err_next) / err_next } else { f64::INFINITY };
        let stalled = rel < self.eps_delta_sigma;
        if stalled {
            self.w_sigma *= self.alpha_sigma;
        }
        match self.mode {
            CounterMode::ResetOnAdapt => {
                if stalled {
                    self.n_sigma = 0;
                } else {
                    self.n_sigma += 1;
                }
            }
            CounterMode::CountAdaptations => {
                if stalled {
                    self.n_sigma += 1;
                } else {
                    self.n_sigma = 0;
                }
            }
        }
        stalled
    }

    /// Whether the adaptation budget N_σ is used up.
    pub fn exhausted(&self) -> bool {
        self.n_sigma >= self.n_limit
    }
}
