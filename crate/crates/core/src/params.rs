use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Parabolic (τ=1) or elliptic (τ=0) signal equations with linear decay.
    Local,
    /// Elliptic mean-zero signal deviations.
    Nonlocal,
}

/// Every constant of the local and nonlocal models plus the time grid.
///
/// Sources are `f₁(s) = (s + η)^α` and `f₂(s) = (s + η)^β`; `η = 0` gives the
/// pure power laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: ModelKind,
    pub tau: u8,
    pub chi: f64,
    pub xi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub rho: f64,
    pub k: f64,
    pub gamma: f64,
    /// Decay rate of the attractant `v`.
    pub a: f64,
    /// Decay rate of the repellent `w`.
    pub d_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Source shift η ≥ 0.
    pub eta: f64,
    /// Regularisation of `log(u + ε)`.
    pub eps: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for ModelParams {
    /// All constants 1 except `k = 1.1`; ε = 1e-10, Δt = 1e-5, T = 3e-3.
    fn default() -> Self {
        ModelParams {
            model: ModelKind::Local,
            tau: 1,
            chi: 1.0,
            xi: 1.0,
            lambda: 1.0,
            mu: 1.0,
            c: 1.0,
            n1: 1.0,
            n2: 1.0,
            n3: 1.0,
            rho: 1.0,
            k: 1.1,
            gamma: 1.0,
            a: 1.0,
            d_decay: 1.0,
            alpha: 1.0,
            beta: 1.0,
            eta: 0.0,
            eps: 1e-10,
            t_final: 3e-3,
            dt: 1e-5,
        }
    }
}

impl ModelParams {
    /// Hard range checks. Unlike [`crate::celldensity::validate_params`],
    /// failures here make the run meaningless and are errors.
    pub fn check(&self) -> Result<()> {
        let finite = [
            ("chi", self.chi),
            ("xi", self.xi),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("c", self.c),
            ("n1", self.n1),
            ("n2", self.n2),
            ("n3", self.n3),
            ("rho", self.rho),
            ("k", self.k),
            ("gamma", self.gamma),
            ("a", self.a),
            ("d_decay", self.d_decay),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("eps", self.eps),
            ("t_final", self.t_final),
            ("dt", self.dt),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.tau > 1 {
            return Err(Error::param("tau", "must be 0 or 1"));
        }
        for (name, v) in [
            ("chi", self.chi),
            ("xi", self.xi),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("c", self.c),
            ("a", self.a),
            ("d_decay", self.d_decay),
            ("eta", self.eta),
            ("t_final", self.t_final),
        ] {
            if v < 0.0 {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("rho", self.rho), ("k", self.k), ("gamma", self.gamma)] {
            if v < 1.0 {
                return Err(Error::param(name, format!("must be >= 1, got {v}")));
            }
        }
        if self.gamma > 2.0 {
            return Err(Error::param("gamma", format!("must lie in [1, 2], got {}", self.gamma)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("eps", self.eps), ("dt", self.dt)] {
            if v <= 0.0 {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if self.model == ModelKind::Local && self.effective_tau() == 0 && (self.a == 0.0 || self.d_decay == 0.0) {
            return Err(Error::param("a", "the elliptic local model needs positive decay rates a and d_decay"));
        }
        self.num_steps()?;
        Ok(())
    }

    /// τ used by the signal equations: the nonlocal model is always elliptic.
    pub fn effective_tau(&self) -> u8 {
        match self.model {
            ModelKind::Local => self.tau,
            ModelKind::Nonlocal => 0,
        }
    }

    /// `N = T/Δt`, which must be an integer up to rounding.
    pub fn num_steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::param(
                "t_final",
                format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt),
            ));
        }
        Ok(n as usize)
    }

    pub fn source_v(&self, s: f64) -> f64 {
        (s.max(0.0) + self.eta).powf(self.alpha)
    }

    pub fn source_w(&self, s: f64) -> f64 {
        (s.max(0.0) + self.eta).powf(self.beta)
    }
}
