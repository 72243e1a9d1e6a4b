//! One-step solvers for the chemical signals.
//!
//! Local model, with lumped mass `D`, stiffness `K` and backward Euler:
//!
//! ```text
//! ((τ/Δt + decay)·D + K) s = (τ/Δt)·D·s_prev + D·f(Π₁ʰ u_prev)
//! ```
//!
//! The source is evaluated at the vertices, so on meshes whose stiffness
//! matrix has nonpositive off-diagonals the system is an M-matrix with a
//! nonnegative right-hand side and the signal stays nonnegative.
//!
//! Nonlocal model: `K s = D·(f − mean f)` with zero lumped mean.

use crate::error::{Error, Result};
use crate::fespace::{project_pih1, CgField, DgField, FeOperators, Projectable};
use crate::linalg::{gauss_seidel_nonnegative, solve_mean_zero_poisson, solve_spd_from, SolveReport};
use crate::mesh::Mesh;
use crate::params::ModelParams;

pub const DEFAULT_SIGNAL_TOL: f64 = 1e-10;
/// Local signals below this value are an invariant violation on M-matrix meshes.
pub const SIGNAL_NEGATIVITY_TOL: f64 = 1e-12;

/// Decay rate and source exponent of one signal equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalComponent {
    pub decay: f64,
    pub exponent: f64,
    /// Source shift η: `f(s) = (s + η)^exponent`.
    pub shift: f64,
}

impl SignalComponent {
    pub fn source(&self, s: f64) -> f64 {
        (s.max(0.0) + self.shift).powf(self.exponent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalParams {
    pub tau: u8,
    pub a: f64,
    pub d_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl SignalParams {
    pub fn from_model(p: &ModelParams) -> Self {
        SignalParams {
            tau: p.effective_tau(),
            a: p.a,
            d_decay: p.d_decay,
            alpha: p.alpha,
            beta: p.beta,
            eta: p.eta,
        }
    }

    /// The attractant `v`: decay `a`, source `f₁`.
    pub fn attractant(&self) -> SignalComponent {
        SignalComponent {
            decay: self.a,
            exponent: self.alpha,
            shift: self.eta,
        }
    }

    /// The repellent `w`: decay `d_decay`, source `f₂`.
    pub fn repellent(&self) -> SignalComponent {
        SignalComponent {
            decay: self.d_decay,
            exponent: self.beta,
            shift: self.eta,
        }
    }
}

/// Vertex values `f(Π₁ʰ u)`.
pub fn nodal_source(mesh: &Mesh, ops: &FeOperators, u: &DgField, component: &SignalComponent) -> Result<Vec<f64>> {
    let pu = project_pih1(mesh, ops, &Projectable::P0(u))?;
    Ok(pu.iter().map(|&s| component.source(s)).collect())
}

/// Local-model step with a prescribed nodal source density `g` (the lumped
/// load is `D·g`). Used directly by manufactured-solution checks.
pub fn solve_local_signal(
    mesh: &Mesh,
    ops: &FeOperators,
    source: &[f64],
    s_prev: &CgField,
    decay: f64,
    tau: u8,
    dt: f64,
    tol: f64,
) -> Result<(CgField, SolveReport)> {
    s_prev.check(mesh)?;
    if source.len() != mesh.num_vertices() {
        return Err(Error::LengthMismatch {
            what: "nodal source",
            expected: mesh.num_vertices(),
            found: source.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let time_coeff = if tau == 1 { 1.0 / dt } else { 0.0 };
    if time_coeff + decay <= 0.0 {
        return Err(Error::param("decay", "the elliptic signal equation needs a positive decay rate"));
    }
    let d = &ops.lumped;
    let shift: Vec<f64> = d.iter().map(|di| (time_coeff + decay) * di).collect();
    let system = ops.stiffness.add_diagonal(&shift);
    let rhs: Vec<f64> = (0..d.len())
        .map(|i| time_coeff * d[i] * s_prev[i] + d[i] * source[i])
        .collect();

    // warm start from the previous signal (or zero for the elliptic case)
    let mut s = if tau == 1 { s_prev.0.clone() } else { vec![0.0; d.len()] };
    let max_iter = 10 * d.len().max(10);
    let mut report = solve_spd_from(&system, &rhs, &mut s, tol, max_iter);
    report.into_result()?;

    let max_diag = system.diagonal().into_iter().fold(0.0, f64::max);
    let m_matrix = system.has_nonpositive_off_diagonal(1e-13 * max_diag);
    let rhs_nonnegative = rhs.iter().all(|&r| r >= 0.0);
    if m_matrix && rhs_nonnegative {
        if s.iter().any(|&v| v < 0.0) {
            // Krylov round-off near zero; Gauss–Seidel from the positive
            // part converges to the same solution without leaving the cone.
            report = gauss_seidel_nonnegative(&system, &rhs, &mut s, tol, 10 * max_iter);
            report.into_result()?;
        }
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -SIGNAL_NEGATIVITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "local signal minimum {min:e} on an M-matrix system"
            )));
        }
    } else if !m_matrix {
        log::warn!("signal system is not an M-matrix (obtuse mesh?); nonnegativity is not guaranteed");
    }
    Ok((CgField(s), report))
}

/// One backward-Euler (τ=1) or elliptic (τ=0) step of a local signal.
pub fn step_signal_local(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    s_prev: &CgField,
    component: &SignalComponent,
    tau: u8,
    dt: f64,
    tol: f64,
) -> Result<CgField> {
    u_prev.check(mesh)?;
    let g = nodal_source(mesh, ops, u_prev, component)?;
    solve_local_signal(mesh, ops, &g, s_prev, component.decay, tau, dt, tol).map(|(s, _)| s)
}

/// Mean-zero Poisson solve `K s = D·(g − ḡ)`, with `ḡ` the lumped mean of `g`.
pub fn solve_nonlocal_signal(mesh: &Mesh, ops: &FeOperators, source: &[f64], tol: f64) -> Result<(CgField, SolveReport)> {
    if source.len() != mesh.num_vertices() {
        return Err(Error::LengthMismatch {
            what: "nodal source",
            expected: mesh.num_vertices(),
            found: source.len(),
        });
    }
    let d = &ops.lumped;
    let omega: f64 = d.iter().sum();
    let mean = source.iter().zip(d).map(|(g, di)| g * di).sum::<f64>() / omega;
    let mut rhs: Vec<f64> = source.iter().zip(d).map(|(g, di)| di * (g - mean)).collect();
    // the sum vanishes analytically; drop the cancellation error so nearly
    // constant sources do not read as incompatible
    let drift = rhs.iter().sum::<f64>() / rhs.len() as f64;
    rhs.iter_mut().for_each(|r| *r -= drift);
    let max_iter = 10 * d.len().max(10);
    let (s, report) = solve_mean_zero_poisson(&ops.stiffness, &rhs, d, tol, max_iter, None)?;
    report.into_result()?;
    Ok((CgField(s), report))
}

/// Nonlocal-model signal from the current cell density.
pub fn step_signal_nonlocal(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    component: &SignalComponent,
    tol: f64,
) -> Result<CgField> {
    u_prev.check(mesh)?;
    let g = nodal_source(mesh, ops, u_prev, component)?;
    solve_nonlocal_signal(mesh, ops, &g, tol).map(|(s, _)| s)
}
