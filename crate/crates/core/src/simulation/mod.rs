//! Time loop: signals first, then the cell density, with runtime checks of
//! positivity, the discrete mass bound and the nonlocal zero-mean constraint
//! after every step.

mod blowup;
mod checkpoint;
mod preset;

pub use blowup::{classify_blowup, BlowUpClass, BlowUpCriterion, BlowUpVerdict};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use preset::{preset, preset_names, Gaussian, InitialData, MeshSpec, Preset};

use serde::{Deserialize, Serialize};

use crate::celldensity::{step_cell, CellSolverOptions, FallbackPolicy, POSITIVITY_TOL};
use crate::error::{Error, Result};
use crate::fespace::{CgField, DgField, FeOperators};
use crate::mesh::Mesh;
use crate::params::{ModelKind, ModelParams};
use crate::signals::{step_signal_local, step_signal_nonlocal, SignalParams, DEFAULT_SIGNAL_TOL, SIGNAL_NEGATIVITY_TOL};

/// Relative slack of the per-step mass inequality.
pub const MASS_BOUND_RTOL: f64 = 1e-10;
/// Relative tolerance of the nonlocal zero-mean check.
pub const ZERO_MEAN_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub step: usize,
    /// Always `step · Δt`.
    pub time: f64,
    pub u: DgField,
    pub v: CgField,
    pub w: CgField,
}

impl SimState {
    pub fn initial(u: DgField, v: CgField, w: CgField) -> Self {
        SimState {
            step: 0,
            time: 0.0,
            u,
            v,
            w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    /// `∫u^m + Δt λ ∫(u^m)^ρ` from the previous state; the mass itself on the first row.
    pub mass_bound_rhs: f64,
    /// Lumped means of the signals.
    pub mean_v: f64,
    pub mean_w: f64,
    pub fallback_used: bool,
    pub fp_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub signal_tol: f64,
    pub cell: CellSolverOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            signal_tol: DEFAULT_SIGNAL_TOL,
            cell: CellSolverOptions::default(),
        }
    }
}

/// Called with the initial state and after every completed step.
pub trait StepObserver {
    fn observe(&mut self, state: &SimState, row: &DiagnosticsRow) -> Result<()>;
}

impl<F: FnMut(&SimState, &DiagnosticsRow) -> Result<()>> StepObserver for F {
    fn observe(&mut self, state: &SimState, row: &DiagnosticsRow) -> Result<()> {
        self(state, row)
    }
}

pub struct NoObserver;

impl StepObserver for NoObserver {
    fn observe(&mut self, _: &SimState, _: &DiagnosticsRow) -> Result<()> {
        Ok(())
    }
}

pub struct Simulation {
    mesh: Mesh,
    ops: FeOperators,
    params: ModelParams,
    options: SolverOptions,
    signal_m_matrix: bool,
}

impl Simulation {
    pub fn new(mesh: Mesh, params: ModelParams, options: SolverOptions) -> Result<Self> {
        params.check()?;
        let ops = FeOperators::new(&mesh);
        let max_diag = ops.stiffness.diagonal().into_iter().fold(0.0, f64::max);
        let signal_m_matrix = ops.stiffness.has_nonpositive_off_diagonal(1e-13 * max_diag);
        Ok(Simulation {
            mesh,
            ops,
            params,
            options,
            signal_m_matrix,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn operators(&self) -> &FeOperators {
        &self.ops
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn diagnostics(&self, state: &SimState, mass_bound_rhs: Option<f64>, fallback_used: bool, fp_iterations: usize) -> DiagnosticsRow {
        let mass = state.u.integral(&self.mesh);
        let omega = self.mesh.domain_measure();
        DiagnosticsRow {
            t: state.time,
            mass,
            min_u: state.u.min(),
            max_u: state.u.max(),
            mass_bound_rhs: mass_bound_rhs.unwrap_or(mass),
            mean_v: state.v.lumped_integral(&self.ops.lumped) / omega,
            mean_w: state.w.lumped_integral(&self.ops.lumped) / omega,
            fallback_used,
            fp_iterations,
        }
    }

    /// `∫u + Δt λ ∫u^ρ`, the bound on the next step's mass.
    pub fn mass_bound(&self, u: &DgField) -> f64 {
        let p = &self.params;
        let growth: f64 = u
            .iter()
            .zip(self.mesh.element_measures())
            .map(|(&uk, &vol)| vol * uk.max(0.0).powf(p.rho))
            .sum();
        u.integral(&self.mesh) + p.dt * p.lambda * growth
    }

    /// One step `m → m+1`, returning the new state and its diagnostics.
    pub fn step(&self, state: &SimState) -> Result<(SimState, DiagnosticsRow)> {
        let p = &self.params;
        let sp = SignalParams::from_model(p);
        let tol = self.options.signal_tol;
        let (v, w) = match p.model {
            ModelKind::Local => (
                step_signal_local(&self.mesh, &self.ops, &state.u, &state.v, &sp.attractant(), sp.tau, p.dt, tol)?,
                step_signal_local(&self.mesh, &self.ops, &state.u, &state.w, &sp.repellent(), sp.tau, p.dt, tol)?,
            ),
            ModelKind::Nonlocal => (
                step_signal_nonlocal(&self.mesh, &self.ops, &state.u, &sp.attractant(), tol)?,
                step_signal_nonlocal(&self.mesh, &self.ops, &state.u, &sp.repellent(), tol)?,
            ),
        };
        let outcome = step_cell(&self.mesh, &self.ops, &state.u, &v, &w, p, p.dt, &self.options.cell)?;
        let step = state.step + 1;
        let next = SimState {
            step,
            time: step as f64 * p.dt,
            u: outcome.u,
            v,
            w,
        };
        let bound = self.mass_bound(&state.u);
        let row = self.diagnostics(&next, Some(bound), outcome.fallback_used, outcome.fp_iterations);
        self.check_invariants(&next, &row, outcome.fallback_used)?;
        Ok((next, row))
    }

    fn check_invariants(&self, state: &SimState, row: &DiagnosticsRow, truncated: bool) -> Result<()> {
        let cell = &self.options.cell;
        let floor = match cell.fallback {
            FallbackPolicy::LinearOnly => f64::NEG_INFINITY,
            FallbackPolicy::Truncated => -POSITIVITY_TOL,
            FallbackPolicy::Auto if truncated => -POSITIVITY_TOL,
            FallbackPolicy::Auto => -cell.fallback_trigger.max(POSITIVITY_TOL),
        };
        if row.min_u < floor {
            return Err(Error::InvariantViolation(format!("min u = {:e} at step {}", row.min_u, state.step)));
        }
        let slack = MASS_BOUND_RTOL * row.mass_bound_rhs.abs().max(f64::MIN_POSITIVE);
        if row.mass > row.mass_bound_rhs + slack {
            return Err(Error::InvariantViolation(format!(
                "mass {:e} exceeds bound {:e} at step {}",
                row.mass, row.mass_bound_rhs, state.step
            )));
        }
        match self.params.model {
            ModelKind::Nonlocal => {
                for (name, mean, s) in [("v", row.mean_v, &state.v), ("w", row.mean_w, &state.w)] {
                    if mean.abs() > ZERO_MEAN_RTOL * s.max_abs() {
                        return Err(Error::InvariantViolation(format!(
                            "lumped mean of {name} is {mean:e} at step {}",
                            state.step
                        )));
                    }
                }
            }
            ModelKind::Local if self.signal_m_matrix => {
                for (name, s) in [("v", &state.v), ("w", &state.w)] {
                    let min = s.min();
                    if min < -SIGNAL_NEGATIVITY_TOL {
                        return Err(Error::InvariantViolation(format!(
                            "min {name} = {min:e} at step {}",
                            state.step
                        )));
                    }
                }
            }
            ModelKind::Local => {}
        }
        Ok(())
    }

    /// Runs `steps` steps from `state`. The diagnostics start with a row for
    /// `state` itself, so a run of N steps yields N+1 rows. A failing step
    /// aborts with the last good state attached.
    pub fn run_steps(
        &self,
        state: SimState,
        steps: usize,
        observer: &mut dyn StepObserver,
    ) -> Result<(SimState, Vec<DiagnosticsRow>)> {
        state.u.check(&self.mesh)?;
        state.v.check(&self.mesh)?;
        state.w.check(&self.mesh)?;
        if state.u.min() < 0.0 {
            return Err(Error::InvariantViolation(format!("initial u has minimum {:e}", state.u.min())));
        }
        let mut rows = Vec::with_capacity(steps + 1);
        let first = self.diagnostics(&state, None, false, 0);
        observer.observe(&state, &first)?;
        rows.push(first);
        let mut state = state;
        for _ in 0..steps {
            let (next, row) = self.step(&state).map_err(|e| Error::StepFailed {
                step: state.step + 1,
                source: Box::new(e),
                state: Box::new(state.clone()),
            })?;
            observer.observe(&next, &row)?;
            rows.push(row);
            state = next;
        }
        Ok((state, rows))
    }

    /// Runs from `state` up to the final time.
    pub fn run(&self, state: SimState, observer: &mut dyn StepObserver) -> Result<(SimState, Vec<DiagnosticsRow>)> {
        let total = self.params.num_steps()?;
        let remaining = total.checked_sub(state.step).ok_or_else(|| {
            Error::InvariantViolation(format!("state is at step {} beyond the final step {total}", state.step))
        })?;
        self.run_steps(state, remaining, observer)
    }
}
