//! Cell-density step: upwind bilinear form, the linear implicit–explicit
//! scheme, and its truncated variant solved by fixed-point iteration.
//!
//! With `u ∈ P0`, the upwind form is a sum over interior facets
//! `e = K ∩ L` (normal `n_e` from K to L):
//!
//! ```text
//! a_upw(β; u, ū) = Σ_e |e| [ ({β}·n_e)⊕ u_K − ({β}·n_e)⊖ u_L ] (ū_K − ū_L)
//! ```
//!
//! where `{β} = (β_K + β_L)/2`. Boundary facets carry no flux. As a matrix
//! (rows = test element), every facet contributes `+q⊕` at (K,K), `−q⊖` at
//! (K,L), `−q⊕` at (L,K) and `+q⊖` at (L,L), each scaled by `|e|`: off-diagonal
//! entries are nonpositive and every column sums to zero.
//!
//! The step matrix `diag(|K|/Δt) + Σ A_upw(β_i) + R` is therefore a
//! column-diagonally-dominant Z-matrix.

mod validate;

pub use validate::{condgamma_threshold, mass_ceiling, validate_params, ConditionReport, ParamValidation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::{element_gradients, project_pi1, reg_log, CgField, DgField, ElementVectors, FeOperators, Projectable};
use crate::linalg::{
    gauss_seidel_nonnegative, solve_banded_direct, solve_general_from, CsrMatrix, SolveReport, TripletBuilder,
};
use crate::mesh::Mesh;
use crate::params::ModelParams;

/// Positive part `max(v, 0)`.
pub fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// Negative part `−min(v, 0)`, so that `v = pos(v) − neg(v)`.
pub fn neg(v: f64) -> f64 {
    (-v).max(0.0)
}

fn facet_flux(beta: &ElementVectors, k: usize, l: usize, normal: &[f64; 3]) -> f64 {
    let (bk, bl) = (beta[k], beta[l]);
    0.5 * ((bk[0] + bl[0]) * normal[0] + (bk[1] + bl[1]) * normal[1] + (bk[2] + bl[2]) * normal[2])
}

fn push_upwind(builder: &mut TripletBuilder, mesh: &Mesh, beta: &ElementVectors) {
    for e in mesh.interior_facets() {
        let q = facet_flux(beta, e.inner, e.outer, &e.normal);
        let (qp, qm) = (e.measure * pos(q), e.measure * neg(q));
        let (k, l) = (e.inner, e.outer);
        builder.push(k, k, qp);
        builder.push(k, l, -qm);
        builder.push(l, k, -qp);
        builder.push(l, l, qm);
    }
}

/// Matrix of `a_upw(β; ·, ·)` acting on P0 unknowns.
pub fn assemble_upwind(mesh: &Mesh, beta: &ElementVectors) -> Result<CsrMatrix> {
    check_vectors(mesh, beta)?;
    let ne = mesh.num_elements();
    let mut b = TripletBuilder::with_capacity(ne, ne, 4 * mesh.interior_facets().len());
    push_upwind(&mut b, mesh, beta);
    Ok(b.build())
}

/// `Σ_i A_upw(β_i)`, each velocity upwinded separately.
pub fn assemble_upwind_sum(mesh: &Mesh, betas: &[&ElementVectors]) -> Result<CsrMatrix> {
    let ne = mesh.num_elements();
    let mut b = TripletBuilder::with_capacity(ne, ne, 4 * betas.len() * mesh.interior_facets().len());
    for beta in betas {
        check_vectors(mesh, beta)?;
        push_upwind(&mut b, mesh, beta);
    }
    Ok(b.build())
}

fn check_vectors(mesh: &Mesh, beta: &ElementVectors) -> Result<()> {
    if beta.len() != mesh.num_elements() {
        return Err(Error::LengthMismatch {
            what: "upwind velocity",
            expected: mesh.num_elements(),
            found: beta.len(),
        });
    }
    if beta.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvariantViolation("non-finite upwind velocity".into()));
    }
    Ok(())
}

/// The three transport velocities of one step and the gradient they share.
#[derive(Clone, Debug)]
pub struct Velocities {
    /// `−(u+1)^{n₁−1} ∇Π₁ log(u + ε)`
    pub diffusion: ElementVectors,
    /// `χ (u+1)^{n₂−1} ∇v`
    pub attraction: ElementVectors,
    /// `−ξ (u+1)^{n₃−1} ∇w`
    pub repulsion: ElementVectors,
    /// `∇Π₁ log(u + ε)`, reused by the damping term.
    pub log_gradient: ElementVectors,
}

fn scaled(u: &DgField, exponent: f64, factor: f64, grad: &ElementVectors) -> ElementVectors {
    ElementVectors(
        u.iter()
            .zip(grad.iter())
            .map(|(&uk, g)| {
                let coeff = factor * (pos(uk) + 1.0).powf(exponent - 1.0);
                [coeff * g[0], coeff * g[1], coeff * g[2]]
            })
            .collect(),
    )
}

pub fn build_velocities(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    v_next: &CgField,
    w_next: &CgField,
    params: &ModelParams,
) -> Result<Velocities> {
    u_prev.check(mesh)?;
    let log_u = reg_log(u_prev, params.eps)?;
    let projected = project_pi1(mesh, ops, &Projectable::P0(&log_u))?;
    let log_gradient = element_gradients(mesh, &projected)?;
    let grad_v = element_gradients(mesh, v_next)?;
    let grad_w = element_gradients(mesh, w_next)?;
    Ok(Velocities {
        diffusion: scaled(u_prev, params.n1, -1.0, &log_gradient),
        attraction: scaled(u_prev, params.n2, params.chi, &grad_v),
        repulsion: scaled(u_prev, params.n3, -params.xi, &grad_w),
        log_gradient,
    })
}

/// Pieces of the cell-density system
/// `(diag(mass)/Δt + upwind + diag(reaction)) u = rhs`.
#[derive(Clone, Debug)]
pub struct CellStepMatrices {
    pub upwind: CsrMatrix,
    /// `|K| (μ u_K^{k−1} + c u_K^{γ−1} |∇Π₁ log(u+ε)|_K^γ)`
    pub reaction: Vec<f64>,
    /// `|K|`
    pub mass: Vec<f64>,
    /// `|K| (u_K/Δt + λ u_K^ρ)`
    pub rhs: Vec<f64>,
    pub dt: f64,
}

impl CellStepMatrices {
    pub fn system(&self) -> CsrMatrix {
        let diag: Vec<f64> = self
            .mass
            .iter()
            .zip(&self.reaction)
            .map(|(m, r)| m / self.dt + r)
            .collect();
        self.upwind.add_diagonal(&diag)
    }

    /// System of the truncated scheme linearised at a sign pattern: columns
    /// of inactive elements (where the previous iterate is ≤ 0) drop their
    /// transport and reaction entries, since those act on `u⊕ = 0`.
    pub fn masked_system(&self, active: &[bool]) -> CsrMatrix {
        let n = self.mass.len();
        let mut b = TripletBuilder::with_capacity(n, n, self.upwind.nnz() + n);
        for i in 0..n {
            for (j, v) in self.upwind.row(i) {
                if active[j] {
                    b.push(i, j, v);
                }
            }
            let r = if active[i] { self.reaction[i] } else { 0.0 };
            b.push(i, i, self.mass[i] / self.dt + r);
        }
        b.build()
    }
}

/// Power with the convention `0⁰ = 1`, applied to the positive part.
fn power(u: f64, e: f64) -> f64 {
    pos(u).powf(e)
}

pub fn assemble_cell_step(
    mesh: &Mesh,
    velocities: &Velocities,
    u_prev: &DgField,
    params: &ModelParams,
    dt: f64,
) -> Result<CellStepMatrices> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let mut betas: Vec<&ElementVectors> = vec![&velocities.diffusion];
    if params.chi != 0.0 {
        betas.push(&velocities.attraction);
    }
    if params.xi != 0.0 {
        betas.push(&velocities.repulsion);
    }
    let upwind = assemble_upwind_sum(mesh, &betas)?;
    let measures = mesh.element_measures();
    let mut reaction = Vec::with_capacity(measures.len());
    let mut rhs = Vec::with_capacity(measures.len());
    for (k, (&uk, &vol)) in u_prev.iter().zip(measures).enumerate() {
        let g = velocities.log_gradient[k];
        let grad_norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let mut r = 0.0;
        if params.mu != 0.0 {
            r += params.mu * power(uk, params.k - 1.0);
        }
        if params.c != 0.0 {
            r += params.c * power(uk, params.gamma - 1.0) * grad_norm.powf(params.gamma);
        }
        reaction.push(vol * r);
        let growth = if params.lambda != 0.0 {
            params.lambda * power(uk, params.rho)
        } else {
            0.0
        };
        rhs.push(vol * (uk / dt + growth));
    }
    Ok(CellStepMatrices {
        upwind,
        reaction,
        mass: measures.to_vec(),
        rhs,
        dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Linear scheme, falling back to the truncated one on negative output.
    Auto,
    /// Always solve the truncated scheme.
    Truncated,
    /// Linear scheme only; negative values are reported, never corrected.
    LinearOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSolverOptions {
    /// Relative residual tolerance for each linear solve.
    pub tol: f64,
    pub max_iter_factor: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub fallback: FallbackPolicy,
    /// The linear result triggers the fallback when its minimum is below `-trigger`.
    pub fallback_trigger: f64,
}

impl Default for CellSolverOptions {
    fn default() -> Self {
        CellSolverOptions {
            tol: DEFAULT_CELL_TOL,
            max_iter_factor: 10,
            fp_tol: 1e-10,
            fp_max_iter: 200,
            fallback: FallbackPolicy::Auto,
            fallback_trigger: 1e-10,
        }
    }
}

pub const DEFAULT_CELL_TOL: f64 = 1e-13;
/// Truncated-scheme output below this is an invariant violation.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Solves a Z-matrix system with nonnegative right-hand side: BiCGStab from
/// `x`, then nonnegative Gauss–Seidel if round-off left negative entries.
/// When BiCGStab fails (extreme scaling late in a collapse) the system is
/// solved directly; the matrix is column diagonally dominant, so elimination
/// without pivoting is stable.
fn solve_z_system(a: &CsrMatrix, rhs: &[f64], x: &mut [f64], opts: &CellSolverOptions) -> Result<SolveReport> {
    let max_iter = opts.max_iter_factor * rhs.len().max(10);
    let mut report = solve_general_from(a, rhs, x, opts.tol, max_iter);
    if !report.converged {
        log::debug!("BiCGStab failed ({report}); solving directly");
        let (direct, direct_report) = solve_banded_direct(a, rhs, opts.tol);
        if direct_report.converged {
            x.copy_from_slice(&direct);
        }
        report = direct_report;
    }
    let report = report.into_result()?;
    if x.iter().any(|&v| v < 0.0) && rhs.iter().all(|&r| r >= 0.0) {
        return gauss_seidel_nonnegative(a, rhs, x, opts.tol, 100 * max_iter).into_result();
    }
    Ok(report)
}

/// One step of the linear scheme. The result is returned as solved.
pub fn step_cell_linear_with(
    step: &CellStepMatrices,
    u_prev: &DgField,
    opts: &CellSolverOptions,
) -> Result<(DgField, SolveReport)> {
    let system = step.system();
    let mut x = u_prev.0.clone();
    let report = solve_z_system(&system, &step.rhs, &mut x, opts)?;
    Ok((DgField(x), report))
}

/// Fixed-point iteration for the truncated scheme. Each iterate solves the
/// system with transport and reaction acting on the positive part of the
/// unknown, linearised at the sign pattern of the previous iterate
/// (`û⁰ = u_prev`). A fixed point solves the truncated scheme exactly.
/// Returns the solution and the number of linear solves.
pub fn step_cell_truncated_with(
    step: &CellStepMatrices,
    u_prev: &DgField,
    opts: &CellSolverOptions,
) -> Result<(DgField, usize)> {
    let mut current = u_prev.0.clone();
    let mut last_update = f64::INFINITY;
    for iteration in 1..=opts.fp_max_iter {
        let active: Vec<bool> = current.iter().map(|&v| v > 0.0).collect();
        let system = step.masked_system(&active);
        let mut next = current.iter().map(|&v| pos(v)).collect::<Vec<_>>();
        solve_z_system(&system, &step.rhs, &mut next, opts)?;
        let scale = current.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        last_update = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        if last_update <= opts.fp_tol * (1.0 + scale) {
            let min = current.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -POSITIVITY_TOL {
                return Err(Error::InvariantViolation(format!(
                    "truncated scheme produced minimum {min:e}"
                )));
            }
            return Ok((DgField(current), iteration));
        }
    }
    Err(Error::FixedPointNotConverged {
        iterations: opts.fp_max_iter,
        last_update,
        last_iterate: current,
    })
}

fn assemble_for(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    v_next: &CgField,
    w_next: &CgField,
    params: &ModelParams,
    dt: f64,
) -> Result<CellStepMatrices> {
    let vel = build_velocities(mesh, ops, u_prev, v_next, w_next, params)?;
    assemble_cell_step(mesh, &vel, u_prev, params, dt)
}

pub fn step_cell_linear(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    v_next: &CgField,
    w_next: &CgField,
    params: &ModelParams,
    dt: f64,
    opts: &CellSolverOptions,
) -> Result<(DgField, SolveReport)> {
    let step = assemble_for(mesh, ops, u_prev, v_next, w_next, params, dt)?;
    step_cell_linear_with(&step, u_prev, opts)
}

pub fn step_cell_truncated(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    v_next: &CgField,
    w_next: &CgField,
    params: &ModelParams,
    dt: f64,
    opts: &CellSolverOptions,
) -> Result<(DgField, usize)> {
    let step = assemble_for(mesh, ops, u_prev, v_next, w_next, params, dt)?;
    step_cell_truncated_with(&step, u_prev, opts)
}

#[derive(Clone, Debug)]
pub struct CellStepOutcome {
    pub u: DgField,
    pub report: Option<SolveReport>,
    pub fallback_used: bool,
    pub fp_iterations: usize,
}

/// The step used by the time loop: policy-driven choice between the linear
/// and truncated schemes.
pub fn step_cell(
    mesh: &Mesh,
    ops: &FeOperators,
    u_prev: &DgField,
    v_next: &CgField,
    w_next: &CgField,
    params: &ModelParams,
    dt: f64,
    opts: &CellSolverOptions,
) -> Result<CellStepOutcome> {
    let step = assemble_for(mesh, ops, u_prev, v_next, w_next, params, dt)?;
    match opts.fallback {
        FallbackPolicy::Truncated => {
            let (u, it) = step_cell_truncated_with(&step, u_prev, opts)?;
            Ok(CellStepOutcome {
                u,
                report: None,
                fallback_used: false,
                fp_iterations: it,
            })
        }
        FallbackPolicy::LinearOnly | FallbackPolicy::Auto => {
            let (u, report) = step_cell_linear_with(&step, u_prev, opts)?;
            let min = u.min();
            if opts.fallback == FallbackPolicy::Auto && min < -opts.fallback_trigger {
                log::warn!("linear cell step produced minimum {min:e}; solving the truncated scheme");
                let (u, it) = step_cell_truncated_with(&step, u_prev, opts)?;
                return Ok(CellStepOutcome {
                    u,
                    report: Some(report),
                    fallback_used: true,
                    fp_iterations: it,
                });
            }
            Ok(CellStepOutcome {
                u,
                report: Some(report),
                fallback_used: false,
                fp_iterations: 0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        Mesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], &[[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn sign_parts() {
        for v in [-2.5, -0.0, 0.0, 1e-300, 3.0] {
            assert_eq!(pos(v) - neg(v), v);
            assert_eq!(pos(v) * neg(v), 0.0);
        }
    }

    #[test]
    fn zero_velocity_gives_zero_matrix() {
        let m = square();
        let a = assemble_upwind(&m, &ElementVectors(vec![[0.0; 3]; 2])).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_triangle_flux_matrix() {
        // element 0 below the diagonal; n_e = (−1, 1)/√2, |e| = √2.
        // β ≡ (1, 0): {β}·n = −1/√2, so q⊕ = 0, q⊖·|e| = 1.
        let m = square();
        let a = assemble_upwind(&m, &ElementVectors(vec![[1.0, 0.0, 0.0]; 2])).unwrap();
        let want = [[0.0, -1.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - want[i][j]).abs() < 1e-15, "{i}{j}: {}", a.get(i, j));
            }
        }
    }

    #[test]
    fn columns_sum_to_zero() {
        let m = square();
        let a = assemble_upwind(&m, &ElementVectors(vec![[0.3, -2.0, 0.0], [1.5, 0.7, 0.0]])).unwrap();
        for s in a.col_sums() {
            assert!(s.abs() < 1e-15);
        }
    }
}
