//! Compressed-row sparse matrices and the iterative solvers used by the
//! signal and cell-density steps.
//!
//! Three solvers are provided:
//! - [`solve_spd`]: Jacobi-preconditioned conjugate gradients.
//! - [`solve_general`]: Jacobi-preconditioned BiCGStab for nonsymmetric systems.
//! - [`solve_mean_zero_poisson`]: CG on a singular stiffness matrix whose kernel
//!   is the constants, with the result shifted to zero lumped mean.
//!
//! [`gauss_seidel_nonnegative`] refines an approximate solution of a Z-matrix
//! system with nonnegative right-hand side while keeping every iterate
//! nonnegative. [`solve_banded_direct`] is the direct fallback for the same
//! class of matrices. All routines are sequential and deterministic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Sorts entries by (row, col) and sums duplicates in insertion order.
    /// The sort is stable, so the summation order is deterministic.
    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut b = TripletBuilder::with_capacity(nrows, ncols, triplets.len());
        for &(r, c, v) in triplets {
            b.push(r, c, v);
        }
        b.build()
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Builds a matrix from a dense row-major array, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                sums[j] += v;
            }
        }
        sums
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn scale(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Returns `self + other` on the union sparsity pattern.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    /// Returns `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.nrows);
        self.add(&CsrMatrix::from_diagonal(d))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    /// True when every off-diagonal entry is `<= tol` (Z-matrix sign pattern).
    pub fn has_nonpositive_off_diagonal(&self, tol: f64) -> bool {
        (0..self.nrows).all(|i| self.row(i).all(|(j, v)| i == j || v <= tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖₂ / ‖b‖₂` (absolute when `b = 0`).
    pub residual: f64,
    pub converged: bool,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:e}, converged={}",
            self.iterations, self.residual, self.converged
        )
    }
}

impl SolveReport {
    pub fn into_result(self) -> Result<SolveReport> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged(self))
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        .sqrt();
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

fn jacobi_inverse(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect()
}

/// Conjugate gradients with diagonal preconditioning, starting from zero.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    let mut x = vec![0.0; b.len()];
    let report = pcg(a, b, &mut x, tol, max_iter, None);
    (x, report)
}

/// Like [`solve_spd`] but starting from the supplied iterate.
pub fn solve_spd_from(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> SolveReport {
    pcg(a, b, x, tol, max_iter, None)
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Preconditioned CG. With `project_constants`, residuals are kept orthogonal
/// to the constant vector, which is how the singular Neumann problem is handled.
fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    project_constants: Option<()>,
) -> SolveReport {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let minv = jacobi_inverse(a);
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if project_constants.is_some() {
        remove_mean(&mut r);
    }
    let mut rnorm = norm2(&r);
    if rnorm <= tol * bnorm {
        return SolveReport {
            iterations: 0,
            residual: rnorm / bnorm,
            converged: true,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    if project_constants.is_some() {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if project_constants.is_some() {
            remove_mean(&mut r);
        }
        rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        if project_constants.is_some() {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let mut residual = relative_residual(a, x, b, bnorm);
    if project_constants.is_some() {
        // Only the component orthogonal to the kernel is meaningful.
        let mut rr = a.mul_vec(x);
        for (ri, bi) in rr.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        remove_mean(&mut rr);
        residual = norm2(&rr) / bnorm;
    }
    SolveReport {
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// BiCGStab with right diagonal preconditioning, starting from zero.
///
/// Restarts from the true residual when the recursive residual drifts, up to
/// a few times. Breakdown (e.g. a singular system) yields `converged = false`.
pub fn solve_general(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    let mut x = vec![0.0; b.len()];
    let report = solve_general_from(a, b, &mut x, tol, max_iter);
    (x, report)
}

/// Like [`solve_general`] but starting from the supplied iterate.
///
/// Besides `‖r‖₂ ≤ tol·‖b‖₂`, an iterate whose componentwise backward error
/// is at round-off level counts as converged: badly scaled systems cannot
/// reach a tight relative residual even with a direct solver.
pub fn solve_general_from(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> SolveReport {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let minv = jacobi_inverse(a);
    let floor = RoundingFloor::new(a, b);
    let mut iterations = 0;
    let (mut residual, mut at_floor) = floor.check(a, x, b, bnorm);
    const MAX_RESTARTS: usize = 5;
    for _ in 0..=MAX_RESTARTS {
        if residual <= tol || at_floor || iterations >= max_iter {
            break;
        }
        let used = bicgstab_cycle(a, b, x, &minv, tol * bnorm, &floor, max_iter - iterations);
        iterations += used.0;
        let before = residual;
        (residual, at_floor) = floor.check(a, x, b, bnorm);
        if used.1 && !(residual < 0.5 * before) {
            // breakdown without progress: a fresh shadow residual from the
            // same point would break down again
            break;
        }
    }
    SolveReport {
        iterations,
        residual,
        converged: (residual <= tol || at_floor) && residual.is_finite(),
    }
}

/// Componentwise backward error accepted as converged.
const BACKWARD_ERROR_TOL: f64 = 16.0 * f64::EPSILON;

/// Componentwise backward error `max_i |r_i| / (|A||x| + |b|)_i`, the
/// smallest relative perturbation of the entries of `A` and `b` that makes
/// `x` exact.
struct RoundingFloor {
    abs_a: CsrMatrix,
    abs_b: Vec<f64>,
}

impl RoundingFloor {
    fn new(a: &CsrMatrix, b: &[f64]) -> Self {
        let mut abs_a = a.clone();
        abs_a.values.iter_mut().for_each(|v| *v = v.abs());
        RoundingFloor {
            abs_a,
            abs_b: b.iter().map(|v| v.abs()).collect(),
        }
    }

    fn reached(&self, r: &[f64], x: &[f64]) -> bool {
        let abs_x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let scale = self.abs_a.mul_vec(&abs_x);
        r.iter()
            .zip(scale.iter().zip(&self.abs_b))
            .all(|(ri, (s, bi))| ri.abs() <= BACKWARD_ERROR_TOL * (s + bi))
    }

    /// True relative residual and whether the rounding floor is reached.
    fn check(&self, a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> (f64, bool) {
        let mut r = a.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        (norm2(&r) / bnorm, self.reached(&r, x))
    }
}

/// One BiCGStab cycle; returns (iterations used, broke down).
fn bicgstab_cycle(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    minv: &[f64],
    abs_tol: f64,
    floor: &RoundingFloor,
    max_iter: usize,
) -> (usize, bool) {
    let n = b.len();
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return (it, true);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = p[i] * minv[i];
        }
        a.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return (it, true);
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= abs_tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return (it, false);
        }
        for i in 0..n {
            s_hat[i] = s[i] * minv[i];
        }
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return (it, true);
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        // the floor test costs a product with |A|, so it is sampled
        if norm2(&r) <= abs_tol || (it % 8 == 0 && floor.reached(&r, x)) {
            return (it, false);
        }
        if omega == 0.0 {
            return (it, true);
        }
    }
    (it, false)
}

/// Solves `K x = b` for a stiffness matrix whose kernel is the constants.
///
/// The right-hand side must sum to zero (relative to `Σ|b_i|`, within
/// `1e-10`). The returned solution has zero weighted mean `Σ_i w_i x_i = 0`,
/// with `weights` typically the lumped mass diagonal.
pub fn solve_mean_zero_poisson(
    k: &CsrMatrix,
    b: &[f64],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
    initial_guess: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "mean weights",
            expected: n,
            found: weights.len(),
        });
    }
    let sum: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) && sum.abs() > 0.0 {
        return Err(Error::IncompatibleRhs { sum });
    }
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let mut x = match initial_guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let report = pcg(k, &rhs, &mut x, tol, max_iter, Some(()));
    shift_to_zero_weighted_mean(&mut x, weights);
    Ok((x, report))
}

pub(crate) fn shift_to_zero_weighted_mean(x: &mut [f64], weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return;
    }
    let mean = dot(x, weights) / total;
    x.iter_mut().for_each(|v| *v -= mean);
    // one correction pass absorbs the rounding left by the first shift
    let mean = dot(x, weights) / total;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Gauss–Seidel refinement that keeps every iterate nonnegative.
///
/// Requires a Z-matrix with positive diagonal and `b ≥ 0`; then each update
/// `x_i = (b_i − Σ_{j≠i} a_ij x_j) / a_ii` is a sum of nonnegative terms.
/// The sweep starts from the positive part of `x`. Stops under the same
/// convergence test as [`solve_general_from`] or after `max_sweeps`.
pub fn gauss_seidel_nonnegative(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_sweeps: usize,
) -> SolveReport {
    let n = b.len();
    let bnorm = norm2(b);
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let floor = RoundingFloor::new(a, b);
    let (mut residual, mut at_floor) = floor.check(a, x, b, bnorm);
    let mut sweeps = 0;
    while residual > tol && !at_floor && sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..n {
            let mut diag = 0.0;
            let mut acc = b[i];
            for (j, v) in a.row(i) {
                if j == i {
                    diag = v;
                } else {
                    acc -= v * x[j];
                }
            }
            x[i] = (acc / diag).max(0.0);
        }
        (residual, at_floor) = floor.check(a, x, b, bnorm);
    }
    SolveReport {
        iterations: sweeps,
        residual,
        converged: residual <= tol || at_floor,
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrised pattern of `a`.
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let head = order.len();
        order.push(seed);
        let mut next = head;
        while next < order.len() {
            let v = order[next];
            next += 1;
            let mut fresh: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            fresh.sort_by_key(|&w| (degree[w], w));
            for w in fresh {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Direct solve by banded Gaussian elimination without pivoting after a
/// reverse Cuthill–McKee reordering.
///
/// Meant for column diagonally dominant Z-matrices, where elimination
/// without pivoting is backward stable and every pivot is positive. A
/// nonpositive or non-finite pivot makes the report unconverged.
pub fn solve_banded_direct(a: &CsrMatrix, b: &[f64], tol: f64) -> (Vec<f64>, SolveReport) {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut lower, mut upper) = (0usize, 0usize);
    for i in 0..n {
        for (j, _) in a.row(i) {
            let (r, c) = (inv[i], inv[j]);
            lower = lower.max(r.saturating_sub(c));
            upper = upper.max(c.saturating_sub(r));
        }
    }
    // fill stays inside the band; row r stores columns r-lower ..= r+upper
    let width = lower + upper + 1;
    let mut band = vec![0.0; n * width];
    let at = |r: usize, c: usize| r * width + (c + lower - r);
    for i in 0..n {
        for (j, v) in a.row(i) {
            band[at(inv[i], inv[j])] += v;
        }
    }
    let mut y: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
    let unconverged = |iterations| {
        (
            vec![f64::NAN; n],
            SolveReport {
                iterations,
                residual: f64::INFINITY,
                converged: false,
            },
        )
    };
    for k in 0..n {
        let pivot = band[at(k, k)];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return unconverged(k);
        }
        let last_col = (k + upper).min(n - 1);
        for r in k + 1..=(k + lower).min(n - 1) {
            let factor = band[at(r, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            band[at(r, k)] = 0.0;
            for c in k + 1..=last_col {
                band[at(r, c)] -= factor * band[at(k, c)];
            }
            y[r] -= factor * y[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = y[k];
        for c in k + 1..=(k + upper).min(n - 1) {
            acc -= band[at(k, c)] * y[c];
        }
        y[k] = acc / band[at(k, k)];
    }
    let mut x = vec![0.0; n];
    for (new, &old) in perm.iter().enumerate() {
        x[old] = y[new];
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return (
            x,
            SolveReport {
                iterations: 1,
                residual: 0.0,
                converged: true,
            },
        );
    }
    let (residual, at_floor) = RoundingFloor::new(a, b).check(a, &x, b, bnorm);
    (
        x,
        SolveReport {
            iterations: 1,
            residual,
            converged: (residual <= tol || at_floor) && residual.is_finite(),
        },
    )
}
