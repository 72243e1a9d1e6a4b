//! P0 (discontinuous, one value per element) and P1 (continuous, one value
//! per vertex) finite element spaces, their operators, and the two L²-type
//! projections onto P1: `Π₁` with the consistent mass matrix and `Π₁ʰ` with
//! the lumped (vertex-rule) mass.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd_from, CsrMatrix, TripletBuilder};
use crate::mesh::{Mesh, Point};

/// Piecewise-constant field: one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct DgField(pub Vec<f64>);

/// Continuous piecewise-linear field: one value per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct CgField(pub Vec<f64>);

/// Elementwise-constant vector field (e.g. the gradient of a [`CgField`]).
#[derive(Clone, Debug, PartialEq)]
pub struct ElementVectors(pub Vec<Point>);

macro_rules! field_impls {
    ($t:ty, $item:ty) => {
        impl Deref for $t {
            type Target = [$item];
            fn deref(&self) -> &[$item] {
                &self.0
            }
        }
        impl DerefMut for $t {
            fn deref_mut(&mut self) -> &mut [$item] {
                &mut self.0
            }
        }
    };
}
field_impls!(DgField, f64);
field_impls!(CgField, f64);
field_impls!(ElementVectors, Point);

impl DgField {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        DgField(vec![value; mesh.num_elements()])
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len("P0 field", mesh.num_elements(), self.0.len())
    }

    /// `∫_Ω u = Σ_K |K| u_K`.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        self.0.iter().zip(mesh.element_measures()).map(|(u, m)| u * m).sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl CgField {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        CgField(vec![value; mesh.num_vertices()])
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len("P1 field", mesh.num_vertices(), self.0.len())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lumped integral `Σ_i D_ii s_i`.
    pub fn lumped_integral(&self, lumped: &[f64]) -> f64 {
        self.0.iter().zip(lumped).map(|(s, d)| s * d).sum()
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { what, expected, found });
    }
    Ok(())
}

/// Consistent P1 mass matrix, local entries `|K|(1 + δ_ij) / ((d+1)(d+2))`.
pub fn p1_mass_matrix(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.nodes_per_element();
    let denom = (n * (n + 1)) as f64;
    let mut b = TripletBuilder::with_capacity(mesh.num_vertices(), mesh.num_vertices(), mesh.num_elements() * n * n);
    for (k, el) in mesh.elements().enumerate() {
        let m = mesh.element_measures()[k] / denom;
        for (a, &i) in el.iter().enumerate() {
            for (c, &j) in el.iter().enumerate() {
                b.push(i, j, if a == c { 2.0 * m } else { m });
            }
        }
    }
    b.build()
}

/// Lumped P1 mass: the row sums of the consistent mass matrix.
pub fn p1_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    p1_mass_matrix(mesh).row_sums()
}

/// P1 stiffness `∫ κ ∇φ_j·∇φ_i` with an optional elementwise coefficient κ ≥ 0.
pub fn p1_stiffness_matrix(mesh: &Mesh, coefficient: Option<&DgField>) -> Result<CsrMatrix> {
    if let Some(c) = coefficient {
        c.check(mesh)?;
        if let Some((k, &v)) = c.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::param("coefficient", format!("negative or non-finite value {v} in element {k}")));
        }
    }
    let n = mesh.nodes_per_element();
    let mut b = TripletBuilder::with_capacity(mesh.num_vertices(), mesh.num_vertices(), mesh.num_elements() * n * n);
    for (k, el) in mesh.elements().enumerate() {
        let kappa = coefficient.map_or(1.0, |c| c[k]);
        let w = kappa * mesh.element_measures()[k];
        let g = mesh.basis_gradients(k);
        for (a, &i) in el.iter().enumerate() {
            for (c, &j) in el.iter().enumerate() {
                let gg = g[a][0] * g[c][0] + g[a][1] * g[c][1] + g[a][2] * g[c][2];
                b.push(i, j, w * gg);
            }
        }
    }
    Ok(b.build())
}

/// Mesh-level operators assembled once and shared by every time step.
#[derive(Clone, Debug)]
pub struct FeOperators {
    pub mass: CsrMatrix,
    pub lumped: Vec<f64>,
    pub stiffness: CsrMatrix,
}

impl FeOperators {
    pub fn new(mesh: &Mesh) -> Self {
        let mass = p1_mass_matrix(mesh);
        let lumped = mass.row_sums();
        let stiffness = p1_stiffness_matrix(mesh, None).expect("unit coefficient is valid");
        FeOperators { mass, lumped, stiffness }
    }
}

/// Functions that can be projected onto P1.
pub enum Projectable<'a> {
    P0(&'a DgField),
    P1(&'a CgField),
    /// Pointwise-evaluable function, integrated with a degree-2 rule per element.
    Function(&'a dyn Fn(Point) -> f64),
}

/// Barycentric quadrature points and weights (relative to |K|), exact for
/// quadratics: edge midpoints in 2D, the symmetric 4-point rule in 3D.
pub(crate) fn quadrature(dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if dim == 2 {
        (
            vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]],
            vec![1.0 / 3.0; 3],
        )
    } else {
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        (
            vec![
                vec![a, b, b, b],
                vec![b, a, b, b],
                vec![b, b, a, b],
                vec![b, b, b, a],
            ],
            vec![0.25; 4],
        )
    }
}

fn barycentric_point(pts: &[Point], lambda: &[f64]) -> Point {
    let mut x = [0.0; 3];
    for (p, l) in pts.iter().zip(lambda) {
        for d in 0..3 {
            x[d] += l * p[d];
        }
    }
    x
}

/// Load vector `b_i = ∫ g φ_i`.
pub fn load_vector(mesh: &Mesh, g: &Projectable<'_>) -> Result<Vec<f64>> {
    let nv = mesh.num_vertices();
    let n = mesh.nodes_per_element();
    let mut b = vec![0.0; nv];
    match g {
        Projectable::P0(u) => {
            u.check(mesh)?;
            for (k, el) in mesh.elements().enumerate() {
                let share = u[k] * mesh.element_measures()[k] / n as f64;
                for &i in el {
                    b[i] += share;
                }
            }
        }
        Projectable::P1(s) => {
            s.check(mesh)?;
            b = p1_mass_matrix(mesh).mul_vec(s);
        }
        Projectable::Function(f) => {
            let (points, weights) = quadrature(mesh.dim());
            for (k, el) in mesh.elements().enumerate() {
                let pts = mesh.element_vertices(k);
                let m = mesh.element_measures()[k];
                for (lambda, w) in points.iter().zip(&weights) {
                    let val = f(barycentric_point(&pts, lambda)) * w * m;
                    for (a, &i) in el.iter().enumerate() {
                        b[i] += val * lambda[a];
                    }
                }
            }
        }
    }
    Ok(b)
}

pub const PROJECTION_TOL: f64 = 1e-13;

/// `Π₁ g`: solves `M x = b` with the consistent mass matrix.
pub fn project_pi1(mesh: &Mesh, ops: &FeOperators, g: &Projectable<'_>) -> Result<CgField> {
    let b = load_vector(mesh, g)?;
    // the lumped solution is an excellent starting guess
    let mut x: Vec<f64> = b.iter().zip(&ops.lumped).map(|(bi, d)| bi / d).collect();
    let report = solve_spd_from(&ops.mass, &b, &mut x, PROJECTION_TOL, 10 * b.len().max(10));
    report.into_result()?;
    Ok(CgField(x))
}

/// `Π₁ʰ g`: the lumped projection `x_i = b_i / D_ii`. Preserves sign.
pub fn project_pih1(mesh: &Mesh, ops: &FeOperators, g: &Projectable<'_>) -> Result<CgField> {
    let b = load_vector(mesh, g)?;
    Ok(CgField(b.iter().zip(&ops.lumped).map(|(bi, d)| bi / d).collect()))
}

/// Exact elementwise gradient of the P1 interpolant of `f`.
pub fn element_gradients(mesh: &Mesh, f: &CgField) -> Result<ElementVectors> {
    f.check(mesh)?;
    let mut out = Vec::with_capacity(mesh.num_elements());
    for (k, el) in mesh.elements().enumerate() {
        let g = mesh.basis_gradients(k);
        let mut grad = [0.0; 3];
        for (a, &i) in el.iter().enumerate() {
            for d in 0..3 {
                grad[d] += f[i] * g[a][d];
            }
        }
        out.push(grad);
    }
    Ok(ElementVectors(out))
}

/// Values below `-NEGATIVE_SLACK` are rejected by [`reg_log`].
pub const NEGATIVE_SLACK: f64 = 1e-12;

/// Elementwise `log(u_K + ε)`. Round-off negatives down to `-1e-12` are
/// treated as zero.
pub fn reg_log(u: &DgField, eps: f64) -> Result<DgField> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            if v < -NEGATIVE_SLACK || !v.is_finite() {
                Err(Error::Domain { element: k, value: v })
            } else {
                Ok((v.max(0.0) + eps).ln())
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(DgField)
}

/// Element averages of a pointwise function (degree-2 quadrature).
pub fn interpolate_p0(mesh: &Mesh, f: impl Fn(Point) -> f64) -> DgField {
    let (points, weights) = quadrature(mesh.dim());
    DgField(
        (0..mesh.num_elements())
            .map(|k| {
                let pts = mesh.element_vertices(k);
                points
                    .iter()
                    .zip(&weights)
                    .map(|(l, w)| w * f(barycentric_point(&pts, l)))
                    .sum()
            })
            .collect(),
    )
}

/// Nodal interpolation onto P1.
pub fn interpolate_p1(mesh: &Mesh, f: impl Fn(Point) -> f64) -> CgField {
    CgField(mesh.vertices().iter().map(|&p| f(p)).collect())
}
