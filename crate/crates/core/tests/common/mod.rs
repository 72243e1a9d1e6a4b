//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's assembly or solver code.

#![allow(dead_code)]

use chemotaxis_core::fespace::{DgField, ElementVectors};
use chemotaxis_core::mesh::{delaunay_mesh, Mesh, Point};
use chemotaxis_core::params::{ModelKind, ModelParams};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in dense oracle");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, x)| a * x).sum()).collect()
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn centroid(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        for d in 0..3 {
            c[d] += p[d] / pts.len() as f64;
        }
    }
    c
}

/// A facet found by comparing vertex sets of every element pair.
pub struct RefFacet {
    pub k: usize,
    pub l: usize,
    /// Unit normal pointing from K to L.
    pub normal: Point,
    pub measure: f64,
}

pub fn reference_facets(mesh: &Mesh) -> Vec<RefFacet> {
    let dim = mesh.dim();
    let ne = mesh.num_elements();
    let mut out = Vec::new();
    for k in 0..ne {
        for l in k + 1..ne {
            let shared: Vec<usize> = mesh
                .element(k)
                .iter()
                .copied()
                .filter(|v| mesh.element(l).contains(v))
                .collect();
            if shared.len() != dim {
                continue;
            }
            let p: Vec<Point> = shared.iter().map(|&v| mesh.vertices()[v]).collect();
            let (mut n, measure) = if dim == 2 {
                let t = sub(p[1], p[0]);
                let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
                ([t[1] / len, -t[0] / len, 0.0], len)
            } else {
                let (a, b) = (sub(p[1], p[0]), sub(p[2], p[0]));
                let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                let len = dot(c, c).sqrt();
                ([c[0] / len, c[1] / len, c[2] / len], 0.5 * len)
            };
            let ck = centroid(&mesh.element_vertices(k));
            let cl = centroid(&mesh.element_vertices(l));
            if dot(n, sub(cl, ck)) < 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            out.push(RefFacet { k, l, normal: n, measure });
        }
    }
    out
}

/// `A[i][j] = a_upw(β; e_j, e_i)` evaluated literally from the facet-sum
/// definition with indicator functions as trial and test functions.
pub fn reference_upwind(mesh: &Mesh, beta: &[Point]) -> Vec<Vec<f64>> {
    let ne = mesh.num_elements();
    let facets = reference_facets(mesh);
    let form = |u: &dyn Fn(usize) -> f64, ubar: &dyn Fn(usize) -> f64| -> f64 {
        facets
            .iter()
            .map(|f| {
                let avg = [
                    0.5 * (beta[f.k][0] + beta[f.l][0]),
                    0.5 * (beta[f.k][1] + beta[f.l][1]),
                    0.5 * (beta[f.k][2] + beta[f.l][2]),
                ];
                let q = dot(avg, f.normal);
                let (qp, qm) = (q.max(0.0), (-q).max(0.0));
                f.measure * (qp * u(f.k) - qm * u(f.l)) * (ubar(f.k) - ubar(f.l))
            })
            .sum()
    };
    let mut a = vec![vec![0.0; ne]; ne];
    for i in 0..ne {
        for j in 0..ne {
            let u = move |m: usize| if m == j { 1.0 } else { 0.0 };
            let ubar = move |m: usize| if m == i { 1.0 } else { 0.0 };
            a[i][j] = form(&u, &ubar);
        }
    }
    a
}

/// Delaunay mesh of `n` random points in the unit square, retried until
/// all triangles are reasonably shaped.
pub fn random_mesh_2d(rng: &mut ChaCha8Rng, n: usize) -> Mesh {
    loop {
        let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        while pts.len() < n.max(4) {
            let p = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
            if pts.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.08) {
                pts.push(p);
            }
        }
        pts.truncate(n.max(3));
        if let Ok(mesh) = delaunay_mesh(&pts) {
            let min_measure = mesh.element_measures().iter().copied().fold(f64::INFINITY, f64::min);
            if min_measure > 1e-3 / mesh.num_elements() as f64 {
                return mesh;
            }
        }
    }
}

/// The six Kuhn tetrahedra of the unit cube with jittered vertices.
pub fn random_cube_mesh_3d(rng: &mut ChaCha8Rng) -> Mesh {
    let mut vertices = Vec::new();
    for c in 0..8usize {
        let base = [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64];
        vertices.push([
            base[0] + rng.random_range(-0.1..0.1),
            base[1] + rng.random_range(-0.1..0.1),
            base[2] + rng.random_range(-0.1..0.1),
        ]);
    }
    let tets = [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]];
    let elements: Vec<Vec<usize>> = tets.iter().map(|t| t.to_vec()).collect();
    Mesh::new(3, vertices, &elements).unwrap()
}

pub fn random_velocity(rng: &mut ChaCha8Rng, mesh: &Mesh) -> ElementVectors {
    let dim = mesh.dim();
    ElementVectors(
        (0..mesh.num_elements())
            .map(|_| {
                let mut b = [0.0; 3];
                for c in b.iter_mut().take(dim) {
                    *c = rng.random_range(-2.0..2.0);
                }
                b
            })
            .collect(),
    )
}

/// Nonnegative density with a mix of exact zeros, small and large values.
pub fn random_density(rng: &mut ChaCha8Rng, mesh: &Mesh) -> DgField {
    DgField(
        (0..mesh.num_elements())
            .map(|_| match rng.random_range(0..10) {
                0..=2 => 0.0,
                3..=4 => rng.random_range(0.0..1e-6),
                5..=8 => rng.random_range(0.0..10.0),
                _ => rng.random_range(10.0..200.0),
            })
            .collect(),
    )
}

/// Random parameter set inside the documented ranges.
pub fn random_params(rng: &mut ChaCha8Rng, steps: usize) -> ModelParams {
    let rho = rng.random_range(1.0..2.0);
    let dt = [1e-5, 1e-4, 1e-3][rng.random_range(0..3)];
    let model = if rng.random_bool(0.3) { ModelKind::Nonlocal } else { ModelKind::Local };
    ModelParams {
        model,
        tau: rng.random_range(0..2),
        chi: rng.random_range(0.0..5.0),
        xi: rng.random_range(0.0..5.0),
        lambda: rng.random_range(0.0..2.0),
        mu: rng.random_range(0.0..2.0),
        c: rng.random_range(0.0..2.0),
        n1: rng.random_range(0.5..2.0),
        n2: rng.random_range(0.5..2.0),
        n3: rng.random_range(0.5..2.0),
        rho,
        k: rng.random_range(rho..rho + 1.0),
        gamma: rng.random_range(1.0..2.0),
        a: rng.random_range(0.5..2.0),
        d_decay: rng.random_range(0.5..2.0),
        alpha: rng.random_range(0.5..2.0),
        beta: rng.random_range(0.5..2.0),
        eta: if rng.random_bool(0.2) { rng.random_range(0.0..1.0) } else { 0.0 },
        eps: 1e-10,
        t_final: steps as f64 * dt,
        dt,
    }
}

/// Degree-5 seven-point rule on the reference triangle: barycentric points
/// and weights summing to 1.
pub fn dunavant7() -> Vec<([f64; 3], f64)> {
    let (a1, b1) = (0.059_715_871_789_770, 0.470_142_064_105_115);
    let (a2, b2) = (0.797_426_985_353_087, 0.101_286_507_323_456);
    let (w0, w1, w2) = (0.225, 0.132_394_152_788_506, 0.125_939_180_544_827);
    vec![
        ([1.0 / 3.0; 3], w0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// `‖s_h − s‖_{L²}` for a P1 field on a triangle mesh.
pub fn l2_error_p1(mesh: &Mesh, nodal: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = dunavant7();
    let mut sum = 0.0;
    for k in 0..mesh.num_elements() {
        let el = mesh.element(k);
        let pts = mesh.element_vertices(k);
        let area = mesh.element_measures()[k];
        for (lam, w) in &rule {
            let x = lam[0] * pts[0][0] + lam[1] * pts[1][0] + lam[2] * pts[2][0];
            let y = lam[0] * pts[0][1] + lam[1] * pts[1][1] + lam[2] * pts[2][1];
            let sh = lam[0] * nodal[el[0]] + lam[1] * nodal[el[1]] + lam[2] * nodal[el[2]];
            let e = sh - exact(x, y);
            sum += area * w * e * e;
        }
    }
    sum.sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
