use std::f64::consts::PI;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Triangulates a planar point set with a Delaunay triangulation of its
/// convex hull. Zero-area triangles on collinear hull runs are discarded.
pub fn delaunay_mesh(points: &[[f64; 2]]) -> Result<Mesh> {
    let pts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&pts);
    if tri.triangles.is_empty() {
        return Err(Error::InvalidMesh("point set has no triangulation".into()));
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0);
    let mut triangles = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks(3) {
        let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        if area.abs() > 1e-13 * scale * scale {
            triangles.push([t[0], t[1], t[2]]);
        }
    }
    Mesh::from_2d(points, &triangles)
}

const DISK_EDGE_STRETCH: f64 = 1.3;

/// Disk of the given radius meshed from concentric rings of points.
///
/// With `s = target_h/1.3`, ring spacing is `s·√3/2` (rounded to divide the
/// radius) and each ring carries `⌈2πr/s⌉` points, with alternate rings
/// rotated by half a step, so the Delaunay triangles are close to equilateral. The outer ring
/// lies exactly on the circle.
pub fn generate_disk_mesh(radius: f64, target_h: f64) -> Result<Mesh> {
    if !(radius > 0.0) || !(target_h > 0.0) {
        return Err(Error::param("target_h", "radius and target_h must be positive"));
    }
    let boundary_segments = (2.0 * PI * radius / target_h).ceil();
    if boundary_segments < 8.0 {
        return Err(Error::param(
            "target_h",
            format!("target_h={target_h} gives {boundary_segments} boundary segments on radius {radius}; at least 8 needed"),
        ));
    }
    // Rings with different point counts drift out of phase, which stretches
    // the connecting edges by up to ~30%; shrink the spacing to compensate so
    // the longest edge lands near target_h.
    let spacing = target_h / DISK_EDGE_STRETCH;
    let rings = (radius / (spacing * 3f64.sqrt() / 2.0)).ceil().max(1.0) as usize;
    let mut points = vec![[0.0, 0.0]];
    for j in 1..=rings {
        let r = radius * j as f64 / rings as f64;
        let n = ((2.0 * PI * r / spacing).ceil() as usize).max(6);
        let offset = if j % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..n {
            let theta = 2.0 * PI * (i as f64 + offset) / n as f64;
            points.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    delaunay_mesh(&points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SquarePattern {
    /// Each cell split along one diagonal into two right triangles.
    Diagonal,
    /// Each cell split into four triangles around its centre.
    CrissCross,
}

/// `n × n` structured mesh of `[0,1]²`.
pub fn structured_square_mesh(n: usize, pattern: SquarePattern) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::param("n", "need at least one cell per side"));
    }
    let h = 1.0 / n as f64;
    let mut points: Vec<[f64; 2]> = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            points.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            match pattern {
                SquarePattern::Diagonal => {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                SquarePattern::CrissCross => {
                    let m = points.len();
                    points.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    triangles.push([a, b, m]);
                    triangles.push([b, c, m]);
                    triangles.push([c, d, m]);
                    triangles.push([d, a, m]);
                }
            }
        }
    }
    Mesh::from_2d(&points, &triangles)
}


/// Ball approximated by the tetrahedra of a Kuhn-subdivided cube grid whose
/// centroids fall inside the sphere. The boundary is a staircase surface.
pub fn generate_ball_mesh(radius: f64, target_h: f64) -> Result<Mesh> {
    if !(radius > 0.0) || !(target_h > 0.0) {
        return Err(Error::param("target_h", "radius and target_h must be positive"));
    }
    // Kuhn tetrahedra have diameter √3·spacing
    let cells = (2.0 * radius * 3f64.sqrt() / target_h).ceil() as usize;
    if cells < 4 {
        return Err(Error::param("target_h", "target_h too large to resolve the ball"));
    }
    let s = 2.0 * radius / cells as f64;
    let n = cells + 1;
    let id = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let coord = |i: usize| -radius + i as f64 * s;
    // six tetrahedra sharing the main diagonal 0–7
    const KUHN: [[usize; 4]; 6] = [
        [0, 1, 3, 7],
        [0, 1, 5, 7],
        [0, 2, 3, 7],
        [0, 2, 6, 7],
        [0, 4, 5, 7],
        [0, 4, 6, 7],
    ];
    let mut keep: Vec<[usize; 4]> = Vec::new();
    for k in 0..cells {
        for j in 0..cells {
            for i in 0..cells {
                let corner = |c: usize| id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let pos = |c: usize| -> Point {
                    [coord(i + (c & 1)), coord(j + ((c >> 1) & 1)), coord(k + ((c >> 2) & 1))]
                };
                for t in KUHN {
                    let mut cen = [0.0; 3];
                    for &c in &t {
                        let p = pos(c);
                        for d in 0..3 {
                            cen[d] += p[d] / 4.0;
                        }
                    }
                    if cen.iter().map(|x| x * x).sum::<f64>() < radius * radius {
                        keep.push([corner(t[0]), corner(t[1]), corner(t[2]), corner(t[3])]);
                    }
                }
            }
        }
    }
    let mut new_index = vec![usize::MAX; n * n * n];
    let mut vertices = Vec::new();
    let mut elements = Vec::with_capacity(keep.len());
    for t in &keep {
        let mut el = Vec::with_capacity(4);
        for &g in t {
            if new_index[g] == usize::MAX {
                new_index[g] = vertices.len();
                let (i, j, k) = (g % n, (g / n) % n, g / (n * n));
                vertices.push([coord(i), coord(j), coord(k)]);
            }
            el.push(new_index[g]);
        }
        elements.push(el);
    }
    Mesh::new(3, vertices, &elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_disk_area() {
        let m = generate_disk_mesh(1.0, 0.5).unwrap();
        assert!((m.domain_measure() - PI).abs() < 0.1 * PI);
        assert!(m.h() <= 1.5 * 0.5);
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = generate_disk_mesh(2.0, 0.3).unwrap();
        for f in m.boundary_facets() {
            for &v in &f.vertices {
                let p = m.vertices()[v];
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 2.0).abs() < 1e-10 * 2.0);
            }
        }
    }

    #[test]
    fn disk_rejects_huge_h() {
        assert!(generate_disk_mesh(1.0, 10.0).is_err());
    }

    #[test]
    fn ball_mesh_is_valid() {
        let m = generate_ball_mesh(1.0, 0.6).unwrap();
        assert_eq!(m.dim(), 3);
        let vol = m.domain_measure();
        assert!(vol > 0.5 * 4.0 / 3.0 * PI && vol < 1.5 * 4.0 / 3.0 * PI, "{vol}");
    }
}
