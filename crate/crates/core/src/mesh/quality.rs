use serde::Serialize;

use super::{cross, dot3, facet_measure, max_edge, norm3, sub, Mesh};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshQualityReport {
    /// Largest interior angle (2D) or dihedral angle (3D), radians.
    pub max_angle: f64,
    pub is_non_obtuse: bool,
    /// Maximum element diameter.
    pub h: f64,
    /// Max over elements of diameter / inradius.
    pub shape_regularity_ratio: f64,
}

const RIGHT_ANGLE_SLACK: f64 = 1e-12;

fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = dot3(a, b) / (norm3(a) * norm3(b));
    c.clamp(-1.0, 1.0).acos()
}

fn element_max_angle(dim: usize, pts: &[[f64; 3]]) -> f64 {
    let mut worst: f64 = 0.0;
    if dim == 2 {
        for i in 0..3 {
            let a = sub(&pts[(i + 1) % 3], &pts[i]);
            let b = sub(&pts[(i + 2) % 3], &pts[i]);
            worst = worst.max(angle_between(&a, &b));
        }
    } else {
        // dihedral angle along edge (i, j) between faces (i, j, k) and (i, j, l)
        for i in 0..4 {
            for j in i + 1..4 {
                let rest: Vec<usize> = (0..4).filter(|&m| m != i && m != j).collect();
                let e = sub(&pts[j], &pts[i]);
                let u = sub(&pts[rest[0]], &pts[i]);
                let v = sub(&pts[rest[1]], &pts[i]);
                let nu = cross(&e, &u);
                let nv = cross(&e, &v);
                worst = worst.max(angle_between(&nu, &nv));
            }
        }
    }
    worst
}

/// Angle, size and shape statistics. Non-obtuse meshes give M-matrix
/// stiffness operators, which the lumped signal solver relies on for
/// nonnegativity.
pub fn quality_report(mesh: &Mesh) -> MeshQualityReport {
    let dim = mesh.dim();
    let mut max_angle: f64 = 0.0;
    let mut h: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for k in 0..mesh.num_elements() {
        let pts = mesh.element_vertices(k);
        max_angle = max_angle.max(element_max_angle(dim, &pts));
        let diam = max_edge(&pts);
        h = h.max(diam);
        let surface: f64 = (0..=dim)
            .map(|j| {
                let facet: Vec<[f64; 3]> = (0..=dim).filter(|&l| l != j).map(|l| pts[l]).collect();
                facet_measure(dim, &facet)
            })
            .sum();
        let inradius = dim as f64 * mesh.element_measures()[k] / surface;
        ratio = ratio.max(diam / inradius);
    }
    MeshQualityReport {
        max_angle,
        is_non_obtuse: max_angle <= std::f64::consts::FRAC_PI_2 + RIGHT_ANGLE_SLACK,
        h,
        shape_regularity_ratio: ratio,
    }
}
