//! Immutable simplicial meshes (triangles in 2D, tetrahedra in 3D).
//!
//! Facets are identified by their sorted vertex tuple. An interior facet `e`
//! stores its two neighbours with the orientation convention used by the
//! upwind form: `inner` (K_e) is the element with the lower index and the unit
//! normal points from `inner` into `outer` (L_e). Boundary facet normals point
//! out of the domain.

mod generate;
mod io;
mod quality;

pub use generate::{delaunay_mesh, generate_ball_mesh, generate_disk_mesh, structured_square_mesh, SquarePattern};
pub use io::{load_mesh, parse_gmsh_v2, parse_native, write_native, MeshFormat};
pub use quality::{quality_report, MeshQualityReport};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorFacet {
    /// Sorted vertex indices (`dim` of them).
    pub vertices: Vec<usize>,
    /// K_e: the lower-indexed neighbour; the normal is exterior to it.
    pub inner: usize,
    /// L_e: the higher-indexed neighbour.
    pub outer: usize,
    pub normal: Point,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    pub element: usize,
    /// Outward unit normal.
    pub normal: Point,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    /// Flat connectivity, `dim + 1` vertices per element.
    connectivity: Vec<usize>,
    measures: Vec<f64>,
    /// Gradients of the barycentric coordinates, `dim + 1` per element.
    basis_gradients: Vec<Point>,
    interior_facets: Vec<InteriorFacet>,
    boundary_facets: Vec<BoundaryFacet>,
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}

/// Signed measure and barycentric gradients of a simplex.
fn simplex_geometry(dim: usize, p: &[Point]) -> (f64, Vec<Point>) {
    match dim {
        2 => {
            let e1 = sub(&p[1], &p[0]);
            let e2 = sub(&p[2], &p[0]);
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            // rows of J^{-1} with J = [e1 e2]
            let g1 = [e2[1] / det, -e2[0] / det, 0.0];
            let g2 = [-e1[1] / det, e1[0] / det, 0.0];
            let g0 = [-g1[0] - g2[0], -g1[1] - g2[1], 0.0];
            (0.5 * det, vec![g0, g1, g2])
        }
        3 => {
            let e1 = sub(&p[1], &p[0]);
            let e2 = sub(&p[2], &p[0]);
            let e3 = sub(&p[3], &p[0]);
            let det = dot3(&e1, &cross(&e2, &e3));
            // rows of J^{-1}: (e2×e3, e3×e1, e1×e2) / det
            let scale = |v: Point| [v[0] / det, v[1] / det, v[2] / det];
            let g1 = scale(cross(&e2, &e3));
            let g2 = scale(cross(&e3, &e1));
            let g3 = scale(cross(&e1, &e2));
            let g0 = [
                -g1[0] - g2[0] - g3[0],
                -g1[1] - g2[1] - g3[1],
                -g1[2] - g2[2] - g3[2],
            ];
            (det / 6.0, vec![g0, g1, g2, g3])
        }
        _ => unreachable!("dimension checked by caller"),
    }
}

fn facet_measure(dim: usize, p: &[Point]) -> f64 {
    match dim {
        2 => norm3(&sub(&p[1], &p[0])),
        _ => 0.5 * norm3(&cross(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]))),
    }
}

impl Mesh {
    /// Builds a mesh from coordinates (`dim` components used per point) and
    /// element connectivity (`dim + 1` zero-based vertex indices each).
    pub fn new(dim: usize, vertices: Vec<Point>, elements: &[Vec<usize>]) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let nv = vertices.len();
        let nodes = dim + 1;
        let mut connectivity = Vec::with_capacity(elements.len() * nodes);
        for (k, el) in elements.iter().enumerate() {
            if el.len() != nodes {
                return Err(Error::InvalidMesh(format!(
                    "element {k} has {} vertices, expected {nodes}",
                    el.len()
                )));
            }
            for &i in el {
                if i >= nv {
                    return Err(Error::VertexOutOfRange {
                        element: k,
                        index: i,
                        num_vertices: nv,
                    });
                }
            }
            connectivity.extend_from_slice(el);
        }
        if elements.is_empty() {
            return Err(Error::InvalidMesh("mesh has no elements".into()));
        }
        if let Some(p) = vertices.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        if dim == 2 && vertices.iter().any(|p| p[2] != 0.0) {
            return Err(Error::InvalidMesh("2D mesh with nonzero z coordinate".into()));
        }

        let ne = elements.len();
        let mut measures = Vec::with_capacity(ne);
        let mut basis_gradients = Vec::with_capacity(ne * nodes);
        for k in 0..ne {
            let idx = &connectivity[k * nodes..(k + 1) * nodes];
            let pts: Vec<Point> = idx.iter().map(|&i| vertices[i]).collect();
            let (signed, grads) = simplex_geometry(dim, &pts);
            let diam = max_edge(&pts);
            let measure = signed.abs();
            if !(measure > 1e-14 * diam.powi(dim as i32)) {
                return Err(Error::DegenerateElement { element: k, measure });
            }
            measures.push(measure);
            basis_gradients.extend(grads);
        }

        // (sorted facet key, element, local index of the opposite vertex)
        let mut facets: Vec<(Vec<usize>, usize, usize)> = Vec::with_capacity(ne * nodes);
        for k in 0..ne {
            let idx = &connectivity[k * nodes..(k + 1) * nodes];
            for j in 0..nodes {
                let mut key: Vec<usize> = (0..nodes).filter(|&l| l != j).map(|l| idx[l]).collect();
                key.sort_unstable();
                facets.push((key, k, j));
            }
        }
        facets.sort();

        let mut interior_facets = Vec::new();
        let mut boundary_facets = Vec::new();
        let outward = |k: usize, j: usize| -> Point {
            let g = basis_gradients[k * nodes + j];
            let n = norm3(&g);
            [-g[0] / n, -g[1] / n, -g[2] / n]
        };
        let mut start = 0;
        while start < facets.len() {
            let mut end = start + 1;
            while end < facets.len() && facets[end].0 == facets[start].0 {
                end += 1;
            }
            let key = &facets[start].0;
            let pts: Vec<Point> = key.iter().map(|&i| vertices[i]).collect();
            let measure = facet_measure(dim, &pts);
            match end - start {
                1 => {
                    let (_, k, j) = facets[start];
                    boundary_facets.push(BoundaryFacet {
                        vertices: key.clone(),
                        element: k,
                        normal: outward(k, j),
                        measure,
                    });
                }
                2 => {
                    // sorted by element index within equal keys
                    let (_, k, j) = facets[start];
                    let (_, l, _) = facets[start + 1];
                    interior_facets.push(InteriorFacet {
                        vertices: key.clone(),
                        inner: k,
                        outer: l,
                        normal: outward(k, j),
                        measure,
                    });
                }
                count => {
                    return Err(Error::NonManifoldFacet {
                        vertices: key.clone(),
                        count,
                    })
                }
            }
            start = end;
        }

        Ok(Mesh {
            dim,
            vertices,
            connectivity,
            measures,
            basis_gradients,
            interior_facets,
            boundary_facets,
        })
    }

    /// 2D convenience constructor.
    pub fn from_2d(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> Result<Mesh> {
        let pts = vertices.iter().map(|p| [p[0], p[1], 0.0]).collect();
        let els: Vec<Vec<usize>> = triangles.iter().map(|t| t.to_vec()).collect();
        Mesh::new(2, pts, &els)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.measures.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn element(&self, k: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.connectivity[k * n..(k + 1) * n]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.connectivity.chunks(self.dim + 1)
    }

    pub fn element_measures(&self) -> &[f64] {
        &self.measures
    }

    /// Gradients of the P1 basis functions on element `k`, in element vertex order.
    pub fn basis_gradients(&self, k: usize) -> &[Point] {
        let n = self.dim + 1;
        &self.basis_gradients[k * n..(k + 1) * n]
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior_facets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn domain_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    pub fn element_vertices(&self, k: usize) -> Vec<Point> {
        self.element(k).iter().map(|&i| self.vertices[i]).collect()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let pts = self.element_vertices(k);
        let n = pts.len() as f64;
        let mut c = [0.0; 3];
        for p in &pts {
            for d in 0..3 {
                c[d] += p[d] / n;
            }
        }
        c
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| max_edge(&self.element_vertices(k)))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn max_edge(pts: &[Point]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            m = m.max(norm3(&sub(&pts[i], &pts[j])));
        }
    }
    m
}
