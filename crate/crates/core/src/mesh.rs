//! Simplicial meshes of intervals and rectangles with P1 gradient operators.
//!
//! Every element stores the constant gradients of its barycentric
//! coordinates, so the gradient of a piecewise-linear function on an element
//! is `sum_k u[v_k] * grad_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quadrature point given in barycentric coordinates with a weight
/// relative to the element volume (weights sum to one).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const G3_A: f64 = 0.112_701_665_379_258_31; // (1 - sqrt(3/5)) / 2
const G3_B: f64 = 0.887_298_334_620_741_7;

/// 3-point Gauss rule on a segment.
pub const GAUSS_3_SEGMENT: [QuadPoint; 3] = [
    QuadPoint {
        bary: [1.0 - G3_A, G3_A, 0.0],
        weight: 5.0 / 18.0,
    },
    QuadPoint {
        bary: [0.5, 0.5, 0.0],
        weight: 8.0 / 18.0,
    },
    QuadPoint {
        bary: [1.0 - G3_B, G3_B, 0.0],
        weight: 5.0 / 18.0,
    },
];

/// 3-point interior rule on a triangle (degree 2).
pub const BARY_3_TRIANGLE: [QuadPoint; 3] = [
    QuadPoint {
        bary: [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        weight: 1.0 / 3.0,
    },
    QuadPoint {
        bary: [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        weight: 1.0 / 3.0,
    },
    QuadPoint {
        bary: [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        weight: 1.0 / 3.0,
    },
];

/// Borrowed view of one element.
#[derive(Debug, Clone, Copy)]
pub struct Element<'a> {
    pub vertices: &'a [usize],
    pub volume: f64,
    /// `dim` components per local vertex, vertex-major.
    pub shape_grads: &'a [f64],
    pub dim: usize,
}

impl Element<'_> {
    pub fn shape_grad(&self, k: usize) -> &[f64] {
        &self.shape_grads[k * self.dim..(k + 1) * self.dim]
    }

    /// Constant gradient of the P1 function with vertex values `coeffs`.
    pub fn gradient(&self, coeffs: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, &v) in self.vertices.iter().enumerate() {
            let c = coeffs[v];
            for (gd, sd) in g.iter_mut().zip(self.shape_grad(k)) {
                *gd += c * sd;
            }
        }
        g
    }

    /// Value at a quadrature point of the P1 function with vertex values `coeffs`.
    pub fn value_at(&self, coeffs: &[f64], q: &QuadPoint) -> f64 {
        self.vertices
            .iter()
            .zip(q.bary.iter())
            .map(|(&v, &b)| coeffs[v] * b)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    boundary: Vec<bool>,
    volumes: Vec<f64>,
    shape_grads: Vec<f64>,
    interior: Vec<usize>,
    dof_of: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw connectivity, computing volumes and gradient
    /// operators. Degenerate or inverted-volume elements are rejected.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        elements: Vec<usize>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDomain(format!("unsupported dimension {dim}")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidDomain("coordinate list length".into()));
        }
        let nv = coords.len() / dim;
        let stride = dim + 1;
        if !elements.len().is_multiple_of(stride) || boundary.len() != nv {
            return Err(Error::InvalidDomain("connectivity sizes disagree".into()));
        }
        if elements.iter().any(|&v| v >= nv) {
            return Err(Error::InvalidDomain("element references missing vertex".into()));
        }
        let ne = elements.len() / stride;
        let mut volumes = Vec::with_capacity(ne);
        let mut shape_grads = Vec::with_capacity(ne * stride * dim);
        for el in elements.chunks(stride) {
            let x = |v: usize, d: usize| coords[v * dim + d];
            if dim == 1 {
                let h = x(el[1], 0) - x(el[0], 0);
                if h.abs() <= 0.0 {
                    return Err(Error::InvalidDomain("zero-length element".into()));
                }
                volumes.push(h.abs());
                shape_grads.extend_from_slice(&[-1.0 / h, 1.0 / h]);
            } else {
                let (e1x, e1y) = (x(el[1], 0) - x(el[0], 0), x(el[1], 1) - x(el[0], 1));
                let (e2x, e2y) = (x(el[2], 0) - x(el[0], 0), x(el[2], 1) - x(el[0], 1));
                let det = e1x * e2y - e1y * e2x;
                if det.abs() <= 0.0 {
                    return Err(Error::InvalidDomain("degenerate triangle".into()));
                }
                volumes.push(0.5 * det.abs());
                // Rows of the inverse Jacobian are the gradients of lambda_1, lambda_2.
                let g1 = [e2y / det, -e2x / det];
                let g2 = [-e1y / det, e1x / det];
                let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
                shape_grads.extend_from_slice(&[g0[0], g0[1], g1[0], g1[1], g2[0], g2[1]]);
            }
        }
        let mut dof_of = vec![None; nv];
        let mut interior = Vec::new();
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                dof_of[v] = Some(interior.len());
                interior.push(v);
            }
        }
        Ok(Self {
            dim,
            coords,
            elements,
            boundary,
            volumes,
            shape_grads,
            interior,
            dof_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_elements(&self) -> usize {
        self.volumes.len()
    }

    /// Number of interior (free) vertices.
    pub fn num_dofs(&self) -> usize {
        self.interior.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn element_volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Interior vertex ids, in dof order.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    pub fn dof_of(&self, v: usize) -> Option<usize> {
        self.dof_of[v]
    }

    pub fn element(&self, e: usize) -> Element<'_> {
        let stride = self.dim + 1;
        Element {
            vertices: &self.elements[e * stride..(e + 1) * stride],
            volume: self.volumes[e],
            shape_grads: &self.shape_grads[e * stride * self.dim..(e + 1) * stride * self.dim],
            dim: self.dim,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element<'_>> + '_ {
        (0..self.num_elements()).map(move |e| self.element(e))
    }

    pub fn measure(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Per-element quadrature used for all nonlinear mass-type integrals.
    pub fn quadrature(&self) -> &'static [QuadPoint] {
        if self.dim == 1 {
            &GAUSS_3_SEGMENT
        } else {
            &BARY_3_TRIANGLE
        }
    }

    /// Largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        self.elements()
            .map(|el| {
                let mut h: f64 = 0.0;
                for (i, &a) in el.vertices.iter().enumerate() {
                    for &b in &el.vertices[i + 1..] {
                        let d: f64 = self
                            .vertex(a)
                            .iter()
                            .zip(self.vertex(b))
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum();
                        h = h.max(d.sqrt());
                    }
                }
                h
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            dim: self.dim,
            vertices: self.coords.chunks(self.dim).map(<[f64]>::to_vec).collect(),
            elements: self.elements.chunks(self.dim + 1).map(<[usize]>::to_vec).collect(),
            boundary: self.boundary.clone(),
        }
    }

    pub fn from_json(json: &MeshJson) -> Result<Self> {
        Self::from_parts(
            json.dim,
            json.vertices.concat(),
            json.elements.concat(),
            json.boundary.clone(),
        )
    }
}

/// Serialized mesh layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshJson {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub elements: Vec<Vec<usize>>,
    pub boundary: Vec<bool>,
}

/// Uniform partition of `[a, b]` into `n` segments.
pub fn build_interval_mesh(n: usize, a: f64, b: f64) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidResolution(n));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
    }
    let h = (b - a) / n as f64;
    let coords: Vec<f64> = (0..=n)
        .map(|i| if i == n { b } else { a + h * i as f64 })
        .collect();
    let elements: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
    let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
    Mesh::from_parts(1, coords, elements, boundary)
}

/// Structured triangulation of `[0, width] x [0, height]`; every cell is cut
/// along its lower-left to upper-right diagonal.
pub fn build_rect_mesh(nx: usize, ny: usize, width: f64, height: f64) -> Result<Mesh> {
    if nx < 2 {
        return Err(Error::InvalidResolution(nx));
    }
    if ny < 2 {
        return Err(Error::InvalidResolution(ny));
    }
    if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
        return Err(Error::InvalidDomain(format!(
            "rectangle extents must be positive, got {width} x {height}"
        )));
    }
    let (hx, hy) = (width / nx as f64, height / ny as f64);
    let row = nx + 1;
    let mut coords = Vec::with_capacity(2 * row * (ny + 1));
    let mut boundary = Vec::with_capacity(row * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { width } else { hx * i as f64 };
            let y = if j == ny { height } else { hy * j as f64 };
            coords.extend_from_slice(&[x, y]);
            boundary.push(i == 0 || i == nx || j == 0 || j == ny);
        }
    }
    let mut elements = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = j * row + i;
            let v10 = v00 + 1;
            let v01 = v00 + row;
            let v11 = v01 + 1;
            elements.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    Mesh::from_parts(2, coords, elements, boundary)
}

/// Vertex neighbor lists induced by shared elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors
            .iter()
            .enumerate()
            .all(|(i, nb)| nb.iter().all(|&j| self.neighbors[j].binary_search(&i).is_ok()))
    }

    /// Connected components of the subgraph induced by `keep`, each as a
    /// sorted vertex list, ordered by smallest vertex.
    pub fn components<F: Fn(usize) -> bool>(&self, keep: F) -> Vec<Vec<usize>> {
        let n = self.neighbors.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            if seen[start] || !keep(start) {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in &self.neighbors[v] {
                    if !seen[w] && keep(w) {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components(|_| true).len() <= 1
    }
}

pub fn vertex_adjacency(mesh: &Mesh) -> AdjacencyGraph {
    let mut neighbors = vec![Vec::new(); mesh.num_vertices()];
    for el in mesh.elements() {
        for &a in el.vertices {
            for &b in el.vertices {
                if a != b {
                    neighbors[a].push(b);
                }
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    AdjacencyGraph { neighbors }
}
