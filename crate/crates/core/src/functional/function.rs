use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Piecewise-linear function vanishing on the boundary, stored by vertex.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let coeffs = vec![0.0; mesh.num_vertices()];
        Self { mesh, coeffs }
    }

    /// Interpolates `f` at the vertices; boundary values are forced to zero.
    pub fn interpolate<F: Fn(&[f64]) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let coeffs = (0..mesh.num_vertices())
            .map(|v| if mesh.is_boundary(v) { 0.0 } else { f(mesh.vertex(v)) })
            .collect();
        Self { mesh, coeffs }
    }

    /// Per-vertex coefficients; boundary entries must be exactly zero.
    pub fn from_coeffs(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.num_vertices() {
            return Err(Error::IncompatibleFunction);
        }
        if coeffs
            .iter()
            .enumerate()
            .any(|(v, &c)| mesh.is_boundary(v) && c != 0.0)
        {
            return Err(Error::InvalidParameter(
                "boundary coefficients must vanish".into(),
            ));
        }
        Ok(Self { mesh, coeffs })
    }

    pub fn from_interior(mesh: Arc<Mesh>, x: &DVector<f64>) -> Result<Self> {
        if x.len() != mesh.num_dofs() {
            return Err(Error::IncompatibleFunction);
        }
        let mut coeffs = vec![0.0; mesh.num_vertices()];
        for (&v, &c) in mesh.interior_vertices().iter().zip(x.iter()) {
            coeffs[v] = c;
        }
        Ok(Self { mesh, coeffs })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interior(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.mesh.num_dofs(),
            self.mesh.interior_vertices().iter().map(|&v| self.coeffs[v]),
        )
    }

    pub fn same_mesh(&self, mesh: &Arc<Mesh>) -> bool {
        Arc::ptr_eq(&self.mesh, mesh) || *self.mesh == **mesh
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(v, &x)| if self.mesh.is_boundary(v) { 0.0 } else { f(x) })
            .collect();
        Self {
            mesh: Arc::clone(&self.mesh),
            coeffs,
        }
    }

    /// `a * self + b * other`, coefficientwise.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self {
            mesh: Arc::clone(&self.mesh),
            coeffs,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&x| x == 0.0)
    }
}
