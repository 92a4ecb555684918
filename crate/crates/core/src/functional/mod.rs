//! Energy `J_eps(v) = int eps^2/2 |grad v|^2 + 1/p |grad v|^p - F(v)` and its
//! first and second derivatives on P1 functions.
//!
//! Gradient terms are integrated exactly (the gradient is constant on each
//! element); terms involving `F`, `f` and `f'` use the mesh's 3-point
//! quadrature.

mod diffusion;
mod eigen;
mod function;

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use diffusion::{
    diffusion_flux, diffusion_jacobian, diffusion_jacobian_eigs, ellipticity_bounds_check,
    ellipticity_constant_lower, ellipticity_sandwich, jacobian_eigs_closed_form, ELLIPTICITY_UPPER,
};
pub use eigen::{lambda_1p, EigenOptions, SpectralEstimate};
pub use function::DiscreteFunction;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;
use crate::nonlinearity::Nonlinearity;

/// The three integrals making up the energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyParts {
    /// `int |grad v|^2`
    pub dirichlet2: f64,
    /// `int |grad v|^p`
    pub dirichletp: f64,
    /// `int F(v)`
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self, eps: f64, p: f64) -> f64 {
        0.5 * eps * eps * self.dirichlet2 + self.dirichletp / p - self.potential
    }
}

/// Assembled second derivative `D^2 J_eps(v)` on interior dofs.
#[derive(Debug, Clone)]
pub struct HessianMatrix {
    matrix: CsrMatrix,
}

impl HessianMatrix {
    pub fn csr(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    /// `D^2 J(v)(phi, psi)` for interior coefficient vectors.
    pub fn form(&self, phi: &DVector<f64>, psi: &DVector<f64>) -> f64 {
        self.matrix.quad_form(phi, psi)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.matrix.is_symmetric(tol)
    }

    /// Coordinate `(row, col, value)` text export.
    pub fn write_coordinate<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_coordinate(w)
    }
}

#[inline]
fn dot2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The energy functional on a fixed mesh with a fixed nonlinearity; `eps`
/// is supplied per call and only its square is used.
#[derive(Debug, Clone)]
pub struct Functional {
    mesh: Arc<Mesh>,
    nl: Nonlinearity,
}

impl Functional {
    pub fn new(mesh: Arc<Mesh>, nl: Nonlinearity) -> Self {
        Self { mesh, nl }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn p(&self) -> f64 {
        self.nl.p
    }

    fn check(&self, v: &DiscreteFunction) -> Result<()> {
        if v.same_mesh(&self.mesh) {
            Ok(())
        } else {
            Err(Error::IncompatibleFunction)
        }
    }

    pub fn energy(&self, _eps: f64, v: &DiscreteFunction) -> Result<EnergyParts> {
        self.check(v)?;
        Ok(self.energy_raw(v.coeffs()))
    }

    /// `J_eps(v)`.
    pub fn value(&self, eps: f64, v: &DiscreteFunction) -> Result<f64> {
        Ok(self.energy(eps, v)?.total(eps, self.nl.p))
    }

    pub(crate) fn energy_raw(&self, u: &[f64]) -> EnergyParts {
        let p = self.nl.p;
        let quad = self.mesh.quadrature();
        let mut parts = EnergyParts::default();
        for el in self.mesh.elements() {
            let g = el.gradient(u);
            let n2 = g[0] * g[0] + g[1] * g[1];
            parts.dirichlet2 += el.volume * n2;
            parts.dirichletp += el.volume * n2.powf(0.5 * p);
            let pot: f64 = quad
                .iter()
                .map(|qp| qp.weight * self.nl.F(el.value_at(u, qp)))
                .sum();
            parts.potential += el.volume * pot;
        }
        parts
    }

    /// Covector `DJ_eps(v)(phi_i)` over interior hat functions.
    pub fn gradient(&self, eps: f64, v: &DiscreteFunction) -> Result<DVector<f64>> {
        self.check(v)?;
        Ok(self.gradient_raw(eps, v.coeffs()))
    }

    pub(crate) fn gradient_raw(&self, eps: f64, u: &[f64]) -> DVector<f64> {
        let p = self.nl.p;
        let e2 = eps * eps;
        let quad = self.mesh.quadrature();
        let mut r = DVector::zeros(self.mesh.num_dofs());
        for el in self.mesh.elements() {
            let g = el.gradient(u);
            let n2 = g[0] * g[0] + g[1] * g[1];
            let coef = e2 + if n2 > 0.0 { n2.powf(0.5 * (p - 2.0)) } else { 0.0 };
            let fq: [f64; 3] = std::array::from_fn(|k| {
                quad.get(k)
                    .map_or(0.0, |qp| qp.weight * self.nl.f(el.value_at(u, qp)))
            });
            for (a, &va) in el.vertices.iter().enumerate() {
                let Some(i) = self.mesh.dof_of(va) else { continue };
                let stiff = coef * dot2(&g[..el.dim], el.shape_grad(a));
                let mass: f64 = quad.iter().zip(&fq).map(|(qp, fv)| fv * qp.bary[a]).sum();
                r[i] += el.volume * (stiff - mass);
            }
        }
        r
    }

    /// Nehari defect `gamma_eps(v) = DJ_eps(v) v`.
    pub fn gamma(&self, eps: f64, v: &DiscreteFunction) -> Result<f64> {
        self.check(v)?;
        let u = v.coeffs();
        let p = self.nl.p;
        let quad = self.mesh.quadrature();
        let mut acc = 0.0;
        for el in self.mesh.elements() {
            let g = el.gradient(u);
            let n2 = g[0] * g[0] + g[1] * g[1];
            let fv: f64 = quad
                .iter()
                .map(|qp| {
                    let x = el.value_at(u, qp);
                    qp.weight * self.nl.f(x) * x
                })
                .sum();
            acc += el.volume * (eps * eps * n2 + n2.powf(0.5 * p) - fv);
        }
        Ok(acc)
    }

    pub fn hessian(&self, eps: f64, v: &DiscreteFunction) -> Result<HessianMatrix> {
        self.check(v)?;
        let u = v.coeffs();
        let p = self.nl.p;
        let e2 = eps * eps;
        let quad = self.mesh.quadrature();
        let mut h = CsrMatrix::dof_pattern(&self.mesh);
        for el in self.mesh.elements() {
            let g = el.gradient(u);
            let n2 = g[0] * g[0] + g[1] * g[1];
            // Both gradient-dependent kernels vanish in the limit grad v -> 0.
            let (iso, aniso, dir) = if n2 > 0.0 {
                let n = n2.sqrt();
                (n.powf(p - 2.0), (p - 2.0) * n.powf(p - 2.0), [g[0] / n, g[1] / n])
            } else {
                (0.0, 0.0, [0.0, 0.0])
            };
            let fpq: [f64; 3] = std::array::from_fn(|k| {
                quad.get(k)
                    .map_or(0.0, |qp| qp.weight * self.nl.fprime(el.value_at(u, qp)))
            });
            for (a, &va) in el.vertices.iter().enumerate() {
                let Some(i) = self.mesh.dof_of(va) else { continue };
                let ga = el.shape_grad(a);
                let da = dot2(&dir[..el.dim], ga);
                for (b, &vb) in el.vertices.iter().enumerate() {
                    let Some(j) = self.mesh.dof_of(vb) else { continue };
                    let gb = el.shape_grad(b);
                    let db = dot2(&dir[..el.dim], gb);
                    let stiff = (e2 + iso) * dot2(ga, gb) + aniso * da * db;
                    let mass: f64 = quad
                        .iter()
                        .zip(&fpq)
                        .map(|(qp, w)| w * qp.bary[a] * qp.bary[b])
                        .sum();
                    h.add(i, j, el.volume * (stiff - mass));
                }
            }
        }
        Ok(HessianMatrix { matrix: h })
    }

    /// Diffusion part of the Hessian, `int DA_eps(grad v) grad phi . grad psi`,
    /// with the isotropic coefficient raised to at least `floor_rel` times its
    /// largest elementwise value so the matrix stays positive definite where
    /// `grad v` vanishes.
    pub fn diffusion_stiffness(&self, eps: f64, v: &DiscreteFunction, floor_rel: f64) -> Result<CsrMatrix> {
        self.check(v)?;
        let u = v.coeffs();
        let p = self.nl.p;
        let e2 = eps * eps;
        let grads: Vec<[f64; 2]> = self.mesh.elements().map(|el| el.gradient(u)).collect();
        let iso_max = grads
            .iter()
            .map(|g| e2 + (g[0] * g[0] + g[1] * g[1]).powf(0.5 * (p - 2.0)))
            .fold(0.0f64, f64::max);
        let floor = if iso_max > 0.0 { floor_rel * iso_max } else { 1.0 };
        let mut k = CsrMatrix::dof_pattern(&self.mesh);
        for (el, g) in self.mesh.elements().zip(&grads) {
            let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let (iso, aniso, dir) = if n > 0.0 {
                (n.powf(p - 2.0), (p - 2.0) * n.powf(p - 2.0), [g[0] / n, g[1] / n])
            } else {
                (0.0, 0.0, [0.0, 0.0])
            };
            let iso = (e2 + iso).max(floor);
            for (a, &va) in el.vertices.iter().enumerate() {
                let Some(i) = self.mesh.dof_of(va) else { continue };
                let ga = el.shape_grad(a);
                let da = dot2(&dir[..el.dim], ga);
                for (b, &vb) in el.vertices.iter().enumerate() {
                    let Some(j) = self.mesh.dof_of(vb) else { continue };
                    let gb = el.shape_grad(b);
                    let db = dot2(&dir[..el.dim], gb);
                    k.add(i, j, el.volume * (iso * dot2(ga, gb) + aniso * da * db));
                }
            }
        }
        Ok(k)
    }

    /// `int |grad v|^p`.
    pub fn dirichlet_p(&self, v: &DiscreteFunction) -> f64 {
        let p = self.nl.p;
        self.mesh
            .elements()
            .map(|el| {
                let g = el.gradient(v.coeffs());
                el.volume * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
            })
            .sum()
    }

    /// `int |v|^r` with the mesh quadrature.
    pub fn lebesgue_moment(&self, v: &DiscreteFunction, r: f64) -> f64 {
        lebesgue_moment(&self.mesh, v.coeffs(), r)
    }
}

pub(crate) fn lebesgue_moment(mesh: &Mesh, u: &[f64], r: f64) -> f64 {
    let quad = mesh.quadrature();
    mesh.elements()
        .map(|el| {
            el.volume
                * quad
                    .iter()
                    .map(|qp| qp.weight * el.value_at(u, qp).abs().powf(r))
                    .sum::<f64>()
        })
        .sum()
}
