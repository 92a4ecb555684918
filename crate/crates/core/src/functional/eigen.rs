//! First Dirichlet eigenvalue of the p-Laplacian by minimizing the
//! Rayleigh quotient `R(w) = int |grad w|^p / int |w|^p`.

use std::sync::Arc;

use nalgebra::DVector;

use super::{lebesgue_moment, DiscreteFunction};
use crate::error::{Error, Result};
use crate::linalg::LaplaceMetric;
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Stop when the dual norm of `DR` falls below `tol * R`.
    pub tol: f64,
    pub max_iter: usize,
    pub step0: f64,
    pub armijo_c: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            step0: 1.0,
            armijo_c: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub lambda: f64,
    /// Normalized to `int |w|^p = 1`.
    pub minimizer: DiscreteFunction,
    /// Dual norm of the quotient's derivative at the minimizer.
    pub residual: f64,
    pub iterations: usize,
}

fn grad_p(mesh: &Mesh, u: &[f64], p: f64) -> f64 {
    mesh.elements()
        .map(|el| {
            let g = el.gradient(u);
            el.volume * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
        })
        .sum()
}

/// Derivatives of `A = int |grad w|^p` and `B = int |w|^p` on interior dofs.
fn moment_derivatives(mesh: &Mesh, u: &[f64], p: f64) -> (DVector<f64>, DVector<f64>) {
    let quad = mesh.quadrature();
    let mut da = DVector::zeros(mesh.num_dofs());
    let mut db = DVector::zeros(mesh.num_dofs());
    for el in mesh.elements() {
        let g = el.gradient(u);
        let n2 = g[0] * g[0] + g[1] * g[1];
        let coef = if n2 > 0.0 { p * n2.powf(0.5 * (p - 2.0)) } else { 0.0 };
        for (a, &va) in el.vertices.iter().enumerate() {
            let Some(i) = mesh.dof_of(va) else { continue };
            let ga = el.shape_grad(a);
            let s: f64 = g[..el.dim].iter().zip(ga).map(|(x, y)| x * y).sum();
            da[i] += el.volume * coef * s;
            let m: f64 = quad
                .iter()
                .map(|qp| {
                    let w = el.value_at(u, qp);
                    qp.weight * p * w.abs().powf(p - 2.0) * w * qp.bary[a]
                })
                .sum();
            db[i] += el.volume * m;
        }
    }
    (da, db)
}

fn bump(mesh: &Arc<Mesh>) -> DiscreteFunction {
    let d = mesh.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for v in 0..mesh.num_vertices() {
        for (k, &x) in mesh.vertex(v).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    DiscreteFunction::interpolate(Arc::clone(mesh), |x| {
        x.iter()
            .enumerate()
            .map(|(k, &xk)| ((xk - lo[k]) * (hi[k] - xk)).max(0.0))
            .product()
    })
}

fn normalized(w: &DiscreteFunction, p: f64) -> DiscreteFunction {
    let b = lebesgue_moment(w.mesh(), w.coeffs(), p);
    w.scaled(b.powf(-1.0 / p))
}

/// Minimizes the p-Rayleigh quotient by `H^1_0`-preconditioned descent on
/// `L^p`-normalized iterates, with step doubling on success and halving on
/// Armijo failure.
pub fn lambda_1p(mesh: &Arc<Mesh>, p: f64, opts: &EigenOptions) -> Result<SpectralEstimate> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("eigenvalue exponent must be >= 2, got {p}")));
    }
    if mesh.num_dofs() == 0 {
        return Err(Error::InvalidDomain("mesh has no interior vertices".into()));
    }
    let metric = LaplaceMetric::new(mesh)?;
    let mut w = normalized(&bump(mesh), p);
    let mut lambda = grad_p(mesh, w.coeffs(), p);
    let mut eta = opts.step0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let (da, db) = moment_derivatives(mesh, w.coeffs(), p);
        // B = 1 on normalized iterates
        let grad = da - db * lambda;
        let dir = metric.riesz(&grad);
        residual = grad.dot(&dir).max(0.0).sqrt();
        if residual <= opts.tol * lambda {
            return Ok(SpectralEstimate {
                lambda,
                minimizer: w,
                residual,
                iterations: it,
            });
        }
        let x = w.interior();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = DiscreteFunction::from_interior(Arc::clone(mesh), &(&x - &dir * eta))?;
            let cand = normalized(&cand, p);
            let rc = grad_p(mesh, cand.coeffs(), p);
            let decrease = opts.armijo_c * eta * residual * residual;
            if rc.is_finite() && rc <= lambda - decrease {
                w = cand;
                lambda = rc;
                eta *= 2.0;
                accepted = true;
                break;
            }
            if decrease < 1e-14 * lambda {
                // below the rounding floor of R: the iterate cannot be improved
                return Ok(SpectralEstimate {
                    lambda,
                    minimizer: w,
                    residual,
                    iterations: it,
                });
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    log::warn!("lambda_1p: no convergence, residual {residual:.3e}");
    Err(Error::ConvergenceFailure {
        iterations: opts.max_iter,
        best: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn laplace_on_unit_interval() {
        let mesh = Arc::new(build_interval_mesh(256, 0.0, 1.0).unwrap());
        let est = lambda_1p(&mesh, 2.0, &EigenOptions::default()).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((est.lambda - pi2).abs() / pi2 < 5e-3, "{}", est.lambda);
        // quotient at the stored minimizer
        let a = grad_p(&mesh, est.minimizer.coeffs(), 2.0);
        let b = lebesgue_moment(&mesh, est.minimizer.coeffs(), 2.0);
        assert!((a / b - est.lambda).abs() < 1e-12 * est.lambda);
    }

    #[test]
    fn p_homogeneous_rescaling() {
        let p = 3.0;
        let unit = Arc::new(build_interval_mesh(128, 0.0, 1.0).unwrap());
        let wide = Arc::new(build_interval_mesh(128, 0.0, 2.0).unwrap());
        let l1 = lambda_1p(&unit, p, &EigenOptions::default()).unwrap().lambda;
        let l2 = lambda_1p(&wide, p, &EigenOptions::default()).unwrap().lambda;
        assert!((l2 - 0.5f64.powf(p) * l1).abs() < 0.01 * l2, "{l1} {l2}");
    }

    #[test]
    fn rejects_small_exponent() {
        let mesh = Arc::new(build_interval_mesh(16, 0.0, 1.0).unwrap());
        assert!(lambda_1p(&mesh, 1.5, &EigenOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_best() {
        let mesh = Arc::new(build_interval_mesh(64, 0.0, 1.0).unwrap());
        let opts = EigenOptions {
            max_iter: 1,
            tol: 1e-14,
            ..Default::default()
        };
        match lambda_1p(&mesh, 3.0, &opts) {
            Err(Error::ConvergenceFailure { best, .. }) => assert!(best > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
