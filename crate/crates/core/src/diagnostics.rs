//! Morse index, nullity and nodal-domain counts at computed solutions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{DiscreteFunction, Functional};
use crate::mesh::vertex_adjacency;
use crate::nehari::{negative_part, positive_part};
use crate::solver::NodalProblem;

pub const DEFAULT_TOL_EIG: f64 = 1e-9;
/// Default nodal threshold, relative to `||u||_inf`.
pub const DEFAULT_THRESHOLD_REL: f64 = 1e-8;

/// Signature of a symmetric matrix, with near-zero eigenvalues split off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
    pub min_eigenvalue: f64,
    pub spectral_radius: f64,
}

/// Eigenvalues below `-tol * max|lambda|` count as negative, those within
/// `tol * max|lambda|` of zero as null.
pub fn inertia(h: &DMatrix<f64>, tol: f64) -> Result<Inertia> {
    if !h.is_square() {
        return Err(Error::Diagnostic("matrix is not square".into()));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(Inertia {
            negative: 0,
            zero: 0,
            positive: 0,
            min_eigenvalue: 0.0,
            spectral_radius: 0.0,
        });
    }
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 100 * n.max(100)).ok_or_else(|| {
        let diag: Vec<String> = h.diagonal().iter().take(8).map(|d| format!("{d:.3e}")).collect();
        Error::Diagnostic(format!(
            "symmetric eigensolver did not converge (n = {n}, leading diagonal [{}])",
            diag.join(", ")
        ))
    })?;
    let ev = eig.eigenvalues;
    let radius = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = tol * radius;
    let negative = ev.iter().filter(|&&x| x < -cut).count();
    let zero = ev.iter().filter(|&&x| x.abs() <= cut).count();
    Ok(Inertia {
        negative,
        zero,
        positive: n - negative - zero,
        min_eigenvalue: ev.min(),
        spectral_radius: radius,
    })
}

/// Index part of the diagnostics: inertia of `D^2 J_eps(u)` on interior dofs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub morse_index: usize,
    pub nullity: usize,
    pub dimension: usize,
    pub min_eigenvalue: f64,
    pub spectral_radius: f64,
}

pub fn morse_index(func: &Functional, eps: f64, u: &DiscreteFunction, tol_eig: f64) -> Result<MorseReport> {
    let h = func.hessian(eps, u)?.to_dense();
    let inr = inertia(&h, tol_eig)?;
    Ok(MorseReport {
        morse_index: inr.negative,
        nullity: inr.zero,
        dimension: h.nrows(),
        min_eigenvalue: inr.min_eigenvalue,
        spectral_radius: inr.spectral_radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub morse_index: usize,
    pub nullity: usize,
    pub dimension: usize,
    pub nodal_domains: usize,
    /// `D^2 J(u)(u+, u+) < 0` and `D^2 J(u)(u-, u-) < 0`.
    pub neg_directions_check: (bool, bool),
}

/// Vertex sets of the nodal domains: components of `{u > threshold}` followed
/// by components of `{u < -threshold}`.
pub fn nodal_components(u: &DiscreteFunction, threshold: f64) -> Vec<Vec<usize>> {
    let graph = vertex_adjacency(u.mesh());
    let c = u.coeffs();
    let mut out = graph.components(|v| c[v] > threshold);
    out.extend(graph.components(|v| c[v] < -threshold));
    out
}

pub fn nodal_domains(u: &DiscreteFunction, threshold: f64) -> Result<usize> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidParameter("threshold must be nonnegative".into()));
    }
    let n = nodal_components(u, threshold).len();
    if n == 0 {
        return Err(Error::ZeroFunction);
    }
    Ok(n)
}

/// Absolute nodal threshold for `u` at the default relative level.
pub fn default_threshold(u: &DiscreteFunction) -> f64 {
    DEFAULT_THRESHOLD_REL * u.max_abs()
}

pub fn index_report(
    func: &Functional,
    eps: f64,
    u: &DiscreteFunction,
    tol_eig: f64,
    threshold: f64,
) -> Result<IndexReport> {
    let m = morse_index(func, eps, u, tol_eig)?;
    let h = func.hessian(eps, u)?;
    let pos = positive_part(u).interior();
    let neg = negative_part(u).interior();
    Ok(IndexReport {
        morse_index: m.morse_index,
        nullity: m.nullity,
        dimension: m.dimension,
        nodal_domains: nodal_domains(u, threshold)?,
        neg_directions_check: (h.form(&pos, &pos) < 0.0, h.form(&neg, &neg) < 0.0),
    })
}

/// Outcome of the index versus nodal-domain comparison at a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub nodal_domains: usize,
    pub morse_index: usize,
    /// `D^2 J(u)(1_C u, 1_C u)` per nodal domain `C`.
    pub diagonal: Vec<f64>,
    /// Largest `|D^2 J(u)(1_C u, 1_D u)| / sqrt(|d_C d_D|)` over `C != D`.
    pub max_cross_ratio: f64,
    pub cross_tol: f64,
}

impl Consistency {
    pub fn domains_bounded_by_index(&self) -> bool {
        self.nodal_domains <= self.morse_index
    }

    pub fn blocks_decouple(&self) -> bool {
        self.max_cross_ratio <= self.cross_tol
    }

    pub fn restrictions_negative(&self) -> bool {
        self.diagonal.iter().all(|&d| d < 0.0)
    }

    pub fn holds(&self) -> bool {
        self.domains_bounded_by_index() && self.blocks_decouple() && self.restrictions_negative()
    }
}

/// Relative tolerance on the restricted cross terms.
pub const CROSS_TOL: f64 = 1e-8;

/// Requires `u` to be near-critical: the dual residual must not exceed
/// `10 * tol_grad`.
pub fn index_nodal_consistency(
    problem: &NodalProblem,
    u: &DiscreteFunction,
    tol_eig: f64,
    threshold: f64,
    tol_grad: f64,
) -> Result<Consistency> {
    let residual = problem.residual(u)?;
    if residual > 10.0 * tol_grad {
        return Err(Error::Precondition(format!(
            "residual {residual:.3e} exceeds 10 * tol_grad = {:.3e}",
            10.0 * tol_grad
        )));
    }
    let func = problem.functional();
    let eps = problem.eps();
    let m = morse_index(func, eps, u, tol_eig)?;
    let comps = nodal_components(u, threshold);
    if comps.is_empty() {
        return Err(Error::ZeroFunction);
    }
    let h = func.hessian(eps, u)?;
    let restrictions: Vec<_> = comps
        .iter()
        .map(|c| {
            let mut coeffs = vec![0.0; u.coeffs().len()];
            for &v in c {
                coeffs[v] = u.coeffs()[v];
            }
            DiscreteFunction::from_coeffs(u.mesh().clone(), coeffs).map(|f| f.interior())
        })
        .collect::<Result<_>>()?;
    let diagonal: Vec<f64> = restrictions.iter().map(|v| h.form(v, v)).collect();
    let mut max_cross_ratio = 0.0f64;
    for i in 0..restrictions.len() {
        for j in i + 1..restrictions.len() {
            let scale = (diagonal[i] * diagonal[j]).abs().sqrt();
            let cross = h.form(&restrictions[i], &restrictions[j]).abs();
            let ratio = if scale > 0.0 { cross / scale } else { f64::INFINITY };
            max_cross_ratio = max_cross_ratio.max(ratio);
        }
    }
    Ok(Consistency {
        nodal_domains: comps.len(),
        morse_index: m.morse_index,
        diagonal,
        max_cross_ratio,
        cross_tol: CROSS_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rect_mesh};
    use crate::nonlinearity::Nonlinearity;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sine(n: usize, k: f64) -> DiscreteFunction {
        let mesh = Arc::new(build_interval_mesh(n, 0.0, 1.0).unwrap());
        DiscreteFunction::interpolate(mesh, |x| (k * PI * x[0]).sin())
    }

    #[test]
    fn diagonal_inertia() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 3.0, 4.0]));
        let i = inertia(&h, DEFAULT_TOL_EIG).unwrap();
        assert_eq!((i.negative, i.zero, i.positive), (1, 0, 3));
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1e-14, 3.0]));
        assert_eq!(inertia(&h, DEFAULT_TOL_EIG).unwrap().zero, 1);
    }

    #[test]
    fn congruence_preserves_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let d = DVector::from_fn(n, |i, _| if i < 4 { -1.0 - i as f64 } else { 1.0 + i as f64 });
        let h = DMatrix::from_diagonal(&d);
        for _ in 0..20 {
            let p = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.2..0.2));
            let c = p.transpose() * &h * &p;
            let c = (&c + c.transpose()) * 0.5;
            assert_eq!(inertia(&c, DEFAULT_TOL_EIG).unwrap().negative, 4);
        }
    }

    #[test]
    fn positive_definite_hessian_has_index_zero() {
        // near u = 0 the Hessian is the (positive) diffusion part
        let mesh = Arc::new(build_rect_mesh(6, 6, 1.0, 1.0).unwrap());
        let func = Functional::new(mesh.clone(), Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let u = DiscreteFunction::interpolate(mesh, |x| 1e-3 * (PI * x[0]).sin() * (PI * x[1]).sin());
        let r = morse_index(&func, 1.0, &u, DEFAULT_TOL_EIG).unwrap();
        assert_eq!(r.morse_index, 0);
        assert_eq!(r.nullity, 0);
    }

    #[test]
    fn sine_domains() {
        assert_eq!(nodal_domains(&sine(64, 2.0), 1e-10).unwrap(), 2);
        assert_eq!(nodal_domains(&sine(64, 3.0), 1e-10).unwrap(), 3);
        assert_eq!(nodal_domains(&sine(64, 1.0), 1e-10).unwrap(), 1);
    }

    #[test]
    fn zero_function_is_an_error() {
        let u = sine(16, 2.0).scaled(1e-12);
        assert!(matches!(nodal_domains(&u, 1e-6), Err(Error::ZeroFunction)));
    }

    #[test]
    fn precondition_on_residual() {
        let mesh = Arc::new(build_interval_mesh(32, 0.0, 1.0).unwrap());
        let func = Functional::new(mesh.clone(), Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let pb = NodalProblem::new(func, 0.0).unwrap();
        let u = DiscreteFunction::interpolate(mesh, |x| (2.0 * PI * x[0]).sin());
        assert!(matches!(
            index_nodal_consistency(&pb, &u, DEFAULT_TOL_EIG, 1e-10, 1e-8),
            Err(Error::Precondition(_))
        ));
    }
}
