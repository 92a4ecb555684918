//! The diffusion field `A_eps(z) = (eps^2 + |z|^{p-2}) z` and its Jacobian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Upper ellipticity constant used by [`ellipticity_bounds_check`].
pub const ELLIPTICITY_UPPER: f64 = 2.0;

pub fn diffusion_flux(eps: f64, p: f64, z: &[f64]) -> DVector<f64> {
    let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let coef = eps * eps + if n > 0.0 { n.powf(p - 2.0) } else { 0.0 };
    DVector::from_iterator(z.len(), z.iter().map(|x| coef * x))
}

/// `DA_eps(z) = (eps^2 + |z|^{p-2}) I + (p-2) |z|^{p-4} z z^T`, and
/// `eps^2 I` at `z = 0`.
pub fn diffusion_jacobian(eps: f64, p: f64, z: &[f64]) -> DMatrix<f64> {
    let d = z.len();
    let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e2 = eps * eps;
    if n == 0.0 {
        return DMatrix::identity(d, d) * e2;
    }
    let iso = e2 + n.powf(p - 2.0);
    let rank1 = (p - 2.0) * n.powf(p - 4.0);
    DMatrix::from_fn(d, d, |i, j| {
        let delta = if i == j { iso } else { 0.0 };
        delta + rank1 * z[i] * z[j]
    })
}

/// Eigenvalues of [`diffusion_jacobian`] from a numeric symmetric
/// eigensolver, ascending.
pub fn diffusion_jacobian_eigs(eps: f64, p: f64, z: &[f64]) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(diffusion_jacobian(eps, p, z))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `eps^2 + |z|^{p-2}` with multiplicity `N - 1` and `eps^2 + (p-1)|z|^{p-2}`
/// once, ascending.
pub fn jacobian_eigs_closed_form(eps: f64, p: f64, z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e2 = eps * eps;
    let s = if n > 0.0 { n.powf(p - 2.0) } else { 0.0 };
    let mut ev = vec![e2 + s; d.saturating_sub(1)];
    ev.push(e2 + (p - 1.0) * s);
    ev.sort_by(f64::total_cmp);
    ev
}

/// `c_beta` with `beta = p - 2`: 1 on `[0, 1)` and `2^{1 - beta}` beyond.
pub fn ellipticity_constant_lower(p: f64) -> f64 {
    let beta = p - 2.0;
    if beta < 1.0 {
        1.0
    } else {
        2f64.powf(1.0 - beta)
    }
}

/// Whether
/// `c_{p-2} (k + |z|)^{p-2} |zeta|^2 <= DA_eps(z) zeta . zeta <= 2 (k + |z|)^{p-2} |zeta|^2`
/// with `k = |eps|^{2/(p-2)}`. Comparisons carry a `1e-12` relative slack.
pub fn ellipticity_bounds_check(eps: f64, p: f64, z: &[f64], zeta: &[f64]) -> bool {
    let (lo, mid, hi) = ellipticity_sandwich(eps, p, z, zeta);
    let slack = 1e-12 * hi.abs().max(mid.abs());
    lo <= mid + slack && mid <= hi + slack
}

/// `(lower, DA_eps(z) zeta . zeta, upper)` of the ellipticity sandwich.
pub fn ellipticity_sandwich(eps: f64, p: f64, z: &[f64], zeta: &[f64]) -> (f64, f64, f64) {
    let jac = diffusion_jacobian(eps, p, z);
    let zv = DVector::from_column_slice(zeta);
    let mid = zv.dot(&(&jac * &zv));
    let k = eps.abs().powf(2.0 / (p - 2.0));
    let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = (k + n).powf(p - 2.0) * zv.norm_squared();
    (ellipticity_constant_lower(p) * scale, mid, ELLIPTICITY_UPPER * scale)
}
