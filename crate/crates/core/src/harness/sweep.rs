use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::record::{solve_once, RunRecord};
use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::functional::{lebesgue_moment, DiscreteFunction, Functional};
use crate::solver::{minimize_nodal, NodalProblem, SolveOptions};

/// Allowed size of a decrease in `alpha` before it counts as a violation.
pub const TOL_MONO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// Least-squares slope of `log(alpha_eps - alpha_0)` against `log eps`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    /// `max (alpha_eps - alpha_0) / eps^2` over the grid.
    pub c: f64,
    /// `alpha_eps <= alpha_0 + C eps^2` at every grid point.
    pub envelope_holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub records: Vec<RunRecord>,
    /// `alpha_{k+1} > alpha_k - TOL_MONO` for all consecutive solved points.
    pub monotone: bool,
    /// Indices `k` with `alpha_{k+1} <= alpha_k - TOL_MONO`.
    pub violations: Vec<usize>,
    pub fit: Option<QuadraticFit>,
    /// Discrete `W^{1,p}` distance to the `eps = 0` solution, up to sign.
    pub distances: Vec<Option<f64>>,
    /// Distance at the smallest positive `eps` below that at the largest.
    pub distances_decay: bool,
    /// Same Morse index at every solved grid point. Informational.
    pub index_constant: bool,
}

impl SweepReport {
    pub fn energies(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.energy()).collect()
    }
}

/// Whether `alpha` has no decrease of size `tol` or more; `None` entries are
/// skipped.
pub fn energies_increasing(alpha: &[Option<f64>], tol: f64) -> (bool, Vec<usize>) {
    let solved: Vec<(usize, f64)> = alpha.iter().enumerate().filter_map(|(i, a)| a.map(|a| (i, a))).collect();
    let violations: Vec<usize> = solved
        .windows(2)
        .filter(|w| w[1].1 <= w[0].1 - tol)
        .map(|w| w[0].0)
        .collect();
    (violations.is_empty(), violations)
}

/// Fit of `alpha_eps - alpha_0 ~ C eps^p` on the positive grid points whose
/// gap is positive. `None` with fewer than two such points.
pub fn fit_quadratic_gap(eps: &[f64], alpha: &[f64], alpha0: f64) -> Option<QuadraticFit> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(alpha)
        .filter(|(&e, &a)| e > 0.0 && a - alpha0 > 0.0)
        .map(|(&e, &a)| (e.ln(), (a - alpha0).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fit_residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let c = eps
        .iter()
        .zip(alpha)
        .filter(|(&e, _)| e > 0.0)
        .map(|(&e, &a)| (a - alpha0) / (e * e))
        .fold(f64::NEG_INFINITY, f64::max);
    let envelope_holds = eps
        .iter()
        .zip(alpha)
        .all(|(&e, &a)| a <= alpha0 + c * e * e + 1e-14 * alpha0.abs().max(1.0));
    Some(QuadraticFit {
        slope,
        intercept,
        fit_residual,
        c,
        envelope_holds,
    })
}

fn w1p_distance(func: &Functional, a: &DiscreteFunction, b: &DiscreteFunction) -> f64 {
    let p = func.p();
    let d = |s: f64| {
        let diff = a.combine(1.0, b, -s);
        (func.dirichlet_p(&diff) + lebesgue_moment(diff.mesh(), diff.coeffs(), p)).powf(1.0 / p)
    };
    d(1.0).min(d(-1.0))
}

/// `eps = 0` by multi-start, then each later point warm-started from the last
/// solved one. A failed point is recorded and skipped for warm starting.
pub fn sweep_epsilon(base: &ProblemSpec, eps_grid: &[f64], opts: &SolveOptions) -> Result<SweepReport> {
    if eps_grid.first() != Some(&0.0) {
        return Err(Error::InvalidParameter("eps grid must start at 0".into()));
    }
    if eps_grid.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
        return Err(Error::InvalidParameter("eps grid must be strictly increasing".into()));
    }
    if eps_grid.last().is_some_and(|&e| e.is_nan() || e > 1.0) {
        return Err(Error::InvalidParameter("eps grid must not exceed 1".into()));
    }
    let first = solve_once(&base.with_eps(0.0), opts)?;
    let func = base.functional()?;
    let mut warm: Option<DiscreteFunction> = first.solution_function().ok().filter(|_| first.result.is_some());
    let u0 = warm.clone();
    let mut records = vec![first];
    for &eps in &eps_grid[1..] {
        let spec = base.with_eps(eps);
        let started = Instant::now();
        let problem = NodalProblem::new(func.clone(), eps)?;
        let rec = match &warm {
            Some(init) => match minimize_nodal(&problem, init, opts) {
                Ok(sol) => {
                    let mut rec = RunRecord::from_solution(&spec, &problem, &sol, opts, started);
                    rec.meta.warm_start = true;
                    rec
                }
                Err(e) => RunRecord::failed(&spec, opts, &e, started),
            },
            None => solve_once(&spec, opts)?,
        };
        if rec.is_ok() {
            warm = Some(rec.solution_function()?);
        } else {
            log::warn!("sweep point eps = {eps} did not converge: {:?}", rec.meta.error);
        }
        records.push(rec);
    }

    let alpha: Vec<Option<f64>> = records.iter().map(|r| r.is_ok().then(|| r.energy()).flatten()).collect();
    let (monotone, violations) = energies_increasing(&alpha, TOL_MONO);
    let fit = alpha[0].and_then(|a0| {
        let (e, a): (Vec<f64>, Vec<f64>) = eps_grid
            .iter()
            .zip(&alpha)
            .filter_map(|(&e, a)| a.map(|a| (e, a)))
            .unzip();
        fit_quadratic_gap(&e, &a, a0)
    });
    let distances: Vec<Option<f64>> = records
        .iter()
        .map(|r| match (&u0, r.is_ok()) {
            (Some(u0), true) => r.solution_function().ok().map(|u| w1p_distance(&func, &u, u0)),
            _ => None,
        })
        .collect();
    let positive: Vec<f64> = distances[1..].iter().flatten().copied().collect();
    let distances_decay = positive.len() >= 2 && positive[0] < positive[positive.len() - 1];
    let indices: Vec<usize> = records.iter().filter_map(|r| r.result.as_ref().map(|x| x.morse_index)).collect();
    let index_constant = !indices.is_empty() && indices.iter().all(|&m| m == indices[0]);

    Ok(SweepReport {
        eps: eps_grid.to_vec(),
        records,
        monotone,
        violations,
        fit,
        distances,
        distances_decay,
        index_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_decrease_is_flagged() {
        let alpha = [Some(1.0), Some(1.1), Some(1.05), Some(1.2)];
        let (ok, v) = energies_increasing(&alpha, TOL_MONO);
        assert!(!ok);
        assert_eq!(v, vec![1]);
        assert!(energies_increasing(&[Some(1.0), None, Some(1.5)], TOL_MONO).0);
    }

    #[test]
    fn equal_values_within_tolerance_pass() {
        assert!(energies_increasing(&[Some(1.0), Some(1.0 - 1e-12)], TOL_MONO).0);
        assert!(!energies_increasing(&[Some(1.0), Some(1.0 - 1e-9)], TOL_MONO).0);
    }

    #[test]
    fn exact_quadratic_fit() {
        let eps = [0.0, 0.05, 0.1, 0.2, 0.4];
        let alpha: Vec<f64> = eps.iter().map(|e| 2.0 + 3.0 * e * e).collect();
        let fit = fit_quadratic_gap(&eps, &alpha, 2.0).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-10);
        assert!((fit.c - 3.0).abs() < 1e-10);
        assert!(fit.envelope_holds);
    }

    #[test]
    fn grid_must_start_at_zero() {
        let spec = ProblemSpec::canonical(16, 0.0);
        assert!(sweep_epsilon(&spec, &[0.1, 0.2], &SolveOptions::default()).is_err());
        assert!(sweep_epsilon(&spec, &[0.0, 0.2, 0.1], &SolveOptions::default()).is_err());
    }
}
