//! Minimization of `J_eps` over the nodal Nehari set.
//!
//! Each iterate is projected onto the nodal set, the energy gradient is taken
//! at the projected point and mapped through the Dirichlet-Laplacian metric,
//! and an Armijo line search is run on the projected energy
//! `v -> max_{t,s} J(t v+ + s v-)`.
//!
//! Two metrics are available. [`DescentMetric::Laplace`] uses the fixed
//! Dirichlet stiffness matrix with Barzilai-Borwein trial steps.
//! [`DescentMetric::Diffusion`] re-assembles the diffusion part of the Hessian
//! at every iterate; it is the default because the Laplace metric is badly
//! conditioned against the degenerate weight `|grad u|^{p-2}`. The residual is
//! measured in the Laplace dual norm either way.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{DiscreteFunction, Functional};
use crate::linalg::{BandCholesky, LaplaceMetric};
use crate::mesh::Mesh;
use crate::nehari::{negative_part, positive_part, project_nodal, NodalProjection};

/// Sign parts whose largest coefficient falls below this are treated as
/// vanished.
pub const COLLAPSE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescentMetric {
    Laplace,
    #[default]
    Diffusion,
}

/// Relative floor on the isotropic weight of the diffusion metric.
pub const METRIC_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_grad: f64,
    pub tol_proj: f64,
    pub max_iter: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub n_starts: usize,
    pub seed: u64,
    #[serde(default)]
    pub metric: DescentMetric,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-8,
            tol_proj: 1e-10,
            max_iter: 10_000,
            step0: 1.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            n_starts: 8,
            seed: 0,
            metric: DescentMetric::Diffusion,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_grad, self.tol_proj, self.step0, self.armijo_c]
            .iter()
            .all(|&x| x > 0.0 && x.is_finite());
        if !positive || self.max_iter == 0 || self.n_starts == 0 {
            return Err(Error::InvalidParameter("solver options must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtrack must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One `J_eps` instance: functional, `eps`, and the descent metric.
#[derive(Debug, Clone)]
pub struct NodalProblem {
    functional: Functional,
    eps: f64,
    metric: LaplaceMetric,
}

impl NodalProblem {
    pub fn new(functional: Functional, eps: f64) -> Result<Self> {
        if !eps.is_finite() {
            return Err(Error::InvalidParameter("eps must be finite".into()));
        }
        let metric = LaplaceMetric::new(functional.mesh())?;
        Ok(Self {
            functional,
            eps: eps.abs(),
            metric,
        })
    }

    /// Same functional and metric at a different `eps`.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self {
            functional: self.functional.clone(),
            eps: eps.abs(),
            metric: self.metric.clone(),
        }
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.functional.mesh()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn metric(&self) -> &LaplaceMetric {
        &self.metric
    }

    /// `sqrt(r^T G^{-1} r)` for `r = DJ_eps(u)`.
    pub fn residual(&self, u: &DiscreteFunction) -> Result<f64> {
        let r = self.functional.gradient(self.eps, u)?;
        Ok(self.metric.dual_norm(&r))
    }
}

/// Per accepted iterate, after projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateStats {
    pub energy: f64,
    pub residual: f64,
    /// `int |grad w|^p`.
    pub dirichletp: f64,
    /// `(||grad w+||_p, ||grad w-||_p)`.
    pub part_norms: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: DiscreteFunction,
    pub energy: f64,
    pub residual: f64,
    pub proj_defects: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterateStats>,
}

fn part_norms(func: &Functional, w: &DiscreteFunction) -> (f64, f64) {
    let p = func.p();
    (
        func.dirichlet_p(&positive_part(w)).powf(1.0 / p),
        func.dirichlet_p(&negative_part(w)).powf(1.0 / p),
    )
}

struct Iterate {
    proj: NodalProjection,
    grad: DVector<f64>,
    /// Metric gradient `M^{-1} r`.
    dir: DVector<f64>,
    /// `r . M^{-1} r`.
    slope: f64,
    residual: f64,
}

impl Iterate {
    fn new(problem: &NodalProblem, proj: NodalProjection, metric: DescentMetric) -> Result<Self> {
        let grad = problem.functional.gradient(problem.eps, &proj.projected)?;
        let riesz = problem.metric.riesz(&grad);
        let residual = grad.dot(&riesz).max(0.0).sqrt();
        let dir = match metric {
            DescentMetric::Laplace => riesz,
            DescentMetric::Diffusion => {
                let k = problem
                    .functional
                    .diffusion_stiffness(problem.eps, &proj.projected, METRIC_FLOOR)?;
                BandCholesky::factor(&k)?.solve(&grad)
            }
        };
        let slope = grad.dot(&dir).max(0.0);
        Ok(Self {
            proj,
            grad,
            dir,
            slope,
            residual,
        })
    }

    fn stats(&self, func: &Functional) -> IterateStats {
        IterateStats {
            energy: self.proj.energy,
            residual: self.residual,
            dirichletp: func.dirichlet_p(&self.proj.projected),
            part_norms: part_norms(func, &self.proj.projected),
        }
    }
}

fn collapsed(w: &DiscreteFunction) -> bool {
    positive_part(w).max_abs() < COLLAPSE_FLOOR || negative_part(w).max_abs() < COLLAPSE_FLOOR
}

fn finish(it: Iterate, iterations: usize, converged: bool, history: Vec<IterateStats>) -> Solution {
    Solution {
        energy: it.proj.energy,
        residual: it.residual,
        proj_defects: it.proj.defects,
        u: it.proj.projected,
        iterations,
        converged,
        history,
    }
}

/// Projected descent on the nodal Nehari set from `init`.
pub fn minimize_nodal(
    problem: &NodalProblem,
    init: &DiscreteFunction,
    opts: &SolveOptions,
) -> Result<Solution> {
    opts.validate()?;
    let func = &problem.functional;
    let eps = problem.eps;
    if !init.same_mesh(func.mesh()) {
        return Err(Error::IncompatibleFunction);
    }
    if positive_part(init).is_zero() || negative_part(init).is_zero() {
        return Err(Error::InvalidInit);
    }
    let proj = project_nodal(func, eps, init, opts.tol_proj).map_err(|e| match e {
        Error::NotSignChanging { .. } => Error::InvalidInit,
        other => other,
    })?;
    let mut cur = Iterate::new(problem, proj, opts.metric)?;
    let mut history = vec![cur.stats(func)];
    let mut eta = opts.step0;
    let noise = |e: f64| 1e-13 * e.abs().max(1.0);

    for k in 0..opts.max_iter {
        if collapsed(&cur.proj.projected) {
            return Err(Error::DegenerateIterate { iteration: k });
        }
        if cur.residual <= opts.tol_grad {
            return Ok(finish(cur, k, true, history));
        }
        let x = cur.proj.projected.interior();
        let slope = cur.slope;
        let mut accepted = None;
        let mut trial = eta;
        for _ in 0..80 {
            let cand = DiscreteFunction::from_interior(Arc::clone(func.mesh()), &(&x - &cur.dir * trial))?;
            match project_nodal(func, eps, &cand, opts.tol_proj) {
                Ok(p) if p.energy.is_finite() => {
                    let armijo = p.energy <= cur.proj.energy - opts.armijo_c * trial * slope;
                    // Below the rounding floor of J the sufficient-decrease test
                    // is meaningless; accept steps that do not raise J beyond
                    // that floor and reduce the residual.
                    let floor = opts.armijo_c * trial * slope < noise(cur.proj.energy)
                        && p.energy <= cur.proj.energy + noise(cur.proj.energy);
                    if armijo {
                        accepted = Some(Iterate::new(problem, p, opts.metric)?);
                    } else if floor {
                        let next = Iterate::new(problem, p, opts.metric)?;
                        if next.residual < cur.residual {
                            accepted = Some(next);
                        }
                    }
                }
                Ok(_) | Err(Error::NotSignChanging { .. }) | Err(Error::ProjectionFailure(_)) => {}
                Err(e) => return Err(e),
            }
            if accepted.is_some() {
                break;
            }
            trial *= opts.backtrack;
        }
        let Some(next) = accepted else {
            log::debug!("line search stalled at iteration {k}, residual {:.3e}", cur.residual);
            return Ok(finish(cur, k, false, history));
        };
        eta = match opts.metric {
            DescentMetric::Laplace => {
                // Barzilai-Borwein step in the G metric
                let s = next.proj.projected.interior() - &x;
                let y = &next.grad - &cur.grad;
                let sy = s.dot(&y);
                let sgs = problem.metric.stiffness().quad_form(&s, &s);
                if sy > 0.0 && sgs > 0.0 {
                    (sgs / sy).clamp(1e-8 * opts.step0, 1e8 * opts.step0)
                } else {
                    (trial * 2.0).min(1e8 * opts.step0)
                }
            }
            DescentMetric::Diffusion => (trial * 2.0).min(opts.step0),
        };
        cur = next;
        history.push(cur.stats(func));
    }
    let converged = cur.residual <= opts.tol_grad;
    Ok(finish(cur, opts.max_iter, converged, history))
}

/// Deterministic sign-changing seed: `sin(2 pi x / L)` across the first axis,
/// times the first sine mode across the second axis in 2-D.
pub fn deterministic_seed(mesh: &Arc<Mesh>) -> DiscreteFunction {
    let (lo, hi) = bounding_box(mesh);
    let pi = std::f64::consts::PI;
    DiscreteFunction::interpolate(Arc::clone(mesh), |x| {
        let mut v = (2.0 * pi * (x[0] - lo[0]) / (hi[0] - lo[0])).sin();
        if x.len() > 1 {
            v *= (pi * (x[1] - lo[1]) / (hi[1] - lo[1])).sin();
        }
        v
    })
}

/// Random combination of low sine modes, resampled until sign-changing.
pub fn random_seed(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> DiscreteFunction {
    let (lo, hi) = bounding_box(mesh);
    let pi = std::f64::consts::PI;
    let modes = 4;
    loop {
        let c: Vec<f64> = (0..modes * modes)
            .map(|i| rng.gen_range(-1.0..1.0) / (1 + i % modes + i / modes) as f64)
            .collect();
        let v = DiscreteFunction::interpolate(Arc::clone(mesh), |x| {
            let sx: Vec<f64> = (1..=modes)
                .map(|k| (k as f64 * pi * (x[0] - lo[0]) / (hi[0] - lo[0])).sin())
                .collect();
            if x.len() == 1 {
                sx.iter().zip(&c).map(|(s, c)| s * c).sum()
            } else {
                let mut acc = 0.0;
                for l in 0..modes {
                    let sy = ((l + 1) as f64 * pi * (x[1] - lo[1]) / (hi[1] - lo[1])).sin();
                    for (k, s) in sx.iter().enumerate() {
                        acc += c[l * modes + k] * s * sy;
                    }
                }
                acc
            }
        });
        if !positive_part(&v).is_zero() && !negative_part(&v).is_zero() {
            return v;
        }
    }
}

fn bounding_box(mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
    let d = mesh.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for v in 0..mesh.num_vertices() {
        for (k, &x) in mesh.vertex(v).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    (lo, hi)
}

/// Initial guesses for `multi_start`: the deterministic seed first, then
/// `n - 1` random ones drawn from `seed`.
pub fn start_points(mesh: &Arc<Mesh>, n: usize, seed: u64) -> Vec<DiscreteFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    if n > 0 {
        out.push(deterministic_seed(mesh));
    }
    while out.len() < n {
        out.push(random_seed(mesh, &mut rng));
    }
    out
}

#[derive(Debug, Clone)]
pub struct StartOutcome {
    pub index: usize,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MultiStart {
    pub best: Solution,
    pub best_index: usize,
    pub starts: Vec<StartOutcome>,
}

/// Runs [`minimize_nodal`] from every start point (in parallel) and keeps the
/// converged solution of lowest energy; ties go to the lower start index.
pub fn multi_start(problem: &NodalProblem, opts: &SolveOptions) -> Result<MultiStart> {
    opts.validate()?;
    let inits = start_points(problem.mesh(), opts.n_starts, opts.seed);
    let runs: Vec<Result<Solution>> = inits
        .par_iter()
        .map(|init| minimize_nodal(problem, init, opts))
        .collect();
    let starts = runs
        .iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok(s) => StartOutcome {
                index,
                energy: Some(s.energy),
                residual: Some(s.residual),
                converged: s.converged,
                error: None,
            },
            Err(e) => StartOutcome {
                index,
                energy: None,
                residual: None,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pick = |want_converged: bool| {
        runs.iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().ok().map(|s| (i, s)))
            .filter(|(_, s)| !want_converged || s.converged)
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
            .map(|(i, s)| (i, s.clone()))
    };
    match pick(true) {
        Some((best_index, best)) => Ok(MultiStart {
            best,
            best_index,
            starts,
        }),
        None => Err(Error::AllStartsFailed {
            starts: opts.n_starts,
            best: pick(false).map(|(_, s)| Box::new(s)),
        }),
    }
}

/// Inner maximum of the min-max characterization of the least nodal level.
pub fn minmax_energy(func: &Functional, eps: f64, v: &DiscreteFunction, tol_proj: f64) -> Result<f64> {
    Ok(project_nodal(func, eps, v, tol_proj)?.energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;
    use crate::nonlinearity::Nonlinearity;

    fn problem(n: usize, eps: f64) -> NodalProblem {
        let mesh = Arc::new(build_interval_mesh(n, 0.0, 1.0).unwrap());
        NodalProblem::new(Functional::new(mesh, Nonlinearity::pure_power(3.0, 4.0).unwrap()), eps)
            .unwrap()
    }

    #[test]
    fn rejects_one_signed_init() {
        let pb = problem(32, 0.0);
        let v = DiscreteFunction::interpolate(Arc::clone(pb.mesh()), |x| x[0] * (1.0 - x[0]));
        assert!(matches!(
            minimize_nodal(&pb, &v, &SolveOptions::default()),
            Err(Error::InvalidInit)
        ));
    }

    #[test]
    fn options_validation() {
        let bad = SolveOptions {
            backtrack: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SolveOptions::default().validate().is_ok());
    }

    #[test]
    fn converges_and_is_fixed_point() {
        let pb = problem(64, 0.0);
        let opts = SolveOptions::default();
        let sol = minimize_nodal(&pb, &deterministic_seed(pb.mesh()), &opts).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        assert!(sol.residual <= opts.tol_grad);
        let again = minimize_nodal(&pb, &sol.u, &opts).unwrap();
        assert!(again.iterations <= 1);
        assert!((again.energy - sol.energy).abs() <= 1e-12 * sol.energy);
        // descent is monotone up to the rounding floor
        for w in sol.history.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
    }

    #[test]
    fn start_points_are_sign_changing_and_reproducible() {
        let mesh = Arc::new(build_interval_mesh(40, 0.0, 2.0).unwrap());
        let a = start_points(&mesh, 6, 17);
        let b = start_points(&mesh, 6, 17);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coeffs(), y.coeffs());
            assert!(!positive_part(x).is_zero() && !negative_part(x).is_zero());
        }
    }

    #[test]
    fn stalls_are_reported_unconverged() {
        let pb = problem(32, 0.1);
        let opts = SolveOptions {
            max_iter: 2,
            ..Default::default()
        };
        let sol = minimize_nodal(&pb, &deterministic_seed(pb.mesh()), &opts).unwrap();
        assert!(!sol.converged);
        assert!(sol.iterations <= 2);
    }
}
