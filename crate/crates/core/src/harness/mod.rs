//! Problem specifications, persisted run records, and epsilon sweeps.

mod csv_io;
mod record;
mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use csv_io::{export_csv, parse_csv, CsvRow};
pub use record::{
    index_stability, revalidate, solve_once, write_atomic, IndexStability, Revalidation, RunMeta,
    RunRecord, RunResult, RunStatus, SolutionData, SCHEMA_VERSION,
};
pub use sweep::{energies_increasing, fit_quadratic_gap, sweep_epsilon, QuadraticFit, SweepReport, TOL_MONO};

use crate::error::{Error, Result};
use crate::functional::{lambda_1p, EigenOptions, Functional};
use crate::mesh::{build_interval_mesh, build_rect_mesh, Mesh};
use crate::nonlinearity::{validate_hypotheses, HypothesisReport, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeshSpec {
    /// `(a, b)` split into `n` cells.
    Interval { n: usize, extents: [f64; 2] },
    /// `(0, w) x (0, h)` on an `nx` by `ny` grid.
    Rect { nx: usize, ny: usize, extents: [f64; 2] },
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshSpec::Interval { n, extents } => build_interval_mesh(n, extents[0], extents[1]),
            MeshSpec::Rect { nx, ny, extents } => build_rect_mesh(nx, ny, extents[0], extents[1]),
        }
    }

    /// Same domain with every cell split in two per direction.
    pub fn refined(&self) -> Self {
        match *self {
            MeshSpec::Interval { n, extents } => MeshSpec::Interval { n: 2 * n, extents },
            MeshSpec::Rect { nx, ny, extents } => MeshSpec::Rect {
                nx: 2 * nx,
                ny: 2 * ny,
                extents,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeshSpec::Interval { .. } => 1,
            MeshSpec::Rect { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mesh: MeshSpec,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub kappa: f64,
    pub eps: f64,
}

impl ProblemSpec {
    /// `eps` only enters squared, so it is stored as `|eps|`.
    pub fn new(mesh: MeshSpec, nl: Nonlinearity, eps: f64) -> Self {
        Self {
            mesh,
            p: nl.p,
            q: nl.q,
            mu: nl.mu,
            kappa: nl.kappa,
            eps: eps.abs(),
        }
    }

    /// `(0, 1)` with `n` cells, `f(t) = |t| t`, `p = 3`.
    pub fn canonical(n: usize, eps: f64) -> Self {
        Self {
            mesh: MeshSpec::Interval { n, extents: [0.0, 1.0] },
            p: 3.0,
            q: 4.0,
            mu: 0.0,
            kappa: 1.0,
            eps,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps: eps.abs(), ..*self }
    }

    pub fn refined(&self) -> Self {
        Self {
            mesh: self.mesh.refined(),
            ..*self
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::new(self.p, self.q, self.mu, self.kappa)
    }

    pub fn functional(&self) -> Result<Functional> {
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(Error::InvalidParameter(format!("eps must be finite and >= 0, got {}", self.eps)));
        }
        let nl = self.nonlinearity()?;
        Ok(Functional::new(Arc::new(self.mesh.build()?), nl))
    }

    /// Hypothesis report against the mesh's `lambda_{1,p}` estimate. The
    /// eigenvalue is only computed when `mu > 0`; otherwise the spectral
    /// condition holds trivially and the reported margin is `-mu`.
    pub fn hypotheses(&self) -> Result<(HypothesisReport, Option<f64>)> {
        let func = self.functional()?;
        let nl = *func.nonlinearity();
        if nl.mu > 0.0 {
            let est = lambda_1p(func.mesh(), nl.p, &EigenOptions::default())?;
            Ok((validate_hypotheses(&nl, est.lambda, self.mesh.dim()), Some(est.lambda)))
        } else {
            let mut rep = validate_hypotheses(&nl, 0.0, self.mesh.dim());
            rep.below_first_eigenvalue = true;
            rep.eigenvalue_margin = -nl.mu;
            Ok((rep, None))
        }
    }

    /// Errors unless every structural hypothesis holds.
    pub fn validate(&self) -> Result<HypothesisReport> {
        let (rep, _) = self.hypotheses()?;
        if !rep.all_pass() {
            return Err(Error::InvalidParameter(format!("hypotheses fail: {rep:?}")));
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_spec_json_shape() {
        let s = serde_json::to_value(MeshSpec::Interval { n: 8, extents: [0.0, 1.0] }).unwrap();
        assert_eq!(s["kind"], "interval");
        assert_eq!(s["n"], 8);
        let r = serde_json::to_value(MeshSpec::Rect { nx: 3, ny: 4, extents: [1.0, 2.0] }).unwrap();
        assert_eq!(r["kind"], "rect");
        assert_eq!(r["ny"], 4);
    }

    #[test]
    fn canonical_spec_passes_hypotheses() {
        assert!(ProblemSpec::canonical(32, 0.0).validate().is_ok());
    }

    #[test]
    fn large_mu_fails_spectral_condition() {
        let spec = ProblemSpec {
            mu: 1e3,
            ..ProblemSpec::canonical(32, 0.0)
        };
        let (rep, lambda) = spec.hypotheses().unwrap();
        assert!(!rep.below_first_eigenvalue);
        assert!(lambda.unwrap() < 1e3);
    }

    #[test]
    fn refinement_doubles() {
        let s = ProblemSpec::canonical(64, 0.1).refined();
        assert_eq!(s.mesh, MeshSpec::Interval { n: 128, extents: [0.0, 1.0] });
    }
}
