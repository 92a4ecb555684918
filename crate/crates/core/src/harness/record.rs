use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::diagnostics::{default_threshold, index_report, morse_index, DEFAULT_TOL_EIG};
use crate::error::{Error, Result};
use crate::functional::DiscreteFunction;
use crate::solver::{multi_start, NodalProblem, Solution, SolveOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Unconverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub morse_index: usize,
    pub nullity: usize,
    pub nodal_domains: usize,
    pub neg_directions_check: (bool, bool),
    pub proj_defects: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionData {
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub wall_time_s: f64,
    pub options: SolveOptions,
    pub tol_eig: f64,
    pub threshold: f64,
    #[serde(default)]
    pub best_start: Option<usize>,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub status: RunStatus,
    pub problem: ProblemSpec,
    pub result: Option<RunResult>,
    pub solution: Option<SolutionData>,
    pub meta: RunMeta,
}

impl RunRecord {
    pub(crate) fn from_solution(
        spec: &ProblemSpec,
        problem: &NodalProblem,
        sol: &Solution,
        opts: &SolveOptions,
        started: Instant,
    ) -> Self {
        let threshold = default_threshold(&sol.u);
        let mut meta = RunMeta {
            seed: opts.seed,
            wall_time_s: 0.0,
            options: *opts,
            tol_eig: DEFAULT_TOL_EIG,
            threshold,
            best_start: None,
            warm_start: false,
            error: None,
        };
        let solution = Some(SolutionData {
            coeffs: sol.u.coeffs().to_vec(),
        });
        let (status, result) = match index_report(problem.functional(), problem.eps(), &sol.u, DEFAULT_TOL_EIG, threshold) {
            Ok(ix) => (
                if sol.converged { RunStatus::Ok } else { RunStatus::Unconverged },
                Some(RunResult {
                    energy: sol.energy,
                    residual: sol.residual,
                    iterations: sol.iterations,
                    morse_index: ix.morse_index,
                    nullity: ix.nullity,
                    nodal_domains: ix.nodal_domains,
                    neg_directions_check: ix.neg_directions_check,
                    proj_defects: sol.proj_defects,
                }),
            ),
            Err(e) => {
                meta.error = Some(e.to_string());
                (RunStatus::Failed, None)
            }
        };
        meta.wall_time_s = started.elapsed().as_secs_f64();
        RunRecord {
            schema_version: SCHEMA_VERSION,
            status,
            problem: *spec,
            result,
            solution,
            meta,
        }
    }

    pub(crate) fn failed(spec: &ProblemSpec, opts: &SolveOptions, err: &Error, started: Instant) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            status: RunStatus::Failed,
            problem: *spec,
            result: None,
            solution: None,
            meta: RunMeta {
                seed: opts.seed,
                wall_time_s: started.elapsed().as_secs_f64(),
                options: *opts,
                tol_eig: DEFAULT_TOL_EIG,
                threshold: 0.0,
                best_start: None,
                warm_start: false,
                error: Some(err.to_string()),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn energy(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.energy)
    }

    /// Stored coefficients as a function on a freshly built mesh.
    pub fn solution_function(&self) -> Result<DiscreteFunction> {
        let data = self
            .solution
            .as_ref()
            .ok_or_else(|| Error::Precondition("record carries no solution".into()))?;
        let mesh = Arc::new(self.problem.mesh.build()?);
        DiscreteFunction::from_coeffs(mesh, data.coeffs.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("schema_version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if version != SCHEMA_VERSION {
            return Err(Error::Schema(version));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Multi-start solve followed by diagnostics. Invalid specifications are
/// errors; solver and diagnostic failures end up in a record with status
/// `failed`.
pub fn solve_once(spec: &ProblemSpec, opts: &SolveOptions) -> Result<RunRecord> {
    let started = Instant::now();
    spec.validate()?;
    opts.validate()?;
    let problem = NodalProblem::new(spec.functional()?, spec.eps)?;
    match multi_start(&problem, opts) {
        Ok(ms) => {
            let mut rec = RunRecord::from_solution(spec, &problem, &ms.best, opts, started);
            rec.meta.best_start = Some(ms.best_index);
            Ok(rec)
        }
        Err(Error::AllStartsFailed { best: Some(sol), .. }) => {
            let mut rec = RunRecord::from_solution(spec, &problem, &sol, opts, started);
            rec.status = RunStatus::Unconverged;
            Ok(rec)
        }
        Err(e) => {
            log::warn!("solve failed: {e}");
            Ok(RunRecord::failed(spec, opts, &e, started))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revalidation {
    pub energy_error: f64,
    pub residual_error: f64,
    pub index_matches: bool,
    pub tol: f64,
}

impl Revalidation {
    pub fn ok(&self) -> bool {
        self.energy_error <= self.tol && self.residual_error <= self.tol && self.index_matches
    }
}

/// Recomputes energy, residual and index from the stored coefficients.
/// Energy error is relative to `max(1, |energy|)`, residual error absolute.
pub fn revalidate(rec: &RunRecord, tol: f64) -> Result<Revalidation> {
    let stored = rec
        .result
        .as_ref()
        .ok_or_else(|| Error::Precondition("record carries no result".into()))?;
    let u = rec.solution_function()?;
    let func = rec.problem.functional()?;
    let problem = NodalProblem::new(func, rec.problem.eps)?;
    let energy = problem.functional().value(problem.eps(), &u)?;
    let residual = problem.residual(&u)?;
    let ix = morse_index(problem.functional(), problem.eps(), &u, rec.meta.tol_eig)?;
    Ok(Revalidation {
        energy_error: (energy - stored.energy).abs() / stored.energy.abs().max(1.0),
        residual_error: (residual - stored.residual).abs(),
        index_matches: ix.morse_index == stored.morse_index && ix.nullity == stored.nullity,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexStability {
    pub coarse: RunRecord,
    pub fine: RunRecord,
}

impl IndexStability {
    pub fn stable(&self) -> bool {
        match (&self.coarse.result, &self.fine.result) {
            (Some(a), Some(b)) => a.morse_index == b.morse_index,
            _ => false,
        }
    }
}

/// Solves on the given mesh and on its uniform refinement.
pub fn index_stability(spec: &ProblemSpec, opts: &SolveOptions) -> Result<IndexStability> {
    Ok(IndexStability {
        coarse: solve_once(spec, opts)?,
        fine: solve_once(&spec.refined(), opts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SolveOptions {
        SolveOptions {
            n_starts: 2,
            ..Default::default()
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let rec = solve_once(&ProblemSpec::canonical(32, 0.1), &quick()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&rec.to_json().unwrap()).unwrap();
        v["schema_version"] = 7.into();
        assert!(matches!(RunRecord::from_json(&v.to_string()), Err(Error::Schema(7))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rec = solve_once(&ProblemSpec::canonical(32, 0.1), &quick()).unwrap();
        let back = RunRecord::from_json(&rec.to_json().unwrap()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn invalid_spec_is_an_error() {
        let spec = ProblemSpec {
            p: 2.0,
            ..ProblemSpec::canonical(16, 0.0)
        };
        assert!(solve_once(&spec, &quick()).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
