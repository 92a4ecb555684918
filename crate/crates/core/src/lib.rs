//! Least-energy nodal solutions of `-eps^2 Delta u - Delta_p u = f(u)` with
//! homogeneous Dirichlet data, computed by minimization over the nodal Nehari
//! set on P1 finite elements.

pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod nehari;
pub mod nonlinearity;
pub mod solver;

pub use diagnostics::{index_nodal_consistency, index_report, morse_index, nodal_domains, IndexReport};
pub use error::{Error, Result};
pub use functional::{lambda_1p, DiscreteFunction, EnergyParts, Functional, SpectralEstimate};
pub use harness::{MeshSpec, ProblemSpec, RunRecord, RunStatus, SweepReport};
pub use mesh::{build_interval_mesh, build_rect_mesh, Mesh};
pub use nehari::{project_nodal, project_ray, NodalProjection, RayProjection};
pub use nonlinearity::{validate_hypotheses, HypothesisReport, Nonlinearity};
pub use solver::{minimize_nodal, multi_start, NodalProblem, Solution, SolveOptions};
