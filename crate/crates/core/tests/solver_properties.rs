use std::sync::Arc;

use nodal_core::diagnostics::{default_threshold, index_report, nodal_domains, DEFAULT_TOL_EIG};
use nodal_core::harness::{solve_once, sweep_epsilon, MeshSpec};
use nodal_core::nehari::{negative_part, positive_part, tangency_defect};
use nodal_core::solver::{deterministic_seed, minmax_energy, start_points};
use nodal_core::{
    minimize_nodal, multi_start, project_nodal, Functional, NodalProblem, Nonlinearity, ProblemSpec, Solution,
    SolveOptions,
};

fn canonical(n: usize, eps: f64) -> NodalProblem {
    let spec = ProblemSpec::canonical(n, eps);
    NodalProblem::new(spec.functional().unwrap(), eps).unwrap()
}

fn solve(pb: &NodalProblem) -> Solution {
    let sol = minimize_nodal(pb, &deterministic_seed(pb.mesh()), &SolveOptions::default()).unwrap();
    assert!(sol.converged, "residual {}", sol.residual);
    sol
}

fn check_run_invariants(pb: &NodalProblem, sol: &Solution) {
    let nl = *pb.functional().nonlinearity();
    let c = nl.coercivity_constant(pb.mesh().measure());
    let coef = 1.0 / nl.p - 1.0 / nl.m();
    let mut prev = f64::INFINITY;
    for (k, st) in sol.history.iter().enumerate() {
        assert!(st.energy <= prev + 1e-12 * prev.abs().max(1.0), "energy rose at iterate {k}");
        prev = st.energy;
        let floor = coef * st.dirichletp + c;
        assert!(st.energy >= floor - 1e-10 * st.energy.abs().max(1.0), "coercivity floor broken at {k}");
        assert!(st.part_norms.0 > 1e-6 && st.part_norms.1 > 1e-6);
    }
}

#[test]
fn descent_invariants_pure_power() {
    for eps in [0.0, 0.1] {
        let pb = canonical(128, eps);
        let sol = solve(&pb);
        check_run_invariants(&pb, &sol);
    }
}

#[test]
fn descent_invariants_with_linear_term() {
    let mesh = Arc::new(nodal_core::build_interval_mesh(64, 0.0, 1.0).unwrap());
    let func = Functional::new(mesh, Nonlinearity::new(3.0, 4.0, 2.0, 1.0).unwrap());
    let pb = NodalProblem::new(func, 0.3).unwrap();
    let sol = solve(&pb);
    assert!(pb.functional().nonlinearity().coercivity_constant(1.0) < 0.0);
    check_run_invariants(&pb, &sol);
}

#[test]
fn converged_parts_lie_on_the_nehari_set() {
    let pb = canonical(128, 0.1);
    let sol = solve(&pb);
    for part in [positive_part(&sol.u), negative_part(&sol.u)] {
        let g = pb.functional().gamma(pb.eps(), &part).unwrap();
        let scale = pb.functional().dirichlet_p(&part);
        assert!(g.abs() <= 1e-10 * scale, "{g} vs {scale}");
        assert!(tangency_defect(pb.functional(), pb.eps(), &part).unwrap() < 0.0);
    }
    assert!(sol.proj_defects.0.abs() <= 1e-10 * pb.functional().dirichlet_p(&sol.u));
}

#[test]
fn negated_start_gives_same_energy() {
    let pb = canonical(128, 0.0);
    let a = solve(&pb);
    let b = minimize_nodal(&pb, &a.u.scaled(-1.0), &SolveOptions::default()).unwrap();
    assert!((a.energy - b.energy).abs() <= 1e-8 * a.energy);
}

#[test]
fn refinement_oracle() {
    let coarse = solve(&canonical(128, 0.0)).energy;
    // an absolute residual of 1e-8 sits below the rounding floor at n = 512
    let pb = canonical(512, 0.0);
    let opts = SolveOptions {
        tol_grad: 1e-6,
        ..Default::default()
    };
    let sol = minimize_nodal(&pb, &deterministic_seed(pb.mesh()), &opts).unwrap();
    assert!(sol.converged);
    let fine = sol.energy;
    assert!((coarse - fine).abs() <= 0.01 * fine, "{coarse} vs {fine}");
}

#[test]
fn single_start_equals_direct_call() {
    let pb = canonical(64, 0.1);
    let opts = SolveOptions {
        n_starts: 1,
        ..Default::default()
    };
    let ms = multi_start(&pb, &opts).unwrap();
    let direct = minimize_nodal(&pb, &deterministic_seed(pb.mesh()), &opts).unwrap();
    assert_eq!(ms.best.u.coeffs(), direct.u.coeffs());
    assert_eq!(ms.best.energy, direct.energy);
}

#[test]
fn multi_start_is_reproducible_and_minimal() {
    let pb = canonical(64, 0.2);
    let opts = SolveOptions {
        seed: 11,
        ..Default::default()
    };
    let a = multi_start(&pb, &opts).unwrap();
    let b = multi_start(&pb, &opts).unwrap();
    assert_eq!(a.best.u.coeffs(), b.best.u.coeffs());
    assert_eq!(a.best_index, b.best_index);
    for s in a.starts.iter().filter(|s| s.converged) {
        assert!(a.best.energy <= s.energy.unwrap());
    }
}

#[test]
fn minmax_value_bounds_the_least_level() {
    let pb = canonical(64, 0.1);
    let sol = solve(&pb);
    let at_solution = minmax_energy(pb.functional(), pb.eps(), &sol.u, 1e-10).unwrap();
    assert!((at_solution - sol.energy).abs() <= 1e-10 * sol.energy);
    for v in start_points(pb.mesh(), 6, 5) {
        let e = minmax_energy(pb.functional(), pb.eps(), &v, 1e-10).unwrap();
        assert!(e >= sol.energy * (1.0 - 1e-12));
    }
}

#[test]
fn warm_sweep_matches_cold_solves() {
    let base = ProblemSpec::canonical(64, 0.0);
    let opts = SolveOptions {
        n_starts: 4,
        ..Default::default()
    };
    let rep = sweep_epsilon(&base, &[0.0, 0.1, 0.3], &opts).unwrap();
    assert!(rep.records[1].meta.warm_start);
    for rec in &rep.records[1..] {
        let cold = solve_once(&rec.problem, &opts).unwrap();
        let (w, c) = (rec.energy().unwrap(), cold.energy().unwrap());
        assert!((w - c).abs() <= 1e-6 * c, "{w} vs {c}");
    }
}

#[test]
fn nodal_count_is_threshold_robust() {
    let pb = canonical(128, 0.5);
    let sol = solve(&pb);
    let top = sol.u.max_abs();
    for rel in [1e-10, 1e-9, 1e-8, 1e-7, 1e-6] {
        assert_eq!(nodal_domains(&sol.u, rel * top).unwrap(), 2);
    }
}

#[test]
fn solve_once_is_deterministic() {
    let spec = ProblemSpec::canonical(64, 0.1);
    let opts = SolveOptions::default();
    let mut a = solve_once(&spec, &opts).unwrap();
    let mut b = solve_once(&spec, &opts).unwrap();
    a.meta.wall_time_s = 0.0;
    b.meta.wall_time_s = 0.0;
    assert_eq!(a, b);
}

#[test]
fn rectangle_least_nodal_solution() {
    let spec = ProblemSpec {
        mesh: MeshSpec::Rect {
            nx: 16,
            ny: 8,
            extents: [2.0, 1.0],
        },
        ..ProblemSpec::canonical(0, 0.5)
    };
    let rec = solve_once(&spec, &SolveOptions::default()).unwrap();
    assert!(rec.is_ok(), "{:?}", rec.meta.error);
    let r = rec.result.unwrap();
    assert_eq!(r.nodal_domains, 2);
    assert_eq!(r.morse_index, 2);
    assert_eq!(r.neg_directions_check, (true, true));
}

#[test]
fn index_report_of_converged_solution() {
    let pb = canonical(128, 0.1);
    let sol = solve(&pb);
    let rep = index_report(pb.functional(), pb.eps(), &sol.u, DEFAULT_TOL_EIG, default_threshold(&sol.u)).unwrap();
    assert_eq!(rep.morse_index, 2);
    assert!(rep.morse_index + rep.nullity <= rep.dimension);
    let proj = project_nodal(pb.functional(), pb.eps(), &sol.u, 1e-10).unwrap();
    assert!((proj.t - 1.0).abs() < 1e-8 && (proj.s - 1.0).abs() < 1e-8);
}
