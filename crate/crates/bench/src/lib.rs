//! Fixtures shared by the criterion benches.

use std::f64::consts::PI;
use std::sync::Arc;

use nodal_core::{build_interval_mesh, build_rect_mesh, DiscreteFunction, Functional, Nonlinearity};

/// `(0, 1)` with `n` cells and `f(t) = |t| t`, `p = 3`, together with a
/// two-hump sign-changing sample.
pub fn interval_fixture(n: usize) -> (Functional, DiscreteFunction) {
    let mesh = Arc::new(build_interval_mesh(n, 0.0, 1.0).expect("valid mesh"));
    let v = DiscreteFunction::interpolate(mesh.clone(), |x| (2.0 * PI * x[0]).sin());
    (Functional::new(mesh, model()), v)
}

/// Unit square on an `n` by `n` grid with the same nonlinearity.
pub fn square_fixture(n: usize) -> (Functional, DiscreteFunction) {
    let mesh = Arc::new(build_rect_mesh(n, n, 1.0, 1.0).expect("valid mesh"));
    let v = DiscreteFunction::interpolate(mesh.clone(), |x| (2.0 * PI * x[0]).sin() * (PI * x[1]).sin());
    (Functional::new(mesh, model()), v)
}

fn model() -> Nonlinearity {
    Nonlinearity::pure_power(3.0, 4.0).expect("valid exponents")
}
