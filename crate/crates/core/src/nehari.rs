//! Projections onto the Nehari set and the nodal Nehari set.
//!
//! Along a ray `t -> J(t v)` every term of the energy is a power of `t`, so
//! the fiber map is evaluated from four integrals of `v` and its unique
//! maximizer is found by bracketing plus safeguarded Newton.
//!
//! On the nodal set the fiber is two-dimensional, `h(t, s) = J(t v+ + s v-)`.
//! With vertexwise sign parts the elements where `v` changes sign couple `t`
//! and `s`, so `h` is maximized jointly: the separable ray projections of
//! `v+` and `v-` seed a damped 2x2 Newton iteration whose fixed point satisfies
//! `DJ(w) w+ = DJ(w) w- = 0` exactly at the discrete level.

use crate::error::{Error, Result};
use crate::functional::{DiscreteFunction, Functional};
use crate::mesh::Element;

pub const DEFAULT_TOL_PROJ: f64 = 1e-10;

const SCALE_MIN: f64 = 1e-100;
const SCALE_MAX: f64 = 1e100;

#[derive(Debug, Clone)]
pub struct RayProjection {
    pub tau: f64,
    pub projected: DiscreteFunction,
    /// `J(tau v)`.
    pub g_value: f64,
    pub iterations: usize,
    /// `|gamma(tau v)|`.
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct NodalProjection {
    pub t: f64,
    pub s: f64,
    pub projected: DiscreteFunction,
    /// `J(t v+ + s v-)`, the maximum of `h` over the open quadrant.
    pub energy: f64,
    /// `(DJ(w) w+, DJ(w) w-)` at the projected point.
    pub defects: (f64, f64),
    pub iterations: usize,
}

pub fn positive_part(v: &DiscreteFunction) -> DiscreteFunction {
    v.map(|x| x.max(0.0))
}

pub fn negative_part(v: &DiscreteFunction) -> DiscreteFunction {
    v.map(|x| x.min(0.0))
}

/// The ray fiber `g(t) = J(t v)` written through its integrals:
/// `g(t) = eps^2 a2 t^2 / 2 + a_p t^p / p - mu b_p t^p / p - kappa b_q t^q / q`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayProfile {
    e2: f64,
    p: f64,
    q: f64,
    mu: f64,
    kappa: f64,
    a2: f64,
    ap: f64,
    bp: f64,
    bq: f64,
}

impl RayProfile {
    pub(crate) fn new(func: &Functional, eps: f64, v: &DiscreteFunction) -> Self {
        let nl = func.nonlinearity();
        let parts = func.energy_raw(v.coeffs());
        Self {
            e2: eps * eps,
            p: nl.p,
            q: nl.q,
            mu: nl.mu,
            kappa: nl.kappa,
            a2: parts.dirichlet2,
            ap: parts.dirichletp,
            bp: func.lebesgue_moment(v, nl.p),
            bq: func.lebesgue_moment(v, nl.q),
        }
    }

    fn value(&self, t: f64) -> f64 {
        0.5 * self.e2 * self.a2 * t * t + (self.ap - self.mu * self.bp) * t.powf(self.p) / self.p
            - self.kappa * self.bq * t.powf(self.q) / self.q
    }

    fn d1(&self, t: f64) -> f64 {
        self.e2 * self.a2 * t + (self.ap - self.mu * self.bp) * t.powf(self.p - 1.0)
            - self.kappa * self.bq * t.powf(self.q - 1.0)
    }

    fn d2(&self, t: f64) -> f64 {
        self.e2 * self.a2 + (self.p - 1.0) * (self.ap - self.mu * self.bp) * t.powf(self.p - 2.0)
            - (self.q - 1.0) * self.kappa * self.bq * t.powf(self.q - 2.0)
    }

    /// Magnitude against which `gamma(t v)` is compared.
    fn scale(&self, t: f64) -> f64 {
        1.0 + self.ap * t.powf(self.p)
    }
}

/// Finds the unique positive zero of `d` (positive before, negative after)
/// by doubling/halving from `t = 1`, then Newton steps safeguarded by
/// bisection. `d` returns `(d(t), d'(t))`; `converged(t, d(t))` decides
/// acceptance.
pub(crate) fn bracketed_root<D, C>(d: D, converged: C) -> Result<(f64, usize)>
where
    D: Fn(f64) -> (f64, f64),
    C: Fn(f64, f64) -> bool,
{
    let (d1, _) = d(1.0);
    if d1 == 0.0 {
        return Ok((1.0, 0));
    }
    let (mut lo, mut hi);
    if d1 > 0.0 {
        lo = 1.0;
        hi = 2.0;
        loop {
            let v = d(hi).0;
            if !v.is_finite() {
                return Err(Error::ProjectionFailure(format!("fiber derivative overflows at t = {hi:.3e}")));
            }
            if v < 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > SCALE_MAX {
                return Err(Error::ProjectionFailure(
                    "fiber derivative stays positive up to the scale bound".into(),
                ));
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        loop {
            let v = d(lo).0;
            if !v.is_finite() {
                return Err(Error::ProjectionFailure(format!("fiber derivative overflows at t = {lo:.3e}")));
            }
            if v > 0.0 {
                break;
            }
            hi = lo;
            lo *= 0.5;
            if lo < SCALE_MIN {
                return Err(Error::ProjectionFailure(
                    "fiber derivative stays negative down to the scale bound".into(),
                ));
            }
        }
    }
    let mut t = 0.5 * (lo + hi);
    for it in 1..=200 {
        let (val, slope) = d(t);
        if val == 0.0 {
            return Ok((t, it));
        }
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - val / slope;
        let step_ok = slope.is_finite() && slope != 0.0 && newton > lo && newton < hi;
        let next = if step_ok { newton } else { 0.5 * (lo + hi) };
        let tiny = (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi;
        if tiny {
            let (v_next, _) = d(next);
            if converged(next, v_next) {
                return Ok((next, it));
            }
            if converged(t, val) {
                return Ok((t, it));
            }
            return Err(Error::ProjectionFailure(format!(
                "bracket collapsed at t = {t:.6e} with defect {val:.3e}"
            )));
        }
        t = next;
    }
    Err(Error::ProjectionFailure("root iteration limit".into()))
}

fn solve_ray(profile: &RayProfile, tol: f64) -> Result<(f64, usize)> {
    bracketed_root(
        |t| (profile.d1(t), profile.d2(t)),
        |t, d| (t * d).abs() <= tol * profile.scale(t),
    )
}

/// Scales `v` onto the Nehari set: `tau > 0` maximizes `t -> J(t v)`.
pub fn project_ray(
    func: &Functional,
    eps: f64,
    v: &DiscreteFunction,
    tol_proj: f64,
) -> Result<RayProjection> {
    if !v.same_mesh(func.mesh()) {
        return Err(Error::IncompatibleFunction);
    }
    if v.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let profile = RayProfile::new(func, eps, v);
    let (tau, iterations) = solve_ray(&profile, tol_proj)?;
    Ok(RayProjection {
        tau,
        projected: v.scaled(tau),
        g_value: profile.value(tau),
        iterations,
        defect: (tau * profile.d1(tau)).abs(),
    })
}

/// One element on which both sign parts are nonzero.
#[derive(Debug, Clone)]
struct MixedElement {
    volume: f64,
    grad_pos: [f64; 2],
    grad_neg: [f64; 2],
    // (weight, v+ value, v- value) per quadrature point
    quad: Vec<(f64, f64, f64)>,
}

/// `h(t, s) = J(t v+ + s v-)` split into the two pure-sign fibers and the
/// coupled elements.
#[derive(Debug, Clone)]
struct PlaneFiber {
    pos: RayProfile,
    neg: RayProfile,
    mixed: Vec<MixedElement>,
    e2: f64,
    p: f64,
    nl: crate::nonlinearity::Nonlinearity,
}

impl PlaneFiber {
    fn new(func: &Functional, eps: f64, vp: &DiscreteFunction, vm: &DiscreteFunction) -> Self {
        let mesh = func.mesh();
        let quad = mesh.quadrature();
        let e2 = eps * eps;
        let nl = *func.nonlinearity();
        let up = vp.coeffs();
        let um = vm.coeffs();
        let is_mixed = |el: &Element| {
            el.vertices.iter().any(|&v| up[v] != 0.0) && el.vertices.iter().any(|&v| um[v] != 0.0)
        };
        // Pure parts: integrate only elements where the other sign vanishes.
        let mut pos = RayProfile::new(func, eps, vp);
        let mut neg = RayProfile::new(func, eps, vm);
        let mut mixed = Vec::new();
        for el in mesh.elements().filter(is_mixed) {
            let gp = el.gradient(up);
            let gm = el.gradient(um);
            let mut me = MixedElement {
                volume: el.volume,
                grad_pos: gp,
                grad_neg: gm,
                quad: Vec::with_capacity(quad.len()),
            };
            for qp in quad {
                let a = el.value_at(up, qp);
                let b = el.value_at(um, qp);
                me.quad.push((qp.weight, a, b));
                // remove this element's share from the pure fibers
                pos.bp -= el.volume * qp.weight * a.abs().powf(nl.p);
                pos.bq -= el.volume * qp.weight * a.abs().powf(nl.q);
                neg.bp -= el.volume * qp.weight * b.abs().powf(nl.p);
                neg.bq -= el.volume * qp.weight * b.abs().powf(nl.q);
            }
            let np2 = gp[0] * gp[0] + gp[1] * gp[1];
            let nm2 = gm[0] * gm[0] + gm[1] * gm[1];
            pos.a2 -= el.volume * np2;
            pos.ap -= el.volume * np2.powf(0.5 * nl.p);
            neg.a2 -= el.volume * nm2;
            neg.ap -= el.volume * nm2.powf(0.5 * nl.p);
            mixed.push(me);
        }
        Self {
            pos,
            neg,
            mixed,
            e2,
            p: nl.p,
            nl,
        }
    }

    /// `(h, grad h, hess h)` at `(t, s)`.
    fn eval(&self, t: f64, s: f64) -> (f64, [f64; 2], [f64; 3]) {
        let mut h = self.pos.value(t) + self.neg.value(s);
        let mut g = [self.pos.d1(t), self.neg.d1(s)];
        let mut htt = self.pos.d2(t);
        let mut hss = self.neg.d2(s);
        let mut hts = 0.0;
        let p = self.p;
        for me in &self.mixed {
            let gr = [
                t * me.grad_pos[0] + s * me.grad_neg[0],
                t * me.grad_pos[1] + s * me.grad_neg[1],
            ];
            let n2 = gr[0] * gr[0] + gr[1] * gr[1];
            let dp = gr[0] * me.grad_pos[0] + gr[1] * me.grad_pos[1];
            let dm = gr[0] * me.grad_neg[0] + gr[1] * me.grad_neg[1];
            let pp = me.grad_pos[0] * me.grad_pos[0] + me.grad_pos[1] * me.grad_pos[1];
            let mm = me.grad_neg[0] * me.grad_neg[0] + me.grad_neg[1] * me.grad_neg[1];
            let pm = me.grad_pos[0] * me.grad_neg[0] + me.grad_pos[1] * me.grad_neg[1];
            let (iso, aniso) = if n2 > 0.0 {
                (n2.powf(0.5 * (p - 2.0)), (p - 2.0) * n2.powf(0.5 * (p - 4.0)))
            } else {
                (0.0, 0.0)
            };
            let c = self.e2 + iso;
            h += me.volume * (0.5 * self.e2 * n2 + n2.powf(0.5 * p) / p);
            g[0] += me.volume * c * dp;
            g[1] += me.volume * c * dm;
            htt += me.volume * (c * pp + aniso * dp * dp);
            hss += me.volume * (c * mm + aniso * dm * dm);
            hts += me.volume * (c * pm + aniso * dp * dm);
            for &(w, a, b) in &me.quad {
                let x = t * a + s * b;
                let wv = me.volume * w;
                h -= wv * self.nl.F(x);
                let fx = self.nl.f(x);
                g[0] -= wv * fx * a;
                g[1] -= wv * fx * b;
                let fpx = self.nl.fprime(x);
                htt -= wv * fpx * a * a;
                hss -= wv * fpx * b * b;
                hts -= wv * fpx * a * b;
            }
        }
        (h, g, [htt, hts, hss])
    }

    fn scales(&self, t: f64, s: f64) -> (f64, f64) {
        (self.pos.scale(t), self.neg.scale(s))
    }
}

fn sign_parts(v: &DiscreteFunction) -> Result<(DiscreteFunction, DiscreteFunction)> {
    let vp = positive_part(v);
    let vm = negative_part(v);
    let (pz, mz) = (vp.is_zero(), vm.is_zero());
    if pz || mz {
        return Err(Error::NotSignChanging {
            positive_zero: pz,
            negative_zero: mz,
        });
    }
    Ok((vp, vm))
}

/// Maximizes `h(t, s) = J(t v+ + s v-)` over `t, s > 0`.
pub fn project_nodal(
    func: &Functional,
    eps: f64,
    v: &DiscreteFunction,
    tol_proj: f64,
) -> Result<NodalProjection> {
    if !v.same_mesh(func.mesh()) {
        return Err(Error::IncompatibleFunction);
    }
    let (vp, vm) = sign_parts(v)?;
    let fiber = PlaneFiber::new(func, eps, &vp, &vm);

    // separable seed: each sign part projected on its own ray
    let mut t = project_ray(func, eps, &vp, tol_proj)?.tau;
    let mut s = project_ray(func, eps, &vm, tol_proj)?.tau;

    let done = |t: f64, s: f64, g: [f64; 2]| {
        let (st, ss) = fiber.scales(t, s);
        (t * g[0]).abs() <= tol_proj * st && (s * g[1]).abs() <= tol_proj * ss
    };

    let mut iterations = 0;
    let (mut h, mut g, mut hess) = fiber.eval(t, s);
    while !done(t, s, g) {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::ProjectionFailure(format!(
                "nodal fiber iteration limit at (t, s) = ({t:.6e}, {s:.6e})"
            )));
        }
        let [htt, hts, hss] = hess;
        let det = htt * hss - hts * hts;
        let mut moved = false;
        if htt < 0.0 && det > 0.0 {
            // Newton step for the maximizer, damped to stay in the quadrant and ascend.
            let dt = -(hss * g[0] - hts * g[1]) / det;
            let ds = -(-hts * g[0] + htt * g[1]) / det;
            let mut lambda = 1.0;
            for _ in 0..50 {
                let (nt, ns) = (t + lambda * dt, s + lambda * ds);
                if nt > 0.0 && ns > 0.0 {
                    let (nh, ng, nhess) = fiber.eval(nt, ns);
                    let gnorm = |t: f64, s: f64, g: [f64; 2]| {
                        let (st, ss) = fiber.scales(t, s);
                        (t * g[0] / st).hypot(s * g[1] / ss)
                    };
                    if nh >= h - 1e-14 * h.abs() || gnorm(nt, ns, ng) < gnorm(t, s, g) {
                        (t, s, h, g, hess) = (nt, ns, nh, ng, nhess);
                        moved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
        }
        if !moved {
            // coordinate ascent: exact 1-D maximization in each variable
            let s_fixed = s;
            let (nt, _) = bracketed_root(
                |x| {
                    let (_, gg, hh) = fiber.eval(x, s_fixed);
                    (gg[0], hh[0])
                },
                |x, d| (x * d).abs() <= 1e-3 * tol_proj * fiber.pos.scale(x),
            )?;
            let t_fixed = nt;
            let (ns, _) = bracketed_root(
                |y| {
                    let (_, gg, hh) = fiber.eval(t_fixed, y);
                    (gg[1], hh[2])
                },
                |y, d| (y * d).abs() <= 1e-3 * tol_proj * fiber.neg.scale(y),
            )?;
            (t, s) = (nt, ns);
            (h, g, hess) = fiber.eval(t, s);
        }
    }
    let projected = vp.combine(t, &vm, s);
    Ok(NodalProjection {
        t,
        s,
        energy: h,
        defects: (t * g[0], s * g[1]),
        projected,
        iterations,
    })
}

/// `D gamma(v)(v) = int (2 eps^2 |grad v|^2 + p |grad v|^p) - int (f'(v) v^2 + f(v) v)`.
pub fn tangency_defect(func: &Functional, eps: f64, v: &DiscreteFunction) -> Result<f64> {
    if !v.same_mesh(func.mesh()) {
        return Err(Error::IncompatibleFunction);
    }
    let nl = func.nonlinearity();
    let u = v.coeffs();
    let quad = func.mesh().quadrature();
    let mut acc = 0.0;
    for el in func.mesh().elements() {
        let g = el.gradient(u);
        let n2 = g[0] * g[0] + g[1] * g[1];
        let mass: f64 = quad
            .iter()
            .map(|qp| {
                let x = el.value_at(u, qp);
                qp.weight * (nl.fprime(x) * x * x + nl.f(x) * x)
            })
            .sum();
        acc += el.volume * (2.0 * eps * eps * n2 + nl.p * n2.powf(0.5 * nl.p) - mass);
    }
    Ok(acc)
}

/// `h(t, s) = J(t v+ + s v-)` evaluated directly on the combined function.
pub fn nodal_fiber_value(
    func: &Functional,
    eps: f64,
    v: &DiscreteFunction,
    t: f64,
    s: f64,
) -> Result<f64> {
    let w = positive_part(v).combine(t, &negative_part(v), s);
    func.value(eps, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use crate::mesh::build_interval_mesh;
    use crate::nonlinearity::Nonlinearity;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn functional(n: usize, nl: Nonlinearity) -> Functional {
        Functional::new(Arc::new(build_interval_mesh(n, 0.0, 1.0).unwrap()), nl)
    }

    fn random_fn(f: &Functional, rng: &mut ChaCha8Rng) -> DiscreteFunction {
        let x = DVector::from_fn(f.mesh().num_dofs(), |_, _| rng.gen_range(-1.0..1.0));
        DiscreteFunction::from_interior(Arc::clone(f.mesh()), &x).unwrap()
    }

    #[test]
    fn sign_parts_split() {
        let mesh = Arc::new(build_interval_mesh(4, 0.0, 1.0).unwrap());
        let v = DiscreteFunction::from_coeffs(Arc::clone(&mesh), vec![0.0, 1.0, -2.0, 3.0, 0.0])
            .unwrap();
        assert_eq!(positive_part(&v).coeffs(), &[0.0, 1.0, 0.0, 3.0, 0.0]);
        assert_eq!(negative_part(&v).coeffs(), &[0.0, 0.0, -2.0, 0.0, 0.0]);
        let sum = positive_part(&v).combine(1.0, &negative_part(&v), 1.0);
        assert_eq!(sum.coeffs(), v.coeffs());
        let nonneg = v.map(f64::abs);
        assert!(negative_part(&nonneg).is_zero());
    }

    #[test]
    fn closed_form_ray_at_eps_zero() {
        let f = functional(64, Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = random_fn(&f, &mut rng);
            let a = f.dirichlet_p(&v);
            let b = f.lebesgue_moment(&v, 4.0);
            let expect = a / b;
            let got = project_ray(&f, 0.0, &v, DEFAULT_TOL_PROJ).unwrap();
            assert!((got.tau - expect).abs() <= 1e-10 * expect);
            assert!(got.defect <= DEFAULT_TOL_PROJ * (1.0 + a * got.tau.powi(3)));
        }
    }

    #[test]
    fn nehari_point_is_fixed() {
        let f = functional(32, Nonlinearity::new(3.0, 4.5, 0.5, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_fn(&f, &mut rng);
        let w = project_ray(&f, 0.3, &v, DEFAULT_TOL_PROJ).unwrap().projected;
        let again = project_ray(&f, 0.3, &w, DEFAULT_TOL_PROJ).unwrap();
        assert!((again.tau - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ray_scaling_and_sign_rule() {
        let f = functional(32, Nonlinearity::new(3.0, 4.0, 1.0, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let v = random_fn(&f, &mut rng).scaled(rng.gen_range(0.05..20.0));
            let eps = rng.gen_range(0.0..1.0);
            let t1 = project_ray(&f, eps, &v, DEFAULT_TOL_PROJ).unwrap().tau;
            let t2 = project_ray(&f, eps, &v.scaled(2.0), DEFAULT_TOL_PROJ).unwrap().tau;
            assert!((t2 - t1 / 2.0).abs() <= 1e-10 * t1);
            let gamma = f.gamma(eps, &v).unwrap();
            if gamma > 0.0 {
                assert!(t1 > 1.0);
            } else {
                assert!(t1 < 1.0);
            }
        }
    }

    #[test]
    fn ray_errors() {
        let f = functional(16, Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let z = DiscreteFunction::zeros(Arc::clone(f.mesh()));
        assert!(matches!(project_ray(&f, 0.0, &z, 1e-10), Err(Error::ZeroFunction)));
        // mu far above the first eigenvalue: g' < 0 for all t at eps = 0
        let g = functional(16, Nonlinearity::new(3.0, 4.0, 1e6, 1.0).unwrap());
        let v = DiscreteFunction::interpolate(Arc::clone(g.mesh()), |x| (std::f64::consts::PI * x[0]).sin());
        assert!(matches!(project_ray(&g, 0.0, &v, 1e-10), Err(Error::ProjectionFailure(_))));
    }

    #[test]
    fn nodal_requires_both_signs() {
        let f = functional(16, Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let v = DiscreteFunction::interpolate(Arc::clone(f.mesh()), |x| (std::f64::consts::PI * x[0]).sin());
        assert!(matches!(
            project_nodal(&f, 0.0, &v, 1e-10),
            Err(Error::NotSignChanging { negative_zero: true, .. })
        ));
    }

    #[test]
    fn nodal_separable_when_sign_change_at_vertex() {
        // zero at the midpoint vertex: no element carries both signs
        let f = functional(32, Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let v = DiscreteFunction::interpolate(Arc::clone(f.mesh()), |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin() * (1.0 + x[0])
        })
        .map(|c| if c.abs() < 1e-12 { 0.0 } else { c });
        let proj = project_nodal(&f, 0.0, &v, DEFAULT_TOL_PROJ).unwrap();
        let closed = |w: &DiscreteFunction| f.dirichlet_p(w) / f.lebesgue_moment(w, 4.0);
        let tp = closed(&positive_part(&v));
        let tm = closed(&negative_part(&v));
        assert!((proj.t - tp).abs() <= 1e-10 * tp);
        assert!((proj.s - tm).abs() <= 1e-10 * tm);
        let sep = f.value(0.0, &positive_part(&v).scaled(tp)).unwrap()
            + f.value(0.0, &negative_part(&v).scaled(tm)).unwrap();
        assert!((proj.energy - sep).abs() <= 1e-12 * sep.abs());
    }

    #[test]
    fn nodal_point_is_fixed_and_energy_matches() {
        let f = functional(32, Nonlinearity::new(3.0, 4.0, 0.5, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = random_fn(&f, &mut rng);
        let w = project_nodal(&f, 0.2, &v, DEFAULT_TOL_PROJ).unwrap();
        let direct = f.value(0.2, &w.projected).unwrap();
        assert!((w.energy - direct).abs() <= 1e-11 * direct.abs());
        let again = project_nodal(&f, 0.2, &w.projected, DEFAULT_TOL_PROJ).unwrap();
        assert!((again.t - 1.0).abs() < 1e-8 && (again.s - 1.0).abs() < 1e-8);
        assert!((again.energy - w.energy).abs() <= 1e-12 * w.energy.abs());
        // the defects are DJ(w) w+ and DJ(w) w-
        let grad = f.gradient(0.2, &w.projected).unwrap();
        let dp = grad.dot(&positive_part(&w.projected).interior());
        let dm = grad.dot(&negative_part(&w.projected).interior());
        let scale = 1.0 + f.dirichlet_p(&w.projected);
        assert!(dp.abs() <= 1e-9 * scale && dm.abs() <= 1e-9 * scale);
    }

    #[test]
    fn tangency_negative_on_nehari() {
        let f = functional(32, Nonlinearity::pure_power(3.0, 4.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let v = random_fn(&f, &mut rng);
            let eps = rng.gen_range(0.0..1.0);
            let w = project_ray(&f, eps, &v, DEFAULT_TOL_PROJ).unwrap().projected;
            assert!(tangency_defect(&f, eps, &w).unwrap() < 0.0);
        }
        let w = project_ray(&f, 0.0, &random_fn(&f, &mut rng), DEFAULT_TOL_PROJ)
            .unwrap()
            .projected;
        let expect = (3.0 - 4.0) * f.lebesgue_moment(&w, 4.0);
        let got = tangency_defect(&f, 0.0, &w).unwrap();
        assert!((got - expect).abs() <= 1e-9 * expect.abs());
        let z = DiscreteFunction::zeros(Arc::clone(f.mesh()));
        assert_eq!(tangency_defect(&f, 0.0, &z).unwrap(), 0.0);
    }

    #[test]
    fn ray_maximum_property() {
        let f = functional(32, Nonlinearity::new(3.0, 4.0, 0.5, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = random_fn(&f, &mut rng);
        let r = project_ray(&f, 0.4, &v, DEFAULT_TOL_PROJ).unwrap();
        for i in 0..=400 {
            let t = 4.0 * r.tau * i as f64 / 400.0;
            assert!(f.value(0.4, &v.scaled(t)).unwrap() <= r.g_value + 1e-12 * r.g_value.abs());
        }
    }
}
