//! The model nonlinearity `f(t) = mu |t|^{p-2} t + kappa |t|^{q-2} t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law nonlinearity together with the quasilinear exponent `p`.
///
/// `m` and `threshold` are the superlinearity exponent and cut-off for which
/// `f(t) t >= m F(t) > 0` holds when `|t| >= threshold`; they are derived from
/// the other parameters at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Params", into = "Params")]
pub struct Nonlinearity {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub kappa: f64,
    m: f64,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct Params {
    p: f64,
    q: f64,
    mu: f64,
    kappa: f64,
}

impl TryFrom<Params> for Nonlinearity {
    type Error = Error;

    fn try_from(v: Params) -> Result<Self> {
        Self::new(v.p, v.q, v.mu, v.kappa)
    }
}

impl From<Nonlinearity> for Params {
    fn from(nl: Nonlinearity) -> Self {
        Params {
            p: nl.p,
            q: nl.q,
            mu: nl.mu,
            kappa: nl.kappa,
        }
    }
}

impl Nonlinearity {
    /// Rejects `p <= 2` and non-finite parameters. Everything else
    /// (growth range, sign of `kappa`, size of `mu`) is left to
    /// [`validate_hypotheses`], which reports rather than fails.
    pub fn new(p: f64, q: f64, mu: f64, kappa: f64) -> Result<Self> {
        if ![p, q, mu, kappa].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite nonlinearity parameter".into()));
        }
        if p <= 2.0 {
            return Err(Error::InvalidParameter(format!("p must exceed 2, got {p}")));
        }
        let (m, threshold) = superlinearity(p, q, mu, kappa);
        Ok(Self {
            p,
            q,
            mu,
            kappa,
            m,
            threshold,
        })
    }

    /// Pure power `f(t) = |t|^{q-2} t`.
    pub fn pure_power(p: f64, q: f64) -> Result<Self> {
        Self::new(p, q, 0.0, 1.0)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn f(&self, t: f64) -> f64 {
        let a = t.abs();
        (self.mu * a.powf(self.p - 2.0) + self.kappa * a.powf(self.q - 2.0)) * t
    }

    #[allow(non_snake_case)]
    pub fn F(&self, t: f64) -> f64 {
        let a = t.abs();
        self.mu * a.powf(self.p) / self.p + self.kappa * a.powf(self.q) / self.q
    }

    pub fn fprime(&self, t: f64) -> f64 {
        let a = t.abs();
        self.mu * (self.p - 1.0) * a.powf(self.p - 2.0)
            + self.kappa * (self.q - 1.0) * a.powf(self.q - 2.0)
    }

    /// Lower constant `C` in `J(w) >= (1/p - 1/m) ||grad w||_p^p + C` on the
    /// Nehari set of a domain of measure `measure`.
    pub fn coercivity_constant(&self, measure: f64) -> f64 {
        if self.mu <= 0.0 {
            0.0
        } else {
            // F - f t / m <= mu (1/p - 1/m) |t|^p on |t| <= T, and <= 0 beyond.
            -measure * self.mu * (1.0 / self.p - 1.0 / self.m) * self.threshold.powf(self.p)
        }
    }
}

fn superlinearity(p: f64, q: f64, mu: f64, kappa: f64) -> (f64, f64) {
    if !(q > p && kappa > 0.0) {
        return (q, f64::INFINITY);
    }
    if mu <= 0.0 {
        // f t - q F = mu (1 - q/p) |t|^p >= 0; F > 0 once kappa |t|^{q-p}/q > -mu/p.
        let t = if mu < 0.0 {
            (-2.0 * mu * q / (p * kappa)).powf(1.0 / (q - p))
        } else {
            0.0
        };
        (q, t)
    } else {
        let m = 0.5 * (p + q);
        let t = (mu * (m / p - 1.0) / (kappa * (1.0 - m / q))).powf(1.0 / (q - p));
        (m, t)
    }
}

/// Critical Sobolev exponent `Np/(N-p)`, infinite when `p >= N`.
pub fn critical_exponent(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `p < q < p*`.
    pub growth: bool,
    /// `f(t) t >= m F(t) > 0` sampled on `|t| in [T, 10T]`.
    pub superlinear: bool,
    /// `mu < lambda_{1,p}`.
    pub below_first_eigenvalue: bool,
    /// `q > p` and `kappa > 0`.
    pub monotone_quotient: bool,
    pub m: f64,
    pub threshold: f64,
    pub critical_exponent: f64,
    /// `lambda_{1,p} - mu`.
    pub eigenvalue_margin: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.growth && self.superlinear && self.below_first_eigenvalue && self.monotone_quotient
    }
}

const SUPERLINEAR_SAMPLES: usize = 2001;

pub fn validate_hypotheses(nl: &Nonlinearity, lambda_1p: f64, dim: usize) -> HypothesisReport {
    let p_star = critical_exponent(nl.p, dim);
    let growth = nl.q > nl.p && nl.q < p_star;
    let monotone_quotient = nl.q > nl.p && nl.kappa > 0.0;
    let below_first_eigenvalue = nl.mu < lambda_1p;

    let (m, t0) = (nl.m(), nl.threshold());
    let superlinear = monotone_quotient && t0.is_finite() && {
        let lo = t0;
        let hi = 10.0 * t0.max(0.1);
        (0..SUPERLINEAR_SAMPLES).all(|i| {
            let mut t = lo + (hi - lo) * i as f64 / (SUPERLINEAR_SAMPLES - 1) as f64;
            if t == 0.0 {
                t = hi * 1e-6;
            }
            [t, -t].iter().all(|&s| {
                let big_f = nl.F(s);
                // relative slack for the boundary point where equality holds
                nl.f(s) * s - m * big_f >= -1e-12 * (nl.f(s) * s).abs() && big_f > 0.0
            })
        })
    };
    HypothesisReport {
        growth,
        superlinear,
        below_first_eigenvalue,
        monotone_quotient,
        m,
        threshold: t0,
        critical_exponent: p_star,
        eigenvalue_margin: lambda_1p - nl.mu,
    }
}
