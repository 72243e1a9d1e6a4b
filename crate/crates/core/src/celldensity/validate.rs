//! Advisory parameter checks. Nothing here blocks a run.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::params::ModelParams;

/// One condition with its outcome. `margin > 0` means satisfied with room.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: &'static str,
    pub satisfied: bool,
    pub margin: f64,
    pub detail: String,
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.satisfied { "ok" } else { "VIOLATED" };
        write!(f, "{:<12} {:<9} margin {:+.6}  {}", self.name, mark, self.margin, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamValidation {
    pub reports: Vec<ConditionReport>,
    /// `max{1, d/(d+1)(n₂+α), τ d/(d+1)(n₃+β)}` as an exact fraction `n/d`.
    pub gamma_threshold: String,
}

impl ParamValidation {
    pub fn get(&self, name: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn all_satisfied(&self) -> bool {
        self.reports.iter().all(|r| r.satisfied)
    }
}

/// The simplest fraction whose nearest double is `x` (denominator up to 1e9),
/// so inputs such as `1.75` or `5.0 / 3.0` denote `7/4` and `5/3`; other
/// doubles are taken at their exact binary value. Non-finite inputs are
/// rejected by the hard parameter checks and map to zero here.
fn rational(x: f64) -> BigRational {
    if !x.is_finite() {
        return BigRational::default();
    }
    // continued-fraction convergents of |x|
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut rest = x.abs();
    while q1 <= 1_000_000_000 {
        let a = rest.floor();
        if a > 1e15 {
            break;
        }
        let (p2, q2) = (a as i128 * p1 + p0, a as i128 * q1 + q0);
        if q2 > 1_000_000_000 {
            break;
        }
        if p2 as f64 / q2 as f64 == x.abs() {
            let r = BigRational::new(p2.into(), q2.into());
            return if x < 0.0 { -r } else { r };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rest - a;
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    BigRational::from_float(x).unwrap_or_default()
}

fn integer(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Lower bound on γ for global boundedness, computed exactly from the
/// binary values of the parameters.
pub fn condgamma_threshold(params: &ModelParams, dim: usize) -> BigRational {
    let d = BigRational::new((dim as i64).into(), (dim as i64 + 1).into());
    let attraction = &d * (rational(params.n2) + rational(params.alpha));
    let repulsion = integer(params.effective_tau() as i64) * &d * (rational(params.n3) + rational(params.beta));
    [BigRational::one(), attraction, repulsion]
        .into_iter()
        .max()
        .unwrap()
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn validate_params(params: &ModelParams, dim: usize) -> ParamValidation {
    let threshold = condgamma_threshold(params, dim);
    let gamma = rational(params.gamma);
    let two = integer(2);
    let mut reports = vec![ConditionReport {
        name: "condgamma",
        satisfied: threshold < gamma && gamma <= two,
        margin: to_f64(&(&gamma - &threshold)).min(to_f64(&(&two - &gamma))),
        detail: format!(
            "threshold {}/{} ({:.6}) < gamma = {} <= 2",
            threshold.numer(),
            threshold.denom(),
            to_f64(&threshold),
            params.gamma
        ),
    }];
    reports.push(ConditionReport {
        name: "logistic",
        satisfied: 1.0 <= params.rho && params.rho < params.k,
        margin: if params.rho >= 1.0 { params.k - params.rho } else { params.rho - 1.0 },
        detail: format!("1 <= rho = {} < k = {}", params.rho, params.k),
    });
    reports.push(ConditionReport {
        name: "gamma-range",
        satisfied: (1.0..=2.0).contains(&params.gamma),
        margin: (params.gamma - 1.0).min(2.0 - params.gamma),
        detail: format!("gamma = {} in [1, 2]", params.gamma),
    });
    for (name, v) in [
        ("chi", params.chi),
        ("xi", params.xi),
        ("lambda", params.lambda),
        ("mu", params.mu),
        ("c", params.c),
    ] {
        reports.push(ConditionReport {
            name,
            satisfied: v > 0.0,
            margin: v,
            detail: format!("{name} = {v} > 0"),
        });
    }
    ParamValidation {
        reports,
        gamma_threshold: format!("{}/{}", threshold.numer(), threshold.denom()),
    }
}

/// Upper bound on the mass `max{∫u₀, (λ/μ·|Ω|^{k−ρ})^{1/(k−ρ)}}`. Infinite
/// when the logistic balance is absent (`μ = 0` with `λ > 0`, or `k ≤ ρ`).
pub fn mass_ceiling(params: &ModelParams, initial_mass: f64, domain_measure: f64) -> f64 {
    if params.lambda == 0.0 {
        return initial_mass;
    }
    let q = params.k - params.rho;
    if params.mu == 0.0 || q <= 0.0 {
        return f64::INFINITY;
    }
    let logistic = (params.lambda / params.mu * domain_measure.powf(q)).powf(1.0 / q);
    initial_mass.max(logistic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_reduces_to_one_without_signals() {
        let p = ModelParams {
            n2: 0.1,
            alpha: 0.1,
            n3: 0.1,
            beta: 0.1,
            ..Default::default()
        };
        assert_eq!(condgamma_threshold(&p, 2), BigRational::one());
    }

    #[test]
    fn elliptic_ignores_repulsion() {
        let p = ModelParams {
            tau: 0,
            n3: 5.0,
            ..Default::default()
        };
        assert_eq!(condgamma_threshold(&p, 2), BigRational::new(4.into(), 3.into()));
    }

    #[test]
    fn arbitrary_doubles_stay_exact() {
        let p = ModelParams {
            n2: 1.3154685386887532,
            alpha: 0.884372300648298,
            n3: 1.6665083685207098,
            beta: 1.46550976339581,
            gamma: 1.0736348321090905,
            ..Default::default()
        };
        let v = validate_params(&p, 3);
        let c = v.get("condgamma").unwrap();
        assert!(!c.satisfied);
        assert!((c.margin - (1.0736348321090905 - 0.75 * (1.6665083685207098 + 1.46550976339581))).abs() < 1e-15);
    }

    #[test]
    fn decimal_inputs_denote_simple_fractions() {
        assert_eq!(rational(1.75), BigRational::new(7.into(), 4.into()));
        assert_eq!(rational(-0.1), BigRational::new((-1).into(), 10.into()));
        assert_eq!(rational(5.0 / 3.0), BigRational::new(5.into(), 3.into()));
        assert_eq!(rational(0.0), BigRational::default());
        // no short fraction rounds to this double: exact binary value
        let x = 1.0 + f64::EPSILON;
        assert_eq!(rational(x), BigRational::from_float(x).unwrap());
        // γ entered as 5/3 sits exactly on the strict bound
        let q = ModelParams {
            gamma: 5.0 / 3.0,
            alpha: 1.5,
            ..Default::default()
        };
        let v = validate_params(&q, 2);
        assert_eq!(v.gamma_threshold, "5/3");
        assert!(!v.get("condgamma").unwrap().satisfied);
    }

    #[test]
    fn mass_ceiling_without_growth() {
        let p = ModelParams {
            lambda: 0.0,
            ..Default::default()
        };
        assert_eq!(mass_ceiling(&p, 3.0, 1.0), 3.0);
    }
}
