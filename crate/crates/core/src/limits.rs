//! The asymptotic constant `L` and the quantities derived from it, computed
//! algebraically and independently of any integration.

use serde::{Deserialize, Serialize};

use crate::model::{binomial, FlowParams, SpaceForm};
use crate::roots::bisect;
use crate::slopefield::complement;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitMethod {
    ClosedForm,
    Bisection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    #[serde(rename = "L")]
    pub l: f64,
    pub theta_infinity: f64,
    pub apex_curvature: f64,
    pub method: LimitMethod,
}

/// `g(y) = C √(1 − y^{2/r}) − (n − r) y`, strictly decreasing on `[0, 1]`.
pub fn defining_function(params: &FlowParams, y: f64) -> f64 {
    params.c() * complement(y, params.r()).max(0.0).sqrt() - (params.n() - params.r()) as f64 * y
}

/// `L = 1` for `ε = 0`; otherwise the root of [`defining_function`] in `(0, 1)`.
pub fn solve_l(params: &FlowParams) -> LimitReport {
    let (l, method) = match params.space() {
        SpaceForm::Euclidean => (1.0, LimitMethod::ClosedForm),
        SpaceForm::Hyperbolic => {
            let l = bisect(|y| defining_function(params, y), 0.0, 1.0, 1e-15)
                .expect("g(0) = C > 0 and g(1) = r - n < 0");
            (l, LimitMethod::Bisection)
        }
    };
    LimitReport {
        l,
        theta_infinity: complement(l, params.r()).max(0.0).sqrt(),
        apex_curvature: apex_curvature(params),
        method,
    }
}

/// `√(1 − L^{2/r})`, the limiting angle function of every branch.
pub fn asymptotic_angle(params: &FlowParams) -> f64 {
    solve_l(params).theta_infinity
}

/// `(C/n)^{1/r}`, the common principal curvature of the bowl at its axis.
pub fn apex_curvature(params: &FlowParams) -> f64 {
    (params.c() / params.n() as f64).powf(1.0 / params.r() as f64)
}

/// `binom(n, r) · (C/n)` in exact rational arithmetic, as `(numerator, denominator)`.
pub fn apex_identity_exact(n: u32, r: u32) -> (u128, u128) {
    (binomial(n, r) * r as u128, binomial(n - 1, r - 1) * n as u128)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eps: i32, n: u32, r: u32) -> FlowParams {
        FlowParams::from_epsilon(eps, n, r).unwrap()
    }

    #[test]
    fn euclidean_limit_is_one() {
        for n in 2..8 {
            for r in 1..n {
                let rep = solve_l(&p(0, n, r));
                assert_eq!(rep.l, 1.0);
                assert_eq!(rep.theta_infinity, 0.0);
                assert_eq!(rep.method, LimitMethod::ClosedForm);
            }
        }
    }

    #[test]
    fn hyperbolic_limits_match_high_precision_roots() {
        // Reference roots computed with 30-digit bisection.
        let cases = [
            ((2, 1), 0.707_106_781_186_547_5),
            ((4, 1), 0.316_227_766_016_837_9),
            ((4, 3), 0.563_624_162_161_258_5),
            ((5, 4), 0.524_888_598_656_404_8),
            ((6, 5), 0.495_098_307_160_615_6),
        ];
        for ((n, r), l) in cases {
            let rep = solve_l(&p(-1, n, r));
            assert!((rep.l - l).abs() < 1e-14, "n={n} r={r}: {}", rep.l);
            assert!(defining_function(&p(-1, n, r), rep.l).abs() < 1e-13);
        }
        assert!((solve_l(&p(-1, 4, 3)).l - 0.564).abs() < 0.005);
    }

    #[test]
    fn asymptotic_angles() {
        assert_eq!(asymptotic_angle(&p(0, 5, 2)), 0.0);
        assert!((asymptotic_angle(&p(-1, 2, 1)) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((asymptotic_angle(&p(-1, 4, 1)) - 3.0 / 10f64.sqrt()).abs() < 1e-14);
        let l = solve_l(&p(-1, 4, 3)).l;
        assert!((asymptotic_angle(&p(-1, 4, 3)) - (1.0 - l.powf(2.0 / 3.0)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn apex_values() {
        assert!((apex_curvature(&p(0, 5, 1)) - 0.2).abs() < 1e-15);
        assert!((apex_curvature(&p(0, 4, 3)) - 0.629_960_524_947_436_6).abs() < 1e-12);
        for n in 2..=10 {
            for r in 1..n {
                let (num, den) = apex_identity_exact(n, r);
                assert_eq!(num, den);
                let a = apex_curvature(&p(0, n, r));
                let v = binomial(n, r) as f64 * a.powi(r as i32);
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bisection_is_well_posed_on_the_grid() {
        for n in 2..=12 {
            for r in 1..n {
                let params = p(-1, n, r);
                assert!(defining_function(&params, 0.0) > 0.0);
                assert!(defining_function(&params, 1.0) < 0.0);
                let l = solve_l(&params).l;
                assert!(l > 0.0 && l < 1.0);
                assert!(defining_function(&params, l).abs() < 1e-13);
            }
        }
    }
}
