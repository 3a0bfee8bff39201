//! Domain types shared by every equation: the ambient space form, the
//! flow parameters `(ε, n, r)` with their constant `C(n, r)`, the unified
//! Euclidean/hyperbolic trigonometric kit, and the symmetry classes of
//! parallel hypersurfaces a translator can be foliated by.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base space `Q_ε^n`: Euclidean space (`ε = 0`) or hyperbolic space (`ε = −1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum SpaceForm {
    Euclidean,
    Hyperbolic,
}

impl SpaceForm {
    pub fn from_epsilon(eps: i32) -> Result<Self> {
        match eps {
            0 => Ok(SpaceForm::Euclidean),
            -1 => Ok(SpaceForm::Hyperbolic),
            other => Err(Error::domain(format!(
                "sectional curvature must be 0 or -1, got {other}"
            ))),
        }
    }

    pub fn epsilon(self) -> i32 {
        match self {
            SpaceForm::Euclidean => 0,
            SpaceForm::Hyperbolic => -1,
        }
    }
}

impl TryFrom<i32> for SpaceForm {
    type Error = Error;

    fn try_from(eps: i32) -> Result<Self> {
        SpaceForm::from_epsilon(eps)
    }
}

impl From<SpaceForm> for i32 {
    fn from(space: SpaceForm) -> i32 {
        space.epsilon()
    }
}

impl fmt::Display for SpaceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.epsilon())
    }
}

/// Selector for the unified trigonometric functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    Cos,
    Sin,
    Tan,
    Cot,
    Sec2,
    Csc2,
}

/// Evaluates `cos_ε`, `sin_ε`, `tan_ε`, `cot_ε`, `sec_ε²` or `csc_ε²` at `s`.
///
/// For `ε = 0` these are `1`, `s`, `s`, `1/s`, `1`, `1/s²`; for `ε = −1`
/// the hyperbolic counterparts.
pub fn trig(space: SpaceForm, kind: TrigKind, s: f64) -> Result<f64> {
    if matches!(kind, TrigKind::Cot | TrigKind::Csc2) && s == 0.0 {
        return Err(Error::domain(format!("{kind:?} is singular at s = 0")));
    }
    let value = match space {
        SpaceForm::Euclidean => match kind {
            TrigKind::Cos | TrigKind::Sec2 => 1.0,
            TrigKind::Sin | TrigKind::Tan => s,
            TrigKind::Cot => 1.0 / s,
            TrigKind::Csc2 => 1.0 / (s * s),
        },
        SpaceForm::Hyperbolic => match kind {
            TrigKind::Cos => s.cosh(),
            TrigKind::Sin => s.sinh(),
            TrigKind::Tan => s.tanh(),
            TrigKind::Cot => 1.0 / s.tanh(),
            TrigKind::Sec2 => {
                let c = s.cosh();
                1.0 / (c * c)
            }
            TrigKind::Csc2 => {
                let sh = s.sinh();
                1.0 / (sh * sh)
            }
        },
    };
    Ok(value)
}

/// Exact binomial coefficient.
///
/// Uses the multiplicative formula in `u128`; every intermediate product is an
/// exact binomial times a small factor, so no overflow occurs for `n ≤ 120`.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// `C(n, r) = r / binom(n − 1, r − 1)`.
pub fn coefficient_c(n: u32, r: u32) -> Result<f64> {
    check_orders(n, r)?;
    Ok(r as f64 / binomial(n - 1, r - 1) as f64)
}

fn check_orders(n: u32, r: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("dimension n must be at least 2, got {n}")));
    }
    if r < 1 || r >= n {
        return Err(Error::domain(format!(
            "curvature order r must satisfy 1 <= r <= n-1, got r={r}, n={n}"
        )));
    }
    Ok(())
}

/// The triple `(ε, n, r)` together with the derived constant `C(n, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FlowParams {
    space: SpaceForm,
    n: u32,
    r: u32,
    c: f64,
}

impl FlowParams {
    pub fn new(space: SpaceForm, n: u32, r: u32) -> Result<Self> {
        let c = coefficient_c(n, r)?;
        Ok(FlowParams { space, n, r, c })
    }

    pub fn from_epsilon(eps: i32, n: u32, r: u32) -> Result<Self> {
        FlowParams::new(SpaceForm::from_epsilon(eps)?, n, r)
    }

    pub fn space(&self) -> SpaceForm {
        self.space
    }

    pub fn epsilon(&self) -> i32 {
        self.space.epsilon()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn r_is_odd(&self) -> bool {
        self.r % 2 == 1
    }

    /// `binom(n − 1, r)`, the weight of the tangential term of `H_r`.
    pub fn tangential_weight(&self) -> f64 {
        binomial(self.n - 1, self.r) as f64
    }

    /// `binom(n − 1, r − 1)`, the weight of the mixed term of `H_r`.
    pub fn mixed_weight(&self) -> f64 {
        binomial(self.n - 1, self.r - 1) as f64
    }
}

impl fmt::Display for FlowParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(eps={}, n={}, r={})", self.epsilon(), self.n, self.r)
    }
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    epsilon: i32,
    n: u32,
    r: u32,
}

impl TryFrom<RawParams> for FlowParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        FlowParams::from_epsilon(raw.epsilon, raw.n, raw.r)
    }
}

impl From<FlowParams> for RawParams {
    fn from(p: FlowParams) -> Self {
        RawParams { epsilon: p.epsilon(), n: p.n, r: p.r }
    }
}

/// Symmetry class of the parallel hypersurfaces `M_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Concentric geodesic spheres.
    Rotational,
    /// Horospheres sharing a point at infinity (hyperbolic only).
    Parabolic,
    /// Equidistant hypersurfaces (hyperbolic only).
    Hyperbolic,
    /// Parallel hyperplanes (Euclidean only).
    Planar,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Rotational => "rotational",
            FamilyKind::Parabolic => "parabolic",
            FamilyKind::Hyperbolic => "hyperbolic",
            FamilyKind::Planar => "planar",
        }
    }
}

/// A family of parallel totally umbilical hypersurfaces with its open
/// parameter interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParallelFamily {
    kind: FamilyKind,
    space: SpaceForm,
    domain: (f64, f64),
}

impl ParallelFamily {
    pub fn new(kind: FamilyKind, params: &FlowParams) -> Result<Self> {
        let space = params.space();
        let domain = match (kind, space) {
            (FamilyKind::Rotational, _) => (0.0, f64::INFINITY),
            (FamilyKind::Parabolic, SpaceForm::Hyperbolic) => (f64::NEG_INFINITY, f64::INFINITY),
            (FamilyKind::Hyperbolic, SpaceForm::Hyperbolic) => {
                if params.r() == 1 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
            (FamilyKind::Planar, SpaceForm::Euclidean) => (f64::NEG_INFINITY, f64::INFINITY),
            (kind, space) => {
                return Err(Error::domain(format!(
                    "{} family does not exist for epsilon = {}",
                    kind.name(),
                    space.epsilon()
                )))
            }
        };
        Ok(ParallelFamily { kind, space, domain })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn space(&self) -> SpaceForm {
        self.space
    }

    /// Open interval of admissible `s`.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, s: f64) -> bool {
        s > self.domain.0 && s < self.domain.1
    }

    /// Principal curvature `α(s)` of the leaf `M_s`.
    pub fn alpha(&self, s: f64) -> Result<f64> {
        if !self.contains(s) {
            return Err(Error::domain(format!(
                "s = {s} outside the {} domain ({}, {})",
                self.kind.name(),
                self.domain.0,
                self.domain.1
            )));
        }
        Ok(-self.neg_alpha(s))
    }

    /// `−α(s)` without the domain check; `+∞` at the rotational center.
    pub(crate) fn neg_alpha(&self, s: f64) -> f64 {
        match self.kind {
            FamilyKind::Rotational => match self.space {
                SpaceForm::Euclidean => 1.0 / s,
                SpaceForm::Hyperbolic => 1.0 / s.tanh(),
            },
            FamilyKind::Parabolic => 1.0,
            FamilyKind::Hyperbolic => s.tanh(),
            FamilyKind::Planar => 0.0,
        }
    }

    /// `(−α(s))^{−1}`, finite at the rotational center.
    pub(crate) fn inv_neg_alpha(&self, s: f64) -> f64 {
        match self.kind {
            FamilyKind::Rotational => match self.space {
                SpaceForm::Euclidean => s,
                SpaceForm::Hyperbolic => s.tanh(),
            },
            FamilyKind::Parabolic => 1.0,
            FamilyKind::Hyperbolic => 1.0 / s.tanh(),
            FamilyKind::Planar => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eps: i32, n: u32, r: u32) -> FlowParams {
        FlowParams::from_epsilon(eps, n, r).unwrap()
    }

    #[test]
    fn trig_table_values() {
        assert_eq!(trig(SpaceForm::Euclidean, TrigKind::Cot, 2.0).unwrap(), 0.5);
        assert_eq!(trig(SpaceForm::Hyperbolic, TrigKind::Cos, 0.0).unwrap(), 1.0);
        let t = trig(SpaceForm::Hyperbolic, TrigKind::Tan, 1.0).unwrap();
        assert!((t - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert_eq!(trig(SpaceForm::Euclidean, TrigKind::Sin, 3.5).unwrap(), 3.5);
        assert_eq!(trig(SpaceForm::Euclidean, TrigKind::Cos, 3.5).unwrap(), 1.0);
    }

    #[test]
    fn trig_rejects_singular_points() {
        for space in [SpaceForm::Euclidean, SpaceForm::Hyperbolic] {
            assert!(matches!(trig(space, TrigKind::Cot, 0.0), Err(Error::Domain(_))));
            assert!(matches!(trig(space, TrigKind::Csc2, 0.0), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn coefficient_values() {
        for n in 2..10 {
            assert_eq!(coefficient_c(n, 1).unwrap(), 1.0);
        }
        assert_eq!(coefficient_c(4, 3).unwrap(), 1.0);
        assert_eq!(coefficient_c(5, 2).unwrap(), 0.5);
        assert!(coefficient_c(4, 4).is_err());
        assert!(coefficient_c(4, 0).is_err());
        assert!(coefficient_c(1, 1).is_err());
    }

    #[test]
    fn coefficient_times_binomial_is_r() {
        for n in 2..=60u32 {
            for r in 1..n {
                let b = binomial(n - 1, r - 1);
                // C · binom = r exactly in rational arithmetic; check the float
                // product rounds back to r.
                let c = coefficient_c(n, r).unwrap();
                assert!((c * b as f64 - r as f64).abs() <= 1e-12 * r as f64, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn binomial_exact() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(59, 29), 59_132_290_782_430_712);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn alpha_per_family() {
        let rot = ParallelFamily::new(FamilyKind::Rotational, &p(0, 4, 3)).unwrap();
        assert_eq!(rot.alpha(2.0).unwrap(), -0.5);
        assert!(rot.alpha(0.0).is_err());
        assert!(rot.alpha(-1.0).is_err());
        assert!(rot.alpha(1e-7).unwrap().abs() > 1e6);

        let par = ParallelFamily::new(FamilyKind::Parabolic, &p(-1, 4, 3)).unwrap();
        assert_eq!(par.alpha(-17.0).unwrap(), -1.0);
        assert_eq!(par.alpha(3.0).unwrap(), -1.0);

        let hyp = ParallelFamily::new(FamilyKind::Hyperbolic, &p(-1, 4, 1)).unwrap();
        assert_eq!(hyp.alpha(0.0).unwrap(), 0.0);
        let hyp3 = ParallelFamily::new(FamilyKind::Hyperbolic, &p(-1, 4, 3)).unwrap();
        assert!(hyp3.alpha(0.0).is_err());

        let planar = ParallelFamily::new(FamilyKind::Planar, &p(0, 3, 1)).unwrap();
        assert_eq!(planar.alpha(5.0).unwrap(), 0.0);
    }

    #[test]
    fn family_space_compatibility() {
        assert!(ParallelFamily::new(FamilyKind::Parabolic, &p(0, 3, 1)).is_err());
        assert!(ParallelFamily::new(FamilyKind::Hyperbolic, &p(0, 3, 1)).is_err());
        assert!(ParallelFamily::new(FamilyKind::Planar, &p(-1, 3, 1)).is_err());
        assert!(ParallelFamily::new(FamilyKind::Rotational, &p(-1, 3, 1)).is_ok());
    }

    #[test]
    fn params_serde_roundtrip() {
        let params = p(-1, 5, 2);
        let text = serde_json::to_string(&params).unwrap();
        assert_eq!(text, r#"{"epsilon":-1,"n":5,"r":2}"#);
        let back: FlowParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, params);
        assert!(serde_json::from_str::<FlowParams>(r#"{"epsilon":1,"n":5,"r":2}"#).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tan_times_cot_is_one(s in 1e-6f64..50.0, hyperbolic in any::<bool>()) {
                let space = if hyperbolic { SpaceForm::Hyperbolic } else { SpaceForm::Euclidean };
                let t = trig(space, TrigKind::Tan, s).unwrap();
                let c = trig(space, TrigKind::Cot, s).unwrap();
                prop_assert!((t * c - 1.0).abs() < 1e-14);
            }

            #[test]
            fn alpha_is_nonpositive(s in 1e-6f64..40.0, n in 2u32..8, r_off in 0u32..6) {
                let r = 1 + r_off % (n - 1);
                for (eps, kind) in [
                    (0, FamilyKind::Rotational),
                    (-1, FamilyKind::Rotational),
                    (-1, FamilyKind::Parabolic),
                    (-1, FamilyKind::Hyperbolic),
                ] {
                    let params = FlowParams::from_epsilon(eps, n, r).unwrap();
                    let fam = ParallelFamily::new(kind, &params).unwrap();
                    prop_assert!(fam.alpha(s).unwrap() <= 0.0);
                }
            }
        }
    }
}
