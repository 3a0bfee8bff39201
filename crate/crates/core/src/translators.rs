//! Named translators: bowls, catenoids, grim reapers and the vertical
//! hyperplane, assembled from one or two profiles.
//!
//! Odd-`r` catenoids join the `τ⁻` and `τ⁺` sheets along their common vertical
//! tangent at `s = λ`, placed at height 0. Even-`r` catenoids glue a single
//! sheet to its mirror image across the plane `φ = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::{solve_branch, solve_tau_zero, Branch, StepControl};
use crate::limits::solve_l;
use crate::model::{FamilyKind, FlowParams, ParallelFamily, SpaceForm};
use crate::profile::{build_profile, Profile, SignBranch};
use crate::roots::brent;

/// Tolerance on `θ` at a reflection boundary.
pub const GLUE_THETA_TOL: f64 = 1e-8;
/// Tolerance on the height mismatch where two sheets meet.
pub const GLUE_PHI_TOL: f64 = 1e-9;

/// Which translator to build; `λ` is the starting point `s0` of the branches
/// (catenoids) or the value `τ(0)` (hyperbolic grim reaper).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda")]
pub enum TranslatorKind {
    Bowl,
    CatenoidOdd(f64),
    CatenoidEven1(f64),
    CatenoidEven2(f64),
    ParabolicBowl,
    ParabolicCatenoidOdd(f64),
    ParabolicCatenoidEven1(f64),
    ParabolicCatenoidEven2(f64),
    HyperbolicGrimReaper(f64),
    HyperbolicCatenoidOdd(f64),
    HyperbolicCatenoidEven1(f64),
    HyperbolicCatenoidEven2(f64),
    EuclideanGrimReaper,
    VerticalHyperplane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatenoidVariant {
    Odd,
    Even1,
    Even2,
}

impl CatenoidVariant {
    fn needs_odd_r(self) -> bool {
        self == CatenoidVariant::Odd
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GrimReaperVariant {
    Euclidean,
    Hyperbolic(f64),
}

/// Which boundary value of `θ` a reflection glues along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlueKind {
    ThetaOne,
    ThetaZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    Smooth,
    C2SingularSet,
    C1SingularSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslatorSpec {
    pub params: FlowParams,
    pub family_kind: TranslatorKind,
    pub ctrl: StepControl,
}

impl TranslatorSpec {
    pub fn new(params: FlowParams, family_kind: TranslatorKind, ctrl: StepControl) -> Self {
        TranslatorSpec { params, family_kind, ctrl }
    }

    /// Builds the translator described by this spec.
    pub fn build(&self) -> Result<Translator> {
        use TranslatorKind::*;
        let (p, c) = (&self.params, &self.ctrl);
        let cat = |family, lambda, variant| build_catenoid(p, family, lambda, variant, c);
        match self.family_kind {
            Bowl => build_bowl(p, FamilyKind::Rotational, c),
            ParabolicBowl => build_bowl(p, FamilyKind::Parabolic, c),
            CatenoidOdd(l) => cat(FamilyKind::Rotational, l, CatenoidVariant::Odd),
            CatenoidEven1(l) => cat(FamilyKind::Rotational, l, CatenoidVariant::Even1),
            CatenoidEven2(l) => cat(FamilyKind::Rotational, l, CatenoidVariant::Even2),
            ParabolicCatenoidOdd(l) => cat(FamilyKind::Parabolic, l, CatenoidVariant::Odd),
            ParabolicCatenoidEven1(l) => cat(FamilyKind::Parabolic, l, CatenoidVariant::Even1),
            ParabolicCatenoidEven2(l) => cat(FamilyKind::Parabolic, l, CatenoidVariant::Even2),
            HyperbolicCatenoidOdd(l) => cat(FamilyKind::Hyperbolic, l, CatenoidVariant::Odd),
            HyperbolicCatenoidEven1(l) => cat(FamilyKind::Hyperbolic, l, CatenoidVariant::Even1),
            HyperbolicCatenoidEven2(l) => cat(FamilyKind::Hyperbolic, l, CatenoidVariant::Even2),
            HyperbolicGrimReaper(l) => build_grim_reaper(p, GrimReaperVariant::Hyperbolic(l), c),
            EuclideanGrimReaper => build_grim_reaper(p, GrimReaperVariant::Euclidean, c),
            VerticalHyperplane => Ok(vertical_hyperplane(p, c)),
        }
    }

    /// The family of parallels the translator is a graph over.
    pub fn family(&self) -> FamilyKind {
        use TranslatorKind::*;
        match self.family_kind {
            Bowl | CatenoidOdd(_) | CatenoidEven1(_) | CatenoidEven2(_) => FamilyKind::Rotational,
            ParabolicBowl | ParabolicCatenoidOdd(_) | ParabolicCatenoidEven1(_) | ParabolicCatenoidEven2(_) => {
                FamilyKind::Parabolic
            }
            HyperbolicGrimReaper(_)
            | HyperbolicCatenoidOdd(_)
            | HyperbolicCatenoidEven1(_)
            | HyperbolicCatenoidEven2(_) => FamilyKind::Hyperbolic,
            EuclideanGrimReaper | VerticalHyperplane => FamilyKind::Planar,
        }
    }

    pub fn catenoid(family: FamilyKind, lambda: f64, variant: CatenoidVariant) -> Result<TranslatorKind> {
        use CatenoidVariant::*;
        use TranslatorKind::*;
        Ok(match (family, variant) {
            (FamilyKind::Rotational, Odd) => CatenoidOdd(lambda),
            (FamilyKind::Rotational, Even1) => CatenoidEven1(lambda),
            (FamilyKind::Rotational, Even2) => CatenoidEven2(lambda),
            (FamilyKind::Parabolic, Odd) => ParabolicCatenoidOdd(lambda),
            (FamilyKind::Parabolic, Even1) => ParabolicCatenoidEven1(lambda),
            (FamilyKind::Parabolic, Even2) => ParabolicCatenoidEven2(lambda),
            (FamilyKind::Hyperbolic, Odd) => HyperbolicCatenoidOdd(lambda),
            (FamilyKind::Hyperbolic, Even1) => HyperbolicCatenoidEven1(lambda),
            (FamilyKind::Hyperbolic, Even2) => HyperbolicCatenoidEven2(lambda),
            (FamilyKind::Planar, _) => return Err(Error::domain("no catenoids over parallel hyperplanes")),
        })
    }
}

/// One sheet of a translator.
#[derive(Clone, Debug)]
pub struct TranslatorBranch {
    pub profile: Profile,
    /// `+1` when the sheet's upward normal agrees with the glued orientation.
    pub orientation: i8,
    pub reflected: bool,
    pub tag: String,
}

#[derive(Clone, Debug)]
pub struct Translator {
    pub spec: TranslatorSpec,
    pub branches: Vec<TranslatorBranch>,
    pub regularity: Regularity,
    pub min_height: Option<f64>,
    pub s_min_height: Option<f64>,
    /// Set for the vertical hyperplane, which has no graph profile.
    pub degenerate: bool,
}

impl Translator {
    /// Largest `|H_r − θ|` over unflagged samples away from singular marks.
    pub fn max_residual(&self) -> f64 {
        self.branches.iter().map(|b| b.profile.max_residual(1e-6)).fold(0.0, f64::max)
    }

    pub fn branch(&self, tag: &str) -> Option<&TranslatorBranch> {
        self.branches.iter().find(|b| b.tag == tag)
    }
}

fn branch(profile: Profile, orientation: i8, reflected: bool, tag: &str) -> TranslatorBranch {
    TranslatorBranch { profile, orientation, reflected, tag: tag.to_string() }
}

fn vertical_hyperplane(params: &FlowParams, ctrl: &StepControl) -> Translator {
    Translator {
        spec: TranslatorSpec::new(*params, TranslatorKind::VerticalHyperplane, *ctrl),
        branches: Vec::new(),
        regularity: Regularity::Smooth,
        min_height: None,
        s_min_height: None,
        degenerate: true,
    }
}

/// The entire rotational bowl or the parabolic constant-angle graph.
pub fn build_bowl(params: &FlowParams, family: FamilyKind, ctrl: &StepControl) -> Result<Translator> {
    let kind = match family {
        FamilyKind::Rotational => TranslatorKind::Bowl,
        FamilyKind::Parabolic => TranslatorKind::ParabolicBowl,
        other => return Err(Error::domain(format!("no bowl over the {} family", other.name()))),
    };
    let fam = ParallelFamily::new(family, params)?;
    let traj = solve_tau_zero(params, &fam, None, ctrl)?;
    let profile = build_profile(&traj, SignBranch::Plus, 0.0, 0.0)?;
    let (min_height, s_min_height) = match family {
        FamilyKind::Rotational => (Some(0.0), Some(0.0)),
        _ => (None, None),
    };
    Ok(Translator {
        spec: TranslatorSpec::new(*params, kind, *ctrl),
        branches: vec![branch(profile, 1, false, "zero")],
        regularity: Regularity::Smooth,
        min_height,
        s_min_height,
        degenerate: false,
    })
}

/// Catenoid-type translators started from the boundary of the strip at `λ`.
pub fn build_catenoid(
    params: &FlowParams,
    family: FamilyKind,
    lambda: f64,
    variant: CatenoidVariant,
    ctrl: &StepControl,
) -> Result<Translator> {
    let kind = TranslatorSpec::catenoid(family, lambda, variant)?;
    if variant.needs_odd_r() != params.r_is_odd() {
        return Err(Error::Parity(format!(
            "{variant:?} catenoids need {} r, got r = {}",
            if variant.needs_odd_r() { "odd" } else { "even" },
            params.r()
        )));
    }
    if !lambda.is_finite() || (family != FamilyKind::Parabolic && lambda <= 0.0) {
        return Err(Error::domain(format!("lambda = {lambda} must be positive for the {} family", family.name())));
    }
    let fam = ParallelFamily::new(family, params)?;
    let spec = TranslatorSpec::new(*params, kind, *ctrl);

    match variant {
        CatenoidVariant::Odd => {
            let minus = solve_branch(params, &fam, Branch::Minus, lambda, ctrl)?;
            let plus = solve_branch(params, &fam, Branch::Plus, lambda, ctrl)?;
            let s_zero = *minus
                .zero_crossings()
                .first()
                .ok_or_else(|| Error::Glue(format!("tau minus from {lambda} never reaches zero")))?;
            let lower = build_profile(&minus, SignBranch::Plus, lambda, 0.0)?;
            let upper = build_profile(&plus, SignBranch::Plus, lambda, 0.0)?;
            let mismatch = (lower.samples()[0].phi - upper.samples()[0].phi).abs();
            if mismatch > GLUE_PHI_TOL {
                return Err(Error::Glue(format!("sheets disagree by {mismatch:e} at s = {lambda}")));
            }
            let min_height = lower.phi_at(s_zero)?;
            Ok(Translator {
                spec,
                branches: vec![branch(lower, -1, false, "minus"), branch(upper, 1, false, "plus")],
                regularity: if params.r() > 1 { Regularity::C2SingularSet } else { Regularity::Smooth },
                min_height: Some(min_height),
                s_min_height: Some(s_zero),
                degenerate: false,
            })
        }
        CatenoidVariant::Even1 => {
            let minus = solve_branch(params, &fam, Branch::Minus, lambda, ctrl)?;
            let s_zero = *minus
                .zero_crossings()
                .first()
                .ok_or_else(|| Error::Glue(format!("tau minus from {lambda} never reaches zero")))?;
            let hat = minus.restricted_from(s_zero)?;
            let upper = build_profile(&hat, SignBranch::Plus, s_zero, 0.0)?;
            let mut t = reflect_glue(upper, GlueKind::ThetaOne)?;
            t.spec = spec;
            Ok(t)
        }
        CatenoidVariant::Even2 => {
            let plus = solve_branch(params, &fam, Branch::Plus, lambda, ctrl)?;
            let upper = build_profile(&plus, SignBranch::Plus, lambda, 0.0)?;
            let mut t = reflect_glue(upper, GlueKind::ThetaZero)?;
            t.spec = spec;
            Ok(t)
        }
    }
}

/// Glues an even-`r` sheet whose left boundary lies on `φ = 0` to its mirror
/// image `φ ↦ −φ`.
pub fn reflect_glue(upper: Profile, glue_kind: GlueKind) -> Result<Translator> {
    let params = *upper.params();
    if params.r_is_odd() {
        return Err(Error::Parity(format!("reflection gluing needs even r, got r = {}", params.r())));
    }
    let first = upper.samples()[0];
    let (target, regularity, tag) = match glue_kind {
        GlueKind::ThetaOne => (1.0, Regularity::C1SingularSet, "hat-minus"),
        GlueKind::ThetaZero => (0.0, Regularity::Smooth, "plus"),
    };
    if (first.theta - target).abs() > GLUE_THETA_TOL {
        return Err(Error::Glue(format!(
            "boundary angle {} at s = {} does not match {glue_kind:?}",
            first.theta, first.s
        )));
    }
    if first.phi.abs() > GLUE_PHI_TOL {
        return Err(Error::Glue(format!("boundary height {} is off the reflection plane", first.phi)));
    }
    let family = upper.family().kind();
    let lambda = first.s;
    let kind = TranslatorSpec::catenoid(
        family,
        lambda,
        match glue_kind {
            GlueKind::ThetaOne => CatenoidVariant::Even1,
            GlueKind::ThetaZero => CatenoidVariant::Even2,
        },
    )?;
    let mirror = upper.reflected();
    Ok(Translator {
        spec: TranslatorSpec::new(params, kind, StepControl::default()),
        branches: vec![branch(upper, 1, false, tag), branch(mirror, -1, true, tag)],
        regularity,
        min_height: None,
        s_min_height: None,
        degenerate: false,
    })
}

/// Grid spacing of the closed-form Euclidean grim reaper.
const REAPER_STEP: f64 = 1e-3;
const REAPER_HALF_WIDTH: f64 = 1.57;

/// The `r = 1` grim reapers: `φ = −log cos s` over parallel hyperplanes, or the
/// entire hyperbolic solution through `τ(0) = λ`, based at its lowest point.
pub fn build_grim_reaper(params: &FlowParams, variant: GrimReaperVariant, ctrl: &StepControl) -> Result<Translator> {
    if params.r() != 1 {
        return Err(Error::domain(format!(
            "grim reapers exist only for r = 1 (r = {} degenerates to a vertical hyperplane)",
            params.r()
        )));
    }
    match variant {
        GrimReaperVariant::Euclidean => {
            if params.space() != SpaceForm::Euclidean {
                return Err(Error::domain("the closed-form grim reaper lives in Euclidean space"));
            }
            let fam = ParallelFamily::new(FamilyKind::Planar, params)?;
            let k = (REAPER_HALF_WIDTH / REAPER_STEP).round() as i64;
            let grid: Vec<f64> = (-k..=k).map(|i| i as f64 * REAPER_STEP).collect();
            let profile = Profile::from_closed_form(*params, fam, &grid, |s| (s.sin(), s.cos(), s.cos()), 0.0, 0.0)?;
            Ok(Translator {
                spec: TranslatorSpec::new(*params, TranslatorKind::EuclideanGrimReaper, *ctrl),
                branches: vec![branch(profile, 1, false, "closed-form")],
                regularity: Regularity::Smooth,
                min_height: Some(0.0),
                s_min_height: Some(0.0),
                degenerate: false,
            })
        }
        GrimReaperVariant::Hyperbolic(lambda) => {
            let fam = ParallelFamily::new(FamilyKind::Hyperbolic, params)?;
            let traj = solve_tau_zero(params, &fam, Some(lambda), ctrl)?;
            let (lo, hi) = traj.s_span();
            let s_low = if lambda == 0.0 {
                0.0
            } else {
                brent(|s| traj.tau_at(s).unwrap_or(f64::NAN), lo, hi, 1e-14)?
            };
            let profile = build_profile(&traj, SignBranch::Plus, s_low, 0.0)?;
            Ok(Translator {
                spec: TranslatorSpec::new(*params, TranslatorKind::HyperbolicGrimReaper(lambda), *ctrl),
                branches: vec![branch(profile, 1, false, "centered")],
                regularity: Regularity::Smooth,
                min_height: Some(0.0),
                s_min_height: Some(s_low),
                degenerate: false,
            })
        }
    }
}

/// `λ = 2^{−k}` for `k = 0..count`.
pub fn default_lambda_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| 0.5f64.powi(k as i32)).collect()
}

/// Builds one catenoid per `λ` in parallel, capped by `TRANSLATOR_LAB_THREADS`.
pub fn sweep_catenoids(
    params: &FlowParams,
    family: FamilyKind,
    variant: CatenoidVariant,
    lambdas: &[f64],
    ctrl: &StepControl,
) -> Vec<Result<Translator>> {
    crate::with_sweep_pool(|| {
        lambdas.par_iter().map(|&l| build_catenoid(params, family, l, variant, ctrl)).collect()
    })
}

/// `√(1 − L^{2/r})`, the limiting angle of every branch reaching `s_max`.
pub fn expected_limit_angle(params: &FlowParams) -> f64 {
    solve_l(params).theta_infinity
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::MarkKind;

    fn p(eps: i32, n: u32, r: u32) -> FlowParams {
        FlowParams::from_epsilon(eps, n, r).unwrap()
    }

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn euclidean_bowl_is_strictly_convex_and_unbounded() {
        let t = build_bowl(&p(0, 4, 3), FamilyKind::Rotational, &ctrl()).unwrap();
        assert!(t.max_residual() < 1e-8);
        let prof = &t.branches[0].profile;
        let at1 = prof.evaluate(1.0).unwrap();
        assert!(at1.k_tangent > 0.0 && at1.k_normal > 0.0);
        for smp in prof.samples().iter().filter(|smp| smp.s > 0.0) {
            assert!(smp.k_tangent > 0.0 && smp.k_normal > 0.0, "s = {}", smp.s);
        }
        let rho_a = prof.evaluate(1.0).unwrap().rho;
        for smp in prof.samples().iter().filter(|smp| smp.s > 1.0) {
            assert!(smp.phi >= rho_a * (smp.s - 1.0));
        }
        // L = 1 makes the linear rate infinite; slope one is already a lower bound
        let s_max = ctrl().s_max;
        assert!(prof.phi_at(s_max).unwrap() > prof.phi_at(s_max / 2.0).unwrap() + s_max / 4.0);
    }

    #[test]
    fn hyperbolic_bowl_grows_at_the_asymptotic_rate() {
        let params = p(-1, 4, 3);
        let t = build_bowl(&params, FamilyKind::Rotational, &ctrl()).unwrap();
        let prof = &t.branches[0].profile;
        let l = solve_l(&params).l;
        let rho = l.powf(1.0 / 3.0);
        let c = rho / 2.0 / (1.0 - rho * rho).sqrt() * 0.5;
        let s_max = ctrl().s_max;
        assert!(prof.phi_at(s_max).unwrap() > prof.phi_at(s_max / 2.0).unwrap() + c * s_max / 4.0);
    }

    #[test]
    fn parabolic_bowl_is_a_straight_line_for_n2() {
        let t = build_bowl(&p(-1, 2, 1), FamilyKind::Parabolic, &ctrl()).unwrap();
        for smp in t.branches[0].profile.samples() {
            assert!((smp.phi - smp.s).abs() < 1e-10, "s = {}: {}", smp.s, smp.phi);
            assert_eq!(smp.k_normal, 0.0);
        }
    }

    #[test]
    fn no_bowl_over_equidistants() {
        assert!(matches!(build_bowl(&p(-1, 4, 3), FamilyKind::Hyperbolic, &ctrl()), Err(Error::Domain(_))));
    }

    #[test]
    fn odd_catenoid_sits_below_its_neck() {
        let t = build_catenoid(&p(0, 4, 3), FamilyKind::Rotational, 0.5, CatenoidVariant::Odd, &ctrl()).unwrap();
        assert_eq!(t.branches.len(), 2);
        assert_eq!(t.regularity, Regularity::C2SingularSet);
        assert!(t.min_height.unwrap() < 0.0);
        let lower = &t.branch("minus").unwrap().profile;
        let upper = &t.branch("plus").unwrap().profile;
        assert_eq!(lower.samples()[0].s, 0.5);
        assert_eq!(lower.samples()[0].theta, 0.0);
        let c2 = lower.marks().iter().filter(|m| m.kind == MarkKind::C2Blowup).count();
        assert_eq!(c2, 1);
        let kn = lower.samples()[0].k_normal + upper.samples()[0].k_normal;
        assert!(kn.abs() < 1e-10, "{kn}");
        assert!(t.max_residual() < 1e-8);
    }

    #[test]
    fn odd_catenoid_heights_bracket_the_bowl() {
        let params = p(0, 4, 3);
        let lambda = 0.5;
        let t = build_catenoid(&params, FamilyKind::Rotational, lambda, CatenoidVariant::Odd, &ctrl()).unwrap();
        let bowl = build_bowl(&params, FamilyKind::Rotational, &ctrl()).unwrap();
        let bowl = &bowl.branches[0].profile;
        let shift = bowl.phi_at(lambda).unwrap();
        let lower = &t.branch("minus").unwrap().profile;
        let upper = &t.branch("plus").unwrap().profile;
        for smp in upper.samples().iter().filter(|smp| smp.s > lambda + 1e-3 && smp.s < 29.0) {
            let phi0 = bowl.phi_at(smp.s).unwrap() - shift;
            let phim = lower.phi_at(smp.s).unwrap();
            assert!(phim < phi0 && phi0 < smp.phi, "s = {}: {phim} {phi0} {}", smp.s, smp.phi);
        }
    }

    #[test]
    fn even2_catenoid_glues_smoothly() {
        let t = build_catenoid(&p(-1, 3, 2), FamilyKind::Rotational, 0.5, CatenoidVariant::Even2, &ctrl()).unwrap();
        assert_eq!(t.regularity, Regularity::Smooth);
        let (a, b) = (&t.branches[0], &t.branches[1]);
        assert!(b.reflected && !a.reflected);
        let ka = a.orientation as f64 * a.profile.samples()[0].k_normal;
        let kb = b.orientation as f64 * b.profile.samples()[0].k_normal;
        assert!((ka + kb).abs() < 1e-8);
        assert!(t.max_residual() < 1e-8);
    }

    #[test]
    fn even1_catenoid_is_c1_singular_at_the_plane() {
        let t = build_catenoid(&p(-1, 3, 2), FamilyKind::Rotational, 0.5, CatenoidVariant::Even1, &ctrl()).unwrap();
        assert_eq!(t.regularity, Regularity::C1SingularSet);
        assert!((t.branches[0].profile.samples()[0].theta - 1.0).abs() < 1e-8);
        assert!(matches!(t.spec.family_kind, TranslatorKind::CatenoidEven1(l) if l == 0.5));
    }

    #[test]
    fn steep_boundary_start_near_the_base() {
        // root weight ~ tanh(s)^{-4} dwarfs the linear one; the analytic first
        // step has to shrink to keep q positive
        let t = build_catenoid(&p(-1, 6, 5), FamilyKind::Hyperbolic, 0.125, CatenoidVariant::Odd, &ctrl()).unwrap();
        assert!(t.max_residual() < 1e-8, "{}", t.max_residual());
        for b in &t.branches {
            assert!(b.profile.samples().iter().all(|smp| smp.theta >= 0.0 && smp.theta <= 1.0));
        }
    }

    #[test]
    fn parity_is_enforced() {
        let r = build_catenoid(&p(0, 4, 3), FamilyKind::Rotational, 0.5, CatenoidVariant::Even2, &ctrl());
        assert!(matches!(r, Err(Error::Parity(_))));
        let r = build_catenoid(&p(0, 3, 2), FamilyKind::Rotational, 0.5, CatenoidVariant::Odd, &ctrl());
        assert!(matches!(r, Err(Error::Parity(_))));
    }

    #[test]
    fn hyperbolic_odd_catenoid_reaches_the_limit_angle() {
        let params = p(-1, 4, 3);
        let t = build_catenoid(&params, FamilyKind::Hyperbolic, 1.0, CatenoidVariant::Odd, &ctrl()).unwrap();
        let expected = expected_limit_angle(&params);
        for b in &t.branches {
            let last = b.profile.samples().last().unwrap();
            assert_eq!(b.profile.samples()[0].s, 1.0);
            assert!((last.theta - expected).abs() < 1e-3, "{} vs {expected}", last.theta);
        }
    }

    #[test]
    fn reflection_rejects_a_tilted_boundary() {
        let params = p(-1, 3, 2);
        let fam = ParallelFamily::new(FamilyKind::Rotational, &params).unwrap();
        let traj = solve_branch(&params, &fam, Branch::Plus, 0.5, &ctrl()).unwrap();
        let mid = bisect_theta(&traj, 0.5);
        let cut = traj.restricted_from(mid).unwrap();
        let prof = build_profile(&cut, SignBranch::Plus, mid, 0.0).unwrap();
        assert!((prof.samples()[0].theta - 0.5).abs() < 1e-6);
        assert!(matches!(reflect_glue(prof.clone(), GlueKind::ThetaZero), Err(Error::Glue(_))));
        assert!(matches!(reflect_glue(prof, GlueKind::ThetaOne), Err(Error::Glue(_))));
    }

    fn bisect_theta(traj: &crate::ivp::Trajectory, target: f64) -> f64 {
        let (lo, _) = traj.s_span();
        crate::roots::bisect(|s| traj.eval(s).unwrap().q.sqrt() - target, lo, lo + 0.5, 1e-14).unwrap()
    }

    #[test]
    fn euclidean_grim_reaper_matches_closed_form() {
        let t = build_grim_reaper(&p(0, 3, 1), GrimReaperVariant::Euclidean, &ctrl()).unwrap();
        let prof = &t.branches[0].profile;
        let at = prof.samples().iter().find(|smp| (smp.s - std::f64::consts::FRAC_PI_3).abs() < 6e-4).unwrap();
        assert!((at.phi + at.s.cos().ln()).abs() < 1e-10);
        let exact = prof.phi_at(std::f64::consts::FRAC_PI_3).unwrap();
        assert!((exact - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_grim_reaper_is_tangent_to_the_base() {
        let params = p(-1, 2, 1);
        let t = build_grim_reaper(&params, GrimReaperVariant::Hyperbolic(0.0), &ctrl()).unwrap();
        let prof = &t.branches[0].profile;
        assert_eq!(prof.phi_at(0.0).unwrap(), 0.0);
        for smp in prof.samples().iter().filter(|smp| smp.s != 0.0) {
            assert!(smp.phi > 0.0);
        }
        let target = std::f64::consts::FRAC_1_SQRT_2;
        for s in [-30.0, 30.0] {
            assert!((prof.evaluate(s).unwrap().theta - target).abs() < 1e-3);
        }

        let t = build_grim_reaper(&p(-1, 4, 1), GrimReaperVariant::Hyperbolic(0.3), &ctrl()).unwrap();
        let s_low = t.s_min_height.unwrap();
        let low = t.branches[0].profile.evaluate(s_low).unwrap();
        assert!(low.rho.abs() < 1e-12 && low.phi.abs() < 1e-12);
        assert!(t.branches[0].profile.samples().iter().all(|smp| smp.phi >= -1e-12));
    }

    #[test]
    fn grim_reaper_needs_r_one() {
        assert!(matches!(build_grim_reaper(&p(0, 3, 2), GrimReaperVariant::Euclidean, &ctrl()), Err(Error::Domain(_))));
    }

    #[test]
    fn catenoids_approach_the_bowl() {
        let params = p(0, 4, 3);
        let fam = ParallelFamily::new(FamilyKind::Rotational, &params).unwrap();
        let zero = solve_tau_zero(&params, &fam, None, &ctrl()).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [0.1, 0.05, 0.025] {
            let plus = solve_branch(&params, &fam, Branch::Plus, lambda, &ctrl()).unwrap();
            let sup = (0..=900)
                .map(|i| 1.0 + 9.0 * i as f64 / 900.0)
                .map(|s| (plus.tau_at(s).unwrap() - zero.tau_at(s).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(sup < prev, "lambda = {lambda}: {sup} !< {prev}");
            prev = sup;
        }
    }

    #[test]
    fn sweeps_follow_the_grid() {
        let grid = default_lambda_grid(3);
        assert_eq!(grid, vec![1.0, 0.5, 0.25]);
        let out = sweep_catenoids(&p(0, 3, 1), FamilyKind::Rotational, CatenoidVariant::Odd, &grid, &ctrl());
        assert_eq!(out.len(), 3);
        for (t, &l) in out.iter().zip(&grid) {
            assert!(matches!(t.as_ref().unwrap().spec.family_kind, TranslatorKind::CatenoidOdd(x) if x == l));
        }
    }

    #[test]
    fn vertical_hyperplane_is_degenerate() {
        let spec = TranslatorSpec::new(p(0, 3, 2), TranslatorKind::VerticalHyperplane, ctrl());
        let t = spec.build().unwrap();
        assert!(t.degenerate && t.branches.is_empty());
    }
}
