//! Executable checks of the qualitative claims about the branches and the
//! translators built from them.
//!
//! Each check produces a [`Claim`] with the measured quantity and the
//! tolerance it was held to; failures are data, not errors. Errors are
//! reserved for inputs the checks cannot be run on at all.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::{estimate_limit, integrate, solve_branch, solve_tau_zero, Branch, StepControl, Trajectory};
use crate::limits::{apex_curvature, apex_identity_exact, defining_function, solve_l};
use crate::model::{FamilyKind, FlowParams, ParallelFamily, SpaceForm};
use crate::slopefield::SlopeField;
use crate::translators::{build_catenoid, CatenoidVariant, Regularity, Translator, TranslatorKind, GLUE_THETA_TOL};

/// Window at the end of a branch used to estimate its limit.
const LIMIT_WINDOW: f64 = 5.0;
/// Relative slack allowed in the strict ordering of the three branches.
pub const ORDERING_SLACK: f64 = 1e-6;
/// Added to the scale of compared values, so that gaps between values near
/// zero count as absolute.
const ORDERING_FLOOR: f64 = 1e-9;
/// Rounding-level slope accepted as non-negative.
pub const SLOPE_SLACK: f64 = 1e-12;
const KN_TOL: f64 = 1e-8;
const CONGRUENCE_TOL: f64 = 1e-8;
const EXPONENT_TOL: f64 = 0.05;
const FIT_WINDOW: (f64, f64) = (1e-6, 1e-3);
const FIT_MIN_SAMPLES: usize = 20;
const FIT_POINTS: usize = 60;
/// Centers of the hyperbolic `r = 1` solutions checked for two-sided limits.
const CENTERS: [f64; 3] = [-0.5, 0.0, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Propositions,
    Gluing,
    Exponent,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Propositions => "propositions",
            Suite::Gluing => "gluing",
            Suite::Exponent => "exponent",
            Suite::All => "all",
        }
    }
}

/// One checked statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub anchor: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Claim {
    fn new(id: impl Into<String>, anchor: &str, passed: bool, measured: f64, tolerance: f64) -> Self {
        Claim { id: id.into(), anchor: anchor.to_string(), passed, measured, tolerance }
    }

    /// Passes when `measured ≤ tolerance`.
    fn at_most(id: impl Into<String>, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Claim::new(id, anchor, measured <= tolerance, measured, tolerance)
    }

    /// Passes when `measured > −tolerance`.
    fn positive(id: impl Into<String>, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Claim::new(id, anchor, measured > -tolerance, measured, tolerance)
    }

    fn errored(id: impl Into<String>, anchor: &str, err: &Error) -> Self {
        let mut c = Claim::new(id, anchor, false, f64::NAN, f64::NAN);
        c.anchor = format!("{anchor} [{err}]");
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub entries: Vec<Claim>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        VerificationReport { suite: suite.into(), entries: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Claim> {
        self.entries.iter().filter(|c| !c.passed)
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.entries.iter().find(|c| c.id == id)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    /// `0` when every claim holds, `4` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            4
        }
    }

    /// Fixed-width table for humans.
    pub fn table(&self) -> String {
        let width = self.entries.iter().map(|c| c.id.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "suite {}", self.suite);
        let _ = writeln!(out, "{:<width$}  {:<4}  {:>12}  {:>9}  claim", "id", "ok", "measured", "tol");
        for c in &self.entries {
            let _ = writeln!(
                out,
                "{:<width$}  {:<4}  {:>12.4e}  {:>9.1e}  {}",
                c.id,
                if c.passed { "pass" } else { "FAIL" },
                c.measured,
                c.tolerance,
                c.anchor
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} claims, {} failed", self.entries.len(), failed);
        out
    }
}

/// Families that exist in the space form of `params`, except the planar one.
pub fn families_for(params: &FlowParams) -> Vec<FamilyKind> {
    match params.space() {
        SpaceForm::Euclidean => vec![FamilyKind::Rotational],
        SpaceForm::Hyperbolic => vec![FamilyKind::Rotational, FamilyKind::Parabolic, FamilyKind::Hyperbolic],
    }
}

/// Smallest stored slope of `traj`. Nodes on a converged plateau carry
/// slopes that are zero up to rounding, hence the slack.
pub fn minus_monotone_claim(traj: &Trajectory, id: impl Into<String>) -> Claim {
    let min_slope = traj.samples().iter().map(|smp| smp.dtau).fold(f64::INFINITY, f64::min);
    Claim::positive(id, "tau-minus is increasing on [s0, inf)", min_slope, SLOPE_SLACK)
}

/// The branch claims for every family of `params` and every `s0` in the grid.
pub fn verify_propositions(params: &FlowParams, s0_grid: &[f64]) -> Result<VerificationReport> {
    verify_propositions_with(params, s0_grid, &StepControl::default())
}

pub fn verify_propositions_with(params: &FlowParams, s0_grid: &[f64], ctrl: &StepControl) -> Result<VerificationReport> {
    if s0_grid.is_empty() {
        return Err(Error::domain("s0 grid is empty"));
    }
    let jobs: Vec<(FamilyKind, f64)> = families_for(params)
        .into_iter()
        .flat_map(|fam| s0_grid.iter().map(move |&s0| (fam, s0)))
        .collect();
    for &(fam, s0) in &jobs {
        let pf = ParallelFamily::new(fam, params)?;
        if !pf.contains(s0) || s0 >= ctrl.s_max - LIMIT_WINDOW {
            return Err(Error::domain(format!("s0 = {s0} is not usable for the {} family", fam.name())));
        }
    }
    let mut extra: Vec<Box<dyn Fn() -> Vec<Claim> + Send + Sync>> = vec![Box::new(|| limit_claims(params))];
    if params.space() == SpaceForm::Hyperbolic {
        extra.push(Box::new(|| parabolic_constant_claims(params, ctrl)));
        if params.r() == 1 {
            extra.push(Box::new(|| two_sided_claims(params, ctrl)));
        }
    }
    let (per_s0, others) = crate::with_sweep_pool(|| {
        rayon::join(
            || jobs.par_iter().map(|&(fam, s0)| branch_claims(params, fam, s0, ctrl)).collect::<Vec<_>>(),
            || extra.par_iter().map(|f| f()).collect::<Vec<_>>(),
        )
    });
    let mut report = VerificationReport::new(Suite::Propositions.name());
    report.entries.extend(others.into_iter().flatten());
    report.entries.extend(per_s0.into_iter().flatten());
    Ok(report)
}

fn branch_claims(params: &FlowParams, fam: FamilyKind, s0: f64, ctrl: &StepControl) -> Vec<Claim> {
    let prefix = format!("{}/s0={s0}", fam.name());
    let id = |what: &str| format!("{prefix}/{what}");
    let pf = match ParallelFamily::new(fam, params) {
        Ok(pf) => pf,
        Err(e) => return vec![Claim::errored(id("setup"), "family exists", &e)],
    };
    let (minus, plus) = rayon::join(
        || solve_branch(params, &pf, Branch::Minus, s0, ctrl),
        || solve_branch(params, &pf, Branch::Plus, s0, ctrl),
    );
    let mut out = Vec::new();
    let (mut minus, mut plus) = match (minus, plus) {
        (Ok(m), Ok(p)) => (m, p),
        (Err(e), _) | (_, Err(e)) => {
            out.push(Claim::errored(id("branches"), "both branches exist on [s0, inf)", &e));
            return out;
        }
    };

    // Monotonicity is claimed for the rotational and parabolic families; over
    // equidistants only the single zero is.
    if fam != FamilyKind::Hyperbolic {
        out.push(minus_monotone_claim(&minus, id("minus-increasing")));
        let control = minus_monotone_claim(&minus.with_negated_slopes(), id("negative-control"));
        out.push(Claim::new(
            id("negative-control"),
            "corrupted tau-minus (negated slopes) is rejected",
            !control.passed,
            control.measured,
            0.0,
        ));
    }
    let zeros = minus.zero_crossings().len();
    out.push(Claim::new(id("minus-unique-zero"), "tau-minus has exactly one zero", zeros == 1, zeros as f64, 1.0));
    let min_plus = plus.samples().iter().map(|smp| smp.tau).fold(f64::INFINITY, f64::min);
    out.push(Claim::new(id("plus-positive"), "tau-plus is positive on [s0, inf)", min_plus > 0.0, min_plus, 0.0));

    let l = solve_l(params).l;
    let limit_tol = limit_tolerance(params);
    for (name, traj) in [("minus-limit", &mut minus), ("plus-limit", &mut plus)] {
        let anchor = "both branches tend to the common limit L";
        match estimate_limit(traj, LIMIT_WINDOW) {
            Ok(est) => out.push(Claim::at_most(id(name), anchor, (est - l).abs(), limit_tol)),
            Err(e) => out.push(Claim::errored(id(name), anchor, &e)),
        }
    }

    if fam == FamilyKind::Rotational {
        out.push(ordering_claim(params, &pf, &minus, &plus, ctrl, id("ordering")));
    }
    if fam == FamilyKind::Hyperbolic && params.r() == 1 {
        out.push(congruence_claim(params, &pf, s0, &minus, &plus, ctrl, id("reflected-s0")));
    }
    out
}

fn limit_tolerance(params: &FlowParams) -> f64 {
    match params.space() {
        SpaceForm::Hyperbolic => 1e-3,
        SpaceForm::Euclidean => 2e-2,
    }
}

/// Signed gap `upper − lower` relative to the size of the compared values,
/// measured in `q = 1 − |τ|^{2/r}` where both are positive so that the digits
/// near `τ = 1` are not lost.
fn rel_gap(lo: crate::ivp::Point, hi: crate::ivp::Point) -> f64 {
    if lo.tau > 0.0 && hi.tau > 0.0 {
        (lo.q - hi.q) / (lo.q.max(hi.q) + ORDERING_FLOOR)
    } else {
        (hi.tau - lo.tau) / (lo.tau.abs().max(hi.tau.abs()) + ORDERING_FLOOR)
    }
}

/// Ordering on the union of the three node sets inside the common span,
/// evaluated by dense output. Measured is the smallest relative gap; the
/// branches merge exponentially, so far out the gaps reach the integration
/// accuracy and the ordering holds only up to [`ORDERING_SLACK`].
fn ordering_claim(
    params: &FlowParams,
    pf: &ParallelFamily,
    minus: &Trajectory,
    plus: &Trajectory,
    ctrl: &StepControl,
    id: String,
) -> Claim {
    let anchor = "tau-minus < tau-zero < tau-plus on [s0, inf)";
    let zero = match solve_tau_zero(params, pf, None, ctrl) {
        Ok(z) => z,
        Err(e) => return Claim::errored(id, anchor, &e),
    };
    let lo = minus.s_span().0.max(plus.s_span().0);
    let hi = minus.s_span().1.min(plus.s_span().1).min(zero.s_span().1);
    let mut grid: Vec<f64> = [minus.samples(), plus.samples(), zero.samples()]
        .iter()
        .flat_map(|smps| smps.iter().map(|smp| smp.s))
        .filter(|&s| s > lo && s <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut worst = f64::INFINITY;
    for s in grid {
        let (Ok(a), Ok(b), Ok(c)) = (minus.eval(s), zero.eval(s), plus.eval(s)) else {
            return Claim::errored(id, anchor, &Error::domain(format!("dense output failed at s = {s}")));
        };
        worst = worst.min(rel_gap(a, b)).min(rel_gap(b, c));
    }
    Claim::positive(id, anchor, worst, ORDERING_SLACK)
}

/// `z(s) = −y(−s)`: the branches started at `−s0` and integrated towards
/// `−∞` are the point reflections of the opposite branches at `s0`.
fn congruence_claim(
    params: &FlowParams,
    pf: &ParallelFamily,
    s0: f64,
    minus: &Trajectory,
    plus: &Trajectory,
    ctrl: &StepControl,
    id: String,
) -> Claim {
    let anchor = "branches from -s0 are point reflections of those from s0";
    let field = match SlopeField::new(*params, pf.kind()) {
        Ok(f) => f,
        Err(e) => return Claim::errored(id, anchor, &e),
    };
    let back = StepControl { s_max: -ctrl.s_max, ..*ctrl };
    let mut worst: f64 = 0.0;
    for (y0, mirror) in [(-1.0, plus), (1.0, minus)] {
        let reflected = match integrate(&field, -s0, y0, &back) {
            Ok(t) => t,
            Err(e) => return Claim::errored(id, anchor, &e),
        };
        for smp in reflected.samples() {
            match mirror.tau_at(-smp.s) {
                Ok(v) => worst = worst.max((smp.tau + v).abs()),
                Err(e) => return Claim::errored(id, anchor, &e),
            }
        }
    }
    Claim::at_most(id, anchor, worst, CONGRUENCE_TOL)
}

fn parabolic_constant_claims(params: &FlowParams, ctrl: &StepControl) -> Vec<Claim> {
    let anchor = "the constant tau = L solves the horosphere equation";
    let l = solve_l(params).l;
    let field = SlopeField::new(*params, FamilyKind::Parabolic);
    let measured = field.and_then(|f| {
        [-ctrl.s_max, -1.0, 0.0, 1.0, ctrl.s_max]
            .iter()
            .try_fold(0.0f64, |acc, &s| Ok(acc.max(f.eval(s, l)?.abs())))
    });
    match measured {
        Ok(m) => vec![Claim::at_most("parabolic/constant-solution", anchor, m, 1e-12)],
        Err(e) => vec![Claim::errored("parabolic/constant-solution", anchor, &e)],
    }
}

/// Two-sided limits `±L` of the entire hyperbolic `r = 1` solutions.
fn two_sided_claims(params: &FlowParams, ctrl: &StepControl) -> Vec<Claim> {
    let anchor = "entire r = 1 solution over equidistants tends to -L and +L";
    let l = solve_l(params).l;
    let pf = match ParallelFamily::new(FamilyKind::Hyperbolic, params) {
        Ok(pf) => pf,
        Err(e) => return vec![Claim::errored("hyperbolic/two-sided", anchor, &e)],
    };
    CENTERS
        .iter()
        .map(|&lambda| {
            let id = format!("hyperbolic/center={lambda}/two-sided-limits");
            match two_sided_gap(params, &pf, lambda, l, ctrl) {
                Ok(m) => Claim::at_most(id, anchor, m, 1e-3),
                Err(e) => Claim::errored(id, anchor, &e),
            }
        })
        .collect()
}

/// `max(|τ(s_max) − L|, |τ(−s_max) + L|)` for the solution through `(0, λ)`.
pub fn two_sided_gap(params: &FlowParams, pf: &ParallelFamily, lambda: f64, l: f64, ctrl: &StepControl) -> Result<f64> {
    let traj = solve_tau_zero(params, pf, Some(lambda), ctrl)?;
    let (lo, hi) = traj.s_span();
    Ok((traj.tau_at(hi)? - l).abs().max((traj.tau_at(lo)? + l).abs()))
}

/// Consistency of the algebraic limit data.
fn limit_claims(params: &FlowParams) -> Vec<Claim> {
    let rep = solve_l(params);
    let mut out = Vec::new();
    match params.space() {
        SpaceForm::Euclidean => {
            out.push(Claim::at_most("limits/L-euclidean", "L = 1 in Euclidean space", (rep.l - 1.0).abs(), 0.0));
        }
        SpaceForm::Hyperbolic => {
            let inside = rep.l > 0.0 && rep.l < 1.0;
            out.push(Claim::new("limits/L-in-unit-interval", "0 < L < 1 in hyperbolic space", inside, rep.l, 0.0));
            let g = defining_function(params, rep.l).abs();
            out.push(Claim::at_most("limits/L-root", "L solves C sqrt(1 - L^(2/r)) = (n - r) L", g, 1e-12));
        }
    }
    let (num, den) = apex_identity_exact(params.n(), params.r());
    out.push(Claim::new(
        "limits/apex-identity",
        "binom(n, r) (C/n) = 1 exactly",
        num == den,
        num as f64 / den as f64 - 1.0,
        0.0,
    ));
    let k = apex_curvature(params);
    let dev = (crate::model::binomial(params.n(), params.r()) as f64 * k.powi(params.r() as i32) - 1.0).abs();
    out.push(Claim::at_most("limits/apex-curvature", "binom(n, r) k^r = 1 at the bowl apex", dev, 1e-12));
    out
}

/// Boundary angle and curvature matching where the sheets of a catenoid meet.
pub fn verify_gluing(translator: &Translator) -> Result<VerificationReport> {
    let variant = catenoid_variant(translator)?;
    let mut report = VerificationReport::new(Suite::Gluing.name());
    let tag = format!("{:?}", variant).to_lowercase();
    let id = |what: &str| format!("{tag}/{what}");
    match variant {
        CatenoidVariant::Odd => {
            let lower = translator.branch("minus").ok_or_else(|| Error::Glue("missing minus sheet".into()))?;
            let upper = translator.branch("plus").ok_or_else(|| Error::Glue("missing plus sheet".into()))?;
            let (a, b) = (lower.profile.samples()[0], upper.profile.samples()[0]);
            report.entries.push(Claim::at_most(
                id("boundary-theta"),
                "both sheets are vertical where they meet",
                a.theta.abs().max(b.theta.abs()),
                GLUE_THETA_TOL,
            ));
            report.entries.push(Claim::at_most(
                id("normal-curvature-sum"),
                "k_n of the two sheets cancel at the neck (C2 across it)",
                (a.k_normal + b.k_normal).abs(),
                KN_TOL,
            ));
        }
        CatenoidVariant::Even1 | CatenoidVariant::Even2 => {
            let (target, expected) = match variant {
                CatenoidVariant::Even1 => (1.0, Regularity::C1SingularSet),
                _ => (0.0, Regularity::Smooth),
            };
            let upper = &translator.branches[0];
            let mirror = translator
                .branches
                .iter()
                .find(|b| b.reflected)
                .ok_or_else(|| Error::Glue("missing reflected sheet".into()))?;
            let (a, b) = (upper.profile.samples()[0], mirror.profile.samples()[0]);
            report.entries.push(Claim::at_most(
                id("boundary-theta"),
                if target == 1.0 { "theta = 1 on the reflection plane" } else { "theta = 0 on the reflection plane" },
                (a.theta - target).abs().max((b.theta - target).abs()),
                GLUE_THETA_TOL,
            ));
            report.entries.push(Claim::new(
                id("regularity"),
                if target == 1.0 {
                    "gluing along theta = 1 is only C1"
                } else {
                    "gluing along theta = 0 is C2"
                },
                translator.regularity == expected,
                if translator.regularity == expected { 0.0 } else { 1.0 },
                0.0,
            ));
            if variant == CatenoidVariant::Even2 {
                // A horizontal normal is fixed by the reflection, so the two
                // sheets must share finite principal curvatures there.
                let finite = a.k_tangent.is_finite() && a.k_normal.is_finite();
                let mismatch = if finite {
                    (a.k_tangent - b.k_tangent).abs().max((a.k_normal - b.k_normal).abs())
                } else {
                    f64::INFINITY
                };
                report.entries.push(Claim::at_most(
                    id("curvature-match"),
                    "principal curvatures agree across the reflection plane",
                    mismatch,
                    KN_TOL,
                ));
            }
        }
    }
    Ok(report)
}

fn catenoid_variant(translator: &Translator) -> Result<CatenoidVariant> {
    use TranslatorKind::*;
    match translator.spec.family_kind {
        CatenoidOdd(_) | ParabolicCatenoidOdd(_) | HyperbolicCatenoidOdd(_) => Ok(CatenoidVariant::Odd),
        CatenoidEven1(_) | ParabolicCatenoidEven1(_) | HyperbolicCatenoidEven1(_) => Ok(CatenoidVariant::Even1),
        CatenoidEven2(_) | ParabolicCatenoidEven2(_) | HyperbolicCatenoidEven2(_) => Ok(CatenoidVariant::Even2),
        other => Err(Error::domain(format!("{other:?} is not a catenoid"))),
    }
}

/// Least-squares slope of `log ρ'` against `log(s − s*)` just after the zero
/// `s*` of `τ⁻`, where `ρ' ~ (s − s*)^{1/r − 1}`.
pub fn verify_singularity_exponent(translator: &Translator) -> Result<VerificationReport> {
    let r = translator.spec.params.r();
    if r == 1 {
        return Err(Error::domain("r = 1 catenoids have no curvature blow-up"));
    }
    let (profile, s_star) = match catenoid_variant(translator)? {
        CatenoidVariant::Odd => {
            let s_star = translator.s_min_height.ok_or_else(|| Error::Fit("zero of tau-minus unknown".into()))?;
            (&translator.branch("minus").ok_or_else(|| Error::Fit("missing minus sheet".into()))?.profile, s_star)
        }
        CatenoidVariant::Even1 => {
            let upper = &translator.branches[0].profile;
            (upper, upper.samples()[0].s)
        }
        CatenoidVariant::Even2 => return Err(Error::domain("even2 catenoids have no curvature blow-up")),
    };
    let (lo, hi) = FIT_WINDOW;
    let mut pts: Vec<(f64, f64)> = profile
        .samples()
        .iter()
        .filter(|smp| (lo..=hi).contains(&(smp.s - s_star)) && smp.rho_prime.is_finite() && smp.rho_prime != 0.0)
        .map(|smp| ((smp.s - s_star).ln(), smp.rho_prime.abs().ln()))
        .collect();
    if pts.len() < FIT_MIN_SAMPLES {
        pts.clear();
        for i in 0..FIT_POINTS {
            let d = lo * (hi / lo).powf(i as f64 / (FIT_POINTS - 1) as f64);
            let Ok(smp) = profile.evaluate(s_star + d) else { continue };
            if smp.rho_prime.is_finite() && smp.rho_prime != 0.0 {
                pts.push((d.ln(), smp.rho_prime.abs().ln()));
            }
        }
    }
    if pts.len() < FIT_MIN_SAMPLES {
        return Err(Error::Fit(format!("{} samples in the fit window, need {FIT_MIN_SAMPLES}", pts.len())));
    }
    let slope = ls_slope(&pts);
    let expected = (1.0 - r as f64) / r as f64;
    let mut report = VerificationReport::new(Suite::Exponent.name());
    report.entries.push(Claim::at_most(
        format!("r={r}/rho-prime-exponent"),
        "rho' blows up like (s - s*)^(1/r - 1) at the zero of tau-minus",
        (slope - expected).abs(),
        EXPONENT_TOL,
    ));
    Ok(report)
}

/// Slope of the least-squares line through `pts`.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    sxy / sxx
}

/// Neck position used by the suite runner's catenoids.
pub const SUITE_LAMBDA: f64 = 0.5;

/// The catenoids a suite checks for `params`: every variant matching the
/// parity of `r`, over every family of the space form.
pub fn suite_catenoids(params: &FlowParams, ctrl: &StepControl) -> Vec<(String, Result<Translator>)> {
    let variants: &[CatenoidVariant] = if params.r_is_odd() {
        &[CatenoidVariant::Odd]
    } else {
        &[CatenoidVariant::Even1, CatenoidVariant::Even2]
    };
    let jobs: Vec<(FamilyKind, CatenoidVariant)> =
        families_for(params).into_iter().flat_map(|f| variants.iter().map(move |&v| (f, v))).collect();
    crate::with_sweep_pool(|| {
        jobs.par_iter()
            .map(|&(f, v)| {
                let label = format!("{}/{:?}", f.name(), v).to_lowercase();
                (label, build_catenoid(params, f, SUITE_LAMBDA, v, ctrl))
            })
            .collect()
    })
}

/// Runs a named suite for `params`. Numbers in claim ids are prefixed with the
/// family and variant they were measured on.
pub fn run_suite(suite: Suite, params: &FlowParams, s0_grid: &[f64], ctrl: &StepControl) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(suite.name());
    if matches!(suite, Suite::Propositions | Suite::All) {
        report.extend(verify_propositions_with(params, s0_grid, ctrl)?);
    }
    let want_gluing = matches!(suite, Suite::Gluing | Suite::All);
    let want_exponent = match suite {
        Suite::Exponent if params.r() == 1 => {
            return Err(Error::domain("the exponent suite needs r > 1"));
        }
        Suite::Exponent => true,
        Suite::All => params.r() > 1,
        _ => false,
    };
    if want_gluing || want_exponent {
        for (label, built) in suite_catenoids(params, ctrl) {
            let t = built?;
            if want_gluing {
                report.entries.extend(prefixed(&label, verify_gluing(&t)?));
            }
            if want_exponent && catenoid_variant(&t)? != CatenoidVariant::Even2 {
                report.entries.extend(prefixed(&label, verify_singularity_exponent(&t)?));
            }
        }
    }
    Ok(report)
}

fn prefixed(label: &str, report: VerificationReport) -> Vec<Claim> {
    let family = label.split('/').next().unwrap_or(label);
    report
        .entries
        .into_iter()
        .map(|mut c| {
            c.id = format!("{family}/{}", c.id);
            c
        })
        .collect()
}

/// Default `s0` grid of the propositions suite.
pub const DEFAULT_S0_GRID: [f64; 3] = [0.2, 1.0, 5.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translators::build_catenoid;

    fn p(eps: i32, n: u32, r: u32) -> FlowParams {
        FlowParams::from_epsilon(eps, n, r).unwrap()
    }

    fn show(rep: &VerificationReport) -> String {
        rep.table()
    }

    #[test]
    fn euclidean_branches_satisfy_every_claim() {
        let rep = verify_propositions(&p(0, 4, 3), &DEFAULT_S0_GRID).unwrap();
        assert!(rep.passed(), "{}", show(&rep));
        assert!(rep.claim("rotational/s0=0.2/ordering").is_some());
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn hyperbolic_r1_includes_two_sided_and_reflection_claims() {
        let rep = verify_propositions(&p(-1, 3, 1), &[1.0]).unwrap();
        assert!(rep.passed(), "{}", show(&rep));
        assert!(rep.claim("hyperbolic/s0=1/reflected-s0").is_some());
        assert!(rep.claim("hyperbolic/center=0.5/two-sided-limits").is_some());
        assert_eq!(rep.claim("parabolic/constant-solution").map(|c| c.passed), Some(true));
    }

    #[test]
    fn corrupted_branch_fails_monotonicity() {
        let params = p(0, 4, 3);
        let pf = ParallelFamily::new(FamilyKind::Rotational, &params).unwrap();
        let minus = solve_branch(&params, &pf, Branch::Minus, 1.0, &StepControl::default()).unwrap();
        assert!(minus_monotone_claim(&minus, "x").passed);
        assert!(!minus_monotone_claim(&minus.with_negated_slopes(), "x").passed);
    }

    #[test]
    fn gluing_claims_per_variant() {
        let odd = build_catenoid(&p(0, 4, 3), FamilyKind::Rotational, 0.5, CatenoidVariant::Odd, &StepControl::default()).unwrap();
        let rep = verify_gluing(&odd).unwrap();
        assert!(rep.passed(), "{}", show(&rep));
        let ctrl = StepControl::default();
        for v in [CatenoidVariant::Even1, CatenoidVariant::Even2] {
            let t = build_catenoid(&p(-1, 3, 2), FamilyKind::Rotational, 0.5, v, &ctrl).unwrap();
            let rep = verify_gluing(&t).unwrap();
            assert!(rep.passed(), "{}", show(&rep));
        }
    }

    #[test]
    fn exponent_matches_local_model() {
        let ctrl = StepControl::default();
        for (n, r, v) in [(4, 3, CatenoidVariant::Odd), (6, 5, CatenoidVariant::Odd), (3, 2, CatenoidVariant::Even1)] {
            let t = build_catenoid(&p(0, n, r), FamilyKind::Rotational, 0.5, v, &ctrl).unwrap();
            let rep = verify_singularity_exponent(&t).unwrap();
            assert!(rep.passed(), "({n},{r}) {}", show(&rep));
        }
    }

    #[test]
    fn exponent_rejects_r1_and_non_catenoids() {
        let ctrl = StepControl::default();
        let t = build_catenoid(&p(0, 3, 1), FamilyKind::Rotational, 0.5, CatenoidVariant::Odd, &ctrl).unwrap();
        assert!(matches!(verify_singularity_exponent(&t), Err(Error::Domain(_))));
        let bowl = crate::translators::build_bowl(&p(0, 3, 2), FamilyKind::Rotational, &ctrl).unwrap();
        assert!(matches!(verify_gluing(&bowl), Err(Error::Domain(_))));
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.25 * i as f64)).collect();
        assert!((ls_slope(&pts) + 0.25).abs() < 1e-14);
    }

    #[test]
    fn report_exit_code_tracks_failures() {
        let mut rep = VerificationReport::new("t");
        rep.entries.push(Claim::at_most("a", "x", 1.0, 2.0));
        assert_eq!(rep.exit_code(), 0);
        rep.entries.push(Claim::at_most("b", "x", 3.0, 2.0));
        assert_eq!(rep.exit_code(), 4);
        assert!(rep.table().contains("FAIL"));
    }
}
