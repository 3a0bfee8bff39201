//! Adaptive integration of the reduced Cauchy problems `τ' = F(s, τ)`.
//!
//! The explicit Dormand–Prince 5(4) pair with PI step control does the bulk
//! of the work. Two charts are used for the state: `τ` itself, and the
//! complement `q = 1 − |τ|^{2/r}` on a fixed sign sheet once `|τ|` is close to
//! one, where `θ² = q` is resolved to full relative precision. Boundary
//! starts `τ(s₀) = ±1` begin in the complement chart with an exact
//! `q ≈ a·δ + (2/3)·b·δ^{3/2}` micro-step. When the Euclidean branches pin
//! `q` to a quasi-equilibrium of order `s^{−2r}` the problem turns stiff, and
//! the integrator falls back to implicit Euler with step doubling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FamilyKind, FlowParams, ParallelFamily};
use crate::roots::{bisect, brent};
use crate::slopefield::{complement, SlopeField};

/// Length of the explicit first step away from `|τ| = 1`.
pub const BOUNDARY_MICRO_STEP: f64 = 1e-6;
/// Bound on `|b|·√x / a` over the analytic first step.
const BOUNDARY_SHAPE: f64 = 0.1;
/// End of the series segment of the rotational center solution.
pub const SERIES_END: f64 = 1e-4;
/// Steps shorter than this abort the integration.
pub const MIN_STEP: f64 = 1e-14;

const MAX_STEPS: usize = 5_000_000;
const TO_COMP: f64 = 0.6;
const TO_TAU: f64 = 0.4;
const STIFF_RATIO: f64 = 1.0;
const STIFF_COUNT: u32 = 15;
/// Consecutive unflagged steps that clear the stiffness count.
const CALM_COUNT: u32 = 6;
const COMP_ABS_SCALE: f64 = 1e-6;
const EXTRAPOLATION_LEVELS: usize = 4;
/// Step cap `STIFF_SPAN·|s|/r` in the implicit tail, where `q ~ s^{−2r}`.
const STIFF_SPAN: f64 = 0.02;
const PLATEAU_VARIATION: f64 = 1e-8;
const LIMIT_VARIATION: f64 = 1e-2;

/// Tolerances and extent of an integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub s_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.1, s_max: 30.0 }
    }
}

impl StepControl {
    fn validate(&self) -> Result<()> {
        let ok = [self.rel_tol, self.abs_tol, self.max_step].iter().all(|v| v.is_finite() && *v > 0.0)
            && self.s_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("tolerances and max_step must be positive and finite: {self:?}")))
        }
    }
}

/// Which solution of the Cauchy problem a trajectory represents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchTag {
    Minus,
    Plus,
    Zero,
    Centered(f64),
}

impl BranchTag {
    pub fn label(&self) -> String {
        match self {
            BranchTag::Minus => "minus".into(),
            BranchTag::Plus => "plus".into(),
            BranchTag::Zero => "zero".into(),
            BranchTag::Centered(l) => format!("centered({l})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    ZeroCrossing,
    BoundaryContact,
    Plateau,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub s_loc: f64,
    pub refined: bool,
}

/// One accepted node. `q = 1 − |τ|^{2/r}` is kept alongside `τ` because it
/// carries the significant digits near `|τ| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub tau: f64,
    pub dtau: f64,
    pub q: f64,
}

/// Value of the dense output at an arbitrary `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub tau: f64,
    pub dtau: f64,
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Chart {
    Tau,
    Comp { sigma: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    /// Dormand–Prince continuous extension in the chart variable.
    Dopri([f64; 5]),
    /// Cubic Hermite in the chart variable.
    Hermite { u0: f64, u1: f64, du0: f64, du1: f64 },
    /// `τ = coef · s^power` near the rotational center.
    Power { coef: f64, power: f64 },
    /// `q = a·x + (2/3)·b·x^{3/2} + c·x²` with `x = |s − start|`.
    Boundary { a: f64, b: f64, c: f64 },
    Constant(f64),
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    start: f64,
    h: f64,
    chart: Chart,
    piece: Piece,
    stiff: bool,
}

impl Segment {
    fn lo(&self) -> f64 {
        self.start.min(self.start + self.h)
    }

    fn hi(&self) -> f64 {
        self.start.max(self.start + self.h)
    }
}

/// A numerically integrated solution with dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    field: SlopeField,
    samples: Vec<Sample>,
    segments: Vec<Segment>,
    tag: BranchTag,
    events: Vec<Event>,
    s_span: (f64, f64),
}

impl Trajectory {
    pub fn field(&self) -> &SlopeField {
        &self.field
    }

    pub fn params(&self) -> &FlowParams {
        self.field.params()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn tag(&self) -> BranchTag {
        self.tag
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn s_span(&self) -> (f64, f64) {
        self.s_span
    }

    pub fn zero_crossings(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::ZeroCrossing)
            .map(|e| e.s_loc)
            .collect()
    }

    /// Dense output at `s`.
    pub fn eval(&self, s: f64) -> Result<Point> {
        let (lo, hi) = self.s_span;
        if !(s >= lo && s <= hi) {
            return Err(Error::domain(format!("s = {s} outside trajectory span [{lo}, {hi}]")));
        }
        let idx = self.segments.partition_point(|seg| seg.hi() < s).min(self.segments.len() - 1);
        Ok(self.eval_segment(&self.segments[idx], s))
    }

    pub fn tau_at(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.tau)
    }

    fn eval_segment(&self, seg: &Segment, s: f64) -> Point {
        let r = self.params().r();
        let (u, du) = match seg.piece {
            Piece::Constant(v) => (v, 0.0),
            Piece::Power { coef, power } => {
                let tau = coef * s.powf(power);
                let dtau = if power == 1.0 { coef } else { coef * power * s.powf(power - 1.0) };
                return Point { tau, dtau, q: complement(tau, r) };
            }
            Piece::Boundary { a, b, c } => {
                let dir = seg.h.signum();
                let x = (s - seg.start).abs();
                let sx = x.sqrt();
                (a * x + (2.0 / 3.0) * b * x * sx + c * x * x, dir * (a + b * sx + 2.0 * c * x))
            }
            Piece::Hermite { u0, u1, du0, du1 } => {
                let t = ((s - seg.start) / seg.h).clamp(0.0, 1.0);
                let h = seg.h;
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                let u = h00 * u0 + h10 * h * du0 + h01 * u1 + h11 * h * du1;
                let d00 = 6.0 * t2 - 6.0 * t;
                let d10 = 3.0 * t2 - 4.0 * t + 1.0;
                let d01 = -d00;
                let d11 = 3.0 * t2 - 2.0 * t;
                let du = (d00 * u0 + d01 * u1) / h + d10 * du0 + d11 * du1;
                (u, du)
            }
            Piece::Dopri(rc) => {
                let t = ((s - seg.start) / seg.h).clamp(0.0, 1.0);
                let t1 = 1.0 - t;
                let qq = rc[3] + t1 * rc[4];
                let rr = rc[2] + t * qq;
                let ss = rc[1] + t1 * rr;
                let u = rc[0] + t * ss;
                let drr = qq - t * rc[4];
                let dss = -rr + t1 * drr;
                (u, (ss + t * dss) / seg.h)
            }
        };
        match seg.chart {
            Chart::Tau => {
                let tau = u.clamp(-1.0, 1.0);
                Point { tau, dtau: du, q: complement(tau, r) }
            }
            Chart::Comp { sigma } => {
                let q = u.clamp(0.0, 1.0);
                let half_r = 0.5 * r as f64;
                let tau = sigma * (half_r * (-q).ln_1p()).exp();
                let dtau = -half_r * sigma * ((half_r - 1.0) * (-q).ln_1p()).exp() * du;
                Point { tau, dtau, q }
            }
        }
    }

    /// Start of the stiff regime integrated by implicit Euler, if reached.
    pub fn stiff_onset(&self) -> Option<f64> {
        self.segments.iter().filter(|seg| seg.stiff).map(|seg| seg.lo()).reduce(f64::min)
    }

    /// Extent of the analytic segment leaving `|τ| = 1`, if any.
    pub fn boundary_span(&self) -> Option<(f64, f64)> {
        self.segments.iter().find(|seg| matches!(seg.piece, Piece::Boundary { .. })).map(|seg| (seg.lo(), seg.hi()))
    }

    /// `∫ σ√(1 − q)/√q ds` from the boundary start to `s`, signed by direction,
    /// computed in `t = √|s − s0|` where the integrand is smooth.
    pub(crate) fn boundary_integral(&self, s: f64) -> Option<Result<f64>> {
        let seg = self.segments.iter().find(|seg| matches!(seg.piece, Piece::Boundary { .. }))?;
        let Piece::Boundary { a, b, c } = seg.piece else { return None };
        let Chart::Comp { sigma } = seg.chart else { return None };
        if s < seg.lo() || s > seg.hi() {
            return None;
        }
        let t_end = (s - seg.start).abs().sqrt();
        let f = |t: f64| {
            let lin = a + (2.0 / 3.0) * b * t + c * t * t;
            let q = (t * t * lin).clamp(0.0, 1.0);
            2.0 * (1.0 - q).sqrt() / lin.sqrt()
        };
        let value = crate::quad::integrate(f, 0.0, t_end, &crate::quad::QuadOptions::default());
        Some(value.map(|v| sigma * v * seg.h.signum()))
    }

    /// Copy with every stored slope negated; the dense output is unchanged.
    /// Used as a negative control for the monotonicity checks.
    pub fn with_negated_slopes(&self) -> Trajectory {
        let mut out = self.clone();
        for sample in &mut out.samples {
            sample.dtau = -sample.dtau;
        }
        out
    }

    /// Restriction to `s ≥ s_lo`, with a leading node at `s_lo` itself. A
    /// leading node on a recorded zero crossing gets `τ = 0` exactly.
    pub fn restricted_from(&self, s_lo: f64) -> Result<Trajectory> {
        let mut p = self.eval(s_lo)?;
        if self.zero_crossings().contains(&s_lo) {
            p.tau = 0.0;
            p.q = 1.0;
        }
        let mut out = self.clone();
        out.samples.retain(|smp| smp.s > s_lo);
        out.samples.insert(0, Sample { s: s_lo, tau: p.tau, dtau: p.dtau, q: p.q });
        out.events.retain(|e| e.s_loc >= s_lo);
        out.s_span.0 = s_lo;
        Ok(out)
    }

    fn push_event(&mut self, event: Event) {
        self.events.push(event);
        self.events.sort_by(|a, b| a.s_loc.total_cmp(&b.s_loc));
    }

    fn detect_zero_crossings(&mut self) {
        let mut found = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.tau != 0.0 && b.tau != 0.0 && a.tau.signum() != b.tau.signum() {
                let refined = bisect(|s| self.eval(s).map_or(f64::NAN, |p| p.tau), a.s, b.s, 0.0);
                match refined {
                    Ok(s) => found.push(Event { kind: EventKind::ZeroCrossing, s_loc: s, refined: true }),
                    Err(_) => found.push(Event {
                        kind: EventKind::ZeroCrossing,
                        s_loc: 0.5 * (a.s + b.s),
                        refined: false,
                    }),
                }
            } else if b.tau == 0.0 && a.tau != 0.0 {
                found.push(Event { kind: EventKind::ZeroCrossing, s_loc: b.s, refined: true });
            }
        }
        for e in found {
            self.push_event(e);
        }
    }
}

struct Runner<'a> {
    field: &'a SlopeField,
    ctrl: StepControl,
    r: f64,
    /// Singular points with a step-to-distance ratio; keeps the dense output
    /// accurate where the solution is only smooth in `√|s − anchor|`.
    anchors: Vec<(f64, f64)>,
}

impl<'a> Runner<'a> {
    fn new(field: &'a SlopeField, ctrl: StepControl, boundary: Option<f64>) -> Self {
        let mut anchors: Vec<(f64, f64)> = boundary.into_iter().map(|s| (s, 0.05)).collect();
        if field.family().kind() == FamilyKind::Rotational {
            anchors.push((0.0, 0.1));
        }
        Runner { field, ctrl, r: field.params().r() as f64, anchors }
    }
}

struct DopriOut {
    u1: f64,
    k7: f64,
    err: f64,
    rc: [f64; 5],
    stiff_ratio: f64,
}

struct Leg {
    samples: Vec<Sample>,
    segments: Vec<Segment>,
    contact: Option<f64>,
}

impl<'a> Runner<'a> {
    fn rhs(&self, chart: Chart, s: f64, u: f64) -> f64 {
        match chart {
            Chart::Tau => self.field.eval_unchecked(s, u),
            Chart::Comp { sigma } => {
                let q = u.clamp(0.0, 1.0);
                let dtau = self.field.eval_complement(s, sigma, q);
                -(2.0 / self.r) * sigma * ((1.0 - 0.5 * self.r) * (-q).ln_1p()).exp() * dtau
            }
        }
    }

    fn sample(&self, chart: Chart, s: f64, u: f64) -> Sample {
        match chart {
            Chart::Tau => {
                let tau = u.clamp(-1.0, 1.0);
                let r = self.field.params().r();
                Sample { s, tau, dtau: self.field.eval_unchecked(s, tau), q: complement(tau, r) }
            }
            Chart::Comp { sigma } => {
                let q = u.clamp(0.0, 1.0);
                let tau = sigma * (0.5 * self.r * (-q).ln_1p()).exp();
                Sample { s, tau, dtau: self.field.eval_complement(s, sigma, q), q }
            }
        }
    }

    fn dopri(&self, chart: Chart, s: f64, u: f64, k1: f64, h: f64) -> DopriOut {
        let f = |x: f64, y: f64| self.rhs(chart, x, y);
        let k2 = f(s + h / 5.0, u + h * (k1 / 5.0));
        let k3 = f(s + 0.3 * h, u + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
        let k4 = f(s + 0.8 * h, u + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
        let k5 = f(
            s + 8.0 / 9.0 * h,
            u + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3
                - 212.0 / 729.0 * k4),
        );
        let y6 = u + h
            * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                - 5103.0 / 18656.0 * k5);
        let k6 = f(s + h, y6);
        let u1 = u + h
            * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
                + 11.0 / 84.0 * k6);
        let k7 = f(s + h, u1);
        let err = h
            * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4
                - 17253.0 / 339200.0 * k5
                + 22.0 / 525.0 * k6
                - k7 / 40.0);
        let d = h
            * (-12715105075.0 / 11282082432.0 * k1 + 87487479700.0 / 32700410799.0 * k3
                - 10690763975.0 / 1880347072.0 * k4
                + 701980252875.0 / 199316789632.0 * k5
                - 1453857185.0 / 822651844.0 * k6
                + 69997945.0 / 29380423.0 * k7);
        let diff = u1 - u;
        let bspl = h * k1 - diff;
        let rc = [u, diff, bspl, diff - h * k7 - bspl, d];
        let den = (u1 - y6).abs();
        let stiff_ratio = if den > 0.0 { (h * (k7 - k6) / den).abs() } else { 0.0 };
        DopriOut { u1, k7, err, rc, stiff_ratio }
    }

    /// Implicit Euler on the complement chart; `None` when no bracket exists.
    fn implicit_euler(&self, chart: Chart, s1: f64, u0: f64, h: f64) -> Option<f64> {
        let res = |u: f64| u - u0 - h * self.rhs(chart, s1, u);
        let lo = 0.0;
        let r_lo = res(lo);
        if r_lo == 0.0 {
            return Some(0.0);
        }
        let mut hi = (2.0 * u0).max(1e-300).min(1.0);
        let mut r_hi = res(hi);
        while r_hi.signum() == r_lo.signum() && hi < 1.0 {
            hi = (hi * 4.0).min(1.0);
            r_hi = res(hi);
        }
        if r_hi.signum() == r_lo.signum() || r_hi.is_nan() {
            return None;
        }
        brent(res, lo, hi, (1e-15 * u0.abs()).max(1e-300)).ok()
    }

    /// Implicit Euler with 1, 2, .., `EXTRAPOLATION_LEVELS` substeps, combined by
    /// Aitken–Neville extrapolation in `h`. Returns the highest-order value and
    /// the difference to the next lower order.
    fn extrapolated_euler(&self, chart: Chart, s0: f64, u0: f64, s1: f64) -> Option<(f64, f64)> {
        let h = s1 - s0;
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(EXTRAPOLATION_LEVELS);
        for j in 0..EXTRAPOLATION_LEVELS {
            let n = j + 1;
            let sub = h / n as f64;
            let mut u = u0;
            for i in 1..=n {
                let s = if i == n { s1 } else { s0 + sub * i as f64 };
                u = self.implicit_euler(chart, s, u, sub)?;
            }
            let mut row = vec![u];
            for k in 1..=j {
                let ratio = n as f64 / (n - k) as f64;
                let prev = row[k - 1];
                row.push(prev + (prev - table[j - 1][k - 1]) / (ratio - 1.0));
            }
            table.push(row);
        }
        let last = &table[EXTRAPOLATION_LEVELS - 1];
        let best = last[EXTRAPOLATION_LEVELS - 1];
        Some((best, (best - last[EXTRAPOLATION_LEVELS - 2]).abs()))
    }

    fn error_norm(&self, chart: Chart, err: f64, u0: f64, u1: f64) -> f64 {
        // q is the small quantity of interest in the complement chart
        let floor = match chart {
            Chart::Tau => self.ctrl.abs_tol,
            Chart::Comp { .. } => self.ctrl.abs_tol * COMP_ABS_SCALE,
        };
        err.abs() / (floor + self.ctrl.rel_tol * u0.abs().max(u1.abs()))
    }

    fn to_chart(&self, chart: Chart, u: f64, target: Chart) -> f64 {
        match (chart, target) {
            (Chart::Tau, Chart::Comp { .. }) => complement(u, self.field.params().r()),
            (Chart::Comp { sigma }, Chart::Tau) => sigma * (0.5 * self.r * (-u.clamp(0.0, 1.0)).ln_1p()).exp(),
            _ => u,
        }
    }

    /// Integrates from `(s0, u0)` in `chart` towards `s_end`.
    fn run(&self, s0: f64, s_end: f64, mut chart: Chart, mut u: f64, h_init: f64) -> Result<Leg> {
        let dir = (s_end - s0).signum();
        let mut s = s0;
        let mut samples = vec![self.sample(chart, s, u)];
        let mut segments = Vec::new();
        let mut contact = None;
        if s0 == s_end {
            return Ok(Leg { samples, segments, contact });
        }
        let mut h = h_init.min(self.ctrl.max_step).max(MIN_STEP) * dir;
        let mut k1 = self.rhs(chart, s, u);
        let mut fac_old = 1e-4f64;
        let mut stiff_hits = 0u32;
        let mut calm = 0u32;
        let mut implicit = false;
        let mut anchors = self.anchors.clone();
        let mut steps = 0usize;
        let mut last_reject = false;

        while (s_end - s) * dir > 0.0 {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Stiffness { s, h: h.abs() });
            }
            for &(a, ratio) in &anchors {
                let cap = (ratio * (s - a).abs()).max(10.0 * MIN_STEP);
                if h.abs() > cap {
                    h = cap * dir;
                }
            }
            if (s + h - s_end) * dir > 0.0 || ((s_end - s - h) * dir) < 1e-12 * s.abs().max(1.0) {
                h = s_end - s;
            }
            if h.abs() < MIN_STEP && (s_end - s).abs() > MIN_STEP {
                return Err(Error::Stiffness { s, h: h.abs() });
            }
            let s1 = if h == s_end - s { s_end } else { s + h };

            if implicit {
                match self.extrapolated_euler(chart, s, u, s1) {
                    Some((value, err)) => {
                        // q > 0 throughout the tail, so control relative error only
                        let errn = err / (self.ctrl.rel_tol * u.abs().max(value.abs()).max(f64::MIN_POSITIVE));
                        if errn <= 1.0 {
                            let du0 = self.rhs(chart, s, u);
                            let du1 = self.rhs(chart, s1, value);
                            segments.push(Segment {
                                start: s,
                                h: s1 - s,
                                chart,
                                piece: Piece::Hermite { u0: u, u1: value, du0, du1 },
                                stiff: true,
                            });
                            s = s1;
                            u = value;
                            samples.push(self.sample(chart, s, u));
                            let grow = if errn > 0.0 { 0.9 * errn.powf(-0.25) } else { 4.0 };
                            let cap = (STIFF_SPAN * s.abs() / self.r).min(self.ctrl.max_step);
                            h = dir * (h.abs() * grow.clamp(0.2, 4.0)).min(cap);
                            if u <= 0.0 {
                                contact = Some(s);
                                break;
                            }
                        } else {
                            h *= (0.9 * errn.powf(-0.25)).clamp(0.1, 0.9);
                        }
                    }
                    None => h *= 0.25,
                }
                continue;
            }

            let out = self.dopri(chart, s, u, k1, s1 - s);
            let errn = self.error_norm(chart, out.err, u, out.u1);
            if !errn.is_finite() {
                h *= 0.25;
                last_reject = true;
                continue;
            }
            let fac11 = errn.powf(0.17);
            if errn <= 1.0 {
                let mut u1 = out.u1;
                if let Chart::Comp { .. } = chart {
                    if u1 < 0.0 {
                        u1 = 0.0;
                    }
                }
                let h_taken = s1 - s;
                if chart == Chart::Tau && self.r > 1.0 && u * u1 < 0.0 {
                    // |τ|^{2/r} is not smooth at τ = 0: refine after the crossing too
                    anchors.push((s + h_taken * u / (u - u1), 0.05));
                }
                segments.push(Segment { start: s, h: h_taken, chart, piece: Piece::Dopri(out.rc), stiff: false });
                s = s1;
                u = u1;
                k1 = if u1 == out.u1 { out.k7 } else { self.rhs(chart, s, u) };
                samples.push(self.sample(chart, s, u));

                if let Chart::Comp { .. } = chart {
                    if out.stiff_ratio > STIFF_RATIO {
                        calm = 0;
                        stiff_hits += 1;
                        if stiff_hits >= STIFF_COUNT {
                            implicit = true;
                        }
                    } else {
                        calm += 1;
                        if calm >= CALM_COUNT {
                            stiff_hits = 0;
                        }
                    }
                    if u <= 0.0 {
                        contact = Some(s);
                        break;
                    }
                }

                let abs_tau = match chart {
                    Chart::Tau => u.abs(),
                    Chart::Comp { .. } => self.to_chart(chart, u, Chart::Tau).abs(),
                };
                let next_chart = match chart {
                    Chart::Tau if abs_tau > TO_COMP => Some(Chart::Comp { sigma: u.signum() }),
                    Chart::Comp { .. } if abs_tau < TO_TAU => Some(Chart::Tau),
                    _ => None,
                };
                if let Some(next) = next_chart {
                    u = self.to_chart(chart, u, next);
                    chart = next;
                    k1 = self.rhs(chart, s, u);
                    stiff_hits = 0;
                    implicit = false;
                }

                let mut fac = (fac11 / fac_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
                if last_reject {
                    fac = fac.max(1.0);
                }
                let h_new = (h_taken.abs() / fac).min(self.ctrl.max_step);
                h = dir * h_new;
                fac_old = errn.max(1e-4);
                last_reject = false;
            } else {
                h /= (fac11 / 0.9).min(5.0);
                last_reject = true;
            }
        }
        Ok(Leg { samples, segments, contact })
    }
}

fn finish(field: SlopeField, tag: BranchTag, mut samples: Vec<Sample>, mut segments: Vec<Segment>, contact: Option<f64>) -> Trajectory {
    samples.sort_by(|a, b| a.s.total_cmp(&b.s));
    samples.dedup_by(|a, b| a.s == b.s);
    segments.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    let s_span = (samples[0].s, samples[samples.len() - 1].s);
    let mut traj = Trajectory { field, samples, segments, tag, events: Vec::new(), s_span };
    traj.detect_zero_crossings();
    if let Some(s) = contact {
        traj.push_event(Event { kind: EventKind::BoundaryContact, s_loc: s, refined: false });
    }
    traj
}

fn initial_step(s0: f64, ctrl: &StepControl) -> f64 {
    (1e-3 * s0.abs().max(1e-2)).min(ctrl.max_step)
}

/// Starts on `τ = sigma` with the analytic micro-step, then integrates.
fn boundary_start(field: &SlopeField, s0: f64, sigma: f64, s_end: f64, ctrl: StepControl) -> Result<(Vec<Sample>, Vec<Segment>, Option<f64>)> {
    let dir = (s_end - s0).signum();
    let r = field.params().r() as f64;
    let m_lin = field.linear_weight(s0);
    let a = dir * (2.0 / r) * m_lin;
    if !(a > 0.0) {
        return Err(Error::domain(format!(
            "solution through (s0 = {s0}, y0 = {sigma}) does not leave the boundary"
        )));
    }
    let b = -dir * (2.0 / r) * sigma * field.root_weight(s0) * a.sqrt();
    let dl = if s0 == 0.0 { 1e-6 } else { (1e-6 * s0.abs().max(1.0)).min(0.5 * s0.abs()) };
    let lin_slope = (field.linear_weight(s0 + dl) - field.linear_weight(s0 - dl)) / (2.0 * dl);
    let c = b * b / (6.0 * a) - 0.5 * a * a + lin_slope / r;
    // keep the half-power correction small against the linear term
    let shape = BOUNDARY_SHAPE * a / b.abs();
    let delta = BOUNDARY_MICRO_STEP.min(shape * shape).min((s_end - s0).abs());
    let q1 = a * delta + (2.0 / 3.0) * b * delta * delta.sqrt() + c * delta * delta;
    let runner = Runner::new(field, ctrl, Some(s0));
    let chart = Chart::Comp { sigma };
    let s1 = s0 + dir * delta;
    let first = Segment { start: s0, h: s1 - s0, chart, piece: Piece::Boundary { a, b, c }, stiff: false };
    let head = Sample { s: s0, tau: sigma, dtau: field.boundary_slope(s0, sigma), q: 0.0 };
    let leg = runner.run(s1, s_end, chart, q1, delta)?;
    let mut samples = vec![head];
    samples.extend(leg.samples);
    let mut segments = vec![first];
    segments.extend(leg.segments);
    Ok((samples, segments, leg.contact))
}

fn regular_start(field: &SlopeField, s0: f64, y0: f64, s_end: f64, ctrl: StepControl) -> Result<Leg> {
    let runner = Runner::new(field, ctrl, None);
    let (chart, u) = if y0.abs() > TO_COMP {
        (Chart::Comp { sigma: y0.signum() }, complement(y0, field.params().r()))
    } else {
        (Chart::Tau, y0)
    };
    runner.run(s0, s_end, chart, u, initial_step(s0, &ctrl))
}

fn integrate_to(field: &SlopeField, s0: f64, y0: f64, s_end: f64, ctrl: StepControl) -> Result<(Vec<Sample>, Vec<Segment>, Option<f64>)> {
    ctrl.validate()?;
    field.check_s(s0)?;
    if !(y0.abs() <= 1.0 + crate::slopefield::CLAMP_BAND) {
        return Err(Error::domain(format!("initial value y0 = {y0} outside [-1, 1]")));
    }
    let y0 = y0.clamp(-1.0, 1.0);
    let (lo, hi) = field.family().domain();
    if s_end < lo || s_end > hi || (s_end == lo && field.check_s(s_end).is_err()) {
        return Err(Error::domain(format!("integration end {s_end} outside the family domain")));
    }
    if y0.abs() == 1.0 && s0 != s_end {
        boundary_start(field, s0, y0, s_end, ctrl)
    } else {
        let leg = regular_start(field, s0, y0, s_end, ctrl)?;
        Ok((leg.samples, leg.segments, leg.contact))
    }
}

/// Integrates `y' = F(s, y)`, `y(s0) = y0` from `s0` towards `ctrl.s_max`
/// (backwards when `ctrl.s_max < s0`).
pub fn integrate(field: &SlopeField, s0: f64, y0: f64, ctrl: &StepControl) -> Result<Trajectory> {
    let (samples, segments, contact) = integrate_to(field, s0, y0, ctrl.s_max, *ctrl)?;
    if segments.is_empty() {
        return Err(Error::domain(format!("empty integration interval at s0 = {s0}")));
    }
    let tag = if y0 >= 1.0 {
        BranchTag::Plus
    } else if y0 <= -1.0 {
        BranchTag::Minus
    } else {
        BranchTag::Centered(y0)
    };
    Ok(finish(*field, tag, samples, segments, contact))
}

/// Which boundary value a branch starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
}

/// The solution `τ_{s0}^∓` leaving the boundary `y = ∓1` at `s0`.
pub fn solve_branch(params: &FlowParams, family: &ParallelFamily, branch: Branch, s0: f64, ctrl: &StepControl) -> Result<Trajectory> {
    let field = SlopeField::new(*params, family.kind())?;
    if !family.contains(s0) {
        return Err(Error::domain(format!("s0 = {s0} outside the {} domain", family.kind().name())));
    }
    if s0 >= ctrl.s_max {
        return Err(Error::domain(format!("s0 = {s0} must lie below s_max = {}", ctrl.s_max)));
    }
    let y0 = match branch {
        Branch::Minus => -1.0,
        Branch::Plus => 1.0,
    };
    integrate(&field, s0, y0, ctrl)
}

/// The distinguished solution: the rotational center solution, the constant
/// parabolic solution `τ ≡ L`, or the hyperbolic `r = 1` solution through
/// `(0, λ)` on `[−s_max, s_max]`.
pub fn solve_tau_zero(params: &FlowParams, family: &ParallelFamily, center: Option<f64>, ctrl: &StepControl) -> Result<Trajectory> {
    ctrl.validate()?;
    let field = SlopeField::new(*params, family.kind())?;
    match family.kind() {
        FamilyKind::Rotational => {
            let r = params.r();
            let coef = params.c() / params.n() as f64;
            let s1 = SERIES_END.min(0.5 * ctrl.s_max);
            let y1 = coef * s1.powi(r as i32);
            let leg = regular_start(&field, s1, y1, ctrl.s_max, *ctrl)?;
            let head = Sample {
                s: 0.0,
                tau: 0.0,
                dtau: if r == 1 { coef } else { 0.0 },
                q: 1.0,
            };
            let mut samples = vec![head];
            samples.extend(leg.samples);
            let mut segments = vec![Segment {
                start: 0.0,
                h: s1,
                chart: Chart::Tau,
                piece: Piece::Power { coef, power: r as f64 },
                stiff: false,
            }];
            segments.extend(leg.segments);
            let mut traj = finish(field, BranchTag::Zero, samples, segments, leg.contact);
            traj.events.retain(|e| !(e.kind == EventKind::ZeroCrossing && e.s_loc <= s1));
            Ok(traj)
        }
        FamilyKind::Parabolic => {
            let l = crate::limits::solve_l(params).l;
            let (a, b) = (-ctrl.s_max, ctrl.s_max);
            let n_pts = ((b - a) / ctrl.max_step).ceil().max(1.0) as usize;
            let q = complement(l, params.r());
            let samples: Vec<Sample> = (0..=n_pts)
                .map(|i| Sample { s: a + (b - a) * i as f64 / n_pts as f64, tau: l, dtau: 0.0, q })
                .collect();
            let segments = samples
                .windows(2)
                .map(|w| Segment { start: w[0].s, h: w[1].s - w[0].s, chart: Chart::Tau, piece: Piece::Constant(l), stiff: false })
                .collect();
            Ok(finish(field, BranchTag::Zero, samples, segments, None))
        }
        FamilyKind::Hyperbolic => {
            if params.r() != 1 {
                return Err(Error::domain("the hyperbolic center solution exists only for r = 1"));
            }
            let lambda = center.ok_or_else(|| Error::domain("hyperbolic center solution needs lambda"))?;
            if !(lambda > -1.0 && lambda < 1.0) {
                return Err(Error::domain(format!("lambda = {lambda} must lie in (-1, 1)")));
            }
            let fwd = regular_start(&field, 0.0, lambda, ctrl.s_max, *ctrl)?;
            let bwd = regular_start(&field, 0.0, lambda, -ctrl.s_max, *ctrl)?;
            let contact = fwd.contact.or(bwd.contact);
            let mut samples = bwd.samples;
            samples.extend(fwd.samples);
            let mut segments = bwd.segments;
            segments.extend(fwd.segments);
            Ok(finish(field, BranchTag::Centered(lambda), samples, segments, contact))
        }
        FamilyKind::Planar => Err(Error::domain("the planar family has no center solution")),
    }
}

/// Mean of `τ` over `[s_end − window, s_end]`. Adds a `Plateau` event when the
/// total variation there is below `1e−8`.
pub fn estimate_limit(traj: &mut Trajectory, window: f64) -> Result<f64> {
    let (lo, hi) = traj.s_span;
    if !(window > 0.0) || window > hi - lo {
        return Err(Error::domain(format!("window {window} does not fit in [{lo}, {hi}]")));
    }
    let a = hi - window;
    let mut pts = vec![(a, traj.eval(a)?.tau)];
    pts.extend(traj.samples.iter().filter(|smp| smp.s > a).map(|smp| (smp.s, smp.tau)));
    let mut area = 0.0;
    let mut variation = 0.0;
    for w in pts.windows(2) {
        area += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        variation += (w[1].1 - w[0].1).abs();
    }
    if variation > LIMIT_VARIATION {
        return Err(Error::NotConverged { variation });
    }
    if variation < PLATEAU_VARIATION {
        traj.push_event(Event { kind: EventKind::Plateau, s_loc: a, refined: false });
    }
    Ok(area / window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::solve_l;

    fn p(eps: i32, n: u32, r: u32) -> FlowParams {
        FlowParams::from_epsilon(eps, n, r).unwrap()
    }

    fn fam(kind: FamilyKind, params: &FlowParams) -> ParallelFamily {
        ParallelFamily::new(kind, params).unwrap()
    }

    /// Classical RK4 in `x = ln s`, fixed step, used as an independent oracle.
    fn rk4_log(params: &FlowParams, s0: f64, y0: f64, s1: f64, dx: f64) -> f64 {
        let field = SlopeField::new(*params, FamilyKind::Rotational).unwrap();
        let g = |x: f64, y: f64| {
            let s = x.exp();
            s * field.eval_unchecked(s, y.clamp(-1.0, 1.0))
        };
        let (mut x, x1) = (s0.ln(), s1.ln());
        let steps = ((x1 - x) / dx).ceil() as usize;
        let h = (x1 - x) / steps as f64;
        let mut y = y0;
        for _ in 0..steps {
            let k1 = g(x, y);
            let k2 = g(x + h / 2.0, y + h / 2.0 * k1);
            let k3 = g(x + h / 2.0, y + h / 2.0 * k2);
            let k4 = g(x + h, y + h * k3);
            y = (y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(-1.0, 1.0);
            x += h;
        }
        y
    }

    #[test]
    fn center_slope_follows_the_oracle_not_unity() {
        // τ_{s0}^± squeeze τ0; from tiny s0 both have forgotten their start by s = 1e-2.
        for (n, r) in [(2u32, 1u32), (3, 1), (4, 1), (4, 3)] {
            let params = p(0, n, r);
            let s = 1e-2;
            let lower = rk4_log(&params, 1e-12, -1.0, s, 1e-4);
            let upper = rk4_log(&params, 1e-12, 1.0, s, 1e-4);
            let coef = params.c() / n as f64;
            let ratio_lo = lower / s.powi(r as i32);
            let ratio_hi = upper / s.powi(r as i32);
            assert!((ratio_lo - coef).abs() < 1e-3 * coef.max(1.0), "n={n} r={r}: {ratio_lo} vs {coef}");
            assert!((ratio_hi - coef).abs() < 1e-3 * coef.max(1.0), "n={n} r={r}: {ratio_hi} vs {coef}");
            if r == 1 && n > 1 {
                assert!((ratio_lo - 1.0).abs() > 0.4);
            }
            let traj = solve_tau_zero(&params, &fam(FamilyKind::Rotational, &params), None, &StepControl::default()).unwrap();
            let t = traj.tau_at(s).unwrap();
            assert!((t - 0.5 * (lower + upper)).abs() < 1e-6 * s.powi(r as i32).max(1e-9));
        }
    }

    #[test]
    fn center_solution_matches_oracle_away_from_axis() {
        for (eps, n, r) in [(0, 4, 3), (-1, 4, 3), (0, 3, 1), (-1, 5, 2)] {
            let params = p(eps, n, r);
            let traj = solve_tau_zero(&params, &fam(FamilyKind::Rotational, &params), None, &StepControl { s_max: 3.0, ..Default::default() }).unwrap();
            for s in [1.0, 3.0] {
                let lower = rk4_log(&params, 1e-10, -1.0, s, 1e-4);
                let upper = rk4_log(&params, 1e-10, 1.0, s, 1e-4);
                let t = traj.tau_at(s).unwrap();
                assert!((upper - lower).abs() < 1e-9);
                assert!((t - lower).abs() < 1e-8, "{eps} {n} {r} s={s}: {t} vs {lower}");
            }
        }
    }

    #[test]
    fn parabolic_center_is_constant() {
        let params = p(-1, 4, 3);
        let traj = solve_tau_zero(&params, &fam(FamilyKind::Parabolic, &params), None, &StepControl::default()).unwrap();
        let l = solve_l(&params).l;
        assert!(traj.samples().iter().all(|smp| smp.tau == l && smp.dtau == 0.0));
        assert!(crate::slopefield::f_parabolic(&params, l).unwrap().abs() < 1e-13);
        assert_eq!(traj.tau_at(3.3).unwrap(), l);
    }

    #[test]
    fn parabolic_integration_from_l_stays_put() {
        let params = p(-1, 4, 3);
        let field = SlopeField::new(params, FamilyKind::Parabolic).unwrap();
        let l = solve_l(&params).l;
        let traj = integrate(&field, 0.0, l, &StepControl { s_max: 10.0, ..Default::default() }).unwrap();
        assert!(traj.samples().iter().all(|smp| (smp.tau - l).abs() < 1e-12));
    }

    #[test]
    fn minus_branch_rises_through_one_zero() {
        let params = p(0, 4, 3);
        let traj = solve_branch(&params, &fam(FamilyKind::Rotational, &params), Branch::Minus, 0.2, &StepControl::default()).unwrap();
        let zeros = traj.zero_crossings();
        assert_eq!(zeros.len(), 1);
        assert!(zeros[0] > 0.2 && zeros[0] < 30.0);
        assert!(traj.tau_at(zeros[0]).unwrap().abs() < 1e-11);
        assert!(traj.samples().windows(2).all(|w| w[1].tau >= w[0].tau));
        assert!(traj.samples().iter().all(|smp| smp.dtau > 0.0));
    }

    #[test]
    fn euclidean_plus_branch_creeps_to_one() {
        let params = p(0, 2, 1);
        let field = SlopeField::new(params, FamilyKind::Rotational).unwrap();
        let traj = integrate(&field, 1.0, 1.0, &StepControl::default()).unwrap();
        let end = traj.tau_at(30.0).unwrap();
        assert!(1.0 - end < 1e-2 && end < 1.0);
        let oracle = rk4_log(&params, 1.0, 1.0, 30.0, 1e-5);
        assert!((end - oracle).abs() < 1e-8, "{end} vs {oracle}");
    }

    #[test]
    fn hyperbolic_space_minus_branch_reaches_l() {
        let params = p(-1, 4, 1);
        let mut traj = solve_branch(&params, &fam(FamilyKind::Rotational, &params), Branch::Minus, 1.0, &StepControl::default()).unwrap();
        let l = 1.0 / 10f64.sqrt();
        assert!((traj.tau_at(30.0).unwrap() - l).abs() < 1e-3);
        let est = estimate_limit(&mut traj, 5.0).unwrap();
        assert!((est - l).abs() < 1e-6);
        assert!(traj.events().iter().any(|e| e.kind == EventKind::Plateau));
    }

    #[test]
    fn hyperbolic_plus_branch_stays_positive() {
        let params = p(-1, 4, 3);
        let traj = solve_branch(&params, &fam(FamilyKind::Hyperbolic, &params), Branch::Plus, 0.5, &StepControl::default()).unwrap();
        assert!(traj.samples().iter().all(|smp| smp.tau > 0.0));
    }

    #[test]
    fn centered_hyperbolic_solution_has_two_limits() {
        let params = p(-1, 2, 1);
        let traj = solve_tau_zero(&params, &fam(FamilyKind::Hyperbolic, &params), Some(0.0), &StepControl::default()).unwrap();
        let l = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(traj.s_span(), (-30.0, 30.0));
        assert!((traj.tau_at(30.0).unwrap() - l).abs() < 1e-3);
        assert!((traj.tau_at(-30.0).unwrap() + l).abs() < 1e-3);
        assert!(solve_tau_zero(&p(-1, 3, 2), &fam(FamilyKind::Hyperbolic, &p(-1, 3, 2)), Some(0.0), &StepControl::default()).is_err());
    }

    #[test]
    fn stiff_euclidean_tail_is_integrated() {
        for (n, r) in [(4, 3), (6, 5), (5, 4)] {
            let params = p(0, n, r);
            for branch in [Branch::Minus, Branch::Plus] {
                let mut traj = solve_branch(&params, &fam(FamilyKind::Rotational, &params), branch, 1.0, &StepControl::default()).unwrap();
                let end = traj.samples().last().unwrap();
                assert_eq!(end.s, 30.0);
                let c = params.c();
                let q_eq = ((n - r) as f64 / (c * 30f64.powi(r as i32))).powi(2);
                assert!((end.q / q_eq - 1.0).abs() < 0.05, "{n} {r} {:?}: {} vs {q_eq}", branch, end.q);
                assert!(1.0 - estimate_limit(&mut traj, 5.0).unwrap() < 2e-2);
            }
        }
    }

    #[test]
    fn dense_output_is_consistent_with_field() {
        for (eps, n, r, kind) in [
            (0, 4, 3, FamilyKind::Rotational),
            (-1, 4, 3, FamilyKind::Hyperbolic),
            (-1, 5, 2, FamilyKind::Parabolic),
            (-1, 2, 1, FamilyKind::Rotational),
        ] {
            let params = p(eps, n, r);
            let family = fam(kind, &params);
            let s0 = 0.5;
            for branch in [Branch::Minus, Branch::Plus] {
                let traj = solve_branch(&params, &family, branch, s0, &StepControl::default()).unwrap();
                let field = traj.field();
                for w in traj.samples().windows(2) {
                    let s = 0.5 * (w[0].s + w[1].s);
                    // the analytic boundary piece, a neighbourhood of the non-smooth
                    // τ = 0 crossing for r > 1, and the stiff tail are excluded
                    let near_zero = r > 1 && traj.zero_crossings().iter().any(|z| (s - z).abs() < 1e-3);
                    let stiff = traj.stiff_onset().is_some_and(|on| s >= on);
                    if s < s0 + BOUNDARY_MICRO_STEP || near_zero || stiff {
                        continue;
                    }
                    let pt = traj.eval(s).unwrap();
                    let f = field.eval(s, pt.tau).unwrap();
                    assert!((pt.dtau - f).abs() < 1e-7, "{eps} {n} {r} {kind:?} {branch:?} s={s} tau={}: {} vs {f}", pt.tau, pt.dtau);
                }
                for smp in traj.samples() {
                    assert!(smp.tau.abs() <= 1.0);
                    if smp.s > s0 && !traj.stiff_onset().is_some_and(|on| smp.s >= on) {
                        let f = field.eval(smp.s, smp.tau).unwrap();
                        assert!((smp.dtau - f).abs() < 1e-10, "{eps} {n} {r} {kind:?} {branch:?} s={} tau={}: {} vs {f}", smp.s, smp.tau, smp.dtau);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_starts_are_rejected() {
        let params = p(0, 4, 3);
        let field = SlopeField::new(params, FamilyKind::Rotational).unwrap();
        assert!(integrate(&field, 0.0, 0.5, &StepControl::default()).is_err());
        assert!(integrate(&field, 1.0, 1.5, &StepControl::default()).is_err());
        let bad = StepControl { rel_tol: -1.0, ..Default::default() };
        assert!(integrate(&field, 1.0, 0.5, &bad).is_err());
    }
}
