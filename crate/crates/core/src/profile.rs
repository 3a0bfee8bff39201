//! Geometry of a graph on parallels rebuilt from `τ`: the ρ-function, the
//! height `φ = ∫ ρ/√(1 − ρ²)`, the angle `θ`, the principal curvatures and
//! `H_r`, together with the soliton residual `H_r − θ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::{BranchTag, EventKind, Trajectory};
use crate::model::{binomial, FamilyKind, FlowParams, ParallelFamily};
use crate::quad::{integrate, QuadOptions};
use crate::slopefield::complement;

/// Sign of `ρ = ±τ^{1/r}` for even `r`; ignored for odd `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignBranch {
    Plus,
    Minus,
}

impl SignBranch {
    fn factor(self) -> f64 {
        match self {
            SignBranch::Plus => 1.0,
            SignBranch::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkKind {
    C2Blowup,
    VerticalTangent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularMark {
    pub s_loc: f64,
    pub kind: MarkKind,
}

/// Per-sample flag: a vertical tangent (`VT`) or an infinite `ρ'` (`C2`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleFlag {
    #[default]
    #[serde(rename = "")]
    None,
    #[serde(rename = "C2")]
    C2,
    #[serde(rename = "VT")]
    Vt,
}

impl SampleFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleFlag::None => "",
            SampleFlag::C2 => "C2",
            SampleFlag::Vt => "VT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "" => Ok(SampleFlag::None),
            "C2" => Ok(SampleFlag::C2),
            "VT" => Ok(SampleFlag::Vt),
            other => Err(Error::Parse(format!("unknown sample flag {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSample {
    pub s: f64,
    pub tau: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub phi: f64,
    pub theta: f64,
    pub k_tangent: f64,
    pub k_normal: f64,
    pub h_r: f64,
    pub residual: f64,
    pub flag: SampleFlag,
}

/// A sampled graph on parallels. Profiles built from a trajectory keep it
/// for dense evaluation; profiles read back from disk do not.
#[derive(Clone, Debug)]
pub struct Profile {
    params: FlowParams,
    family: ParallelFamily,
    sign_branch: SignBranch,
    samples: Vec<ProfileSample>,
    marks: Vec<SingularMark>,
    trajectory: Option<Trajectory>,
}

/// `ρ` from `τ = ρ^r`.
pub fn rho_from_tau(tau: f64, r: u32, sign_branch: SignBranch) -> Result<f64> {
    if r % 2 == 1 {
        return Ok(tau.signum() * tau.abs().powf(1.0 / r as f64) * (tau != 0.0) as u8 as f64);
    }
    if tau < -1e-12 {
        return Err(Error::domain(format!("tau = {tau} < 0 has no real root of even order {r}")));
    }
    Ok(sign_branch.factor() * tau.max(0.0).powf(1.0 / r as f64))
}

/// `k_tangent = −α(s)ρ` (multiplicity `n − 1`) and `k_normal = ρ'`.
pub fn curvatures(family: &ParallelFamily, s: f64, rho: f64, rho_prime: f64) -> Result<(f64, f64)> {
    Ok((-family.alpha(s)? * rho, rho_prime))
}

/// `H_r = binom(n−1, r)·a^r + binom(n−1, r−1)·a^{r−1}·ρ'` with `a = −αρ`.
pub fn hr_closed(params: &FlowParams, a: f64, rho_prime: f64) -> f64 {
    let r = params.r() as i32;
    params.tangential_weight() * a.powi(r) + params.mixed_weight() * a.powi(r - 1) * rho_prime
}

/// The elementary symmetric polynomial `e_r(k)`.
pub fn hr_elementary(k: &[f64], r: u32) -> Result<f64> {
    let r = r as usize;
    if r == 0 || r > k.len() {
        return Err(Error::domain(format!("order {r} invalid for {} curvatures", k.len())));
    }
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for (i, &ki) in k.iter().enumerate() {
        for j in (1..=r.min(i + 1)).rev() {
            e[j] += ki * e[j - 1];
        }
    }
    Ok(e[r])
}

/// `φ` at every point of `grid`, with `φ(s_ref) = phi_ref`. `rho_q(s)` returns
/// `(ρ, 1 − ρ²)`; grid points where `1 − ρ² = 0` are treated as
/// inverse-square-root endpoints.
pub fn height(grid: &[f64], rho_q: impl Fn(f64) -> (f64, f64), s_ref: f64, phi_ref: f64) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if !(s_ref >= grid[0] && s_ref <= grid[grid.len() - 1]) {
        return Err(Error::domain(format!("reference point {s_ref} outside the grid")));
    }
    let integrand = |u: f64| {
        let (rho, q) = rho_q(u);
        if rho == 0.0 {
            0.0
        } else {
            rho / q.sqrt()
        }
    };
    let singular = |u: f64| rho_q(u).1 <= 0.0;
    let piece = |a: f64, b: f64| -> Result<f64> {
        let opts = QuadOptions { sqrt_left: singular(a), sqrt_right: singular(b), ..Default::default() };
        integrate(integrand, a, b, &opts)
    };
    height_by(grid, piece, s_ref, phi_ref)
}

/// Cumulative heights from a routine integrating `φ'` over `[a, b]`, `a < b`.
fn height_by(grid: &[f64], piece: impl Fn(f64, f64) -> Result<f64>, s_ref: f64, phi_ref: f64) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if !(s_ref >= grid[0] && s_ref <= grid[grid.len() - 1]) {
        return Err(Error::domain(format!("reference point {s_ref} outside the grid")));
    }
    let k = grid.partition_point(|&s| s < s_ref);
    let mut phi = vec![0.0; grid.len()];
    // forward from s_ref
    let mut acc = phi_ref;
    let mut prev = s_ref;
    for i in k..grid.len() {
        acc += piece(prev, grid[i])?;
        phi[i] = acc;
        prev = grid[i];
    }
    let mut acc = phi_ref;
    let mut prev = s_ref;
    for i in (0..k).rev() {
        acc -= piece(grid[i], prev)?;
        phi[i] = acc;
        prev = grid[i];
    }
    Ok(phi)
}

/// `∫_a^b ρ/θ ds` along a trajectory, `a ≤ b`. The analytic boundary segment
/// is integrated in its own smooth variable.
fn trajectory_integral(traj: &Trajectory, sign_branch: SignBranch, a: f64, b: f64) -> Result<f64> {
    let r = traj.params().r();
    let smooth = |lo: f64, hi: f64| -> Result<f64> {
        if lo >= hi {
            return Ok(0.0);
        }
        let f = |u: f64| match traj.eval(u) {
            Ok(p) => match rho_from_tau(p.tau, r, sign_branch) {
                Ok(0.0) => 0.0,
                Ok(rho) => rho / p.q.sqrt(),
                Err(_) => f64::NAN,
            },
            Err(_) => f64::NAN,
        };
        integrate(f, lo, hi, &QuadOptions::default())
    };
    let Some((lo, hi)) = traj.boundary_span() else {
        return smooth(a, b);
    };
    if b <= lo || a >= hi {
        return smooth(a, b);
    }
    let (ia, ib) = (a.max(lo), b.min(hi));
    let sign = if r % 2 == 1 { 1.0 } else { sign_branch.factor() };
    let inner = traj.boundary_integral(ib).expect("inside span")? - traj.boundary_integral(ia).expect("inside span")?;
    Ok(smooth(a, ia)? + sign * inner + smooth(ib, b)?)
}

fn derived_sample(params: &FlowParams, family: &ParallelFamily, s: f64, tau: f64, rho: f64, rho_prime: f64, q: f64, phi: f64) -> Result<ProfileSample> {
    let theta = q.max(0.0).sqrt();
    let (k_tangent, k_normal) = curvatures(family, s, rho, rho_prime)?;
    let h_r = hr_closed(params, k_tangent, rho_prime);
    Ok(ProfileSample {
        s,
        tau,
        rho,
        rho_prime,
        phi,
        theta,
        k_tangent,
        k_normal,
        h_r,
        residual: h_r - theta,
        flag: if q <= 0.0 { SampleFlag::Vt } else { SampleFlag::None },
    })
}

#[allow(clippy::too_many_arguments)]
fn node_sample(
    params: &FlowParams,
    family: &ParallelFamily,
    sign_branch: SignBranch,
    is_center: bool,
    s: f64,
    tau: f64,
    dtau: f64,
    q: f64,
    phi: f64,
) -> Result<ProfileSample> {
    let r = params.r();
    if is_center && s == 0.0 {
        let apex = crate::limits::apex_curvature(params);
        let h_r = hr_closed(params, apex, apex);
        return Ok(ProfileSample {
            s,
            tau: 0.0,
            rho: 0.0,
            rho_prime: apex,
            phi,
            theta: 1.0,
            k_tangent: apex,
            k_normal: apex,
            h_r,
            residual: h_r - 1.0,
            flag: SampleFlag::None,
        });
    }
    let rho = rho_from_tau(tau, r, sign_branch)?;
    if r > 1 && tau.abs() < 1e-14 && !is_center {
        let rho_prime = f64::INFINITY.copysign(sign_branch.factor() * dtau);
        return Ok(ProfileSample {
            s,
            tau,
            rho,
            rho_prime,
            phi,
            theta: 1.0,
            k_tangent: 0.0,
            k_normal: rho_prime,
            h_r: f64::NAN,
            residual: f64::NAN,
            flag: SampleFlag::C2,
        });
    }
    let rho_prime = if r == 1 { dtau } else { dtau * rho / (r as f64 * tau) };
    derived_sample(params, family, s, tau, rho, rho_prime, q, phi)
}

/// Assembles a profile from a trajectory; `φ(s_ref) = phi_ref`.
pub fn build_profile(traj: &Trajectory, sign_branch: SignBranch, s_ref: f64, phi_ref: f64) -> Result<Profile> {
    let params = *traj.params();
    let family = *traj.field().family();
    let r = params.r();
    let is_center = traj.tag() == BranchTag::Zero && family.kind() == FamilyKind::Rotational;

    let grid: Vec<f64> = traj.samples().iter().map(|smp| smp.s).collect();
    let phi = height_by(&grid, |a, b| trajectory_integral(traj, sign_branch, a, b), s_ref, phi_ref)?;

    let mut samples = Vec::with_capacity(grid.len());
    let mut marks = Vec::new();
    for (smp, &phi) in traj.samples().iter().zip(&phi) {
        let sample = node_sample(&params, &family, sign_branch, is_center, smp.s, smp.tau, smp.dtau, smp.q, phi)?;
        if sample.flag == SampleFlag::Vt {
            marks.push(SingularMark { s_loc: smp.s, kind: MarkKind::VerticalTangent });
        }
        samples.push(sample);
    }
    if r > 1 {
        for e in traj.events() {
            if e.kind == EventKind::ZeroCrossing && traj.eval(e.s_loc).map_or(false, |p| p.dtau > 0.0) {
                marks.push(SingularMark { s_loc: e.s_loc, kind: MarkKind::C2Blowup });
            }
        }
        let first = traj.samples()[0];
        if first.tau.abs() < 1e-12 && first.dtau > 0.0 && !is_center && !marks.iter().any(|m| m.kind == MarkKind::C2Blowup && (m.s_loc - first.s).abs() < 1e-9) {
            marks.push(SingularMark { s_loc: first.s, kind: MarkKind::C2Blowup });
        }
    }
    marks.sort_by(|a, b| a.s_loc.total_cmp(&b.s_loc));
    Ok(Profile { params, family, sign_branch, samples, marks, trajectory: Some(traj.clone()) })
}

impl Profile {
    /// Profile of a closed-form graph on `grid`; `local(s)` returns
    /// `(ρ, ρ', θ)`. Passing `θ` separately keeps `1 − ρ²` accurate near
    /// vertical tangents.
    pub fn from_closed_form(
        params: FlowParams,
        family: ParallelFamily,
        grid: &[f64],
        local: impl Fn(f64) -> (f64, f64, f64),
        s_ref: f64,
        phi_ref: f64,
    ) -> Result<Profile> {
        let phi = height(grid, |s| {
            let (rho, _, theta) = local(s);
            (rho, theta * theta)
        }, s_ref, phi_ref)?;
        let r = params.r() as i32;
        let mut samples = Vec::with_capacity(grid.len());
        for (&s, &phi) in grid.iter().zip(&phi) {
            let (rho, rho_prime, theta) = local(s);
            samples.push(derived_sample(&params, &family, s, rho.powi(r), rho, rho_prime, theta * theta, phi)?);
        }
        let marks = samples
            .iter()
            .filter(|smp| smp.flag == SampleFlag::Vt)
            .map(|smp| SingularMark { s_loc: smp.s, kind: MarkKind::VerticalTangent })
            .collect();
        Ok(Profile { params, family, sign_branch: SignBranch::Plus, samples, marks, trajectory: None })
    }

    /// Reassembles a profile from stored samples (no dense output).
    pub fn from_parts(params: FlowParams, family: ParallelFamily, sign_branch: SignBranch, samples: Vec<ProfileSample>, marks: Vec<SingularMark>) -> Profile {
        Profile { params, family, sign_branch, samples, marks, trajectory: None }
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn family(&self) -> &ParallelFamily {
        &self.family
    }

    pub fn sign_branch(&self) -> SignBranch {
        self.sign_branch
    }

    pub fn samples(&self) -> &[ProfileSample] {
        &self.samples
    }

    pub fn marks(&self) -> &[SingularMark] {
        &self.marks
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.samples[0].s, self.samples[self.samples.len() - 1].s)
    }

    /// Full sample at an arbitrary `s` from the dense output.
    pub fn evaluate(&self, s: f64) -> Result<ProfileSample> {
        let traj = self
            .trajectory
            .as_ref()
            .ok_or_else(|| Error::domain("profile has no dense output attached"))?;
        let p = traj.eval(s)?;
        let is_center = traj.tag() == BranchTag::Zero && self.family.kind() == FamilyKind::Rotational;
        node_sample(&self.params, &self.family, self.sign_branch, is_center, s, p.tau, p.dtau, p.q, self.phi_at(s)?)
    }

    /// Whether `s` lies within `radius` of a singular mark.
    pub fn near_mark(&self, s: f64, radius: f64) -> bool {
        self.marks.iter().any(|m| (m.s_loc - s).abs() <= radius)
    }

    /// Largest `|H_r − θ|` over unflagged samples farther than `radius` from any mark.
    pub fn max_residual(&self, radius: f64) -> f64 {
        self.samples
            .iter()
            .filter(|smp| smp.flag == SampleFlag::None && !self.near_mark(smp.s, radius))
            .map(|smp| smp.residual.abs())
            .fold(0.0, f64::max)
    }

    /// `(ρ, 1 − ρ²)` at `s`, by dense output when available.
    pub fn rho_q_at(&self, s: f64) -> Result<(f64, f64)> {
        if let Some(traj) = &self.trajectory {
            let p = traj.eval(s)?;
            return Ok((rho_from_tau(p.tau, self.params.r(), self.sign_branch)?, p.q));
        }
        let (i, t, h) = self.locate(s)?;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let rho = a.rho + t * (b.rho - a.rho);
        let _ = h;
        Ok((rho, (1.0 - rho) * (1.0 + rho)))
    }

    fn locate(&self, s: f64) -> Result<(usize, f64, f64)> {
        let (lo, hi) = self.s_range();
        if !(s >= lo && s <= hi) || self.samples.len() < 2 {
            return Err(Error::domain(format!("s = {s} outside profile range [{lo}, {hi}]")));
        }
        let i = self.samples.partition_point(|smp| smp.s <= s).clamp(1, self.samples.len() - 1) - 1;
        let h = self.samples[i + 1].s - self.samples[i].s;
        Ok((i, (s - self.samples[i].s) / h, h))
    }

    /// Height at an arbitrary `s`: quadrature from the nearest sample on the
    /// left when a trajectory is attached, cubic Hermite in `(φ, ρ/θ)`
    /// otherwise.
    pub fn phi_at(&self, s: f64) -> Result<f64> {
        let (i, t, h) = self.locate(s)?;
        let a = &self.samples[i];
        if let Some(traj) = &self.trajectory {
            if s == a.s {
                return Ok(a.phi);
            }
            return Ok(a.phi + trajectory_integral(traj, self.sign_branch, a.s, s)?);
        }
        let b = &self.samples[i + 1];
        let slope = |smp: &ProfileSample| if smp.theta > 0.0 { smp.rho / smp.theta } else { 0.0 };
        let (m0, m1) = (slope(a), slope(b));
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * a.phi
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * b.phi
            + (t3 - t2) * h * m1)
    }

    /// The same profile with `φ ↦ −φ`.
    pub fn reflected(&self) -> Profile {
        let mut out = self.clone();
        for smp in &mut out.samples {
            smp.phi = -smp.phi;
        }
        out.trajectory = None;
        out
    }

    /// `θ` recomputed from `ρ`, for checks of `θ² + ρ² = 1`.
    pub fn theta_from_rho(rho: f64) -> f64 {
        complement(rho, 1).max(0.0).sqrt()
    }
}

/// `binom(n − 1, r)` and `binom(n − 1, r − 1)` as exact integers.
pub fn hr_weights(params: &FlowParams) -> (u128, u128) {
    (binomial(params.n() - 1, params.r()), binomial(params.n() - 1, params.r() - 1))
}
