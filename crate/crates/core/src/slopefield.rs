//! Right-hand sides of the reduced Cauchy problems.
//!
//! Writing `τ = ρ^r` and `m(s) = −α(s)`, the translator equation for a graph
//! on parallels becomes
//!
//! ```text
//! τ' = C · m(s)^{1−r} · √(1 − τ^{2/r}) − (n − r) · m(s) · τ
//! ```
//!
//! which specialises to the rotational (`m = cot_ε`), parabolic (`m = 1`)
//! and hyperbolic (`m = tanh`) fields.

use crate::error::{Error, Result};
use crate::model::{FamilyKind, FlowParams, ParallelFamily};
use crate::profile::hr_closed;

/// Overshoot beyond `|y| = 1` that is silently clamped back.
pub const CLAMP_BAND: f64 = 1e-12;

/// `|y|^{2/r}` computed as `exp(log(y²)/r)`, exactly zero at `y = 0`.
pub fn pow_two_over_r(y: f64, r: u32) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if r == 1 {
        return y * y;
    }
    ((y * y).ln() / r as f64).exp()
}

/// `1 − |y|^{2/r}` without cancellation near `|y| = 1`.
pub fn complement(y: f64, r: u32) -> f64 {
    let a = y.abs();
    if a == 0.0 {
        return 1.0;
    }
    if r == 1 {
        return (1.0 - a) * (1.0 + a);
    }
    let log_a = if a > 0.5 { (a - 1.0).ln_1p() } else { a.ln() };
    -(2.0 * log_a / r as f64).exp_m1()
}

fn clamp_unit(y: f64) -> Result<f64> {
    if y.is_nan() {
        return Err(Error::domain("slope field evaluated at NaN"));
    }
    if y.abs() <= 1.0 {
        Ok(y)
    } else if y.abs() <= 1.0 + CLAMP_BAND {
        Ok(y.signum())
    } else {
        Err(Error::domain(format!("|y| = {} exceeds 1", y.abs())))
    }
}

/// The slope field `F` of one family for fixed flow parameters.
#[derive(Clone, Copy, Debug)]
pub struct SlopeField {
    params: FlowParams,
    family: ParallelFamily,
}

impl SlopeField {
    pub fn new(params: FlowParams, kind: FamilyKind) -> Result<Self> {
        let family = ParallelFamily::new(kind, &params)?;
        if kind == FamilyKind::Planar && params.r() > 1 {
            return Err(Error::domain(
                "planar family with r > 1 degenerates into a vertical hyperplane",
            ));
        }
        Ok(SlopeField { params, family })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn family(&self) -> &ParallelFamily {
        &self.family
    }

    /// Checks that `s` lies where the field is defined.
    pub fn check_s(&self, s: f64) -> Result<()> {
        let ok = match self.family.kind() {
            FamilyKind::Rotational => s > 0.0,
            FamilyKind::Hyperbolic => self.params.r() == 1 || s != 0.0,
            FamilyKind::Parabolic | FamilyKind::Planar => true,
        };
        if ok && s.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "s = {s} outside the {} slope-field domain",
                self.family.kind().name()
            )))
        }
    }

    /// `F(s, y)`.
    pub fn eval(&self, s: f64, y: f64) -> Result<f64> {
        self.check_s(s)?;
        let y = clamp_unit(y)?;
        Ok(self.eval_unchecked(s, y))
    }

    /// Weight `C · m^{1−r}` of the square-root term.
    pub(crate) fn root_weight(&self, s: f64) -> f64 {
        let r = self.params.r();
        if r == 1 {
            self.params.c()
        } else {
            self.params.c() * self.family.inv_neg_alpha(s).powi(r as i32 - 1)
        }
    }

    /// Weight `(n − r) · m` of the linear term.
    pub(crate) fn linear_weight(&self, s: f64) -> f64 {
        (self.params.n() - self.params.r()) as f64 * self.family.neg_alpha(s)
    }

    pub(crate) fn eval_unchecked(&self, s: f64, y: f64) -> f64 {
        let y = y.clamp(-1.0, 1.0);
        let root = complement(y, self.params.r()).max(0.0).sqrt();
        self.root_weight(s) * root - self.linear_weight(s) * y
    }

    /// `τ'` expressed through the complement `q = 1 − |τ|^{2/r}` on the sheet
    /// `sign(τ) = sigma`. Accurate when `|τ|` is close to one.
    pub(crate) fn eval_complement(&self, s: f64, sigma: f64, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let r = self.params.r() as f64;
        let abs_tau = (1.0 - q).powf(0.5 * r);
        self.root_weight(s) * q.sqrt() - self.linear_weight(s) * sigma * abs_tau
    }

    /// Slope with which a solution leaves the boundary `y = sigma`.
    pub fn boundary_slope(&self, s: f64, sigma: f64) -> f64 {
        -sigma * self.linear_weight(s)
    }
}

/// Rotational field `C √(1 − y^{2/r}) tan_ε^{r−1}(s) − (n − r) cot_ε(s) y`.
pub fn f_rotational(params: &FlowParams, s: f64, y: f64) -> Result<f64> {
    SlopeField::new(*params, FamilyKind::Rotational)?.eval(s, y)
}

/// Parabolic field `C √(1 − y^{2/r}) − (n − r) y`.
pub fn f_parabolic(params: &FlowParams, y: f64) -> Result<f64> {
    SlopeField::new(*params, FamilyKind::Parabolic)?.eval(0.0, y)
}

/// Hyperbolic field `C √(1 − y^{2/r}) coth^{r−1}(s) − (n − r) tanh(s) y`.
pub fn f_hyperbolic(params: &FlowParams, s: f64, y: f64) -> Result<f64> {
    SlopeField::new(*params, FamilyKind::Hyperbolic)?.eval(s, y)
}

/// `H_r − θ` for a graph on parallels with `ρ`-function value `rho`,
/// derivative `rho_prime`, and leaf curvature `alpha_val`.
pub fn residual_general(params: &FlowParams, alpha_val: f64, rho: f64, rho_prime: f64) -> Result<f64> {
    let rho = clamp_unit(rho)?;
    let theta = ((1.0 - rho) * (1.0 + rho)).sqrt();
    Ok(hr_closed(params, -alpha_val * rho, rho_prime) - theta)
}
