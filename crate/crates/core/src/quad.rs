//! Adaptive Gauss–Kronrod quadrature with an optional square-root endpoint
//! substitution for integrands that blow up like `(u − a)^{−1/2}`.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;
const MAX_INTERVALS: usize = 1 << 16;

/// Tolerances and endpoint treatment for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Substitute `u = a + t²` at the left endpoint.
    pub sqrt_left: bool,
    /// Substitute `u = b − t²` at the right endpoint.
    pub sqrt_right: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, sqrt_left: false, sqrt_right: false }
    }
}

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: (f64, f64),
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64> {
    let (value, err) = whole;
    if !value.is_finite() {
        return Err(Error::Quadrature { a, b, reason: "non-finite integrand".into() });
    }
    if err <= tol || (err <= 64.0 * f64::EPSILON * value.abs()) {
        return Ok(value);
    }
    let mid = 0.5 * (a + b);
    if depth >= MAX_DEPTH || *budget == 0 || mid <= a || mid >= b {
        return Err(Error::Quadrature {
            a,
            b,
            reason: format!("no convergence (error estimate {err:e})"),
        });
    }
    *budget -= 1;
    let left = kronrod(f, a, mid);
    let right = kronrod(f, mid, b);
    Ok(adapt(f, a, mid, left, 0.5 * tol, depth + 1, budget)? + adapt(f, mid, b, right, 0.5 * tol, depth + 1, budget)?)
}

fn plain(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = kronrod(f, a, b);
    let tol = opts.abs_tol.max(opts.rel_tol * whole.0.abs());
    adapt(f, a, b, whole, tol, 0, &mut { MAX_INTERVALS })
}

/// `∫_a^b f(u) du`; reversed limits flip the sign.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    integrate_dyn(&mut f, a, b, opts)
}

fn integrate_dyn(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    if a > b {
        let flipped = QuadOptions { sqrt_left: opts.sqrt_right, sqrt_right: opts.sqrt_left, ..*opts };
        return Ok(-integrate_dyn(f, b, a, &flipped)?);
    }
    if a == b {
        return Ok(0.0);
    }
    match (opts.sqrt_left, opts.sqrt_right) {
        (false, false) => plain(&mut |u| f(u), a, b, opts),
        (true, true) => {
            let mid = 0.5 * (a + b);
            let left = QuadOptions { sqrt_right: false, ..*opts };
            let right = QuadOptions { sqrt_left: false, ..*opts };
            Ok(integrate_dyn(f, a, mid, &left)? + integrate_dyn(f, mid, b, &right)?)
        }
        (true, false) => {
            let mut g = |t: f64| if t == 0.0 { 0.0 } else { 2.0 * t * f(a + t * t) };
            plain(&mut g, 0.0, (b - a).sqrt(), opts).map_err(|e| relabel(e, a, b))
        }
        (false, true) => {
            let mut g = |t: f64| if t == 0.0 { 0.0 } else { 2.0 * t * f(b - t * t) };
            plain(&mut g, 0.0, (b - a).sqrt(), opts).map_err(|e| relabel(e, a, b))
        }
    }
}

fn relabel(e: Error, a: f64, b: f64) -> Error {
    match e {
        Error::Quadrature { reason, .. } => Error::Quadrature { a, b, reason },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &QuadOptions::default()).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn tangent_integrates_to_log_cos() {
        let v = integrate(f64::tan, 0.0, std::f64::consts::FRAC_PI_3, &QuadOptions::default()).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-13);
    }

    #[test]
    fn inverse_square_root_endpoints() {
        let opts = QuadOptions { sqrt_left: true, ..Default::default() };
        let v = integrate(|u| 1.0 / u.sqrt(), 0.0, 4.0, &opts).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let opts = QuadOptions { sqrt_left: true, sqrt_right: true, ..Default::default() };
        let v = integrate(|u| 1.0 / (1.0 - u * u).sqrt(), -1.0, 1.0, &opts).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_change_sign() {
        let opts = QuadOptions { sqrt_right: true, ..Default::default() };
        let fwd = integrate(|u| 1.0 / (1.0 - u).sqrt(), 0.0, 1.0, &opts).unwrap();
        let opts = QuadOptions { sqrt_left: true, ..Default::default() };
        let back = integrate(|u| 1.0 / (1.0 - u).sqrt(), 1.0, 0.0, &opts).unwrap();
        assert!((fwd - 2.0).abs() < 1e-12 && (fwd + back).abs() < 1e-14);
    }

    #[test]
    fn non_integrable_singularity_is_reported() {
        let opts = QuadOptions { sqrt_left: true, ..Default::default() };
        let err = integrate(|u| 1.0 / u, 0.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
