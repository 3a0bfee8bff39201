//! Direct simulation of the `H_r`-flow for graphs over a family of parallels.
//!
//! A graph moving with normal speed `H_r` has vertical speed `H_r/θ`. With
//! `p = φ'`, `ρ = p/√(1+p²)` and `θ = 1/√(1+p²)` this is
//!
//! ```text
//! φ_u = √(1+p²) · (w_t (mρ)^r + w_m (mρ)^{r−1} ρ'),   m = −α(s).
//! ```
//!
//! `ρ'` is discretized compactly through `ρ` at half nodes, which keeps the
//! stencil three points wide. Time stepping is linearly implicit
//! (`(I − du J) Δφ = du V`) with the tridiagonal diffusion part `J`; since `J`
//! annihilates constants, a rigid vertical translation is reproduced exactly.

use crate::error::{Error, Result};
use crate::model::{FlowParams, ParallelFamily};
use crate::translators::Translator;

/// Below this angle the vertical speed is considered unbounded.
pub const MIN_THETA: f64 = 1e-6;

/// Heights on a uniform grid at flow time `time`.
#[derive(Clone, Debug)]
pub struct GraphState {
    pub params: FlowParams,
    pub family: ParallelFamily,
    pub s_a: f64,
    pub h: f64,
    pub phi: Vec<f64>,
    pub time: f64,
    /// `−α` at the nodes.
    m: Vec<f64>,
}

impl GraphState {
    pub fn new(params: FlowParams, family: ParallelFamily, s_a: f64, h: f64, phi: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || phi.len() < 5 {
            return Err(Error::domain(format!("need h > 0 and at least 5 nodes (h = {h}, {} nodes)", phi.len())));
        }
        let s_b = s_a + h * (phi.len() - 1) as f64;
        if !family.contains(s_a) || !family.contains(s_b) {
            return Err(Error::domain(format!("grid [{s_a}, {s_b}] leaves the family domain")));
        }
        let m = (0..phi.len()).map(|i| family.alpha(s_a + h * i as f64).map(|a| -a)).collect::<Result<Vec<_>>>()?;
        Ok(GraphState { params, family, s_a, h, phi, time: 0.0, m })
    }

    /// Samples `phi(s)` on `[s_a, s_b]` with spacing close to `h`.
    pub fn sample(
        params: FlowParams,
        family: ParallelFamily,
        s_a: f64,
        s_b: f64,
        h: f64,
        phi: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        if !(s_b > s_a) {
            return Err(Error::domain(format!("empty interval [{s_a}, {s_b}]")));
        }
        let cells = ((s_b - s_a) / h).round().max(4.0) as usize;
        let h = (s_b - s_a) / cells as f64;
        let values = (0..=cells).map(|i| phi(s_a + h * i as f64)).collect::<Result<Vec<_>>>()?;
        GraphState::new(params, family, s_a, h, values)
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_a + self.h * i as f64
    }

    /// Vertical speed `H_r/θ` at every interior node.
    pub fn vertical_speeds(&self) -> Result<Vec<f64>> {
        let mut work = Work::new(self.phi.len());
        self.operator(&mut work)?;
        Ok(work.speed)
    }

    /// Fills the interior speeds and the three diagonals of `J`.
    fn operator(&self, w: &mut Work) -> Result<()> {
        let n = self.phi.len();
        let h = self.h;
        let r = self.params.r() as i32;
        let (wt, wm) = (self.params.tangential_weight(), self.params.mixed_weight());
        // half-node slopes, their ρ and (1 + p²)^{−3/2}
        for i in 0..n - 1 {
            let p = (self.phi[i + 1] - self.phi[i]) / h;
            let g2 = 1.0 + p * p;
            let g = g2.sqrt();
            w.rho_h[i] = p / g;
            w.weight_h[i] = 1.0 / (g2 * g);
        }
        for i in 1..n - 1 {
            let p = (self.phi[i + 1] - self.phi[i - 1]) / (2.0 * h);
            let g = (1.0 + p * p).sqrt();
            if g > 1.0 / MIN_THETA {
                return Err(Error::Stability(format!("theta = {:e} at s = {}", 1.0 / g, self.s(i))));
            }
            let a = self.m[i] * p / g;
            let a_rm1 = a.powi(r - 1);
            let drho = (w.rho_h[i] - w.rho_h[i - 1]) / h;
            w.speed[i - 1] = g * (wt * a_rm1 * a + wm * a_rm1 * drho);
            let k = g * wm * a_rm1 / (h * h);
            let left = k * w.weight_h[i - 1];
            let right = k * w.weight_h[i];
            w.lower[i - 1] = left;
            w.upper[i - 1] = right;
            w.diag[i - 1] = -(left + right);
        }
        Ok(())
    }

    /// Advances by `du`. Boundary nodes keep the slope of the adjacent cell.
    pub fn step(&self, du: f64) -> Result<GraphState> {
        let mut next = self.clone();
        next.advance(du, &mut Work::new(self.phi.len()))?;
        Ok(next)
    }

    fn advance(&mut self, du: f64, w: &mut Work) -> Result<()> {
        if !(du > 0.0 && du.is_finite()) {
            return Err(Error::domain(format!("time step {du} must be positive")));
        }
        self.operator(w)?;
        let m = w.speed.len();
        for i in 0..m {
            w.rhs[i] = du * w.speed[i];
            w.lower[i] *= -du;
            w.upper[i] *= -du;
            w.diag[i] = 1.0 - du * w.diag[i];
        }
        // Δφ_0 = Δφ_1 and Δφ_N = Δφ_{N−1}
        w.diag[0] += w.lower[0];
        w.diag[m - 1] += w.upper[m - 1];
        w.lower[0] = 0.0;
        w.upper[m - 1] = 0.0;
        solve_tridiagonal(&w.lower, &w.diag, &w.upper, &mut w.rhs, &mut w.scratch)?;
        for (i, d) in w.rhs.iter().enumerate() {
            self.phi[i + 1] += d;
        }
        self.phi[0] += w.rhs[0];
        let last = self.phi.len() - 1;
        self.phi[last] += w.rhs[m - 1];
        self.time += du;
        Ok(())
    }

    /// Largest `|φ_now − φ_initial − shift|` over the interior two thirds.
    pub fn drift_from(&self, initial: &GraphState, shift: f64) -> f64 {
        let n = self.phi.len();
        let (lo, hi) = (n / 6, n - 1 - n / 6);
        (lo..=hi)
            .map(|i| (self.phi[i] - initial.phi[i] - shift).abs())
            .fold(0.0, f64::max)
    }
}

/// Scratch buffers reused across steps.
struct Work {
    rho_h: Vec<f64>,
    weight_h: Vec<f64>,
    speed: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Work {
    fn new(nodes: usize) -> Self {
        let m = nodes - 2;
        Work {
            rho_h: vec![0.0; nodes - 1],
            weight_h: vec![0.0; nodes - 1],
            speed: vec![0.0; m],
            lower: vec![0.0; m],
            diag: vec![0.0; m],
            upper: vec![0.0; m],
            rhs: vec![0.0; m],
            scratch: vec![0.0; m],
        }
    }
}

/// Thomas algorithm; `d` is overwritten with the solution.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], cp: &mut [f64]) -> Result<()> {
    let n = b.len();
    for i in 0..n {
        let (pivot, carry) = if i > 0 { (b[i] - a[i] * cp[i - 1], a[i] * d[i - 1]) } else { (b[0], 0.0) };
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(Error::Stability(format!("singular implicit system at row {i}")));
        }
        cp[i] = c[i] / pivot;
        d[i] = (d[i] - carry) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
    Ok(())
}

/// Grid and interval used to sample a translator sheet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftSetup {
    pub branch: usize,
    pub s_a: f64,
    pub s_b: f64,
    pub h: f64,
}

impl DriftSetup {
    /// A window of length at most 10 where the first sheet has `θ ≥ 0.05` and
    /// keeps away from singular marks.
    pub fn automatic(translator: &Translator, h: f64) -> Result<DriftSetup> {
        let b = translator
            .branches
            .first()
            .ok_or_else(|| Error::domain("translator has no graph sheet (vertical hyperplanes are stationary)"))?;
        let prof = &b.profile;
        let good = |s: f64, theta: f64| theta >= 0.05 && s > prof.family().domain().0 && !prof.near_mark(s, 0.05);
        let mut best = (0.0, 0.0);
        let mut run: Option<f64> = None;
        for smp in prof.samples() {
            if good(smp.s, smp.theta) {
                let start = *run.get_or_insert(smp.s);
                if smp.s - start > best.1 - best.0 {
                    best = (start, smp.s);
                }
            } else {
                run = None;
            }
        }
        let (a, b_end) = best;
        if b_end - a < 20.0 * h {
            return Err(Error::domain("no graphical window with theta >= 0.05 away from singular marks"));
        }
        Ok(DriftSetup { branch: 0, s_a: a, s_b: b_end.min(a + 10.0), h })
    }
}

/// Evolves a sheet for `u_total` in `steps` equal steps and returns the
/// sup-norm deviation from the rigid translation `φ + u_total`.
pub fn soliton_drift_on(translator: &Translator, setup: &DriftSetup, u_total: f64, steps: usize) -> Result<f64> {
    if translator.degenerate {
        return Err(Error::domain("vertical hyperplanes are stationary; nothing to simulate"));
    }
    let b = translator
        .branches
        .get(setup.branch)
        .ok_or_else(|| Error::domain(format!("no branch {}", setup.branch)))?;
    let prof = &b.profile;
    let state = GraphState::sample(*prof.params(), *prof.family(), setup.s_a, setup.s_b, setup.h, |s| prof.phi_at(s))?;
    evolve_drift(&state, u_total, steps, u_total)
}

/// [`soliton_drift_on`] over [`DriftSetup::automatic`] with `h = 1e−3`.
pub fn soliton_drift(translator: &Translator, u_total: f64, steps: usize) -> Result<f64> {
    let setup = DriftSetup::automatic(translator, 1e-3)?;
    soliton_drift_on(translator, &setup, u_total, steps)
}

/// Runs `steps` steps of length `u_total/steps` from `initial` and measures the
/// drift against a rigid shift by `shift`.
pub fn evolve_drift(initial: &GraphState, u_total: f64, steps: usize, shift: f64) -> Result<f64> {
    if steps == 0 {
        return Err(Error::domain("need at least one step"));
    }
    let du = u_total / steps as f64;
    let mut state = initial.clone();
    let mut work = Work::new(state.phi.len());
    for _ in 0..steps {
        state.advance(du, &mut work)?;
    }
    Ok(state.drift_from(initial, shift))
}

/// Drift at `(h, du)` and at `(h/2, du/4)`, run concurrently.
pub fn drift_refinement(translator: &Translator, setup: &DriftSetup, u_total: f64, steps: usize) -> Result<(f64, f64)> {
    let fine = DriftSetup { h: setup.h / 2.0, ..*setup };
    let (coarse, fine) = rayon::join(
        || soliton_drift_on(translator, setup, u_total, steps),
        || soliton_drift_on(translator, &fine, u_total, steps * 4),
    );
    Ok((coarse?, fine?))
}
