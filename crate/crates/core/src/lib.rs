//! Numerical construction and verification of translating solitons to the
//! r-th mean curvature flow in `R^n × R` and `H^n × R`.
//!
//! The crate reduces each symmetric family (rotational, parabolic,
//! hyperbolic, planar) to a scalar Cauchy problem for `τ = ρ^r`, integrates
//! it, rebuilds the height and curvatures of the resulting graph, and checks
//! the qualitative claims about those solutions as executable properties.

pub mod error;
pub mod flowsim;
pub mod io;
pub mod ivp;
pub mod limits;
pub mod model;
pub mod profile;
pub mod quad;
pub mod roots;
pub mod slopefield;
pub mod translators;
pub mod verify;

pub use error::{Error, Result};
pub use ivp::{StepControl, Trajectory};
pub use limits::{solve_l, LimitReport};
pub use model::{FamilyKind, FlowParams, ParallelFamily, SpaceForm};
pub use profile::Profile;
pub use slopefield::SlopeField;
pub use translators::{Translator, TranslatorSpec};

/// Thread pool size for parameter sweeps, honouring `TRANSLATOR_LAB_THREADS`.
pub fn sweep_threads() -> usize {
    std::env::var("TRANSLATOR_LAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a rayon pool capped by [`sweep_threads`].
pub fn with_sweep_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(sweep_threads()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
