//! Quantum-trajectory Monte Carlo for a spin-½ driven by `H = ωσ_x` and a
//! nonlinear stochastic collapse term coupling `σ_z` to a Wiener process with
//! strength `γ`.
//!
//! * [`spin`]: states, parameters and observables.
//! * [`analytic`]: closed-form ensemble density matrix and an RK4 cross-check.
//! * [`sde`]: Euler–Maruyama trajectories with per-trajectory noise streams.
//! * [`detect`]: reduction / delocalization events on sampled trajectories.
//! * [`ensemble`]: parallel ensembles and the statistics built from them.
//!
//! Ensembles run on rayon when the default `parallel` feature is enabled and
//! sequentially otherwise; results are bit-identical either way.

pub mod analytic;
pub mod detect;
pub mod ensemble;
pub mod error;
mod par;
pub mod sde;
pub mod spin;

pub use error::{Error, Result};
pub use num_complex::Complex64;
