//! Euler–Maruyama integration of the nonlinear collapse equation
//!
//! ```text
//! d|ψ⟩ = [−iωσ_x dt + √γ(σ_z − ⟨σ_z⟩) dW − ½γ(σ_z − ⟨σ_z⟩)² dt] |ψ⟩
//! ```
//!
//! In components (`α = ⟨+|ψ⟩`, `β = ⟨−|ψ⟩`):
//!
//! ```text
//! dα = [−iωβ − 2γα(1−|α|²)²] dt + 2√γ α(1−|α|²) dW
//! dβ = [−iωα − 2γβ(1−|β|²)²] dt − 2√γ β(1−|β|²) dW
//! ```
//!
//! Each trajectory owns a [`NoiseStream`] keyed by `(seed, stream_index)`, so a
//! trajectory is reproducible on its own regardless of how many others run
//! beside it or in which order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{ModelParams, SpinState};

/// Pre-renormalization norms below this abort the step.
pub const DEGENERATE_NORM: f64 = 1e-6;

/// Gaussian Wiener increments for one trajectory.
///
/// Backed by ChaCha8 with the trajectory ordinal as the stream id, giving 2⁶⁴
/// independent streams per seed.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self { seed, stream_index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// One draw from `N(0, dt)`.
    #[inline]
    pub fn gaussian_increment(&mut self, dt: f64) -> f64 {
        self.standard_normal() * dt.sqrt()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Two-phase step schedule: `fine_dt` up to `switch_time`, `coarse_dt` after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub fine_dt: f64,
    pub switch_time: f64,
    pub coarse_dt: f64,
}

impl StepSchedule {
    /// 1e−5 s until 0.1 s, then 1e−4 s.
    pub const fn desk() -> Self {
        Self { fine_dt: 1e-5, switch_time: 0.1, coarse_dt: 1e-4 }
    }

    /// 1e−7 s until 0.1 s, then 1e−3 s. Roughly 100× the fine-phase cost of [`desk`](Self::desk).
    pub const fn paper() -> Self {
        Self { fine_dt: 1e-7, switch_time: 0.1, coarse_dt: 1e-3 }
    }

    /// A single step size throughout.
    pub const fn uniform(dt: f64) -> Self {
        Self { fine_dt: dt, switch_time: 0.0, coarse_dt: dt }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { fine_dt, switch_time, coarse_dt } = *self;
        if !(fine_dt.is_finite() && fine_dt > 0.0) {
            return Err(Error::invalid("schedule.fine_dt", format!("{fine_dt} must be > 0")));
        }
        if !(coarse_dt.is_finite() && coarse_dt >= fine_dt) {
            return Err(Error::invalid("schedule.coarse_dt", format!("{coarse_dt} must be >= fine_dt")));
        }
        if !(switch_time.is_finite() && switch_time >= 0.0) {
            return Err(Error::invalid("schedule.switch_time", format!("{switch_time} must be >= 0")));
        }
        let ratio = switch_time / fine_dt;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::invalid("schedule.switch_time", "must be an integer multiple of fine_dt"));
        }
        Ok(())
    }

    fn fine_steps(&self) -> u64 {
        (self.switch_time / self.fine_dt).round() as u64
    }

    /// Integrator step times after `0`, ending exactly at `horizon`.
    fn step_times(&self, horizon: f64) -> impl Iterator<Item = f64> {
        let Self { fine_dt, switch_time, coarse_dt } = *self;
        let n_fine = self.fine_steps();
        let fine_end = switch_time.min(horizon);
        let n_fine_used = if horizon >= switch_time { n_fine } else { (horizon / fine_dt - 1e-9).ceil() as u64 };
        let rest = (horizon - switch_time).max(0.0);
        let n_coarse = if rest > 0.0 { (rest / coarse_dt - 1e-9).ceil() as u64 } else { 0 };
        let fine = (1..=n_fine_used).map(move |k| if k == n_fine_used { fine_end } else { k as f64 * fine_dt });
        let coarse =
            (1..=n_coarse).map(move |j| if j == n_coarse { horizon } else { switch_time + j as f64 * coarse_dt });
        fine.chain(coarse)
    }

    /// Total number of integrator steps to reach `horizon`.
    pub fn step_count(&self, horizon: f64) -> u64 {
        self.step_times(horizon).count() as u64
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::desk()
    }
}

/// Which integrator states end up in a [`TrajectoryRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    EveryStep,
    /// First step at or after each multiple of the interval (s).
    Interval(f64),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Interval(1e-3)
    }
}

/// Everything about the numerics of one trajectory except the physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub schedule: StepSchedule,
    pub sampling: Sampling,
    /// Rescale to unit norm after each step. Off only for convergence studies.
    pub renormalize: bool,
    /// Flips the sign of the collapse drift. Exists so validation can show
    /// that its checks detect a broken integrator; never set it otherwise.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negative_control: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::desk(),
            sampling: Sampling::default(),
            renormalize: true,
            negative_control: false,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let Sampling::Interval(dt) = self.sampling {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid("sampling.interval", format!("{dt} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Stored samples of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub params: ModelParams,
    pub seed: u64,
    pub stream_index: u64,
    pub sampling: Sampling,
    pub sample_times: Vec<f64>,
    pub samples: Vec<SpinState>,
    /// Largest `|‖ψ‖² − 1|` seen before renormalization.
    pub max_norm_drift: f64,
}

impl TrajectoryRecord {
    /// Record built from externally supplied samples (synthetic data, replays).
    pub fn from_samples(params: ModelParams, sample_times: Vec<f64>, samples: Vec<SpinState>) -> Result<Self> {
        if sample_times.len() != samples.len() || sample_times.is_empty() {
            return Err(Error::invalid("record", "times and samples must be non-empty and equally long"));
        }
        if sample_times[0] != 0.0 || sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("record.sample_times", "must start at 0 and strictly increase"));
        }
        Ok(Self {
            params,
            seed: 0,
            stream_index: 0,
            sampling: Sampling::EveryStep,
            sample_times,
            samples,
            max_norm_drift: 0.0,
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.sample_times.last().expect("records are never empty")
    }

    pub fn populations_plus(&self) -> Vec<f64> {
        self.samples.iter().map(SpinState::pop_plus).collect()
    }

    /// Largest gap between consecutive samples.
    pub fn max_spacing(&self) -> f64 {
        self.sample_times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[inline]
fn increment(
    alpha: Complex64,
    beta: Complex64,
    params: &ModelParams,
    dw: f64,
    dt: f64,
    drift_sign: f64,
) -> (Complex64, Complex64) {
    let ModelParams { omega, gamma } = *params;
    let ra = 1.0 - alpha.norm_sqr();
    let rb = 1.0 - beta.norm_sqr();
    let noise = 2.0 * gamma.sqrt() * dw;
    let collapse = drift_sign * 2.0 * gamma * dt;
    let rot = Complex64::new(0.0, -omega * dt);
    let a = alpha + rot * beta - alpha * (collapse * ra * ra) + alpha * (noise * ra);
    let b = beta + rot * alpha - beta * (collapse * rb * rb) - beta * (noise * rb);
    (a, b)
}

/// One explicit Euler–Maruyama step with increment `dw ~ N(0, dt)`, renormalized.
pub fn euler_step(state: &SpinState, params: &ModelParams, dw: f64, dt: f64) -> Result<SpinState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let (a, b) = increment(state.alpha(), state.beta(), params, dw, dt, 1.0);
    let norm_sqr = a.norm_sqr() + b.norm_sqr();
    if !(norm_sqr.sqrt() >= DEGENERATE_NORM) {
        return Err(Error::DegenerateStep { t: dt, norm: norm_sqr.sqrt() });
    }
    let inv = norm_sqr.sqrt().recip();
    Ok(SpinState::from_normalized(a * inv, b * inv))
}

/// Integrates one trajectory from `t = 0` to `horizon`.
pub fn simulate_trajectory(
    params: &ModelParams,
    init: &SpinState,
    settings: &SimulationSettings,
    horizon: f64,
    stream: &mut NoiseStream,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    settings.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("{horizon} must be > 0")));
    }

    let (interval, every_step) = match settings.sampling {
        Sampling::EveryStep => (0.0, true),
        Sampling::Interval(dt) => (dt, false),
    };
    let capacity = if every_step {
        settings.schedule.step_count(horizon) as usize + 1
    } else {
        (horizon / interval).ceil() as usize + 2
    };
    let mut sample_times = Vec::with_capacity(capacity);
    let mut samples = Vec::with_capacity(capacity);
    sample_times.push(0.0);
    samples.push(*init);

    let drift_sign = if settings.negative_control { -1.0 } else { 1.0 };
    let (mut alpha, mut beta) = (init.alpha(), init.beta());
    let mut max_drift = 0.0f64;
    let mut next_sample = 1u64;
    let mut t_prev = 0.0;

    for t in settings.schedule.step_times(horizon) {
        let dt = t - t_prev;
        let dw = stream.gaussian_increment(dt);
        let (a, b) = increment(alpha, beta, params, dw, dt, drift_sign);
        let norm_sqr = a.norm_sqr() + b.norm_sqr();
        if !(norm_sqr.sqrt() >= DEGENERATE_NORM) {
            return Err(Error::DegenerateStep { t, norm: norm_sqr.sqrt() });
        }
        max_drift = max_drift.max((norm_sqr - 1.0).abs());
        if settings.renormalize {
            let inv = norm_sqr.sqrt().recip();
            alpha = a * inv;
            beta = b * inv;
        } else {
            alpha = a;
            beta = b;
        }
        t_prev = t;

        let due = every_step || t >= next_sample as f64 * interval - 1e-9 * interval;
        if due {
            samples.push(stored(alpha, beta, settings.renormalize)?);
            sample_times.push(t);
            if !every_step {
                next_sample = (t / interval + 1e-9).floor() as u64 + 1;
            }
        }
    }
    if *sample_times.last().unwrap() < horizon {
        samples.push(stored(alpha, beta, settings.renormalize)?);
        sample_times.push(horizon);
    }

    Ok(TrajectoryRecord {
        params: *params,
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        sampling: settings.sampling,
        sample_times,
        samples,
        max_norm_drift: max_drift,
    })
}

#[inline]
fn stored(alpha: Complex64, beta: Complex64, renormalized: bool) -> Result<SpinState> {
    if renormalized {
        Ok(SpinState::from_normalized(alpha, beta))
    } else {
        SpinState::new(alpha, beta)
    }
}
