//! Monte Carlo ensembles of trajectories and the statistics drawn from them.
//!
//! Trajectory `i` of an ensemble always uses noise stream `(master_seed, i)`.
//! Work is cut into fixed chunks of [`CHUNK`] consecutive trajectories, each
//! chunk is reduced sequentially, and chunk results are merged in index order,
//! so every output is bit-identical whatever the worker count.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::analytic::solve_density;
use crate::detect::{
    detect_delocalization, detect_reduction, DelocalizationEvent, DetectorConfig, Eigenstate, ReductionEvent,
};
use crate::error::{Error, Result};
use crate::par::*;
use crate::sde::{simulate_trajectory, NoiseStream, Sampling, SimulationSettings, TrajectoryRecord};
use crate::spin::{coherence, to_density_params, ModelParams, SpinState};

/// Trajectories per work item.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: ModelParams,
    pub init: SpinState,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub settings: SimulationSettings,
    pub horizon: f64,
    pub detector: DetectorConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            params: ModelParams { omega: 1.0, gamma: 100.0 },
            init: SpinState::reference_initial(),
            n_trajectories: 10_000,
            master_seed: 2004,
            settings: SimulationSettings::default(),
            horizon: std::f64::consts::TAU,
            detector: DetectorConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.settings.validate()?;
        self.detector.validate()?;
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories", "must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.detector.tau) {
            return Err(Error::invalid("horizon", format!("{} must be >= detector.tau", self.horizon)));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.params.gamma = gamma;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_trajectories = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}

/// How an ensemble is scheduled. Never affects results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool. Sequential when built without the `parallel` feature.
    #[default]
    Parallel,
    /// A dedicated pool with this many workers.
    ParallelWith(usize),
}

/// First-reduction outcome of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub index: usize,
    pub reduction: Option<ReductionEvent>,
    pub delocalization: Option<DelocalizationEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_total: usize,
    pub n_reduced_plus: usize,
    pub n_reduced_minus: usize,
    pub n_reduced_total: usize,
    /// Mean reduction time over reduced trajectories only.
    pub mean_t_r: Option<f64>,
    /// Per-trajectory standard deviation (n − 1) of the reduction time.
    pub std_t_r: Option<f64>,
    pub n_delocalized: usize,
    pub reduced_fraction: f64,
    /// Delocalized trajectories as a fraction of reduced ones.
    pub delocalized_fraction: Option<f64>,
    pub prob_plus_given_reduced: Option<f64>,
    pub prob_minus_given_reduced: Option<f64>,
}

impl EnsembleStats {
    /// Aggregates outcomes in the order given.
    pub fn from_outcomes(outcomes: &[TrajectoryOutcome]) -> Self {
        let n_total = outcomes.len();
        let reduced: Vec<&ReductionEvent> = outcomes.iter().filter_map(|o| o.reduction.as_ref()).collect();
        let n_reduced_total = reduced.len();
        let n_reduced_plus = reduced.iter().filter(|r| r.eigenstate == Eigenstate::Plus).count();
        let n_reduced_minus = n_reduced_total - n_reduced_plus;
        let n_delocalized = outcomes.iter().filter(|o| o.delocalization.is_some()).count();

        let (mean_t_r, std_t_r) = match n_reduced_total {
            0 => (None, None),
            n => {
                let mean = reduced.iter().map(|r| r.t_r).sum::<f64>() / n as f64;
                let std = (n > 1).then(|| {
                    let ss = reduced.iter().map(|r| (r.t_r - mean).powi(2)).sum::<f64>();
                    (ss / (n - 1) as f64).sqrt()
                });
                (Some(mean), std)
            }
        };
        let of_reduced = |k: usize| (n_reduced_total > 0).then(|| k as f64 / n_reduced_total as f64);

        Self {
            n_total,
            n_reduced_plus,
            n_reduced_minus,
            n_reduced_total,
            mean_t_r,
            std_t_r,
            n_delocalized,
            reduced_fraction: n_reduced_total as f64 / n_total.max(1) as f64,
            delocalized_fraction: of_reduced(n_delocalized),
            prob_plus_given_reduced: of_reduced(n_reduced_plus),
            prob_minus_given_reduced: of_reduced(n_reduced_minus),
        }
    }

    /// Binomial standard error of `prob_plus_given_reduced`.
    pub fn prob_plus_standard_error(&self) -> Option<f64> {
        let p = self.prob_plus_given_reduced?;
        Some((p * (1.0 - p) / self.n_reduced_total as f64).sqrt())
    }

    /// Binomial standard error of `reduced_fraction`.
    pub fn reduced_fraction_standard_error(&self) -> f64 {
        let p = self.reduced_fraction;
        (p * (1.0 - p) / self.n_total.max(1) as f64).sqrt()
    }
}

/// Ensemble means over the shared sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub sample_times: Vec<f64>,
    /// Mean of `|⟨+|ψ⟩|²`.
    pub mean_pop_plus: Vec<f64>,
    pub coherence: CoherenceSeries,
}

/// Ensemble means of `⟨+|ψ⟩⟨ψ|−⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSeries {
    pub sample_times: Vec<f64>,
    pub mean_re: Vec<f64>,
    pub mean_im: Vec<f64>,
    pub mean_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub outcomes: Vec<TrajectoryOutcome>,
    pub series: EnsembleSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub seed: u64,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleResult {
    pub mean_pop: f64,
    pub standard_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergence {
    /// `max_t |E[|α_t|²] − x(t)|` over the sample grid.
    pub deviation: f64,
    pub worst_time: f64,
    pub sample_times: Vec<f64>,
    pub mean_pop_plus: Vec<f64>,
    pub analytic_x: Vec<f64>,
}

/// Stable sub-seed for entry `index` of a parameter sweep (SplitMix64 finalizer
/// applied to `master_seed + (index + 1)·φ`).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sums over the sample grid, merged chunk by chunk.
#[derive(Debug, Clone, Default)]
struct SeriesSums {
    n: usize,
    times: Vec<f64>,
    pop: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    abs: Vec<f64>,
}

impl SeriesSums {
    fn add(&mut self, record: &TrajectoryRecord) {
        if self.n == 0 {
            let len = record.samples.len();
            self.times = record.sample_times.clone();
            self.pop = vec![0.0; len];
            self.re = vec![0.0; len];
            self.im = vec![0.0; len];
            self.abs = vec![0.0; len];
        }
        debug_assert_eq!(self.times.len(), record.samples.len());
        for (k, s) in record.samples.iter().enumerate() {
            let c = coherence(s);
            self.pop[k] += s.pop_plus();
            self.re[k] += c.re;
            self.im[k] += c.im;
            self.abs[k] += c.norm();
        }
        self.n += 1;
    }

    fn merge(&mut self, other: SeriesSums) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other;
            return;
        }
        for (a, b) in [(&mut self.pop, &other.pop), (&mut self.re, &other.re), (&mut self.im, &other.im), (&mut self.abs, &other.abs)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.n += other.n;
    }

    fn into_series(self) -> EnsembleSeries {
        let n = self.n.max(1) as f64;
        let mean = |v: Vec<f64>| v.into_iter().map(|x| x / n).collect::<Vec<_>>();
        EnsembleSeries {
            sample_times: self.times.clone(),
            mean_pop_plus: mean(self.pop),
            coherence: CoherenceSeries {
                sample_times: self.times,
                mean_re: mean(self.re),
                mean_im: mean(self.im),
                mean_abs: mean(self.abs),
            },
        }
    }
}

/// Runs ensembles under a chosen [`Execution`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Runner {
    pub execution: Execution,
}

impl Runner {
    pub fn new(execution: Execution) -> Self {
        Self { execution }
    }

    /// Applies `work` to every chunk of `0..n` and returns results in chunk order.
    fn map_chunks<T, F>(&self, n: usize, work: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<usize>) -> Result<T> + Sync + Send,
    {
        let chunks: Vec<Range<usize>> = (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
        match self.execution {
            Execution::Sequential => chunks.into_iter().map(work).collect(),
            Execution::Parallel => chunks.into_par_iter().map(work).collect(),
            Execution::ParallelWith(workers) => with_pool(workers, || chunks.into_par_iter().map(&work).collect()),
        }
    }

    /// Simulates every trajectory, detects its first reduction and the
    /// delocalization that follows, and accumulates series means.
    pub fn run_ensemble_with_series(&self, config: &EnsembleConfig) -> Result<EnsembleRun> {
        config.validate()?;
        let parts = self.map_chunks(config.n_trajectories, |range| {
            let mut outcomes = Vec::with_capacity(range.len());
            let mut sums = SeriesSums::default();
            for index in range {
                let (outcome, record) = run_one(config, index).map_err(|e| Error::Trajectory { index, source: Box::new(e) })?;
                sums.add(&record);
                outcomes.push(outcome);
            }
            Ok((outcomes, sums))
        })?;

        let mut outcomes = Vec::with_capacity(config.n_trajectories);
        let mut sums = SeriesSums::default();
        for (o, s) in parts {
            outcomes.extend(o);
            sums.merge(s);
        }
        Ok(EnsembleRun { stats: EnsembleStats::from_outcomes(&outcomes), outcomes, series: sums.into_series() })
    }

    pub fn run_ensemble(&self, config: &EnsembleConfig) -> Result<(EnsembleStats, Vec<TrajectoryOutcome>)> {
        let run = self.run_ensemble_with_series(config)?;
        Ok((run.stats, run.outcomes))
    }

    /// One ensemble per `γ`, seeded with [`derive_seed`]`(master_seed, k)`.
    pub fn reduction_time_curve(&self, base: &EnsembleConfig, gammas: &[f64]) -> Result<Vec<CurvePoint>> {
        gammas
            .iter()
            .enumerate()
            .map(|(k, &gamma)| {
                let seed = derive_seed(base.master_seed, k as u64);
                let (stats, _) = self.run_ensemble(&base.with_gamma(gamma).with_seed(seed))?;
                Ok(CurvePoint { gamma, seed, stats })
            })
            .collect()
    }

    pub fn coherence_statistics(&self, config: &EnsembleConfig) -> Result<CoherenceSeries> {
        Ok(self.run_ensemble_with_series(config)?.series.coherence)
    }

    /// Mean and standard error of `|α|²` at `t_end` with the Hamiltonian off,
    /// where `|α_t|²` is a martingale.
    pub fn martingale_check(
        &self,
        gamma: f64,
        init: &SpinState,
        n: usize,
        t_end: f64,
        seed: u64,
        settings: &SimulationSettings,
    ) -> Result<MartingaleResult> {
        let params = ModelParams::new(0.0, gamma)?;
        if n < 2 {
            return Err(Error::invalid("n", "martingale check needs at least 2 trajectories"));
        }
        let settings = SimulationSettings { sampling: Sampling::Interval(t_end), ..*settings };
        let finals: Vec<Vec<f64>> = self.map_chunks(n, |range| {
            range
                .map(|index| {
                    let mut stream = NoiseStream::new(seed, index as u64);
                    simulate_trajectory(&params, init, &settings, t_end, &mut stream)
                        .map(|rec| rec.samples.last().unwrap().pop_plus())
                        .map_err(|e| Error::Trajectory { index, source: Box::new(e) })
                })
                .collect()
        })?;
        let pops: Vec<f64> = finals.into_iter().flatten().collect();
        let mean = pops.iter().sum::<f64>() / n as f64;
        let var = pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(MartingaleResult { mean_pop: mean, standard_error: (var / n as f64).sqrt(), n })
    }

    /// Sup-norm gap between the ensemble mean of `|α_t|²` and the analytic `x(t)`.
    pub fn weak_convergence_check(&self, config: &EnsembleConfig) -> Result<WeakConvergence> {
        let run = self.run_ensemble_with_series(config)?;
        weak_convergence_from_series(config, &run.series)
    }
}

/// Compares an already-computed series with the closed-form density matrix.
pub fn weak_convergence_from_series(config: &EnsembleConfig, series: &EnsembleSeries) -> Result<WeakConvergence> {
    let init = to_density_params(&config.init);
    let analytic_x = series
        .sample_times
        .iter()
        .map(|&t| solve_density(&config.params, &init, t).map(|p| p.x))
        .collect::<Result<Vec<_>>>()?;
    let (worst, deviation) = series
        .mean_pop_plus
        .iter()
        .zip(&analytic_x)
        .map(|(m, x)| (m - x).abs())
        .enumerate()
        .fold((0, 0.0f64), |acc, (k, d)| if d > acc.1 { (k, d) } else { acc });
    Ok(WeakConvergence {
        deviation,
        worst_time: series.sample_times[worst],
        sample_times: series.sample_times.clone(),
        mean_pop_plus: series.mean_pop_plus.clone(),
        analytic_x,
    })
}

fn run_one(config: &EnsembleConfig, index: usize) -> Result<(TrajectoryOutcome, TrajectoryRecord)> {
    let mut stream = NoiseStream::new(config.master_seed, index as u64);
    let record = simulate_trajectory(&config.params, &config.init, &config.settings, config.horizon, &mut stream)?;
    let reduction = detect_reduction(&record, &config.detector, 0.0)?;
    let delocalization = match &reduction {
        Some(r) => detect_delocalization(&record, r, &config.detector)?,
        None => None,
    };
    Ok((TrajectoryOutcome { index, reduction, delocalization }, record))
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?
        .install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_pool<R: Send>(_workers: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    f()
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<(EnsembleStats, Vec<TrajectoryOutcome>)> {
    Runner::default().run_ensemble(config)
}

pub fn reduction_time_curve(base: &EnsembleConfig, gammas: &[f64]) -> Result<Vec<CurvePoint>> {
    Runner::default().reduction_time_curve(base, gammas)
}

pub fn coherence_statistics(config: &EnsembleConfig) -> Result<CoherenceSeries> {
    Runner::default().coherence_statistics(config)
}

pub fn martingale_check(gamma: f64, init: &SpinState, n: usize, t_end: f64, seed: u64) -> Result<MartingaleResult> {
    Runner::default().martingale_check(gamma, init, n, t_end, seed, &SimulationSettings::default())
}

pub fn weak_convergence_check(config: &EnsembleConfig) -> Result<WeakConvergence> {
    Runner::default().weak_convergence_check(config)
}
