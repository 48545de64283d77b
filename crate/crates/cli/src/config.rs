//! TOML run configuration.
//!
//! A config file is parsed into [`FileConfig`] (every field optional, unknown
//! keys rejected), then merged with command-line [`Overrides`] and defaults
//! into a [`RunConfig`]. The resolved config serializes back into the same
//! file format, so any embedded copy can be fed to `--config` to replay a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spin_collapse::detect::DetectorConfig;
use spin_collapse::ensemble::EnsembleConfig;
use spin_collapse::sde::{Sampling, SimulationSettings, StepSchedule};
use spin_collapse::spin::{ModelParams, SpinState};
use spin_collapse::Complex64;

use crate::error::{CliError, CliResult};

pub const DEFAULT_GAMMAS: [f64; 7] = [5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0];
pub const PAPER_N: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Trajectory,
    Ensemble,
    Sweep,
    Validate,
    Analytic,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Trajectory => "trajectory",
            Experiment::Ensemble => "ensemble",
            Experiment::Sweep => "sweep",
            Experiment::Validate => "validate",
            Experiment::Analytic => "analytic",
        }
    }
}

/// Named step schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 1e-5 s until 0.1 s, then 1e-4 s.
    #[default]
    Desk,
    /// 1e-7 s until 0.1 s, then 1e-3 s, with 100000 trajectories.
    Paper,
}

impl Preset {
    pub fn schedule(self) -> StepSchedule {
        match self {
            Preset::Desk => StepSchedule::desk(),
            Preset::Paper => StepSchedule::paper(),
        }
    }

    pub fn n_trajectories(self) -> usize {
        match self {
            Preset::Desk => EnsembleConfig::default().n_trajectories,
            Preset::Paper => PAPER_N,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// Amplitudes as `[re, im]`; normalized on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub every_step: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_x0_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_constituents: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub martingale_t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_control: Option<bool>,
}

/// Command-line flags. Each one beats the matching config-file key.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct Overrides {
    /// Collapse rate γ (1/s).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Rabi frequency ω (1/s).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Number of trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated time span (s).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step-schedule preset.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Worker threads. Never changes results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticOptions {
    pub dt: f64,
    pub mass_g: Option<f64>,
    pub delta_x0_cm: Option<f64>,
    pub n_constituents: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOptions {
    pub gammas: Vec<f64>,
    pub martingale_t_end: f64,
    pub weak_tolerance: f64,
    pub oracle_tolerance: f64,
    pub negative_control: bool,
}

/// A fully resolved and validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub ensemble: EnsembleConfig,
    pub workers: Option<usize>,
    pub sweep_gammas: Vec<f64>,
    pub output: OutputOptions,
    pub analytic: AnalyticOptions,
    pub validate: ValidateOptions,
}

fn config_error(path: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {reason}"))
}

/// Parses a TOML document. Errors name the offending key path.
pub fn parse_config(text: &str) -> CliResult<FileConfig> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim_end().to_string()))?;
    serde_path_to_error::deserialize(toml::Value::Table(value)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string().trim_end().to_string())
        } else {
            config_error(&path, inner.to_string().trim_end())
        }
    })
}

pub fn load_config(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn positive(path: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_error(path, format!("{v} must be a finite number > 0")))
    }
}

fn non_negative(path: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(config_error(path, format!("{v} must be a finite number >= 0")))
    }
}

fn amplitude(path: &str, v: [f64; 2]) -> CliResult<Complex64> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Complex64::new(v[0], v[1]))
    } else {
        Err(config_error(path, "components must be finite"))
    }
}

fn gamma_list(path: &str, gammas: Vec<f64>) -> CliResult<Vec<f64>> {
    if gammas.is_empty() {
        return Err(config_error(path, "must list at least one value"));
    }
    for (k, &g) in gammas.iter().enumerate() {
        non_negative(&format!("{path}[{k}]"), g)?;
    }
    Ok(gammas)
}

impl RunConfig {
    /// Applies defaults, then the file, then `overrides`, and validates the result.
    pub fn resolve(experiment: Experiment, file: FileConfig, overrides: &Overrides) -> CliResult<Self> {
        if let Some(declared) = file.experiment {
            if declared != experiment {
                return Err(config_error(
                    "experiment",
                    format!("file is for `{}` but the command is `{}`", declared.as_str(), experiment.as_str()),
                ));
            }
        }
        let defaults = EnsembleConfig::default();

        let omega = non_negative("model.omega", overrides.omega.or(file.model.omega).unwrap_or(defaults.params.omega))?;
        let gamma = non_negative("model.gamma", overrides.gamma.or(file.model.gamma).unwrap_or(defaults.params.gamma))?;

        let init = match (file.initial.alpha, file.initial.beta) {
            (None, None) => defaults.init,
            (Some(a), Some(b)) => {
                let alpha = amplitude("initial.alpha", a)?;
                let beta = amplitude("initial.beta", b)?;
                SpinState::new(alpha, beta).map_err(|e| config_error("initial", e))?
            }
            (Some(_), None) => return Err(config_error("initial.beta", "required when initial.alpha is set")),
            (None, Some(_)) => return Err(config_error("initial.alpha", "required when initial.beta is set")),
        };

        let preset = overrides.preset.or(file.schedule.preset).unwrap_or_default();
        let base = preset.schedule();
        let schedule = StepSchedule {
            fine_dt: positive("schedule.fine_dt", file.schedule.fine_dt.unwrap_or(base.fine_dt))?,
            switch_time: non_negative("schedule.switch_time", file.schedule.switch_time.unwrap_or(base.switch_time))?,
            coarse_dt: positive("schedule.coarse_dt", file.schedule.coarse_dt.unwrap_or(base.coarse_dt))?,
        };
        schedule.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let horizon = positive("schedule.horizon", overrides.horizon.or(file.schedule.horizon).unwrap_or(defaults.horizon))?;
        let sampling = match (file.schedule.every_step.unwrap_or(false), file.schedule.sample_interval) {
            (true, Some(_)) => {
                return Err(config_error("schedule.sample_interval", "conflicts with schedule.every_step = true"))
            }
            (true, None) => Sampling::EveryStep,
            (false, interval) => {
                let default = match Sampling::default() {
                    Sampling::Interval(dt) => dt,
                    Sampling::EveryStep => unreachable!("default sampling is an interval"),
                };
                Sampling::Interval(positive("schedule.sample_interval", interval.unwrap_or(default))?)
            }
        };

        let epsilon = file.detector.epsilon.unwrap_or(DetectorConfig::DEFAULT_EPSILON);
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(config_error("detector.epsilon", format!("{epsilon} must lie in (0, 0.5)")));
        }
        let tau = positive("detector.tau", file.detector.tau.unwrap_or(DetectorConfig::rabi_scaled_tau(epsilon)))?;
        if horizon < tau {
            return Err(config_error("schedule.horizon", format!("{horizon} is shorter than detector.tau = {tau}")));
        }

        let n = overrides.n.or(file.ensemble.n).unwrap_or(preset.n_trajectories());
        if n == 0 {
            return Err(config_error("ensemble.n", "must be >= 1"));
        }
        let workers = overrides.workers.or(file.ensemble.workers);
        if workers == Some(0) {
            return Err(config_error("ensemble.workers", "must be >= 1"));
        }

        let negative_control = file.validate.negative_control.unwrap_or(false);
        let ensemble = EnsembleConfig {
            params: ModelParams { omega, gamma },
            init,
            n_trajectories: n,
            master_seed: overrides.seed.or(file.ensemble.seed).unwrap_or(defaults.master_seed),
            settings: SimulationSettings { schedule, sampling, renormalize: true, negative_control },
            horizon,
            detector: DetectorConfig { epsilon, tau },
        };
        ensemble.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let output = OutputOptions {
            dir: overrides.out.clone().or(file.output.dir).unwrap_or_else(|| PathBuf::from("out")),
            csv: file.output.csv.unwrap_or(true),
            json: file.output.json.unwrap_or(true),
            svg: file.output.svg.unwrap_or(true),
        };

        let analytic = AnalyticOptions {
            dt: positive("analytic.dt", file.analytic.dt.unwrap_or(1e-3))?,
            mass_g: file.analytic.mass_g.map(|m| positive("analytic.mass_g", m)).transpose()?,
            delta_x0_cm: file.analytic.delta_x0_cm.map(|d| positive("analytic.delta_x0_cm", d)).transpose()?,
            n_constituents: file.analytic.n_constituents.map(|n| positive("analytic.n_constituents", n)).transpose()?,
        };
        if analytic.mass_g.is_some() != analytic.delta_x0_cm.is_some() {
            return Err(config_error("analytic", "mass_g and delta_x0_cm must be given together"));
        }

        let validate = ValidateOptions {
            gammas: gamma_list("validate.gammas", file.validate.gammas.unwrap_or_else(|| vec![5.0, 100.0]))?,
            martingale_t_end: positive("validate.martingale_t_end", file.validate.martingale_t_end.unwrap_or(0.5))?,
            weak_tolerance: positive("validate.weak_tolerance", file.validate.weak_tolerance.unwrap_or(0.02))?,
            oracle_tolerance: positive("validate.oracle_tolerance", file.validate.oracle_tolerance.unwrap_or(1e-8))?,
            negative_control,
        };

        Ok(Self {
            experiment,
            preset,
            ensemble,
            workers,
            sweep_gammas: gamma_list("sweep.gammas", file.sweep.gammas.unwrap_or_else(|| DEFAULT_GAMMAS.to_vec()))?,
            output,
            analytic,
            validate,
        })
    }

    /// The resolved run in file form, with every result-affecting key filled in.
    /// Worker count and output directory are left out: neither changes any output byte.
    pub fn to_file_config(&self) -> FileConfig {
        let e = &self.ensemble;
        let s = &e.settings;
        let (sample_interval, every_step) = match s.sampling {
            Sampling::Interval(dt) => (Some(dt), None),
            Sampling::EveryStep => (None, Some(true)),
        };
        let alpha = e.init.alpha();
        let beta = e.init.beta();
        FileConfig {
            experiment: Some(self.experiment),
            model: ModelSection { omega: Some(e.params.omega), gamma: Some(e.params.gamma) },
            initial: InitialSection { alpha: Some([alpha.re, alpha.im]), beta: Some([beta.re, beta.im]) },
            ensemble: EnsembleSection { n: Some(e.n_trajectories), seed: Some(e.master_seed), workers: None },
            schedule: ScheduleSection {
                preset: Some(self.preset),
                fine_dt: Some(s.schedule.fine_dt),
                switch_time: Some(s.schedule.switch_time),
                coarse_dt: Some(s.schedule.coarse_dt),
                horizon: Some(e.horizon),
                sample_interval,
                every_step,
            },
            detector: DetectorSection { epsilon: Some(e.detector.epsilon), tau: Some(e.detector.tau) },
            sweep: SweepSection { gammas: Some(self.sweep_gammas.clone()) },
            output: OutputSection {
                dir: None,
                csv: Some(self.output.csv),
                json: Some(self.output.json),
                svg: Some(self.output.svg),
            },
            analytic: AnalyticSection {
                dt: Some(self.analytic.dt),
                mass_g: self.analytic.mass_g,
                delta_x0_cm: self.analytic.delta_x0_cm,
                n_constituents: self.analytic.n_constituents,
            },
            validate: ValidateSection {
                gammas: Some(self.validate.gammas.clone()),
                martingale_t_end: Some(self.validate.martingale_t_end),
                weak_tolerance: Some(self.validate.weak_tolerance),
                oracle_tolerance: Some(self.validate.oracle_tolerance),
                negative_control: Some(self.validate.negative_control),
            },
        }
    }

    /// [`to_file_config`](Self::to_file_config) as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file_config()).expect("resolved config always serializes")
    }
}
