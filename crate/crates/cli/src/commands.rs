//! One function per subcommand. Each writes its files and returns a summary
//! for the terminal.

use std::path::PathBuf;

use serde::Serialize;
use spin_collapse::analytic::{
    amplification_rate, classify_damping, max_oracle_gap, solve_density, spread_characteristic_time, DampingRegime,
    SpaceCollapseConstants,
};
use spin_collapse::detect::{event_history, Event};
use spin_collapse::ensemble::{
    derive_seed, weak_convergence_from_series, CurvePoint, EnsembleStats, Execution, Runner, TrajectoryOutcome,
};
use spin_collapse::sde::{simulate_trajectory, NoiseStream};
use spin_collapse::spin::{bloch_coordinates, coherence, to_density_params, DensityParams, ModelParams};

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{render_csv, render_json, Cell, OutputDir};
use crate::svg::{Bar, BarChart, LineChart, Series};

/// Optional environment variable capping the worker count.
pub const MAX_WORKERS_ENV: &str = "SPIN_COLLAPSE_MAX_WORKERS";

pub const TRAJECTORY_COLUMNS: [&str; 11] =
    ["t", "re_alpha", "im_alpha", "re_beta", "im_beta", "pop_plus", "coh_re", "coh_im", "sx", "sy", "sz"];
pub const EVENT_COLUMNS: [&str; 4] = ["trajectory_index", "kind", "eigenstate", "time"];
pub const SERIES_COLUMNS: [&str; 6] = ["t", "mean_pop_plus", "analytic_x", "coh_re", "coh_im", "coh_abs"];
pub const SWEEP_COLUMNS: [&str; 14] = [
    "gamma",
    "seed",
    "n_total",
    "n_reduced_plus",
    "n_reduced_minus",
    "n_reduced_total",
    "reduced_fraction",
    "prob_plus_given_reduced",
    "prob_minus_given_reduced",
    "mean_t_r",
    "std_t_r",
    "n_delocalized",
    "delocalized_fraction",
    "delocalized_fraction_of_total",
];
pub const ANALYTIC_COLUMNS: [&str; 4] = ["t", "x", "y", "z"];

/// What a command produced.
#[derive(Debug, Default)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

/// Combines the configured worker count with an optional cap.
pub fn execution(workers: Option<usize>, cap: Option<usize>) -> Execution {
    let workers = match (workers, cap) {
        (Some(w), Some(c)) => Some(w.min(c)),
        (w, c) => w.or(c),
    };
    match workers {
        None => Execution::Parallel,
        Some(1) => Execution::Sequential,
        Some(w) => Execution::ParallelWith(w),
    }
}

/// Reads [`MAX_WORKERS_ENV`]. Unset or empty means no cap.
pub fn worker_cap_from_env() -> CliResult<Option<usize>> {
    match std::env::var(MAX_WORKERS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{MAX_WORKERS_ENV}: `{v}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn run(config: &RunConfig, cap: Option<usize>) -> CliResult<Summary> {
    let runner = Runner::new(execution(config.workers, cap));
    match config.experiment {
        Experiment::Trajectory => cmd_trajectory(config),
        Experiment::Ensemble => cmd_ensemble(config, &runner),
        Experiment::Sweep => cmd_sweep(config, &runner),
        Experiment::Validate => cmd_validate(config, &runner),
        Experiment::Analytic => cmd_analytic(config),
    }
}

fn event_row(index: usize, event: &Event) -> Vec<Cell> {
    let (kind, eigenstate) = match event {
        Event::Reduction(r) => ("reduction", r.eigenstate),
        Event::Delocalization(d) => ("delocalization", d.from_eigenstate),
    };
    vec![index.into(), kind.into(), eigenstate.as_str().into(), event.time().into()]
}

fn outcome_events(o: &TrajectoryOutcome) -> Vec<Event> {
    o.reduction.map(Event::Reduction).into_iter().chain(o.delocalization.map(Event::Delocalization)).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

/// One trajectory on stream 0 of the master seed.
pub fn cmd_trajectory(config: &RunConfig) -> CliResult<Summary> {
    let e = &config.ensemble;
    let mut stream = NoiseStream::new(e.master_seed, 0);
    let record = simulate_trajectory(&e.params, &e.init, &e.settings, e.horizon, &mut stream)?;
    let events = event_history(&record, &e.detector)?;
    let mut out = OutputDir::create(&config.output.dir)?;

    if config.output.csv {
        let rows = record.sample_times.iter().zip(&record.samples).map(|(&t, s)| {
            let (a, b, c) = (s.alpha(), s.beta(), coherence(s));
            let [sx, sy, sz] = bloch_coordinates(s);
            [t, a.re, a.im, b.re, b.im, s.pop_plus(), c.re, c.im, sx, sy, sz].into_iter().map(Cell::from).collect()
        });
        out.write("trajectory.csv", &render_csv("trajectory", config, &TRAJECTORY_COLUMNS, rows))?;
        let rows = events.iter().map(|ev| event_row(0, ev));
        out.write("trajectory_events.csv", &render_csv("trajectory events", config, &EVENT_COLUMNS, rows))?;
    }
    if config.output.svg {
        let bloch: Vec<[f64; 3]> = record.samples.iter().map(bloch_coordinates).collect();
        let pops: Vec<(f64, f64)> = record.sample_times.iter().copied().zip(record.populations_plus()).collect();
        let title = format!("Bloch path, ω = {}, γ = {}", e.params.omega, e.params.gamma);
        out.write("trajectory.svg", &crate::svg::bloch_figure(&title, &bloch, &pops))?;
    }

    let mut lines = vec![format!("{} samples over {} s", record.samples.len(), record.horizon())];
    lines.extend(events.iter().map(|ev| match ev {
        Event::Reduction(r) => format!("reduction to |{}⟩ at t = {:.4} s", r.eigenstate.as_str(), r.t_r),
        Event::Delocalization(d) => format!("delocalization from |{}⟩ at t = {:.4} s", d.from_eigenstate.as_str(), d.t_d),
    }));
    if events.is_empty() {
        lines.push("no reduction".into());
    }
    Ok(Summary { files: out.into_written(), lines })
}

#[derive(Serialize)]
struct StandardErrors {
    reduced_fraction: f64,
    prob_plus_given_reduced: Option<f64>,
}

#[derive(Serialize)]
struct EnsembleReport<'a> {
    stats: &'a EnsembleStats,
    standard_errors: StandardErrors,
    delocalized_fraction_of_total: f64,
    weak_convergence_deviation: Option<f64>,
}

fn analytic_available(params: &ModelParams) -> bool {
    params.omega > 0.0
}

fn standard_errors(stats: &EnsembleStats) -> StandardErrors {
    StandardErrors {
        reduced_fraction: stats.reduced_fraction_standard_error(),
        prob_plus_given_reduced: stats.prob_plus_standard_error(),
    }
}

fn delocalized_of_total(stats: &EnsembleStats) -> f64 {
    stats.n_delocalized as f64 / stats.n_total as f64
}

fn stats_lines(stats: &EnsembleStats) -> Vec<String> {
    vec![
        format!(
            "reduced {}/{} ({:.4}); |+⟩ {} |−⟩ {}",
            stats.n_reduced_total, stats.n_total, stats.reduced_fraction, stats.n_reduced_plus, stats.n_reduced_minus
        ),
        format!(
            "P(+|reduced) {}  mean t_r {}  std t_r {}",
            fmt_opt(stats.prob_plus_given_reduced),
            fmt_opt(stats.mean_t_r),
            fmt_opt(stats.std_t_r)
        ),
        format!("delocalized {} ({} of reduced)", stats.n_delocalized, fmt_opt(stats.delocalized_fraction)),
    ]
}

pub fn cmd_ensemble(config: &RunConfig, runner: &Runner) -> CliResult<Summary> {
    let e = &config.ensemble;
    let run = runner.run_ensemble_with_series(e)?;
    let weak = if analytic_available(&e.params) { Some(weak_convergence_from_series(e, &run.series)?) } else { None };
    let mut out = OutputDir::create(&config.output.dir)?;

    if config.output.json {
        let report = EnsembleReport {
            stats: &run.stats,
            standard_errors: standard_errors(&run.stats),
            delocalized_fraction_of_total: delocalized_of_total(&run.stats),
            weak_convergence_deviation: weak.as_ref().map(|w| w.deviation),
        };
        out.write("stats.json", &render_json(config, &report))?;
    }
    let s = &run.series;
    if config.output.csv {
        let rows = run.outcomes.iter().flat_map(|o| outcome_events(o).into_iter().map(move |ev| event_row(o.index, &ev)));
        out.write("events.csv", &render_csv("ensemble events", config, &EVENT_COLUMNS, rows))?;
        let rows = (0..s.sample_times.len()).map(|k| {
            vec![
                s.sample_times[k].into(),
                s.mean_pop_plus[k].into(),
                weak.as_ref().map(|w| w.analytic_x[k]).into(),
                s.coherence.mean_re[k].into(),
                s.coherence.mean_im[k].into(),
                s.coherence.mean_abs[k].into(),
            ]
        });
        out.write("series.csv", &render_csv("ensemble series", config, &SERIES_COLUMNS, rows))?;
    }
    if config.output.svg {
        let times = || s.sample_times.iter().copied();
        let mut series = vec![Series::new("ensemble mean |α|²", times().zip(s.mean_pop_plus.iter().copied()).collect())];
        if let Some(w) = &weak {
            series.push(Series::new("analytic x(t)", times().zip(w.analytic_x.iter().copied()).collect()).dashed());
        }
        let chart = LineChart {
            title: format!("mean population, γ = {}, N = {}", e.params.gamma, e.n_trajectories),
            x_label: "t (s)".into(),
            y_label: "|α|²".into(),
            series,
            y_range: Some((0.0, 1.0)),
        };
        out.write("population.svg", &chart.render())?;
        let chart = LineChart {
            title: format!("mean coherence α β*, γ = {}", e.params.gamma),
            x_label: "t (s)".into(),
            y_label: "coherence".into(),
            series: vec![
                Series::new("Re", times().zip(s.coherence.mean_re.iter().copied()).collect()).dashed(),
                Series::new("Im", times().zip(s.coherence.mean_im.iter().copied()).collect()),
                Series::new("|·|", times().zip(s.coherence.mean_abs.iter().copied()).collect()),
            ],
            y_range: None,
        };
        out.write("coherence.svg", &chart.render())?;
    }

    let mut lines = stats_lines(&run.stats);
    if let Some(w) = &weak {
        lines.push(format!("weak-convergence gap {:.4} at t = {:.3} s", w.deviation, w.worst_time));
    }
    Ok(Summary { files: out.into_written(), lines })
}

#[derive(Serialize)]
struct SweepPoint<'a> {
    gamma: f64,
    seed: u64,
    stats: &'a EnsembleStats,
    standard_errors: StandardErrors,
    delocalized_fraction_of_total: f64,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    points: Vec<SweepPoint<'a>>,
}

/// Events file name for the `k`-th swept γ.
pub fn sweep_events_file(k: usize) -> String {
    format!("events_g{k}.csv")
}

pub fn cmd_sweep(config: &RunConfig, runner: &Runner) -> CliResult<Summary> {
    let base = &config.ensemble;
    let mut points: Vec<CurvePoint> = Vec::new();
    let mut outcomes: Vec<Vec<TrajectoryOutcome>> = Vec::new();
    for (k, &gamma) in config.sweep_gammas.iter().enumerate() {
        let seed = derive_seed(base.master_seed, k as u64);
        let (stats, o) = runner.run_ensemble(&base.with_gamma(gamma).with_seed(seed))?;
        points.push(CurvePoint { gamma, seed, stats });
        outcomes.push(o);
    }
    let mut out = OutputDir::create(&config.output.dir)?;

    if config.output.json {
        let report = SweepReport {
            points: points
                .iter()
                .map(|p| SweepPoint {
                    gamma: p.gamma,
                    seed: p.seed,
                    stats: &p.stats,
                    standard_errors: standard_errors(&p.stats),
                    delocalized_fraction_of_total: delocalized_of_total(&p.stats),
                })
                .collect(),
        };
        out.write("sweep.json", &render_json(config, &report))?;
    }
    if config.output.csv {
        let rows = points.iter().map(|p| {
            let s = &p.stats;
            vec![
                p.gamma.into(),
                p.seed.into(),
                s.n_total.into(),
                s.n_reduced_plus.into(),
                s.n_reduced_minus.into(),
                s.n_reduced_total.into(),
                s.reduced_fraction.into(),
                s.prob_plus_given_reduced.into(),
                s.prob_minus_given_reduced.into(),
                s.mean_t_r.into(),
                s.std_t_r.into(),
                s.n_delocalized.into(),
                s.delocalized_fraction.into(),
                delocalized_of_total(s).into(),
            ]
        });
        out.write("sweep.csv", &render_csv("sweep", config, &SWEEP_COLUMNS, rows))?;
        for (k, o) in outcomes.iter().enumerate() {
            let rows = o.iter().flat_map(|o| outcome_events(o).into_iter().map(move |ev| event_row(o.index, &ev)));
            let title = format!("sweep events, gamma = {}", config.sweep_gammas[k]);
            out.write(&sweep_events_file(k), &render_csv(&title, config, &EVENT_COLUMNS, rows))?;
        }
    }
    if config.output.svg {
        let label = |p: &CurvePoint| format!("{}", p.gamma);
        let chart = BarChart {
            title: "reduction time t_r (mean ± std over reduced trajectories)".into(),
            x_label: "γ (1/s)".into(),
            y_label: "t_r (s)".into(),
            bars: points.iter().map(|p| Bar { label: label(p), value: p.stats.mean_t_r, error: p.stats.std_t_r }).collect(),
        };
        out.write("reduction_time.svg", &chart.render())?;
        let chart = BarChart {
            title: "fraction of trajectories reduced".into(),
            x_label: "γ (1/s)".into(),
            y_label: "fraction".into(),
            bars: points
                .iter()
                .map(|p| Bar {
                    label: label(p),
                    value: Some(p.stats.reduced_fraction),
                    error: Some(p.stats.reduced_fraction_standard_error()),
                })
                .collect(),
        };
        out.write("reduced_fraction.svg", &chart.render())?;
        let chart = BarChart {
            title: "fraction of all trajectories delocalized".into(),
            x_label: "γ (1/s)".into(),
            y_label: "fraction".into(),
            bars: points.iter().map(|p| Bar { label: label(p), value: Some(delocalized_of_total(&p.stats)), error: None }).collect(),
        };
        out.write("delocalization.svg", &chart.render())?;
    }

    let mut lines = Vec::new();
    for p in &points {
        let s = &p.stats;
        lines.push(format!(
            "γ = {:>6}: reduced {:.4}  P(+) {}  t_r {} ± {}  delocalized {:.4}",
            p.gamma,
            s.reduced_fraction,
            fmt_opt(s.prob_plus_given_reduced),
            fmt_opt(s.mean_t_r),
            fmt_opt(s.std_t_r),
            delocalized_of_total(s)
        ));
    }
    Ok(Summary { files: out.into_written(), lines })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub gamma: Option<f64>,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    passed: bool,
    checks: &'a [Check],
}

/// Parameter sets for the closed-form vs RK4 comparison, one per regime.
pub const ORACLE_CASES: [(DampingRegime, f64); 3] =
    [(DampingRegime::OverDamped, 5.0), (DampingRegime::CriticallyDamped, 2.0), (DampingRegime::UnderDamped, 0.05)];
const ORACLE_DT: f64 = 1e-5;

fn validation_checks(config: &RunConfig, runner: &Runner) -> CliResult<Vec<Check>> {
    let e = &config.ensemble;
    let v = &config.validate;
    let mut checks = Vec::new();

    if analytic_available(&e.params) {
        for (k, &gamma) in v.gammas.iter().enumerate() {
            let cfg = e.with_gamma(gamma).with_seed(derive_seed(e.master_seed, k as u64));
            let weak = runner.weak_convergence_check(&cfg)?;
            checks.push(Check {
                name: "weak_convergence".into(),
                gamma: Some(gamma),
                value: weak.deviation,
                tolerance: v.weak_tolerance,
                passed: weak.deviation <= v.weak_tolerance,
            });
        }
    }

    let target = e.init.pop_plus();
    for (k, &gamma) in v.gammas.iter().enumerate() {
        let seed = derive_seed(e.master_seed, (v.gammas.len() + k) as u64);
        let m = runner.martingale_check(gamma, &e.init, e.n_trajectories.max(2), v.martingale_t_end, seed, &e.settings)?;
        let gap = (m.mean_pop - target).abs();
        let tolerance = 4.0 * m.standard_error;
        checks.push(Check {
            name: "martingale".into(),
            gamma: Some(gamma),
            value: gap,
            tolerance,
            passed: gap <= tolerance.max(1e-12),
        });
    }

    let init = to_density_params(&e.init);
    for (regime, gamma) in ORACLE_CASES {
        let params = ModelParams::new(1.0, gamma)?;
        debug_assert_eq!(classify_damping(&params)?, regime);
        let gap = max_oracle_gap(&params, &init, std::f64::consts::TAU, ORACLE_DT, 100)?;
        checks.push(Check {
            name: format!("analytic_oracle_{}", regime_name(regime)),
            gamma: Some(gamma),
            value: gap,
            tolerance: v.oracle_tolerance,
            passed: gap <= v.oracle_tolerance,
        });
    }
    Ok(checks)
}

fn regime_name(regime: DampingRegime) -> &'static str {
    match regime {
        DampingRegime::OverDamped => "over_damped",
        DampingRegime::CriticallyDamped => "critically_damped",
        DampingRegime::UnderDamped => "under_damped",
    }
}

/// Writes the report, then fails with [`CliError::Validation`] if any check failed.
pub fn cmd_validate(config: &RunConfig, runner: &Runner) -> CliResult<Summary> {
    let checks = validation_checks(config, runner)?;
    let passed = checks.iter().all(|c| c.passed);
    let mut out = OutputDir::create(&config.output.dir)?;
    out.write("validation.json", &render_json(config, &ValidationReport { passed, checks: &checks }))?;

    let lines: Vec<String> = checks
        .iter()
        .map(|c| {
            let gamma = c.gamma.map_or_else(String::new, |g| format!(" γ = {g}"));
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            format!("{verdict} {}{gamma}: {:.3e} (limit {:.3e})", c.name, c.value, c.tolerance)
        })
        .collect();
    if !passed {
        for line in &lines {
            eprintln!("{line}");
        }
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        return Err(CliError::Validation(format!("{} check(s) failed: {}", failed.len(), failed.join(", "))));
    }
    Ok(Summary { files: out.into_written(), lines })
}

#[derive(Serialize)]
struct Scalars {
    spread_characteristic_time_s: Option<f64>,
    amplification_rate_per_s: Option<f64>,
}

#[derive(Serialize)]
struct AnalyticReport {
    regime: DampingRegime,
    initial: DensityParams,
    at_horizon: DensityParams,
    scalars: Scalars,
}

/// Sample times `0, dt, 2dt, …` plus the horizon itself.
fn grid(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    if horizon - times[n] > 1e-9 * dt {
        times.push(horizon);
    }
    times
}

pub fn cmd_analytic(config: &RunConfig) -> CliResult<Summary> {
    let e = &config.ensemble;
    let init = to_density_params(&e.init);
    let regime = classify_damping(&e.params)?;
    let times = grid(e.horizon, config.analytic.dt);
    let curve: Vec<DensityParams> = times.iter().map(|&t| solve_density(&e.params, &init, t)).collect::<Result<_, _>>()?;

    let a = &config.analytic;
    let spread = match (a.mass_g, a.delta_x0_cm) {
        (Some(m), Some(dx)) => Some(spread_characteristic_time(m, dx)?),
        _ => None,
    };
    let rate = a.n_constituents.map(|n| amplification_rate(n, &SpaceCollapseConstants::default())).transpose()?;

    let mut out = OutputDir::create(&config.output.dir)?;
    if config.output.csv {
        let rows = times.iter().zip(&curve).map(|(&t, p)| vec![t.into(), p.x.into(), p.y.into(), p.z.into()]);
        out.write("analytic.csv", &render_csv("analytic density matrix", config, &ANALYTIC_COLUMNS, rows))?;
    }
    if config.output.json {
        let report = AnalyticReport {
            regime,
            initial: init,
            at_horizon: *curve.last().expect("grid is never empty"),
            scalars: Scalars { spread_characteristic_time_s: spread, amplification_rate_per_s: rate },
        };
        out.write("analytic.json", &render_json(config, &report))?;
    }
    if config.output.svg {
        let pick = |f: fn(&DensityParams) -> f64| times.iter().copied().zip(curve.iter().map(f)).collect::<Vec<_>>();
        let chart = LineChart {
            title: format!("density matrix, ω = {}, γ = {} ({})", e.params.omega, e.params.gamma, regime_name(regime)),
            x_label: "t (s)".into(),
            y_label: "value".into(),
            series: vec![
                Series::new("x = ⟨+|ρ|+⟩", pick(|p| p.x)),
                Series::new("y", pick(|p| p.y)).dashed(),
                Series::new("z", pick(|p| p.z)),
            ],
            y_range: None,
        };
        out.write("analytic.svg", &chart.render())?;
    }

    let last = curve.last().expect("grid is never empty");
    let mut lines = vec![
        format!("regime: {}", regime_name(regime)),
        format!("at t = {}: x = {:.6}, y = {:.6}, z = {:.6}", e.horizon, last.x, last.y, last.z),
    ];
    if let Some(t) = spread {
        lines.push(format!("spread characteristic time T = {t:.3e} s"));
    }
    if let Some(r) = rate {
        lines.push(format!("amplified localization rate = {r:.3e} 1/s"));
    }
    Ok(Summary { files: out.into_written(), lines })
}
