//! Acceptance suite: thirteen criteria at desk scale (N = 10000, desk schedule,
//! horizon 2π, ω = 1, reference initial state unless stated). Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::f64::consts::TAU;
use std::process::Command;
use std::time::Instant;

use spin_collapse::analytic::{
    amplification_rate, max_oracle_gap, solve_density, spread_characteristic_time, SpaceCollapseConstants, AVOGADRO,
    PROTON_MASS_G,
};
use spin_collapse::detect::{
    detect_delocalization, detect_reduction, event_history, DetectorConfig, Eigenstate, Event, ReductionEvent,
};
use spin_collapse::ensemble::{
    derive_seed, weak_convergence_from_series, EnsembleConfig, EnsembleRun, EnsembleStats, Execution, Runner,
};
use spin_collapse::sde::{simulate_trajectory, NoiseStream, SimulationSettings, TrajectoryRecord};
use spin_collapse::spin::{coherence, to_density_params, ModelParams, SpinState};

const GAMMAS: [f64; 7] = [5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0];
const MASTER_SEED: u64 = 2004;
const N: usize = 10_000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| format!("{v:.4}"))
}

struct Sweep {
    runs: Vec<(f64, EnsembleRun)>,
}

impl Sweep {
    fn run(runner: &Runner, base: &EnsembleConfig) -> Self {
        let runs = GAMMAS
            .iter()
            .enumerate()
            .map(|(k, &gamma)| {
                let t0 = Instant::now();
                let cfg = base.with_gamma(gamma).with_seed(derive_seed(MASTER_SEED, k as u64));
                let run = runner.run_ensemble_with_series(&cfg).expect("ensemble runs");
                eprintln!("  sweep γ = {gamma}: {:.1} s", t0.elapsed().as_secs_f64());
                (gamma, run)
            })
            .collect();
        Self { runs }
    }

    fn get(&self, gamma: f64) -> &EnsembleRun {
        &self.runs.iter().find(|(g, _)| *g == gamma).expect("swept γ").1
    }

    fn stats(&self, gamma: f64) -> &EnsembleStats {
        &self.get(gamma).stats
    }

    fn config(&self, gamma: f64) -> EnsembleConfig {
        let k = GAMMAS.iter().position(|g| *g == gamma).unwrap() as u64;
        EnsembleConfig::default().with_gamma(gamma).with_seed(derive_seed(MASTER_SEED, k))
    }
}

fn born_probabilities(sweep: &Sweep) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [60.0, 80.0, 100.0] {
        let s = sweep.stats(gamma);
        let p = s.prob_plus_given_reduced;
        let good = s.reduced_fraction == 1.0 && p.is_some_and(|p| (p - 0.75).abs() <= 0.02);
        ok &= good;
        parts.push(format!("γ={gamma}: reduced {:.4}, P(+) {}", s.reduced_fraction, opt(p)));
    }
    verdict(ok, parts.join("; "))
}

fn collapse_onset(sweep: &Sweep) -> Verdict {
    let f = |g| sweep.stats(g).reduced_fraction;
    let (f20, f10, f5) = (f(20.0), f(10.0), f(5.0));
    let ok = f20 >= 0.97 && (f10 - 0.69).abs() <= 0.04 && (f5 - 0.06).abs() <= 0.02;
    verdict(ok, format!("reduced γ=20 {f20:.4} (≥0.97), γ=10 {f10:.4} (0.69±0.04), γ=5 {f5:.4} (0.06±0.02)"))
}

fn drift_toward_half(sweep: &Sweep) -> Verdict {
    let p5 = sweep.stats(5.0).prob_plus_given_reduced;
    let p100 = sweep.stats(100.0).prob_plus_given_reduced;
    let ok = match (p5, p100) {
        (Some(a), Some(b)) => (0.52..=0.70).contains(&a) && a < b,
        _ => false,
    };
    verdict(ok, format!("P(+) γ=5 {} (n reduced {}), γ=100 {}", opt(p5), sweep.stats(5.0).n_reduced_total, opt(p100)))
}

fn strictly_decreasing(v: &[Option<f64>]) -> bool {
    v.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a))
}

fn reduction_time_order(sweep: &Sweep) -> Verdict {
    let means: Vec<Option<f64>> = [20.0, 40.0, 60.0, 80.0, 100.0].iter().map(|&g| sweep.stats(g).mean_t_r).collect();
    let stds: Vec<Option<f64>> = [60.0, 80.0, 100.0].iter().map(|&g| sweep.stats(g).std_t_r).collect();
    let ok = strictly_decreasing(&means) && strictly_decreasing(&stds);
    let show = |v: &[Option<f64>]| v.iter().map(|x| opt(*x)).collect::<Vec<_>>().join(" > ");
    verdict(ok, format!("mean t_r γ=20..100: {}; std γ=60..100: {}", show(&means), show(&stds)))
}

fn delocalization_trend(sweep: &Sweep) -> Verdict {
    // The first 5000 trajectories of each run are exactly an N = 5000 ensemble
    // with the same seed: stream i depends only on (seed, i).
    let fractions: Vec<f64> = [40.0, 60.0, 80.0, 100.0]
        .iter()
        .map(|&g| {
            let stats = EnsembleStats::from_outcomes(&sweep.get(g).outcomes[..5_000]);
            stats.delocalized_fraction.unwrap_or(0.0)
        })
        .collect();
    let ok = fractions.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = fractions.iter().map(|f| format!("{f:.4}")).collect();
    verdict(ok, format!("delocalized/reduced γ=40..100 (N=5000): {}", shown.join(" ≥ ")))
}

fn martingale(runner: &Runner) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [5.0, 100.0] {
        let m = runner
            .martingale_check(gamma, &SpinState::reference_initial(), N, 0.5, MASTER_SEED, &SimulationSettings::default())
            .expect("martingale run");
        let good = (m.mean_pop - 0.75).abs() <= 4.0 * m.standard_error;
        ok &= good;
        parts.push(format!("γ={gamma}: E|α|² {:.5} ± {:.5}", m.mean_pop, m.standard_error));
    }
    verdict(ok, parts.join("; "))
}

fn weak_convergence(sweep: &Sweep) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [5.0, 100.0] {
        let w = weak_convergence_from_series(&sweep.config(gamma), &sweep.get(gamma).series).expect("analytic x(t)");
        ok &= w.deviation <= 0.02;
        parts.push(format!("γ={gamma}: sup gap {:.4} at t={:.3}", w.deviation, w.worst_time));
    }
    verdict(ok, parts.join("; "))
}

fn analytic_oracle() -> Verdict {
    let init = to_density_params(&SpinState::reference_initial());
    let mut worst = 0.0f64;
    for gamma in [5.0, 2.0, 0.05] {
        let params = ModelParams::new(1.0, gamma).unwrap();
        worst = worst.max(max_oracle_gap(&params, &init, TAU, 1e-5, 10).expect("oracle runs"));
    }
    let critical = ModelParams::new(1.0, 2.0).unwrap();
    let mut continuity = 0.0f64;
    for gamma in [2.0 * (1.0 + 1e-6), 2.0 * (1.0 - 1e-6)] {
        let near = ModelParams::new(1.0, gamma).unwrap();
        for k in 0..=628 {
            let t = k as f64 * 0.01;
            let a = solve_density(&near, &init, t).unwrap();
            let b = solve_density(&critical, &init, t).unwrap();
            continuity = continuity.max(a.max_abs_diff(&b));
        }
    }
    verdict(worst <= 1e-8 && continuity <= 1e-4, format!("closed form vs RK4 {worst:.2e} (≤1e-8); near-critical {continuity:.2e} (≤1e-4)"))
}

fn steady_state() -> Verdict {
    let p = solve_density(&ModelParams::new(1.0, 1.0).unwrap(), &to_density_params(&SpinState::reference_initial()), 30.0)
        .unwrap();
    let gap = (p.x - 0.5).abs().max(p.y.abs()).max(p.z.abs());
    verdict(gap <= 1e-6, format!("max(|x−½|, |y|, |z|) at t=30 = {gap:.2e}"))
}

fn decoherence_diagnostic(runner: &Runner) -> Verdict {
    let weak = EnsembleConfig::default().with_gamma(0.05).with_n(100);
    let series = runner.coherence_statistics(&weak).unwrap();
    let mut stream = NoiseStream::new(weak.master_seed, 0);
    let single = simulate_trajectory(&weak.params, &weak.init, &weak.settings, weak.horizon, &mut stream).unwrap();
    let single_max = single.samples.iter().map(|s| coherence(s).im.abs()).fold(0.0, f64::max);
    let mean_max = series.mean_im.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let avg_abs = series.mean_abs.iter().sum::<f64>() / series.mean_abs.len() as f64;

    let strong = EnsembleConfig::default().with_gamma(50.0).with_n(100);
    let series = runner.coherence_statistics(&strong).unwrap();
    let tail: Vec<f64> =
        series.sample_times.iter().zip(&series.mean_abs).filter(|(t, _)| **t >= 1.0).map(|(_, a)| *a).collect();
    let tail_avg = tail.iter().sum::<f64>() / tail.len() as f64;

    let ok = mean_max <= 0.5 * single_max && avg_abs > 0.2 && tail_avg <= 0.1;
    verdict(
        ok,
        format!(
            "γ=0.05: max|mean Im| {mean_max:.4} vs ½·single {:.4}, avg mean|c| {avg_abs:.4} (>0.2); γ=50: tail mean|c| {tail_avg:.4} (≤0.1)",
            0.5 * single_max
        ),
    )
}

fn determinism(sweep: &Sweep) -> Verdict {
    let cfg = sweep.config(100.0);
    let (stats, _) = Runner::new(Execution::ParallelWith(1)).run_ensemble(&cfg).unwrap();
    let one = serde_json::to_string(&stats).unwrap();
    let four = serde_json::to_string(sweep.stats(100.0)).unwrap();

    let dir = tempfile::TempDir::new().unwrap();
    let csv = |name: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_spin-collapse"))
            .args(["trajectory", "--gamma", "5", "--out", name])
            .current_dir(dir.path())
            .env_remove("SPIN_COLLAPSE_MAX_WORKERS")
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read(dir.path().join(name).join("trajectory.csv")).unwrap()
    };
    let same_csv = csv("a") == csv("b");
    verdict(one == four && same_csv, format!("stats JSON workers 1 vs 4 identical: {}; trajectory CSV identical: {same_csv}", one == four))
}

fn synthetic(times: &[f64], pop_plus: impl Fn(f64) -> f64) -> TrajectoryRecord {
    let samples = times.iter().map(|&t| SpinState::from_population(pop_plus(t)).unwrap()).collect();
    TrajectoryRecord::from_samples(ModelParams::new(1.0, 0.0).unwrap(), times.to_vec(), samples).unwrap()
}

fn grid(horizon: f64) -> Vec<f64> {
    let n = (horizon / 1e-3).round() as usize;
    (0..=n).map(|k| k as f64 * 1e-3).collect()
}

fn detector_suite() -> Verdict {
    let cfg = DetectorConfig::default();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let constant = synthetic(&grid(TAU), |_| 1.0);
    let r = detect_reduction(&constant, &cfg, 0.0).unwrap();
    check("constant |+⟩ reduces at 0", r == Some(ReductionEvent { eigenstate: Eigenstate::Plus, t_r: 0.0 }));
    check("pinned |+⟩ never delocalizes", detect_delocalization(&constant, &r.unwrap(), &cfg).unwrap().is_none());
    check(
        "constant |+⟩ history",
        event_history(&constant, &cfg).unwrap() == vec![Event::Reduction(ReductionEvent { eigenstate: Eigenstate::Plus, t_r: 0.0 })],
    );

    let step = synthetic(&grid(3.0), |t| if t < 1.0 - 1e-9 { 0.5 } else { 0.995 });
    let r = detect_reduction(&step, &cfg, 0.0).unwrap();
    check("step to 0.995 at t=1", r.is_some_and(|r| r.eigenstate == Eigenstate::Plus && (r.t_r - 1.0).abs() < 1e-9));

    let drop = synthetic(&grid(4.0), |t| if t < 2.0 - 1e-9 { 0.995 } else { 0.3 });
    let r = detect_reduction(&drop, &cfg, 0.0).unwrap().unwrap();
    let d = detect_delocalization(&drop, &r, &cfg).unwrap();
    check("drop to 0.3 at t=2", d.is_some_and(|d| d.from_eigenstate == Eigenstate::Plus && (d.t_d - 2.0).abs() < 1e-9));

    let square = synthetic(&grid(8.0), |t| if ((t + 1e-9) / 2.0).floor() as i64 % 2 == 0 { 0.995 } else { 0.005 });
    let history = event_history(&square, &cfg).unwrap();
    let reductions: Vec<(Eigenstate, f64)> = history
        .iter()
        .filter_map(|e| match e {
            Event::Reduction(r) => Some((r.eigenstate, r.t_r)),
            _ => None,
        })
        .collect();
    let per_state = |e| reductions.iter().filter(|(s, _)| *s == e).count();
    let on_boundaries = history.iter().all(|e| (e.time() / 2.0 - (e.time() / 2.0).round()).abs() < 1e-6);
    let alternates = history.windows(2).all(|w| std::mem::discriminant(&w[0]) != std::mem::discriminant(&w[1]));
    check(
        "square wave",
        per_state(Eigenstate::Plus) == 2 && per_state(Eigenstate::Minus) == 2 && on_boundaries && alternates,
    );

    let rabi_params = ModelParams::new(1.0, 0.0).unwrap();
    let mut stream = NoiseStream::new(MASTER_SEED, 0);
    let rabi = simulate_trajectory(&rabi_params, &SpinState::plus(), &SimulationSettings::default(), TAU, &mut stream).unwrap();
    check("γ=0 Rabi from |+⟩ never reduces", event_history(&rabi, &cfg).unwrap().is_empty());

    let detail = if failures.is_empty() {
        format!("6 synthetic cases and γ=0 Rabi ({} reductions in square wave: 2 per eigenstate)", reductions.len())
    } else {
        format!("failed: {}", failures.join(", "))
    };
    verdict(failures.is_empty(), detail)
}

fn magnitude(v: f64) -> i32 {
    v.log10().round() as i32
}

fn scalars() -> Verdict {
    let proton = spread_characteristic_time(PROTON_MASS_G, 1e-5).unwrap();
    let gram = spread_characteristic_time(1.0, 1e-5).unwrap();
    let rate = amplification_rate(AVOGADRO, &SpaceCollapseConstants::default()).unwrap();
    let ok = magnitude(proton) == -7 && magnitude(gram) == 17 && (rate / 6e6 - 1.0).abs() <= 0.05;
    verdict(ok, format!("proton T {proton:.2e} s, 1 g T {gram:.2e} s, Λ(N_A) {rate:.3e} 1/s"))
}

fn main() {
    let started = Instant::now();
    let runner = Runner::new(Execution::ParallelWith(4));
    let base = EnsembleConfig::default().with_n(N).with_seed(MASTER_SEED);
    assert_eq!(base.settings, SimulationSettings::default());
    eprintln!("acceptance: running γ sweep at N = {N}");
    let sweep = Sweep::run(&runner, &base);

    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("Born probabilities at γ = 60, 80, 100", Box::new(|| born_probabilities(&sweep))),
        ("reduced-fraction onset at γ = 5, 10, 20", Box::new(|| collapse_onset(&sweep))),
        ("P(+) drifts toward 1/2 at small γ", Box::new(|| drift_toward_half(&sweep))),
        ("reduction-time ordering", Box::new(|| reduction_time_order(&sweep))),
        ("delocalization trend", Box::new(|| delocalization_trend(&sweep))),
        ("martingale with ω = 0", Box::new(|| martingale(&runner))),
        ("weak convergence to analytic x(t)", Box::new(|| weak_convergence(&sweep))),
        ("analytic oracle", Box::new(analytic_oracle)),
        ("steady state", Box::new(steady_state)),
        ("decoherence vs collapse", Box::new(|| decoherence_diagnostic(&runner))),
        ("determinism", Box::new(|| determinism(&sweep))),
        ("event-detector suite", Box::new(detector_suite)),
        ("collapse-scale scalars", Box::new(scalars)),
    ];

    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", k + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.0} s)",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
