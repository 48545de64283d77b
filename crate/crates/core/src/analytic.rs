//! Exact solution of the two-level collapse master equation
//!
//! ```text
//! dρ/dt = −iω[σ_x, ρ] − γ(ρ − σ_z ρ σ_z)
//! ```
//!
//! written in the `(x, y, z)` coordinates of [`DensityParams`]. The `x`/`z`
//! pair obeys a damped-oscillator equation `z̈ + 2γż + 4ω²z = 0`, so the closed
//! form has over-, critically and under-damped branches. A fixed-step RK4
//! integrator of the same equations is kept alongside as an independent check.
//!
//! The module also carries two scalar estimates used when discussing
//! macroscopic objects: the free-spreading doubling time of a wavepacket and
//! the amplified collapse rate of an `N`-constituent body.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{DensityParams, ModelParams};

/// Half-width of the band around `γ = 2ω` routed to the critically damped branch.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// Planck constant in erg·s (CGS).
pub const PLANCK_CGS: f64 = 6.62607e-27;

/// Proton mass in grams.
pub const PROTON_MASS_G: f64 = 1.67262e-24;

pub const AVOGADRO: f64 = 6.02214076e23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DampingRegime {
    OverDamped,
    CriticallyDamped,
    UnderDamped,
}

pub fn classify_damping(params: &ModelParams) -> Result<DampingRegime> {
    params.validate()?;
    if params.omega == 0.0 {
        return Err(Error::UndefinedClassification);
    }
    let ratio = params.gamma / (2.0 * params.omega);
    Ok(if (ratio - 1.0).abs() <= CRITICAL_TOLERANCE {
        DampingRegime::CriticallyDamped
    } else if ratio > 1.0 {
        DampingRegime::OverDamped
    } else {
        DampingRegime::UnderDamped
    })
}

/// Right-hand side `(ẋ, ẏ, ż)` of the density equations.
pub fn density_ode_rhs(params: &ModelParams, p: &DensityParams) -> [f64; 3] {
    let ModelParams { omega, gamma } = *params;
    [
        -2.0 * omega * p.z,
        -2.0 * gamma * p.y,
        -omega + 2.0 * omega * p.x - 2.0 * gamma * p.z,
    ]
}

/// Closed-form `ρ(t)` for any `t ≥ 0`. Requires `ω > 0`.
pub fn solve_density(params: &ModelParams, init: &DensityParams, t: f64) -> Result<DensityParams> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", format!("{t} must be finite and >= 0")));
    }
    let regime = classify_damping(params)?;
    if t == 0.0 {
        return Ok(*init);
    }
    Ok(closed_form(regime, params, init, t))
}

fn closed_form(regime: DampingRegime, params: &ModelParams, init: &DensityParams, t: f64) -> DensityParams {
    let ModelParams { omega: w, gamma: g } = *params;
    let DensityParams { x: x0, y: y0, z: z0 } = *init;
    let y = y0 * (-2.0 * g * t).exp();

    let (x, z) = match regime {
        DampingRegime::OverDamped => {
            let mu = (1.0 - (2.0 * w / g).powi(2)).sqrt();
            // ω²/(γ²(1−μ)) = (1+μ)/4 and γ(1−μ) = 4ω²/(γ(1+μ)); both avoid the
            // cancellation in 1 − μ when γ ≫ ω.
            let w2 = w * w / (g * g * mu);
            let a = -2.0 * w2 / (1.0 + mu) * x0 + w / (g * mu) * z0 + w2 / (1.0 + mu);
            let b = (1.0 + mu) / (4.0 * mu) * (2.0 * x0 - 1.0) - w / (g * mu) * z0;
            let c = -w / (g * mu) * x0 + (1.0 + mu) / (2.0 * mu) * z0 + w / (2.0 * g * mu);
            let d = w / (g * mu) * x0 - (1.0 - mu) / (2.0 * mu) * z0 - w / (2.0 * g * mu);
            let fast = (-g * (1.0 + mu) * t).exp();
            let slow = (-4.0 * w * w / (g * (1.0 + mu)) * t).exp();
            // `c` pairs with the fast mode and `d` with the slow one; this is
            // what ẋ = −2ωz forces given the x coefficients above.
            (a * fast + b * slow + 0.5, c * fast + d * slow)
        }
        DampingRegime::CriticallyDamped => {
            let a = x0 - 0.5;
            let b = (2.0 * x0 - 1.0) * w - g * z0;
            let c = z0;
            let d = (2.0 * x0 - 1.0) * w - g * z0;
            let env = (-g * t).exp();
            ((a + b * t) * env + 0.5, (c + d * t) * env)
        }
        DampingRegime::UnderDamped => {
            let lambda = (4.0 * w * w - g * g).sqrt();
            let a = x0 - 0.5;
            let b = (g * x0 - 2.0 * w * z0 - 0.5 * g) / lambda;
            let c = z0;
            let d = (2.0 * w * x0 - w - g * z0) / lambda;
            let (s, co) = (lambda * t).sin_cos();
            let env = (-g * t).exp();
            ((a * co + b * s) * env + 0.5, (c * co + d * s) * env)
        }
    };
    DensityParams { x, y, z }
}

/// Classic RK4 integration of [`density_ode_rhs`] from `0` to `t_end`.
///
/// Every `stride`-th step is recorded, plus the initial and final points; the
/// last step is shortened to land exactly on `t_end`.
pub fn integrate_density_reference(
    params: &ModelParams,
    init: &DensityParams,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<(f64, DensityParams)>> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid("t_end", format!("{t_end} must be >= 0")));
    }
    let stride = stride.max(1);
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(n_steps / stride + 2);
    out.push((0.0, *init));

    let f = |p: [f64; 3]| density_ode_rhs(params, &DensityParams { x: p[0], y: p[1], z: p[2] });
    let axpy = |p: [f64; 3], k: [f64; 3], h: f64| [p[0] + h * k[0], p[1] + h * k[1], p[2] + h * k[2]];

    let mut p = [init.x, init.y, init.z];
    for step in 1..=n_steps {
        let t_prev = (step - 1) as f64 * dt;
        let t = if step == n_steps { t_end } else { step as f64 * dt };
        let h = t - t_prev;
        let k1 = f(p);
        let k2 = f(axpy(p, k1, h / 2.0));
        let k3 = f(axpy(p, k2, h / 2.0));
        let k4 = f(axpy(p, k3, h));
        for i in 0..3 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::ReferenceDiverged { t });
        }
        if step % stride == 0 || step == n_steps {
            out.push((t, DensityParams { x: p[0], y: p[1], z: p[2] }));
        }
    }
    Ok(out)
}

/// Largest `|closed form − RK4|` over every recorded point of the reference run.
pub fn max_oracle_gap(
    params: &ModelParams,
    init: &DensityParams,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<f64> {
    let reference = integrate_density_reference(params, init, t_end, dt, stride)?;
    reference.iter().try_fold(0.0f64, |acc, (t, p)| {
        Ok(acc.max(solve_density(params, init, *t)?.max_abs_diff(p)))
    })
}

/// Localization length and single-particle rate of the spatial collapse model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceCollapseConstants {
    /// Inverse squared localization length, cm⁻².
    pub alpha_loc: f64,
    /// Single-particle collapse rate, s⁻¹.
    pub lambda_rate: f64,
}

impl Default for SpaceCollapseConstants {
    fn default() -> Self {
        Self { alpha_loc: 1e10, lambda_rate: 1e-17 }
    }
}

impl SpaceCollapseConstants {
    /// `1/√α` in cm.
    pub fn localization_length(&self) -> f64 {
        self.alpha_loc.sqrt().recip()
    }
}

/// Time for a free wavepacket of width `delta_x0` (cm) and mass `mass` (g) to
/// double its spread: `√12 · m · Δx₀² / h`.
pub fn spread_characteristic_time(mass: f64, delta_x0: f64) -> Result<f64> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid("mass", format!("{mass} must be > 0")));
    }
    if !(delta_x0.is_finite() && delta_x0 > 0.0) {
        return Err(Error::invalid("delta_x0", format!("{delta_x0} must be > 0")));
    }
    Ok(12f64.sqrt() * mass * delta_x0 * delta_x0 / PLANCK_CGS)
}

/// Collapse rate of the center of mass of an `n_constituents` body, `Λ = Nλ`.
pub fn amplification_rate(n_constituents: f64, constants: &SpaceCollapseConstants) -> Result<f64> {
    if !(n_constituents.is_finite() && n_constituents >= 1.0) {
        return Err(Error::invalid("n_constituents", format!("{n_constituents} must be >= 1")));
    }
    Ok(n_constituents * constants.lambda_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(omega: f64, gamma: f64) -> ModelParams {
        ModelParams::new(omega, gamma).unwrap()
    }

    fn reference_init() -> DensityParams {
        DensityParams { x: 0.75, y: 0.75f64.sqrt() * 0.5, z: 0.0 }
    }

    #[test]
    fn classification() {
        assert_eq!(classify_damping(&params(1.0, 5.0)), Ok(DampingRegime::OverDamped));
        assert_eq!(classify_damping(&params(1.0, 2.0)), Ok(DampingRegime::CriticallyDamped));
        assert_eq!(classify_damping(&params(1.0, 2.0 * (1.0 + 5e-10))), Ok(DampingRegime::CriticallyDamped));
        assert_eq!(classify_damping(&params(1.0, 2.0 * (1.0 + 1e-6))), Ok(DampingRegime::OverDamped));
        assert_eq!(classify_damping(&params(1.0, 0.05)), Ok(DampingRegime::UnderDamped));
        assert_eq!(classify_damping(&params(0.0, 3.0)), Err(Error::UndefinedClassification));
        assert_eq!(
            solve_density(&params(0.0, 3.0), &reference_init(), 1.0),
            Err(Error::UndefinedClassification)
        );
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(density_ode_rhs(&params(1.0, 5.0), &DensityParams::MAXIMALLY_MIXED), [0.0, 0.0, 0.0]);
        let r = density_ode_rhs(&params(1.0, 5.0), &DensityParams { x: 0.75, y: 0.4330, z: 0.0 });
        assert_abs_diff_eq!(r[0], 0.0);
        assert_abs_diff_eq!(r[1], -4.33, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 0.5, epsilon = 1e-12);
        assert_eq!(density_ode_rhs(&params(1.0, 0.0), &DensityParams { x: 1.0, y: 0.0, z: 0.0 }), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn identity_at_time_zero() {
        let init = DensityParams { x: 0.3, y: -0.2, z: 0.35 };
        for g in [0.0, 0.05, 1.0, 2.0, 5.0, 100.0, 1e4] {
            let prm = params(1.0, g);
            assert_eq!(solve_density(&prm, &init, 0.0).unwrap(), init);
            // The coefficients themselves reproduce the initial condition.
            let p = closed_form(classify_damping(&prm).unwrap(), &prm, &init, 0.0);
            assert!(p.max_abs_diff(&init) <= 1e-15, "gamma {g}: {p:?}");
        }
    }

    #[test]
    fn steady_state_reached() {
        let init = DensityParams { x: 0.1, y: 0.2, z: -0.25 };
        let p = solve_density(&params(1.0, 1.0), &init, 30.0).unwrap();
        assert!((p.x - 0.5).abs() < 1e-6 && p.y.abs() < 1e-6 && p.z.abs() < 1e-6);
    }

    #[test]
    fn matches_rk4_over_damped() {
        let prm = params(1.0, 5.0);
        let init = DensityParams { x: 0.75, y: 0.4330, z: 0.0 };
        let reference = integrate_density_reference(&prm, &init, 1.0, 1e-6, 1).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let k = (t / 1e-6f64).round() as usize;
            let (tk, p) = reference[k];
            assert_abs_diff_eq!(tk, t, epsilon = 1e-12);
            let exact = solve_density(&prm, &init, tk).unwrap();
            assert!(exact.max_abs_diff(&p) <= 1e-8, "t = {t}: {exact:?} vs {p:?}");
        }
    }

    #[test]
    fn matches_rk4_every_regime() {
        for g in [5.0, 2.0, 0.05] {
            let gap = max_oracle_gap(&params(1.0, g), &reference_init(), std::f64::consts::TAU, 1e-5, 100).unwrap();
            assert!(gap <= 1e-8, "gamma {g}: gap {gap:e}");
        }
    }

    #[test]
    fn derivative_at_zero_matches_rhs() {
        let init = DensityParams { x: 0.7, y: 0.1, z: 0.3 };
        let h = 1e-7;
        for g in [5.0, 2.0, 0.5] {
            let prm = params(1.0, g);
            let regime = classify_damping(&prm).unwrap();
            let fwd = closed_form(regime, &prm, &init, h);
            let bwd = closed_form(regime, &prm, &init, -h);
            let rhs = density_ode_rhs(&prm, &init);
            let fd = [(fwd.x - bwd.x) / (2.0 * h), (fwd.y - bwd.y) / (2.0 * h), (fwd.z - bwd.z) / (2.0 * h)];
            for k in 0..3 {
                let scale = rhs[k].abs().max(1e-3);
                assert!((fd[k] - rhs[k]).abs() / scale <= 1e-5, "gamma {g} component {k}: {} vs {}", fd[k], rhs[k]);
            }
        }
    }

    #[test]
    fn near_critical_continuity() {
        let init = reference_init();
        let crit = solve_density(&params(1.0, 2.0), &init, 1.0).unwrap();
        for s in [1.0 + 1e-6, 1.0 - 1e-6] {
            let near = solve_density(&params(1.0, 2.0 * s), &init, 1.0).unwrap();
            assert!(near.max_abs_diff(&crit) <= 1e-4);
        }
    }

    #[test]
    fn reference_integration_edges() {
        let prm = params(1.0, 0.05);
        let init = DensityParams { x: 1.0, y: 0.0, z: 0.0 };
        let only = integrate_density_reference(&prm, &init, 0.0, 1e-3, 1).unwrap();
        assert_eq!(only, vec![(0.0, init)]);

        // Under-damped: x crosses below 1/2 and comes back, with a shrinking envelope.
        let series = integrate_density_reference(&prm, &init, 10.0, 1e-3, 10).unwrap();
        let min_first = series.iter().filter(|(t, _)| *t < 3.0).map(|(_, p)| p.x).fold(1.0, f64::min);
        let max_second = series.iter().filter(|(t, _)| *t > 2.0 && *t < 5.0).map(|(_, p)| p.x).fold(0.0, f64::max);
        assert!(min_first < 0.1);
        assert!(max_second > 0.8 && max_second < 1.0);

        assert!(integrate_density_reference(&prm, &init, 1.0, 0.0, 1).is_err());
        let wild = params(1.0, 1e300);
        assert!(matches!(
            integrate_density_reference(&wild, &DensityParams { x: 0.5, y: 0.5, z: 0.0 }, 1.0, 0.1, 1),
            Err(Error::ReferenceDiverged { .. })
        ));
    }

    #[test]
    fn scalar_estimates() {
        let proton = spread_characteristic_time(PROTON_MASS_G, 1e-5).unwrap();
        assert!((proton.log10() + 7.0).abs() <= 0.5, "{proton:e}");
        let gram = spread_characteristic_time(1.0, 1e-5).unwrap();
        assert!((gram.log10() - 17.0).abs() <= 0.5, "{gram:e}");
        let ratio = spread_characteristic_time(1.0, 2e-5).unwrap() / gram;
        assert_abs_diff_eq!(ratio, 4.0, epsilon = 1e-12);
        assert!(spread_characteristic_time(0.0, 1e-5).is_err());
        assert!(spread_characteristic_time(1.0, -1.0).is_err());

        let k = SpaceCollapseConstants::default();
        assert_abs_diff_eq!(k.localization_length(), 1e-5, epsilon = 1e-20);
        assert_eq!(amplification_rate(1.0, &k).unwrap(), 1e-17);
        let big = amplification_rate(6.022e23, &k).unwrap();
        assert_abs_diff_eq!(big, 6.022e6, epsilon = 1.0);
        assert!((big.recip().log10() + 7.0).abs() <= 0.5);
        assert_eq!(amplification_rate(2e5, &k).unwrap(), 2.0 * amplification_rate(1e5, &k).unwrap());
        assert!(amplification_rate(0.0, &k).is_err());
    }

    fn arb_pure() -> impl Strategy<Value = DensityParams> {
        (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(theta, phi)| {
            // Bloch polar angles → (x, y, z) with sy = −2z.
            DensityParams {
                x: 0.5 * (1.0 + theta.cos()),
                y: 0.5 * theta.sin() * phi.cos(),
                z: -0.5 * theta.sin() * phi.sin(),
            }
        })
    }

    proptest! {
        #[test]
        fn positivity_preserved(init in arb_pure(), g in 0.01..50.0f64, w in 0.1..5.0f64, t in 0.0..20.0f64) {
            let p = solve_density(&params(w, g), &init, t).unwrap();
            prop_assert!(p.purity_excess() <= 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p.x));
        }

        #[test]
        fn coherence_y_decays_exactly(init in arb_pure(), g in 0.01..50.0f64, t in 0.0..5.0f64) {
            let p = solve_density(&params(1.0, g), &init, t).unwrap();
            prop_assert_eq!(p.y, init.y * (-2.0 * g * t).exp());
        }
    }
}
