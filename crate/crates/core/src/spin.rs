//! Pure two-level states, model parameters and density-matrix coordinates.
//!
//! Amplitudes are expressed in the eigenbasis of `σ_z`: `alpha = ⟨+|ψ⟩`,
//! `beta = ⟨−|ψ⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|alpha|² + |beta|² = 1` for every state handed out by this crate.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Normalized spin-½ wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    alpha: Complex64,
    beta: Complex64,
}

impl SpinState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid("state", "amplitudes must be finite"));
        }
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
        if norm_sqr == 0.0 {
            return Err(Error::ZeroVector);
        }
        // Rescaling an already normalized pair would only perturb the last bits,
        // which breaks bit-exact replay from printed amplitudes.
        if (norm_sqr - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { alpha, beta });
        }
        let norm = norm_sqr.sqrt();
        Ok(Self { alpha: alpha / norm, beta: beta / norm })
    }

    /// Wraps amplitudes already known to be normalized. Only for hot loops that
    /// normalize themselves.
    #[inline]
    pub(crate) fn from_normalized(alpha: Complex64, beta: Complex64) -> Self {
        debug_assert!((alpha.norm_sqr() + beta.norm_sqr() - 1.0).abs() < 1e-9);
        Self { alpha, beta }
    }

    /// `|+⟩`
    pub fn plus() -> Self {
        Self { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) }
    }

    /// `|−⟩`
    pub fn minus() -> Self {
        Self { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(1.0, 0.0) }
    }

    /// `√(3/4)|+⟩ + √(1/4)|−⟩`, the initial state used by every experiment
    /// unless configured otherwise.
    pub fn reference_initial() -> Self {
        Self {
            alpha: Complex64::new(0.75f64.sqrt(), 0.0),
            beta: Complex64::new(0.5, 0.0),
        }
    }

    /// Real-amplitude state with `|alpha|² = p_plus`.
    pub fn from_population(p_plus: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_plus) {
            return Err(Error::invalid("population", format!("{p_plus} not in [0, 1]")));
        }
        Self::new(
            Complex64::new(p_plus.sqrt(), 0.0),
            Complex64::new((1.0 - p_plus).sqrt(), 0.0),
        )
    }

    #[inline]
    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// `|⟨+|ψ⟩|²`
    #[inline]
    pub fn pop_plus(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `|⟨−|ψ⟩|²`
    #[inline]
    pub fn pop_minus(&self) -> f64 {
        self.beta.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    /// Multiplies both amplitudes by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let phase = Complex64::from_polar(1.0, phi);
        Self { alpha: self.alpha * phase, beta: self.beta * phase }
    }
}

/// `⟨ψ|σ_z|ψ⟩ = |alpha|² − |beta|²`
#[inline]
pub fn expect_sigma_z(state: &SpinState) -> f64 {
    2.0 * state.pop_plus() - 1.0
}

/// `⟨+|ψ⟩⟨ψ|−⟩ = alpha · conj(beta)`
#[inline]
pub fn coherence(state: &SpinState) -> Complex64 {
    state.alpha * state.beta.conj()
}

/// Pure-state density matrix in `(x, y, z)` form.
pub fn to_density_params(state: &SpinState) -> DensityParams {
    let c = coherence(state);
    DensityParams { x: state.pop_plus(), y: c.re, z: c.im }
}

/// Bloch vector `(sx, sy, sz)` with `sy = −2·Im(alpha·conj(beta))`.
pub fn bloch_coordinates(state: &SpinState) -> [f64; 3] {
    let c = coherence(state);
    [2.0 * c.re, -2.0 * c.im, expect_sigma_z(state)]
}

/// Hamiltonian frequency and collapse coupling, both in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(omega: f64, gamma: f64) -> Result<Self> {
        let p = Self { omega, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::invalid("omega", format!("{} must be finite and >= 0", self.omega)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("{} must be finite and >= 0", self.gamma)));
        }
        Ok(())
    }
}

/// Density matrix `[[x, y + iz], [y − iz, 1 − x]]` in the `σ_z` eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl DensityParams {
    pub const MAXIMALLY_MIXED: Self = Self { x: 0.5, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Self { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::invalid("density", "components must be finite"));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid("density.x", format!("{x} not in [0, 1]")));
        }
        if p.purity_excess() > 1e-12 {
            return Err(Error::invalid("density", "matrix is not positive semidefinite"));
        }
        Ok(p)
    }

    /// `(x − ½)² + y² + z² − ¼`: zero for pure states, negative for mixed ones,
    /// positive only for unphysical matrices.
    pub fn purity_excess(&self) -> f64 {
        (self.x - 0.5).powi(2) + self.y * self.y + self.z * self.z - 0.25
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs()).max((self.z - other.z).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn balanced() -> SpinState {
        SpinState::new(c(1.0, 0.0), c(1.0, 0.0)).unwrap()
    }

    fn balanced_imag() -> SpinState {
        SpinState::new(c(1.0, 0.0), c(0.0, 1.0)).unwrap()
    }

    #[test]
    fn sigma_z_examples() {
        assert_eq!(expect_sigma_z(&SpinState::plus()), 1.0);
        assert_abs_diff_eq!(expect_sigma_z(&balanced()), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(expect_sigma_z(&SpinState::reference_initial()), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence(&SpinState::plus()), c(0.0, 0.0));
        let r = coherence(&SpinState::reference_initial());
        assert_abs_diff_eq!(r.re, 3f64.sqrt() / 4.0, epsilon = 1e-15);
        assert_eq!(r.im, 0.0);
        let q = coherence(&balanced_imag());
        assert_abs_diff_eq!(q.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn density_params_examples() {
        assert_eq!(to_density_params(&SpinState::plus()), DensityParams { x: 1.0, y: 0.0, z: 0.0 });
        let d = to_density_params(&SpinState::reference_initial());
        assert_abs_diff_eq!(d.x, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y, 0.4330127018922193, epsilon = 1e-15);
        assert_eq!(d.z, 0.0);
        let d = to_density_params(&balanced_imag());
        assert_abs_diff_eq!(d.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.z, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn bloch_examples() {
        assert_eq!(bloch_coordinates(&SpinState::plus()), [0.0, 0.0, 1.0]);
        let b = bloch_coordinates(&balanced());
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], 0.0, epsilon = 1e-15);
        let b = bloch_coordinates(&SpinState::reference_initial());
        assert_abs_diff_eq!(b[0], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_zero_and_non_finite() {
        assert_eq!(SpinState::new(c(0.0, 0.0), c(0.0, 0.0)), Err(Error::ZeroVector));
        assert!(SpinState::new(c(f64::NAN, 0.0), c(1.0, 0.0)).is_err());
        assert!(ModelParams::new(1.0, -1.0).is_err());
        assert!(ModelParams::new(f64::INFINITY, 1.0).is_err());
        assert!(DensityParams::new(1.0, 0.1, 0.0).is_err());
        assert!(DensityParams::new(0.5, 0.0, 0.0).is_ok());
    }

    fn arb_state() -> impl Strategy<Value = SpinState> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
            .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-6)
            .prop_map(|(a, b, cc, d)| SpinState::new(c(a, b), c(cc, d)).unwrap())
    }

    proptest! {
        #[test]
        fn constructed_states_are_normalized(s in arb_state()) {
            prop_assert!((s.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE);
            prop_assert!((0.0..=1.0).contains(&s.pop_plus()));
            prop_assert!((0.0..=1.0).contains(&s.pop_minus()));
        }

        #[test]
        fn pure_states_saturate_positivity(s in arb_state()) {
            let d = to_density_params(&s);
            prop_assert!(d.purity_excess().abs() <= 1e-10);
            prop_assert_eq!(expect_sigma_z(&s), 2.0 * d.x - 1.0);
            let b = bloch_coordinates(&s);
            prop_assert!((b[0] * b[0] + b[1] * b[1] + b[2] * b[2] - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn observables_ignore_global_phase(s in arb_state(), phi in -10.0..10.0f64) {
            let t = s.with_global_phase(phi);
            prop_assert!((expect_sigma_z(&s) - expect_sigma_z(&t)).abs() <= 1e-12);
            prop_assert!((coherence(&s).norm() - coherence(&t).norm()).abs() <= 1e-12);
            prop_assert!((to_density_params(&s).x - to_density_params(&t).x).abs() <= 1e-12);
            let (b1, b2) = (bloch_coordinates(&s), bloch_coordinates(&t));
            for k in 0..3 {
                prop_assert!((b1[k] - b2[k]).abs() <= 1e-12);
            }
        }
    }
}
