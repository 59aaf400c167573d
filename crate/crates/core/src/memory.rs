//! Constitutive laws of the memory elements.
//!
//! Both devices are two-region composites whose internal fraction drifts
//! with the drive (voltage for the memristor, current for the meminductor),
//! throttled by the polynomial window `F_p(s) = 1 - (2s - 1)^(2p)`.
//!
//! Rates are returned per unit of `omega0 t`. Voltages are measured in `v0`
//! and currents in `i0`, the scales at which the internal state traverses the
//! whole device within one oscillation period.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Default distance kept between a state fraction and the fixed points 0, 1.
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

impl TryFrom<i8> for Polarity {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(format!("polarity must be +1 or -1, got {other}")),
        }
    }
}

impl From<Polarity> for i8 {
    fn from(p: Polarity) -> i8 {
        match p {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

/// Window `F_p(s) = 1 - (2s - 1)^(2p)`.
pub fn window(s: f64, p: u32) -> f64 {
    1.0 - (2.0 * s - 1.0).powi(2 * p as i32)
}

/// Pins a state fraction to `[epsilon, 1 - epsilon]`.
pub fn clamp_state(candidate: f64, epsilon: f64) -> f64 {
    candidate.max(epsilon).min(1.0 - epsilon)
}

fn unit_interval(name: &'static str, v: f64) -> Result<(), ParamError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ParamError::OutOfUnitInterval { name, value: v })
    }
}

/// `R(x) = x R_on + (1 - x) R_off`.
pub fn memristance(x: f64, r_on: f64, r_off: f64) -> Result<f64, ParamError> {
    unit_interval("x", x)?;
    Ok(x * r_on + (1.0 - x) * r_off)
}

/// `L_c(y) = y L_> + (1 - y) L_<`.
pub fn meminductance(y: f64, l_small: f64, l_large: f64) -> Result<f64, ParamError> {
    unit_interval("y", y)?;
    Ok(y * l_large + (1.0 - y) * l_small)
}

/// Doped/undoped thin-film memristor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Memristor {
    r_on: f64,
    r_off: f64,
    polarity: Polarity,
    p: u32,
    v0: f64,
}

impl Memristor {
    pub fn new(r_on: f64, r_off: f64, polarity: Polarity, p: u32) -> Result<Self, ParamError> {
        if !(r_on.is_finite() && r_on > 0.0) {
            return Err(ParamError::NotPositive {
                name: "r_on",
                value: r_on,
            });
        }
        if !(r_off.is_finite() && r_off >= r_on) {
            return Err(ParamError::Invalid(format!(
                "r_off ({r_off}) must be at least r_on ({r_on})"
            )));
        }
        if p == 0 {
            return Err(ParamError::Invalid("window exponent p must be at least 1".into()));
        }
        Ok(Self {
            r_on,
            r_off,
            polarity,
            p,
            v0: 1.0,
        })
    }

    /// Device whose dissipation rate `1 / (R C)` spans `[gamma_off, gamma_on]`.
    pub fn from_gamma_bounds(
        gamma_off: f64,
        gamma_on: f64,
        c: f64,
        polarity: Polarity,
        p: u32,
    ) -> Result<Self, ParamError> {
        if !(gamma_off.is_finite() && gamma_off > 0.0) {
            return Err(ParamError::NotPositive {
                name: "gamma_off",
                value: gamma_off,
            });
        }
        if !(gamma_on.is_finite() && gamma_on >= gamma_off) {
            return Err(ParamError::Invalid(format!(
                "gamma_on ({gamma_on}) must be at least gamma_off ({gamma_off})"
            )));
        }
        Self::new(1.0 / (gamma_on * c), 1.0 / (gamma_off * c), polarity, p)
    }

    pub fn r_on(&self) -> f64 {
        self.r_on
    }
    pub fn r_off(&self) -> f64 {
        self.r_off
    }
    pub fn polarity(&self) -> Polarity {
        self.polarity
    }
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    /// Resistance at a state already known to lie in `[0, 1]`.
    pub(crate) fn resistance_unchecked(&self, x: f64) -> f64 {
        x * self.r_on + (1.0 - x) * self.r_off
    }

    pub fn resistance(&self, x: f64) -> Result<f64, ParamError> {
        memristance(x, self.r_on, self.r_off)
    }

    /// `gamma(x) = 1 / (R(x) C)`.
    pub fn gamma_of_x(&self, x: f64, c: f64) -> f64 {
        1.0 / (self.resistance_unchecked(x.clamp(0.0, 1.0)) * c)
    }

    pub fn gamma_on(&self, c: f64) -> f64 {
        1.0 / (self.r_on * c)
    }

    pub fn gamma_off(&self, c: f64) -> f64 {
        1.0 / (self.r_off * c)
    }

    /// `dx / d(omega0 t) = eta F_p(x) (R_on / R(x)) (V1 / v0) / (2 pi)`.
    ///
    /// The state is read through `[0, 1]` so that intermediate Runge-Kutta
    /// stages slightly past a boundary see the fixed point.
    pub fn rate(&self, x: f64, v1: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.polarity.sign() * window(x, self.p) * (self.r_on / self.resistance_unchecked(x)) * (v1 / self.v0)
            / std::f64::consts::TAU
    }
}

pub fn memristor_rate(x: f64, v1: f64, m: &Memristor) -> f64 {
    m.rate(x, v1)
}

pub fn gamma_of_x(x: f64, m: &Memristor, c: f64) -> f64 {
    m.gamma_of_x(x, c)
}

/// Coupling inductor with a drifting magnetic-core fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meminductor {
    l_small: f64,
    l_large: f64,
    polarity: Polarity,
    p: u32,
    i0: f64,
}

impl Meminductor {
    pub fn new(l_small: f64, l_large: f64, polarity: Polarity, p: u32) -> Result<Self, ParamError> {
        if !(l_small.is_finite() && l_small > 0.0) {
            return Err(ParamError::NotPositive {
                name: "l_small",
                value: l_small,
            });
        }
        if !(l_large.is_finite() && l_large >= l_small) {
            return Err(ParamError::Invalid(format!(
                "l_large ({l_large}) must be at least l_small ({l_small})"
            )));
        }
        if p == 0 {
            return Err(ParamError::Invalid("window exponent p must be at least 1".into()));
        }
        Ok(Self {
            l_small,
            l_large,
            polarity,
            p,
            i0: 1.0,
        })
    }

    /// Device spanning couplings `mu_greater <= mu <= mu_less`, i.e.
    /// `L_> = L / mu_greater^2` and `L_< = L / mu_less^2`.
    pub fn from_couplings(
        mu_greater: f64,
        mu_less: f64,
        l: f64,
        polarity: Polarity,
        p: u32,
    ) -> Result<Self, ParamError> {
        if !(mu_greater.is_finite() && mu_greater > 0.0) {
            return Err(ParamError::NotPositive {
                name: "mu_greater",
                value: mu_greater,
            });
        }
        if !(mu_less.is_finite() && mu_less >= mu_greater) {
            return Err(ParamError::Invalid(format!(
                "mu_less ({mu_less}) must be at least mu_greater ({mu_greater})"
            )));
        }
        Self::new(l / (mu_less * mu_less), l / (mu_greater * mu_greater), polarity, p)
    }

    pub fn l_small(&self) -> f64 {
        self.l_small
    }
    pub fn l_large(&self) -> f64 {
        self.l_large
    }
    pub fn delta_l(&self) -> f64 {
        self.l_large - self.l_small
    }
    pub fn polarity(&self) -> Polarity {
        self.polarity
    }
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn i0(&self) -> f64 {
        self.i0
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    pub fn inductance(&self, y: f64) -> Result<f64, ParamError> {
        meminductance(y, self.l_small, self.l_large)
    }

    /// Inductance with the state read through `[0, 1]`.
    pub fn inductance_clamped(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        y * self.l_large + (1.0 - y) * self.l_small
    }

    /// `dy / d(omega0 t) = eta F_p(y) (Ic / i0)`.
    pub fn rate(&self, y: f64, ic: f64) -> f64 {
        self.polarity.sign() * window(y.clamp(0.0, 1.0), self.p) * (ic / self.i0)
    }
}

pub fn meminductor_rate(y: f64, ic: f64, md: &Meminductor) -> f64 {
    md.rate(y, ic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn memristance_endpoints_and_midpoint() {
        assert_eq!(memristance(1.0, 1.0, 100.0).unwrap(), 1.0);
        assert_eq!(memristance(0.0, 1.0, 100.0).unwrap(), 100.0);
        assert_eq!(memristance(0.5, 1.0, 100.0).unwrap(), 50.5);
        assert!(memristance(1.1, 1.0, 100.0).is_err());
        assert!(memristance(-0.1, 1.0, 100.0).is_err());
    }

    #[test]
    fn window_values() {
        for p in [1, 2, 5] {
            assert_eq!(window(0.5, p), 1.0);
            assert_eq!(window(0.0, p), 0.0);
            assert_eq!(window(1.0, p), 0.0);
        }
        assert_eq!(window(0.25, 1), 0.75);
    }

    #[test]
    fn memristor_rate_zero_drive_and_boundaries() {
        let m = Memristor::new(1.0, 100.0, Polarity::Positive, 1).unwrap();
        assert_eq!(m.rate(0.5, 0.0), 0.0);
        assert_eq!(m.rate(0.0, 7.0), 0.0);
        assert_eq!(m.rate(1.0, -7.0), 0.0);
        assert!(m.rate(1e-9, 7.0).abs() < 1e-8);
    }

    /// Dimensional route: integrate `dx/dt = eta F(x) V / (R(x) Q0)` in SI-like
    /// units with explicit film thickness and dopant mobility, then convert the
    /// rate to `d/d(omega0 t)`.
    #[test]
    fn memristor_rate_matches_dimensional_form() {
        let d = 5e-9; // m
        let mobility = 1e-14; // m^2 / (V s)
        let r_on = 1e3; // ohm
        let r_off = 1e5;
        let omega0 = 2.0e6; // rad / s
        let q0 = d * d / (mobility * r_on);
        let v0 = d * d * omega0 / (std::f64::consts::TAU * mobility);
        let x = 0.5;
        let v1 = v0;
        let r = x * r_on + (1.0 - x) * r_off;
        let dxdt_si = window(x, 1) * v1 / (r * q0);
        let per_omega_t = dxdt_si / omega0;

        let m = Memristor::new(1.0, 100.0, Polarity::Positive, 1).unwrap();
        let got = m.rate(0.5, 1.0);
        assert!((got - per_omega_t).abs() < 1e-15);
        assert!((got - 1.0 / 50.5 / std::f64::consts::TAU).abs() < 1e-15);
        assert!((got - 3.1515e-3).abs() < 1e-7);
    }

    #[test]
    fn gamma_bounds() {
        let m = Memristor::new(0.5, 10.0, Polarity::Positive, 1).unwrap();
        assert_eq!(m.gamma_of_x(1.0, 1.0), m.gamma_on(1.0));
        assert_eq!(m.gamma_of_x(0.0, 1.0), m.gamma_off(1.0));
        assert_eq!(m.gamma_on(1.0), 2.0);
        assert_eq!(m.gamma_off(1.0), 0.1);
    }

    #[test]
    fn gamma_bounds_solved_from_targets() {
        let gpt = crate::circuit::gamma_pt(0.3, 1.0);
        let m = Memristor::from_gamma_bounds(0.3 * gpt, 2.0 * gpt, 1.0, Polarity::Positive, 1).unwrap();
        assert!((m.r_off() / m.r_on() - 2.0 / 0.3).abs() < 1e-12);
        assert!((m.gamma_of_x(1.0, 1.0) - 2.0 * gpt).abs() < 1e-15);
        assert!((m.gamma_of_x(0.0, 1.0) - 0.3 * gpt).abs() < 1e-15);
    }

    #[test]
    fn meminductance_values() {
        assert_eq!(meminductance(0.0, 2.0, 3.0).unwrap(), 2.0);
        assert_eq!(meminductance(1.0, 2.0, 3.0).unwrap(), 3.0);
        assert_eq!(meminductance(0.5, 2.0, 3.0).unwrap(), 2.5);
        assert!(meminductance(1.5, 2.0, 3.0).is_err());
    }

    #[test]
    fn meminductor_rate_values() {
        let md = Meminductor::new(1.0, 2.0, Polarity::Positive, 1).unwrap();
        assert_eq!(md.rate(0.5, 0.0), 0.0);
        assert_eq!(md.rate(0.0, 3.0), 0.0);
        assert_eq!(md.rate(1.0, 3.0), 0.0);
        assert_eq!(md.rate(0.5, 1.0), 1.0);
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_state(1.0000001, 1e-6), 1.0 - 1e-6);
        assert_eq!(clamp_state(0.5, 1e-6), 0.5);
        assert_eq!(clamp_state(-0.02, 1e-6), 1e-6);
    }

    #[test]
    fn invalid_devices() {
        assert!(Memristor::new(2.0, 1.0, Polarity::Positive, 1).is_err());
        assert!(Memristor::new(1.0, 2.0, Polarity::Positive, 0).is_err());
        assert!(Meminductor::new(2.0, 1.0, Polarity::Positive, 1).is_err());
        assert!(Meminductor::from_couplings(1.0, 0.9, 1.0, Polarity::Positive, 1).is_err());
        assert!(Polarity::try_from(0).is_err());
    }

    proptest! {
        #[test]
        fn window_symmetric(k in 0u32..=(1 << 20), p in 1u32..6) {
            // dyadic grid so that 1 - x is exact
            let x = k as f64 / (1u32 << 20) as f64;
            prop_assert_eq!(window(x, p), window(1.0 - x, p));
            let w = window(x, p);
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn affine_laws_bounded(s in 0.0f64..=1.0, lo in 0.1f64..10.0, span in 0.0f64..100.0) {
            let r = memristance(s, lo, lo + span).unwrap();
            prop_assert!(r >= lo - 1e-12 && r <= lo + span + 1e-12);
            let l = meminductance(s, lo, lo + span).unwrap();
            prop_assert!(l >= lo - 1e-12 && l <= lo + span + 1e-12);
        }

        #[test]
        fn rates_odd_in_drive_and_polarity(s in 0.0f64..=1.0, drive in -50.0f64..50.0, p in 1u32..4) {
            let m = Memristor::new(0.3, 7.0, Polarity::Positive, p).unwrap();
            let mf = m.with_polarity(Polarity::Negative);
            prop_assert_eq!(m.rate(s, -drive), -m.rate(s, drive));
            prop_assert_eq!(mf.rate(s, drive), -m.rate(s, drive));
            let md = Meminductor::new(0.5, 1.5, Polarity::Positive, p).unwrap();
            let mdf = md.with_polarity(Polarity::Negative);
            prop_assert_eq!(md.rate(s, -drive), -md.rate(s, drive));
            prop_assert_eq!(mdf.rate(s, drive), -md.rate(s, drive));
        }

        #[test]
        fn clamp_idempotent(x in -2.0f64..3.0, eps in 1e-9f64..1e-3) {
            let once = clamp_state(x, eps);
            prop_assert_eq!(clamp_state(once, eps), once);
            prop_assert!(once > 0.0 && once < 1.0);
        }
    }
}
