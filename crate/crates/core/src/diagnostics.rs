//! Observables extracted from trajectories: long-time amplification rate,
//! running-average dissipation, phase labels, and the Floquet resonance
//! predictor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::PhiState;
use crate::dynamics::Trajectory;

/// Default phase threshold on the amplification rate, in units of `omega0`.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("trajectory ends at t = {available} but the amplification window needs t = {required}")]
    InsufficientData { required: f64, available: f64 },
    #[error("energy and time series differ in length ({energy} vs {times})")]
    LengthMismatch { energy: usize, times: usize },
    #[error("window length tau must be positive, got {0}")]
    BadTau(f64),
}

/// Maxima of `series` over `[0, tau]` and `[0, 2 tau]`.
fn window_maxima(series: &[f64], times: &[f64], tau: f64) -> Result<(f64, f64), DiagnosticsError> {
    if series.len() != times.len() {
        return Err(DiagnosticsError::LengthMismatch {
            energy: series.len(),
            times: times.len(),
        });
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(DiagnosticsError::BadTau(tau));
    }
    let available = times.last().copied().unwrap_or(0.0);
    // samples are on a grid; tolerate rounding in the final time stamp
    let slack = 1e-9 * tau.max(1.0);
    if available + slack < 2.0 * tau {
        return Err(DiagnosticsError::InsufficientData {
            required: 2.0 * tau,
            available,
        });
    }
    let mut first = f64::NEG_INFINITY;
    let mut both = f64::NEG_INFINITY;
    for (&e, &t) in series.iter().zip(times) {
        if t <= tau + slack {
            first = first.max(e);
        }
        if t <= 2.0 * tau + slack {
            both = both.max(e);
        }
    }
    Ok((first, both))
}

/// `(1/tau) ln[max E(0..2tau) / max E(0..tau)]` over the recorded samples.
pub fn amplification_factor(energy: &[f64], times: &[f64], tau: f64) -> Result<f64, DiagnosticsError> {
    let (first, both) = window_maxima(energy, times, tau)?;
    if first <= 0.0 {
        return Ok(0.0);
    }
    Ok((both / first).ln() / tau)
}

/// Same rate from `ln E(t)`, for runs whose energy exceeds the floating-point
/// range (see [`Trajectory::log_energy`]).
pub fn amplification_factor_log(log_energy: &[f64], times: &[f64], tau: f64) -> Result<f64, DiagnosticsError> {
    let (first, both) = window_maxima(log_energy, times, tau)?;
    if !first.is_finite() {
        return Ok(0.0);
    }
    Ok((both - first) / tau)
}

/// Running time average `(1/t) int_0^t gamma dt'` by the trapezoidal rule.
/// The first entry is the instantaneous value.
pub fn average_gamma(gamma_inst: &[f64], times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(gamma_inst.len());
    let Some(&g0) = gamma_inst.first() else {
        return out;
    };
    out.push(g0);
    let mut integral = 0.0;
    for k in 1..gamma_inst.len().min(times.len()) {
        integral += 0.5 * (gamma_inst[k] + gamma_inst[k - 1]) * (times[k] - times[k - 1]);
        let elapsed = times[k] - times[0];
        out.push(if elapsed > 0.0 {
            integral / elapsed
        } else {
            gamma_inst[k]
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    PTSymmetric,
    PTBroken,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PTSymmetric => "PTSymmetric",
            Phase::PTBroken => "PTBroken",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PTSymmetric" => Ok(Phase::PTSymmetric),
            "PTBroken" => Ok(Phase::PTBroken),
            other => Err(format!("unknown phase label `{other}`")),
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub label: Phase,
    pub lambda_amp: f64,
    /// Window actually used. Shorter than requested when the run was cut off
    /// at the divergence limit, in which case the full recorded span is split
    /// in half.
    pub tau_used: f64,
}

pub fn classify_phase(traj: &Trajectory, tau: f64, threshold: f64) -> Result<PhaseLabel, DiagnosticsError> {
    let tau_used = if traj.diverged() && traj.last_time() < 2.0 * tau {
        0.5 * traj.last_time()
    } else {
        tau
    };
    let lambda_amp = if traj.log_scale.is_some() {
        amplification_factor_log(&traj.log_energy(), &traj.times, tau_used)?
    } else {
        amplification_factor(&traj.energy, &traj.times, tau_used)?
    };
    let label = if lambda_amp > threshold {
        Phase::PTBroken
    } else {
        Phase::PTSymmetric
    };
    Ok(PhaseLabel {
        label,
        lambda_amp,
        tau_used,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceTable {
    pub entries: Vec<(u32, f64)>,
}

/// Couplings at which the drive frequency `omega0` is an odd sub-harmonic of
/// the Hermitian gap, `sqrt(1 + 2 mu_n^2) - 1 = 2n + 1`.
pub fn floquet_resonant_couplings(n_max: u32) -> ResonanceTable {
    let entries = (0..=n_max)
        .map(|n| {
            let k = f64::from(2 * n + 1);
            (n, (k * (k + 2.0) / 2.0).sqrt())
        })
        .collect();
    ResonanceTable { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// Voltage on the lossy capacitor.
    Psi1,
    /// Voltage on the amplifying capacitor (parity image of `Psi1`).
    Psi2,
    /// Current in the lossy inductor.
    Psi3,
    /// Current in the amplifying inductor (parity image of `Psi3`).
    Psi4,
    /// Current in the coupling inductor.
    Chi1,
    /// Explicit `[V1, V2, I1, I2, Ic]`; the amplitude scales it.
    Custom([f64; 5]),
}

/// Physical initial state. Voltages are in `v0`, currents in `i0`; the
/// amplitude is the value of the one nonzero component (sign included).
pub fn make_initial_state(kind: InitialKind, amplitude: f64) -> PhiState {
    let psi1 = PhiState::new(amplitude, 0.0, 0.0, 0.0, 0.0);
    let psi3 = PhiState::new(0.0, 0.0, amplitude, 0.0, 0.0);
    match kind {
        InitialKind::Psi1 => psi1,
        InitialKind::Psi2 => psi1.parity(),
        InitialKind::Psi3 => psi3,
        InitialKind::Psi4 => psi3.parity(),
        InitialKind::Chi1 => PhiState::new(0.0, 0.0, 0.0, 0.0, amplitude),
        InitialKind::Custom(a) => PhiState::from_array(a).scaled(amplitude),
    }
}
