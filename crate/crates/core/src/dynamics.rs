//! Time integration of the dimer in its three flavours: static gain and loss,
//! memristive gain and loss, and meminductive coupling.
//!
//! The primary path integrates the physical Kirchhoff variables `phi` with a
//! fixed-step classical Runge-Kutta scheme. The energy-density path
//! ([`integrate_psi`]) evolves `psi = A^{1/2} phi` under the effective
//! Hamiltonian and is kept as an independent cross-check.

use std::f64::consts::TAU;

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{circuit_energy, heff_matrix, CMatrix5, CircuitParams, PhiState};
use crate::error::ParamError;
use crate::memory::{clamp_state, Meminductor, Memristor, DEFAULT_CLAMP_EPSILON};

/// Which circuit is integrated, together with its memory element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemVariant {
    /// Fixed dimensionless gain-loss strength `Gamma` (may be negative, which
    /// swaps the roles of the two tanks).
    Static { gamma: f64 },
    /// Memristive loss with an instantaneously matched gain resistor.
    Memristive(Memristor),
    /// Meminductive coupling with fixed gain-loss strength `Gamma`.
    Meminductive { device: Meminductor, gamma: f64 },
}

impl SystemVariant {
    pub fn has_memory(&self) -> bool {
        !matches!(self, SystemVariant::Static { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSettings {
    /// Step size in units of `1 / omega0`.
    pub dt: f64,
    /// End time in units of `1 / omega0`.
    pub t_end: f64,
    /// Record every `decimation`-th step.
    pub decimation: usize,
    pub clamp_epsilon: f64,
    /// Stop once `E(t) / E(0)` exceeds this ratio.
    pub divergence_cutoff: f64,
    /// Maximum number of step halvings when a step overshoots a boundary of
    /// the memory variable by more than `10 * clamp_epsilon`.
    pub max_halvings: u32,
    /// Static dimer only: instead of stopping at the divergence cutoff,
    /// rescale the state and keep integrating. Exact because the static
    /// dimer is linear; the scale is tracked in [`Trajectory::log_scale`].
    pub rescale_linear: bool,
}

impl IntegrationSettings {
    /// Settings expressed in oscillation periods `T0 = 2 pi`.
    pub fn in_periods(steps_per_period: usize, periods: f64) -> Self {
        Self {
            dt: TAU / steps_per_period as f64,
            t_end: periods * TAU,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidSettings(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return bad(format!("t_end ({}) must be at least dt ({})", self.t_end, self.dt));
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1".into());
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon <= 1e-3) {
            return bad(format!(
                "clamp epsilon must lie in (0, 1e-3], got {}",
                self.clamp_epsilon
            ));
        }
        if self.divergence_cutoff.is_nan() || self.divergence_cutoff <= 1.0 {
            return bad(format!(
                "divergence cutoff must exceed 1, got {}",
                self.divergence_cutoff
            ));
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil() as u64
    }
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            dt: TAU / 500.0,
            t_end: 200.0 * TAU,
            decimation: 10,
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
            divergence_cutoff: 1e12,
            max_halvings: 4,
            rescale_linear: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    /// Energy exceeded the divergence cutoff.
    EnergyCutoff,
}

/// Recorded samples of one integration run. Times are in units of `1/omega0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhiState>,
    /// `x(t)` or `y(t)`; absent for the static dimer.
    pub memory: Option<Vec<f64>>,
    pub energy: Vec<f64>,
    /// Instantaneous and running-average gain-loss rate; absent for the
    /// static dimer.
    pub gamma_inst: Option<Vec<f64>>,
    pub gamma_avg: Option<Vec<f64>>,
    /// `ln` of the factor removed from `energy` by rescaling; present only
    /// when [`IntegrationSettings::rescale_linear`] was used.
    pub log_scale: Option<Vec<f64>>,
    /// Integration steps taken (not counting retried sub-steps).
    pub steps: u64,
    pub stop: StopReason,
}

impl Trajectory {
    fn with_capacity(n: usize, memory: bool, rescaled: bool) -> Self {
        let opt = |on: bool| if on { Some(Vec::with_capacity(n)) } else { None };
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            memory: opt(memory),
            energy: Vec::with_capacity(n),
            gamma_inst: opt(memory),
            gamma_avg: opt(memory),
            log_scale: opt(rescaled),
            steps: 0,
            stop: StopReason::Completed,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn diverged(&self) -> bool {
        self.stop == StopReason::EnergyCutoff
    }

    /// `ln E(t)` including any removed rescaling factor.
    pub fn log_energy(&self) -> Vec<f64> {
        match &self.log_scale {
            Some(ls) => self.energy.iter().zip(ls).map(|(e, l)| e.ln() + l).collect(),
            None => self.energy.iter().map(|e| e.ln()).collect(),
        }
    }

    /// Writes the trajectory as CSV with time in units of `period`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, period: f64) -> std::io::Result<()> {
        writeln!(w, "t,V1,V2,I1,I2,Ic,mem,E,gamma_inst,gamma_avg")?;
        let opt = |v: &Option<Vec<f64>>, k: usize| v.as_ref().map(|s| format!("{:e}", s[k])).unwrap_or_default();
        for k in 0..self.len() {
            let scale = self.log_scale.as_ref().map_or(1.0, |l| (0.5 * l[k]).exp());
            let s = self.states[k].scaled(scale);
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{}",
                self.times[k] / period,
                s.v1,
                s.v2,
                s.i1,
                s.i2,
                s.ic,
                opt(&self.memory, k),
                self.energy[k] * scale * scale,
                opt(&self.gamma_inst, k),
                opt(&self.gamma_avg, k),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("state became non-finite at t = {time}")]
    Diverged { time: f64, partial: Box<Trajectory> },
}

fn kirchhoff_rates(phi: &PhiState, c: f64, l: f64, inv_lc: f64, gamma_rate: f64) -> PhiState {
    PhiState {
        v1: -gamma_rate * phi.v1 - phi.i1 / c - phi.ic / c,
        v2: gamma_rate * phi.v2 - phi.i2 / c + phi.ic / c,
        i1: phi.v1 / l,
        i2: phi.v2 / l,
        ic: (phi.v1 - phi.v2) * inv_lc,
    }
}

/// Kirchhoff right-hand side of the static dimer with strength `Gamma`.
pub fn derivative_static(phi: &PhiState, p: &CircuitParams, gamma: f64) -> PhiState {
    kirchhoff_rates(phi, p.c(), p.l(), p.inv_lc(), gamma * p.omega0())
}

/// Right-hand side of the memristive dimer: loss and matched gain follow
/// `gamma(x)`, the state drifts with the loss-side voltage.
pub fn derivative_memristive(phi: &PhiState, x: f64, m: &Memristor, p: &CircuitParams) -> (PhiState, f64) {
    let rate = kirchhoff_rates(phi, p.c(), p.l(), p.inv_lc(), m.gamma_of_x(x, p.c()));
    (rate, p.omega0() * m.rate(x, phi.v1))
}

/// Right-hand side of the meminductive dimer. Flux `L_c(y) Ic` obeys
/// Faraday's law, which adds a back-action term to `dIc/dt`.
pub fn derivative_meminductive(
    phi: &PhiState,
    y: f64,
    md: &Meminductor,
    p: &CircuitParams,
    gamma: f64,
) -> (PhiState, f64) {
    let lc = md.inductance_clamped(y);
    let dydt = p.omega0() * md.rate(y, phi.ic);
    let mut rate = kirchhoff_rates(phi, p.c(), p.l(), 1.0 / lc, gamma * p.omega0());
    rate.ic -= md.delta_l() / lc * dydt * phi.ic;
    (rate, dydt)
}

/// Effective Hamiltonian of the meminductive dimer including the gauge term
/// `-(i/2) d/dt ln L_c(y)` in the coupling slot.
pub fn build_hbar_eff(p: &CircuitParams, md: &Meminductor, gamma: f64, y: f64, dydt: f64) -> CMatrix5 {
    let lc = md.inductance_clamped(y);
    let mu = (p.l() / lc).sqrt();
    let mut h = heff_matrix(mu, gamma, p.omega0());
    h[(4, 4)] += Complex64::new(0.0, -0.5 * md.delta_l() * dydt / lc);
    h
}

fn rk4_step<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + s * k[i]) };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * h));
    let k3 = f(&add(y, &k2, 0.5 * h));
    let k4 = f(&add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// What a single integration route exposes to the shared driver loop.
trait Route {
    /// Right-hand side on the combined state (5 circuit components + memory).
    fn rhs(&self, y: &[f64; 6]) -> [f64; 6];
    /// Physical state and energy of a combined state.
    fn observe(&self, y: &[f64; 6]) -> (PhiState, f64);
    /// Instantaneous gain-loss rate, when it is a memory-dependent quantity.
    fn gamma_rate(&self, y: &[f64; 6]) -> Option<f64>;
    /// Called after the memory variable was clamped from `raw` to `y[5]`.
    fn on_clamp(&self, _y: &mut [f64; 6], _raw: f64) {}
}

struct Stepper<'a, R> {
    route: &'a R,
    memory: bool,
    epsilon: f64,
    max_halvings: u32,
}

impl<R: Route> Stepper<'_, R> {
    fn advance(&self, y: &[f64; 6], h: f64, depth: u32) -> [f64; 6] {
        let mut next = rk4_step(&|s: &[f64; 6]| self.route.rhs(s), y, h);
        if self.memory {
            let overshoot = next[5] < -10.0 * self.epsilon || next[5] > 1.0 + 10.0 * self.epsilon;
            if overshoot && depth < self.max_halvings {
                let mid = self.advance(y, 0.5 * h, depth + 1);
                return self.advance(&mid, 0.5 * h, depth + 1);
            }
            let raw = next[5];
            next[5] = clamp_state(raw, self.epsilon);
            if next[5] != raw {
                self.route.on_clamp(&mut next, raw);
            }
        }
        next
    }
}

fn drive<R: Route>(
    route: &R,
    memory: bool,
    y0: [f64; 6],
    s: &IntegrationSettings,
) -> Result<Trajectory, DynamicsError> {
    s.validate()?;
    if s.rescale_linear && memory {
        return Err(DynamicsError::InvalidSettings(
            "rescaling is exact only for the static dimer".into(),
        ));
    }
    let n_steps = s.step_count();
    let mut traj = Trajectory::with_capacity((n_steps as usize) / s.decimation + 1, memory, s.rescale_linear);
    let stepper = Stepper {
        route,
        memory,
        epsilon: s.clamp_epsilon,
        max_halvings: s.max_halvings,
    };

    let mut y = y0;
    if memory {
        y[5] = clamp_state(y[5], s.clamp_epsilon);
    }
    let (phi, e0) = route.observe(&y);
    let g0 = route.gamma_rate(&y);
    let mut gamma_integral = 0.0;
    let mut gamma_prev = g0.unwrap_or(0.0);

    let mut log_scale = 0.0;
    let record =
        |traj: &mut Trajectory, t: f64, y: &[f64; 6], phi: PhiState, e: f64, g: Option<f64>, avg: f64, ls: f64| {
            traj.times.push(t);
            traj.states.push(phi);
            traj.energy.push(e);
            if let Some(l) = traj.log_scale.as_mut() {
                l.push(ls);
            }
            if let Some(m) = traj.memory.as_mut() {
                m.push(y[5]);
            }
            if let (Some(gi), Some(ga), Some(g)) = (traj.gamma_inst.as_mut(), traj.gamma_avg.as_mut(), g) {
                gi.push(g);
                ga.push(avg);
            }
        };
    record(&mut traj, 0.0, &y, phi, e0, g0, gamma_prev, 0.0);

    for k in 1..=n_steps {
        y = stepper.advance(&y, s.dt, 0);
        let t = k as f64 * s.dt;
        traj.steps = k;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::Diverged {
                time: t,
                partial: Box::new(traj),
            });
        }
        let (mut phi, mut e) = route.observe(&y);
        if s.rescale_linear && e0 > 0.0 && e > s.divergence_cutoff * e0 {
            let ratio = e / e0;
            let k = ratio.sqrt().recip();
            for v in &mut y[..5] {
                *v *= k;
            }
            log_scale += ratio.ln();
            (phi, e) = route.observe(&y);
        }
        let g = route.gamma_rate(&y);
        if let Some(g) = g {
            gamma_integral += 0.5 * (gamma_prev + g) * s.dt;
            gamma_prev = g;
        }
        let cutoff = e0 > 0.0 && e > s.divergence_cutoff * e0;
        // the final step is always kept so the stop time does not depend on decimation
        if k % s.decimation as u64 == 0 || cutoff || k == n_steps {
            record(&mut traj, t, &y, phi, e, g, gamma_integral / t, log_scale);
        }
        if cutoff {
            traj.stop = StopReason::EnergyCutoff;
            break;
        }
    }
    Ok(traj)
}

fn combined(phi0: PhiState, mem0: Option<f64>) -> [f64; 6] {
    let a = phi0.to_array();
    [a[0], a[1], a[2], a[3], a[4], mem0.unwrap_or(0.0)]
}

fn split(y: &[f64; 6]) -> PhiState {
    PhiState::new(y[0], y[1], y[2], y[3], y[4])
}

fn join(rate: PhiState, mem_rate: f64) -> [f64; 6] {
    [rate.v1, rate.v2, rate.i1, rate.i2, rate.ic, mem_rate]
}

struct PhiRoute<'a> {
    p: &'a CircuitParams,
    variant: &'a SystemVariant,
}

impl Route for PhiRoute<'_> {
    fn rhs(&self, y: &[f64; 6]) -> [f64; 6] {
        let phi = split(y);
        match self.variant {
            SystemVariant::Static { gamma } => join(derivative_static(&phi, self.p, *gamma), 0.0),
            SystemVariant::Memristive(m) => {
                let (r, dx) = derivative_memristive(&phi, y[5], m, self.p);
                join(r, dx)
            }
            SystemVariant::Meminductive { device, gamma } => {
                let (r, dy) = derivative_meminductive(&phi, y[5], device, self.p, *gamma);
                join(r, dy)
            }
        }
    }

    fn observe(&self, y: &[f64; 6]) -> (PhiState, f64) {
        let phi = split(y);
        let form = match self.variant {
            SystemVariant::Meminductive { device, .. } => self.p.energy_form_with_lc(device.inductance_clamped(y[5])),
            _ => self.p.energy_form(),
        };
        (phi, circuit_energy(phi, &form))
    }

    fn gamma_rate(&self, y: &[f64; 6]) -> Option<f64> {
        gamma_rate_of(self.p, self.variant, y[5])
    }

    // The coupling flux L_c(y) Ic, with L_c read as the observer does, must
    // not jump when y is pinned at a boundary.
    fn on_clamp(&self, y: &mut [f64; 6], raw: f64) {
        if let SystemVariant::Meminductive { device, .. } = self.variant {
            y[4] *= device.inductance_clamped(raw) / device.inductance_clamped(y[5]);
        }
    }
}

fn gamma_rate_of(p: &CircuitParams, variant: &SystemVariant, mem: f64) -> Option<f64> {
    match variant {
        SystemVariant::Static { .. } => None,
        SystemVariant::Memristive(m) => Some(m.gamma_of_x(mem, p.c())),
        SystemVariant::Meminductive { gamma, .. } => Some(gamma * p.omega0()),
    }
}

fn check_memory_start(variant: &SystemVariant, mem0: Option<f64>) -> Result<Option<f64>, DynamicsError> {
    if !variant.has_memory() {
        return Ok(None);
    }
    match mem0 {
        Some(m) if m > 0.0 && m < 1.0 => Ok(Some(m)),
        Some(m) => Err(ParamError::Invalid(format!("initial memory state must lie in (0, 1), got {m}")).into()),
        None => Err(ParamError::Invalid("memory variant requires an initial memory state".into()).into()),
    }
}

/// Integrates the circuit in physical variables.
///
/// `mem0` is the initial `x` or `y` and is ignored for the static dimer.
pub fn integrate(
    p: &CircuitParams,
    variant: &SystemVariant,
    phi0: PhiState,
    mem0: Option<f64>,
    settings: &IntegrationSettings,
) -> Result<Trajectory, DynamicsError> {
    let mem0 = check_memory_start(variant, mem0)?;
    let route = PhiRoute { p, variant };
    drive(&route, variant.has_memory(), combined(phi0, mem0), settings)
}

struct PsiRoute<'a> {
    p: &'a CircuitParams,
    variant: &'a SystemVariant,
}

impl PsiRoute<'_> {
    fn weights(&self, mem: f64) -> [f64; 5] {
        match self.variant {
            SystemVariant::Meminductive { device, .. } => {
                self.p.energy_form_with_lc(device.inductance_clamped(mem)).weights()
            }
            _ => self.p.energy_form().weights(),
        }
    }
}

impl Route for PsiRoute<'_> {
    fn rhs(&self, y: &[f64; 6]) -> [f64; 6] {
        let psi = Vector5::new(y[0], y[1], y[2], y[3], y[4]);
        let w = self.weights(y[5]);
        let (h, mem_rate) = match self.variant {
            SystemVariant::Static { gamma } => (heff_matrix(self.p.mu(), *gamma, self.p.omega0()), 0.0),
            SystemVariant::Memristive(m) => {
                let v1 = psi[0] / w[0].sqrt();
                let gamma = m.gamma_of_x(y[5], self.p.c()) / self.p.omega0();
                (
                    heff_matrix(self.p.mu(), gamma, self.p.omega0()),
                    self.p.omega0() * m.rate(y[5], v1),
                )
            }
            SystemVariant::Meminductive { device, gamma } => {
                let ic = psi[4] / w[4].sqrt();
                let dydt = self.p.omega0() * device.rate(y[5], ic);
                (build_hbar_eff(self.p, device, *gamma, y[5], dydt), dydt)
            }
        };
        // i d(psi)/dt = H psi  =>  d(psi)/dt = Re(-i H) psi for a real psi
        let g: Matrix5<f64> = h.map(|v| (Complex64::new(0.0, -1.0) * v).re);
        let d = g * psi;
        [d[0], d[1], d[2], d[3], d[4], mem_rate]
    }

    fn observe(&self, y: &[f64; 6]) -> (PhiState, f64) {
        let w = self.weights(y[5]);
        let phi = PhiState::from_array(std::array::from_fn(|k| y[k] / w[k].sqrt()));
        (phi, y[..5].iter().map(|v| v * v).sum())
    }

    fn gamma_rate(&self, y: &[f64; 6]) -> Option<f64> {
        gamma_rate_of(self.p, self.variant, y[5])
    }

    // same flux-preserving clamp as the physical route, in psi_5 = sqrt(L_c / 2) Ic
    fn on_clamp(&self, y: &mut [f64; 6], raw: f64) {
        if let SystemVariant::Meminductive { device, .. } = self.variant {
            y[4] *= (device.inductance_clamped(raw) / device.inductance_clamped(y[5])).sqrt();
        }
    }
}

/// Integrates the energy-density vector `psi = A^{1/2} phi` under the
/// effective Hamiltonian. Returned states are mapped back to `phi`.
pub fn integrate_psi(
    p: &CircuitParams,
    variant: &SystemVariant,
    phi0: PhiState,
    mem0: Option<f64>,
    settings: &IntegrationSettings,
) -> Result<Trajectory, DynamicsError> {
    let mem0 = check_memory_start(variant, mem0)?;
    let route = PsiRoute { p, variant };
    let mut y = combined(phi0, mem0);
    let w = route.weights(y[5]);
    for k in 0..5 {
        y[k] *= w[k].sqrt();
    }
    drive(&route, variant.has_memory(), y, settings)
}
