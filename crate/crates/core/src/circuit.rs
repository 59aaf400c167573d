//! Memory-less PT dimer: Kirchhoff generator, energy-density Hamiltonian,
//! symmetry operators and the closed-form spectrum with its two
//! exceptional-point thresholds.
//!
//! Two identical LC tanks are coupled through an inductor `Lc`. Tank 1 carries
//! a loss resistor `R`, tank 2 the matched gain `-R`. The state is
//! `phi = [V1, V2, I1, I2, Ic]` and obeys `i d(phi)/dt = M phi`.

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;

pub type CMatrix5 = Matrix5<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative guard band used when comparing a gain-loss rate to the thresholds.
const THRESHOLD_GUARD: f64 = 1e-12;

/// Element values of the dimer together with the dimensionless combinations
/// derived from them.
///
/// The coupling inductance is `L / mu^2`; `mu = 0` is an uncoupled dimer and
/// stores `lc = +inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    omega0: f64,
    mu: f64,
    gamma: f64,
    c: f64,
    l: f64,
    lc: f64,
}

impl CircuitParams {
    /// Working units: `omega0 = C = L = 1`.
    pub fn new(mu: f64, gamma: f64) -> Result<Self, ParamError> {
        Self::from_elements(1.0, 1.0, mu, gamma)
    }

    /// Builds the parameters from capacitance, inductance, coupling `mu` and
    /// dimensionless gain-loss strength `Gamma = gamma / omega0`.
    pub fn from_elements(c: f64, l: f64, mu: f64, gamma: f64) -> Result<Self, ParamError> {
        positive("C", c)?;
        positive("L", l)?;
        non_negative("mu", mu)?;
        non_negative("Gamma", gamma)?;
        let omega0 = 1.0 / (l * c).sqrt();
        let lc = if mu == 0.0 { f64::INFINITY } else { l / (mu * mu) };
        Ok(Self {
            omega0,
            mu,
            gamma,
            c,
            l,
            lc,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// Dimensionless gain-loss strength `Gamma`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Gain-loss rate `gamma = Gamma * omega0 = 1 / (R C)`.
    pub fn gamma_rate(&self) -> f64 {
        self.gamma * self.omega0
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn lc(&self) -> f64 {
        self.lc
    }
    /// `1 / Lc`, exactly zero for the uncoupled dimer.
    pub fn inv_lc(&self) -> f64 {
        self.mu * self.mu / self.l
    }
    /// Oscillation period `T0 = 2 pi / omega0`.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega0
    }

    /// Same elements with a different gain-loss strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ParamError> {
        Self::from_elements(self.c, self.l, self.mu, gamma)
    }

    /// Same elements with a different coupling.
    pub fn with_mu(&self, mu: f64) -> Result<Self, ParamError> {
        Self::from_elements(self.c, self.l, mu, self.gamma)
    }

    pub fn energy_form(&self) -> EnergyForm {
        EnergyForm::new([self.c, self.c, self.l, self.l, self.lc].map(|w| 0.5 * w))
    }

    /// Energy form with the coupling inductance replaced by `lc`.
    pub fn energy_form_with_lc(&self, lc: f64) -> EnergyForm {
        EnergyForm::new([self.c, self.c, self.l, self.l, lc].map(|w| 0.5 * w))
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), ParamError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NotPositive { name, value: v })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), ParamError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::Negative { name, value: v })
    }
}

/// Physical circuit state `[V1, V2, I1, I2, Ic]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhiState {
    pub v1: f64,
    pub v2: f64,
    pub i1: f64,
    pub i2: f64,
    pub ic: f64,
}

impl PhiState {
    pub const ZERO: PhiState = PhiState {
        v1: 0.0,
        v2: 0.0,
        i1: 0.0,
        i2: 0.0,
        ic: 0.0,
    };

    pub fn new(v1: f64, v2: f64, i1: f64, i2: f64, ic: f64) -> Self {
        Self { v1, v2, i1, i2, ic }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.v1, self.v2, self.i1, self.i2, self.ic]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_vector(self) -> Vector5<f64> {
        Vector5::from(self.to_array())
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Parity image: tanks exchanged, coupling current reversed.
    pub fn parity(self) -> Self {
        Self::new(self.v2, self.v1, self.i2, self.i1, -self.ic)
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * k))
    }
}

/// Diagonal quadratic form `A` with `E = <phi|A|phi>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyForm {
    weights: [f64; 5],
}

impl EnergyForm {
    pub fn new(weights: [f64; 5]) -> Self {
        debug_assert!(weights.iter().all(|&w| w > 0.0));
        Self { weights }
    }

    pub fn weights(&self) -> [f64; 5] {
        self.weights
    }

    /// `A^{1/2} phi`, the energy-density vector.
    pub fn to_psi(&self, phi: PhiState) -> [f64; 5] {
        let a = phi.to_array();
        std::array::from_fn(|k| self.weights[k].sqrt() * a[k])
    }

    pub fn from_psi(&self, psi: [f64; 5]) -> PhiState {
        PhiState::from_array(std::array::from_fn(|k| psi[k] / self.weights[k].sqrt()))
    }
}

pub fn circuit_energy(phi: PhiState, a: &EnergyForm) -> f64 {
    phi.to_array()
        .iter()
        .zip(a.weights.iter())
        .map(|(x, w)| w * x * x)
        .sum()
}

/// Kirchhoff matrix `M` with `i d(phi)/dt = M phi`.
///
/// Loss and gain rates are passed separately; the balanced dimer uses
/// `gamma_loss = gamma_gain`.
pub fn build_kirchhoff_matrix(p: &CircuitParams, gamma_loss: f64, gamma_gain: f64) -> Result<CMatrix5, ParamError> {
    non_negative("gamma_loss", gamma_loss)?;
    non_negative("gamma_gain", gamma_gain)?;
    Ok(kirchhoff_generator(p, gamma_loss, gamma_gain).map(|v| I * v))
}

/// Real generator `G = -i M`, so that `d(phi)/dt = G phi`.
pub(crate) fn kirchhoff_generator(p: &CircuitParams, gamma_loss: f64, gamma_gain: f64) -> Matrix5<f64> {
    let (ic, il, ilc) = (1.0 / p.c, 1.0 / p.l, p.inv_lc());
    #[rustfmt::skip]
    let g = Matrix5::new(
        -gamma_loss, 0.0,        -ic, 0.0, -ic,
        0.0,         gamma_gain, 0.0, -ic,  ic,
        il,          0.0,        0.0, 0.0, 0.0,
        0.0,         il,         0.0, 0.0, 0.0,
        ilc,         -ilc,       0.0, 0.0, 0.0,
    );
    g
}

/// Energy-density Hamiltonian `H_eff = A^{1/2} M A^{-1/2}` for gain-loss
/// strength `Gamma` (the value stored in `p` is ignored).
pub fn build_heff(p: &CircuitParams, gamma: f64) -> Result<CMatrix5, ParamError> {
    non_negative("Gamma", gamma)?;
    Ok(heff_matrix(p.mu, gamma, p.omega0))
}

/// Same pattern as [`build_heff`] from the dimensionless numbers alone.
pub fn heff_matrix(mu: f64, gamma: f64, omega0: f64) -> CMatrix5 {
    #[rustfmt::skip]
    let k = Matrix5::new(
        -gamma, 0.0,   -1.0, 0.0,  -mu,
        0.0,    gamma, 0.0,  -1.0, mu,
        1.0,    0.0,   0.0,  0.0,  0.0,
        0.0,    1.0,   0.0,  0.0,  0.0,
        mu,     -mu,   0.0,  0.0,  0.0,
    );
    k.map(|v| I * (omega0 * v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PtPhase {
    /// Real spectrum, `gamma <= gamma_PT`.
    Symmetric,
    /// One complex-conjugate pair, `gamma_PT < gamma < gamma_c`.
    Broken,
    /// All nonzero eigenvalues purely imaginary, `gamma >= gamma_c`.
    OverdampedBroken,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumResult {
    /// `[+a, -a, +b, -b, 0]`; `a` takes the `+` inner root.
    pub eigenvalues: [Complex64; 5],
    pub pt_phase: PtPhase,
}

impl SpectrumResult {
    pub fn nonzero(&self) -> [Complex64; 4] {
        [
            self.eigenvalues[0],
            self.eigenvalues[1],
            self.eigenvalues[2],
            self.eigenvalues[3],
        ]
    }

    /// Largest growth rate `max Im eps`.
    pub fn max_growth(&self) -> f64 {
        self.nonzero().iter().map(|e| e.im).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn eigenvalues_closed_form(mu: f64, gamma: f64, omega0: f64) -> Result<SpectrumResult, ParamError> {
    non_negative("mu", mu)?;
    non_negative("Gamma", gamma)?;
    positive("omega0", omega0)?;
    let g2 = gamma * gamma;
    let m2 = 2.0 * mu * mu;
    let disc = (m2 - g2).powi(2) - 4.0 * g2;
    let inner = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    let base = Complex64::new(2.0 + m2 - g2, 0.0);
    let scale = omega0 / std::f64::consts::SQRT_2;
    let a = (base + inner).sqrt() * scale;
    let b = (base - inner).sqrt() * scale;
    let zero = Complex64::new(0.0, 0.0);

    let rate = gamma * omega0;
    let pt_phase = if rate <= gamma_pt(mu, omega0) * (1.0 + THRESHOLD_GUARD) {
        PtPhase::Symmetric
    } else if rate >= gamma_c(mu, omega0) * (1.0 - THRESHOLD_GUARD) {
        PtPhase::OverdampedBroken
    } else {
        PtPhase::Broken
    };
    Ok(SpectrumResult {
        eigenvalues: [a, -a, b, -b, zero],
        pt_phase,
    })
}

/// First exceptional point, `omega0 (sqrt(1 + 2 mu^2) - 1)`.
pub fn gamma_pt(mu: f64, omega0: f64) -> f64 {
    omega0 * ((1.0 + 2.0 * mu * mu).sqrt() - 1.0)
}

/// Second exceptional point, `omega0 (sqrt(1 + 2 mu^2) + 1)`.
pub fn gamma_c(mu: f64, omega0: f64) -> f64 {
    omega0 * ((1.0 + 2.0 * mu * mu).sqrt() + 1.0)
}

/// Coupling below which a dimer with gain-loss strength `Gamma` is broken.
pub fn mu_pt(gamma: f64) -> f64 {
    (gamma * (gamma + 2.0) / 2.0).sqrt()
}

/// Parity, time-reversal unitary and chiral operators of the dimer.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOps {
    pub parity: Matrix5<f64>,
    pub time_unitary: Matrix5<f64>,
    pub chiral: Matrix5<f64>,
}

impl SymmetryOps {
    pub fn new() -> Self {
        #[rustfmt::skip]
        let parity = Matrix5::new(
            0.0, 1.0, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, -1.0,
        );
        let time_unitary = Matrix5::from_diagonal(&Vector5::new(1.0, 1.0, -1.0, -1.0, -1.0));
        let chiral = parity * time_unitary;
        Self {
            parity,
            time_unitary,
            chiral,
        }
    }
}

impl Default for SymmetryOps {
    fn default() -> Self {
        Self::new()
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

fn tolerance_for(h: &CMatrix5) -> f64 {
    SYMMETRY_TOL * h.norm().max(1.0)
}

/// `(PU) conj(H) (PU)^{-1} == H`. Both `P` and `U` are real involutions, so
/// `(PU)^{-1} = U P`.
pub fn check_pt_symmetry(h: &CMatrix5) -> bool {
    let ops = SymmetryOps::new();
    let pu = (ops.parity * ops.time_unitary).map(|v| Complex64::new(v, 0.0));
    let up = (ops.time_unitary * ops.parity).map(|v| Complex64::new(v, 0.0));
    let image = pu * h.map(|v| v.conj()) * up;
    (image - h).norm() <= tolerance_for(h)
}

/// `Pi H == -H Pi` with `Pi = P U`.
pub fn check_chiral(h: &CMatrix5) -> bool {
    let pi = SymmetryOps::new().chiral.map(|v| Complex64::new(v, 0.0));
    (pi * h + h * pi).norm() <= tolerance_for(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kirchhoff_entries_mu_one() {
        let p = CircuitParams::new(1.0, 0.0).unwrap();
        let m = build_kirchhoff_matrix(&p, 0.0, 0.0).unwrap();
        assert_eq!(m[(4, 0)], c(0.0, 1.0 / p.lc()));
        assert_eq!(m[(4, 1)], c(0.0, -1.0 / p.lc()));
        for k in 0..5 {
            assert_eq!(m[(k, k)], c(0.0, 0.0));
        }
    }

    #[test]
    fn kirchhoff_matches_hand_written_circuit_laws() {
        // mu = 0.3, Gamma = 0.0863 with non-unit elements
        let (cap, ind, mu, gamma) = (2.0, 0.5, 0.3, 0.0863);
        let p = CircuitParams::from_elements(cap, ind, mu, gamma).unwrap();
        let rate = p.gamma_rate();
        let m = build_kirchhoff_matrix(&p, rate, rate).unwrap();
        let lc = ind / (mu * mu);
        let r = 1.0 / (rate * cap);
        // C dV1/dt = -V1/R - I1 - Ic, C dV2/dt = +V2/R - I2 + Ic,
        // L dI1/dt = V1, L dI2/dt = V2, Lc dIc/dt = V1 - V2.
        let mut expected = [[0.0; 5]; 5];
        expected[0][0] = -1.0 / (r * cap);
        expected[0][2] = -1.0 / cap;
        expected[0][4] = -1.0 / cap;
        expected[1][1] = 1.0 / (r * cap);
        expected[1][3] = -1.0 / cap;
        expected[1][4] = 1.0 / cap;
        expected[2][0] = 1.0 / ind;
        expected[3][1] = 1.0 / ind;
        expected[4][0] = 1.0 / lc;
        expected[4][1] = -1.0 / lc;
        for i in 0..5 {
            for j in 0..5 {
                let got = m[(i, j)];
                assert_eq!(got.re, 0.0);
                assert!(
                    close(got.im, expected[i][j], 1e-12),
                    "({i},{j}) {got} vs {}",
                    expected[i][j]
                );
            }
        }
        assert_eq!(m.map(|v| v.im).rank(1e-12), 4);
    }

    #[test]
    fn hermitian_limit_is_antisymmetric_under_energy_form() {
        let p = CircuitParams::from_elements(1.7, 0.4, 0.8, 0.0).unwrap();
        let g = kirchhoff_generator(&p, 0.0, 0.0);
        let a = Matrix5::from_diagonal(&Vector5::from(p.energy_form().weights()));
        let s = a * g + g.transpose() * a;
        assert!(s.norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_elements() {
        assert!(CircuitParams::from_elements(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(CircuitParams::from_elements(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(CircuitParams::new(-0.1, 0.0).is_err());
        let p = CircuitParams::new(1.0, 0.0).unwrap();
        assert!(build_kirchhoff_matrix(&p, -1.0, 0.0).is_err());
    }

    #[test]
    fn heff_pattern() {
        let p = CircuitParams::new(1.0, 0.5).unwrap();
        let h = build_heff(&p, 0.5).unwrap();
        assert_eq!(h[(0, 0)], c(0.0, -0.5));
        assert_eq!(h[(0, 4)], c(0.0, -1.0));
        assert_eq!(h[(4, 0)], c(0.0, 1.0));
    }

    #[test]
    fn heff_hermitian_at_zero_gain() {
        let p = CircuitParams::new(0.7, 0.0).unwrap();
        let h = build_heff(&p, 0.0).unwrap();
        assert!((h - h.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn heff_is_similarity_transform_of_kirchhoff() {
        for &(cap, ind, mu, gamma) in &[(1.0, 1.0, 1.0, 0.5), (2.0, 0.5, 0.3, 0.0863), (0.3, 3.0, 1.7, 2.4)] {
            let p = CircuitParams::from_elements(cap, ind, mu, gamma).unwrap();
            let m = build_kirchhoff_matrix(&p, p.gamma_rate(), p.gamma_rate()).unwrap();
            let w = Vector5::from(p.energy_form().weights());
            let sqrt_a = Matrix5::from_diagonal(&w.map(|v| c(v.sqrt(), 0.0)));
            let inv_sqrt_a = Matrix5::from_diagonal(&w.map(|v| c(1.0 / v.sqrt(), 0.0)));
            let h = build_heff(&p, gamma).unwrap();
            assert!((sqrt_a * m * inv_sqrt_a - h).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_hermitian_mu_one() {
        let s = eigenvalues_closed_form(1.0, 0.0, 1.0).unwrap();
        let mut re: Vec<f64> = s.nonzero().iter().map(|e| e.re).collect();
        re.sort_by(f64::total_cmp);
        let want = [-3f64.sqrt(), -1.0, 1.0, 3f64.sqrt()];
        for (a, b) in re.iter().zip(want) {
            assert!(close(*a, b, 1e-14));
        }
        assert!(s.nonzero().iter().all(|e| e.im == 0.0));
        assert_eq!(s.eigenvalues[4], c(0.0, 0.0));
        assert_eq!(s.pt_phase, PtPhase::Symmetric);
    }

    #[test]
    fn closed_form_degenerates_at_first_threshold() {
        let s = eigenvalues_closed_form(1.0, 3f64.sqrt() - 1.0, 1.0).unwrap();
        assert!((s.eigenvalues[0] - s.eigenvalues[2]).norm() < 1e-7);
        assert_eq!(s.pt_phase, PtPhase::Symmetric);
    }

    #[test]
    fn closed_form_overdamped() {
        let s = eigenvalues_closed_form(1.0, 3.0, 1.0).unwrap();
        assert!(s.nonzero().iter().all(|e| e.re.abs() < 1e-12));
        assert_eq!(s.pt_phase, PtPhase::OverdampedBroken);
        let s = eigenvalues_closed_form(1.0, 1.5, 1.0).unwrap();
        assert_eq!(s.pt_phase, PtPhase::Broken);
        assert!(s.max_growth() > 0.0);
    }

    #[test]
    fn thresholds() {
        assert!(close(gamma_pt(1.0, 1.0), 0.732, 1e-3));
        assert!(close(gamma_c(1.0, 1.0), 2.732, 1e-3));
        assert_eq!(gamma_pt(0.0, 1.0), 0.0);
        assert!(close(gamma_pt(0.3, 1.0), 1.18f64.sqrt() - 1.0, 1e-15));
        assert!(close(gamma_pt(0.3, 1.0), 0.086278, 1e-6));
        for mu in [0.0, 0.3, 1.0, 2.5] {
            assert_eq!(gamma_c(mu, 1.0) - gamma_pt(mu, 1.0), 2.0);
        }
    }

    #[test]
    fn mu_pt_values() {
        assert!(close(mu_pt(0.5), 0.625f64.sqrt(), 1e-15));
        assert!(close(mu_pt(0.5), 0.79057, 1e-5));
        assert_eq!(mu_pt(0.0), 0.0);
        for mu in [0.3, 1.0, 1.225] {
            assert!(close(mu_pt(gamma_pt(mu, 1.0)), mu, 1e-12));
        }
    }

    #[test]
    fn symmetry_ops_are_involutions() {
        let ops = SymmetryOps::new();
        assert_eq!(ops.parity * ops.parity, Matrix5::identity());
        assert_eq!(ops.time_unitary * ops.time_unitary, Matrix5::identity());
        let phi = PhiState::new(1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(
            PhiState::from_array((ops.parity * phi.to_vector()).into()),
            phi.parity()
        );
    }

    #[test]
    fn heff_passes_symmetry_checks() {
        let p = CircuitParams::new(0.9, 0.0).unwrap();
        let h = build_heff(&p, 1.3).unwrap();
        assert!(check_pt_symmetry(&h));
        assert!(check_chiral(&h));
    }

    #[test]
    fn loss_only_perturbation_breaks_pt() {
        let p = CircuitParams::new(0.9, 0.0).unwrap();
        let mut h = build_heff(&p, 0.4).unwrap();
        h[(0, 0)] += c(0.0, -0.1);
        assert!(!check_pt_symmetry(&h));
        assert!(!check_chiral(&h));
    }

    #[test]
    fn energy_single_component_and_zero() {
        let p = CircuitParams::from_elements(2.0, 1.0, 1.0, 0.0).unwrap();
        let a = p.energy_form();
        assert_eq!(
            circuit_energy(PhiState::new(3.0, 0.0, 0.0, 0.0, 0.0), &a),
            0.5 * 2.0 * 9.0
        );
        assert_eq!(circuit_energy(PhiState::ZERO, &a), 0.0);
    }
}
