//! Optical hardware between the spin registers: switches, fiber, the
//! detection-side delay loops and the Fourier-basis heralding measurement.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{c, DensityOperator, Matrix, PureState, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchParams {
    /// Transmission probability per pass.
    pub eta_sw: f64,
    /// Fraction leaked to the wrong output port.
    pub e_sw: f64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self { eta_sw: 0.9, e_sw: 0.01 }
    }
}

impl SwitchParams {
    pub const IDEAL: SwitchParams = SwitchParams { eta_sw: 1.0, e_sw: 0.0 };

    /// `(correct, wrong, lost)` branch weights.
    pub fn weights(&self) -> (f64, f64, f64) {
        (self.eta_sw * (1.0 - self.e_sw), self.eta_sw * self.e_sw, 1.0 - self.eta_sw)
    }

    /// Effective transmission of a switch whose wrong output is discarded.
    pub fn effective_transmission(&self) -> f64 {
        self.eta_sw * (1.0 - self.e_sw)
    }

    /// Maps a uniform draw in `[0, 1)` onto a routing outcome.
    pub fn sample(&self, u: f64) -> SwitchOutcome {
        let (correct, wrong, _) = self.weights();
        if u < correct {
            SwitchOutcome::Correct
        } else if u < correct + wrong {
            SwitchOutcome::Wrong
        } else {
            SwitchOutcome::Lost
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchOutcome {
    Correct,
    Wrong,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    Fiber,
    Switch,
    Cavity,
    Loop,
    Detector,
    WrongSwitchTiming,
}

impl LossCause {
    pub const ALL: [LossCause; 6] =
        [LossCause::Fiber, LossCause::Switch, LossCause::Cavity, LossCause::Loop, LossCause::Detector, LossCause::WrongSwitchTiming];
}

/// Surviving branch of a switch: `to_cavity[l]` tells where bin `l` went.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchBranch {
    pub outcome: SwitchOutcome,
    pub to_cavity: Vec<bool>,
    pub state: PureState,
}

/// Incoherent switch model. Returns the surviving (correct and wrong)
/// branches with their weights folded into `branch_weight`; the missing
/// weight is the loss branch.
pub fn switch_channel(state: &PureState, p: &SwitchParams, intended_to_cavity: &[bool]) -> Vec<SwitchBranch> {
    let (correct, wrong, _) = p.weights();
    let w = state.branch_weight();
    let mut out = Vec::with_capacity(2);
    if correct > 0.0 {
        out.push(SwitchBranch {
            outcome: SwitchOutcome::Correct,
            to_cavity: intended_to_cavity.to_vec(),
            state: state.clone().with_branch_weight(w * correct),
        });
    }
    if wrong > 0.0 {
        out.push(SwitchBranch {
            outcome: SwitchOutcome::Wrong,
            to_cavity: intended_to_cavity.iter().map(|b| !b).collect(),
            state: state.clone().with_branch_weight(w * wrong),
        });
    }
    out
}

pub fn fiber_transmission(distance_km: f64, attenuation_km: f64) -> f64 {
    (-distance_km / attenuation_km).exp()
}

/// How many delay loops each time bin passes before the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopRule {
    /// Every bin is delayed until the last bin: `N - 1 - l` loops.
    #[default]
    AlignToLast,
}

impl LoopRule {
    pub fn loops(&self, bin: usize, bins: usize) -> usize {
        match self {
            LoopRule::AlignToLast => bins - 1 - bin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Loss per fiber loop.
    pub eta_lag: f64,
    /// Interferometer dephasing; `None` means `0.1 m`.
    pub sigma_x: Option<f64>,
    pub loop_rule: LoopRule,
    pub detector_efficiency: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { eta_lag: 0.01, sigma_x: None, loop_rule: LoopRule::AlignToLast, detector_efficiency: 1.0 }
    }
}

impl DetectionParams {
    pub fn sigma_x_for(&self, m: usize) -> f64 {
        self.sigma_x.unwrap_or(0.1 * m as f64)
    }

    /// Bin-dependent part of the detection transmission (loops and detector).
    pub fn loop_transmission(&self, bin: usize, m: usize) -> f64 {
        let loops = self.loop_rule.loops(bin, 1 << m);
        (1.0 - self.eta_lag).powi(loops as i32) * self.detector_efficiency
    }
}

/// `(eta_sw (1 - e_sw))^m (1 - eta_lag)^{loops(l)}` (times detector efficiency).
pub fn detection_transmission_per_bin(bin: usize, m: usize, sw: &SwitchParams, det: &DetectionParams) -> f64 {
    sw.effective_transmission().powi(m as i32) * det.loop_transmission(bin, m)
}

/// Exact interferometer dephasing: photon-bin coherences decay by `e^{-σ²/2}`.
pub fn interferometer_dephase_exact(rho: &DensityOperator, photon: usize, sigma_x: f64) -> Result<DensityOperator> {
    if sigma_x < 0.0 {
        return Err(Error::Domain(format!("sigma_x = {sigma_x} < 0")));
    }
    rho.scale_coherences(photon, (-sigma_x * sigma_x / 2.0).exp())
}

/// Sampled interferometer dephasing: independent random phase per bin, with
/// per-bin variance `σ²/2` so that every bin pair decays by `e^{-σ²/2}` on
/// average.
pub fn interferometer_dephase_sampled<R: Rng + ?Sized>(amps: &mut [C64], sigma_x: f64, rng: &mut R) {
    if sigma_x == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma_x / std::f64::consts::SQRT_2).expect("finite sigma");
    for a in amps.iter_mut() {
        *a *= C64::from_polar(1.0, normal.sample(rng));
    }
}

/// `ω = e^{iπ/2^{m-1}} = e^{2πi/N}`.
pub fn omega(m: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / (1u64 << m) as f64)
}

/// `ω^e` computed from the exponent modulo `N` (no accumulated rounding).
pub fn omega_pow(exponent: i64, m: usize) -> C64 {
    let n = 1i64 << m;
    let e = exponent.rem_euclid(n);
    C64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)
}

/// `|X_k> = N^{-1/2} sum_l ω^{kl} |l>`.
pub fn x_basis_vector(k: usize, m: usize) -> Vec<C64> {
    let n = 1usize << m;
    let s = 1.0 / (n as f64).sqrt();
    (0..n).map(|l| omega_pow((k * l) as i64, m) * s).collect()
}

/// Row `k` is `<X_k|`, so the matrix maps time-bin amplitudes to outcome
/// amplitudes.
pub fn qft_matrix(m: usize) -> Matrix {
    let n = 1usize << m;
    let s = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(n, n, |k, l| omega_pow(-((k * l) as i64), m) * s)
}

/// `|<X_k|psi>|²` for every outcome `k`.
pub fn outcome_probabilities(amps: &[C64]) -> Vec<f64> {
    let n = amps.len();
    let m = n.trailing_zeros() as usize;
    let s = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let z: C64 = amps.iter().enumerate().map(|(l, a)| omega_pow(-((k * l) as i64), m) * a).sum();
            (z * s).norm_sqr()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub heralded: bool,
    pub k: Option<usize>,
    pub loss_cause: Option<LossCause>,
}

impl MeasurementOutcome {
    pub fn heralded(k: usize) -> Self {
        Self { heralded: true, k: Some(k), loss_cause: None }
    }

    pub fn lost(cause: LossCause) -> Self {
        Self { heralded: false, k: None, loss_cause: Some(cause) }
    }
}

/// Picks the outcome whose cumulative probability interval contains `u`;
/// `None` when `u` falls in the non-detection remainder.
pub(crate) fn pick_outcome(probs: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(k);
        }
    }
    None
}

/// Fourier-basis measurement of an (unnormalized) surviving photon branch.
/// The click probability is the branch norm.
pub fn qft_measure<R: Rng + ?Sized>(amps: &[C64], rng: &mut R) -> MeasurementOutcome {
    let probs = outcome_probabilities(amps);
    match pick_outcome(&probs, rng.random::<f64>()) {
        Some(k) => MeasurementOutcome::heralded(k),
        None => MeasurementOutcome::lost(LossCause::Detector),
    }
}

/// Equal-weight superposition over `n` modes.
pub fn uniform_amplitudes(n: usize) -> Vec<C64> {
    vec![c(1.0 / (n as f64).sqrt(), 0.0); n]
}
