//! End-to-end link orchestration: the qudit attempt pipeline, heralded phase
//! corrections, the two qubit baselines and Monte Carlo estimation of
//! fidelity and attempt statistics.

mod campaign;
mod engine;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cavity::{reflection_coefficients, GateParams, ReflectionPair};
use crate::channels::{ChannelParams, Strategy};
use crate::error::{Error, Result};
use crate::optics::{fiber_transmission, DetectionParams, SwitchParams};
use crate::qstate::{Matrix, PureState, C64};
use crate::source::{precompensated_amplitudes, QuditAmplitudes, SourceParams};

pub use campaign::{estimate_metrics, qubit_metrics_from_link, run_campaign, run_qubit_strategy, Campaign};
pub use engine::{run_qudit_attempt, AttemptResult};

/// Largest number of pairs the engines accept.
pub const MAX_PAIRS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub m: usize,
    pub distance_km: f64,
    pub attenuation_km: f64,
    /// Speed of light in fiber (km/s).
    pub c_fiber: f64,
    pub source: SourceParams,
    /// Shape the source amplitudes against bin-dependent downstream loss.
    pub precompensate: bool,
    pub gate: GateParams,
    pub switch: SwitchParams,
    pub detection: DetectionParams,
    pub channel: ChannelParams,
    pub strategy: Strategy,
    pub n_trajectories: u64,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Reference hardware at the given size and distance.
    pub fn new(m: usize, distance_km: f64) -> Self {
        Self {
            m,
            distance_km,
            attenuation_km: 20.0,
            c_fiber: 2.0e5,
            source: SourceParams::default(),
            precompensate: true,
            gate: GateParams::default(),
            switch: SwitchParams::default(),
            detection: DetectionParams::default(),
            channel: ChannelParams::default(),
            strategy: Strategy::Qudit,
            n_trajectories: 100_000,
            seed: 0,
        }
    }

    /// Every loss and noise source switched off, zero distance.
    pub fn ideal(m: usize) -> Self {
        Self {
            distance_km: 0.0,
            source: SourceParams { sigma_a: 0.0, sigma_p: 0.0, ..SourceParams::default() },
            gate: GateParams::from_cooperativities(0.0, f64::INFINITY, 1.0),
            switch: SwitchParams::IDEAL,
            detection: DetectionParams { eta_lag: 0.0, sigma_x: Some(0.0), ..DetectionParams::default() },
            channel: ChannelParams { t1: f64::INFINITY, t_p: f64::INFINITY, a_beta: 0.5 },
            ..Self::new(m, 0.0)
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_trajectories(mut self, n: u64) -> Self {
        self.n_trajectories = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.m > MAX_PAIRS {
            return Err(Error::EngineLimit(format!("m = {} outside 1..={MAX_PAIRS}", self.m)));
        }
        if self.n_trajectories < 1 {
            return Err(Error::Domain("n_trajectories must be at least 1".into()));
        }
        if !(self.distance_km >= 0.0) || !(self.attenuation_km > 0.0) || !(self.c_fiber > 0.0) {
            return Err(Error::Domain("distance must be >= 0, attenuation length and fiber light speed > 0".into()));
        }
        let sw = &self.switch;
        if !(0.0..=1.0).contains(&sw.eta_sw) || !(0.0..=1.0).contains(&sw.e_sw) {
            return Err(Error::Domain("switch parameters outside [0, 1]".into()));
        }
        let det = &self.detection;
        if !(0.0..1.0).contains(&det.eta_lag) || !(0.0..=1.0).contains(&det.detector_efficiency) {
            return Err(Error::Domain("detection loss parameters outside range".into()));
        }
        if det.sigma_x.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::Domain("sigma_x must be non-negative".into()));
        }
        self.source.validate()?;
        self.gate.validate()?;
        self.channel.validate()
    }

    pub fn bins(&self) -> usize {
        1 << self.m
    }

    pub fn fiber_transmission(&self) -> f64 {
        fiber_transmission(self.distance_km, self.attenuation_km)
    }

    pub fn reflections(&self) -> ReflectionPair {
        reflection_coefficients(&self.gate)
    }

    /// Config of a single qubit link built from the same hardware.
    pub fn link_config(&self) -> Self {
        Self { m: 1, strategy: Strategy::Qudit, ..self.clone() }
    }

    /// Bin-dependent transmission of the ideal-switching path:
    /// `h^{2 w(l)}` from the cavities times the delay-loop and detector loss.
    pub fn branch_transmissions(&self) -> Vec<f64> {
        let h = self.reflections().plus_state_transmission();
        (0..self.bins())
            .map(|l| h.powi(2 * l.count_ones() as i32) * self.detection.loop_transmission(l, self.m))
            .collect()
    }

    /// Noise-free source amplitudes fed to the pipeline.
    pub fn base_amplitudes(&self) -> Result<QuditAmplitudes> {
        if self.precompensate {
            precompensated_amplitudes(&self.branch_transmissions())
        } else {
            Ok(QuditAmplitudes::uniform(self.m))
        }
    }
}

/// Angle for pair `p` that cancels the phase `ω^{-2^p k}` left on `|11>`
/// by Fourier outcome `k`.
pub fn correction_phases(k: usize, m: usize) -> Vec<f64> {
    let n = 1u64 << m;
    (0..m)
        .map(|p| {
            let e = ((k as u64) << p) % n;
            2.0 * PI * e as f64 / n as f64
        })
        .collect()
}

/// Applies `diag(1, e^{iφ_p})` to Bob's qubit `p` of a register-layout state.
pub fn apply_corrections(registers: &mut [C64], m: usize, angles: &[f64]) {
    for (p, &phi) in angles.iter().enumerate() {
        if phi == 0.0 {
            continue;
        }
        let phase = C64::from_polar(1.0, phi);
        let bit = 1usize << p;
        for (idx, a) in registers.iter_mut().enumerate() {
            if idx & bit != 0 {
                *a *= phase;
            }
        }
    }
    debug_assert_eq!(registers.len(), 1 << (2 * m));
}

/// Positions of `(A_p, B_p)` in the register layout.
pub fn pair_positions(p: usize, m: usize) -> [usize; 2] {
    [m - 1 - p, 2 * m - 1 - p]
}

/// Normalized 4×4 state of every pair of a register-layout state.
pub fn pair_states(registers: &PureState, m: usize) -> Result<Vec<Matrix>> {
    let psi = registers.normalized()?.with_branch_weight(1.0);
    (0..m).map(|p| Ok(psi.reduced_density(&pair_positions(p, m))?.matrix().clone())).collect()
}

/// Herald probability of one attempt with all sampled noise switched off:
/// `η_f (η_sw(1-e_sw))^m sum_l |b_l|² T_loop(l) prod_stages [η(1-e) h^{bit} + η e h^{1-bit}]`.
pub fn analytic_herald_probability(cfg: &ProtocolConfig) -> Result<f64> {
    cfg.validate()?;
    let base = cfg.base_amplitudes()?;
    let h = cfg.reflections().plus_state_transmission();
    let (correct, wrong, _) = cfg.switch.weights();
    let stage = |bit: bool| if bit { correct * h + wrong } else { correct + wrong * h };
    let local: f64 = base
        .as_slice()
        .iter()
        .enumerate()
        .map(|(l, b)| {
            let per_side: f64 = (0..cfg.m).map(|i| stage((l >> i) & 1 == 1)).product();
            b.norm_sqr() * per_side * per_side * cfg.detection.loop_transmission(l, cfg.m)
        })
        .sum();
    Ok(local * cfg.fiber_transmission() * cfg.switch.effective_transmission().powi(cfg.m as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub per_pair_fidelity: Vec<f64>,
    pub per_pair_stderr: Vec<f64>,
    pub average_fidelity: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl AttemptQuantiles {
    /// Quantiles of a geometric distribution with success probability `p`.
    pub fn geometric(p: f64) -> Self {
        let q = |x: f64| {
            if p >= 1.0 {
                1.0
            } else {
                ((1.0 - x).ln() / (1.0 - p).ln()).ceil().max(1.0)
            }
        };
        Self { p50: q(0.5), p90: q(0.9), p99: q(0.99) }
    }

    /// Empirical quantiles (nearest rank) of a sample.
    pub fn empirical(samples: &mut [u64]) -> Self {
        samples.sort_unstable();
        let n = samples.len();
        let q = |x: f64| samples[((x * n as f64).ceil() as usize).clamp(1, n) - 1] as f64;
        Self { p50: q(0.5), p90: q(0.9), p99: q(0.99) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMetrics {
    pub success_probability: f64,
    pub average_attempts: f64,
    pub attempts_quantiles: AttemptQuantiles,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::omega_pow;
    use crate::qstate::{bell_overlap, HilbertLayout};
    use approx::assert_abs_diff_eq;

    #[test]
    fn correction_examples() {
        assert!(correction_phases(0, 4).iter().all(|&a| a == 0.0));
        assert_abs_diff_eq!(correction_phases(1, 1)[0], PI);
        let a = correction_phases(1, 2);
        assert_abs_diff_eq!(a[0], PI / 2.0);
        assert_abs_diff_eq!(a[1], PI);
    }

    /// `sum_l ω^{-kl} |l>_A |l>_B / sqrt(N)` in register layout.
    fn post_measurement_state(k: usize, m: usize) -> Vec<C64> {
        let n = 1usize << m;
        let mut v = vec![C64::new(0.0, 0.0); n * n];
        for l in 0..n {
            v[l * n + l] = omega_pow(-((k * l) as i64), m) / (n as f64).sqrt();
        }
        v
    }

    #[test]
    fn corrections_restore_every_pair() {
        for m in 1..=5 {
            for k in 0..(1usize << m) {
                let mut v = post_measurement_state(k, m);
                apply_corrections(&mut v, m, &correction_phases(k, m));
                let psi = PureState::new(v, HilbertLayout::registers(m)).unwrap();
                for rho in pair_states(&psi, m).unwrap() {
                    assert!((bell_overlap(&rho) - 1.0).abs() < 1e-12, "m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn uncorrected_pairs_carry_the_outcome_phase() {
        let m = 2;
        let v = post_measurement_state(1, m);
        let psi = PureState::new(v, HilbertLayout::registers(m)).unwrap();
        let rho = pair_states(&psi, m).unwrap();
        // pair 0 phase ω^{-1} = -i: fidelity (1 + cos(π/2))/2
        assert_abs_diff_eq!(bell_overlap(&rho[0]), 0.5, epsilon = 1e-12);
        // pair 1 phase ω^{-2} = -1
        assert_abs_diff_eq!(bell_overlap(&rho[1]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_config_is_lossless() {
        for m in 1..=5 {
            let cfg = ProtocolConfig::ideal(m);
            assert_abs_diff_eq!(analytic_herald_probability(&cfg).unwrap(), 1.0, epsilon = 1e-15);
            assert!(cfg.branch_transmissions().iter().all(|&t| t == 1.0));
        }
    }

    #[test]
    fn fiber_only_herald_probability() {
        let cfg = ProtocolConfig { distance_km: 20.0, ..ProtocolConfig::ideal(3) };
        assert_abs_diff_eq!(analytic_herald_probability(&cfg).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn engine_limit() {
        assert!(matches!(ProtocolConfig::new(7, 10.0).validate(), Err(Error::EngineLimit(_))));
        assert!(matches!(ProtocolConfig::new(0, 10.0).validate(), Err(Error::EngineLimit(_))));
        assert!(ProtocolConfig::new(6, 10.0).validate().is_ok());
    }

    #[test]
    fn geometric_quantiles() {
        let q = AttemptQuantiles::geometric(0.5);
        assert_eq!((q.p50, q.p90), (1.0, 4.0));
        assert_eq!(AttemptQuantiles::geometric(1.0).p99, 1.0);
        let q = AttemptQuantiles::empirical(&mut [5, 1, 3, 2, 4]);
        assert_eq!((q.p50, q.p90, q.p99), (3.0, 5.0, 5.0));
    }
}
