//! Single-attempt trajectory engine.
//!
//! Every spin is addressed by exactly one cavity stage, so each time bin
//! leaves the registers in a product state. The pipeline therefore keeps
//! one amplitude and one routing pattern per bin and only builds the dense
//! register vector once an attempt heralds.

use rand::Rng;

use crate::cavity::{register_rotation, stage_operator, ReflectionPair};
use crate::error::Result;
use crate::optics::{interferometer_dephase_sampled, omega_pow, pick_outcome, LossCause, MeasurementOutcome, SwitchOutcome};
use crate::qstate::{HilbertLayout, PureState, C64, ONE, ZERO};
use crate::source::{sample_noisy_qudit, QuditAmplitudes};

use super::{apply_corrections, correction_phases, ProtocolConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptResult {
    pub outcome: MeasurementOutcome,
    /// Phase-corrected, normalized register state of a heralded attempt.
    pub registers: Option<PureState>,
}

/// Random numbers of one attempt, always drawn in the same order.
pub(crate) struct Draws {
    pub amps: QuditAmplitudes,
    pub alice: Vec<f64>,
    pub fiber: f64,
    pub bob: Vec<f64>,
    pub detection: Vec<f64>,
    pub phases: Vec<C64>,
    pub measurement: f64,
}

/// Surviving photon branch just before the Fourier measurement.
pub(crate) struct Branch {
    /// Bin amplitudes including loop/detector attenuation and dephasing.
    pub coeffs: Vec<C64>,
    /// `routes[l]` has bit `q` set when register qubit `q` saw the cavity.
    pub routes: Vec<u32>,
    pub norm_after_cavity: f64,
    pub norm_after_loops: f64,
}

pub(crate) struct Pipeline {
    pub m: usize,
    pub cfg: ProtocolConfig,
    base: QuditAmplitudes,
    /// Spin vectors after the rotation: `[bypassed, routed to cavity]`.
    spin: [[C64; 2]; 2],
    /// `<spin_b | spin_a>` indexed `[a][b]`.
    overlap: [[C64; 2]; 2],
    loops: Vec<f64>,
    sigma_x: f64,
}

impl Pipeline {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.m;
        let r = cfg.reflections();
        let spin = [spin_vector(&r, false), spin_vector(&r, true)];
        let mut overlap = [[ZERO; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                overlap[a][b] = spin[b][0].conj() * spin[a][0] + spin[b][1].conj() * spin[a][1];
            }
        }
        let loops = (0..cfg.bins()).map(|l| (1.0 - cfg.detection.eta_lag).powi(cfg.detection.loop_rule.loops(l, cfg.bins()) as i32)).collect();
        Ok(Self {
            m,
            base: cfg.base_amplitudes()?,
            spin,
            overlap,
            loops,
            sigma_x: cfg.detection.sigma_x_for(m),
            cfg: cfg.clone(),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draws {
        let m = self.m;
        let amps = sample_noisy_qudit(&self.base, &self.cfg.source, rng);
        let alice = (0..m).map(|_| rng.random()).collect();
        let fiber = rng.random();
        let bob = (0..m).map(|_| rng.random()).collect();
        let detection = (0..m).map(|_| rng.random()).collect();
        let mut phases = vec![ONE; self.cfg.bins()];
        interferometer_dephase_sampled(&mut phases, self.sigma_x, rng);
        let measurement = rng.random();
        Draws { amps, alice, fiber, bob, detection, phases, measurement }
    }

    /// Register qubit index of Alice's (`side = 0`) or Bob's spin `i`.
    fn qubit(&self, side: usize, i: usize) -> usize {
        side * self.m + self.m - 1 - i
    }

    /// Propagates a source state through both registers for the given
    /// per-stage wrong-switch pattern (indexed by spin), ignoring
    /// bin-independent losses.
    pub fn propagate(&self, amps: &[C64], wrong: [&[bool]; 2], phases: &[C64]) -> Branch {
        let n = amps.len();
        let mut routes = vec![0u32; n];
        for (l, route) in routes.iter_mut().enumerate() {
            for (side, w) in wrong.iter().enumerate() {
                for i in 0..self.m {
                    let bit = (l >> i) & 1 == 1;
                    if bit != w[i] {
                        *route |= 1 << self.qubit(side, i);
                    }
                }
            }
        }
        let h_cav = self.overlap[1][1].re;
        let mut norm_after_cavity = 0.0;
        let mut norm_after_loops = 0.0;
        let det = self.cfg.detection.detector_efficiency;
        let coeffs = (0..n)
            .map(|l| {
                let survive = h_cav.powi(routes[l].count_ones() as i32);
                let p = amps[l].norm_sqr() * survive;
                norm_after_cavity += p;
                norm_after_loops += p * self.loops[l];
                amps[l] * (self.loops[l] * det).sqrt() * phases[l]
            })
            .collect();
        Branch { coeffs, routes, norm_after_cavity, norm_after_loops }
    }

    /// `<S_b|S_a>` for the register product states of two bins.
    fn gram(&self, ra: u32, rb: u32) -> C64 {
        let mut g = ONE;
        for q in 0..2 * self.m {
            let a = ((ra >> q) & 1) as usize;
            let b = ((rb >> q) & 1) as usize;
            if a != b || a == 1 {
                g *= self.overlap[a][b];
            }
        }
        g
    }

    /// Unnormalized probability of every Fourier outcome.
    pub fn outcome_probabilities(&self, br: &Branch) -> Vec<f64> {
        let n = br.coeffs.len();
        // h[d] = sum over l - l' = d (mod N) of c_l c_l'^* <S_l'|S_l>
        let mut h = vec![ZERO; n];
        for (l, cl) in br.coeffs.iter().enumerate() {
            for (lp, clp) in br.coeffs.iter().enumerate() {
                let d = (l + n - lp) % n;
                h[d] += cl * clp.conj() * self.gram(br.routes[l], br.routes[lp]);
            }
        }
        (0..n)
            .map(|k| {
                let s: C64 = h.iter().enumerate().map(|(d, hd)| omega_pow(-((k * d) as i64), self.m) * hd).sum();
                (s.re / n as f64).max(0.0)
            })
            .collect()
    }

    /// Normalized, phase-corrected register state for outcome `k`.
    pub fn register_state(&self, br: &Branch, k: usize) -> Result<PureState> {
        let m = self.m;
        let nq = 2 * m;
        let mut reg = vec![ZERO; 1 << nq];
        let mut product = vec![ZERO; 1 << nq];
        for (l, cl) in br.coeffs.iter().enumerate() {
            if *cl == ZERO {
                continue;
            }
            product.truncate(1);
            product[0] = omega_pow(-((k * l) as i64), m) * cl;
            for q in 0..nq {
                let s = &self.spin[((br.routes[l] >> q) & 1) as usize];
                let next: Vec<C64> = product.iter().flat_map(|p| [p * s[0], p * s[1]]).collect();
                product = next;
            }
            for (r, p) in reg.iter_mut().zip(&product) {
                *r += p;
            }
        }
        apply_corrections(&mut reg, m, &correction_phases(k, m));
        PureState::new(reg, HilbertLayout::registers(m))?.normalized()
    }

    pub fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AttemptResult> {
        let d = self.draw(rng);
        self.resolve(&d)
    }

    pub fn resolve(&self, d: &Draws) -> Result<AttemptResult> {
        let lost = |cause| Ok(AttemptResult { outcome: MeasurementOutcome::lost(cause), registers: None });
        let sw = &self.cfg.switch;
        let mut wrong = [vec![false; self.m], vec![false; self.m]];
        // stages run from the most significant spin down
        for (side, draws) in [&d.alice, &d.bob].into_iter().enumerate() {
            for (s, u) in draws.iter().enumerate() {
                let i = self.m - 1 - s;
                match sw.sample(*u) {
                    SwitchOutcome::Correct => {}
                    SwitchOutcome::Wrong => wrong[side][i] = true,
                    SwitchOutcome::Lost => return lost(LossCause::Switch),
                }
            }
            if side == 0 && d.fiber >= self.cfg.fiber_transmission() {
                return lost(LossCause::Fiber);
            }
        }
        for u in &d.detection {
            match sw.sample(*u) {
                SwitchOutcome::Correct => {}
                SwitchOutcome::Wrong => return lost(LossCause::WrongSwitchTiming),
                SwitchOutcome::Lost => return lost(LossCause::Switch),
            }
        }
        let br = self.propagate(d.amps.as_slice(), [&wrong[0], &wrong[1]], &d.phases);
        let probs = self.outcome_probabilities(&br);
        let u = d.measurement;
        match pick_outcome(&probs, u) {
            Some(k) => Ok(AttemptResult { outcome: MeasurementOutcome::heralded(k), registers: Some(self.register_state(&br, k)?) }),
            None if u >= br.norm_after_cavity => lost(LossCause::Cavity),
            None if u >= br.norm_after_loops => lost(LossCause::Loop),
            None => lost(LossCause::Detector),
        }
    }
}

/// `Z H · stage|+>` for a spin that bypassed or entered the cavity.
fn spin_vector(r: &ReflectionPair, to_cavity: bool) -> [C64; 2] {
    let op = stage_operator(r, to_cavity);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let rot = register_rotation();
    let v = [op[0] * h, op[1] * h];
    [rot[(0, 0)] * v[0] + rot[(0, 1)] * v[1], rot[(1, 0)] * v[0] + rot[(1, 1)] * v[1]]
}

/// One attempt of the qudit pipeline: noisy source, Alice's register, fiber,
/// Bob's register, detection losses, interferometer dephasing and the
/// Fourier-basis herald, followed by the phase corrections.
pub fn run_qudit_attempt<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> Result<AttemptResult> {
    Pipeline::new(cfg)?.attempt(rng)
}
