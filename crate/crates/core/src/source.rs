//! Photonic qudit source: driven Λ-system dynamics, the adiabatic closed
//! forms for the emitted mode, the spontaneous-emission budget and the
//! noisy, loss-precompensated qudit amplitudes used by the protocol engine.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{c, C64, ONE, ZERO};

/// Λ-system and laser parameters (rates in rad/s, times in s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub omega: C64,
    /// One-photon detuning.
    pub delta: f64,
    /// Two-photon detuning.
    pub two_photon_delta: f64,
    pub g: f64,
    pub gamma_g: f64,
    pub gamma_f: f64,
    pub kappa: f64,
    /// Square-pulse duration.
    pub tau_pulse: f64,
    pub sigma_a: f64,
    pub sigma_p: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        // Bad-cavity regime with C = 100 and a ~0.2 µs pulse.
        Self {
            omega: c(2.0e8, 0.0),
            delta: 0.0,
            two_photon_delta: 0.0,
            g: 1.0e10,
            gamma_g: 5.0e6,
            gamma_f: 5.0e6,
            kappa: 1.0e11,
            tau_pulse: 200e-9,
            sigma_a: 0.1,
            sigma_p: 0.1,
        }
    }
}

impl SourceParams {
    pub fn gamma(&self) -> f64 {
        self.gamma_g + self.gamma_f
    }

    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (self.kappa * self.gamma())
    }

    /// `γ(1 + 4C)`.
    pub fn purcell_rate(&self) -> f64 {
        self.gamma() * (1.0 + 4.0 * self.cooperativity())
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.g, self.gamma_g, self.gamma_f, self.kappa, self.tau_pulse];
        if rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Domain("source rates and pulse duration must be non-negative".into()));
        }
        if !(self.sigma_a >= 0.0 && self.sigma_p >= 0.0) {
            return Err(Error::Domain("noise widths must be non-negative".into()));
        }
        Ok(())
    }

    fn lorentz_denominator(&self) -> f64 {
        let gp = self.purcell_rate();
        self.delta * self.delta + gp * gp / 4.0
    }

    /// Exponent `b` of the adiabatic ground-state depletion.
    pub fn depletion_rate(&self) -> C64 {
        let gp = self.purcell_rate();
        c(0.0, self.omega.norm_sqr()) * c(self.delta, gp / 2.0) / self.lorentz_denominator()
    }

    /// `A = Re b`.
    pub fn depletion_real(&self) -> f64 {
        -self.omega.norm_sqr() * self.purcell_rate() / (2.0 * self.lorentz_denominator())
    }
}

pub type LambdaAmplitudes = [C64; 3];

const RTOL: f64 = 1e-9;
const ATOL: f64 = 1e-13;
const MAX_STEPS: usize = 50_000_000;

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C_NODES: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of `y' = f(t, y)` from `t0` to `t1`.
/// `h` carries the step-size guess between calls.
fn integrate<const N: usize, F>(f: &F, mut y: [C64; N], t0: f64, t1: f64, h: &mut f64) -> Result<[C64; N]>
where
    F: Fn(f64, &[C64; N]) -> [C64; N],
{
    let mut t = t0;
    let mut steps = 0usize;
    while t < t1 {
        if steps > MAX_STEPS {
            return Err(Error::Integration(format!("exceeded {MAX_STEPS} steps at t = {t:e}")));
        }
        steps += 1;
        let last = *h >= t1 - t;
        let step = if last { t1 - t } else { *h };
        if !last && step <= f64::EPSILON * t.abs().max(1e-300) * 4.0 {
            return Err(Error::Integration(format!("step size underflow at t = {t:e}")));
        }
        let mut k = [[ZERO; N]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += kj[i] * (a * step);
                    }
                }
            }
            k[s] = f(t + C_NODES[s] * step, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut d5 = ZERO;
            let mut d4 = ZERO;
            for s in 0..7 {
                d5 += k[s][i] * B5[s];
                d4 += k[s][i] * B4[s];
            }
            y5[i] += d5 * step;
            let scale = ATOL + RTOL * y[i].norm().max(y5[i].norm());
            err = err.max(((d5 - d4) * step).norm() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Integration(format!("non-finite state at t = {t:e}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        // a clipped final step says nothing about the natural step size
        *h = if last && err <= 1.0 { h.max(step * factor) } else { step * factor };
    }
    Ok(y)
}

fn lambda_rhs(p: &SourceParams, driven: bool) -> impl Fn(f64, &[C64; 5]) -> [C64; 5] + '_ {
    let omega = if driven { p.omega } else { ZERO };
    let gamma = p.gamma();
    let mi = c(0.0, -1.0);
    move |_t, y| {
        let [c0, c1, c2, _, _] = *y;
        [
            mi * omega.conj() * c1,
            mi * (omega * c0 + c(p.delta, -gamma / 2.0) * c1 + c2 * p.g),
            mi * (c1 * p.g + c(p.two_photon_delta, -p.kappa / 2.0) * c2),
            // running spontaneous and cavity emission probabilities
            C64::from(gamma * c1.norm_sqr()),
            C64::from(p.kappa * c2.norm_sqr()),
        ]
    }
}

fn evolve(p: &SourceParams, times: &[f64]) -> Result<Vec<[C64; 5]>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Domain("time grid must be non-negative and increasing".into()));
    }
    let mut y = [ONE, ZERO, ZERO, ZERO, ZERO];
    let mut t = 0.0;
    let mut h = 1e-3 / (p.kappa + p.gamma() + p.omega.norm() + p.delta.abs() + 1.0);
    let driven = lambda_rhs(p, true);
    let free = lambda_rhs(p, false);
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if t < p.tau_pulse && target > p.tau_pulse {
            y = integrate(&driven, y, t, p.tau_pulse, &mut h)?;
            t = p.tau_pulse;
        }
        if target > t {
            y = if t < p.tau_pulse { integrate(&driven, y, t, target, &mut h)? } else { integrate(&free, y, t, target, &mut h)? };
            t = target;
        }
        out.push(y);
    }
    Ok(out)
}

/// Numerically integrates the no-jump evolution of `(c0, c1, c2)` from
/// `(1, 0, 0)` at `t = 0` under a square pulse, reporting the amplitudes at
/// every grid time.
pub fn solve_lambda_dynamics(p: &SourceParams, t_grid: &[f64]) -> Result<Vec<LambdaAmplitudes>> {
    Ok(evolve(p, t_grid)?.into_iter().map(|y| [y[0], y[1], y[2]]).collect())
}

/// Emission probabilities accumulated up to `t_end` by the numeric solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericEmission {
    pub spontaneous: f64,
    pub cavity: f64,
    pub remaining_norm: f64,
}

pub fn numeric_emission(p: &SourceParams, t_end: f64) -> Result<NumericEmission> {
    let y = evolve(p, &[t_end])?[0];
    Ok(NumericEmission {
        spontaneous: y[3].re,
        cavity: y[4].re,
        remaining_norm: y[0].norm_sqr() + y[1].norm_sqr() + y[2].norm_sqr(),
    })
}

fn adiabatic_prefactor(p: &SourceParams) -> C64 {
    let gp = p.purcell_rate();
    c(0.0, 2.0) * p.omega * p.g * c(p.delta, gp / 2.0) / (p.kappa * p.lorentz_denominator())
}

/// Adiabatic cavity amplitude `c2(t)` for `c0(0) = 1` (two-photon detuning
/// taken as zero).
pub fn closed_form_c2(p: &SourceParams, t: f64) -> C64 {
    let pre = adiabatic_prefactor(p);
    let b = p.depletion_rate();
    if t <= p.tau_pulse {
        pre * (b * t).exp()
    } else {
        let free = c(p.delta, -p.purcell_rate() / 2.0) * c(0.0, -1.0) * (t - p.tau_pulse);
        pre * (b * p.tau_pulse).exp() * free.exp()
    }
}

/// Output mode `v(t) = sqrt(κ) c2(t)` of the emitted time bin.
pub fn closed_form_output_mode(p: &SourceParams, t: f64) -> C64 {
    closed_form_c2(p, t) * p.kappa.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionBudget {
    /// Probability of any spontaneous emission during the drive.
    pub total: f64,
    /// Share ending in `|f>`: no photon, i.e. loss.
    pub loss: f64,
    /// Share returning to `|g>`: dephasing of the qudit.
    pub dephasing: f64,
}

/// Spontaneous-emission budget of one pulse. The approximation only holds
/// once the pulse has depleted the ground state (`e^{2Aτ} <= 0.01`).
pub fn spontaneous_emission_prob(p: &SourceParams) -> Result<EmissionBudget> {
    let residual = (2.0 * p.depletion_real() * p.tau_pulse).exp();
    if residual > 0.01 {
        return Err(Error::Domain(format!(
            "pulse too short: ground-state population {residual:.3e} left after the drive (need <= 0.01)"
        )));
    }
    let four_c = 4.0 * p.cooperativity();
    let total = 1.0 - four_c / (1.0 + four_c) * (1.0 - residual);
    let gamma = p.gamma();
    let (loss, dephasing) = if gamma > 0.0 { (p.gamma_f / gamma * total, p.gamma_g / gamma * total) } else { (0.0, 0.0) };
    Ok(EmissionBudget { total, loss, dephasing })
}

/// Unit-norm time-bin amplitudes of a `2^m`-dimensional qudit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditAmplitudes {
    amps: Vec<C64>,
}

impl QuditAmplitudes {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("qudit dimension {n} is not a power of two >= 2")));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroProbability);
        }
        Ok(Self { amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    pub fn uniform(m: usize) -> Self {
        let n = 1usize << m;
        Self { amps: vec![c(1.0 / (n as f64).sqrt(), 0.0); n] }
    }

    pub fn m(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amps
    }
}

/// Amplitudes `∝ 1/sqrt(T_l)` so that bin-dependent downstream transmission
/// `T_l` leaves a uniform superposition.
pub fn precompensated_amplitudes(branch_transmissions: &[f64]) -> Result<QuditAmplitudes> {
    if let Some(t) = branch_transmissions.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Domain(format!("branch transmission {t} outside (0, 1]")));
    }
    QuditAmplitudes::new(branch_transmissions.iter().map(|t| c(1.0 / t.sqrt(), 0.0)).collect())
}

/// Laser-noise model: bin `l` gets `(1 + α_l) e^{iθ_l}` with
/// `α_l ~ N(0, σ_a²)`, `θ_l ~ N(0, σ_p²)`, then the vector is renormalized.
pub fn sample_noisy_qudit<R: Rng + ?Sized>(base: &QuditAmplitudes, p: &SourceParams, rng: &mut R) -> QuditAmplitudes {
    if p.sigma_a == 0.0 && p.sigma_p == 0.0 {
        return base.clone();
    }
    let amp = Normal::new(0.0, p.sigma_a).expect("finite sigma_a");
    let phase = Normal::new(0.0, p.sigma_p).expect("finite sigma_p");
    let mut amps: Vec<C64> = base
        .as_slice()
        .iter()
        .map(|b| {
            let alpha = amp.sample(rng);
            let theta = phase.sample(rng);
            b * (1.0 + alpha) * C64::from_polar(1.0, theta)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    QuditAmplitudes { amps }
}
