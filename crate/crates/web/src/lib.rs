//! Browser bindings for three interactive views: the cavity reflection
//! spectrum, the Fourier outcome distribution of a noisy qudit, and a small
//! distance sweep.

use qudit_link::cavity::{reflection_coefficients, GateParams};
use qudit_link::channels::Strategy;
use qudit_link::optics::{interferometer_dephase_sampled, outcome_probabilities};
use qudit_link::protocol::{estimate_metrics, ProtocolConfig};
use qudit_link::source::{sample_noisy_qudit, QuditAmplitudes, SourceParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Values per point of [`reflection_curve`].
pub const REFLECTION_STRIDE: usize = 5;
/// Values per point of [`distance_sweep`].
pub const SWEEP_STRIDE: usize = 5;

/// `points` samples of `(ω/κ, |r0|, arg r0, |r1|, arg r1)` for laser
/// detunings in `[-span, span]·κ`, flattened.
#[wasm_bindgen]
pub fn reflection_curve(cooperativity1: f64, kappa_a_ratio: f64, span: f64, points: usize) -> Vec<f64> {
    let base = GateParams::from_cooperativities(0.0, cooperativity1, kappa_a_ratio);
    let points = points.max(2);
    let mut out = Vec::with_capacity(points * REFLECTION_STRIDE);
    for i in 0..points {
        let x = -span + 2.0 * span * i as f64 / (points - 1) as f64;
        let r = reflection_coefficients(&GateParams { omega: x * base.kappa, ..base });
        out.extend([x, r.r0.norm(), r.r0.arg(), r.r1.norm(), r.r1.arg()]);
    }
    out
}

/// Outcome distribution of a uniform `2^m`-bin qudit with laser amplitude
/// and phase noise and interferometer phase noise, averaged over `samples`
/// draws. Without noise all weight is on `k = 0`.
#[wasm_bindgen]
pub fn qft_outcomes(m: usize, sigma_a: f64, sigma_p: f64, sigma_x: f64, samples: u32, seed: u32) -> Vec<f64> {
    let m = m.clamp(1, 8);
    let n = 1usize << m;
    let base = QuditAmplitudes::uniform(m);
    let source = SourceParams { sigma_a, sigma_p, ..SourceParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let mut acc = vec![0.0; n];
    let samples = samples.max(1);
    for _ in 0..samples {
        let mut amps = sample_noisy_qudit(&base, &source, &mut rng).into_vec();
        interferometer_dephase_sampled(&mut amps, sigma_x, &mut rng);
        for (a, p) in acc.iter_mut().zip(outcome_probabilities(&amps)) {
            *a += p;
        }
    }
    acc.iter().map(|a| a / samples as f64).collect()
}

/// Rows of `(L_km, success_probability, average_attempts, average_fidelity,
/// fidelity_stderr)` for `steps` distances up to `max_km`, flattened.
pub fn sweep_rows(m: usize, strategy: &str, max_km: f64, steps: usize, trajectories: u64, seed: u64) -> qudit_link::Result<Vec<f64>> {
    let strategy = Strategy::parse(strategy).ok_or_else(|| qudit_link::Error::config("strategy", format!("unknown strategy \"{strategy}\"")))?;
    let steps = steps.max(1);
    let mut out = Vec::with_capacity(steps * SWEEP_STRIDE);
    for i in 1..=steps {
        let l = max_km * i as f64 / steps as f64;
        let cfg = ProtocolConfig::new(m, l).with_strategy(strategy).with_trajectories(trajectories).with_seed(seed);
        let (pairs, rates) = estimate_metrics(&cfg)?;
        out.extend([l, rates.success_probability, rates.average_attempts, pairs.average_fidelity, pairs.standard_error]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn distance_sweep(m: usize, strategy: &str, max_km: f64, steps: usize, trajectories: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    sweep_rows(m, strategy, max_km, steps, trajectories as u64, seed as u64).map_err(|e| JsError::new(&e.to_string()))
}
