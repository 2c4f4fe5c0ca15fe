//! Exact reference engine for small links: dense density-operator evolution
//! with every switch branch enumerated and every noise source averaged
//! analytically. Nothing in here is random.
//!
//! Source amplitude noise enters through the renormalized moments
//! `E[X_l X_l' / S]`, `X_j = 1 + α_j`, `S = sum_j |b_j|² X_j²`. Writing
//! `1/S = ∫_0^∞ e^{-sS} ds` factorizes the expectation into one-dimensional
//! Gaussian integrals with closed forms, leaving a single quadrature over
//! `s`.

use serde::{Deserialize, Serialize};

use crate::cavity::{register_rotation, stage_operator, ReflectionPair, Side};
use crate::channels::{adjoint_pair_channel, assign_wait_times, bell_projector, memory_channel, round_duration, RoundsRecord, Strategy};
use crate::error::{Error, Result};
use crate::optics::{interferometer_dephase_exact, x_basis_vector};
use crate::protocol::{correction_phases, pair_positions, ProtocolConfig};
use crate::qstate::{fidelity_to_bell, DensityOperator, HilbertLayout, Matrix, PureState, Subsystem, C64, ONE, ZERO};

/// Largest link the oracle will evolve densely.
pub const ORACLE_MAX_PAIRS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub herald_probability: f64,
    /// Unnormalized probability of every Fourier outcome.
    pub outcome_distribution: Vec<f64>,
    /// Heralded pair states before memory decoherence.
    pub heralded_pair_rho: Vec<Matrix>,
    /// Pair states after the memory waits.
    pub per_pair_rho: Vec<Matrix>,
    pub per_pair_fidelity: Vec<f64>,
    pub average_fidelity: f64,
}

/// Exact single-attempt result for the qudit link or the one-shot qubit
/// baseline. All-keep waiting statistics are out of scope here; see
/// [`expected_max_geometric`].
pub fn exact_run(cfg: &ProtocolConfig) -> Result<OracleResult> {
    cfg.validate()?;
    if cfg.m > ORACLE_MAX_PAIRS {
        return Err(Error::EngineLimit(format!("oracle supports m <= {ORACLE_MAX_PAIRS}, got {}", cfg.m)));
    }
    match cfg.strategy {
        Strategy::Qudit => qudit_link(cfg),
        Strategy::QubitOneShot => {
            let link = qudit_link(&cfg.link_config())?;
            let m = cfg.m;
            let outcome_distribution = (0..1usize << m)
                .map(|k| (0..m).map(|j| link.outcome_distribution[(k >> j) & 1]).product())
                .collect();
            Ok(OracleResult {
                herald_probability: link.herald_probability.powi(m as i32),
                outcome_distribution,
                heralded_pair_rho: vec![link.heralded_pair_rho[0].clone(); m],
                per_pair_rho: vec![link.per_pair_rho[0].clone(); m],
                per_pair_fidelity: vec![link.per_pair_fidelity[0]; m],
                average_fidelity: link.average_fidelity,
            })
        }
        Strategy::QubitAllKeep => Err(Error::Domain("the oracle does not model all-keep waiting statistics".into())),
    }
}

fn qudit_link(cfg: &ProtocolConfig) -> Result<OracleResult> {
    let m = cfg.m;
    let n = cfg.bins();
    let base = cfg.base_amplitudes()?;
    let photon_layout = HilbertLayout::new(vec![(Subsystem::Photon, n)])?;
    let photon = DensityOperator::new(source_density(base.as_slice(), cfg.source.sigma_a, cfg.source.sigma_p), photon_layout)?;
    let plus = PureState::new(vec![C64::from(0.5f64.powf(m as f64)); 1 << (2 * m)], HilbertLayout::registers(m))?;
    let mut rho = photon.tensor(&plus.to_density())?;

    let r = cfg.reflections();
    rho = register_stages(&rho, Side::Alice, &r, cfg)?;
    rho = rho.scaled(cfg.fiber_transmission());
    rho = register_stages(&rho, Side::Bob, &r, cfg)?;

    rho = rho.scaled(cfg.switch.effective_transmission().powi(m as i32));
    let loops = Matrix::from_fn(n, n, |i, j| if i == j { C64::from(cfg.detection.loop_transmission(i, m).sqrt()) } else { ZERO });
    rho = rho.apply_operator(&loops, &[0])?;
    rho = interferometer_dephase_exact(&rho, 0, cfg.detection.sigma_x_for(m))?;

    let mut outcome_distribution = Vec::with_capacity(n);
    let mut pair_sums = vec![Matrix::zeros(4, 4); m];
    for k in 0..n {
        let mut reg = rho.contract(0, &x_basis_vector(k, m))?;
        outcome_distribution.push(reg.trace());
        for (p, phi) in correction_phases(k, m).into_iter().enumerate() {
            let z = Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, phi)]);
            reg = reg.apply_operator(&z, &[pair_positions(p, m)[1]])?;
        }
        for (p, sum) in pair_sums.iter_mut().enumerate() {
            *sum += reg.partial_trace(&pair_positions(p, m))?.matrix();
        }
    }
    let herald_probability: f64 = outcome_distribution.iter().sum();
    if !(herald_probability > 0.0) {
        return Err(Error::ZeroProbability);
    }

    let rounds = RoundsRecord { success_rounds: vec![1], final_round: 1 };
    let waits = assign_wait_times(Strategy::Qudit, &rounds, cfg.distance_km, cfg.c_fiber)?;
    let mut heralded_pair_rho = Vec::with_capacity(m);
    let mut per_pair_rho = Vec::with_capacity(m);
    let mut per_pair_fidelity = Vec::with_capacity(m);
    for sum in pair_sums {
        let pair = DensityOperator::new(sum / C64::from(herald_probability), HilbertLayout::qubits(2))?;
        let stored = memory_channel(&memory_channel(&pair, 0, waits.alice[0], &cfg.channel)?, 1, waits.bob[0], &cfg.channel)?;
        per_pair_fidelity.push(fidelity_to_bell(&stored)?);
        heralded_pair_rho.push(pair.matrix().clone());
        per_pair_rho.push(stored.matrix().clone());
    }
    let average_fidelity = per_pair_fidelity.iter().sum::<f64>() / m as f64;
    Ok(OracleResult { herald_probability, outcome_distribution, heralded_pair_rho, per_pair_rho, per_pair_fidelity, average_fidelity })
}

/// All switch + cavity stages of one side with both switch branches kept,
/// followed by the readout rotation.
fn register_stages(rho: &DensityOperator, side: Side, r: &ReflectionPair, cfg: &ProtocolConfig) -> Result<DensityOperator> {
    let m = cfg.m;
    let n = cfg.bins();
    let (correct, wrong, _) = cfg.switch.weights();
    let mut rho = rho.clone();
    for i in (0..m).rev() {
        let spin = rho.layout().require(side.spin(i))?;
        let routed = |flip: bool| {
            Matrix::from_fn(2 * n, 2 * n, |a, b| {
                if a != b {
                    return ZERO;
                }
                let (l, s) = (a / 2, a % 2);
                stage_operator(r, ((l >> i) & 1 == 1) != flip)[s]
            })
        };
        let mut next = rho.apply_operator(&routed(false), &[0, spin])?.scaled(correct);
        if wrong > 0.0 {
            let w = rho.apply_operator(&routed(true), &[0, spin])?.scaled(wrong);
            next = DensityOperator::new(next.matrix() + w.matrix(), rho.layout().clone())?;
        }
        rho = next;
    }
    let rot = register_rotation();
    for i in 0..m {
        let spin = rho.layout().require(side.spin(i))?;
        rho = rho.apply_operator(&rot, &[spin])?;
    }
    Ok(rho)
}

/// `E[ψ ψ^†]` of the renormalized noisy source `b_l (1 + α_l) e^{iθ_l} / sqrt(S)`.
pub fn source_density(base: &[C64], sigma_a: f64, sigma_p: f64) -> Matrix {
    let n = base.len();
    let phase = (-sigma_p * sigma_p).exp();
    let w: Vec<f64> = base.iter().map(|b| b.norm_sqr()).collect();
    let moments = amplitude_moments(&w, sigma_a);
    Matrix::from_fn(n, n, |l, lp| {
        let coherence = if l == lp { 1.0 } else { phase };
        base[l] * base[lp].conj() * moments[(l, lp)].re * coherence
    })
}

/// `E[X_l X_l' / S]` for `X_j ~ N(1, σ²)` and `S = sum_j w_j X_j²`.
fn amplitude_moments(w: &[f64], sigma: f64) -> Matrix {
    let n = w.len();
    let total: f64 = w.iter().sum();
    if sigma == 0.0 {
        return Matrix::from_element(n, n, C64::from(1.0 / total));
    }
    let v = sigma * sigma;
    // tilted-Gaussian moments of e^{-a X²}: order 0, 1 and 2
    let m0 = |a: f64| {
        let d = 1.0 + 2.0 * a * v;
        d.powf(-0.5) * (-a / d).exp()
    };
    let m1 = |a: f64| m0(a) / (1.0 + 2.0 * a * v);
    let m2 = |a: f64| {
        let d = 1.0 + 2.0 * a * v;
        m0(a) * (v / d + 1.0 / (d * d))
    };
    let mut out = Matrix::zeros(n, n);
    let (nodes, weights) = gauss_legendre(16);
    const PANELS: usize = 256;
    for panel in 0..PANELS {
        let lo = panel as f64 / PANELS as f64;
        let hi = (panel + 1) as f64 / PANELS as f64;
        for (x, wq) in nodes.iter().zip(&weights) {
            // s = t / (1 - t) maps [0, 1) onto [0, ∞)
            let t = lo + (hi - lo) * (x + 1.0) / 2.0;
            let s = t / (1.0 - t);
            let jac = (hi - lo) / 2.0 * wq / ((1.0 - t) * (1.0 - t));
            let base: Vec<f64> = w.iter().map(|wj| m0(s * wj)).collect();
            let all: f64 = base.iter().product();
            if all == 0.0 && base.iter().all(|b| *b == 0.0) {
                continue;
            }
            for l in 0..n {
                for lp in 0..n {
                    let rest: f64 = (0..n).filter(|&j| j != l && j != lp).map(|j| base[j]).product();
                    let core = if l == lp { m2(s * w[l]) } else { m1(s * w[l]) * m1(s * w[lp]) };
                    out[(l, lp)] += C64::from(jac * rest * core);
                }
            }
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Exact all-keep metrics `(average fidelity, average attempts)` from the
/// exact single-link state. A pair that succeeded in round `k` of a
/// campaign ending in round `K` waits `K - k` extra rounds; the extra-round
/// distribution of one link against the maximum of the other `m - 1` is
/// summed in closed form until its cumulative mass reaches `1 - 1e-13`.
pub fn exact_all_keep(cfg: &ProtocolConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let link = qudit_link(&cfg.link_config())?;
    let p = link.herald_probability;
    let m = cfg.m;
    let attempts = expected_max_geometric(m, p)?;
    let rounds = RoundsRecord { success_rounds: vec![1], final_round: 1 };
    let waits = assign_wait_times(Strategy::Qudit, &rounds, cfg.distance_km, cfg.c_fiber)?;
    let t_round = round_duration(cfg.distance_km, cfg.c_fiber);
    let bell = bell_projector();
    let rho = &link.heralded_pair_rho[0];
    let fidelity = |d: u64| {
        let extra = d as f64 * t_round;
        let w = adjoint_pair_channel(&bell, waits.alice[0] + extra, waits.bob[0] + extra, &cfg.channel);
        (&w * rho).trace().re
    };
    if m == 1 || p >= 1.0 {
        return Ok((fidelity(0), attempts));
    }
    let ln_q = (-p).ln_1p();
    // P(D <= d) = sum_i C(m-1, i) (-1)^i p q^{i(d+1)} / (1 - q^{i+1})
    let cdf = |d: u64| -> f64 {
        let mut binom = 1.0;
        let mut sum = 0.0;
        for i in 0..m {
            if i > 0 {
                binom *= (m - i) as f64 / i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let num = (i as f64 * (d + 1) as f64 * ln_q).exp();
            let den = -((i + 1) as f64 * ln_q).exp_m1();
            sum += sign * binom * p * num / den;
        }
        sum
    };
    let mut mean = 0.0;
    let mut prev = 0.0;
    let mut d = 0u64;
    loop {
        let c = cdf(d);
        mean += (c - prev) * fidelity(d);
        prev = c;
        if c >= 1.0 - 1e-13 || d > 100_000_000 {
            break;
        }
        d += 1;
    }
    Ok((mean / prev, attempts))
}

/// `E[max of m iid geometric(p)]` by inclusion-exclusion over the survival
/// functions: `sum_{j=1}^m (-1)^{j+1} C(m, j) / (1 - (1-p)^j)`.
pub fn expected_max_geometric(m: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("success probability {p} outside (0, 1]")));
    }
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 1..=m {
        binom *= (m + 1 - j) as f64 / j as f64;
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        // 1 - q^j without cancellation for small p
        let denom = -((j as f64) * (-p).ln_1p()).exp_m1();
        sum += sign * binom / denom;
    }
    Ok(sum)
}
