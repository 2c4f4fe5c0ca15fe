//! Monte Carlo campaigns over many attempts and the qubit baselines built on
//! top of single-link campaigns.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{adjoint_pair_channel, assign_wait_times, bell_projector, RoundsRecord, Strategy};
use crate::error::{Error, Result};
use crate::optics::LossCause;
use crate::qstate::{Matrix, C64};

use super::engine::Pipeline;
use super::{pair_states, AttemptQuantiles, PairMetrics, ProtocolConfig, RateMetrics};

/// Trajectories per work unit. Fixed so that results do not depend on the
/// number of worker threads.
const CHUNK: u64 = 4096;

/// Aggregate of a trajectory campaign of the attempt pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub config: ProtocolConfig,
    pub trajectories: u64,
    pub heralds: u64,
    pub outcome_counts: Vec<u64>,
    pub loss_counts: BTreeMap<LossCause, u64>,
    /// Mean heralded pair states before memory decoherence.
    pub pair_states: Vec<Matrix>,
    /// Metrics with the minimum (single-round) memory waits.
    pub pairs: PairMetrics,
    pub rates: RateMetrics,
}

#[derive(Clone)]
struct Acc {
    n: u64,
    heralds: u64,
    outcomes: Vec<u64>,
    losses: [u64; 6],
    rho: Vec<Matrix>,
    fid: Vec<f64>,
    fid_sq: Vec<f64>,
    avg: f64,
    avg_sq: f64,
}

impl Acc {
    fn new(m: usize) -> Self {
        Self {
            n: 0,
            heralds: 0,
            outcomes: vec![0; 1 << m],
            losses: [0; 6],
            rho: vec![Matrix::zeros(4, 4); m],
            fid: vec![0.0; m],
            fid_sq: vec![0.0; m],
            avg: 0.0,
            avg_sq: 0.0,
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.n += o.n;
        self.heralds += o.heralds;
        for (a, b) in self.outcomes.iter_mut().zip(&o.outcomes) {
            *a += b;
        }
        for (a, b) in self.losses.iter_mut().zip(&o.losses) {
            *a += b;
        }
        for (a, b) in self.rho.iter_mut().zip(&o.rho) {
            *a += b;
        }
        for p in 0..self.fid.len() {
            self.fid[p] += o.fid[p];
            self.fid_sq[p] += o.fid_sq[p];
        }
        self.avg += o.avg;
        self.avg_sq += o.avg_sq;
    }
}

fn standard_error(sum: f64, sum_sq: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    ((sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt()
}

fn run_chunk(pipe: &Pipeline, base: &ChaCha8Rng, chunk: u64, total: u64, w: &Matrix) -> Result<Acc> {
    let m = pipe.m;
    let mut acc = Acc::new(m);
    let start = chunk * CHUNK;
    for idx in start..(start + CHUNK).min(total) {
        let mut rng = base.clone();
        rng.set_stream(idx);
        let res = pipe.attempt(&mut rng)?;
        acc.n += 1;
        let Some(k) = res.outcome.k else {
            let cause = res.outcome.loss_cause.expect("lost attempts carry a cause");
            acc.losses[LossCause::ALL.iter().position(|c| *c == cause).expect("known cause")] += 1;
            continue;
        };
        acc.heralds += 1;
        acc.outcomes[k] += 1;
        let states = pair_states(res.registers.as_ref().expect("heralded attempts carry registers"), m)?;
        let mut avg = 0.0;
        for (p, rho) in states.into_iter().enumerate() {
            let f = (w * &rho).trace().re;
            acc.fid[p] += f;
            acc.fid_sq[p] += f * f;
            avg += f;
            acc.rho[p] += rho;
        }
        avg /= m as f64;
        acc.avg += avg;
        acc.avg_sq += avg * avg;
    }
    Ok(acc)
}

/// Bell-fidelity observable after the memory waits of a single round.
fn minimum_wait_observable(cfg: &ProtocolConfig) -> Result<Matrix> {
    let rounds = RoundsRecord { success_rounds: vec![1], final_round: 1 };
    let waits = assign_wait_times(Strategy::Qudit, &rounds, cfg.distance_km, cfg.c_fiber)?;
    Ok(adjoint_pair_channel(&bell_projector(), waits.alice[0], waits.bob[0], &cfg.channel))
}

/// Runs `n_trajectories` attempts of the pipeline described by `cfg`
/// (its `strategy` is ignored). Trajectory `i` uses stream `i` of a ChaCha8
/// generator seeded with `cfg.seed`, so results are identical for any
/// thread count.
pub fn run_campaign(cfg: &ProtocolConfig) -> Result<Campaign> {
    let pipe = Pipeline::new(cfg)?;
    let w = minimum_wait_observable(cfg)?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.n_trajectories;
    let chunks = total.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Acc>> = (0..chunks).into_par_iter().map(|c| run_chunk(&pipe, &base, c, total, &w)).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Acc>> = (0..chunks).map(|c| run_chunk(&pipe, &base, c, total, &w)).collect();
    let mut acc = Acc::new(cfg.m);
    for part in parts {
        acc.merge(&part?);
    }
    if acc.heralds == 0 {
        return Err(Error::NoHeralds { trajectories: total });
    }
    let h = acc.heralds as f64;
    let pair_states: Vec<Matrix> = acc.rho.iter().map(|r| r / C64::from(h)).collect();
    let per_pair_fidelity: Vec<f64> = pair_states.iter().map(|r| (&w * r).trace().re.clamp(0.0, 1.0)).collect();
    let per_pair_stderr = (0..cfg.m).map(|p| standard_error(acc.fid[p], acc.fid_sq[p], acc.heralds)).collect();
    let average_fidelity = per_pair_fidelity.iter().sum::<f64>() / cfg.m as f64;
    let success_probability = h / total as f64;
    Ok(Campaign {
        config: cfg.clone(),
        trajectories: total,
        heralds: acc.heralds,
        outcome_counts: acc.outcomes,
        loss_counts: LossCause::ALL.iter().copied().zip(acc.losses).collect(),
        pair_states,
        pairs: PairMetrics {
            per_pair_fidelity,
            per_pair_stderr,
            average_fidelity,
            standard_error: standard_error(acc.avg, acc.avg_sq, acc.heralds),
        },
        rates: RateMetrics {
            success_probability,
            average_attempts: 1.0 / success_probability,
            attempts_quantiles: AttemptQuantiles::geometric(success_probability),
        },
    })
}

/// Draws the success round of a geometric(`p`) link from a uniform number.
fn geometric_round(u: f64, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
}

/// Qubit-baseline metrics from a campaign of the single-link pipeline.
pub fn qubit_metrics_from_link(cfg: &ProtocolConfig, link: &Campaign) -> Result<(PairMetrics, RateMetrics)> {
    if link.config.m != 1 {
        return Err(Error::Domain("qubit baselines need a single-link campaign".into()));
    }
    let m = cfg.m;
    let p = link.rates.success_probability;
    let f_link = link.pairs.average_fidelity;
    let se_link = link.pairs.standard_error;
    match cfg.strategy {
        Strategy::QubitOneShot => {
            let success = p.powi(m as i32);
            Ok((
                PairMetrics {
                    per_pair_fidelity: vec![f_link; m],
                    per_pair_stderr: vec![se_link; m],
                    average_fidelity: f_link,
                    standard_error: se_link,
                },
                RateMetrics {
                    success_probability: success,
                    average_attempts: 1.0 / success,
                    attempts_quantiles: AttemptQuantiles::geometric(success),
                },
            ))
        }
        Strategy::QubitAllKeep => all_keep_metrics(cfg, &link.pair_states[0], p, se_link),
        Strategy::Qudit => Err(Error::Domain("qudit strategy is not a qubit baseline".into())),
    }
}

fn all_keep_metrics(cfg: &ProtocolConfig, rho_link: &Matrix, p: f64, se_link: f64) -> Result<(PairMetrics, RateMetrics)> {
    let m = cfg.m;
    let n = cfg.n_trajectories;
    // independent of the attempt streams, which use the plain seed
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let bell = bell_projector();
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let mut fidelity_after = |extra: u64, waits_a: f64, waits_b: f64| -> f64 {
        *cache.entry(extra).or_insert_with(|| bell_overlap_after(&bell, rho_link, waits_a, waits_b, cfg))
    };
    let mut attempts = Vec::with_capacity(n as usize);
    let (mut fid, mut fid_sq) = (vec![0.0; m], vec![0.0; m]);
    let (mut avg, mut avg_sq) = (0.0, 0.0);
    let mut rounds = vec![0u64; m];
    for _ in 0..n {
        for r in rounds.iter_mut() {
            *r = geometric_round(rng.random::<f64>(), p);
        }
        let final_round = *rounds.iter().max().expect("m >= 1");
        let record = RoundsRecord { success_rounds: rounds.clone(), final_round };
        let waits = assign_wait_times(Strategy::QubitAllKeep, &record, cfg.distance_km, cfg.c_fiber)?;
        let mut a = 0.0;
        for j in 0..m {
            let f = fidelity_after(final_round - rounds[j], waits.alice[j], waits.bob[j]);
            fid[j] += f;
            fid_sq[j] += f * f;
            a += f;
        }
        a /= m as f64;
        avg += a;
        avg_sq += a * a;
        attempts.push(final_round);
    }
    let nf = n as f64;
    let mean_attempts = attempts.iter().sum::<u64>() as f64 / nf;
    let per_pair_fidelity: Vec<f64> = fid.iter().map(|f| f / nf).collect();
    // campaign spread plus the uncertainty of the link state itself
    let combine = |se: f64| (se * se + se_link * se_link).sqrt();
    let per_pair_stderr = (0..m).map(|j| combine(standard_error(fid[j], fid_sq[j], n))).collect();
    Ok((
        PairMetrics {
            average_fidelity: per_pair_fidelity.iter().sum::<f64>() / m as f64,
            per_pair_fidelity,
            per_pair_stderr,
            standard_error: combine(standard_error(avg, avg_sq, n)),
        },
        RateMetrics {
            success_probability: 1.0 / mean_attempts,
            average_attempts: mean_attempts,
            attempts_quantiles: AttemptQuantiles::empirical(&mut attempts),
        },
    ))
}

fn bell_overlap_after(bell: &Matrix, rho: &Matrix, t_a: f64, t_b: f64, cfg: &ProtocolConfig) -> f64 {
    let w = adjoint_pair_channel(bell, t_a, t_b, &cfg.channel);
    (&w * rho).trace().re.clamp(0.0, 1.0)
}

/// Runs a qubit baseline: a campaign of the single-link pipeline followed by
/// the strategy's round statistics.
pub fn run_qubit_strategy(cfg: &ProtocolConfig) -> Result<(PairMetrics, RateMetrics)> {
    let link = run_campaign(&cfg.link_config())?;
    qubit_metrics_from_link(cfg, &link)
}

/// Fidelity and attempt statistics for `cfg.strategy`.
pub fn estimate_metrics(cfg: &ProtocolConfig) -> Result<(PairMetrics, RateMetrics)> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::Qudit => {
            let c = run_campaign(cfg)?;
            Ok((c.pairs, c.rates))
        }
        _ => run_qubit_strategy(cfg),
    }
}
