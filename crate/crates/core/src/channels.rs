//! Spin-memory decoherence: pure dephasing, generalized amplitude damping
//! and the waiting times each stored qubit accrues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{c, pauli_z, DensityOperator, Matrix, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Amplitude-damping time (s).
    pub t1: f64,
    /// Pure-dephasing time (s).
    pub t_p: f64,
    /// Steady-state population of `|0>`.
    pub a_beta: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { t1: 10e-3, t_p: 5e-3, a_beta: 0.5 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) || !(self.t_p > 0.0) {
            return Err(Error::Domain("T1 and T_p must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.a_beta) {
            return Err(Error::Domain(format!("a_beta = {} outside [0, 1]", self.a_beta)));
        }
        Ok(())
    }
}

/// `A0 = sqrt((1+e^{-t/Tp})/2) I`, `A1 = sqrt((1-e^{-t/Tp})/2) Z`.
pub fn dephasing_kraus(t: f64, t_p: f64) -> [Matrix; 2] {
    let e = (-t / t_p).exp();
    let a0 = Matrix::identity(2, 2) * C64::from(((1.0 + e) / 2.0).sqrt());
    let a1 = pauli_z() * C64::from(((1.0 - e) / 2.0).sqrt());
    [a0, a1]
}

/// Generalized amplitude damping towards `diag(a_beta, 1 - a_beta)`.
pub fn gad_kraus(t: f64, t1: f64, a_beta: f64) -> [Matrix; 4] {
    let damp = (-t / (2.0 * t1)).exp();
    let flow = (1.0 - (-t / t1).exp()).max(0.0).sqrt();
    let up = a_beta.sqrt();
    let down = (1.0 - a_beta).sqrt();
    let m = |a: f64, b: f64, cc: f64, d: f64, s: f64| {
        Matrix::from_row_slice(2, 2, &[c(s * a, 0.0), c(s * b, 0.0), c(s * cc, 0.0), c(s * d, 0.0)])
    };
    [
        m(1.0, 0.0, 0.0, damp, up),
        m(0.0, flow, 0.0, 0.0, up),
        m(damp, 0.0, 0.0, 1.0, down),
        m(0.0, 0.0, flow, 0.0, down),
    ]
}

/// Composite Kraus set `{A_i E_j}` (damping first, then dephasing).
pub fn memory_kraus(t: f64, p: &ChannelParams) -> Vec<Matrix> {
    let a = dephasing_kraus(t, p.t_p);
    let e = gad_kraus(t, p.t1, p.a_beta);
    a.iter().flat_map(|ai| e.iter().map(move |ej| ai * ej)).collect()
}

/// Applies the memory channel for a wait of `t` seconds to one qubit factor.
pub fn memory_channel(rho: &DensityOperator, qubit: usize, t: f64, p: &ChannelParams) -> Result<DensityOperator> {
    if t < 0.0 {
        return Err(Error::Domain(format!("negative wait time {t}")));
    }
    rho.apply_kraus(&memory_kraus(t, p), qubit)
}

/// Heisenberg-picture memory channel on a two-qubit observable, with waits
/// `t_a` on the first factor and `t_b` on the second: returns `W` such that
/// `Tr(W rho) = Tr(obs Λ_a ⊗ Λ_b(rho))`.
pub(crate) fn adjoint_pair_channel(obs: &Matrix, t_a: f64, t_b: f64, p: &ChannelParams) -> Matrix {
    let ka = memory_kraus(t_a, p);
    let kb = memory_kraus(t_b, p);
    let id = Matrix::identity(2, 2);
    let mut stage = Matrix::zeros(4, 4);
    for k in &kb {
        let full = id.kronecker(k);
        stage += full.adjoint() * obs * &full;
    }
    let mut out = Matrix::zeros(4, 4);
    for k in &ka {
        let full = k.kronecker(&id);
        out += full.adjoint() * &stage * &full;
    }
    out
}

pub(crate) fn bell_projector() -> Matrix {
    let mut m = Matrix::from_element(4, 4, ZERO);
    for &i in &[0, 3] {
        for &j in &[0, 3] {
            m[(i, j)] = ONE * 0.5;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Qudit,
    QubitAllKeep,
    QubitOneShot,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Qudit, Strategy::QubitAllKeep, Strategy::QubitOneShot];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Qudit => "qudit",
            Strategy::QubitAllKeep => "qubit_all_keep",
            Strategy::QubitOneShot => "qubit_one_shot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Strategy::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Success round (1-based) of every link plus the final round of the campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundsRecord {
    pub success_rounds: Vec<u64>,
    pub final_round: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaitTimes {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

/// Duration of one attempt round: flight to Bob plus the heralding reply.
pub fn round_duration(distance_km: f64, c_fiber: f64) -> f64 {
    2.0 * distance_km / c_fiber
}

/// Waiting times per pair. Simultaneous strategies ignore `rounds` beyond its
/// length; all-keep pairs wait `(K - k)` extra rounds on both ends.
pub fn assign_wait_times(strategy: Strategy, rounds: &RoundsRecord, distance_km: f64, c_fiber: f64) -> Result<WaitTimes> {
    let one_way = distance_km / c_fiber;
    let n = rounds.success_rounds.len();
    match strategy {
        Strategy::Qudit | Strategy::QubitOneShot => Ok(WaitTimes { alice: vec![2.0 * one_way; n], bob: vec![one_way; n] }),
        Strategy::QubitAllKeep => {
            let k_final = rounds.final_round;
            let max = rounds.success_rounds.iter().copied().max().unwrap_or(0);
            if rounds.success_rounds.iter().any(|&k| k == 0 || k > k_final) {
                return Err(Error::RoundsRecord(format!("success rounds {:?} not within 1..={k_final}", rounds.success_rounds)));
            }
            if n > 0 && max != k_final {
                return Err(Error::RoundsRecord(format!("final round {k_final} differs from last success {max}")));
            }
            let t_round = round_duration(distance_km, c_fiber);
            let extra: Vec<f64> = rounds.success_rounds.iter().map(|&k| (k_final - k) as f64 * t_round).collect();
            Ok(WaitTimes {
                alice: extra.iter().map(|e| 2.0 * one_way + e).collect(),
                bob: extra.iter().map(|e| one_way + e).collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity_to_bell, kraus_completeness_deviation, HilbertLayout, PureState};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn single(m: [[f64; 2]; 2]) -> DensityOperator {
        let mat = Matrix::from_row_slice(2, 2, &[c(m[0][0], 0.0), c(m[0][1], 0.0), c(m[1][0], 0.0), c(m[1][1], 0.0)]);
        DensityOperator::new(mat, HilbertLayout::qubits(1)).unwrap()
    }

    fn bell() -> DensityOperator {
        let h = FRAC_1_SQRT_2;
        PureState::new(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)], HilbertLayout::qubits(2)).unwrap().to_density()
    }

    #[test]
    fn dephasing_examples() {
        let plus = single([[0.5, 0.5], [0.5, 0.5]]);
        let out = plus.apply_kraus(&dephasing_kraus(0.0, 5e-3), 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].re, 0.5, epsilon = 1e-15);
        let out = plus.apply_kraus(&dephasing_kraus(5e-3, 5e-3), 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].re, 0.5 * (-1.0f64).exp(), epsilon = 1e-15);
        let out = plus.apply_kraus(&dephasing_kraus(1e3, 5e-3), 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gad_examples() {
        let one = single([[0.0, 0.0], [0.0, 1.0]]);
        let out = one.apply_kraus(&gad_kraus(0.0, 10e-3, 0.3), 0).unwrap();
        assert_eq!(out, one);
        let out = one.apply_kraus(&gad_kraus(10e-3, 10e-3, 1.0), 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(1, 1)].re, (-1.0f64).exp(), epsilon = 1e-15);
        let plus = single([[0.5, 0.5], [0.5, 0.5]]);
        let out = plus.apply_kraus(&gad_kraus(1e3, 10e-3, 0.3), 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(out.matrix()[(1, 1)].re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(out.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kraus_sets_complete() {
        for &t in &[0.0, 1e-6, 1e-3, 0.02, 10.0] {
            assert!(kraus_completeness_deviation(&dephasing_kraus(t, 5e-3), 2) < 1e-12);
            for &a in &[0.0, 0.2, 0.5, 1.0] {
                assert!(kraus_completeness_deviation(&gad_kraus(t, 10e-3, a), 2) < 1e-12);
            }
        }
    }

    #[test]
    fn memory_channel_examples() {
        let p = ChannelParams::default();
        let b = bell();
        assert_eq!(memory_channel(&b, 0, 0.0, &p).unwrap(), b);

        let no_damping = ChannelParams { t1: f64::INFINITY, ..p };
        let mut rho = b.clone();
        for q in 0..2 {
            rho = memory_channel(&rho, q, p.t_p, &no_damping).unwrap();
        }
        let expected = (1.0 + (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(fidelity_to_bell(&rho).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.5677, epsilon = 1e-4);

        let mut rho = b;
        for q in 0..2 {
            rho = memory_channel(&rho, q, 1e3, &p).unwrap();
        }
        assert_abs_diff_eq!(fidelity_to_bell(&rho).unwrap(), 0.25, epsilon = 1e-12);
        assert!(memory_channel(&rho, 0, -1.0, &p).is_err());
    }

    #[test]
    fn adjoint_channel_matches_forward_fidelity() {
        let p = ChannelParams { a_beta: 0.3, ..Default::default() };
        let (ta, tb) = (1.3e-3, 0.4e-3);
        let b = bell();
        let fwd = memory_channel(&memory_channel(&b, 0, ta, &p).unwrap(), 1, tb, &p).unwrap();
        let w = adjoint_pair_channel(&bell_projector(), ta, tb, &p);
        let via_adjoint = (w * b.matrix()).trace().re;
        assert_abs_diff_eq!(fidelity_to_bell(&fwd).unwrap(), via_adjoint, epsilon = 1e-14);
    }

    #[test]
    fn wait_time_examples() {
        let c_fiber = 2e5;
        let rec = RoundsRecord { success_rounds: vec![4, 4], final_round: 4 };
        let w = assign_wait_times(Strategy::Qudit, &rec, 20.0, c_fiber).unwrap();
        assert_abs_diff_eq!(w.alice[0], 200e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(w.bob[1], 100e-6, epsilon = 1e-18);

        let keep = assign_wait_times(Strategy::QubitAllKeep, &rec, 20.0, c_fiber).unwrap();
        assert_eq!(keep, w);

        let rec = RoundsRecord { success_rounds: vec![1, 4], final_round: 4 };
        let keep = assign_wait_times(Strategy::QubitAllKeep, &rec, 20.0, c_fiber).unwrap();
        let l_over_c = 20.0 / c_fiber;
        assert_abs_diff_eq!(keep.alice[0] - 2.0 * l_over_c, 6.0 * l_over_c, epsilon = 1e-15);
        assert_abs_diff_eq!(keep.bob[0] - l_over_c, 6.0 * l_over_c, epsilon = 1e-15);

        let bad = RoundsRecord { success_rounds: vec![1, 5], final_round: 4 };
        assert!(matches!(assign_wait_times(Strategy::QubitAllKeep, &bad, 20.0, c_fiber), Err(Error::RoundsRecord(_))));
        let bad = RoundsRecord { success_rounds: vec![1, 2], final_round: 4 };
        assert!(assign_wait_times(Strategy::QubitAllKeep, &bad, 20.0, c_fiber).is_err());
    }
}
