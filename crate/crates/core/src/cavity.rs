//! Spin-photon controlled-phase gate from single-sided cavity reflection and
//! the binary-routed interaction between a time-bin photon and a register.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{switch_channel, SwitchBranch, SwitchParams};
use crate::qstate::{c, Matrix, PureState, Subsystem, C64, ONE, ZERO};

/// Rates in rad/s. Only the ratios entering the reflection coefficients
/// matter for the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub delta0: f64,
    pub delta1: f64,
    pub g0: f64,
    pub g1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub kappa_a: f64,
    pub kappa: f64,
    /// Detuning of the incoming photon from the cavity.
    pub omega: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self::from_cooperativities(0.0, 100.0, 0.95)
    }
}

impl GateParams {
    const KAPPA: f64 = 1.0e11;
    const GAMMA: f64 = 1.0e9;

    /// Resonant gate with the given cooperativities and out-coupling ratio.
    pub fn from_cooperativities(c0: f64, c1: f64, kappa_a_ratio: f64) -> Self {
        let (kappa, gamma) = (Self::KAPPA, Self::GAMMA);
        Self {
            delta0: 0.0,
            delta1: 0.0,
            g0: (c0 * kappa * gamma).sqrt(),
            g1: (c1 * kappa * gamma).sqrt(),
            gamma0: gamma,
            gamma1: gamma,
            kappa_a: kappa_a_ratio * kappa,
            kappa,
            omega: 0.0,
        }
    }

    pub fn cooperativity0(&self) -> f64 {
        self.g0 * self.g0 / (self.kappa * self.gamma0)
    }

    pub fn cooperativity1(&self) -> f64 {
        self.g1 * self.g1 / (self.kappa * self.gamma1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Domain("kappa must be positive".into()));
        }
        if !(0.0..=self.kappa).contains(&self.kappa_a) {
            return Err(Error::Domain(format!("kappa_a = {} outside [0, kappa]", self.kappa_a)));
        }
        if self.gamma0 <= 0.0 || self.gamma1 <= 0.0 {
            return Err(Error::Domain("spontaneous rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPair {
    pub r0: C64,
    pub r1: C64,
}

impl ReflectionPair {
    pub const IDEAL: ReflectionPair = ReflectionPair { r0: C64 { re: -1.0, im: 0.0 }, r1: ONE };
    pub const MIRROR: ReflectionPair = ReflectionPair { r0: ONE, r1: ONE };

    /// Photon survival when the spin is in `|+>`.
    pub fn plus_state_transmission(&self) -> f64 {
        0.5 * (self.r0.norm_sqr() + self.r1.norm_sqr())
    }
}

fn reflection(omega: f64, delta: f64, coop: f64, gamma: f64, kappa: f64, ratio: f64) -> C64 {
    if coop.is_infinite() {
        return ONE;
    }
    let atom = if coop == 0.0 { ZERO } else { C64::from(coop) / (c(0.0, -(omega + delta) / gamma) + 0.5) };
    ONE - C64::from(ratio) / (c(0.5, -omega / kappa) + atom)
}

pub fn reflection_coefficients(p: &GateParams) -> ReflectionPair {
    let ratio = p.kappa_a / p.kappa;
    ReflectionPair {
        r0: reflection(p.omega, p.delta0, p.cooperativity0(), p.gamma0, p.kappa, ratio),
        r1: reflection(p.omega, p.delta1, p.cooperativity1(), p.gamma1, p.kappa, ratio),
    }
}

/// Per-spin map for one scattering stage: `diag(r0, r1)` when the bin is
/// routed into the cavity, identity otherwise.
pub fn stage_operator(r: &ReflectionPair, to_cavity: bool) -> [C64; 2] {
    if to_cavity {
        [r.r0, r.r1]
    } else {
        [ONE, ONE]
    }
}

/// Post-interaction single-spin rotation `Z H`, which maps `|+> -> |0>` and
/// `-|-> -> |1>` so the ideal stage writes bit `l_i` onto the spin with a
/// `+` sign.
pub fn register_rotation() -> Matrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(-h, 0.0), c(h, 0.0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    pub fn spin(&self, i: usize) -> Subsystem {
        match self {
            Side::Alice => Subsystem::Alice(i),
            Side::Bob => Subsystem::Bob(i),
        }
    }
}

/// One switch + cavity stage addressing `spin`, for bins with bit `bit` set.
pub fn scatter_stage(
    state: &PureState,
    spin: Subsystem,
    bit: usize,
    r: &ReflectionPair,
    switch: &SwitchParams,
) -> Result<Vec<SwitchBranch>> {
    let layout = state.layout();
    let photon = layout.require(Subsystem::Photon)?;
    let spin_idx = layout.require(spin)?;
    if layout.factor_dim(spin_idx) != 2 {
        return Err(Error::Layout(format!("{spin} is not a qubit")));
    }
    let bins = layout.factor_dim(photon);
    if bit >= bins.trailing_zeros() as usize {
        return Err(Error::Layout(format!("bit {bit} exceeds photon dimension {bins}")));
    }
    let intended: Vec<bool> = (0..bins).map(|l| (l >> bit) & 1 == 1).collect();
    let mut branches = switch_channel(state, switch, &intended);
    let photon_off = layout.offsets(&[photon]);
    let spin_off = layout.offsets(&[spin_idx]);
    let rest_idx: Vec<usize> = (0..layout.len()).filter(|&i| i != photon && i != spin_idx).collect();
    let rest_off = layout.offsets(&rest_idx);
    for br in &mut branches {
        let weight = br.state.branch_weight();
        let mut amps = br.state.amplitudes().to_vec();
        for (l, &po) in photon_off.iter().enumerate() {
            let op = stage_operator(r, br.to_cavity[l]);
            for (s, &so) in spin_off.iter().enumerate() {
                for &ro in &rest_off {
                    amps[po + so + ro] *= op[s];
                }
            }
        }
        br.state = PureState::new(amps, layout.clone())?.with_branch_weight(weight);
    }
    Ok(branches)
}

/// Stages `i = m-1 .. 0` on one side followed by [`register_rotation`] on
/// each of its spins. Returns the surviving incoherent branches.
pub fn register_interaction(state: &PureState, side: Side, r: &ReflectionPair, switch: &SwitchParams) -> Result<Vec<PureState>> {
    let photon = state.layout().require(Subsystem::Photon)?;
    let m = state.layout().factor_dim(photon).trailing_zeros() as usize;
    let mut branches = vec![state.clone()];
    for i in (0..m).rev() {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for b in &branches {
            next.extend(scatter_stage(b, side.spin(i), i, r, switch)?.into_iter().map(|br| br.state));
        }
        branches = next;
    }
    let rot = register_rotation();
    branches
        .into_iter()
        .map(|mut b| {
            for i in 0..m {
                b = b.apply_to(&rot, side.spin(i))?;
            }
            Ok(b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::HilbertLayout;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn photon_and_side(m: usize, side: Side) -> HilbertLayout {
        let mut f = vec![(Subsystem::Photon, 1 << m)];
        f.extend((0..m).rev().map(|i| (side.spin(i), 2)));
        HilbertLayout::new(f).unwrap()
    }

    fn plus_register(m: usize) -> Vec<C64> {
        vec![c(0.5f64.powf(m as f64 / 2.0), 0.0); 1 << m]
    }

    fn input(photon: &[C64], m: usize, side: Side) -> PureState {
        let reg = plus_register(m);
        let amps = photon.iter().flat_map(|p| reg.iter().map(move |r| p * r)).collect();
        PureState::new(amps, photon_and_side(m, side)).unwrap()
    }

    #[test]
    fn reflection_gold_values() {
        let p = GateParams { kappa_a: 1.0e11, ..GateParams::from_cooperativities(0.0, 1e30, 1.0) };
        let r = reflection_coefficients(&p);
        assert_abs_diff_eq!(r.r0.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r0.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r1.re, 1.0, epsilon = 1e-12);

        let r = reflection_coefficients(&GateParams::default());
        assert_abs_diff_eq!(r.r1.re, 1.0 - 0.95 / 200.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r1.re, 0.9952618, epsilon = 1e-6);
        assert_abs_diff_eq!(r.r0.re, -0.9, epsilon = 1e-15);

        let closed = GateParams::from_cooperativities(3.0, 100.0, 0.0);
        let r = reflection_coefficients(&closed);
        assert_eq!(r, ReflectionPair::MIRROR);

        let inf = reflection_coefficients(&GateParams::from_cooperativities(0.0, f64::INFINITY, 1.0));
        assert_eq!(inf, ReflectionPair::IDEAL);
    }

    #[test]
    fn c0_path_detuned_gate() {
        // Coupled |0> far detuned behaves nearly like an empty cavity.
        let mut p = GateParams::from_cooperativities(50.0, 100.0, 1.0);
        p.delta0 = 1e4 * p.gamma0;
        let r = reflection_coefficients(&p);
        let empty = reflection_coefficients(&GateParams::from_cooperativities(0.0, 100.0, 1.0));
        assert!((r.r0 - empty.r0).norm() < 0.02);
        assert!(r.r0.norm() <= 1.0 + 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn reflections_never_amplify(
            c0 in 0.0f64..1e3, c1 in 0.0f64..1e3, ratio in 0.0f64..=1.0,
            d0 in -1e3f64..1e3, d1 in -1e3f64..1e3, w in -10.0f64..10.0,
        ) {
            let mut p = GateParams::from_cooperativities(c0, c1, ratio);
            p.delta0 = d0 * p.gamma0;
            p.delta1 = d1 * p.gamma1;
            p.omega = w * p.kappa;
            let r = reflection_coefficients(&p);
            prop_assert!(r.r0.norm() <= 1.0 + 1e-12);
            prop_assert!(r.r1.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ideal_stage_flips_plus_to_minus() {
        let mut photon = vec![ZERO; 2];
        photon[1] = ONE;
        let s = input(&photon, 1, Side::Alice);
        let br = scatter_stage(&s, Subsystem::Alice(0), 0, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
        assert_eq!(br.len(), 1);
        let spin = br[0].state.contract(0, &[ZERO, ONE]).unwrap();
        let h = FRAC_1_SQRT_2;
        let overlap = spin.amplitudes()[0] * h - spin.amplitudes()[1] * h;
        assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stage_leaves_unset_bins_alone() {
        let photon = vec![ONE, ZERO];
        let s = input(&photon, 1, Side::Alice);
        let br = scatter_stage(&s, Subsystem::Alice(0), 0, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
        assert_eq!(br[0].state.amplitudes(), s.amplitudes());

        let sw = SwitchParams { eta_sw: 0.9, e_sw: 0.0 };
        let br = scatter_stage(&s, Subsystem::Alice(0), 0, &ReflectionPair::IDEAL, &sw).unwrap();
        assert_abs_diff_eq!(br[0].state.probability(), 0.9, epsilon = 1e-15);
    }

    #[test]
    fn mirror_gate_is_identity() {
        let photon = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let s = input(&photon, 1, Side::Bob);
        let br = scatter_stage(&s, Subsystem::Bob(0), 0, &ReflectionPair::MIRROR, &SwitchParams::IDEAL).unwrap();
        assert_eq!(br[0].state.amplitudes(), s.amplitudes());
    }

    #[test]
    fn stage_branch_weights_account_for_switch_loss() {
        let photon = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let s = input(&photon, 1, Side::Alice);
        let sw = SwitchParams::default();
        let br = scatter_stage(&s, Subsystem::Alice(0), 0, &ReflectionPair::IDEAL, &sw).unwrap();
        let total: f64 = br.iter().map(|b| b.state.branch_weight()).sum();
        assert_abs_diff_eq!(1.0 - total, 1.0 - sw.eta_sw, epsilon = 1e-12);
    }

    #[test]
    fn lossy_reflection_reduces_norm_by_spin_population() {
        // photon in the routed bin, spin cos|0> + sin|1>
        let layout = photon_and_side(1, Side::Alice);
        let (ca, sa) = (0.6f64, 0.8f64);
        let amps = vec![ZERO, ZERO, c(ca, 0.0), c(sa, 0.0)];
        let s = PureState::new(amps, layout).unwrap();
        let r = ReflectionPair { r0: c(-1.0, 0.0), r1: c(0.9, 0.0) };
        let br = scatter_stage(&s, Subsystem::Alice(0), 0, &r, &SwitchParams::IDEAL).unwrap();
        let expected = ca * ca + sa * sa * 0.81;
        assert_abs_diff_eq!(br[0].state.norm_sqr(), expected, epsilon = 1e-14);
    }

    #[test]
    fn photon_five_writes_101() {
        let m = 3;
        let mut photon = vec![ZERO; 8];
        photon[5] = ONE;
        let s = input(&photon, m, Side::Alice);
        let out = register_interaction(&s, Side::Alice, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
        assert_eq!(out.len(), 1);
        let reg = out[0].contract(0, &photon).unwrap();
        assert_abs_diff_eq!(reg.amplitudes()[0b101].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reg.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn photon_zero_leaves_register_in_zero() {
        let m = 2;
        let mut photon = vec![ZERO; 4];
        photon[0] = ONE;
        let s = input(&photon, m, Side::Bob);
        let out = register_interaction(&s, Side::Bob, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
        let reg = out[0].contract(0, &photon).unwrap();
        assert_abs_diff_eq!(reg.amplitudes()[0].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_qudit_gives_maximally_entangled_spin_photon_state() {
        let m = 2;
        let s = input(&[c(0.5, 0.0); 4], m, Side::Alice);
        let out = register_interaction(&s, Side::Alice, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
        let a = out[0].amplitudes();
        // index = l * 4 + register; expected amplitude 1/2 on (l, l)
        for l in 0..4 {
            for reg in 0..4 {
                let expect = if reg == l { 0.5 } else { 0.0 };
                assert_abs_diff_eq!(a[l * 4 + reg].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(a[l * 4 + reg].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ideal_gate_writes_every_bin_for_m_up_to_5() {
        for m in 1..=5usize {
            for l in 0..(1usize << m) {
                let mut photon = vec![ZERO; 1 << m];
                photon[l] = ONE;
                let s = input(&photon, m, Side::Bob);
                let out = register_interaction(&s, Side::Bob, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).unwrap();
                let reg = out[0].contract(0, &photon).unwrap();
                assert!((reg.amplitudes()[l].norm_sqr() - 1.0).abs() < 1e-12, "m={m} l={l}");
            }
        }
    }

    #[test]
    fn scatter_stage_layout_errors() {
        let s = PureState::new(vec![ONE, ZERO], HilbertLayout::qubits(1)).unwrap();
        assert!(scatter_stage(&s, Subsystem::Alice(0), 0, &ReflectionPair::IDEAL, &SwitchParams::IDEAL).is_err());
    }
}
