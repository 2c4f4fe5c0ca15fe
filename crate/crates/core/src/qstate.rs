//! Dense composite-space states: tensor products, partial traces, Kraus maps,
//! projective measurement and Bell-pair fidelity.
//!
//! Index convention: the first factor of a [`HilbertLayout`] is the most
//! significant digit of the flat index. The protocol layout is
//! `[photon, A_{m-1} .. A_0, B_{m-1} .. B_0]`, so a register basis state
//! `|l_{m-1} .. l_0>` has flat index `l` within its side.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

/// Tolerance for algebraic identities (completeness, normalization).
pub const ALGEBRA_TOL: f64 = 1e-10;
/// Tolerance for positivity checks.
pub const POSITIVITY_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subsystem {
    Photon,
    Alice(usize),
    Bob(usize),
    Aux(usize),
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsystem::Photon => write!(f, "photon"),
            Subsystem::Alice(i) => write!(f, "A{i}"),
            Subsystem::Bob(i) => write!(f, "B{i}"),
            Subsystem::Aux(i) => write!(f, "aux{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    factors: Vec<(Subsystem, usize)>,
}

impl HilbertLayout {
    pub fn new(factors: Vec<(Subsystem, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(label, dim) in &factors {
            if dim == 0 {
                return Err(Error::Layout(format!("factor {label} has dimension 0")));
            }
            if !seen.insert(label) {
                return Err(Error::Layout(format!("duplicate label {label}")));
            }
        }
        Ok(Self { factors })
    }

    /// Qubit-only layout with auxiliary labels `aux0, aux1, ...`.
    pub fn qubits(n: usize) -> Self {
        Self { factors: (0..n).map(|i| (Subsystem::Aux(i), 2)).collect() }
    }

    /// `[A_{m-1} .. A_0, B_{m-1} .. B_0]`
    pub fn registers(m: usize) -> Self {
        let alice = (0..m).rev().map(|i| (Subsystem::Alice(i), 2));
        let bob = (0..m).rev().map(|i| (Subsystem::Bob(i), 2));
        Self { factors: alice.chain(bob).collect() }
    }

    /// `[photon (2^m bins), A_{m-1} .. A_0, B_{m-1} .. B_0]`
    pub fn protocol(m: usize) -> Self {
        let mut factors = vec![(Subsystem::Photon, 1 << m)];
        factors.extend(Self::registers(m).factors);
        Self { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.1).product()
    }

    pub fn factor_dim(&self, index: usize) -> usize {
        self.factors[index].1
    }

    pub fn label(&self, index: usize) -> Subsystem {
        self.factors[index].0
    }

    pub fn labels(&self) -> impl Iterator<Item = Subsystem> + '_ {
        self.factors.iter().map(|f| f.0)
    }

    pub fn dims(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().map(|f| f.1)
    }

    pub fn position(&self, label: Subsystem) -> Option<usize> {
        self.factors.iter().position(|f| f.0 == label)
    }

    pub(crate) fn require(&self, label: Subsystem) -> Result<usize> {
        self.position(label)
            .ok_or_else(|| Error::Layout(format!("layout has no subsystem {label}")))
    }

    pub fn concat(&self, other: &HilbertLayout) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().copied());
        Self::new(factors)
    }

    fn check_indices(&self, indices: &[usize]) -> Result<()> {
        let mut seen = HashSet::new();
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidSubsystem { index: i, len: self.len() });
            }
            if !seen.insert(i) {
                return Err(Error::Layout(format!("subsystem index {i} repeated")));
            }
        }
        Ok(())
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self { factors: indices.iter().map(|&i| self.factors[i]).collect() }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for i in (0..self.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].1;
        }
        strides
    }

    /// Flat-index contribution of every joint basis state of `subset`
    /// (first listed factor most significant).
    pub(crate) fn offsets(&self, subset: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &f in subset {
            let d = self.factors[f].1;
            let s = strides[f];
            out = out.iter().flat_map(|&o| (0..d).map(move |k| o + k * s)).collect();
        }
        out
    }

    fn complement(&self, subset: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|i| !subset.contains(i)).collect()
    }
}

/// Possibly non-normalized pure state. `branch_weight` is the classical
/// probability of the incoherent branch this state belongs to; the
/// amplitude norm carries coherent (lossy) attenuation.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    layout: HilbertLayout,
    branch_weight: f64,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, layout: HilbertLayout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::Layout(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        Ok(Self { amplitudes, layout, branch_weight: 1.0 })
    }

    pub fn basis(layout: HilbertLayout, index: usize) -> Result<Self> {
        let mut amps = vec![ZERO; layout.dim()];
        *amps
            .get_mut(index)
            .ok_or_else(|| Error::Layout(format!("basis index {index} out of range")))? = ONE;
        Self::new(amps, layout)
    }

    pub fn with_branch_weight(mut self, weight: f64) -> Self {
        self.branch_weight = weight;
        self
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn branch_weight(&self) -> f64 {
        self.branch_weight
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Total probability carried by this branch.
    pub fn probability(&self) -> f64 {
        self.branch_weight * self.norm_sqr()
    }

    /// Unit-norm copy with branch weight 1.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|a| a / n).collect(),
            layout: self.layout.clone(),
            branch_weight: 1.0,
        })
    }

    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self { amplitudes, layout, branch_weight: self.branch_weight * other.branch_weight })
    }

    /// Applies `op` (acting on the joint space of `targets`, in the listed
    /// order) to the state. `op` need not be unitary.
    pub fn apply_operator(&self, op: &Matrix, targets: &[usize]) -> Result<Self> {
        self.layout.check_indices(targets)?;
        let target_offsets = self.layout.offsets(targets);
        check_square(op, target_offsets.len())?;
        let rest = self.layout.offsets(&self.layout.complement(targets));
        let mut out = self.clone();
        apply_local(&mut out.amplitudes, &rest, &target_offsets, op);
        Ok(out)
    }

    pub fn apply_to(&self, op: &Matrix, label: Subsystem) -> Result<Self> {
        let idx = self.layout.require(label)?;
        self.apply_operator(op, &[idx])
    }

    /// Projects `subsystem` onto `basis_vector`. Returns the renormalized
    /// post-measurement state and the outcome probability (including the
    /// branch weight).
    pub fn project(&self, subsystem: usize, basis_vector: &[C64]) -> Result<(Self, f64)> {
        self.layout.check_indices(&[subsystem])?;
        let d = self.layout.factor_dim(subsystem);
        if basis_vector.len() != d {
            return Err(Error::Dimension { expected: d, rows: basis_vector.len(), cols: 1 });
        }
        let n2: f64 = basis_vector.iter().map(|b| b.norm_sqr()).sum();
        if (n2 - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::UnnormalizedBasis(n2));
        }
        let proj = Matrix::from_fn(d, d, |i, j| basis_vector[i] * basis_vector[j].conj());
        let projected = self.apply_operator(&proj, &[subsystem])?;
        let norm = projected.norm_sqr();
        if norm <= ALGEBRA_TOL * ALGEBRA_TOL {
            return Err(Error::ZeroProbability);
        }
        let prob = norm * self.branch_weight;
        Ok((projected.normalized()?, prob))
    }

    /// `(<b| ⊗ I) |psi>` with the contracted factor removed from the layout.
    /// The result is not renormalized.
    pub fn contract(&self, subsystem: usize, bra: &[C64]) -> Result<Self> {
        self.layout.check_indices(&[subsystem])?;
        let d = self.layout.factor_dim(subsystem);
        if bra.len() != d {
            return Err(Error::Dimension { expected: d, rows: bra.len(), cols: 1 });
        }
        let keep = self.layout.complement(&[subsystem]);
        let keep_offsets = self.layout.offsets(&keep);
        let t_offsets = self.layout.offsets(&[subsystem]);
        let amplitudes = keep_offsets
            .iter()
            .map(|&k| t_offsets.iter().zip(bra).map(|(&t, b)| b.conj() * self.amplitudes[k + t]).sum())
            .collect();
        Ok(Self { amplitudes, layout: self.layout.select(&keep), branch_weight: self.branch_weight })
    }

    /// `branch_weight * Tr_rest |psi><psi|`, kept factors in layout order.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::Layout("partial trace must keep at least one factor".into()));
        }
        self.layout.check_indices(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let ko = self.layout.offsets(&keep);
        let to = self.layout.offsets(&self.layout.complement(&keep));
        let dk = ko.len();
        let mut m = Matrix::zeros(dk, dk);
        for &t in &to {
            for a in 0..dk {
                let va = self.amplitudes[ko[a] + t];
                if va == ZERO {
                    continue;
                }
                for b in 0..dk {
                    m[(a, b)] += va * self.amplitudes[ko[b] + t].conj();
                }
            }
        }
        m *= C64::from(self.branch_weight);
        Ok(DensityOperator { matrix: m, layout: self.layout.select(&keep) })
    }

    pub fn to_density(&self) -> DensityOperator {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityOperator {
            matrix: (&v * v.adjoint()) * C64::from(self.branch_weight),
            layout: self.layout.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: Matrix,
    layout: HilbertLayout,
}

impl DensityOperator {
    pub fn new(matrix: Matrix, layout: HilbertLayout) -> Result<Self> {
        check_square(&matrix, layout.dim())?;
        Ok(Self { matrix, layout })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(Self { matrix: &self.matrix / C64::from(t), layout: self.layout.clone() })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * C64::from(factor), layout: self.layout.clone() }
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self { matrix: self.matrix.kronecker(&other.matrix), layout })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() <= tol))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Layout("partial trace must keep at least one factor".into()));
        }
        self.layout.check_indices(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let ko = self.layout.offsets(&keep);
        let to = self.layout.offsets(&self.layout.complement(&keep));
        let dk = ko.len();
        let m = Matrix::from_fn(dk, dk, |a, b| to.iter().map(|&t| self.matrix[(ko[a] + t, ko[b] + t)]).sum());
        Ok(Self { matrix: m, layout: self.layout.select(&keep) })
    }

    /// `O rho O^dagger` with `O` acting on the joint space of `targets`.
    pub fn apply_operator(&self, op: &Matrix, targets: &[usize]) -> Result<Self> {
        self.layout.check_indices(targets)?;
        let target_offsets = self.layout.offsets(targets);
        check_square(op, target_offsets.len())?;
        let rest = self.layout.offsets(&self.layout.complement(targets));
        Ok(Self { matrix: sandwich(&self.matrix, op, &rest, &target_offsets), layout: self.layout.clone() })
    }

    /// `sum_k K rho K^dagger` on a single target factor. The Kraus set must
    /// be complete within [`ALGEBRA_TOL`].
    pub fn apply_kraus(&self, kraus: &[Matrix], target: usize) -> Result<Self> {
        self.layout.check_indices(&[target])?;
        let d = self.layout.factor_dim(target);
        for k in kraus {
            check_square(k, d)?;
        }
        let deviation = kraus_completeness_deviation(kraus, d);
        if deviation > ALGEBRA_TOL {
            return Err(Error::IncompleteKraus { deviation });
        }
        let t_off = self.layout.offsets(&[target]);
        let rest = self.layout.offsets(&self.layout.complement(&[target]));
        let mut acc = Matrix::zeros(self.dim(), self.dim());
        for k in kraus {
            acc += sandwich(&self.matrix, k, &rest, &t_off);
        }
        Ok(Self { matrix: acc, layout: self.layout.clone() })
    }

    /// `(<b| ⊗ I) rho (|b> ⊗ I)` with the factor removed; not renormalized.
    pub fn contract(&self, subsystem: usize, bra: &[C64]) -> Result<Self> {
        self.layout.check_indices(&[subsystem])?;
        let d = self.layout.factor_dim(subsystem);
        if bra.len() != d {
            return Err(Error::Dimension { expected: d, rows: bra.len(), cols: 1 });
        }
        let keep = self.layout.complement(&[subsystem]);
        let ko = self.layout.offsets(&keep);
        let to = self.layout.offsets(&[subsystem]);
        let n = ko.len();
        // half-contract on columns first: tmp[row, b] = sum_t' rho[row, b + t'] b_t'
        let mut tmp = Matrix::zeros(self.dim(), n);
        for (b, &kb) in ko.iter().enumerate() {
            for row in 0..self.dim() {
                tmp[(row, b)] = to.iter().zip(bra).map(|(&t, v)| self.matrix[(row, kb + t)] * v).sum();
            }
        }
        let m = Matrix::from_fn(n, n, |a, b| {
            to.iter().zip(bra).map(|(&t, v)| v.conj() * tmp[(ko[a] + t, b)]).sum()
        });
        Ok(Self { matrix: m, layout: self.layout.select(&keep) })
    }

    /// Multiplies every element that is off-diagonal in `subsystem` by `factor`.
    pub fn scale_coherences(&self, subsystem: usize, factor: f64) -> Result<Self> {
        self.layout.check_indices(&[subsystem])?;
        let stride: usize = self.layout.dims().skip(subsystem + 1).product();
        let d = self.layout.factor_dim(subsystem);
        let digit = |i: usize| (i / stride) % d;
        let mut m = self.matrix.clone();
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                if digit(i) != digit(j) {
                    m[(i, j)] *= factor;
                }
            }
        }
        Ok(Self { matrix: m, layout: self.layout.clone() })
    }
}

/// `max |sum K^dagger K - I|` entrywise.
pub fn kraus_completeness_deviation(kraus: &[Matrix], dim: usize) -> f64 {
    let mut sum = Matrix::zeros(dim, dim);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    sum -= Matrix::identity(dim, dim);
    sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `<Phi+| rho |Phi+>` with `|Phi+> = (|00> + |11>)/sqrt(2)`.
pub fn fidelity_to_bell(rho: &DensityOperator) -> Result<f64> {
    let m = rho.matrix();
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::Dimension { expected: 4, rows: m.nrows(), cols: m.ncols() });
    }
    Ok(bell_overlap(m))
}

pub(crate) fn bell_overlap(m: &Matrix) -> f64 {
    0.5 * (m[(0, 0)] + m[(0, 3)] + m[(3, 0)] + m[(3, 3)]).re
}

fn check_square(op: &Matrix, expected: usize) -> Result<()> {
    if op.nrows() != expected || op.ncols() != expected {
        return Err(Error::Dimension { expected, rows: op.nrows(), cols: op.ncols() });
    }
    Ok(())
}

/// In-place `v <- (I ⊗ op ⊗ I) v` using precomputed index offsets.
fn apply_local(data: &mut [C64], rest: &[usize], target: &[usize], op: &Matrix) {
    let d = target.len();
    let mut buf = vec![ZERO; d];
    for &r in rest {
        for (slot, &t) in buf.iter_mut().zip(target) {
            *slot = data[r + t];
        }
        for (i, &t) in target.iter().enumerate() {
            let mut acc = ZERO;
            for (j, b) in buf.iter().enumerate() {
                acc += op[(i, j)] * b;
            }
            data[r + t] = acc;
        }
    }
}

fn sandwich(rho: &Matrix, op: &Matrix, rest: &[usize], target: &[usize]) -> Matrix {
    let n = rho.nrows();
    let mut left = rho.clone();
    for col in left.as_mut_slice().chunks_exact_mut(n) {
        apply_local(col, rest, target, op);
    }
    let mut right = left.adjoint();
    for col in right.as_mut_slice().chunks_exact_mut(n) {
        apply_local(col, rest, target, op);
    }
    right.adjoint()
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_z() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn hadamard() -> Matrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn qubit(a: C64, b: C64, label: Subsystem) -> PureState {
        PureState::new(vec![a, b], HilbertLayout::new(vec![(label, 2)]).unwrap()).unwrap()
    }

    fn plus(label: Subsystem) -> PureState {
        qubit(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), label)
    }

    fn bell() -> PureState {
        let h = FRAC_1_SQRT_2;
        PureState::new(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)], HilbertLayout::qubits(2)).unwrap()
    }

    #[test]
    fn tensor_basis_and_plus_states() {
        let zero = |i| qubit(ONE, ZERO, Subsystem::Aux(i));
        let s = zero(0).tensor(&zero(1)).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);

        let pp = plus(Subsystem::Aux(0)).tensor(&plus(Subsystem::Aux(1))).unwrap();
        for a in pp.amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn tensor_photon_bin_zero_with_plus_pair() {
        let photon = PureState::basis(HilbertLayout::new(vec![(Subsystem::Photon, 2)]).unwrap(), 0).unwrap();
        let s = photon
            .tensor(&plus(Subsystem::Alice(0)).tensor(&plus(Subsystem::Bob(0))).unwrap())
            .unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        // photon bin 0 occupies the first block of 4
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expect = if i < 4 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(a.re, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn tensor_rejects_duplicate_labels() {
        let a = plus(Subsystem::Aux(0));
        assert!(matches!(a.tensor(&a), Err(Error::Layout(_))));
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let rho = bell().to_density();
        let a = rho.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(a.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix()[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
        let pure_path = bell().reduced_density(&[1]).unwrap();
        assert_abs_diff_eq!(pure_path.matrix()[(1, 1)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_keeping_everything_is_identity_map() {
        let rho = bell().to_density();
        assert_eq!(rho.partial_trace(&[1, 0]).unwrap(), rho);
    }

    #[test]
    fn partial_trace_of_photon_from_m1_spin_photon_state() {
        // (|0>|0> + |1>|1>)/sqrt(2) over [photon, A0]
        let layout = HilbertLayout::new(vec![(Subsystem::Photon, 2), (Subsystem::Alice(0), 2)]).unwrap();
        let h = FRAC_1_SQRT_2;
        let s = PureState::new(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)], layout).unwrap();
        let spin = s.to_density().partial_trace(&[1]).unwrap();
        assert_eq!(spin.layout().label(0), Subsystem::Alice(0));
        assert_abs_diff_eq!(spin.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(spin.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = bell().to_density();
        assert!(matches!(rho.partial_trace(&[2]), Err(Error::InvalidSubsystem { .. })));
        assert!(rho.partial_trace(&[]).is_err());
    }

    #[test]
    fn kraus_identity_and_incomplete_set() {
        let rho = bell().to_density();
        let id = Matrix::identity(2, 2);
        assert_eq!(rho.apply_kraus(std::slice::from_ref(&id), 1).unwrap(), rho);
        let half = id * C64::from(0.5);
        assert!(matches!(rho.apply_kraus(&[half], 0), Err(Error::IncompleteKraus { .. })));
    }

    #[test]
    fn full_dephasing_of_plus() {
        let rho = plus(Subsystem::Aux(0)).to_density();
        let h = FRAC_1_SQRT_2;
        let k0 = Matrix::identity(2, 2) * C64::from(h);
        let k1 = pauli_z() * C64::from(h);
        let out = rho.apply_kraus(&[k0, k1], 0).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let (s, p) = plus(Subsystem::Aux(0)).project(0, &[ONE, ZERO]).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[0].re, 1.0, epsilon = 1e-15);

        let zero = qubit(ONE, ZERO, Subsystem::Aux(0));
        assert_eq!(zero.project(0, &[ZERO, ONE]), Err(Error::ZeroProbability));
        assert!(matches!(zero.project(0, &[ONE, ONE]), Err(Error::UnnormalizedBasis(_))));
    }

    #[test]
    fn projection_on_m1_protocol_state_onto_x0() {
        // (|0>_ph|00> + |1>_ph|11>)/sqrt(2), layout [photon, A0, B0]
        let layout = HilbertLayout::protocol(1);
        let h = FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 8];
        amps[0] = c(h, 0.0);
        amps[7] = c(h, 0.0);
        let s = PureState::new(amps, layout).unwrap();
        let x0 = [c(h, 0.0), c(h, 0.0)];
        let (post, p) = s.project(0, &x0).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-14);
        let regs = post.contract(0, &x0).unwrap().normalized().unwrap();
        assert_abs_diff_eq!(regs.amplitudes()[0].re, h, epsilon = 1e-14);
        assert_abs_diff_eq!(regs.amplitudes()[3].re, h, epsilon = 1e-14);
        assert_abs_diff_eq!(regs.amplitudes()[1].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bell_fidelity_examples() {
        assert_abs_diff_eq!(fidelity_to_bell(&bell().to_density()).unwrap(), 1.0, epsilon = 1e-15);
        let mixed = DensityOperator::new(Matrix::identity(4, 4) * C64::from(0.25), HilbertLayout::qubits(2)).unwrap();
        assert_abs_diff_eq!(fidelity_to_bell(&mixed).unwrap(), 0.25, epsilon = 1e-15);

        let e = (-1.0f64).exp();
        let mut m = bell().to_density().matrix().clone();
        m[(0, 3)] *= e;
        m[(3, 0)] *= e;
        let rho = DensityOperator::new(m, HilbertLayout::qubits(2)).unwrap();
        assert_abs_diff_eq!(fidelity_to_bell(&rho).unwrap(), (1.0 + e) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_to_bell(&rho).unwrap(), 0.6839, epsilon = 1e-4);

        let one = plus(Subsystem::Aux(0)).to_density();
        assert!(matches!(fidelity_to_bell(&one), Err(Error::Dimension { .. })));
    }

    #[test]
    fn contract_matches_elementwise_projection() {
        let rho = bell().to_density();
        let reduced = rho.contract(0, &[ONE, ZERO]).unwrap();
        assert_abs_diff_eq!(reduced.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(reduced.trace(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn scale_coherences_on_one_factor() {
        let rho = bell().to_density().scale_coherences(0, 0.3).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 3)].re, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
    }
}
