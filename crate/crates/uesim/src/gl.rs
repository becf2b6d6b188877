//! Linear-functional extraction from binary-outcome measurement families.
//!
//! Given a family of measurements indexed by strings u, the extractor runs
//! every measurement in superposition as a phase oracle and reads the index
//! register in the Hadamard basis. When the family computes u . x well, the
//! readout concentrates on x; the exact joint success probability for two
//! parties extracting simultaneously is a closed-form norm, computed here
//! alongside the sampling circuit so they can be checked against each other.
//!
//! Also here: the row-conditioned matrix hybrids used when a game defers the
//! choice of extractor matrices to the end (rows constrained to hit given
//! inner products with a hidden string), the operator absolute value, and a
//! direct numeric check of the simultaneous-overlap inequality.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;
use thiserror::Error;

use crate::f2::{sample_with_parity, BitMatrix, BitVector, F2Error};
use crate::qsim::{self, gates, QsimError, StateVector};

/// Dense-operator cap for the closed-form success probability.
pub const FORMULA_MAX_QUBITS: usize = 12;

const HERMITIAN_TOL: f64 = 1e-9;
const OPERATOR_BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GlError {
    #[error("register designates {got} qubits but the family acts on {want}")]
    RegisterMismatch { got: usize, want: usize },
    #[error("index string has {got} bits but the family is indexed by {want}")]
    IndexLenMismatch { got: usize, want: usize },
    #[error("registers overlap or leave the state (qubit {qubit})")]
    BadRegister { qubit: usize },
    #[error("{qubits} qubits exceed the cap of {cap} for this operation")]
    TooLarge { qubits: usize, cap: usize },
    #[error("hybrid index {i} exceeds the {n} constrained rows")]
    HybridIndex { i: usize, n: usize },
    #[error("columns argument {got} disagrees with the hidden string width {want}")]
    ColumnsMismatch { got: usize, want: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator eigenvalues [{min:.6}, {max:.6}] leave the unit interval")]
    OperatorBounds { min: f64, max: f64 },
    #[error("instance shapes disagree: state dim {state_dim}, operators {p_dim} x {q_dim}")]
    InstanceShape { state_dim: usize, p_dim: usize, q_dim: usize },
    #[error(transparent)]
    F2(#[from] F2Error),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

// ---------------------------------------------------------------------------
// Measurement families.
// ---------------------------------------------------------------------------

/// A binary-outcome measurement in unitary-plus-readout form: apply the
/// unitary, measure the designated qubit. `output_qubit` indexes into the
/// register the measurement acts on.
#[derive(Debug, Clone)]
pub struct BinaryMeasurement {
    pub unitary: DMatrix<Complex64>,
    pub output_qubit: usize,
}

impl BinaryMeasurement {
    pub fn register_qubits(&self) -> usize {
        self.unitary.nrows().trailing_zeros() as usize
    }

    /// The phase operator: (-1) on the outcome-1 subspace, built by
    /// compute / Z / uncompute.
    pub fn phase_operator(&self) -> DMatrix<Complex64> {
        let dim = self.unitary.nrows();
        let z = DMatrix::from_fn(dim, dim, |i, j| {
            if i != j {
                Complex64::ZERO
            } else if i >> self.output_qubit & 1 == 1 {
                -Complex64::ONE
            } else {
                Complex64::ONE
            }
        });
        self.unitary.adjoint() * z * &self.unitary
    }

    /// The projection onto the subspace where the measurement outputs
    /// `outcome`.
    pub fn projection(&self, outcome: bool) -> DMatrix<Complex64> {
        let dim = self.unitary.nrows();
        let p = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j && (i >> self.output_qubit & 1 == 1) == outcome {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        });
        self.unitary.adjoint() * p * &self.unitary
    }

    /// Perform the measurement projectively on `register` within `state`:
    /// rotate, read the output qubit, rotate back.
    pub fn measure(
        &self,
        state: &mut StateVector,
        register: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<bool, GlError> {
        check_register(state, register, self.register_qubits())?;
        state.apply_gate(&self.unitary, register)?;
        let bit = state.measure(&[register[self.output_qubit]], &mut *rng).get(0);
        state.apply_gate(&self.unitary.adjoint(), register)?;
        Ok(bit)
    }
}

/// A collection of binary measurements indexed by `index_len`-bit strings,
/// all acting on the same register width. Realization must be deterministic
/// in the index.
pub trait MeasurementFamily: Send + Sync {
    fn index_len(&self) -> usize;
    fn register_qubits(&self) -> usize;
    fn realize(&self, u: &BitVector) -> BinaryMeasurement;
}

/// Family whose measurement for index u deterministically reports u . x
/// when the register is |0>: the unitary flips the output qubit iff
/// u . x = 1.
#[derive(Debug, Clone)]
pub struct ParityFamily {
    x: BitVector,
}

impl ParityFamily {
    pub fn new(x: BitVector) -> Self {
        ParityFamily { x }
    }
}

impl MeasurementFamily for ParityFamily {
    fn index_len(&self) -> usize {
        self.x.len()
    }

    fn register_qubits(&self) -> usize {
        1
    }

    fn realize(&self, u: &BitVector) -> BinaryMeasurement {
        assert_eq!(u.len(), self.x.len());
        let unitary = if u.dot(&self.x) {
            gates::pauli_x()
        } else {
            gates::identity(2)
        };
        BinaryMeasurement { unitary, output_qubit: 0 }
    }
}

/// Family that ignores the index and reads the designated qubit directly.
#[derive(Debug, Clone)]
pub struct ReadoutFamily {
    pub index_len: usize,
    pub register_qubits: usize,
    pub output_qubit: usize,
}

impl MeasurementFamily for ReadoutFamily {
    fn index_len(&self) -> usize {
        self.index_len
    }

    fn register_qubits(&self) -> usize {
        self.register_qubits
    }

    fn realize(&self, u: &BitVector) -> BinaryMeasurement {
        assert_eq!(u.len(), self.index_len);
        BinaryMeasurement {
            unitary: gates::identity(1 << self.register_qubits),
            output_qubit: self.output_qubit,
        }
    }
}

/// Explicit family backed by a table of measurements, one per index.
pub struct SampledFamily {
    index_len: usize,
    register_qubits: usize,
    measurements: Vec<BinaryMeasurement>,
}

impl SampledFamily {
    pub fn from_measurements(index_len: usize, measurements: Vec<BinaryMeasurement>) -> Self {
        assert_eq!(measurements.len(), 1 << index_len);
        let register_qubits = measurements[0].register_qubits();
        assert!(
            measurements.iter().all(|m| m.register_qubits() == register_qubits),
            "all measurements must share a register width"
        );
        SampledFamily { index_len, register_qubits, measurements }
    }

    /// A fresh family of Haar-random measurement bases.
    pub fn random(index_len: usize, register_qubits: usize, rng: &mut dyn RngCore) -> Self {
        let dim = 1 << register_qubits;
        let measurements = (0..1usize << index_len)
            .map(|_| BinaryMeasurement {
                unitary: gates::random_unitary(dim, &mut *rng),
                output_qubit: 0,
            })
            .collect();
        SampledFamily { index_len, register_qubits, measurements }
    }
}

impl MeasurementFamily for SampledFamily {
    fn index_len(&self) -> usize {
        self.index_len
    }

    fn register_qubits(&self) -> usize {
        self.register_qubits
    }

    fn realize(&self, u: &BitVector) -> BinaryMeasurement {
        assert_eq!(u.len(), self.index_len);
        self.measurements[u.to_index() as usize].clone()
    }
}

/// One party's side of an extraction experiment: the family, which qubits of
/// the shared state it acts on, and the hidden string the oracle side uses
/// for verification (never shown to the extracting side).
pub struct GlInstance {
    pub family: Arc<dyn MeasurementFamily>,
    pub register: Vec<usize>,
    pub hidden_x: BitVector,
}

impl GlInstance {
    pub fn extract(
        &self,
        state: &mut StateVector,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GlError> {
        gl_extract(self.family.as_ref(), state, &self.register, rng)
    }

    /// Oracle-side verification of a candidate extraction.
    pub fn verify(&self, candidate: &BitVector) -> bool {
        *candidate == self.hidden_x
    }
}

// ---------------------------------------------------------------------------
// The extractor.
// ---------------------------------------------------------------------------

fn check_register(
    state: &StateVector,
    register: &[usize],
    want: usize,
) -> Result<(), GlError> {
    if register.len() != want {
        return Err(GlError::RegisterMismatch { got: register.len(), want });
    }
    let mut seen = vec![false; state.num_qubits()];
    for &q in register {
        if q >= state.num_qubits() || seen[q] {
            return Err(GlError::BadRegister { qubit: q });
        }
        seen[q] = true;
    }
    Ok(())
}

/// Run the extraction circuit: prepare a uniform index register, apply every
/// family member as a phase oracle controlled on its index, read the index
/// register in the Hadamard basis. The measured index register is factored
/// back out, so `state` keeps its width (collapsed accordingly).
pub fn gl_extract(
    family: &dyn MeasurementFamily,
    state: &mut StateVector,
    register: &[usize],
    rng: &mut dyn RngCore,
) -> Result<BitVector, GlError> {
    check_register(state, register, family.register_qubits())?;
    let m = family.index_len();
    let n = state.num_qubits();
    if m + n > qsim::qubit_cap() {
        return Err(GlError::TooLarge { qubits: m + n, cap: qsim::qubit_cap() });
    }

    let amp = Complex64::new(1.0 / ((1u64 << m) as f64).sqrt(), 0.0);
    let uniform = StateVector::from_amplitudes(vec![amp; 1 << m])?;
    let mut joint = state.tensor(&uniform);

    let controls: Vec<usize> = (n..n + m).collect();
    for idx in 0..1u64 << m {
        let u = BitVector::from_index(m, idx);
        let phase = family.realize(&u).phase_operator();
        let conditions: Vec<(usize, bool)> =
            controls.iter().enumerate().map(|(j, &q)| (q, u.get(j))).collect();
        joint.apply_gate_controlled(&phase, register, &conditions)?;
    }

    let h = gates::hadamard();
    for &q in &controls {
        joint.apply_gate(&h, &[q])?;
    }
    let outcome = joint.measure(&controls, &mut *rng);
    joint.factor_out(&controls);
    *state = joint;
    Ok(outcome)
}

/// Exact outcome distribution of the extraction circuit: the probability of
/// reading y is || E_u (-1)^{u.y} Ph_u |psi> ||^2.
pub fn gl_outcome_distribution(
    family: &dyn MeasurementFamily,
    state: &StateVector,
    register: &[usize],
) -> Result<Vec<f64>, GlError> {
    check_register(state, register, family.register_qubits())?;
    if state.num_qubits() > FORMULA_MAX_QUBITS {
        return Err(GlError::TooLarge {
            qubits: state.num_qubits(),
            cap: FORMULA_MAX_QUBITS,
        });
    }
    let m = family.index_len();
    let count = 1usize << m;
    let phased: Vec<Vec<Complex64>> = (0..count)
        .map(|idx| {
            let u = BitVector::from_index(m, idx as u64);
            let mut amps = state.amplitudes().to_vec();
            apply_operator(&mut amps, &family.realize(&u).phase_operator(), register);
            amps
        })
        .collect();
    let dim = state.amplitudes().len();
    let mut out = Vec::with_capacity(count);
    for y in 0..count {
        let mut norm_sq = 0.0;
        for i in 0..dim {
            let mut acc = Complex64::ZERO;
            for (u, ph) in phased.iter().enumerate() {
                let sign = if (u & y).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                acc += sign * ph[i];
            }
            norm_sq += (acc / count as f64).norm_sqr();
        }
        out.push(norm_sq);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The closed-form success probability.
// ---------------------------------------------------------------------------

/// Apply a dense operator (not necessarily unitary) to the designated
/// qubits of an amplitude vector; gate bit j corresponds to `targets[j]`.
fn apply_operator(amps: &mut [Complex64], op: &DMatrix<Complex64>, targets: &[usize]) {
    let k = targets.len();
    let dim = 1usize << k;
    assert_eq!(op.nrows(), dim);
    assert_eq!(op.ncols(), dim);
    let mut tmask = 0usize;
    for &t in targets {
        tmask |= 1 << t;
    }
    let spread: Vec<usize> = (0..dim)
        .map(|j| {
            let mut s = 0usize;
            for (bit, &t) in targets.iter().enumerate() {
                if j >> bit & 1 == 1 {
                    s |= 1 << t;
                }
            }
            s
        })
        .collect();
    let mut gathered = vec![Complex64::ZERO; dim];
    for base in 0..amps.len() {
        if base & tmask != 0 {
            continue;
        }
        for (j, g) in gathered.iter_mut().enumerate() {
            *g = amps[base | spread[j]];
        }
        for i in 0..dim {
            let mut acc = Complex64::ZERO;
            for (j, g) in gathered.iter().enumerate() {
                acc += op[(i, j)] * g;
            }
            amps[base | spread[i]] = acc;
        }
    }
}

/// The averaged sign operator 2 E_u Pi^{x,u} - I, where Pi^{x,u} projects
/// onto the subspace where measurement u outputs u . x.
pub fn averaged_sign_operator(
    family: &dyn MeasurementFamily,
    x: &BitVector,
) -> Result<DMatrix<Complex64>, GlError> {
    if x.len() != family.index_len() {
        return Err(GlError::IndexLenMismatch { got: x.len(), want: family.index_len() });
    }
    let m = family.index_len();
    let dim = 1usize << family.register_qubits();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for idx in 0..1u64 << m {
        let u = BitVector::from_index(m, idx);
        acc += family.realize(&u).projection(u.dot(x));
    }
    let scale = Complex64::new(2.0 / (1u64 << m) as f64, 0.0);
    Ok(acc * scale - DMatrix::identity(dim, dim))
}

/// Exact probability that both parties' extractions return x: the squared
/// norm of the state hit by both averaged sign operators.
pub fn gl_success_formula(
    family_a: &dyn MeasurementFamily,
    register_a: &[usize],
    family_b: &dyn MeasurementFamily,
    register_b: &[usize],
    state: &StateVector,
    x: &BitVector,
) -> Result<f64, GlError> {
    check_register(state, register_a, family_a.register_qubits())?;
    check_register(state, register_b, family_b.register_qubits())?;
    for &q in register_a {
        if register_b.contains(&q) {
            return Err(GlError::BadRegister { qubit: q });
        }
    }
    if state.num_qubits() > FORMULA_MAX_QUBITS {
        return Err(GlError::TooLarge {
            qubits: state.num_qubits(),
            cap: FORMULA_MAX_QUBITS,
        });
    }
    let op_a = averaged_sign_operator(family_a, x)?;
    let op_b = averaged_sign_operator(family_b, x)?;
    let mut amps = state.amplitudes().to_vec();
    apply_operator(&mut amps, &op_a, register_a);
    apply_operator(&mut amps, &op_b, register_b);
    Ok(amps.iter().map(|a| a.norm_sqr()).sum())
}

// ---------------------------------------------------------------------------
// Row-conditioned matrix hybrids.
// ---------------------------------------------------------------------------

/// Sample a matrix whose first `i` rows are uniform over {u : u . x = r_j}
/// and whose remaining rows are uniform. Errors if a constrained row is
/// infeasible (x = 0 while r_j = 1).
pub fn sample_di(
    i: usize,
    x: &BitVector,
    r: &BitVector,
    cols: usize,
    rng: &mut dyn RngCore,
) -> Result<BitMatrix, GlError> {
    if cols != x.len() {
        return Err(GlError::ColumnsMismatch { got: cols, want: x.len() });
    }
    let n = r.len();
    if i > n {
        return Err(GlError::HybridIndex { i, n });
    }
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        if j < i {
            rows.push(sample_with_parity(x, r.get(j), j, rng)?);
        } else {
            rows.push(BitVector::random(cols, rng));
        }
    }
    Ok(BitMatrix::from_rows(cols, &rows))
}

// ---------------------------------------------------------------------------
// Operator absolute value and the simultaneous-overlap inequality.
// ---------------------------------------------------------------------------

fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Operator absolute value of a Hermitian matrix via spectral decomposition.
pub fn hermitian_abs(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, GlError> {
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(GlError::NotHermitian { deviation });
    }
    let eigen = m.clone().symmetric_eigen();
    let dim = m.nrows();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        let v = eigen.eigenvectors.column(k);
        let scale = Complex64::new(lambda.abs(), 0.0);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += scale * v[i] * v[j].conj();
            }
        }
    }
    Ok(out)
}

/// One instance of the simultaneous-overlap inequality: a bipartite state
/// and a pair of operators, one per side, each required to lie in [0, 1].
pub struct SimultInstance {
    pub state: StateVector,
    pub p_op: DMatrix<Complex64>,
    pub q_op: DMatrix<Complex64>,
}

/// Both sides of the inequality, evaluated numerically.
#[derive(Debug, Clone, Copy)]
pub struct SimultReport {
    /// E_z <psi| (1+P)/2 (x) (1+Q)/2 |psi>.
    pub premise: f64,
    /// E_z <psi| P (x) Q |psi>.
    pub conclusion: f64,
    pub epsilon: f64,
}

impl SimultReport {
    pub fn premise_holds(&self) -> bool {
        self.premise >= 0.5 + self.epsilon
    }

    pub fn conclusion_holds(&self) -> bool {
        self.conclusion >= self.epsilon.powi(3) - 1e-12
    }

    /// The implication: vacuously true when the premise fails.
    pub fn consistent(&self) -> bool {
        !self.premise_holds() || self.conclusion_holds()
    }
}

fn check_unit_interval(op: &DMatrix<Complex64>) -> Result<(), GlError> {
    let deviation = hermitian_deviation(op);
    if deviation > HERMITIAN_TOL {
        return Err(GlError::NotHermitian { deviation });
    }
    let eigen = op.clone().symmetric_eigen();
    let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eigen.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min < -OPERATOR_BOUND_TOL || max > 1.0 + OPERATOR_BOUND_TOL {
        return Err(GlError::OperatorBounds { min, max });
    }
    Ok(())
}

/// Expectation <psi| P (x) Q |psi> with P on the low qubits and Q on the
/// high qubits.
fn bipartite_expectation(
    state: &StateVector,
    p_op: &DMatrix<Complex64>,
    q_op: &DMatrix<Complex64>,
) -> Result<f64, GlError> {
    let p_dim = p_op.nrows();
    let q_dim = q_op.nrows();
    let state_dim = state.amplitudes().len();
    if p_dim * q_dim != state_dim || !p_dim.is_power_of_two() || !q_dim.is_power_of_two() {
        return Err(GlError::InstanceShape { state_dim, p_dim, q_dim });
    }
    let p_qubits = p_dim.trailing_zeros() as usize;
    let q_qubits = q_dim.trailing_zeros() as usize;
    let mut amps = state.amplitudes().to_vec();
    let low: Vec<usize> = (0..p_qubits).collect();
    let high: Vec<usize> = (p_qubits..p_qubits + q_qubits).collect();
    apply_operator(&mut amps, p_op, &low);
    apply_operator(&mut amps, q_op, &high);
    let value: Complex64 = state
        .amplitudes()
        .iter()
        .zip(amps.iter())
        .map(|(orig, mapped)| orig.conj() * mapped)
        .sum();
    Ok(value.re)
}

/// Evaluate both sides of the simultaneous-overlap inequality over an
/// instance family.
pub fn simult_bound_report(
    instances: &[SimultInstance],
    epsilon: f64,
) -> Result<SimultReport, GlError> {
    assert!(!instances.is_empty(), "the inequality averages over at least one instance");
    let mut premise = 0.0;
    let mut conclusion = 0.0;
    for inst in instances {
        check_unit_interval(&inst.p_op)?;
        check_unit_interval(&inst.q_op)?;
        let dim_p = inst.p_op.nrows();
        let dim_q = inst.q_op.nrows();
        let half_p = (DMatrix::identity(dim_p, dim_p) + &inst.p_op) * Complex64::new(0.5, 0.0);
        let half_q = (DMatrix::identity(dim_q, dim_q) + &inst.q_op) * Complex64::new(0.5, 0.0);
        premise += bipartite_expectation(&inst.state, &half_p, &half_q)?;
        conclusion += bipartite_expectation(&inst.state, &inst.p_op, &inst.q_op)?;
    }
    let count = instances.len() as f64;
    Ok(SimultReport {
        premise: premise / count,
        conclusion: conclusion / count,
        epsilon,
    })
}

/// True when the implication premise => conclusion holds on the instance
/// family (vacuously when the premise fails).
pub fn simult_bound_check(
    instances: &[SimultInstance],
    epsilon: f64,
) -> Result<bool, GlError> {
    Ok(simult_bound_report(instances, epsilon)?.consistent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn random_state(qubits: usize, rng: &mut dyn RngCore) -> StateVector {
        let dim = 1usize << qubits;
        let u = gates::random_unitary(dim, rng);
        StateVector::from_amplitudes(u.column(0).iter().cloned().collect()).unwrap()
    }

    #[test]
    fn perfect_parity_family_extracts_the_hidden_string() {
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        for _ in 0..20 {
            let x = BitVector::random(3, &mut rng);
            let family = ParityFamily::new(x.clone());
            let mut state = StateVector::zero_state(1);
            let got = gl_extract(&family, &mut state, &[0], &mut rng).unwrap();
            assert_eq!(got, x);
        }
    }

    #[test]
    fn perfect_parity_formula_is_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(82);
        let x = BitVector::random(3, &mut rng);
        let fam_a = ParityFamily::new(x.clone());
        let fam_b = ParityFamily::new(x.clone());
        let state = StateVector::zero_state(2);
        let p = gl_success_formula(&fam_a, &[0], &fam_b, &[1], &state, &x).unwrap();
        assert!((p - 1.0).abs() < 1e-12, "perfect predictors should give 1, got {p}");
    }

    #[test]
    fn constant_readout_never_extracts_a_nonzero_string() {
        let mut rng = ChaCha20Rng::seed_from_u64(83);
        let family = ReadoutFamily { index_len: 3, register_qubits: 1, output_qubit: 0 };
        let x = BitVector::from_bools(&[true, false, true]);
        for _ in 0..200 {
            let mut state = StateVector::zero_state(1);
            let got = gl_extract(&family, &mut state, &[0], &mut rng).unwrap();
            assert_ne!(got, x, "a constant predictor cannot extract a nonzero string");
        }
        let state = StateVector::zero_state(2);
        let p = gl_success_formula(&family, &[0], &family, &[1], &state, &x).unwrap();
        assert!(p.abs() < 1e-12, "formula should vanish, got {p}");
        // The formula also reports the all-zero extraction exactly: the
        // averaged operator is the identity there.
        let zero = BitVector::zeros(3);
        let p = gl_success_formula(&family, &[0], &family, &[1], &state, &zero).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_formula_matches_monte_carlo_on_random_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(84);
        let runs = 4000;
        for instance in 0..6 {
            let m = 2 + instance % 2;
            let fam_a = SampledFamily::random(m, 1, &mut rng);
            let fam_b = SampledFamily::random(m, 1, &mut rng);
            let psi = random_state(2, &mut rng);
            let x = BitVector::random(m, &mut rng);
            let formula =
                gl_success_formula(&fam_a, &[0], &fam_b, &[1], &psi, &x).unwrap();
            let mut hits = 0;
            for _ in 0..runs {
                let mut state = psi.clone();
                let got_a = gl_extract(&fam_a, &mut state, &[0], &mut rng).unwrap();
                let got_b = gl_extract(&fam_b, &mut state, &[1], &mut rng).unwrap();
                if got_a == x && got_b == x {
                    hits += 1;
                }
            }
            let empirical = hits as f64 / runs as f64;
            let sigma = (formula * (1.0 - formula) / runs as f64).sqrt() + 1e-9;
            assert!(
                (empirical - formula).abs() <= 3.0 * sigma,
                "instance {instance}: empirical {empirical} vs formula {formula} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn extraction_distribution_matches_the_circuit() {
        let mut rng = ChaCha20Rng::seed_from_u64(85);
        let family = SampledFamily::random(2, 1, &mut rng);
        let psi = random_state(2, &mut rng);
        let dist = gl_outcome_distribution(&family, &psi, &[1]).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let runs = 4000;
        let mut counts = [0usize; 4];
        for _ in 0..runs {
            let mut state = psi.clone();
            let got = gl_extract(&family, &mut state, &[1], &mut rng).unwrap();
            counts[got.to_index() as usize] += 1;
        }
        for (y, &c) in counts.iter().enumerate() {
            let empirical = c as f64 / runs as f64;
            let sigma = (dist[y] * (1.0 - dist[y]) / runs as f64).sqrt() + 1e-9;
            assert!(
                (empirical - dist[y]).abs() <= 4.0 * sigma,
                "outcome {y}: empirical {empirical} vs exact {}",
                dist[y]
            );
        }
    }

    #[test]
    fn extraction_is_covariant_under_local_basis_changes() {
        let mut rng = ChaCha20Rng::seed_from_u64(86);
        let family = SampledFamily::random(2, 1, &mut rng);
        let psi = random_state(2, &mut rng);
        let w = gates::random_unitary(2, &mut rng);

        // Conjugated setup: rotate the A register of the state by W and
        // precompose every measurement with W's inverse.
        let conj_measurements: Vec<BinaryMeasurement> = (0..4u64)
            .map(|idx| {
                let u = BitVector::from_index(2, idx);
                let base = family.realize(&u);
                BinaryMeasurement {
                    unitary: &base.unitary * w.adjoint(),
                    output_qubit: base.output_qubit,
                }
            })
            .collect();
        let conj_family = SampledFamily::from_measurements(2, conj_measurements);
        let mut rotated = psi.clone();
        rotated.apply_gate(&w, &[0]).unwrap();

        let base_dist = gl_outcome_distribution(&family, &psi, &[0]).unwrap();
        let conj_dist = gl_outcome_distribution(&conj_family, &rotated, &[0]).unwrap();
        for (p, q) in base_dist.iter().zip(conj_dist.iter()) {
            assert!((p - q).abs() < 1e-9, "distribution changed under conjugation");
        }

        let partner = SampledFamily::random(2, 1, &mut rng);
        for idx in 0..4u64 {
            let x = BitVector::from_index(2, idx);
            let p = gl_success_formula(&family, &[0], &partner, &[1], &psi, &x).unwrap();
            let q =
                gl_success_formula(&conj_family, &[0], &partner, &[1], &rotated, &x).unwrap();
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn row_hybrids_respect_their_constraints() {
        let mut rng = ChaCha20Rng::seed_from_u64(87);
        // i = 0: unconstrained shape.
        let x = BitVector::random(7, &mut rng);
        let r = BitVector::random(4, &mut rng);
        let m = sample_di(0, &x, &r, 7, &mut rng).unwrap();
        assert_eq!((m.rows(), m.cols()), (4, 7));

        // i = n: the product reproduces r exactly on every draw.
        for _ in 0..200 {
            let x = {
                let mut v = BitVector::random(7, &mut rng);
                if v.is_zero() {
                    v.set(0, true);
                }
                v
            };
            let r = BitVector::random(4, &mut rng);
            let m = sample_di(4, &x, &r, 7, &mut rng).unwrap();
            assert_eq!(m.matvec(&x), r);
        }

        // Infeasible: zero hidden string with a 1-constraint.
        let zero = BitVector::zeros(5);
        let mut r = BitVector::zeros(2);
        r.set(1, true);
        assert!(matches!(
            sample_di(2, &zero, &r, 5, &mut rng),
            Err(GlError::F2(F2Error::InfeasibleParity { index: 1 }))
        ));
        // ...but unconstrained rows after i are fine.
        assert!(sample_di(1, &zero, &r, 5, &mut rng).is_ok());

        assert!(matches!(
            sample_di(3, &x, &BitVector::zeros(2), 7, &mut rng),
            Err(GlError::HybridIndex { .. })
        ));
        assert!(matches!(
            sample_di(0, &x, &r, 6, &mut rng),
            Err(GlError::ColumnsMismatch { .. })
        ));
    }

    #[test]
    fn row_hybrid_classes_are_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(88);
        let x = BitVector::from_bools(&[true, true, false]);
        let mut r = BitVector::zeros(2);
        r.set(0, true);
        // Row 0 is constrained to u.x = 1 (class size 4); row 1 is free
        // (class size 8).
        let draws = 10_000;
        let mut row0 = [0usize; 8];
        let mut row1 = [0usize; 8];
        for _ in 0..draws {
            let m = sample_di(1, &x, &r, 3, &mut rng).unwrap();
            row0[m.row(0).to_index() as usize] += 1;
            row1[m.row(1).to_index() as usize] += 1;
        }
        let class: Vec<usize> = (0..8)
            .filter(|&u| {
                let v = BitVector::from_index(3, u as u64);
                v.dot(&x)
            })
            .collect();
        assert_eq!(class.len(), 4);
        for (u, &count) in row0.iter().enumerate() {
            if !class.contains(&u) {
                assert_eq!(count, 0, "row 0 left its constraint class");
            }
        }
        let crit3 = ChiSquared::new(3.0).unwrap().inverse_cdf(0.999);
        let expected = draws as f64 / 4.0;
        let chi0: f64 = class
            .iter()
            .map(|&u| (row0[u] as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi0 < crit3, "row 0 chi-squared {chi0} exceeds {crit3}");
        let crit7 = ChiSquared::new(7.0).unwrap().inverse_cdf(0.999);
        let expected = draws as f64 / 8.0;
        let chi1: f64 = row1
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi1 < crit7, "row 1 chi-squared {chi1} exceeds {crit7}");
    }

    #[test]
    fn hermitian_abs_squares_back_and_rejects_non_hermitian_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(89);
        for _ in 0..20 {
            let raw = DMatrix::from_fn(4, 4, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let h = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
            let abs = hermitian_abs(&h).unwrap();
            let eigen = abs.clone().symmetric_eigen();
            assert!(eigen.eigenvalues.iter().all(|&l| l >= -1e-9), "|H| must be PSD");
            let diff = (&abs * &abs) - (&h * &h);
            assert!(diff.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-9);
        }
        let skew = DMatrix::from_fn(2, 2, |i, j| {
            if i == 0 && j == 1 {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        });
        assert!(matches!(hermitian_abs(&skew), Err(GlError::NotHermitian { .. })));
    }

    #[test]
    fn squared_sign_operators_match_the_norm_form() {
        // <psi| |H_A|^2 (x) |H_B|^2 |psi> equals ||H_A (x) H_B psi||^2: the
        // absolute value drops out under squaring.
        let mut rng = ChaCha20Rng::seed_from_u64(90);
        for _ in 0..10 {
            let fam_a = SampledFamily::random(2, 1, &mut rng);
            let fam_b = SampledFamily::random(2, 1, &mut rng);
            let psi = random_state(2, &mut rng);
            let x = BitVector::random(2, &mut rng);
            let norm_form =
                gl_success_formula(&fam_a, &[0], &fam_b, &[1], &psi, &x).unwrap();
            let h_a = averaged_sign_operator(&fam_a, &x).unwrap();
            let h_b = averaged_sign_operator(&fam_b, &x).unwrap();
            let abs_a = hermitian_abs(&h_a).unwrap();
            let abs_b = hermitian_abs(&h_b).unwrap();
            let quadratic =
                bipartite_expectation(&psi, &(&abs_a * &abs_a), &(&abs_b * &abs_b)).unwrap();
            assert!((norm_form - quadratic).abs() < 1e-9);
        }
    }

    #[test]
    fn simultaneous_overlap_edge_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(91);
        let psi = random_state(2, &mut rng);
        let id = DMatrix::<Complex64>::identity(2, 2);
        let report = simult_bound_report(
            &[SimultInstance { state: psi.clone(), p_op: id.clone(), q_op: id.clone() }],
            0.5,
        )
        .unwrap();
        assert!((report.premise - 1.0).abs() < 1e-9);
        assert!((report.conclusion - 1.0).abs() < 1e-9);
        assert!(report.premise_holds() && report.conclusion_holds() && report.consistent());

        let zero = DMatrix::<Complex64>::zeros(2, 2);
        let report = simult_bound_report(
            &[SimultInstance { state: psi.clone(), p_op: zero.clone(), q_op: zero.clone() }],
            0.1,
        )
        .unwrap();
        assert!((report.premise - 0.25).abs() < 1e-9);
        assert!(!report.premise_holds() && report.consistent());

        let out_of_bounds = &id * Complex64::new(2.0, 0.0);
        assert!(matches!(
            simult_bound_report(
                &[SimultInstance { state: psi, p_op: out_of_bounds, q_op: id }],
                0.1,
            ),
            Err(GlError::OperatorBounds { .. })
        ));
    }

    #[test]
    fn simultaneous_overlap_has_no_random_counterexample() {
        let mut rng = ChaCha20Rng::seed_from_u64(92);
        let random_unit_op = |rng: &mut ChaCha20Rng| {
            let v = gates::random_unitary(2, &mut *rng);
            let d = DMatrix::from_fn(2, 2, |i, j| {
                if i == j {
                    Complex64::new(rng.gen_range(0.0..1.0), 0.0)
                } else {
                    Complex64::ZERO
                }
            });
            &v * d * v.adjoint()
        };
        for _ in 0..1000 {
            let instances: Vec<SimultInstance> = (0..3)
                .map(|_| SimultInstance {
                    state: random_state(2, &mut rng),
                    p_op: random_unit_op(&mut rng),
                    q_op: random_unit_op(&mut rng),
                })
                .collect();
            let report = simult_bound_report(&instances, 0.0).unwrap();
            let epsilon = report.premise - 0.5;
            if epsilon > 0.0 {
                assert!(
                    report.conclusion >= epsilon.powi(3) - 1e-12,
                    "counterexample: premise {} conclusion {}",
                    report.premise,
                    report.conclusion
                );
            }
        }
    }

    #[test]
    fn instances_expose_extraction_and_oracle_verification() {
        let mut rng = ChaCha20Rng::seed_from_u64(93);
        let x = BitVector::random(2, &mut rng);
        let inst = GlInstance {
            family: Arc::new(ParityFamily::new(x.clone())),
            register: vec![0],
            hidden_x: x,
        };
        let mut state = StateVector::zero_state(2);
        let got = inst.extract(&mut state, &mut rng).unwrap();
        assert!(inst.verify(&got));
        assert_eq!(state.num_qubits(), 2, "bystander qubits survive extraction");
    }

    #[test]
    fn oversized_requests_are_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(94);
        let family = ReadoutFamily {
            index_len: qsim::qubit_cap(),
            register_qubits: 1,
            output_qubit: 0,
        };
        let mut state = StateVector::zero_state(1);
        assert!(matches!(
            gl_extract(&family, &mut state, &[0], &mut rng),
            Err(GlError::TooLarge { .. })
        ));
        let wide = ReadoutFamily { index_len: 1, register_qubits: 1, output_qubit: 0 };
        let state = StateVector::zero_state(2);
        assert!(matches!(
            gl_success_formula(&wide, &[0], &wide, &[0], &state, &BitVector::zeros(1)),
            Err(GlError::BadRegister { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn constrained_prefix_always_reproduces(
            seed in 0u64..1_000_000,
            i in 0usize..5,
            cols in 1usize..9,
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let n = 4usize;
            let i = i.min(n);
            let mut x = BitVector::random(cols, &mut rng);
            if x.is_zero() {
                x.set(0, true);
            }
            let r = BitVector::random(n, &mut rng);
            let m = sample_di(i, &x, &r, cols, &mut rng).unwrap();
            let product = m.matvec(&x);
            for j in 0..i {
                prop_assert_eq!(product.get(j), r.get(j));
            }
        }
    }
}
