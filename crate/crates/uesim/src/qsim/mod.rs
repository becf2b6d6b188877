//! Dense statevector simulation with Pauli and Clifford machinery.
//!
//! Qubit `i` of an `n`-qubit register is bit `i` (least significant first)
//! of the amplitude index, so basis state `|b>` sits at index
//! `sum_i b_i 2^i`. Registers are capped at a configurable qubit count
//! (default 24) to keep accidental blowups loud.

mod clifford;
mod pauli;

pub use clifford::{
    clifford_group_order, clifford_twirl_sum, enumerate_cliffords, symplectic_group_order,
    Clifford, CLIFFORD_COUNT_ONE_QUBIT, CLIFFORD_COUNT_TWO_QUBIT,
};
pub use pauli::PauliString;

use crate::f2::BitVector;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("register of {requested} qubits exceeds the configured cap of {cap}")]
    TooManyQubits { requested: usize, cap: usize },
    #[error("amplitude vector has length {got}, which is not a power of two")]
    NotPowerOfTwo { got: usize },
    #[error("state norm {norm} is not 1 within tolerance")]
    NotNormalized { norm: f64 },
    #[error("gate matrix is {got_rows}x{got_cols}, expected {dim}x{dim} for {targets} target qubits")]
    GateShape {
        got_rows: usize,
        got_cols: usize,
        dim: usize,
        targets: usize,
    },
    #[error("gate matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("target qubits must be distinct and in range: {0:?}")]
    BadTargets(Vec<usize>),
}

static QUBIT_CAP: AtomicUsize = AtomicUsize::new(24);

/// Adjust the register-size cap. Returns the previous value.
pub fn set_qubit_cap(cap: usize) -> usize {
    QUBIT_CAP.swap(cap, Ordering::SeqCst)
}

pub fn qubit_cap() -> usize {
    QUBIT_CAP.load(Ordering::SeqCst)
}

const NORM_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;

/// A pure state on `n` qubits as a dense amplitude vector.
#[derive(Clone, Debug)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero_state(n: usize) -> Self {
        Self::basis_index(n, 0)
    }

    /// The computational basis state with the given index.
    pub fn basis_index(n: usize, index: usize) -> Self {
        let cap = qubit_cap();
        assert!(n <= cap, "register of {n} qubits exceeds the configured cap of {cap}");
        assert!(index < (1usize << n), "basis index out of range");
        let mut amps = vec![Complex64::ZERO; 1 << n];
        amps[index] = Complex64::ONE;
        StateVector { n, amps }
    }

    /// The computational basis state `|bits>`.
    pub fn basis_state(bits: &BitVector) -> Self {
        Self::basis_index(bits.len(), bits.to_index() as usize)
    }

    /// Build from raw amplitudes; the length must be a power of two and the
    /// norm must be 1 within 1e-9.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let len = amps.len();
        if len == 0 || len & (len - 1) != 0 {
            return Err(QsimError::NotPowerOfTwo { got: len });
        }
        let n = len.trailing_zeros() as usize;
        let cap = qubit_cap();
        if n > cap {
            return Err(QsimError::TooManyQubits { requested: n, cap });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized { norm });
        }
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        assert_eq!(self.n, other.n, "inner product requires equal register sizes");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Tensor product; `other`'s qubits are appended above `self`'s, i.e.
    /// qubit `k` of `other` becomes qubit `self.n + k`.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let n = self.n + other.n;
        let cap = qubit_cap();
        assert!(n <= cap, "register of {n} qubits exceeds the configured cap of {cap}");
        let mut amps = vec![Complex64::ZERO; 1 << n];
        for (j, bj) in other.amps.iter().enumerate() {
            if bj.norm_sqr() == 0.0 {
                continue;
            }
            let base = j << self.n;
            for (i, ai) in self.amps.iter().enumerate() {
                amps[base | i] = ai * bj;
            }
        }
        StateVector { n, amps }
    }

    fn check_targets(&self, targets: &[usize]) -> Result<(), QsimError> {
        let mut seen = 0usize;
        for &t in targets {
            if t >= self.n || seen & (1 << t) != 0 {
                return Err(QsimError::BadTargets(targets.to_vec()));
            }
            seen |= 1 << t;
        }
        Ok(())
    }

    /// Apply a `2^k x 2^k` unitary to the `k` target qubits; bit `j` of the
    /// gate's index space corresponds to `targets[j]`. The matrix is checked
    /// for unitarity to 1e-10.
    pub fn apply_gate(
        &mut self,
        u: &DMatrix<Complex64>,
        targets: &[usize],
    ) -> Result<(), QsimError> {
        self.apply_gate_controlled(u, targets, &[])
    }

    /// As `apply_gate`, but acting only on the subspace where each
    /// `(qubit, value)` control condition holds. Control qubits must be
    /// disjoint from targets.
    pub fn apply_gate_controlled(
        &mut self,
        u: &DMatrix<Complex64>,
        targets: &[usize],
        controls: &[(usize, bool)],
    ) -> Result<(), QsimError> {
        self.check_targets(targets)?;
        let k = targets.len();
        let dim = 1usize << k;
        if u.nrows() != dim || u.ncols() != dim {
            return Err(QsimError::GateShape {
                got_rows: u.nrows(),
                got_cols: u.ncols(),
                dim,
                targets: k,
            });
        }
        let deviation = unitary_deviation(u);
        if deviation > UNITARY_TOL {
            return Err(QsimError::NotUnitary { deviation });
        }
        let mut tmask = 0usize;
        for &t in targets {
            tmask |= 1 << t;
        }
        let mut cmask = 0usize;
        let mut cval = 0usize;
        for &(q, v) in controls {
            assert!(q < self.n, "control qubit {q} out of range");
            assert!(tmask & (1 << q) == 0, "control qubit {q} overlaps a target");
            cmask |= 1 << q;
            if v {
                cval |= 1 << q;
            }
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
        for base in 0..self.amps.len() {
            if base & tmask != 0 || base & cmask != cval {
                continue;
            }
            for (j, g) in gathered.iter_mut().enumerate() {
                *g = self.amps[base | spread[j]];
            }
            for i in 0..dim {
                let mut acc = Complex64::ZERO;
                for (j, g) in gathered.iter().enumerate() {
                    acc += u[(i, j)] * g;
                }
                self.amps[base | spread[i]] = acc;
            }
        }
        Ok(())
    }

    /// Probability that measuring `qubit` yields 1.
    pub fn probability_one(&self, qubit: usize) -> f64 {
        assert!(qubit < self.n, "qubit {qubit} out of range");
        let mask = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Exact outcome distribution for measuring the listed qubits; entry `o`
    /// is the probability of the outcome whose bit `j` (of `o`) is the value
    /// of `qubits[j]`.
    pub fn outcome_probabilities(&self, qubits: &[usize]) -> Vec<f64> {
        self.check_targets(qubits).expect("distinct in-range qubits");
        let mut probs = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let w = a.norm_sqr();
            if w == 0.0 {
                continue;
            }
            let mut o = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                if i >> q & 1 == 1 {
                    o |= 1 << j;
                }
            }
            probs[o] += w;
        }
        probs
    }

    /// Projective computational-basis measurement of the listed qubits, in
    /// order. The state collapses; outcome bit `j` reports `qubits[j]`.
    pub fn measure<R: Rng + ?Sized>(&mut self, qubits: &[usize], rng: &mut R) -> BitVector {
        self.check_targets(qubits).expect("distinct in-range qubits");
        let mut out = BitVector::zeros(qubits.len());
        for (j, &q) in qubits.iter().enumerate() {
            let p1 = self.probability_one(q);
            let hit = rng.gen::<f64>() < p1;
            out.set(j, hit);
            self.project_qubit(q, hit);
        }
        out
    }

    /// Measure every qubit (qubit `i` reported at bit `i`).
    pub fn measure_all<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BitVector {
        let qubits: Vec<usize> = (0..self.n).collect();
        self.measure(&qubits, rng)
    }

    fn project_qubit(&mut self, qubit: usize, value: bool) {
        let mask = 1usize << qubit;
        let keep = if value { mask } else { 0 };
        let mut norm_sqr = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == keep {
                norm_sqr += a.norm_sqr();
            } else {
                *a = Complex64::ZERO;
            }
        }
        assert!(norm_sqr > 0.0, "projection onto a zero-probability branch");
        let scale = 1.0 / norm_sqr.sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
    }

    /// Remove qubits that are in a definite computational state (e.g. after
    /// measuring them), shrinking the register. Remaining qubits keep their
    /// relative order. Panics if a listed qubit still has both branches
    /// occupied beyond tolerance.
    pub fn factor_out(&mut self, qubits: &[usize]) {
        if qubits.is_empty() {
            return;
        }
        self.check_targets(qubits).expect("distinct in-range qubits");
        let mut fixed_mask = 0usize;
        let mut fixed_val = 0usize;
        for &q in qubits {
            let p1 = self.probability_one(q);
            assert!(
                p1 < 1e-9 || p1 > 1.0 - 1e-9,
                "qubit {q} is not in a definite state (p1 = {p1})"
            );
            fixed_mask |= 1 << q;
            if p1 > 0.5 {
                fixed_val |= 1 << q;
            }
        }
        let new_n = self.n - qubits.len();
        let mut new_amps = vec![Complex64::ZERO; 1 << new_n];
        // Map each retained index by packing the non-fixed bits in order.
        let kept: Vec<usize> = (0..self.n).filter(|q| fixed_mask >> q & 1 == 0).collect();
        for (i, a) in self.amps.iter().enumerate() {
            if i & fixed_mask != fixed_val {
                continue;
            }
            let mut packed = 0usize;
            for (bit, &q) in kept.iter().enumerate() {
                if i >> q & 1 == 1 {
                    packed |= 1 << bit;
                }
            }
            new_amps[packed] = *a;
        }
        self.n = new_n;
        self.amps = new_amps;
        let norm = self.norm();
        assert!((norm - 1.0).abs() < 1e-6, "factored state lost norm ({norm})");
        // Remove any residual drift from long measurement chains.
        for a in &mut self.amps {
            *a /= norm;
        }
    }

    /// Replace amplitudes via a bijective relabeling of basis indices:
    /// `new[map(i)] = old[i]`. The map must be a permutation; this is the
    /// workhorse for classical reversible arithmetic on basis states.
    pub fn permute_basis(&mut self, map: impl Fn(usize) -> usize) {
        let mut new_amps = vec![Complex64::ZERO; self.amps.len()];
        let mut seen = vec![false; self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let d = map(i);
            assert!(d < new_amps.len() && !seen[d], "basis map is not a permutation");
            seen[d] = true;
            new_amps[d] = *a;
        }
        self.amps = new_amps;
    }

    /// Multiply each basis amplitude by a phase factor.
    pub fn apply_basis_phase(&mut self, phase: impl Fn(usize) -> Complex64) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= phase(i);
        }
    }

    /// Density-matrix accumulation helper: `acc += |self><self|`.
    pub fn accumulate_outer(&self, acc: &mut DMatrix<Complex64>) {
        let d = self.amps.len();
        assert_eq!(acc.nrows(), d);
        assert_eq!(acc.ncols(), d);
        for i in 0..d {
            if self.amps[i].norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..d {
                acc[(i, j)] += self.amps[i] * self.amps[j].conj();
            }
        }
    }
}

pub fn unitary_deviation(u: &DMatrix<Complex64>) -> f64 {
    let d = u.nrows();
    let prod = u.adjoint() * u;
    let mut max = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { Complex64::ONE } else { Complex64::ZERO };
            max = max.max((prod[(i, j)] - want).norm());
        }
    }
    max
}

/// Small gate matrices and random unitaries.
pub mod gates {
    use super::*;

    pub fn identity(dim: usize) -> DMatrix<Complex64> {
        DMatrix::identity(dim, dim)
    }

    pub fn hadamard() -> DMatrix<Complex64> {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        DMatrix::from_row_slice(2, 2, &[s, s, s, -s])
    }

    pub fn pauli_x() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::ZERO, Complex64::ONE, Complex64::ONE, Complex64::ZERO],
        )
    }

    pub fn pauli_y() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::ZERO,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::ZERO,
            ],
        )
    }

    pub fn pauli_z() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::ONE, Complex64::ZERO, Complex64::ZERO, -Complex64::ONE],
        )
    }

    pub fn phase_s() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::ONE,
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::new(0.0, 1.0),
            ],
        )
    }

    /// Real rotation sending `|0>,|1>` to the intermediate basis bisecting
    /// the computational and Hadamard bases (angle pi/8).
    pub fn breidbart() -> DMatrix<Complex64> {
        let c = Complex64::new((std::f64::consts::PI / 8.0).cos(), 0.0);
        let s = Complex64::new((std::f64::consts::PI / 8.0).sin(), 0.0);
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Haar-random unitary via QR of a complex Ginibre matrix with the
    /// standard phase fix on the R diagonal.
    pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(box_muller(rng), box_muller(rng))
        });
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..dim {
            let rjj = r[(j, j)];
            let phase = if rjj.norm() == 0.0 { Complex64::ONE } else { rjj / rjj.norm() };
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_and_endianness() {
        // Qubit 0 is the least significant index bit.
        let s = StateVector::basis_state(&BitVector::from_bools(&[true, false]));
        assert_eq!(s.amplitude(0b01), Complex64::ONE);
        let s = StateVector::basis_state(&BitVector::from_bools(&[false, true]));
        assert_eq!(s.amplitude(0b10), Complex64::ONE);
    }

    #[test]
    fn hadamard_on_qubit_one() {
        let mut s = StateVector::zero_state(2);
        s.apply_gate(&gates::hadamard(), &[1]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitude(0b00) - c(r, 0.0)).norm() < 1e-12);
        assert!((s.amplitude(0b10) - c(r, 0.0)).norm() < 1e-12);
        assert_eq!(s.amplitude(0b01), Complex64::ZERO);
    }

    #[test]
    fn target_order_matters_for_multiqubit_gates() {
        // CNOT with control = gate bit 0, target = gate bit 1.
        let cnot = DMatrix::from_row_slice(
            4,
            4,
            &[
                Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO,
                Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, Complex64::ONE,
                Complex64::ZERO, Complex64::ZERO, Complex64::ONE, Complex64::ZERO,
                Complex64::ZERO, Complex64::ONE, Complex64::ZERO, Complex64::ZERO,
            ],
        );
        // |q1 q0> = |01>: control is qubit 0 -> flips qubit 1 -> |11>.
        let mut s = StateVector::basis_index(2, 0b01);
        s.apply_gate(&cnot, &[0, 1]).unwrap();
        assert_eq!(s.amplitude(0b11), Complex64::ONE);
        // Reversed target list: control is qubit 1 (still 0) -> no flip.
        let mut s = StateVector::basis_index(2, 0b01);
        s.apply_gate(&cnot, &[1, 0]).unwrap();
        assert_eq!(s.amplitude(0b01), Complex64::ONE);
    }

    #[test]
    fn rejects_non_unitary_gates() {
        let bad = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::ONE, Complex64::ONE, Complex64::ZERO, Complex64::ONE],
        );
        let mut s = StateVector::zero_state(1);
        assert!(matches!(
            s.apply_gate(&bad, &[0]),
            Err(QsimError::NotUnitary { .. })
        ));
    }

    #[test]
    fn rejects_duplicate_targets() {
        let mut s = StateVector::zero_state(2);
        let id4 = gates::identity(4);
        assert!(matches!(
            s.apply_gate(&id4, &[1, 1]),
            Err(QsimError::BadTargets(_))
        ));
    }

    #[test]
    fn norm_preserved_over_random_circuits() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let n = 3;
            let mut s = StateVector::zero_state(n);
            for _ in 0..4 {
                let u = gates::random_unitary(4, &mut rng);
                let a = rng.gen_range(0..n);
                let b = (a + 1 + rng.gen_range(0..n - 1)) % n;
                s.apply_gate(&u, &[a, b]).unwrap();
            }
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn measurement_statistics_on_plus_state() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut ones = 0;
        let trials = 10_000;
        for _ in 0..trials {
            let mut s = StateVector::zero_state(1);
            s.apply_gate(&gates::hadamard(), &[0]).unwrap();
            let out = s.measure(&[0], &mut rng);
            if out.get(0) {
                ones += 1;
            }
        }
        let rate = ones as f64 / trials as f64;
        let sigma = 0.5 / (trials as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn measurement_collapses_entangled_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..100 {
            // Bell pair: outcomes must agree.
            let mut s = StateVector::zero_state(2);
            s.apply_gate(&gates::hadamard(), &[0]).unwrap();
            let x = gates::pauli_x();
            s.apply_gate_controlled(&x, &[1], &[(0, true)]).unwrap();
            let a = s.measure(&[0], &mut rng);
            let b = s.measure(&[1], &mut rng);
            assert_eq!(a.get(0), b.get(0));
        }
    }

    #[test]
    fn factor_out_after_measurement() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut s = StateVector::zero_state(3);
        s.apply_gate(&gates::hadamard(), &[1]).unwrap();
        s.apply_gate(&gates::pauli_x(), &[2]).unwrap();
        let _ = s.measure(&[2], &mut rng);
        s.factor_out(&[2, 0]);
        assert_eq!(s.num_qubits(), 1);
        // The remaining qubit is the old qubit 1, still in |+>.
        assert!((s.probability_one(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut s = StateVector::zero_state(3);
        for q in 0..3 {
            s.apply_gate(&gates::random_unitary(2, &mut rng), &[q]).unwrap();
        }
        let probs = s.outcome_probabilities(&[0, 2]);
        assert_eq!(probs.len(), 4);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_places_new_qubits_high() {
        let a = StateVector::basis_index(1, 1);
        let b = StateVector::basis_index(2, 0b10);
        let t = a.tensor(&b);
        assert_eq!(t.num_qubits(), 3);
        assert_eq!(t.amplitude(0b101), Complex64::ONE);
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for dim in [2, 4, 8] {
            for _ in 0..20 {
                let u = gates::random_unitary(dim, &mut rng);
                assert!(unitary_deviation(&u) < 1e-10);
            }
        }
    }

    #[test]
    #[should_panic(expected = "exceeds the configured cap")]
    fn qubit_cap_is_enforced() {
        // The cap check fires before any amplitude allocation.
        let _ = StateVector::zero_state(qubit_cap() + 1);
    }
}
