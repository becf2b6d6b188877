//! Pauli strings in the `i^phase * X^x Z^z` normal form.

use crate::f2::BitVector;
use crate::qsim::StateVector;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;

/// An `n`-qubit Pauli operator `i^phase_exp * X^x Z^z`, where `X^x` means
/// the product of `X` on every qubit `i` with `x[i] = 1` (likewise `Z^z`)
/// and `phase_exp` lives in `Z_4`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub x: BitVector,
    pub z: BitVector,
    pub phase_exp: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            x: BitVector::zeros(n),
            z: BitVector::zeros(n),
            phase_exp: 0,
        }
    }

    pub fn new(x: BitVector, z: BitVector, phase_exp: u8) -> Self {
        assert_eq!(x.len(), z.len(), "x and z supports must have equal length");
        PauliString {
            x,
            z,
            phase_exp: phase_exp & 3,
        }
    }

    /// Single-qubit embeddings.
    pub fn x_on(n: usize, qubit: usize) -> Self {
        let mut x = BitVector::zeros(n);
        x.set(qubit, true);
        PauliString::new(x, BitVector::zeros(n), 0)
    }

    pub fn z_on(n: usize, qubit: usize) -> Self {
        let mut z = BitVector::zeros(n);
        z.set(qubit, true);
        PauliString::new(BitVector::zeros(n), z, 0)
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn is_identity_support(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn phase_factor(&self) -> Complex64 {
        match self.phase_exp & 3 {
            0 => Complex64::ONE,
            1 => Complex64::new(0.0, 1.0),
            2 => -Complex64::ONE,
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Operator product `self * other` (self acts after other), renormalized
    /// to the `i^p X^x Z^z` form via `Z^z X^x = (-1)^{z.x} X^x Z^z`.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.num_qubits(), other.num_qubits());
        let reorder = 2 * (self.z.dot(&other.x) as u8);
        PauliString {
            x: &self.x ^ &other.x,
            z: &self.z ^ &other.z,
            phase_exp: (self.phase_exp + other.phase_exp + reorder) & 3,
        }
    }

    /// Hermitian adjoint: `(i^p X^x Z^z)^dag = i^{-p} (-1)^{x.z} X^x Z^z`.
    pub fn adjoint(&self) -> PauliString {
        let flip = 2 * (self.x.dot(&self.z) as u8);
        PauliString {
            x: self.x.clone(),
            z: self.z.clone(),
            phase_exp: (4 - self.phase_exp + flip) & 3,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        *self == self.adjoint()
    }

    /// 0 if the two strings commute, 1 if they anticommute.
    pub fn symplectic_product(&self, other: &PauliString) -> bool {
        self.x.dot(&other.z) ^ self.z.dot(&other.x)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        !self.symplectic_product(other)
    }

    /// Apply to a state, embedding qubit `k` of the string at register qubit
    /// `targets[k]`.
    pub fn apply_to(&self, state: &mut StateVector, targets: &[usize]) {
        let n = self.num_qubits();
        assert_eq!(targets.len(), n, "target list must match string width");
        let mut xmask = 0usize;
        let mut zmask = 0usize;
        for k in 0..n {
            let t = targets[k];
            assert!(t < state.num_qubits(), "target {t} out of range");
            if self.x.get(k) {
                xmask |= 1 << t;
            }
            if self.z.get(k) {
                zmask |= 1 << t;
            }
        }
        let base = self.phase_factor();
        // i^p X^x Z^z |b> = i^p (-1)^{z.b} |b xor x>.
        state.permute_basis(|i| i ^ xmask);
        state.apply_basis_phase(|i| {
            // The permutation already moved |b> to |b xor x>; the Z phase
            // belongs to the original b = i xor x.
            let b = i ^ xmask;
            if (b & zmask).count_ones() % 2 == 1 {
                -base
            } else {
                base
            }
        });
    }

    /// Apply to a state occupying the whole register.
    pub fn apply(&self, state: &mut StateVector) {
        let targets: Vec<usize> = (0..self.num_qubits()).collect();
        self.apply_to(state, &targets);
    }

    /// Dense matrix representation (intended for small widths).
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.num_qubits();
        let d = 1usize << n;
        let xmask = self.x.to_index() as usize;
        let zmask = self.z.to_index() as usize;
        let base = self.phase_factor();
        let mut m = DMatrix::zeros(d, d);
        for col in 0..d {
            let row = col ^ xmask;
            let sign = if (col & zmask).count_ones() % 2 == 1 { -base } else { base };
            m[(row, col)] = sign;
        }
        m
    }

    /// Enumerate all `4^n` sign-free strings (phase chosen so each is
    /// Hermitian: `i^{x.z} X^x Z^z`, the standard tensor-of-XYZ convention).
    pub fn enumerate_hermitian(n: usize) -> Vec<PauliString> {
        assert!(n <= 8, "enumeration is exponential; keep widths small");
        let mut out = Vec::with_capacity(1 << (2 * n));
        for xi in 0..(1u64 << n) {
            for zi in 0..(1u64 << n) {
                let x = BitVector::from_index(n, xi);
                let z = BitVector::from_index(n, zi);
                let phase = (x.dot(&z) as u8) & 3;
                out.push(PauliString::new(x, z, phase));
            }
        }
        out
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase_exp & 3 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        for k in 0..self.num_qubits() {
            let c = match (self.x.get(k), self.z.get(k)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'W', // X*Z on one qubit, i.e. -iY
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::unitary_deviation;

    fn bv(s: &str) -> BitVector {
        BitVector::from_bools(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn single_qubit_matrices() {
        let x = PauliString::new(bv("1"), bv("0"), 0).to_matrix();
        let z = PauliString::new(bv("0"), bv("1"), 0).to_matrix();
        let y = PauliString::new(bv("1"), bv("1"), 1).to_matrix(); // i XZ = Y
        assert_eq!(x[(0, 1)], Complex64::ONE);
        assert_eq!(x[(1, 0)], Complex64::ONE);
        assert_eq!(z[(0, 0)], Complex64::ONE);
        assert_eq!(z[(1, 1)], -Complex64::ONE);
        assert_eq!(y[(1, 0)], Complex64::new(0.0, 1.0));
        assert_eq!(y[(0, 1)], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn multiplication_matches_dense_product() {
        for a in PauliString::enumerate_hermitian(2) {
            for b in PauliString::enumerate_hermitian(2) {
                let prod = a.mul(&b);
                let dense = a.to_matrix() * b.to_matrix();
                let diff = (prod.to_matrix() - dense).map(|e| e.norm()).max();
                assert!(diff < 1e-12, "{a:?} * {b:?} mismatch");
            }
        }
    }

    #[test]
    fn adjoint_matches_dense_adjoint() {
        for mut a in PauliString::enumerate_hermitian(2) {
            for extra in 0..4u8 {
                a.phase_exp = (a.phase_exp + extra) & 3;
                let diff = (a.adjoint().to_matrix() - a.to_matrix().adjoint())
                    .map(|e| e.norm())
                    .max();
                assert!(diff < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_enumeration_is_hermitian_and_unitary() {
        for a in PauliString::enumerate_hermitian(2) {
            assert!(a.is_hermitian(), "{a:?}");
            assert!(unitary_deviation(&a.to_matrix()) < 1e-12);
        }
    }

    #[test]
    fn symplectic_product_tracks_commutation() {
        for a in PauliString::enumerate_hermitian(2) {
            for b in PauliString::enumerate_hermitian(2) {
                let ab = a.to_matrix() * b.to_matrix();
                let ba = b.to_matrix() * a.to_matrix();
                let commute = (ab.clone() - ba.clone()).map(|e| e.norm()).max() < 1e-12;
                let anticommute = (ab + ba).map(|e| e.norm()).max() < 1e-12;
                if a.symplectic_product(&b) {
                    assert!(anticommute);
                } else {
                    assert!(commute);
                }
            }
        }
    }

    #[test]
    fn apply_matches_dense_action() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha20Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for p in PauliString::enumerate_hermitian(2) {
            let u = crate::qsim::gates::random_unitary(4, &mut rng);
            let mut s = StateVector::zero_state(2);
            s.apply_gate(&u, &[0, 1]).unwrap();
            let dense = p.to_matrix();
            let mut expect = vec![Complex64::ZERO; 4];
            for r in 0..4 {
                for c in 0..4 {
                    expect[r] += dense[(r, c)] * s.amplitude(c);
                }
            }
            p.apply(&mut s);
            for r in 0..4 {
                assert!((s.amplitude(r) - expect[r]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_respects_target_embedding() {
        // X on string qubit 0 embedded at register qubit 2.
        let p = PauliString::x_on(1, 0);
        let mut s = StateVector::zero_state(3);
        p.apply_to(&mut s, &[2]);
        assert_eq!(s.amplitude(0b100), Complex64::ONE);
    }
}
