//! Clifford tableaus with uniform and indexed sampling.
//!
//! A Clifford is stored by the images of the generators `X_i`, `Z_i` under
//! conjugation. Sampling and enumeration factor through the symplectic group
//! over GF(2): a symplectic matrix fixes the images up to sign, and `2n`
//! extra bits choose the signs. Symplectic matrices are produced by the
//! transvection decomposition, which gives an exact bijection between
//! `0..|Sp(2n)|` and the group, so indexed enumeration and uniform sampling
//! share one code path.
//!
//! Symplectic vectors use the pair-adjacent layout: component `2i` is the
//! `X` exponent of qubit `i` and component `2i+1` the `Z` exponent.

use crate::f2::{BitMatrix, BitVector};
use crate::qsim::pauli::PauliString;
use crate::qsim::StateVector;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub const CLIFFORD_COUNT_ONE_QUBIT: u128 = 24;
pub const CLIFFORD_COUNT_TWO_QUBIT: u128 = 11520;

/// `|Sp(2n, F2)| = prod_{j=1..n} (4^j - 1) * 2^(2j-1)`.
pub fn symplectic_group_order(n: usize) -> u128 {
    let mut order = 1u128;
    for j in 1..=n {
        order *= (1u128 << (2 * j)) - 1;
        order <<= 2 * j - 1;
    }
    order
}

/// Number of Cliffords modulo global phase: symplectic part times `2^(2n)`
/// sign choices.
pub fn clifford_group_order(n: usize) -> u128 {
    symplectic_group_order(n) << (2 * n)
}

fn unit(len: usize, index: usize) -> BitVector {
    let mut v = BitVector::zeros(len);
    v.set(index, true);
    v
}

/// Symplectic inner product in the pair-adjacent layout.
fn sp(a: &BitVector, b: &BitVector) -> bool {
    let mut acc = false;
    for i in 0..a.len() / 2 {
        acc ^= a.get(2 * i) & b.get(2 * i + 1);
        acc ^= a.get(2 * i + 1) & b.get(2 * i);
    }
    acc
}

/// Transvection `v -> v + <v,h> h`.
fn transvect(h: &BitVector, v: &BitVector) -> BitVector {
    if sp(v, h) {
        v ^ h
    } else {
        v.clone()
    }
}

/// Two transvections carrying nonzero `x` to nonzero `y`: applying the first
/// returned vector, then the second, maps `x` to `y`.
fn find_transvection(x: &BitVector, y: &BitVector) -> (BitVector, BitVector) {
    let nn = x.len();
    debug_assert!(!x.is_zero() && !y.is_zero());
    if x == y {
        return (BitVector::zeros(nn), BitVector::zeros(nn));
    }
    if sp(x, y) {
        return (x ^ y, BitVector::zeros(nn));
    }
    let mut z = BitVector::zeros(nn);
    // A pair where both vectors are nonzero: one local choice pairs with both.
    for i in 0..nn / 2 {
        let (x0, x1) = (x.get(2 * i), x.get(2 * i + 1));
        let (y0, y1) = (y.get(2 * i), y.get(2 * i + 1));
        if (x0 || x1) && (y0 || y1) {
            let mut z0 = x0 ^ y0;
            let mut z1 = x1 ^ y1;
            if !z0 && !z1 {
                z1 = true;
                if x0 != x1 {
                    z0 = true;
                }
            }
            z.set(2 * i, z0);
            z.set(2 * i + 1, z1);
            return (x ^ &z, y ^ &z);
        }
    }
    // Supports are pair-disjoint: pick one pair from each side.
    for i in 0..nn / 2 {
        let (x0, x1) = (x.get(2 * i), x.get(2 * i + 1));
        let (y0, y1) = (y.get(2 * i), y.get(2 * i + 1));
        if (x0 || x1) && !y0 && !y1 {
            if x0 == x1 {
                z.set(2 * i + 1, true);
            } else {
                z.set(2 * i, x1);
                z.set(2 * i + 1, x0);
            }
            break;
        }
    }
    for i in 0..nn / 2 {
        let (x0, x1) = (x.get(2 * i), x.get(2 * i + 1));
        let (y0, y1) = (y.get(2 * i), y.get(2 * i + 1));
        if !x0 && !x1 && (y0 || y1) {
            if y0 == y1 {
                z.set(2 * i + 1, true);
            } else {
                z.set(2 * i, y1);
                z.set(2 * i + 1, y0);
            }
            break;
        }
    }
    (x ^ &z, y ^ &z)
}

/// Digit supplier for the transvection decomposition; an index walks the
/// digits deterministically, an RNG draws them uniformly.
enum DigitSource<'a> {
    Index(u128),
    Rng(&'a mut dyn rand::RngCore),
}

impl DigitSource<'_> {
    fn pick_k(&mut self, s: u128) -> u128 {
        match self {
            DigitSource::Index(idx) => {
                let k = *idx % s + 1;
                *idx /= s;
                k
            }
            DigitSource::Rng(rng) => {
                assert!(s <= u64::MAX as u128);
                rng.gen_range(1..=s as u64) as u128
            }
        }
    }

    fn pick_bits(&mut self, count: usize) -> BitVector {
        match self {
            DigitSource::Index(idx) => {
                let mut v = BitVector::zeros(count);
                for j in 0..count {
                    v.set(j, *idx >> j & 1 == 1);
                }
                *idx >>= count;
                v
            }
            DigitSource::Rng(rng) => BitVector::random(count, rng),
        }
    }
}

/// Build the rows (images of the basis vectors) of a symplectic matrix from
/// a digit source, one transvection layer per recursion level.
fn symplectic_rows(n: usize, src: &mut DigitSource) -> Vec<BitVector> {
    let nn = 2 * n;
    let s = (1u128 << nn) - 1;
    let k = src.pick_k(s);
    let f1 = BitVector::from_fn(nn, |j| k >> j & 1 == 1);
    let e1 = unit(nn, 0);
    let (t0, t1) = find_transvection(&e1, &f1);
    let bits = src.pick_bits(nn - 1);
    let mut eprime = e1;
    for j in 2..nn {
        eprime.set(j, bits.get(j - 1));
    }
    let h0 = transvect(&t1, &transvect(&t0, &eprime));
    let apply_f1 = !bits.get(0);

    let mut rows: Vec<BitVector> = if n == 1 {
        vec![unit(2, 0), unit(2, 1)]
    } else {
        let sub = symplectic_rows(n - 1, src);
        let mut rows = vec![unit(nn, 0), unit(nn, 1)];
        for sub_row in sub {
            rows.push(BitVector::from_fn(nn, |j| j >= 2 && sub_row.get(j - 2)));
        }
        rows
    };
    for row in &mut rows {
        let mut v = transvect(&t0, row);
        v = transvect(&t1, &v);
        v = transvect(&h0, &v);
        if apply_f1 {
            v = transvect(&f1, &v);
        }
        *row = v;
    }
    rows
}

/// An `n`-qubit Clifford given by the conjugation images of `X_i` and `Z_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clifford {
    n: usize,
    x_images: Vec<PauliString>,
    z_images: Vec<PauliString>,
}

impl Clifford {
    pub fn identity(n: usize) -> Self {
        Clifford {
            n,
            x_images: (0..n).map(|i| PauliString::x_on(n, i)).collect(),
            z_images: (0..n).map(|i| PauliString::z_on(n, i)).collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, i: usize) -> &PauliString {
        &self.x_images[i]
    }

    pub fn z_image(&self, i: usize) -> &PauliString {
        &self.z_images[i]
    }

    fn from_symplectic_rows(rows: &[BitVector], signs: &BitVector) -> Self {
        let n = rows.len() / 2;
        let image = |row: &BitVector, sign: bool| {
            let x = BitVector::from_fn(n, |j| row.get(2 * j));
            let z = BitVector::from_fn(n, |j| row.get(2 * j + 1));
            // Phase x.z makes the string Hermitian; the sign bit adds -1.
            let phase = (x.dot(&z) as u8) + if sign { 2 } else { 0 };
            PauliString::new(x, z, phase)
        };
        let c = Clifford {
            n,
            x_images: (0..n).map(|i| image(&rows[2 * i], signs.get(2 * i))).collect(),
            z_images: (0..n)
                .map(|i| image(&rows[2 * i + 1], signs.get(2 * i + 1)))
                .collect(),
        };
        debug_assert!(c.is_valid());
        c
    }

    /// Uniformly random Clifford (modulo global phase).
    pub fn sample<R: Rng>(n: usize, rng: &mut R) -> Self {
        let rows = symplectic_rows(n, &mut DigitSource::Rng(rng));
        let signs = BitVector::random(2 * n, rng);
        Clifford::from_symplectic_rows(&rows, &signs)
    }

    /// The group element at `index` in the canonical enumeration order
    /// (symplectic part in the outer digit, sign bits in the low `2n` bits).
    pub fn from_index(n: usize, index: u128) -> Self {
        assert!(index < clifford_group_order(n), "Clifford index out of range");
        let signs_raw = (index & ((1 << (2 * n)) - 1)) as u64;
        let signs = BitVector::from_fn(2 * n, |j| signs_raw >> j & 1 == 1);
        let rows = symplectic_rows(n, &mut DigitSource::Index(index >> (2 * n)));
        Clifford::from_symplectic_rows(&rows, &signs)
    }

    /// Structural validity: images are Hermitian and preserve commutation
    /// exactly as the generators do.
    pub fn is_valid(&self) -> bool {
        let pairs = |i: usize| (&self.x_images[i], &self.z_images[i]);
        for i in 0..self.n {
            let (xi, zi) = pairs(i);
            if xi.num_qubits() != self.n || zi.num_qubits() != self.n {
                return false;
            }
            if !xi.is_hermitian() || !zi.is_hermitian() {
                return false;
            }
            for j in 0..self.n {
                let (xj, zj) = pairs(j);
                if xi.symplectic_product(xj) || zi.symplectic_product(zj) {
                    return false;
                }
                if xi.symplectic_product(zj) != (i == j) {
                    return false;
                }
            }
        }
        true
    }

    /// Image of an arbitrary Pauli under `P -> C P C^dag`.
    pub fn conjugate(&self, p: &PauliString) -> PauliString {
        assert_eq!(p.num_qubits(), self.n);
        let mut acc = PauliString::identity(self.n);
        acc.phase_exp = p.phase_exp;
        for i in 0..self.n {
            if p.x.get(i) {
                acc = acc.mul(&self.x_images[i]);
            }
        }
        for i in 0..self.n {
            if p.z.get(i) {
                acc = acc.mul(&self.z_images[i]);
            }
        }
        acc
    }

    /// Operator product: `(self.compose(other))` acts as `other` first, then
    /// `self`.
    pub fn compose(&self, other: &Clifford) -> Clifford {
        assert_eq!(self.n, other.n);
        Clifford {
            n: self.n,
            x_images: other.x_images.iter().map(|p| self.conjugate(p)).collect(),
            z_images: other.z_images.iter().map(|p| self.conjugate(p)).collect(),
        }
    }

    /// Group inverse, with exact sign bookkeeping.
    pub fn inverse(&self) -> Clifford {
        let nn = 2 * self.n;
        // Column j encodes the image of X_j, column n+j the image of Z_j.
        let mut m = BitMatrix::zeros(nn, nn);
        for j in 0..self.n {
            for i in 0..self.n {
                m.set(2 * i, j, self.x_images[j].x.get(i));
                m.set(2 * i + 1, j, self.x_images[j].z.get(i));
                m.set(2 * i, self.n + j, self.z_images[j].x.get(i));
                m.set(2 * i + 1, self.n + j, self.z_images[j].z.get(i));
            }
        }
        let solve_preimage = |target_component: usize| {
            let e = unit(nn, target_component);
            let u = m.solve(&e).expect("valid tableau is invertible");
            let x = BitVector::from_fn(self.n, |j| u.get(j));
            let z = BitVector::from_fn(self.n, |j| u.get(self.n + j));
            // The Hermitian candidate on this support; its image is then
            // +-(the wanted generator), never an imaginary multiple.
            let hermitian_phase = x.dot(&z) as u8;
            let mut q = PauliString::new(x, z, hermitian_phase);
            let forward = self.conjugate(&q);
            debug_assert!(forward.phase_exp % 2 == 0);
            // Flip the candidate's sign if the forward image came out as the
            // negative of the wanted generator.
            q.phase_exp = (hermitian_phase + (forward.phase_exp & 2)) & 3;
            q
        };
        let x_images = (0..self.n).map(|i| solve_preimage(2 * i)).collect();
        let z_images = (0..self.n).map(|i| solve_preimage(2 * i + 1)).collect();
        Clifford {
            n: self.n,
            x_images,
            z_images,
        }
    }

    /// Dense unitary realizing the tableau (global phase fixed arbitrarily);
    /// exponential in `n`, restricted to small registers.
    ///
    /// The joint +1 eigenspace of the commuting involutions `C Z_i C^dag` is
    /// exactly the line through `C|0..0>`, found by projecting basis states;
    /// column `b` is then the product of the `C X_i C^dag` over the set bits
    /// of `b` applied to that state, which reproduces every generator image
    /// including its sign.
    pub fn to_unitary(&self) -> DMatrix<Complex64> {
        assert!(self.n <= 6, "dense realization limited to 6 qubits");
        let d = 1usize << self.n;
        let mut phi0: Option<Vec<Complex64>> = None;
        for start in 0..d {
            let mut v = vec![Complex64::ZERO; d];
            v[start] = Complex64::ONE;
            for i in 0..self.n {
                let pv = pauli_apply_raw(&self.z_images[i], &v);
                for (a, b) in v.iter_mut().zip(&pv) {
                    *a = (*a + b) * 0.5;
                }
            }
            let norm2: f64 = v.iter().map(|a| a.norm_sqr()).sum();
            if norm2 > 1e-12 {
                let scale = 1.0 / norm2.sqrt();
                for a in &mut v {
                    *a *= scale;
                }
                let lead = v.iter().find(|a| a.norm() > 1e-9).copied().unwrap();
                let fix = lead.conj() / lead.norm();
                for a in &mut v {
                    *a *= fix;
                }
                phi0 = Some(v);
                break;
            }
        }
        let phi0 = phi0.expect("no stabilized state: tableau is not a valid Clifford");
        let mut u = DMatrix::zeros(d, d);
        for b in 0..d {
            let mut col = phi0.clone();
            for i in 0..self.n {
                if b >> i & 1 == 1 {
                    col = pauli_apply_raw(&self.x_images[i], &col);
                }
            }
            for r in 0..d {
                u[(r, b)] = col[r];
            }
        }
        u
    }
}

/// Apply a Pauli string to raw amplitudes (no normalization assumptions).
fn pauli_apply_raw(p: &PauliString, amps: &[Complex64]) -> Vec<Complex64> {
    let xmask = p.x.to_index() as usize;
    let zmask = p.z.to_index() as usize;
    let base = p.phase_factor();
    let mut out = vec![Complex64::ZERO; amps.len()];
    for (b, a) in amps.iter().enumerate() {
        let sign = if (b & zmask).count_ones() % 2 == 1 { -base } else { base };
        out[b ^ xmask] = sign * a;
    }
    out
}

/// All Cliffords (modulo global phase) on `n` qubits in index order;
/// `n <= 2` keeps the list at 24 or 11520 entries.
pub fn enumerate_cliffords(n: usize) -> Vec<Clifford> {
    assert!((1..=2).contains(&n), "full enumeration only for n = 1, 2");
    let order = clifford_group_order(n);
    (0..order).map(|idx| Clifford::from_index(n, idx)).collect()
}

/// Sum over the full Clifford group of
/// `(C^dag P1 C) |psi><psi| (C^dag P2 C)^dag`,
/// computed through the substitution `C -> C^dag` so only forward
/// conjugation is needed.
pub fn clifford_twirl_sum(
    p1: &PauliString,
    p2: &PauliString,
    psi: &StateVector,
) -> DMatrix<Complex64> {
    let n = psi.num_qubits();
    assert_eq!(p1.num_qubits(), n);
    assert_eq!(p2.num_qubits(), n);
    let d = 1usize << n;
    let mut acc = DMatrix::zeros(d, d);
    for c in enumerate_cliffords(n) {
        let a1 = c.conjugate(p1);
        let a2 = c.conjugate(p2);
        let u = pauli_apply_raw(&a1, psi.amplitudes());
        let w = pauli_apply_raw(&a2, psi.amplitudes());
        for i in 0..d {
            for j in 0..d {
                acc[(i, j)] += u[i] * w[j].conj();
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{gates, unitary_deviation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    #[test]
    fn group_orders() {
        assert_eq!(symplectic_group_order(1), 6);
        assert_eq!(symplectic_group_order(2), 720);
        assert_eq!(symplectic_group_order(3), 1_451_520);
        assert_eq!(clifford_group_order(1), CLIFFORD_COUNT_ONE_QUBIT);
        assert_eq!(clifford_group_order(2), CLIFFORD_COUNT_TWO_QUBIT);
    }

    #[test]
    fn transvection_chain_reaches_every_target() {
        // Exhaustive over nonzero vector pairs at width 4.
        for xi in 1u64..16 {
            for yi in 1u64..16 {
                let x = BitVector::from_index(4, xi);
                let y = BitVector::from_index(4, yi);
                let (t0, t1) = find_transvection(&x, &y);
                let got = transvect(&t1, &transvect(&t0, &x));
                assert_eq!(got, y, "x={x} y={y}");
            }
        }
        // Randomized at width 6.
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for _ in 0..500 {
            let x = BitVector::from_index(6, rng.gen_range(1..64));
            let y = BitVector::from_index(6, rng.gen_range(1..64));
            let (t0, t1) = find_transvection(&x, &y);
            assert_eq!(transvect(&t1, &transvect(&t0, &x)), y);
        }
    }

    fn rows_are_symplectic(rows: &[BitVector]) -> bool {
        let n = rows.len() / 2;
        for a in 0..2 * n {
            for b in 0..2 * n {
                // The form on basis vectors: pairs (2i, 2i+1) pair up.
                let want = (a / 2 == b / 2) && (a != b);
                if sp(&rows[a], &rows[b]) != want {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn symplectic_enumeration_is_exact() {
        for n in [1usize, 2] {
            let order = symplectic_group_order(n);
            let mut seen = HashSet::new();
            for idx in 0..order {
                let rows = symplectic_rows(n, &mut DigitSource::Index(idx));
                assert!(rows_are_symplectic(&rows), "n={n} idx={idx}");
                let key: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
                assert!(seen.insert(key), "duplicate at n={n} idx={idx}");
            }
            assert_eq!(seen.len() as u128, order);
        }
    }

    #[test]
    fn sampled_symplectics_preserve_the_form() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        for _ in 0..50 {
            let rows = symplectic_rows(3, &mut DigitSource::Rng(&mut rng));
            assert!(rows_are_symplectic(&rows));
        }
    }

    #[test]
    fn enumerated_cliffords_are_valid_and_distinct() {
        let all = enumerate_cliffords(1);
        assert_eq!(all.len(), 24);
        let distinct: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 24);
        for c in &all {
            assert!(c.is_valid());
        }

        let all2 = enumerate_cliffords(2);
        assert_eq!(all2.len(), 11520);
        let distinct2: HashSet<_> = all2.iter().cloned().collect();
        assert_eq!(distinct2.len(), 11520);
        for c in all2.iter().step_by(97) {
            assert!(c.is_valid());
        }
    }

    #[test]
    fn sampling_is_uniform_over_the_one_qubit_group() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let mut counts = std::collections::HashMap::new();
        let trials = 24_000usize;
        for _ in 0..trials {
            let c = Clifford::sample(1, &mut rng);
            *counts.entry(c).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = trials as f64 / 24.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let dist = ChiSquared::new(23.0).unwrap();
        let threshold = dist.inverse_cdf(0.999);
        assert!(chi2 < threshold, "chi2 = {chi2}, threshold = {threshold}");
    }

    #[test]
    fn dense_realization_reproduces_generator_images_n1() {
        for c in enumerate_cliffords(1) {
            let u = c.to_unitary();
            assert!(unitary_deviation(&u) < 1e-10);
            for (gen, img) in [
                (PauliString::x_on(1, 0), c.x_image(0)),
                (PauliString::z_on(1, 0), c.z_image(0)),
            ] {
                let lhs = &u * gen.to_matrix() * u.adjoint();
                let diff = (lhs - img.to_matrix()).map(|e| e.norm()).max();
                assert!(diff < 1e-10, "{c:?}");
            }
        }
    }

    #[test]
    fn dense_realization_reproduces_generator_images_n2() {
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        for _ in 0..40 {
            let c = Clifford::sample(2, &mut rng);
            let u = c.to_unitary();
            assert!(unitary_deviation(&u) < 1e-10);
            for i in 0..2 {
                for (gen, img) in [
                    (PauliString::x_on(2, i), c.x_image(i)),
                    (PauliString::z_on(2, i), c.z_image(i)),
                ] {
                    let lhs = &u * gen.to_matrix() * u.adjoint();
                    let diff = (lhs - img.to_matrix()).map(|e| e.norm()).max();
                    assert!(diff < 1e-10);
                }
            }
        }
    }

    #[test]
    fn conjugate_matches_dense_conjugation() {
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        for _ in 0..20 {
            let c = Clifford::sample(2, &mut rng);
            let u = c.to_unitary();
            for p in PauliString::enumerate_hermitian(2) {
                let lhs = &u * p.to_matrix() * u.adjoint();
                let rhs = c.conjugate(&p).to_matrix();
                let diff = (lhs - rhs).map(|e| e.norm()).max();
                assert!(diff < 1e-9);
            }
        }
    }

    #[test]
    fn compose_matches_sequential_conjugation() {
        let mut rng = ChaCha20Rng::seed_from_u64(26);
        for _ in 0..30 {
            let a = Clifford::sample(3, &mut rng);
            let b = Clifford::sample(3, &mut rng);
            let ab = a.compose(&b);
            assert!(ab.is_valid());
            for p in [PauliString::x_on(3, 1), PauliString::z_on(3, 2)] {
                assert_eq!(ab.conjugate(&p), a.conjugate(&b.conjugate(&p)));
            }
        }
        // Dense cross-check up to global phase at n = 1.
        let mut rng = ChaCha20Rng::seed_from_u64(27);
        for _ in 0..10 {
            let a = Clifford::sample(1, &mut rng);
            let b = Clifford::sample(1, &mut rng);
            let lhs = a.compose(&b).to_unitary();
            let rhs = a.to_unitary() * b.to_unitary();
            // Align phases on the largest entry of lhs.
            let (mut bi, mut bj, mut best) = (0, 0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    if lhs[(i, j)].norm() > best {
                        best = lhs[(i, j)].norm();
                        bi = i;
                        bj = j;
                    }
                }
            }
            let phase = rhs[(bi, bj)] / lhs[(bi, bj)];
            assert!((phase.norm() - 1.0).abs() < 1e-9);
            let diff = (lhs.map(|e| e * phase) - rhs).map(|e| e.norm()).max();
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        for c in enumerate_cliffords(1) {
            assert_eq!(c.compose(&c.inverse()), Clifford::identity(1));
            assert_eq!(c.inverse().compose(&c), Clifford::identity(1));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(28);
        for n in [2usize, 3, 4] {
            for _ in 0..15 {
                let c = Clifford::sample(n, &mut rng);
                assert_eq!(c.compose(&c.inverse()), Clifford::identity(n));
            }
        }
    }

    #[test]
    fn group_average_fixes_maximally_mixed_state() {
        // Any group containing all Paulis averages every pure state to I/d.
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let mut s = StateVector::zero_state(1);
        s.apply_gate(&gates::random_unitary(2, &mut rng), &[0]).unwrap();
        let mut acc: DMatrix<Complex64> = DMatrix::zeros(2, 2);
        let all = enumerate_cliffords(1);
        for c in &all {
            let u = c.to_unitary();
            let col = DMatrix::from_column_slice(2, 1, s.amplitudes());
            let v = u * col;
            acc += &v * v.adjoint();
        }
        acc /= Complex64::new(all.len() as f64, 0.0);
        let diff = (acc - DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0))
            .map(|e| e.norm())
            .max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn twirl_sum_cancels_cross_terms_and_matches_pauli_average() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let mut s = StateVector::zero_state(1);
        s.apply_gate(&gates::random_unitary(2, &mut rng), &[0]).unwrap();

        let x = PauliString::x_on(1, 0);
        let z = PauliString::z_on(1, 0);
        let cross = clifford_twirl_sum(&x, &z, &s);
        assert!(cross.map(|e| e.norm()).max() < 1e-10, "cross terms must vanish");

        // Diagonal case: |group|/(4^n - 1) * sum over nonidentity Paulis.
        let same = clifford_twirl_sum(&x, &x, &s);
        let mut rhs: DMatrix<Complex64> = DMatrix::zeros(2, 2);
        for p in PauliString::enumerate_hermitian(1) {
            if p.is_identity_support() {
                continue;
            }
            let col = DMatrix::from_column_slice(2, 1, s.amplitudes());
            let v = p.to_matrix() * col;
            rhs += &v * v.adjoint();
        }
        rhs *= Complex64::new(24.0 / 3.0, 0.0);
        let diff = (same - rhs).map(|e| e.norm()).max();
        assert!(diff < 1e-9);
    }
}
