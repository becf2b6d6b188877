//! Classical program descriptors.
//!
//! Everything an opaque wrapper can hide is described here as a [`Program`]:
//! a classical function on fixed-width bit strings that may also refuse an
//! input (the [`ProgramOutput::Bottom`] answer). Besides plain table- and
//! PRF-backed functions, the module provides *patched* programs. A patched
//! program carries a [`CipherOracle`] — the key-test/decrypt interface of a
//! key-testable ciphertext — and answers inputs that pass the key test
//! through the decryption path while everything else falls through to a base
//! function. The coset variant turns a single encrypted bit into a point
//! function on a domain one bit wider than the key.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{GgmKey, GgmPuncturedKey, RandomFunction};
use crate::f2::{BitMatrix, BitVector};

/// Result of evaluating a program at one input: an output string, or the
/// distinguished refusal answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProgramOutput {
    Bits(BitVector),
    Bottom,
}

impl ProgramOutput {
    /// The output bits, when the program did not refuse.
    pub fn bits(&self) -> Option<&BitVector> {
        match self {
            ProgramOutput::Bits(b) => Some(b),
            ProgramOutput::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, ProgramOutput::Bottom)
    }

    /// Convenience constructor for single-bit outputs.
    pub fn bit(b: bool) -> Self {
        ProgramOutput::Bits(BitVector::from_bools(&[b]))
    }
}

impl fmt::Display for ProgramOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramOutput::Bits(b) => write!(f, "{b}"),
            ProgramOutput::Bottom => write!(f, "bottom"),
        }
    }
}

/// A classical function on bit strings with declared arities.
///
/// `eval` takes a randomness source because some implementations answer
/// through a measurement on held quantum state; descriptors that are purely
/// classical ignore it. Inputs must have length `input_len`; outputs are
/// either `Bottom` or exactly `output_len` bits.
pub trait Program: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn eval(&self, x: &BitVector, rng: &mut dyn RngCore) -> ProgramOutput;
}

/// Key-test/decrypt access to a ciphertext whose scheme supports key
/// testing. `test` maps a candidate key to the slot it unlocks (`None` when
/// it unlocks nothing); `decrypt` opens one slot with a key that tested
/// positive for it. Implementations hold the quantum ciphertext internally
/// and synchronize access, so the oracle is shared freely.
pub trait CipherOracle: Send + Sync {
    /// Bit length of candidate keys.
    fn key_len(&self) -> usize;

    /// Number of addressable key slots (1 for single-receiver ciphertexts,
    /// 2 for coupled ones).
    fn slots(&self) -> usize;

    /// Which slot, if any, the candidate key unlocks. Exact: no false
    /// accepts, no false rejects.
    fn test(&self, candidate: &BitVector, rng: &mut dyn RngCore) -> Option<usize>;

    /// Plaintext length of `slot`.
    fn message_len(&self, slot: usize) -> usize;

    /// Decrypt `slot` using `key`. Callers only pass keys that `test`
    /// accepted for that slot.
    fn decrypt(&self, slot: usize, key: &BitVector, rng: &mut dyn RngCore) -> BitVector;
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("coupling matrix must be {rows}x{cols} of full row rank, got rank {rank}")]
    BadCoupling { rows: usize, cols: usize, rank: usize },
    #[error("vector of length {got} is outside the coset domain of width {want}")]
    CosetDomain { got: usize, want: usize },
    #[error("{got} does not lie in the image of the coupling matrix")]
    NoPreimage { got: BitVector },
}

// ---------------------------------------------------------------------------
// Plain descriptors.
// ---------------------------------------------------------------------------

/// The point indicator: 1 on the stored point, 0 elsewhere.
#[derive(Debug, Clone)]
pub struct PointProgram {
    point: BitVector,
}

impl PointProgram {
    pub fn new(point: BitVector) -> Self {
        PointProgram { point }
    }

    pub fn point(&self) -> &BitVector {
        &self.point
    }
}

impl Program for PointProgram {
    fn input_len(&self) -> usize {
        self.point.len()
    }

    fn output_len(&self) -> usize {
        1
    }

    fn eval(&self, x: &BitVector, _rng: &mut dyn RngCore) -> ProgramOutput {
        ProgramOutput::bit(x == &self.point)
    }
}

/// An explicit truth table over a small input domain.
#[derive(Debug, Clone)]
pub struct TableProgram {
    input_len: usize,
    output_len: usize,
    rows: Vec<BitVector>,
}

impl TableProgram {
    /// Tabulate `f` over all `2^input_len` inputs. Keep `input_len` small.
    pub fn from_fn(
        input_len: usize,
        output_len: usize,
        mut f: impl FnMut(&BitVector) -> BitVector,
    ) -> Self {
        assert!(input_len <= 20, "table domains beyond 2^20 are not sensible");
        let rows = (0u64..1 << input_len)
            .map(|v| {
                let out = f(&BitVector::from_index(input_len, v));
                assert_eq!(out.len(), output_len, "table row has the wrong width");
                out
            })
            .collect();
        TableProgram { input_len, output_len, rows }
    }

    /// Materialize another program's table (it must never refuse).
    pub fn tabulate(p: &dyn Program, rng: &mut dyn RngCore) -> Self {
        TableProgram::from_fn(p.input_len(), p.output_len(), |x| match p.eval(x, rng) {
            ProgramOutput::Bits(b) => b,
            ProgramOutput::Bottom => panic!("cannot tabulate a refusing program"),
        })
    }
}

impl Program for TableProgram {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn eval(&self, x: &BitVector, _rng: &mut dyn RngCore) -> ProgramOutput {
        assert_eq!(x.len(), self.input_len, "input width mismatch");
        ProgramOutput::Bits(self.rows[x.to_index() as usize].clone())
    }
}

/// A GGM tree keyed function.
#[derive(Debug, Clone)]
pub struct GgmProgram {
    key: GgmKey,
}

impl GgmProgram {
    pub fn new(key: GgmKey) -> Self {
        GgmProgram { key }
    }

    pub fn key(&self) -> &GgmKey {
        &self.key
    }
}

impl Program for GgmProgram {
    fn input_len(&self) -> usize {
        self.key.input_len()
    }

    fn output_len(&self) -> usize {
        self.key.seed_len()
    }

    fn eval(&self, x: &BitVector, _rng: &mut dyn RngCore) -> ProgramOutput {
        ProgramOutput::Bits(self.key.eval(x))
    }
}

/// A GGM function with a few points carved out; refuses exactly there.
#[derive(Debug, Clone)]
pub struct PuncturedGgmProgram {
    key: GgmPuncturedKey,
    output_len: usize,
}

impl PuncturedGgmProgram {
    pub fn new(key: GgmPuncturedKey, output_len: usize) -> Self {
        PuncturedGgmProgram { key, output_len }
    }
}

impl Program for PuncturedGgmProgram {
    fn input_len(&self) -> usize {
        self.key.input_len()
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn eval(&self, x: &BitVector, _rng: &mut dyn RngCore) -> ProgramOutput {
        match self.key.eval(x) {
            Some(b) => ProgramOutput::Bits(b),
            None => ProgramOutput::Bottom,
        }
    }
}

/// A lazily sampled uniformly random function.
#[derive(Debug, Clone)]
pub struct RandomFnProgram {
    f: RandomFunction,
}

impl RandomFnProgram {
    pub fn new(f: RandomFunction) -> Self {
        RandomFnProgram { f }
    }
}

impl Program for RandomFnProgram {
    fn input_len(&self) -> usize {
        self.f.input_len()
    }

    fn output_len(&self) -> usize {
        self.f.output_len()
    }

    fn eval(&self, x: &BitVector, _rng: &mut dyn RngCore) -> ProgramOutput {
        ProgramOutput::Bits(self.f.eval(x))
    }
}

// ---------------------------------------------------------------------------
// Patched descriptors.
// ---------------------------------------------------------------------------

/// Base function with a decryption shortcut: inputs that unlock a key slot
/// are answered with that slot's plaintext, everything else by the base.
pub struct PatchedProgram {
    base: Arc<dyn Program>,
    cipher: Arc<dyn CipherOracle>,
}

impl PatchedProgram {
    pub fn new(base: Arc<dyn Program>, cipher: Arc<dyn CipherOracle>) -> Self {
        assert_eq!(base.input_len(), cipher.key_len(), "domain must match key width");
        for slot in 0..cipher.slots() {
            assert_eq!(
                cipher.message_len(slot),
                base.output_len(),
                "slot {slot} plaintext width must match the base output width",
            );
        }
        PatchedProgram { base, cipher }
    }
}

impl Program for PatchedProgram {
    fn input_len(&self) -> usize {
        self.base.input_len()
    }

    fn output_len(&self) -> usize {
        self.base.output_len()
    }

    fn eval(&self, x: &BitVector, rng: &mut dyn RngCore) -> ProgramOutput {
        match self.cipher.test(x, rng) {
            Some(slot) => ProgramOutput::Bits(self.cipher.decrypt(slot, x, rng)),
            None => self.base.eval(x, rng),
        }
    }
}

impl fmt::Debug for PatchedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PatchedProgram")
            .field("input_len", &self.input_len())
            .field("output_len", &self.output_len())
            .finish_non_exhaustive()
    }
}

/// Like [`PatchedProgram`], but the decrypted value is treated as a pointer
/// back into the domain: inputs that unlock a slot are answered by the base
/// function *at the decrypted value*.
pub struct IndirectPatchedProgram {
    base: Arc<dyn Program>,
    cipher: Arc<dyn CipherOracle>,
}

impl IndirectPatchedProgram {
    pub fn new(base: Arc<dyn Program>, cipher: Arc<dyn CipherOracle>) -> Self {
        assert_eq!(base.input_len(), cipher.key_len(), "domain must match key width");
        for slot in 0..cipher.slots() {
            assert_eq!(
                cipher.message_len(slot),
                base.input_len(),
                "slot {slot} plaintext must be a domain point",
            );
        }
        IndirectPatchedProgram { base, cipher }
    }
}

impl Program for IndirectPatchedProgram {
    fn input_len(&self) -> usize {
        self.base.input_len()
    }

    fn output_len(&self) -> usize {
        self.base.output_len()
    }

    fn eval(&self, x: &BitVector, rng: &mut dyn RngCore) -> ProgramOutput {
        match self.cipher.test(x, rng) {
            Some(slot) => {
                let y = self.cipher.decrypt(slot, x, rng);
                self.base.eval(&y, rng)
            }
            None => self.base.eval(x, rng),
        }
    }
}

impl fmt::Debug for IndirectPatchedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndirectPatchedProgram")
            .field("input_len", &self.input_len())
            .field("output_len", &self.output_len())
            .finish_non_exhaustive()
    }
}

/// Base function with a decryption shortcut whose plaintext is a *tagged
/// circuit*: an all-zero tag of the key width followed by a serialized GGM
/// circuit. When the tag or the circuit fails to parse the program refuses,
/// otherwise it answers with the decoded circuit applied to the input.
pub struct CircuitPatchedProgram {
    fallback: Arc<dyn Program>,
    cipher: Arc<dyn CipherOracle>,
    tag_len: usize,
}

impl CircuitPatchedProgram {
    pub fn new(fallback: Arc<dyn Program>, cipher: Arc<dyn CipherOracle>) -> Self {
        assert_eq!(fallback.input_len(), cipher.key_len(), "domain must match key width");
        let tag_len = cipher.key_len();
        CircuitPatchedProgram { fallback, cipher, tag_len }
    }
}

impl Program for CircuitPatchedProgram {
    fn input_len(&self) -> usize {
        self.fallback.input_len()
    }

    fn output_len(&self) -> usize {
        self.fallback.output_len()
    }

    fn eval(&self, x: &BitVector, rng: &mut dyn RngCore) -> ProgramOutput {
        let slot = match self.cipher.test(x, rng) {
            Some(slot) => slot,
            None => return self.fallback.eval(x, rng),
        };
        let m = self.cipher.decrypt(slot, x, rng);
        if m.len() < self.tag_len || !m.slice(0..self.tag_len).is_zero() {
            return ProgramOutput::Bottom;
        }
        let circuit = match decode_ggm_circuit(&m.slice(self.tag_len..m.len())) {
            Some(key) => key,
            None => return ProgramOutput::Bottom,
        };
        if circuit.input_len() != x.len() || circuit.seed_len() != self.output_len() {
            return ProgramOutput::Bottom;
        }
        ProgramOutput::Bits(circuit.eval(x))
    }
}

impl fmt::Debug for CircuitPatchedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircuitPatchedProgram")
            .field("input_len", &self.input_len())
            .field("tag_len", &self.tag_len)
            .finish_non_exhaustive()
    }
}

// ---------------------------------------------------------------------------
// Coset point programs.
// ---------------------------------------------------------------------------

/// The two preimages of `w` under a coupling matrix `t` whose kernel is one
/// dimensional (`t` is `k x (k+1)` of rank `k`), in lexicographic order.
pub fn coset_pair(t: &BitMatrix, w: &BitVector) -> Result<(BitVector, BitVector), ProgramError> {
    let rank = t.rank();
    if t.cols() != t.rows() + 1 || rank != t.rows() {
        return Err(ProgramError::BadCoupling { rows: t.rows(), cols: t.cols(), rank });
    }
    let particular = t
        .solve(w)
        .ok_or_else(|| ProgramError::NoPreimage { got: w.clone() })?;
    let kernel = t.kernel_basis();
    debug_assert_eq!(kernel.len(), 1, "rank-deficiency one means a single kernel vector");
    let other = &particular ^ &kernel[0];
    Ok(match particular.lex_cmp(&other) {
        std::cmp::Ordering::Less | std::cmp::Ordering::Equal => (particular, other),
        std::cmp::Ordering::Greater => (other, particular),
    })
}

/// Select one element of a two-point coset by a bit: the answer is the
/// element whose value at the first differing position equals `c`. The pair
/// may be presented in either order.
pub fn x_of(pair: (&BitVector, &BitVector), c: bool) -> BitVector {
    let i = pair
        .0
        .first_diff(pair.1)
        .expect("coset elements are distinct");
    if pair.0.get(i) == c {
        pair.0.clone()
    } else {
        pair.1.clone()
    }
}

/// A point function presented through a coupling matrix and an encrypted
/// selection bit. On input `z`, the candidate key `t z` is tested; a reject
/// answers 0. Otherwise the slot decrypts to a bit `c`, and the program
/// answers 1 exactly when `z` is the element of its own coset selected by
/// `c` (see [`x_of`]).
pub struct CosetPointProgram {
    coupling: BitMatrix,
    kernel: BitVector,
    cipher: Arc<dyn CipherOracle>,
}

impl CosetPointProgram {
    pub fn new(coupling: BitMatrix, cipher: Arc<dyn CipherOracle>) -> Result<Self, ProgramError> {
        let rank = coupling.rank();
        if coupling.cols() != coupling.rows() + 1 || rank != coupling.rows() {
            return Err(ProgramError::BadCoupling {
                rows: coupling.rows(),
                cols: coupling.cols(),
                rank,
            });
        }
        assert_eq!(cipher.key_len(), coupling.rows(), "key width must match the coupling");
        assert_eq!(cipher.slots(), 1, "coset programs use single-receiver ciphertexts");
        assert_eq!(cipher.message_len(0), 1, "the encrypted selector is a single bit");
        let kernel = coupling.kernel_basis().pop().expect("rank deficiency one");
        Ok(CosetPointProgram { coupling, kernel, cipher })
    }

    pub fn coupling(&self) -> &BitMatrix {
        &self.coupling
    }
}

impl Program for CosetPointProgram {
    fn input_len(&self) -> usize {
        self.coupling.cols()
    }

    fn output_len(&self) -> usize {
        1
    }

    fn eval(&self, z: &BitVector, rng: &mut dyn RngCore) -> ProgramOutput {
        let candidate = self.coupling.matvec(z);
        let slot = match self.cipher.test(&candidate, rng) {
            Some(slot) => slot,
            None => return ProgramOutput::bit(false),
        };
        let c = self.cipher.decrypt(slot, &candidate, rng).get(0);
        let partner = z ^ &self.kernel;
        let selected = x_of((z, &partner), c);
        ProgramOutput::bit(selected == *z)
    }
}

impl fmt::Debug for CosetPointProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CosetPointProgram")
            .field("input_len", &self.input_len())
            .finish_non_exhaustive()
    }
}

// ---------------------------------------------------------------------------
// Circuit serialization.
// ---------------------------------------------------------------------------

fn push_le16(bits: &mut Vec<bool>, v: u16) {
    for k in 0..16 {
        bits.push((v >> k) & 1 == 1);
    }
}

fn read_le16(bits: &BitVector, at: usize) -> u16 {
    let mut v = 0u16;
    for k in 0..16 {
        if bits.get(at + k) {
            v |= 1 << k;
        }
    }
    v
}

/// Serialize a GGM circuit as `LE16(input_len) || LE16(root_len) || root`.
pub fn encode_ggm_circuit(key: &GgmKey) -> BitVector {
    let mut bits = Vec::with_capacity(32 + key.seed_len());
    push_le16(&mut bits, key.input_len() as u16);
    push_le16(&mut bits, key.seed_len() as u16);
    bits.extend(key.seed().bits());
    BitVector::from_bools(&bits)
}

/// Inverse of [`encode_ggm_circuit`]. Rejects truncated input, a zero-width
/// root, or any trailing bits beyond the declared root.
pub fn decode_ggm_circuit(bits: &BitVector) -> Option<GgmKey> {
    if bits.len() < 32 {
        return None;
    }
    let input_len = read_le16(bits, 0) as usize;
    let root_len = read_le16(bits, 16) as usize;
    if input_len == 0 || root_len == 0 || bits.len() != 32 + root_len {
        return None;
    }
    let root = bits.slice(32..32 + root_len);
    Some(GgmKey::new(root, input_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// A purely classical stand-in for a key-testable ciphertext.
    struct MockCipher {
        keys: Vec<BitVector>,
        messages: Vec<BitVector>,
    }

    impl CipherOracle for MockCipher {
        fn key_len(&self) -> usize {
            self.keys[0].len()
        }

        fn slots(&self) -> usize {
            self.keys.len()
        }

        fn test(&self, candidate: &BitVector, _rng: &mut dyn RngCore) -> Option<usize> {
            self.keys.iter().position(|k| k == candidate)
        }

        fn message_len(&self, slot: usize) -> usize {
            self.messages[slot].len()
        }

        fn decrypt(&self, slot: usize, key: &BitVector, _rng: &mut dyn RngCore) -> BitVector {
            assert_eq!(self.keys[slot], *key, "decrypt called with a key that does not fit");
            self.messages[slot].clone()
        }
    }

    fn bv(s: &str) -> BitVector {
        BitVector::from_bools(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn point_program_indicates_its_point() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let p = PointProgram::new(bv("1010"));
        for v in 0u64..16 {
            let x = BitVector::from_index(4, v);
            let expect = ProgramOutput::bit(x == bv("1010"));
            assert_eq!(p.eval(&x, &mut rng), expect);
        }
    }

    #[test]
    fn patched_program_routes_keys_to_plaintexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let cipher = Arc::new(MockCipher {
            keys: vec![bv("001"), bv("110")],
            messages: vec![bv("1111"), bv("0001")],
        });
        let base = Arc::new(TableProgram::from_fn(3, 4, |x| {
            BitVector::from_index(4, x.to_index() ^ 0b1001)
        }));
        let p = PatchedProgram::new(base.clone(), cipher);
        for v in 0u64..8 {
            let x = BitVector::from_index(3, v);
            let got = p.eval(&x, &mut rng);
            if x == bv("001") {
                assert_eq!(got, ProgramOutput::Bits(bv("1111")));
            } else if x == bv("110") {
                assert_eq!(got, ProgramOutput::Bits(bv("0001")));
            } else {
                assert_eq!(got, base.eval(&x, &mut rng));
            }
        }
    }

    #[test]
    fn indirect_patch_reroutes_through_the_decrypted_point() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let cipher = Arc::new(MockCipher {
            keys: vec![bv("01")],
            messages: vec![bv("11")],
        });
        let base = Arc::new(TableProgram::from_fn(2, 3, |x| {
            BitVector::from_index(3, 7 - x.to_index())
        }));
        let p = IndirectPatchedProgram::new(base.clone(), cipher);
        // The key input answers as base(decrypted value), not base(key).
        assert_eq!(p.eval(&bv("01"), &mut rng), base.eval(&bv("11"), &mut rng));
        assert_eq!(p.eval(&bv("00"), &mut rng), base.eval(&bv("00"), &mut rng));
    }

    #[test]
    fn circuit_patch_runs_a_well_tagged_circuit_and_refuses_otherwise() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let ggm = GgmKey::sample(6, 4, &mut rng);
        let tagged = BitVector::zeros(4).concat(&encode_ggm_circuit(&ggm));
        let good = Arc::new(MockCipher { keys: vec![bv("0110")], messages: vec![tagged] });
        let fallback = Arc::new(TableProgram::from_fn(4, 6, |_| BitVector::zeros(6)));
        let p = CircuitPatchedProgram::new(fallback.clone(), good);
        // Non-key inputs fall through; the key input runs the decoded circuit.
        assert_eq!(p.eval(&bv("0000"), &mut rng), ProgramOutput::Bits(BitVector::zeros(6)));
        assert_eq!(
            p.eval(&bv("0110"), &mut rng),
            ProgramOutput::Bits(ggm.eval(&bv("0110")))
        );

        // A nonzero tag refuses.
        let mut bad_tag = BitVector::zeros(4).concat(&encode_ggm_circuit(&ggm));
        bad_tag.flip(2);
        let bad = Arc::new(MockCipher { keys: vec![bv("0110")], messages: vec![bad_tag] });
        let p = CircuitPatchedProgram::new(fallback.clone(), bad);
        assert_eq!(p.eval(&bv("0110"), &mut rng), ProgramOutput::Bottom);

        // A mangled circuit body refuses.
        let garbage = BitVector::zeros(4).concat(&bv("10"));
        let bad = Arc::new(MockCipher { keys: vec![bv("0110")], messages: vec![garbage] });
        let p = CircuitPatchedProgram::new(fallback, bad);
        assert_eq!(p.eval(&bv("0110"), &mut rng), ProgramOutput::Bottom);
    }

    #[test]
    fn coset_pair_hand_example() {
        // Rows (1,0,0) and (0,1,0); preimages of (1,0) are 100 and 101,
        // which first differ at index 2.
        let t = BitMatrix::from_rows(3, &[bv("100"), bv("010")]);
        let (x0, x1) = coset_pair(&t, &bv("10")).unwrap();
        assert_eq!(x0, bv("100"));
        assert_eq!(x1, bv("101"));
        assert_eq!(x_of((&x0, &x1), false), bv("100"));
        assert_eq!(x_of((&x0, &x1), true), bv("101"));
        // Presentation order does not matter.
        assert_eq!(x_of((&x1, &x0), false), bv("100"));
        assert_eq!(x_of((&x1, &x0), true), bv("101"));
    }

    #[test]
    fn coset_pair_rejects_bad_couplings_and_unreachable_targets() {
        let t = BitMatrix::from_rows(3, &[bv("100"), bv("100")]);
        assert!(matches!(
            coset_pair(&t, &bv("10")),
            Err(ProgramError::BadCoupling { .. })
        ));
        assert!(matches!(
            coset_pair(&t, &bv("11")),
            Err(ProgramError::BadCoupling { .. })
        ));
        let t = BitMatrix::from_rows(3, &[bv("110"), bv("011")]);
        assert!(coset_pair(&t, &bv("11")).is_ok());
    }

    #[test]
    fn coset_program_is_the_selected_point_indicator() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        for trial in 0..50 {
            let t = crate::f2::sample_rank_constrained(4, 5, None, 4, &mut rng).unwrap();
            let sk = BitVector::random(4, &mut rng);
            let c = rng.gen::<bool>();
            let cipher = Arc::new(MockCipher {
                keys: vec![sk.clone()],
                messages: vec![BitVector::from_bools(&[c])],
            });
            let p = CosetPointProgram::new(t.clone(), cipher).unwrap();
            let (x0, x1) = coset_pair(&t, &sk).unwrap();
            let target = x_of((&x0, &x1), c);
            for v in 0u64..32 {
                let z = BitVector::from_index(5, v);
                assert_eq!(
                    p.eval(&z, &mut rng),
                    ProgramOutput::bit(z == target),
                    "trial {trial} disagrees at {z}"
                );
            }
        }
    }

    #[test]
    fn ggm_circuit_round_trips_and_rejects_malformed_blobs() {
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        let key = GgmKey::sample(8, 8, &mut rng);
        let enc = encode_ggm_circuit(&key);
        assert_eq!(enc.len(), 32 + 8);
        let dec = decode_ggm_circuit(&enc).unwrap();
        assert_eq!(dec.seed(), key.seed());
        assert_eq!(dec.input_len(), key.input_len());

        assert!(decode_ggm_circuit(&bv("101")).is_none());
        assert!(decode_ggm_circuit(&enc.slice(0..enc.len() - 1)).is_none());
        assert!(decode_ggm_circuit(&enc.concat(&bv("0"))).is_none());
        let mut zero_root = enc.clone();
        for i in 16..32 {
            zero_root.set(i, false);
        }
        assert!(decode_ggm_circuit(&zero_root.slice(0..32)).is_none());
    }

    #[test]
    fn punctured_ggm_refuses_exactly_at_the_holes() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let key = GgmKey::sample(6, 5, &mut rng);
        let holes = vec![bv("01101"), bv("11000")];
        let punctured = PuncturedGgmProgram::new(key.puncture(&holes), 6);
        let full = GgmProgram::new(key);
        for v in 0u64..32 {
            let x = BitVector::from_index(5, v);
            let got = punctured.eval(&x, &mut rng);
            if holes.contains(&x) {
                assert_eq!(got, ProgramOutput::Bottom);
            } else {
                assert_eq!(got, full.eval(&x, &mut rng));
            }
        }
    }

    proptest! {
        #[test]
        fn x_of_returns_the_member_with_the_selected_bit(
            seed in 0u64..1_000_000,
            c in proptest::bool::ANY,
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = BitVector::random(9, &mut rng);
            let mut b = a.clone();
            b.flip(rng.gen_range(0..9));
            if rng.gen::<bool>() {
                b = BitVector::random(9, &mut rng);
                prop_assume!(a != b);
            }
            let chosen = x_of((&a, &b), c);
            let i = a.first_diff(&b).unwrap();
            prop_assert!(chosen == a || chosen == b);
            prop_assert_eq!(chosen.get(i), c);
        }

        #[test]
        fn coset_pairs_are_ordered_distinct_preimages(seed in 0u64..1_000_000) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let t = crate::f2::sample_rank_constrained(5, 6, None, 5, &mut rng).unwrap();
            let z = BitVector::random(6, &mut rng);
            let w = t.matvec(&z);
            let (x0, x1) = coset_pair(&t, &w).unwrap();
            prop_assert_eq!(t.matvec(&x0), w.clone());
            prop_assert_eq!(t.matvec(&x1), w);
            prop_assert_eq!(x0.lex_cmp(&x1), std::cmp::Ordering::Less);
            prop_assert!(z == x0 || z == x1);
        }
    }
}
