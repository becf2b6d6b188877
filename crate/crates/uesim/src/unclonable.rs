//! Unclonable encryption schemes.
//!
//! All schemes share one shape: the key contains a basis selector θ and a
//! row-major extractor matrix; encryption conjugate-codes a fresh random
//! string x under θ and one-time-pads the message with a stream derived from
//! the extractor applied to x. The coupled scheme issues two keys whose
//! selectors are tied together by a public full-row-rank coupling matrix
//! annihilating their difference, so either receiver can recover the coding
//! basis while the basis itself pins down neither key. The candidate and
//! coupled schemes stretch the extracted bits through the PRG; the toy
//! variants use them directly as pads (fixed message length, adjustable
//! dimensions).
//!
//! The key-testing compiler wraps any scheme: it resamples an inner key as a
//! public random linear image of a longer outer key and ships an opaque
//! point indicator of the outer key, making "is this the key?" answerable
//! exactly without weakening the pad.

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use thiserror::Error;

use crate::bb84;
use crate::crypto::{lambda_prime, prg_stretch};
use crate::f2::{sample_rank_constrained, BitMatrix, BitVector, F2Error};
use crate::opaque::{wrap_program, OpaqueError, OpaqueProgram};
use crate::programs::{CipherOracle, PointProgram, ProgramOutput};
use crate::qsim::{QsimError, StateVector};

#[derive(Debug, Error)]
pub enum UnclonableError {
    #[error("security parameter {lambda} is too small to parse a key (needs a positive block size)")]
    LambdaTooSmall { lambda: usize },
    #[error("key has {got} bits but the scheme expects {want}")]
    KeyLength { got: usize, want: usize },
    #[error("message has {got} bits but this fixed-length scheme expects {want}")]
    MessageLength { got: usize, want: usize },
    #[error("ciphertext does not belong to scheme {scheme}")]
    ForeignCiphertext { scheme: &'static str },
    #[error("scheme {scheme} provides no key testing")]
    NoKeyTesting { scheme: &'static str },
    #[error(transparent)]
    Sampling(#[from] F2Error),
    #[error(transparent)]
    Opaque(#[from] OpaqueError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

// ---------------------------------------------------------------------------
// Ciphertexts.
// ---------------------------------------------------------------------------

/// Quantum part plus pad of a single-receiver conjugate-coded ciphertext.
#[derive(Debug)]
pub struct ConjugateUePayload {
    pub state: StateVector,
    pub pad: BitVector,
}

/// Single-receiver ciphertext.
#[derive(Debug)]
pub enum UeCiphertext {
    Conjugate(ConjugateUePayload),
    KeyTested(KeyTestedUePayload),
}

/// Compiled single-receiver ciphertext: public key-resampling matrix, inner
/// ciphertext, opaque indicator of the outer key.
#[derive(Debug)]
pub struct KeyTestedUePayload {
    pub binder: BitMatrix,
    pub inner: Box<UeCiphertext>,
    pub indicator: OpaqueProgram,
}

impl UeCiphertext {
    pub fn message_len(&self) -> usize {
        match self {
            UeCiphertext::Conjugate(p) => p.pad.len(),
            UeCiphertext::KeyTested(p) => p.inner.message_len(),
        }
    }

    /// Canonical byte serialization of the classical parts (pads and public
    /// matrices; quantum state and opaque handles excluded).
    pub fn classical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            UeCiphertext::Conjugate(p) => {
                out.push(0x01);
                out.extend_from_slice(&p.pad.to_bytes());
            }
            UeCiphertext::KeyTested(p) => {
                out.push(0x02);
                out.extend_from_slice(&p.binder.to_bytes());
                out.extend_from_slice(&p.inner.classical_bytes());
            }
        }
        out
    }
}

/// Quantum part, coupling matrix, and the two pads of a coupled ciphertext.
#[derive(Debug)]
pub struct ConjugateCuePayload {
    pub state: StateVector,
    pub coupling: BitMatrix,
    pub pad_a: BitVector,
    pub pad_b: BitVector,
}

/// Two-receiver ciphertext.
#[derive(Debug)]
pub enum CueCiphertext {
    Conjugate(ConjugateCuePayload),
    KeyTested(KeyTestedCuePayload),
}

/// Compiled two-receiver ciphertext.
#[derive(Debug)]
pub struct KeyTestedCuePayload {
    pub binder: BitMatrix,
    pub inner: Box<CueCiphertext>,
    pub indicator_a: OpaqueProgram,
    pub indicator_b: OpaqueProgram,
}

impl CueCiphertext {
    pub fn message_lens(&self) -> (usize, usize) {
        match self {
            CueCiphertext::Conjugate(p) => (p.pad_a.len(), p.pad_b.len()),
            CueCiphertext::KeyTested(p) => p.inner.message_lens(),
        }
    }

    pub fn classical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            CueCiphertext::Conjugate(p) => {
                out.push(0x03);
                out.extend_from_slice(&p.coupling.to_bytes());
                out.extend_from_slice(&p.pad_a.to_bytes());
                out.extend_from_slice(&p.pad_b.to_bytes());
            }
            CueCiphertext::KeyTested(p) => {
                out.push(0x04);
                out.extend_from_slice(&p.binder.to_bytes());
                out.extend_from_slice(&p.inner.classical_bytes());
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Scheme traits.
// ---------------------------------------------------------------------------

/// Single-receiver unclonable encryption.
pub trait UeScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Exact key length in bits.
    fn key_len(&self) -> usize;

    /// Fixed message length, when the scheme only supports one.
    fn message_len(&self) -> Option<usize> {
        None
    }

    fn encrypt(
        &self,
        sk: &BitVector,
        m: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<UeCiphertext, UnclonableError>;

    /// Decryption measures the held state in the key's basis and strips the
    /// pad; with the honest key this is deterministic and leaves the state
    /// unchanged.
    fn decrypt(
        &self,
        sk: &BitVector,
        ct: &mut UeCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError>;

    /// Exact key test: `Some(0)` iff the candidate is the encryption key.
    /// Only compiled schemes provide this.
    fn test_key(
        &self,
        _candidate: &BitVector,
        _ct: &UeCiphertext,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<usize>, UnclonableError> {
        Err(UnclonableError::NoKeyTesting { scheme: self.name() })
    }

    fn has_key_testing(&self) -> bool {
        false
    }
}

/// Two-receiver (coupled) unclonable encryption: one ciphertext, two keys,
/// slot 0 for the first message and slot 1 for the second.
pub trait CueScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn key_len(&self) -> usize;

    fn message_len(&self) -> Option<usize> {
        None
    }

    fn encrypt(
        &self,
        sk_a: &BitVector,
        sk_b: &BitVector,
        m_a: &BitVector,
        m_b: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<CueCiphertext, UnclonableError>;

    /// Decrypt `slot` (0 or 1) with `sk`; honest use pairs slot 0 with the
    /// first key and slot 1 with the second.
    fn decrypt(
        &self,
        slot: usize,
        sk: &BitVector,
        ct: &mut CueCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError>;

    /// Exact key test: `Some(0)` for the first key (checked first),
    /// `Some(1)` for the second, `None` otherwise.
    fn test_key(
        &self,
        _candidate: &BitVector,
        _ct: &CueCiphertext,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<usize>, UnclonableError> {
        Err(UnclonableError::NoKeyTesting { scheme: self.name() })
    }

    fn has_key_testing(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Shared key layout.
// ---------------------------------------------------------------------------

/// Keys parse as a basis selector followed by a row-major extractor matrix.
#[derive(Debug, Clone)]
struct ParsedKey {
    theta: BitVector,
    extractor: BitMatrix,
}

fn parse_key(sk: &BitVector, theta_len: usize, rows: usize, cols: usize) -> ParsedKey {
    let theta = sk.slice(0..theta_len);
    let mut extractor = BitMatrix::zeros(rows, cols);
    for r in 0..rows {
        let start = theta_len + r * cols;
        extractor.set_row(r, &sk.slice(start..start + cols));
    }
    ParsedKey { theta, extractor }
}

/// Pad stream: PRG-stretched when `expand`, the raw extracted bits otherwise.
fn pad_stream(seed: &BitVector, len: usize, expand: bool) -> BitVector {
    if expand {
        prg_stretch(seed, len)
    } else {
        assert_eq!(seed.len(), len, "direct pads need matching extractor rows");
        seed.clone()
    }
}

fn check_key_len(got: usize, want: usize) -> Result<(), UnclonableError> {
    if got != want {
        return Err(UnclonableError::KeyLength { got, want });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-receiver schemes.
// ---------------------------------------------------------------------------

/// The PRG-padded candidate scheme. A key of `lambda` bits parses into an
/// `11k`-bit basis selector and a `k x 11k` extractor, where `k` is the
/// largest block size with `11k^2 + 11k <= lambda`; leftover key bits are
/// ignored.
#[derive(Debug, Clone)]
pub struct CandidateUe {
    lambda: usize,
    block: usize,
}

impl CandidateUe {
    pub fn new(lambda: usize) -> Result<Self, UnclonableError> {
        let block = lambda_prime(lambda, false)
            .ok_or(UnclonableError::LambdaTooSmall { lambda })?;
        Ok(CandidateUe { lambda, block })
    }

    /// The parsed block size `k`.
    pub fn block(&self) -> usize {
        self.block
    }

    /// Number of coded qubits (`11k`).
    pub fn basis_len(&self) -> usize {
        11 * self.block
    }

    fn parse(&self, sk: &BitVector) -> ParsedKey {
        parse_key(sk, self.basis_len(), self.block, self.basis_len())
    }
}

impl UeScheme for CandidateUe {
    fn name(&self) -> &'static str {
        "candidate-ue"
    }

    fn key_len(&self) -> usize {
        self.lambda
    }

    fn encrypt(
        &self,
        sk: &BitVector,
        m: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<UeCiphertext, UnclonableError> {
        check_key_len(sk.len(), self.lambda)?;
        let key = self.parse(sk);
        let x = BitVector::random(self.basis_len(), rng);
        let state = bb84::encode(&x, &key.theta);
        let pad = m ^ &pad_stream(&key.extractor.matvec(&x), m.len(), true);
        Ok(UeCiphertext::Conjugate(ConjugateUePayload { state, pad }))
    }

    fn decrypt(
        &self,
        sk: &BitVector,
        ct: &mut UeCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        check_key_len(sk.len(), self.lambda)?;
        let payload = match ct {
            UeCiphertext::Conjugate(p) if p.state.num_qubits() == self.basis_len() => p,
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let key = self.parse(sk);
        let x = bb84::decode_all(&mut payload.state, &key.theta, rng);
        Ok(&payload.pad ^ &pad_stream(&key.extractor.matvec(&x), payload.pad.len(), true))
    }
}

/// Fixed-length variant with adjustable dimensions: the extracted bits pad
/// the message directly, no PRG.
#[derive(Debug, Clone)]
pub struct ToyUe {
    basis_len: usize,
    msg_len: usize,
}

impl ToyUe {
    pub fn new(basis_len: usize, msg_len: usize) -> Self {
        assert!(basis_len > 0, "coding register must be nonempty");
        ToyUe { basis_len, msg_len }
    }

    pub fn basis_len(&self) -> usize {
        self.basis_len
    }

    fn parse(&self, sk: &BitVector) -> ParsedKey {
        parse_key(sk, self.basis_len, self.msg_len, self.basis_len)
    }
}

impl UeScheme for ToyUe {
    fn name(&self) -> &'static str {
        "toy-ue"
    }

    fn key_len(&self) -> usize {
        self.basis_len * (1 + self.msg_len)
    }

    fn message_len(&self) -> Option<usize> {
        Some(self.msg_len)
    }

    fn encrypt(
        &self,
        sk: &BitVector,
        m: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<UeCiphertext, UnclonableError> {
        check_key_len(sk.len(), self.key_len())?;
        if m.len() != self.msg_len {
            return Err(UnclonableError::MessageLength { got: m.len(), want: self.msg_len });
        }
        let key = self.parse(sk);
        let x = BitVector::random(self.basis_len, rng);
        let state = bb84::encode(&x, &key.theta);
        let pad = m ^ &pad_stream(&key.extractor.matvec(&x), m.len(), false);
        Ok(UeCiphertext::Conjugate(ConjugateUePayload { state, pad }))
    }

    fn decrypt(
        &self,
        sk: &BitVector,
        ct: &mut UeCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        check_key_len(sk.len(), self.key_len())?;
        let payload = match ct {
            UeCiphertext::Conjugate(p)
                if p.state.num_qubits() == self.basis_len && p.pad.len() == self.msg_len =>
            {
                p
            }
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let key = self.parse(sk);
        let x = bb84::decode_all(&mut payload.state, &key.theta, rng);
        Ok(&payload.pad ^ &pad_stream(&key.extractor.matvec(&x), payload.pad.len(), false))
    }
}

// ---------------------------------------------------------------------------
// Two-receiver schemes.
// ---------------------------------------------------------------------------

/// The coupled scheme. Each key of `lambda` bits parses into an
/// `(11k+1)`-bit basis selector and a `k x 11k` extractor with `k` the
/// largest block size with `11k^2 + 11k + 1 <= lambda`. Encryption samples a
/// full-row-rank coupling matrix annihilating the selector difference, so
/// both selectors map to the same coding basis.
#[derive(Debug, Clone)]
pub struct ConstructionCue {
    lambda: usize,
    block: usize,
}

impl ConstructionCue {
    pub fn new(lambda: usize) -> Result<Self, UnclonableError> {
        let block = lambda_prime(lambda, true)
            .ok_or(UnclonableError::LambdaTooSmall { lambda })?;
        Ok(ConstructionCue { lambda, block })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn basis_len(&self) -> usize {
        11 * self.block
    }

    fn parse(&self, sk: &BitVector) -> ParsedKey {
        parse_key(sk, self.basis_len() + 1, self.block, self.basis_len())
    }
}

impl CueScheme for ConstructionCue {
    fn name(&self) -> &'static str {
        "construction-cue"
    }

    fn key_len(&self) -> usize {
        self.lambda
    }

    fn encrypt(
        &self,
        sk_a: &BitVector,
        sk_b: &BitVector,
        m_a: &BitVector,
        m_b: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<CueCiphertext, UnclonableError> {
        check_key_len(sk_a.len(), self.lambda)?;
        check_key_len(sk_b.len(), self.lambda)?;
        let ka = self.parse(sk_a);
        let kb = self.parse(sk_b);
        let n = self.basis_len();
        let diff = &ka.theta ^ &kb.theta;
        let coupling = sample_rank_constrained(n, n + 1, Some(&diff), n, rng)?;
        let theta = coupling.matvec(&ka.theta);
        let x = BitVector::random(n, rng);
        let state = bb84::encode(&x, &theta);
        let pad_a = m_a ^ &pad_stream(&ka.extractor.matvec(&x), m_a.len(), true);
        let pad_b = m_b ^ &pad_stream(&kb.extractor.matvec(&x), m_b.len(), true);
        Ok(CueCiphertext::Conjugate(ConjugateCuePayload { state, coupling, pad_a, pad_b }))
    }

    fn decrypt(
        &self,
        slot: usize,
        sk: &BitVector,
        ct: &mut CueCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        assert!(slot < 2, "two-receiver ciphertexts have slots 0 and 1");
        check_key_len(sk.len(), self.lambda)?;
        let n = self.basis_len();
        let payload = match ct {
            CueCiphertext::Conjugate(p)
                if p.state.num_qubits() == n && p.coupling.cols() == n + 1 =>
            {
                p
            }
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let key = self.parse(sk);
        let theta = payload.coupling.matvec(&key.theta);
        let x = bb84::decode_all(&mut payload.state, &theta, rng);
        let pad = if slot == 0 { &payload.pad_a } else { &payload.pad_b };
        Ok(pad ^ &pad_stream(&key.extractor.matvec(&x), pad.len(), true))
    }
}

/// Fixed-length coupled variant with adjustable dimensions and direct pads.
#[derive(Debug, Clone)]
pub struct ToyCue {
    basis_len: usize,
    msg_len: usize,
}

impl ToyCue {
    pub fn new(basis_len: usize, msg_len: usize) -> Self {
        assert!(basis_len > 0, "coding register must be nonempty");
        ToyCue { basis_len, msg_len }
    }

    fn parse(&self, sk: &BitVector) -> ParsedKey {
        parse_key(sk, self.basis_len + 1, self.msg_len, self.basis_len)
    }
}

impl CueScheme for ToyCue {
    fn name(&self) -> &'static str {
        "toy-cue"
    }

    fn key_len(&self) -> usize {
        (self.basis_len + 1) + self.msg_len * self.basis_len
    }

    fn message_len(&self) -> Option<usize> {
        Some(self.msg_len)
    }

    fn encrypt(
        &self,
        sk_a: &BitVector,
        sk_b: &BitVector,
        m_a: &BitVector,
        m_b: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<CueCiphertext, UnclonableError> {
        check_key_len(sk_a.len(), self.key_len())?;
        check_key_len(sk_b.len(), self.key_len())?;
        for m in [m_a, m_b] {
            if m.len() != self.msg_len {
                return Err(UnclonableError::MessageLength { got: m.len(), want: self.msg_len });
            }
        }
        let ka = self.parse(sk_a);
        let kb = self.parse(sk_b);
        let n = self.basis_len;
        let diff = &ka.theta ^ &kb.theta;
        let coupling = sample_rank_constrained(n, n + 1, Some(&diff), n, rng)?;
        let theta = coupling.matvec(&ka.theta);
        let x = BitVector::random(n, rng);
        let state = bb84::encode(&x, &theta);
        let pad_a = m_a ^ &pad_stream(&ka.extractor.matvec(&x), m_a.len(), false);
        let pad_b = m_b ^ &pad_stream(&kb.extractor.matvec(&x), m_b.len(), false);
        Ok(CueCiphertext::Conjugate(ConjugateCuePayload { state, coupling, pad_a, pad_b }))
    }

    fn decrypt(
        &self,
        slot: usize,
        sk: &BitVector,
        ct: &mut CueCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        assert!(slot < 2, "two-receiver ciphertexts have slots 0 and 1");
        check_key_len(sk.len(), self.key_len())?;
        let n = self.basis_len;
        let payload = match ct {
            CueCiphertext::Conjugate(p)
                if p.state.num_qubits() == n && p.coupling.cols() == n + 1 =>
            {
                p
            }
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let key = self.parse(sk);
        let theta = payload.coupling.matvec(&key.theta);
        let x = bb84::decode_all(&mut payload.state, &theta, rng);
        let pad = if slot == 0 { &payload.pad_a } else { &payload.pad_b };
        Ok(pad ^ &pad_stream(&key.extractor.matvec(&x), pad.len(), false))
    }
}

// ---------------------------------------------------------------------------
// Key-testing compilers.
// ---------------------------------------------------------------------------

/// Compiler adding exact key testing to any single-receiver scheme. The
/// outer key is longer (3x the inner key length by default); each encryption
/// samples a fresh public matrix mapping outer to inner keys and ships an
/// opaque point indicator of the outer key.
pub struct KeyTestedUe {
    inner: Arc<dyn UeScheme>,
    outer_key_len: usize,
}

impl KeyTestedUe {
    pub fn new(inner: Arc<dyn UeScheme>) -> Self {
        let outer_key_len = 3 * inner.key_len();
        KeyTestedUe { inner, outer_key_len }
    }

    pub fn with_key_len(inner: Arc<dyn UeScheme>, outer_key_len: usize) -> Self {
        assert!(outer_key_len > 0, "outer keys must be nonempty");
        KeyTestedUe { inner, outer_key_len }
    }

    pub fn inner(&self) -> &Arc<dyn UeScheme> {
        &self.inner
    }
}

impl UeScheme for KeyTestedUe {
    fn name(&self) -> &'static str {
        "key-tested-ue"
    }

    fn key_len(&self) -> usize {
        self.outer_key_len
    }

    fn message_len(&self) -> Option<usize> {
        self.inner.message_len()
    }

    fn encrypt(
        &self,
        sk: &BitVector,
        m: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<UeCiphertext, UnclonableError> {
        check_key_len(sk.len(), self.outer_key_len)?;
        let binder = BitMatrix::random(self.inner.key_len(), self.outer_key_len, rng);
        let inner_sk = binder.matvec(sk);
        let inner_ct = self.inner.encrypt(&inner_sk, m, rng)?;
        let indicator = wrap_program(Arc::new(PointProgram::new(sk.clone())));
        Ok(UeCiphertext::KeyTested(KeyTestedUePayload {
            binder,
            inner: Box::new(inner_ct),
            indicator,
        }))
    }

    fn decrypt(
        &self,
        sk: &BitVector,
        ct: &mut UeCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        check_key_len(sk.len(), self.outer_key_len)?;
        let payload = match ct {
            UeCiphertext::KeyTested(p) if p.binder.cols() == self.outer_key_len => p,
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let inner_sk = payload.binder.matvec(sk);
        self.inner.decrypt(&inner_sk, &mut payload.inner, rng)
    }

    fn test_key(
        &self,
        candidate: &BitVector,
        ct: &UeCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<Option<usize>, UnclonableError> {
        check_key_len(candidate.len(), self.outer_key_len)?;
        let payload = match ct {
            UeCiphertext::KeyTested(p) => p,
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        match payload.indicator.evaluate(candidate, rng)? {
            ProgramOutput::Bits(b) if b.get(0) => Ok(Some(0)),
            _ => Ok(None),
        }
    }

    fn has_key_testing(&self) -> bool {
        true
    }
}

/// Compiler adding exact key testing to any two-receiver scheme: one shared
/// resampling matrix, one opaque indicator per key, first key checked first.
pub struct KeyTestedCue {
    inner: Arc<dyn CueScheme>,
    outer_key_len: usize,
}

impl KeyTestedCue {
    pub fn new(inner: Arc<dyn CueScheme>) -> Self {
        let outer_key_len = 3 * inner.key_len();
        KeyTestedCue { inner, outer_key_len }
    }

    pub fn with_key_len(inner: Arc<dyn CueScheme>, outer_key_len: usize) -> Self {
        assert!(outer_key_len > 0, "outer keys must be nonempty");
        KeyTestedCue { inner, outer_key_len }
    }

    pub fn inner(&self) -> &Arc<dyn CueScheme> {
        &self.inner
    }
}

impl CueScheme for KeyTestedCue {
    fn name(&self) -> &'static str {
        "key-tested-cue"
    }

    fn key_len(&self) -> usize {
        self.outer_key_len
    }

    fn message_len(&self) -> Option<usize> {
        self.inner.message_len()
    }

    fn encrypt(
        &self,
        sk_a: &BitVector,
        sk_b: &BitVector,
        m_a: &BitVector,
        m_b: &BitVector,
        rng: &mut dyn RngCore,
    ) -> Result<CueCiphertext, UnclonableError> {
        check_key_len(sk_a.len(), self.outer_key_len)?;
        check_key_len(sk_b.len(), self.outer_key_len)?;
        let binder = BitMatrix::random(self.inner.key_len(), self.outer_key_len, rng);
        let inner_a = binder.matvec(sk_a);
        let inner_b = binder.matvec(sk_b);
        let inner_ct = self.inner.encrypt(&inner_a, &inner_b, m_a, m_b, rng)?;
        let indicator_a = wrap_program(Arc::new(PointProgram::new(sk_a.clone())));
        let indicator_b = wrap_program(Arc::new(PointProgram::new(sk_b.clone())));
        Ok(CueCiphertext::KeyTested(KeyTestedCuePayload {
            binder,
            inner: Box::new(inner_ct),
            indicator_a,
            indicator_b,
        }))
    }

    fn decrypt(
        &self,
        slot: usize,
        sk: &BitVector,
        ct: &mut CueCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, UnclonableError> {
        check_key_len(sk.len(), self.outer_key_len)?;
        let payload = match ct {
            CueCiphertext::KeyTested(p) if p.binder.cols() == self.outer_key_len => p,
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        let inner_sk = payload.binder.matvec(sk);
        self.inner.decrypt(slot, &inner_sk, &mut payload.inner, rng)
    }

    fn test_key(
        &self,
        candidate: &BitVector,
        ct: &CueCiphertext,
        rng: &mut dyn RngCore,
    ) -> Result<Option<usize>, UnclonableError> {
        check_key_len(candidate.len(), self.outer_key_len)?;
        let payload = match ct {
            CueCiphertext::KeyTested(p) => p,
            _ => return Err(UnclonableError::ForeignCiphertext { scheme: self.name() }),
        };
        for (slot, indicator) in [&payload.indicator_a, &payload.indicator_b].iter().enumerate() {
            if let ProgramOutput::Bits(b) = indicator.evaluate(candidate, rng)? {
                if b.get(0) {
                    return Ok(Some(slot));
                }
            }
        }
        Ok(None)
    }

    fn has_key_testing(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Cipher oracle adapters.
// ---------------------------------------------------------------------------

/// A key-tested single-receiver ciphertext bundled with its scheme, exposed
/// through the [`CipherOracle`] interface the patched programs consume.
pub struct UeCipherOracle {
    scheme: Arc<dyn UeScheme>,
    msg_len: usize,
    ct: Mutex<UeCiphertext>,
}

impl UeCipherOracle {
    pub fn new(scheme: Arc<dyn UeScheme>, ct: UeCiphertext) -> Self {
        assert!(scheme.has_key_testing(), "cipher oracles need a key-tested scheme");
        let msg_len = ct.message_len();
        UeCipherOracle { scheme, msg_len, ct: Mutex::new(ct) }
    }
}

impl CipherOracle for UeCipherOracle {
    fn key_len(&self) -> usize {
        self.scheme.key_len()
    }

    fn slots(&self) -> usize {
        1
    }

    fn test(&self, candidate: &BitVector, rng: &mut dyn RngCore) -> Option<usize> {
        let ct = self.ct.lock().expect("cipher oracle lock");
        self.scheme
            .test_key(candidate, &ct, rng)
            .expect("key-tested scheme answers tests")
    }

    fn message_len(&self, slot: usize) -> usize {
        assert_eq!(slot, 0);
        self.msg_len
    }

    fn decrypt(&self, slot: usize, key: &BitVector, rng: &mut dyn RngCore) -> BitVector {
        assert_eq!(slot, 0);
        let mut ct = self.ct.lock().expect("cipher oracle lock");
        self.scheme
            .decrypt(key, &mut ct, rng)
            .expect("tested keys decrypt")
    }
}

/// Two-receiver analogue of [`UeCipherOracle`].
pub struct CueCipherOracle {
    scheme: Arc<dyn CueScheme>,
    msg_lens: (usize, usize),
    ct: Mutex<CueCiphertext>,
}

impl CueCipherOracle {
    pub fn new(scheme: Arc<dyn CueScheme>, ct: CueCiphertext) -> Self {
        assert!(scheme.has_key_testing(), "cipher oracles need a key-tested scheme");
        let msg_lens = ct.message_lens();
        CueCipherOracle { scheme, msg_lens, ct: Mutex::new(ct) }
    }
}

impl CipherOracle for CueCipherOracle {
    fn key_len(&self) -> usize {
        self.scheme.key_len()
    }

    fn slots(&self) -> usize {
        2
    }

    fn test(&self, candidate: &BitVector, rng: &mut dyn RngCore) -> Option<usize> {
        let ct = self.ct.lock().expect("cipher oracle lock");
        self.scheme
            .test_key(candidate, &ct, rng)
            .expect("key-tested scheme answers tests")
    }

    fn message_len(&self, slot: usize) -> usize {
        match slot {
            0 => self.msg_lens.0,
            1 => self.msg_lens.1,
            _ => panic!("two-receiver ciphertexts have slots 0 and 1"),
        }
    }

    fn decrypt(&self, slot: usize, key: &BitVector, rng: &mut dyn RngCore) -> BitVector {
        let mut ct = self.ct.lock().expect("cipher oracle lock");
        self.scheme
            .decrypt(slot, key, &mut ct, rng)
            .expect("tested keys decrypt")
    }
}

// ---------------------------------------------------------------------------
// Raw randomness-splitting samples.
// ---------------------------------------------------------------------------

/// One sample of the raw unclonable-randomness resource: a conjugate-coded
/// string of width `10n + lambda` with two independent `n`-row extractors
/// and their extracted values.
#[derive(Debug)]
pub struct RandomnessBundle {
    pub state: StateVector,
    pub x: BitVector,
    pub theta: BitVector,
    pub u_mat: BitMatrix,
    pub v_mat: BitMatrix,
    pub r1: BitVector,
    pub s1: BitVector,
}

pub fn unclonable_randomness_sample(
    n: usize,
    lambda: usize,
    rng: &mut dyn RngCore,
) -> RandomnessBundle {
    let width = 10 * n + lambda;
    let x = BitVector::random(width, rng);
    let theta = BitVector::random(width, rng);
    let u_mat = BitMatrix::random(n, width, rng);
    let v_mat = BitMatrix::random(n, width, rng);
    let r1 = u_mat.matvec(&x);
    let s1 = v_mat.matvec(&x);
    let state = bb84::encode(&x, &theta);
    RandomnessBundle { state, x, theta, u_mat, v_mat, r1, s1 }
}

impl fmt::Debug for KeyTestedUe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyTestedUe")
            .field("inner", &self.inner.name())
            .field("outer_key_len", &self.outer_key_len)
            .finish()
    }
}

impl fmt::Debug for KeyTestedCue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyTestedCue")
            .field("inner", &self.inner.name())
            .field("outer_key_len", &self.outer_key_len)
            .finish()
    }
}
