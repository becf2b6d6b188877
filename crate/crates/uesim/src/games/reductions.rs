//! Security reductions, executable as wrapper adversaries. Each wrapper
//! plays some outer experiment while internally presenting a fabricated but
//! correctly distributed view of a different (or re-parameterized) inner
//! experiment to the strategy it wraps, translating challenges on the way
//! in and answers on the way out. The fabrication arguments the proofs rest
//! on (guessed extractions, spliced extractor rows, coupled key pairs,
//! patched programs) are thereby executable, and the harness tallies the
//! conditioning events they introduce.

use std::any::Any;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use crate::crypto::{prg_stretch, GgmKey};
use crate::f2::{sample_rank_constrained, BitMatrix, BitVector};
use crate::gl::{BinaryMeasurement, MeasurementFamily};
use crate::opaque::{full_domain, functional_equiv_witness, wrap_program};
use crate::programs::{
    coset_pair, encode_ggm_circuit, x_of, CircuitPatchedProgram, CosetPointProgram, GgmProgram,
    IndirectPatchedProgram, PatchedProgram, Program,
};
use crate::qsim::StateVector;
use crate::unclonable::{
    ConjugateCuePayload, ConstructionCue, CueCiphertext, CueCipherOracle, CueScheme, KeyTestedCue,
    UeCipherOracle,
};

use super::{
    bipartite_measure, build_context, cue_scheme, stream_rng, ue_scheme, violation, Adversary,
    Challenge, Challenger, ChosenMessages, Disposition, GameConfig, GameError, GameId, GameParams,
    GameResult, PartyView, PublicInputs, Received, Tau, TrialOutcome,
};

// ---------------------------------------------------------------------------
// Shared plumbing.
// ---------------------------------------------------------------------------

/// Public view handed to a wrapped inner adversary, with answer widths
/// matching its fabricated game.
fn fabricated_public(game: GameId, params: GameParams, trial: u64) -> PublicInputs {
    let (answer_len_a, answer_len_b) = match game {
        GameId::Search => {
            let w = 10 * params.n + params.lambda;
            (w, w)
        }
        GameId::CpSearch => (params.prf_output_len, params.prf_output_len),
        _ => (1, 1),
    };
    PublicInputs {
        game,
        params,
        trial,
        answer_len_a,
        answer_len_b,
        chosen: ChosenMessages::default(),
    }
}

/// Run `f` against the same physical side, relabeled with the inner game's
/// public view and the inner strategy's own scratch.
fn with_inner_view<T>(
    view: &mut PartyView<'_>,
    inner_pv: &PublicInputs,
    inner_scratch: &(dyn Any + Send + Sync),
    f: impl FnOnce(&mut PartyView<'_>) -> T,
) -> T {
    let owned = std::mem::take(&mut view.owned);
    let mut inner_view = PartyView {
        pv: inner_pv,
        scratch: inner_scratch,
        note: view.note,
        programs: view.programs,
        state: &mut *view.state,
        owned,
    };
    let out = f(&mut inner_view);
    view.owned = std::mem::take(&mut inner_view.owned);
    out
}

fn flatten_rows(m: &BitMatrix) -> BitVector {
    let mut out = BitVector::zeros(0);
    for r in 0..m.rows() {
        out = out.concat(&m.row(r));
    }
    out
}

fn small_index(rng: &mut dyn RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    (rng.next_u64() % n as u64) as usize
}

// ---------------------------------------------------------------------------
// Guessed-extraction reduction: seeded recovery from unseeded recovery.
// ---------------------------------------------------------------------------

struct SearchGuessScratch {
    inner_pv: PublicInputs,
    inner_scratch: Box<dyn Any + Send + Sync>,
    u: BitMatrix,
    v: BitMatrix,
}

struct SearchGuessReduction {
    inner: Arc<dyn Adversary>,
    inner_n: usize,
    inner_lambda: usize,
}

/// Plays the unseeded recovery game at width `10n + lambda` by showing the
/// wrapped strategy a seeded instance with guessed masked strings; the
/// extractors are only sampled after the split, and the challenger's audit
/// hook scores how often the guesses were right.
pub fn reduction_search_guess(
    inner: Arc<dyn Adversary>,
    inner_n: usize,
    inner_lambda: usize,
) -> Arc<dyn Adversary> {
    Arc::new(SearchGuessReduction { inner, inner_n, inner_lambda })
}

impl Adversary for SearchGuessReduction {
    fn name(&self) -> String {
        format!("search-guess[{}]", self.inner.name())
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let w = 10 * self.inner_n + self.inner_lambda;
        if pv.game != GameId::Search || pv.params.n != 0 || pv.params.lambda != w {
            return Err(violation("outer game must be unseeded recovery at the inner width"));
        }
        let Received::Wiretap { state, .. } = received else {
            return Err(violation("expected a coded seed"));
        };
        let r = BitVector::random(self.inner_n, rng);
        let s = BitVector::random(self.inner_n, rng);

        let mut inner_params = GameParams::default();
        inner_params.n = self.inner_n;
        inner_params.lambda = self.inner_lambda;
        let inner_pv = fabricated_public(GameId::Search, inner_params, pv.trial);
        let fabricated =
            Received::Wiretap { state, first: r.clone(), second: s.clone() };
        let mut d = self.inner.phase1(&inner_pv, fabricated, Box::new(()), rng)?;

        // Extractors are drawn only now, after the adversary committed.
        let u = BitMatrix::random(self.inner_n, w, rng);
        let v = BitMatrix::random(self.inner_n, w, rng);
        d.audit.push(("guess_r".to_string(), r));
        d.audit.push(("guess_s".to_string(), s));
        d.audit.push(("guess_u".to_string(), flatten_rows(&u)));
        d.audit.push(("guess_v".to_string(), flatten_rows(&v)));
        let inner_scratch = std::mem::replace(&mut d.scratch, Box::new(()));
        d.scratch = Box::new(SearchGuessScratch { inner_pv, inner_scratch, u, v });
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<SearchGuessScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, .. } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge =
            Challenge::BasisKey { theta: theta.clone(), extractor: red.u.clone() };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_a(&inner_challenge, v, rng)
        })
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<SearchGuessScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, .. } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge =
            Challenge::BasisKey { theta: theta.clone(), extractor: red.v.clone() };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_b(&inner_challenge, v, rng)
        })
    }
}

// ---------------------------------------------------------------------------
// Index-averaged extraction: seed recovery from masked-string prediction.
// ---------------------------------------------------------------------------

/// A distinguisher for one party of the paired one-time-pad experiment,
/// expressed as the binary measurement it would apply for any given basis
/// string and extractor.
pub trait KeyedBinaryFamily: Send + Sync {
    fn register_qubits(&self) -> usize;
    fn measurement(&self, theta: &BitVector, extractor: &BitMatrix) -> BinaryMeasurement;
}

/// The full first stage of a masked-string predictor: the bipartite state
/// it prepared, which qubits belong to each party, and each party's keyed
/// measurement family.
pub struct PredictorSetup {
    pub state: StateVector,
    pub register_a: Vec<usize>,
    pub register_b: Vec<usize>,
    pub side_a: Arc<dyn KeyedBinaryFamily>,
    pub side_b: Arc<dyn KeyedBinaryFamily>,
}

/// Strategy interface for the prediction experiment when it is driven by
/// the extraction wrapper rather than the plain harness.
pub trait RandPredictor: Send + Sync {
    fn name(&self) -> String;
    fn prepare(
        &self,
        pv: &PublicInputs,
        received: Received,
        rng: &mut dyn RngCore,
    ) -> Result<PredictorSetup, GameError>;
}

/// Replace one extractor row (1-indexed) with the index vector and every
/// later row with fresh material, keeping earlier rows.
pub fn splice_rows(base: &BitMatrix, row: usize, mid: &BitVector, tail: &BitMatrix) -> BitMatrix {
    assert!(row >= 1 && row <= base.rows(), "spliced row must be within the matrix");
    assert_eq!(mid.len(), base.cols(), "spliced row must span the full width");
    assert_eq!(tail.rows(), base.rows(), "tail must have matching shape");
    assert_eq!(tail.cols(), base.cols(), "tail must have matching shape");
    let rows: Vec<BitVector> = (0..base.rows())
        .map(|r| {
            if r < row - 1 {
                base.row(r)
            } else if r == row - 1 {
                mid.clone()
            } else {
                tail.row(r)
            }
        })
        .collect();
    BitMatrix::from_rows(base.cols(), &rows)
}

struct SplicedFamily {
    keyed: Arc<dyn KeyedBinaryFamily>,
    theta: BitVector,
    base: BitMatrix,
    row: usize,
    tail: BitMatrix,
}

impl MeasurementFamily for SplicedFamily {
    fn index_len(&self) -> usize {
        self.base.cols()
    }

    fn register_qubits(&self) -> usize {
        self.keyed.register_qubits()
    }

    fn realize(&self, u: &BitVector) -> BinaryMeasurement {
        self.keyed.measurement(&self.theta, &splice_rows(&self.base, self.row, u, &self.tail))
    }
}

struct RandToSearchScratch {
    side_a: Arc<dyn KeyedBinaryFamily>,
    side_b: Arc<dyn KeyedBinaryFamily>,
    i: usize,
    j: usize,
    tilde_u: BitMatrix,
    tilde_v: BitMatrix,
}

struct RandToSearchReduction {
    predictor: Arc<dyn RandPredictor>,
    n: usize,
}

/// Plays the seeded recovery game by handing the wrapped predictor its own
/// masked strings as "extractions", then recovering the seed from each
/// party's decision measurement with the index-averaged extraction circuit
/// over a spliced extractor row.
pub fn reduction_rand_to_search(
    predictor: Arc<dyn RandPredictor>,
    n: usize,
) -> Arc<dyn Adversary> {
    assert!(n > 0, "the extraction wrapper needs at least one extractor row");
    Arc::new(RandToSearchReduction { predictor, n })
}

impl Adversary for RandToSearchReduction {
    fn name(&self) -> String {
        format!("rand-to-search[{}]", self.predictor.name())
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        if pv.game != GameId::Search || pv.params.n != self.n {
            return Err(violation("outer game must be seeded recovery with matching rows"));
        }
        let w = 10 * pv.params.n + pv.params.lambda;
        let setup = self.predictor.prepare(pv, received, rng)?;
        if setup.register_a.len() != setup.side_a.register_qubits()
            || setup.register_b.len() != setup.side_b.register_qubits()
        {
            return Err(violation("predictor register does not match its family"));
        }
        let i = 1 + small_index(rng, self.n);
        let j = 1 + small_index(rng, self.n);
        let tilde_u = BitMatrix::random(self.n, w, rng);
        let tilde_v = BitMatrix::random(self.n, w, rng);
        Ok(Disposition {
            state: setup.state,
            a_qubits: setup.register_a,
            b_qubits: setup.register_b,
            scratch: Box::new(RandToSearchScratch {
                side_a: setup.side_a,
                side_b: setup.side_b,
                i,
                j,
                tilde_u,
                tilde_v,
            }),
            ..Disposition::default()
        })
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<RandToSearchScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, extractor } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let family = SplicedFamily {
            keyed: red.side_a.clone(),
            theta: theta.clone(),
            base: extractor.clone(),
            row: red.i,
            tail: red.tilde_u.clone(),
        };
        view.gl_extract(&family, rng)
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<RandToSearchScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, extractor } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let family = SplicedFamily {
            keyed: red.side_b.clone(),
            theta: theta.clone(),
            base: extractor.clone(),
            row: red.j,
            tail: red.tilde_v.clone(),
        };
        view.gl_extract(&family, rng)
    }
}

// ---------------------------------------------------------------------------
// Coupled-encryption reduction onto the paired one-time-pad experiment.
// ---------------------------------------------------------------------------

/// The two keys fabricated from a coupling matrix and the revealed basis
/// string: the coset pair of the basis string under the coupling, assigned
/// by the branch coin, each followed by that party's extractor row. Both
/// selectors map to the same coding basis by construction.
pub fn coupled_key_pair(
    coupling: &BitMatrix,
    theta: &BitVector,
    u_row: &BitVector,
    v_row: &BitVector,
    d: bool,
) -> Result<(BitVector, BitVector), GameError> {
    let pair = coset_pair(coupling, theta)?;
    let theta_a = x_of((&pair.0, &pair.1), d);
    let theta_b = x_of((&pair.0, &pair.1), !d);
    Ok((theta_a.concat(u_row), theta_b.concat(v_row)))
}

struct CueToRandScratch {
    inner_pv: PublicInputs,
    inner_scratch: Box<dyn Any + Send + Sync>,
    coupling: BitMatrix,
    d: bool,
}

struct CueToRandReduction {
    inner: Arc<dyn Adversary>,
    msg_len: usize,
    msg_len_b: usize,
}

/// Plays the paired one-time-pad experiment at one extractor row and unit
/// seed budget (an 11-qubit code) by dressing the coded seed up as a
/// coupled ciphertext for the wrapped strategy: a fresh full-rank coupling,
/// pads derived from the two masked strings, and keys fabricated at measure
/// time from the coset pair of the revealed basis string.
pub fn reduction_cue_to_rand(
    inner: Arc<dyn Adversary>,
    msg_len: usize,
    msg_len_b: usize,
) -> Arc<dyn Adversary> {
    Arc::new(CueToRandReduction { inner, msg_len, msg_len_b })
}

impl CueToRandReduction {
    /// The wrapped strategy sees the smallest coupled construction.
    fn inner_params(&self) -> GameParams {
        let mut p = GameParams::default();
        p.lambda = 23;
        p.msg_len = self.msg_len;
        p.msg_len_b = self.msg_len_b;
        p.cue_scheme = "construction".to_string();
        p
    }
}

impl Adversary for CueToRandReduction {
    fn name(&self) -> String {
        format!("cue-to-rand[{}]", self.inner.name())
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        if pv.game != GameId::Rand || pv.params.n != 1 || pv.params.lambda != 1 {
            return Err(violation("outer game must be the paired experiment at n=1, lambda=1"));
        }
        let Received::Wiretap { state, first, second } = received else {
            return Err(violation("expected a coded seed"));
        };
        let basis_len = state.num_qubits();

        let mut inner_pv = fabricated_public(GameId::Cue, self.inner_params(), pv.trial);
        let (chosen, tau) = self.inner.choose_messages(&inner_pv, rng);
        let (Some(m_a), Some(m_b)) = (chosen.m_a.clone(), chosen.m_b.clone()) else {
            return Err(violation("wrapped strategy chose no messages"));
        };
        if m_a.len() != self.msg_len || m_b.len() != self.msg_len_b {
            return Err(violation("wrapped strategy chose wrong message lengths"));
        }
        inner_pv.chosen = chosen;

        let coupling = sample_rank_constrained(basis_len, basis_len + 1, None, basis_len, rng)?;
        let pad_a = &m_a ^ &prg_stretch(&first, m_a.len());
        let pad_b = &m_b ^ &prg_stretch(&second, m_b.len());
        let ct = CueCiphertext::Conjugate(ConjugateCuePayload {
            state,
            coupling: coupling.clone(),
            pad_a,
            pad_b,
        });
        let mut d = self.inner.phase1(&inner_pv, Received::Cue { ct }, tau, rng)?;
        let d_coin = rng.next_u32() & 1 == 1;
        let inner_scratch = std::mem::replace(&mut d.scratch, Box::new(()));
        d.scratch =
            Box::new(CueToRandScratch { inner_pv, inner_scratch, coupling, d: d_coin });
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<CueToRandScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, extractor } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let (sk_a, _) =
            coupled_key_pair(&red.coupling, theta, &extractor.row(0), &extractor.row(0), red.d)?;
        let inner_challenge = Challenge::Key { sk: sk_a };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_a(&inner_challenge, v, rng)
        })
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<CueToRandScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::BasisKey { theta, extractor } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let (_, sk_b) =
            coupled_key_pair(&red.coupling, theta, &extractor.row(0), &extractor.row(0), red.d)?;
        let inner_challenge = Challenge::Key { sk: sk_b };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_b(&inner_challenge, v, rng)
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation copy-protection reduction onto single-receiver encryption.
// ---------------------------------------------------------------------------

struct SearchCpScratch {
    inner_pv: PublicInputs,
    inner_scratch: Box<dyn Any + Send + Sync>,
    f: GgmKey,
    fallback_coin: bool,
}

struct SearchCpReduction {
    inner: Arc<dyn Adversary>,
    prf_output_len: usize,
}

/// Plays the single-receiver game with message `0^lambda || <f>` and shows
/// the wrapped strategy the wrapped key-patched program: on the key it
/// decrypts, demands the zero tag, and runs the encoded circuit; elsewhere
/// it evaluates `f`. Answers are verified against `f` at the revealed key.
pub fn reduction_search_cp(
    inner: Arc<dyn Adversary>,
    prf_output_len: usize,
) -> Arc<dyn Adversary> {
    Arc::new(SearchCpReduction { inner, prf_output_len })
}

impl Adversary for SearchCpReduction {
    fn name(&self) -> String {
        format!("search-cp[{}]", self.inner.name())
    }

    fn choose_messages(
        &self,
        pv: &PublicInputs,
        rng: &mut dyn RngCore,
    ) -> (ChosenMessages, Tau) {
        let f = GgmKey::sample(self.prf_output_len, pv.params.lambda, rng);
        let m = BitVector::zeros(pv.params.lambda).concat(&encode_ggm_circuit(&f));
        (ChosenMessages { m_a: Some(m), m_b: None }, Box::new(f))
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        if pv.game != GameId::Ue {
            return Err(violation("outer game must be single-receiver encryption"));
        }
        let Received::Ue { ct } = received else {
            return Err(violation("expected a single-receiver ciphertext"));
        };
        let f = *tau.downcast::<GgmKey>().map_err(|_| violation("lost carried state"))?;
        let scheme = ue_scheme(&pv.params)?;
        if !scheme.has_key_testing() {
            return Err(violation("the patched program needs a key-tested scheme"));
        }
        let oracle = Arc::new(UeCipherOracle::new(scheme, ct));
        let program =
            CircuitPatchedProgram::new(Arc::new(GgmProgram::new(f.clone())), oracle);
        let sigma = wrap_program(Arc::new(program));

        let mut inner_params = GameParams::default();
        inner_params.prf_input_len = pv.params.lambda;
        inner_params.prf_output_len = self.prf_output_len;
        let inner_pv = fabricated_public(GameId::CpSearch, inner_params, pv.trial);
        let mut d = self.inner.phase1(&inner_pv, Received::Cp { sigma }, Box::new(()), rng)?;
        let fallback_coin = rng.next_u32() & 1 == 1;
        let inner_scratch = std::mem::replace(&mut d.scratch, Box::new(()));
        d.scratch = Box::new(SearchCpScratch { inner_pv, inner_scratch, f, fallback_coin });
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<SearchCpScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge = Challenge::Input { x: sk.clone() };
        let y = with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_a(&inner_challenge, v, rng)
        })?;
        let verified = red.f.eval(sk) == y;
        Ok(BitVector::from_bools(&[if verified { true } else { red.fallback_coin }]))
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<SearchCpScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge = Challenge::Input { x: sk.clone() };
        let y = with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_b(&inner_challenge, v, rng)
        })?;
        let verified = red.f.eval(sk) == y;
        Ok(BitVector::from_bools(&[if verified { true } else { red.fallback_coin }]))
    }
}

// ---------------------------------------------------------------------------
// Point-function reduction onto single-receiver encryption of one bit.
// ---------------------------------------------------------------------------

struct PtfuncScratch {
    inner_pv: PublicInputs,
    inner_scratch: Box<dyn Any + Send + Sync>,
    coupling: BitMatrix,
}

struct PtfuncReduction {
    inner: Arc<dyn Adversary>,
}

/// Plays the single-receiver game with the fixed message `1` and shows the
/// wrapped strategy the wrapped coset point program over a fresh coupling:
/// a point function at one of the two preimages of the key, selected by the
/// encrypted bit. Challenge points are that coset pair, and answers map
/// back through the pair's first differing bit.
pub fn reduction_ptfunc(inner: Arc<dyn Adversary>) -> Arc<dyn Adversary> {
    Arc::new(PtfuncReduction { inner })
}

/// Which outer branch an inner point index names: the value of the chosen
/// coset element at the pair's first differing bit.
fn branch_of_pair(pair: &(BitVector, BitVector), index: bool) -> bool {
    let i = pair.0.first_diff(&pair.1).expect("coset elements are distinct");
    if index {
        pair.1.get(i)
    } else {
        pair.0.get(i)
    }
}

impl Adversary for PtfuncReduction {
    fn name(&self) -> String {
        format!("ptfunc[{}]", self.inner.name())
    }

    fn choose_messages(
        &self,
        _pv: &PublicInputs,
        _rng: &mut dyn RngCore,
    ) -> (ChosenMessages, Tau) {
        (ChosenMessages { m_a: Some(BitVector::from_bools(&[true])), m_b: None }, Box::new(()))
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        if pv.game != GameId::Ue || pv.params.msg_len != 1 {
            return Err(violation("outer game must encrypt a single bit"));
        }
        let Received::Ue { ct } = received else {
            return Err(violation("expected a single-receiver ciphertext"));
        };
        let lambda = pv.params.lambda;
        let scheme = ue_scheme(&pv.params)?;
        if !scheme.has_key_testing() {
            return Err(violation("the coset program needs a key-tested scheme"));
        }
        let coupling = sample_rank_constrained(lambda, lambda + 1, None, lambda, rng)?;
        let oracle = Arc::new(UeCipherOracle::new(scheme, ct));
        let program = CosetPointProgram::new(coupling.clone(), oracle)?;
        let sigma = wrap_program(Arc::new(program));

        let mut inner_params = GameParams::default();
        inner_params.lambda = lambda + 1;
        let inner_pv = fabricated_public(GameId::CpPtfunc, inner_params, pv.trial);
        let mut d = self.inner.phase1(&inner_pv, Received::Cp { sigma }, Box::new(()), rng)?;
        let inner_scratch = std::mem::replace(&mut d.scratch, Box::new(()));
        d.scratch = Box::new(PtfuncScratch { inner_pv, inner_scratch, coupling });
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<PtfuncScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let pair = coset_pair(&red.coupling, sk)?;
        let inner_challenge = Challenge::InputPair { x0: pair.0.clone(), x1: pair.1.clone() };
        let ans = with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_a(&inner_challenge, v, rng)
        })?;
        Ok(BitVector::from_bools(&[branch_of_pair(&pair, ans.get(0))]))
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<PtfuncScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let pair = coset_pair(&red.coupling, sk)?;
        let inner_challenge = Challenge::InputPair { x0: pair.0.clone(), x1: pair.1.clone() };
        let ans = with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_b(&inner_challenge, v, rng)
        })?;
        Ok(BitVector::from_bools(&[branch_of_pair(&pair, ans.get(0))]))
    }
}

// ---------------------------------------------------------------------------
// Handle-refresh wrapper.
// ---------------------------------------------------------------------------

struct RewrapReduction {
    inner: Arc<dyn Adversary>,
}

/// Forwards everything, but re-wraps any received program behind a fresh
/// handle first. Pure plumbing: with the wrapper being a stand-in, this
/// only demonstrates that downstream strategies cannot tell handles apart.
pub fn reduction_rewrap(inner: Arc<dyn Adversary>) -> Arc<dyn Adversary> {
    Arc::new(RewrapReduction { inner })
}

impl Adversary for RewrapReduction {
    fn name(&self) -> String {
        format!("rewrap[{}]", self.inner.name())
    }

    fn choose_messages(
        &self,
        pv: &PublicInputs,
        rng: &mut dyn RngCore,
    ) -> (ChosenMessages, Tau) {
        self.inner.choose_messages(pv, rng)
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let forwarded = match received {
            Received::Cp { sigma } => Received::Cp { sigma: sigma.rewrap() },
            other => other,
        };
        self.inner.phase1(pv, forwarded, tau, rng)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        self.inner.measure_a(challenge, view, rng)
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        self.inner.measure_b(challenge, view, rng)
    }
}

// ---------------------------------------------------------------------------
// The decision hybrid chain and its terminal coupled-encryption reduction.
// ---------------------------------------------------------------------------

/// Inner budget of the coupled scheme used by the hybrid chain: the
/// smallest key length admitting one coded block.
const INNER_COUPLED_LAMBDA: usize = 23;

#[derive(Debug, Clone)]
pub struct HybridConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub prf_input_len: usize,
    pub prf_output_len: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig { trials: 200, master_seed: 7, prf_input_len: 8, prf_output_len: 8 }
    }
}

/// Results of the four decision-game stages, the terminal coupled game, and
/// how many exhaustive program-equality audits were performed.
#[derive(Debug, Clone)]
pub struct HybridReport {
    pub stages: Vec<GameResult>,
    pub terminal: GameResult,
    pub equiv_audits: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    H0,
    H1,
    H2,
    H3,
}

impl Stage {
    const ALL: [Stage; 4] = [Stage::H0, Stage::H1, Stage::H2, Stage::H3];

    fn name(self) -> &'static str {
        match self {
            Stage::H0 => "cp-decision-h0",
            Stage::H1 => "cp-decision-h1",
            Stage::H2 => "cp-decision-h2",
            Stage::H3 => "cp-decision-h3",
        }
    }
}

struct DecisionTerminalScratch {
    inner_pv: PublicInputs,
    inner_scratch: Box<dyn Any + Send + Sync>,
    f: GgmKey,
    probe_a: BitVector,
    probe_b: BitVector,
}

struct DecisionTerminalReduction {
    inner: Arc<dyn Adversary>,
    prf_output_len: usize,
}

impl Adversary for DecisionTerminalReduction {
    fn name(&self) -> String {
        format!("decision-terminal[{}]", self.inner.name())
    }

    fn choose_messages(
        &self,
        pv: &PublicInputs,
        rng: &mut dyn RngCore,
    ) -> (ChosenMessages, Tau) {
        // The chosen plaintexts are the fresh probe points themselves.
        let probe_a = BitVector::random(pv.params.msg_len, rng);
        let probe_b = BitVector::random(pv.params.msg_len_b, rng);
        (
            ChosenMessages { m_a: Some(probe_a.clone()), m_b: Some(probe_b.clone()) },
            Box::new((probe_a, probe_b)),
        )
    }

    fn phase1(
        &self,
        pv: &PublicInputs,
        received: Received,
        tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        if pv.game != GameId::Cue {
            return Err(violation("outer game must be coupled encryption"));
        }
        let Received::Cue { ct } = received else {
            return Err(violation("expected a coupled ciphertext"));
        };
        let (probe_a, probe_b) = *tau
            .downcast::<(BitVector, BitVector)>()
            .map_err(|_| violation("lost carried state"))?;
        // The protected function is only sampled after the ciphertext
        // arrives; its outputs never influenced the encryption.
        let f = GgmKey::sample(self.prf_output_len, pv.params.lambda, rng);
        let scheme = cue_scheme(&pv.params)?;
        if !scheme.has_key_testing() {
            return Err(violation("the patched program needs a key-tested scheme"));
        }
        let oracle = Arc::new(CueCipherOracle::new(scheme, ct));
        let program =
            IndirectPatchedProgram::new(Arc::new(GgmProgram::new(f.clone())), oracle);
        let sigma = wrap_program(Arc::new(program));

        let mut inner_params = GameParams::default();
        inner_params.prf_input_len = pv.params.lambda;
        inner_params.prf_output_len = self.prf_output_len;
        let inner_pv = fabricated_public(GameId::CpDecision, inner_params, pv.trial);
        let mut d = self.inner.phase1(&inner_pv, Received::Cp { sigma }, Box::new(()), rng)?;
        let inner_scratch = std::mem::replace(&mut d.scratch, Box::new(()));
        d.scratch =
            Box::new(DecisionTerminalScratch { inner_pv, inner_scratch, f, probe_a, probe_b });
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<DecisionTerminalScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge =
            Challenge::InputOutput { x: sk.clone(), y: red.f.eval(&red.probe_a) };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_a(&inner_challenge, v, rng)
        })
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let red = view
            .scratch
            .downcast_ref::<DecisionTerminalScratch>()
            .ok_or_else(|| violation("missing reduction scratch"))?;
        let Challenge::Key { sk } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let inner_challenge =
            Challenge::InputOutput { x: sk.clone(), y: red.f.eval(&red.probe_b) };
        with_inner_view(view, &red.inner_pv, red.inner_scratch.as_ref(), |v| {
            self.inner.measure_b(&inner_challenge, v, rng)
        })
    }
}

fn hybrid_scheme(prf_input_len: usize) -> Result<Arc<dyn CueScheme>, GameError> {
    Ok(Arc::new(KeyTestedCue::with_key_len(
        Arc::new(ConstructionCue::new(INNER_COUPLED_LAMBDA)?),
        prf_input_len,
    )))
}

#[allow(clippy::too_many_arguments)]
fn hybrid_trial(
    ctx: &super::GameContext,
    scheme: &Arc<dyn CueScheme>,
    cfg: &HybridConfig,
    stage: Stage,
    adv: &dyn Adversary,
    trial: u64,
) -> Result<(TrialOutcome, u64), GameError> {
    let mut crng = stream_rng(cfg.master_seed, 2 * trial);
    let mut arng = stream_rng(cfg.master_seed, 2 * trial + 1);
    let mut ch = Challenger { rng: &mut crng, transcript: None };

    let in_len = cfg.prf_input_len;
    let out_len = cfg.prf_output_len;
    let f = GgmKey::new(ch.bits("f_seed", out_len), in_len);
    let x_a = ch.bits("x_A", in_len);
    let x_b = ch.bits("x_B", in_len);
    let x_a_alt = ch.bits("x_A'", in_len);
    let x_b_alt = ch.bits("x_B'", in_len);
    let y_a0 = f.eval(&x_a_alt);
    let y_b0 = f.eval(&x_b_alt);
    let mut y_a1 = f.eval(&x_a);
    let mut y_b1 = f.eval(&x_b);

    let f_prog: Arc<dyn Program> = Arc::new(GgmProgram::new(f.clone()));
    let mut audits = 0u64;
    let fail = |stage: Stage, witness: BitVector| GameError::EquivalenceFailure {
        stage: stage.name().to_string(),
        witness,
    };

    let sigma = match stage {
        Stage::H0 => wrap_program(f_prog.clone()),
        Stage::H1 => {
            let ct = scheme.encrypt(&x_a, &x_b, &f.eval(&x_a), &f.eval(&x_b), ch.rng)?;
            let wrapped = wrap_program(Arc::new(PatchedProgram::new(
                f_prog.clone(),
                Arc::new(CueCipherOracle::new(scheme.clone(), ct)),
            )));
            // The patch is filled with the function's own values, so the
            // program must agree with the bare function everywhere.
            let reference = wrap_program(f_prog.clone());
            if let Some(witness) =
                functional_equiv_witness(&wrapped, &reference, full_domain(in_len), ch.rng)
            {
                return Err(fail(stage, witness));
            }
            audits += 1;
            wrapped
        }
        Stage::H2 => {
            let probe_a = ch.bits("x~_A", in_len);
            let probe_b = ch.bits("x~_B", in_len);
            y_a1 = f.eval(&probe_a);
            y_b1 = f.eval(&probe_b);
            let ct = scheme.encrypt(&x_a, &x_b, &f.eval(&probe_a), &f.eval(&probe_b), ch.rng)?;
            let wrapped = wrap_program(Arc::new(PatchedProgram::new(
                f_prog.clone(),
                Arc::new(CueCipherOracle::new(scheme.clone(), ct)),
            )));
            // Swapping the patch payloads only moves the two key points.
            let ct_prev = scheme.encrypt(&x_a, &x_b, &f.eval(&x_a), &f.eval(&x_b), ch.rng)?;
            let previous = wrap_program(Arc::new(PatchedProgram::new(
                f_prog.clone(),
                Arc::new(CueCipherOracle::new(scheme.clone(), ct_prev)),
            )));
            let off_key =
                full_domain(in_len).filter(|z| *z != x_a && *z != x_b);
            if let Some(witness) = functional_equiv_witness(&wrapped, &previous, off_key, ch.rng)
            {
                return Err(fail(stage, witness));
            }
            // When the two keys coincide, the first slot's indicator
            // shadows the second, so the realized value at the shared
            // point is the first payload.
            let expect_b = if x_b == x_a { &y_a1 } else { &y_b1 };
            for (key, expect) in [(&x_a, &y_a1), (&x_b, expect_b)] {
                let got = wrapped.evaluate(key, ch.rng)?;
                if got.bits() != Some(expect) {
                    return Err(fail(stage, key.clone()));
                }
            }
            audits += 1;
            wrapped
        }
        Stage::H3 => {
            let probe_a = ch.bits("x~_A", in_len);
            let probe_b = ch.bits("x~_B", in_len);
            y_a1 = f.eval(&probe_a);
            y_b1 = f.eval(&probe_b);
            let ct = scheme.encrypt(&x_a, &x_b, &probe_a, &probe_b, ch.rng)?;
            let wrapped = wrap_program(Arc::new(IndirectPatchedProgram::new(
                f_prog.clone(),
                Arc::new(CueCipherOracle::new(scheme.clone(), ct)),
            )));
            // Indirection through encrypted inputs computes the same
            // function as direct patching with the evaluated outputs.
            let ct_direct =
                scheme.encrypt(&x_a, &x_b, &f.eval(&probe_a), &f.eval(&probe_b), ch.rng)?;
            let direct = wrap_program(Arc::new(PatchedProgram::new(
                f_prog.clone(),
                Arc::new(CueCipherOracle::new(scheme.clone(), ct_direct)),
            )));
            if let Some(witness) =
                functional_equiv_witness(&wrapped, &direct, full_domain(in_len), ch.rng)
            {
                return Err(fail(stage, witness));
            }
            audits += 1;
            wrapped
        }
    };

    let pv = ctx.public_inputs(trial);
    let disposition = match adv.phase1(&pv, Received::Cp { sigma }, Box::new(()), &mut arng) {
        Ok(d) => d,
        Err(_) => return Ok((TrialOutcome::violated(), audits)),
    };
    let a = ch.bit("a");
    let b = ch.bit("b");
    let challenge_a = Challenge::InputOutput { x: x_a, y: if a { y_a1 } else { y_a0 } };
    let challenge_b = Challenge::InputOutput { x: x_b, y: if b { y_b1 } else { y_b0 } };
    let answers =
        bipartite_measure(ctx, adv, &pv, disposition, &mut ch, &mut arng, &challenge_a, &challenge_b);
    if answers.violated {
        return Ok((TrialOutcome::violated(), audits));
    }
    let a_ok = answers.ans_a.as_ref().map(|v| v.get(0)).unwrap_or(false) == a;
    let b_ok = answers.ans_b.as_ref().map(|v| v.get(0)).unwrap_or(false) == b;
    Ok((
        TrialOutcome {
            win: a_ok && b_ok,
            a_ok,
            b_ok,
            violation: false,
            extras: Vec::new(),
            ans_a: answers.ans_a,
            ans_b: answers.ans_b,
        },
        audits,
    ))
}

/// Walk the four-stage program substitution chain of the decision game,
/// auditing each substitution exhaustively per trial, then run the terminal
/// coupled-encryption game against the same strategy through the terminal
/// reduction. Any audit failure aborts with the witnessing input.
pub fn hybrid_chain_decision(
    cfg: &HybridConfig,
    adv: Arc<dyn Adversary>,
) -> Result<HybridReport, GameError> {
    if cfg.prf_input_len > 12 {
        return Err(GameError::BadConfig {
            reason: "exhaustive audits need a domain of at most 2^12 points".into(),
        });
    }
    let mut params = GameParams::default();
    params.prf_input_len = cfg.prf_input_len;
    params.prf_output_len = cfg.prf_output_len;
    let game_cfg =
        GameConfig::new(GameId::CpDecision, params, cfg.trials, cfg.master_seed);
    let ctx = build_context(&game_cfg)?;
    let scheme = hybrid_scheme(cfg.prf_input_len)?;

    let mut stages = Vec::new();
    let mut equiv_audits = 0u64;
    for stage in Stage::ALL {
        let started = std::time::Instant::now();
        let per_trial: Vec<(TrialOutcome, u64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| hybrid_trial(&ctx, &scheme, cfg, stage, adv.as_ref(), trial))
            .collect::<Result<_, GameError>>()?;
        let (outcomes, audits): (Vec<TrialOutcome>, Vec<u64>) = per_trial.into_iter().unzip();
        equiv_audits += audits.iter().sum::<u64>();
        stages.push(super::fold_outcomes(
            stage.name(),
            adv.name(),
            cfg.trials,
            &outcomes,
            started.elapsed().as_millis() as u64,
        ));
    }

    let mut terminal_params = GameParams::default();
    terminal_params.lambda = cfg.prf_input_len;
    terminal_params.msg_len = cfg.prf_input_len;
    terminal_params.msg_len_b = cfg.prf_input_len;
    terminal_params.cue_scheme = "compiled-construction".to_string();
    terminal_params.prf_input_len = cfg.prf_input_len;
    terminal_params.prf_output_len = cfg.prf_output_len;
    let terminal_cfg =
        GameConfig::new(GameId::Cue, terminal_params, cfg.trials, cfg.master_seed);
    let terminal_red =
        DecisionTerminalReduction { inner: adv, prf_output_len: cfg.prf_output_len };
    let terminal = super::run_game(&terminal_cfg, &terminal_red)?;

    Ok(HybridReport { stages, terminal, equiv_audits })
}
