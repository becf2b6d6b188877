//! Built-in baseline strategies. None of them beat the security bounds;
//! they anchor the harness (uniform guessing), realize the honest rates
//! (full decryption on one side), and reproduce the known optimal
//! single-copy attack (measuring in the intermediate basis).

use std::sync::Arc;

use rand::RngCore;

use crate::crypto::{lambda_prime, prg_stretch};
use crate::f2::{BitMatrix, BitVector};
use crate::qsim::gates;
use crate::unclonable::{
    ConjugateCuePayload, ConjugateUePayload, CueCiphertext, UeCiphertext,
};

use super::{
    cue_scheme, ue_scheme, Adversary, Challenge, Disposition, GameError, GameId, GameParams,
    PartyView, PublicInputs, Received, Tau,
};

/// Resolve a named builtin.
pub fn builtin_adversary(name: &str) -> Result<Arc<dyn Adversary>, GameError> {
    Ok(match name {
        "random_guess" => Arc::new(RandomGuess),
        "give_all_to_A" => Arc::new(GiveAll { to_b: false }),
        "give_all_to_B" => Arc::new(GiveAll { to_b: true }),
        "split_halves" => Arc::new(SplitHalves),
        "echo_breidbart" => Arc::new(EchoBreidbart),
        "honest_decryptor" => Arc::new(HonestDecryptor),
        other => return Err(GameError::UnknownAdversary { name: other.to_string() }),
    })
}

pub fn builtin_adversary_names() -> &'static [&'static str] {
    &[
        "random_guess",
        "give_all_to_A",
        "give_all_to_B",
        "split_halves",
        "echo_breidbart",
        "honest_decryptor",
    ]
}

// ---------------------------------------------------------------------------
// Shared pieces.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
pub(super) enum Side {
    A,
    B,
}

fn answer_len(pv: &PublicInputs, side: Side) -> usize {
    match side {
        Side::A => pv.answer_len_a,
        Side::B => pv.answer_len_b,
    }
}

fn random_answer(pv: &PublicInputs, side: Side, rng: &mut dyn RngCore) -> BitVector {
    BitVector::random(answer_len(pv, side), rng)
}

/// Classical remnants a strategy keeps after dismantling what it received.
enum Opened {
    Wiretap { first: BitVector, second: BitVector },
    UeConj { pad: BitVector },
    CueConj { coupling: BitMatrix, pad_a: BitVector, pad_b: BitVector },
    /// Key-tested ciphertexts and anything else without an honest
    /// single-party decoding path here.
    Other,
    Program,
}

/// Dismantle the challenger's message, claiming every qubit for one list.
/// Conjugate ciphertext classical parts land in the scratch; compiled
/// ciphertexts surrender their inner coded state and are otherwise treated
/// as opaque.
fn open_received(received: Received) -> (Disposition, usize) {
    let mut d = Disposition::default();
    match received {
        Received::Wiretap { state, first, second } => {
            d.state = state;
            d.scratch = Box::new(Opened::Wiretap { first, second });
        }
        Received::Ue { ct } => match ct {
            UeCiphertext::Conjugate(ConjugateUePayload { state, pad }) => {
                d.state = state;
                d.scratch = Box::new(Opened::UeConj { pad });
            }
            UeCiphertext::KeyTested(p) => {
                if let UeCiphertext::Conjugate(inner) = *p.inner {
                    d.state = inner.state;
                }
                d.scratch = Box::new(Opened::Other);
            }
        },
        Received::Cue { ct } => match ct {
            CueCiphertext::Conjugate(ConjugateCuePayload { state, coupling, pad_a, pad_b }) => {
                d.state = state;
                d.scratch = Box::new(Opened::CueConj { coupling, pad_a, pad_b });
            }
            CueCiphertext::KeyTested(p) => {
                if let CueCiphertext::Conjugate(inner) = *p.inner {
                    d.state = inner.state;
                }
                d.scratch = Box::new(Opened::Other);
            }
        },
        Received::Cp { sigma } => {
            d.a_programs.push(Arc::new(sigma));
            d.scratch = Box::new(Opened::Program);
        }
    }
    let q = d.state.num_qubits();
    (d, q)
}

/// Key layout of the conjugate-coded single-receiver schemes: basis
/// selector length and extractor shape.
struct ConjugateLayout {
    theta_len: usize,
    rows: usize,
    cols: usize,
}

fn ue_layout(params: &GameParams) -> Option<ConjugateLayout> {
    match params.ue_scheme.as_str() {
        "candidate" => {
            let k = lambda_prime(params.lambda, false)?;
            Some(ConjugateLayout { theta_len: 11 * k, rows: k, cols: 11 * k })
        }
        "toy" => Some(ConjugateLayout {
            theta_len: params.lambda,
            rows: params.msg_len,
            cols: params.lambda,
        }),
        _ => None,
    }
}

fn cue_layout(params: &GameParams) -> Option<ConjugateLayout> {
    match params.cue_scheme.as_str() {
        "construction" => {
            let k = lambda_prime(params.lambda, true)?;
            Some(ConjugateLayout { theta_len: 11 * k + 1, rows: k, cols: 11 * k })
        }
        "toy" => Some(ConjugateLayout {
            theta_len: params.lambda + 1,
            rows: params.msg_len,
            cols: params.lambda,
        }),
        _ => None,
    }
}

fn parse_extractor(sk: &BitVector, layout: &ConjugateLayout) -> BitMatrix {
    let rows: Vec<BitVector> = (0..layout.rows)
        .map(|r| {
            let start = layout.theta_len + r * layout.cols;
            sk.slice(start..start + layout.cols)
        })
        .collect();
    BitMatrix::from_rows(layout.cols, &rows)
}

fn chosen_message(pv: &PublicInputs, side: Side) -> Option<&BitVector> {
    match (pv.game, side) {
        (GameId::Ue, _) => pv.chosen.m_a.as_ref(),
        (GameId::Cue, Side::A) => pv.chosen.m_a.as_ref(),
        (GameId::Cue, Side::B) => pv.chosen.m_b.as_ref(),
        _ => None,
    }
}

/// The honest receiving procedure for one party that holds everything it
/// needs: decode in the revealed basis or decrypt with the revealed key and
/// answer exactly. Falls back to a uniform answer whenever the challenge
/// does not admit an honest reading from this side's resources.
pub(super) fn honest_measure(
    challenge: &Challenge,
    view: &mut PartyView<'_>,
    side: Side,
    rng: &mut dyn RngCore,
) -> Result<BitVector, GameError> {
    let pv = view.public().clone();
    match (pv.game, challenge) {
        (GameId::Rand, Challenge::BasisKey { theta, extractor }) => {
            let (first, second) = match view.scratch::<Opened>() {
                Some(Opened::Wiretap { first, second }) => (first.clone(), second.clone()),
                _ => return Ok(random_answer(&pv, side, rng)),
            };
            if view.qubit_count() != theta.len() {
                return Ok(random_answer(&pv, side, rng));
            }
            let x = view.decode_basis(theta, rng)?;
            let received = if side == Side::A { first } else { second };
            Ok(BitVector::from_bools(&[extractor.matvec(&x) == received]))
        }
        (GameId::Search, Challenge::BasisKey { theta, .. }) => {
            if view.qubit_count() != theta.len() {
                return Ok(random_answer(&pv, side, rng));
            }
            view.decode_basis(theta, rng)
        }
        (GameId::Ue, Challenge::Key { sk }) => {
            let pad = match view.scratch::<Opened>() {
                Some(Opened::UeConj { pad }) => pad.clone(),
                _ => return Ok(random_answer(&pv, side, rng)),
            };
            let (Some(state), Some(chosen), Ok(scheme)) = (
                view.take_all_state(),
                chosen_message(&pv, side).cloned(),
                ue_scheme(&pv.params),
            ) else {
                return Ok(random_answer(&pv, side, rng));
            };
            let mut ct = UeCiphertext::Conjugate(ConjugateUePayload { state, pad });
            match scheme.decrypt(sk, &mut ct, rng) {
                Ok(m) => Ok(BitVector::from_bools(&[m == chosen])),
                Err(_) => Ok(random_answer(&pv, side, rng)),
            }
        }
        (GameId::Cue, Challenge::Key { sk }) => {
            let (coupling, pad_a, pad_b) = match view.scratch::<Opened>() {
                Some(Opened::CueConj { coupling, pad_a, pad_b }) => {
                    (coupling.clone(), pad_a.clone(), pad_b.clone())
                }
                _ => return Ok(random_answer(&pv, side, rng)),
            };
            let (Some(state), Some(chosen), Ok(scheme)) = (
                view.take_all_state(),
                chosen_message(&pv, side).cloned(),
                cue_scheme(&pv.params),
            ) else {
                return Ok(random_answer(&pv, side, rng));
            };
            let mut ct =
                CueCiphertext::Conjugate(ConjugateCuePayload { state, coupling, pad_a, pad_b });
            let slot = if side == Side::A { 0 } else { 1 };
            match scheme.decrypt(slot, sk, &mut ct, rng) {
                Ok(m) => Ok(BitVector::from_bools(&[m == chosen])),
                Err(_) => Ok(random_answer(&pv, side, rng)),
            }
        }
        (GameId::CpDecision, Challenge::InputOutput { x, y }) => {
            let Some(program) = view.programs().first().cloned() else {
                return Ok(random_answer(&pv, side, rng));
            };
            match program.evaluate(x, rng)?.bits() {
                Some(v) => Ok(BitVector::from_bools(&[v == y])),
                None => Ok(random_answer(&pv, side, rng)),
            }
        }
        (GameId::CpSearch, Challenge::Input { x }) => {
            let Some(program) = view.programs().first().cloned() else {
                return Ok(random_answer(&pv, side, rng));
            };
            match program.evaluate(x, rng)?.bits() {
                Some(v) if v.len() == answer_len(&pv, side) => Ok(v.clone()),
                _ => Ok(random_answer(&pv, side, rng)),
            }
        }
        (GameId::CpPtfunc, Challenge::InputPair { x0, x1 }) => {
            let Some(program) = view.programs().first().cloned() else {
                return Ok(random_answer(&pv, side, rng));
            };
            let hit = |z: &BitVector, rng: &mut dyn RngCore| -> Result<bool, GameError> {
                Ok(program.evaluate(z, rng)?.bits().map(|v| !v.is_zero()).unwrap_or(false))
            };
            if hit(x0, rng)? {
                Ok(BitVector::from_bools(&[false]))
            } else if hit(x1, rng)? {
                Ok(BitVector::from_bools(&[true]))
            } else {
                Ok(random_answer(&pv, side, rng))
            }
        }
        _ => Ok(random_answer(&pv, side, rng)),
    }
}

// ---------------------------------------------------------------------------
// The builtins.
// ---------------------------------------------------------------------------

/// Claims nothing and answers uniformly: the floor every game's win rate is
/// checked against.
struct RandomGuess;

impl Adversary for RandomGuess {
    fn name(&self) -> String {
        "random_guess".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        drop(received);
        Ok(Disposition::default())
    }

    fn measure_a(
        &self,
        _challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        Ok(random_answer(view.public(), Side::A, rng))
    }

    fn measure_b(
        &self,
        _challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        Ok(random_answer(view.public(), Side::B, rng))
    }
}

/// Hands every resource to one party, which then plays honestly; the other
/// party guesses. Realizes the single-receiver rates the splitting
/// obstruction is measured against.
struct GiveAll {
    to_b: bool,
}

impl Adversary for GiveAll {
    fn name(&self) -> String {
        if self.to_b { "give_all_to_B".to_string() } else { "give_all_to_A".to_string() }
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let (mut d, q) = open_received(received);
        let all: Vec<usize> = (0..q).collect();
        if self.to_b {
            d.b_qubits = all;
            d.b_programs = std::mem::take(&mut d.a_programs);
        } else {
            d.a_qubits = all;
        }
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        if self.to_b {
            Ok(random_answer(view.public(), Side::A, rng))
        } else {
            honest_measure(challenge, view, Side::A, rng)
        }
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        if self.to_b {
            honest_measure(challenge, view, Side::B, rng)
        } else {
            Ok(random_answer(view.public(), Side::B, rng))
        }
    }
}

/// Divides the coded register in half positionally (programs go to A);
/// each side decodes what it holds and fills the rest uniformly.
struct SplitHalves;

impl Adversary for SplitHalves {
    fn name(&self) -> String {
        "split_halves".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let (mut d, q) = open_received(received);
        let h = q.div_ceil(2);
        d.a_qubits = (0..h).collect();
        d.b_qubits = (h..q).collect();
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let pv = view.public().clone();
        match (pv.game, challenge) {
            (GameId::Search, Challenge::BasisKey { theta, .. }) => {
                let h = view.qubit_count();
                let mine = view.decode_basis(&theta.slice(0..h), rng)?;
                Ok(mine.concat(&BitVector::random(theta.len() - h, rng)))
            }
            (GameId::CpDecision | GameId::CpSearch | GameId::CpPtfunc, _) => {
                honest_measure(challenge, view, Side::A, rng)
            }
            _ => Ok(random_answer(&pv, Side::A, rng)),
        }
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let pv = view.public().clone();
        match (pv.game, challenge) {
            (GameId::Search, Challenge::BasisKey { theta, .. }) => {
                let w = theta.len();
                let h = w - view.qubit_count();
                let mine = view.decode_basis(&theta.slice(h..w), rng)?;
                Ok(BitVector::random(h, rng).concat(&mine))
            }
            _ => Ok(random_answer(&pv, Side::B, rng)),
        }
    }
}

/// Measures every coded qubit in the intermediate basis bisecting the two
/// coding bases and gives both parties the transcript. For one coded qubit
/// this is the optimal basis-oblivious readout.
struct EchoBreidbart;

struct EchoScratch {
    y: Option<BitVector>,
    opened: Opened,
}

impl Adversary for EchoBreidbart {
    fn name(&self) -> String {
        "echo_breidbart".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let (mut d, q) = open_received(received);
        let rotate = gates::breidbart().adjoint();
        let mut state = std::mem::replace(&mut d.state, crate::qsim::StateVector::zero_state(0));
        for qubit in 0..q {
            state.apply_gate(&rotate, &[qubit])?;
        }
        let y = if q > 0 { Some(state.measure_all(rng)) } else { None };
        let taken = std::mem::replace(&mut d.scratch, Box::new(()));
        let opened = taken.downcast::<Opened>().map(|b| *b).unwrap_or(Opened::Other);
        d.scratch = Box::new(EchoScratch { y, opened });
        // The measured register is discarded; both parties keep only the
        // classical transcript.
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        echo_answer(challenge, view, Side::A, rng)
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        echo_answer(challenge, view, Side::B, rng)
    }
}

fn echo_answer(
    challenge: &Challenge,
    view: &mut PartyView<'_>,
    side: Side,
    rng: &mut dyn RngCore,
) -> Result<BitVector, GameError> {
    let pv = view.public().clone();
    let Some(scratch) = view.scratch::<EchoScratch>() else {
        return Ok(random_answer(&pv, side, rng));
    };
    let Some(y) = scratch.y.clone() else {
        return Ok(random_answer(&pv, side, rng));
    };
    match (&scratch.opened, challenge) {
        (_, Challenge::BasisKey { .. }) if pv.game == GameId::Search => Ok(y),
        (Opened::Wiretap { first, second }, Challenge::BasisKey { extractor, .. }) => {
            let received = if side == Side::A { first } else { second };
            Ok(BitVector::from_bools(&[extractor.matvec(&y) == *received]))
        }
        (Opened::UeConj { pad }, Challenge::Key { sk }) => {
            let (Some(layout), Some(chosen)) =
                (ue_layout(&pv.params), chosen_message(&pv, side).cloned())
            else {
                return Ok(random_answer(&pv, side, rng));
            };
            let ext = parse_extractor(sk, &layout);
            let m = pad ^ &prg_stretch(&ext.matvec(&y), pad.len());
            Ok(BitVector::from_bools(&[m == chosen]))
        }
        (Opened::CueConj { pad_a, pad_b, .. }, Challenge::Key { sk }) => {
            let (Some(layout), Some(chosen)) =
                (cue_layout(&pv.params), chosen_message(&pv, side).cloned())
            else {
                return Ok(random_answer(&pv, side, rng));
            };
            let ext = parse_extractor(sk, &layout);
            let pad = if side == Side::A { pad_a } else { pad_b };
            let m = pad ^ &prg_stretch(&ext.matvec(&y), pad.len());
            Ok(BitVector::from_bools(&[m == chosen]))
        }
        _ => Ok(random_answer(&pv, side, rng)),
    }
}

/// Gives everything to A, which decodes honestly; B always claims the
/// chosen branch.
struct HonestDecryptor;

impl Adversary for HonestDecryptor {
    fn name(&self) -> String {
        "honest_decryptor".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let (mut d, q) = open_received(received);
        d.a_qubits = (0..q).collect();
        Ok(d)
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        honest_measure(challenge, view, Side::A, rng)
    }

    fn measure_b(
        &self,
        _challenge: &Challenge,
        view: &mut PartyView<'_>,
        _rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let len = answer_len(view.public(), Side::B);
        Ok(BitVector::from_fn(len, |_| true))
    }
}
