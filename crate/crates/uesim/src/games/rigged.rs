//! Deliberately out-of-model strategies for exercising the harness itself:
//! winners that rederive challenger secrets from the master seed, exact
//! predictors for the extraction wrapper, pirates that alias one program
//! handle to both parties, and a signaling probe. None of these are
//! admissible adversaries; they pin down what the experiments and the
//! reduction wrappers actually enforce, and they make the conditioning
//! events inside the reductions observable with certainty instead of with
//! some unknown adversarial advantage.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;

use crate::f2::{BitMatrix, BitVector};
use crate::gl::BinaryMeasurement;
use crate::qsim::{gates, StateVector};

use super::adversaries::{honest_measure, Side};
use super::{
    stream_rng, violation, Adversary, Challenge, Disposition, GameError, KeyedBinaryFamily,
    PartyView, PredictorSetup, PublicInputs, RandPredictor, Received, Tau,
};

/// Re-draw the first `len` challenger bits of a trial. The wiretap
/// challengers sample their seed first, so this recovers it exactly.
pub fn rederive_prefix(master_seed: u64, trial: u64, len: usize) -> BitVector {
    BitVector::random(len, &mut stream_rng(master_seed, 2 * trial))
}

// ---------------------------------------------------------------------------
// Seed-omniscient recovery strategy.
// ---------------------------------------------------------------------------

struct StoredStrings {
    first: BitVector,
    second: BitVector,
}

/// Answers the recovery game with the true seed, rederived from the master
/// seed, but only when the received masked string is consistent with it
/// under the revealed extractor; otherwise it deliberately corrupts one
/// bit. Against the plain challenger the strings are always consistent and
/// it wins every trial. Behind the guessing wrapper it wins exactly when
/// both guesses were right, making the wrapper's conditioning event
/// observable.
pub struct ConsistencyCheckedWinner {
    pub master_seed: u64,
    pub width: usize,
}

impl Adversary for ConsistencyCheckedWinner {
    fn name(&self) -> String {
        "rigged-consistency-winner".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let Received::Wiretap { first, second, .. } = received else {
            return Err(violation("expected a coded seed"));
        };
        Ok(Disposition {
            scratch: Box::new(StoredStrings { first, second }),
            ..Disposition::default()
        })
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        _rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        self.answer(challenge, view, Side::A)
    }

    fn measure_b(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        _rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        self.answer(challenge, view, Side::B)
    }
}

impl ConsistencyCheckedWinner {
    fn answer(
        &self,
        challenge: &Challenge,
        view: &PartyView<'_>,
        side: Side,
    ) -> Result<BitVector, GameError> {
        let stored = view
            .scratch::<StoredStrings>()
            .ok_or_else(|| violation("missing stored strings"))?;
        let Challenge::BasisKey { extractor, .. } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        let received = match side {
            Side::A => &stored.first,
            Side::B => &stored.second,
        };
        let mut x = rederive_prefix(self.master_seed, view.public().trial, self.width);
        if extractor.matvec(&x) != *received {
            x.flip(0);
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------------------
// Exact predictors for the extraction wrapper.
// ---------------------------------------------------------------------------

struct OracleSide {
    x: BitVector,
    expect: BitVector,
}

impl KeyedBinaryFamily for OracleSide {
    fn register_qubits(&self) -> usize {
        1
    }

    fn measurement(&self, _theta: &BitVector, extractor: &BitMatrix) -> BinaryMeasurement {
        let unitary = if extractor.matvec(&self.x) == self.expect {
            gates::pauli_x()
        } else {
            gates::identity(2)
        };
        BinaryMeasurement { unitary, output_qubit: 0 }
    }
}

/// A prediction strategy that is right every time: it rederives the seed
/// from the master seed and compares the extraction against the received
/// string, deterministically writing the verdict into its register qubit.
/// Behind the extraction wrapper, its verdicts depend linearly on the
/// spliced extractor row, so the extraction circuit recovers the seed with
/// certainty.
pub struct PerfectRandPredictor {
    pub master_seed: u64,
    pub width: usize,
}

impl RandPredictor for PerfectRandPredictor {
    fn name(&self) -> String {
        "rigged-perfect-predictor".to_string()
    }

    fn prepare(
        &self,
        pv: &PublicInputs,
        received: Received,
        _rng: &mut dyn RngCore,
    ) -> Result<PredictorSetup, GameError> {
        let Received::Wiretap { first, second, .. } = received else {
            return Err(violation("expected a coded seed"));
        };
        let x = rederive_prefix(self.master_seed, pv.trial, self.width);
        Ok(PredictorSetup {
            state: StateVector::zero_state(2),
            register_a: vec![0],
            register_b: vec![1],
            side_a: Arc::new(OracleSide { x: x.clone(), expect: first }),
            side_b: Arc::new(OracleSide { x, expect: second }),
        })
    }
}

/// A prediction strategy with zero advantage: both parties flip a fair
/// quantum coin whatever the key is. The extraction circuit then finds no
/// signal and the wrapped recovery game is lost essentially always.
pub struct CoinPredictor;

struct CoinSide;

impl KeyedBinaryFamily for CoinSide {
    fn register_qubits(&self) -> usize {
        1
    }

    fn measurement(&self, _theta: &BitVector, _extractor: &BitMatrix) -> BinaryMeasurement {
        BinaryMeasurement { unitary: gates::hadamard(), output_qubit: 0 }
    }
}

impl RandPredictor for CoinPredictor {
    fn name(&self) -> String {
        "rigged-coin-predictor".to_string()
    }

    fn prepare(
        &self,
        _pv: &PublicInputs,
        _received: Received,
        _rng: &mut dyn RngCore,
    ) -> Result<PredictorSetup, GameError> {
        Ok(PredictorSetup {
            state: StateVector::zero_state(2),
            register_a: vec![0],
            register_b: vec![1],
            side_a: Arc::new(CoinSide),
            side_b: Arc::new(CoinSide),
        })
    }
}

// ---------------------------------------------------------------------------
// Program-copying pirate.
// ---------------------------------------------------------------------------

/// Hands the same program handle to both parties and has each of them play
/// honestly with it. Program handles are classical data in this model, so
/// aliasing is allowed, and the shared backing state serializes the two
/// parties' queries. This is the canonical winning strategy for every
/// wrapped-program game.
pub struct AliasingPirate;

impl Adversary for AliasingPirate {
    fn name(&self) -> String {
        "rigged-aliasing-pirate".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let Received::Cp { sigma } = received else {
            return Err(violation("expected a wrapped program"));
        };
        let shared = Arc::new(sigma);
        Ok(Disposition {
            a_programs: vec![shared.clone()],
            b_programs: vec![shared],
            ..Disposition::default()
        })
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
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        honest_measure(challenge, view, Side::B, rng)
    }
}

// ---------------------------------------------------------------------------
// No-signaling probe.
// ---------------------------------------------------------------------------

/// Splits a maximally entangled pair and has party A choose its measurement
/// basis from a bit of its private challenge while party B reports a plain
/// measurement of its half. If the harness leaked anything about A's
/// challenge or A's basis choice into B's view, B's answers would correlate
/// with A's basis bit; physically and in a correct simulation they must be
/// independent coin flips.
pub struct SignalingProbe;

fn cz() -> DMatrix<Complex64> {
    DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            Complex64::new(if i == 3 { -1.0 } else { 1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

impl Adversary for SignalingProbe {
    fn name(&self) -> String {
        "rigged-signaling-probe".to_string()
    }

    fn phase1(
        &self,
        _pv: &PublicInputs,
        received: Received,
        _tau: Tau,
        _rng: &mut dyn RngCore,
    ) -> Result<Disposition, GameError> {
        let Received::Wiretap { .. } = received else {
            return Err(violation("expected a wiretap game"));
        };
        let mut state = StateVector::zero_state(2);
        state.apply_gate(&gates::hadamard(), &[0])?;
        state.apply_gate(&gates::hadamard(), &[1])?;
        state.apply_gate(&cz(), &[0, 1])?;
        Ok(Disposition {
            state,
            a_qubits: vec![0],
            b_qubits: vec![1],
            ..Disposition::default()
        })
    }

    fn measure_a(
        &self,
        challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        let Challenge::BasisKey { extractor, .. } = challenge else {
            return Err(violation("unexpected challenge shape"));
        };
        if extractor.row(0).get(0) {
            view.apply_gate(&gates::hadamard(), &[0])?;
        }
        view.measure(&[0], rng)
    }

    fn measure_b(
        &self,
        _challenge: &Challenge,
        view: &mut PartyView<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<BitVector, GameError> {
        view.measure(&[0], rng)
    }
}
