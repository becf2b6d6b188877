//! Named, seeded verification routines shared by the command-line interface
//! and the acceptance suite.
//!
//! Each check audits one analytic claim against the simulator at desk scale
//! and reports a pass/fail verdict with the measured quantities attached:
//!
//! - `twirl`: averaging conjugated cross terms of two distinct Paulis over
//!   the full Clifford group yields the zero matrix;
//! - `gl`: the closed-form joint extraction probability matches the sampled
//!   extraction circuit;
//! - `hybrid-decision`: the decision-game hybrid chain completes all of its
//!   exhaustive program-equivalence audits, and an aliasing pirate's win
//!   rate survives every substitution;
//! - `otp-correctness`: Clifford one-time-pad obfuscation preserves
//!   evaluation on the full domain, repeatably;
//! - `purified-gap`: the two-oracle hybrid norm gap respects the q(q+1)
//!   query bound.
//!
//! Checks are deterministic for a fixed seed: instance sampling is keyed by
//! (seed, instance) streams, so tallies do not depend on the worker count.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2::BitVector;
use crate::games::rigged::AliasingPirate;
use crate::games::{
    builtin_adversary, hybrid_chain_decision, stream_rng, GameError, HybridConfig,
};
use crate::gl::{gl_extract, gl_success_formula, GlError, SampledFamily};
use crate::opaque::{
    clifford_otp_obfuscate, full_domain, purified_hybrid_gap, OpaqueError,
    QuantumImplementation,
};
use crate::programs::{Program, TableProgram};
use crate::qsim::{
    clifford_group_order, clifford_twirl_sum, gates, PauliString, StateVector,
};

/// Every registered check, in the order the coverage tooling reports them.
pub const CHECK_NAMES: [&str; 5] =
    ["twirl", "gl", "hybrid-decision", "otp-correctness", "purified-gap"];

const TWIRL_TOL: f64 = 1e-10;
const GAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("unknown check {name:?}; registered checks are {CHECK_NAMES:?}")]
    UnknownCheck { name: String },
    #[error("bad check parameters: {reason}")]
    BadParams { reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Gl(#[from] GlError),
    #[error(transparent)]
    Opaque(#[from] OpaqueError),
}

/// Knobs shared by all checks; fields a check does not consume are ignored.
/// `None` counts fall back to each check's recorded defaults.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seed: u64,
    /// Register width for `twirl` (1 or 2).
    pub qubits: usize,
    /// Largest extractor index width for `gl`; instances cycle 1..=bits.
    pub bits: usize,
    /// Instance count for `twirl`, `gl`, `otp-correctness`, `purified-gap`.
    pub instances: Option<u64>,
    /// Monte Carlo extraction pairs per `gl` instance.
    pub runs: Option<u64>,
    /// Largest query count for `purified-gap`.
    pub queries: usize,
    /// Trials per hybrid stage for `hybrid-decision`.
    pub trials: Option<u64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 7,
            qubits: 1,
            bits: 3,
            instances: None,
            runs: None,
            queries: 3,
            trials: None,
        }
    }
}

/// Verdict of one check run: the overall flag, the one-line findings that
/// back it, and every measured quantity by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub details: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub elapsed_ms: u64,
}

impl CheckOutcome {
    fn new(check: &str) -> Self {
        CheckOutcome {
            check: check.to_string(),
            passed: false,
            details: Vec::new(),
            metrics: BTreeMap::new(),
            elapsed_ms: 0,
        }
    }

    /// Identical findings, ignoring wall-clock.
    pub fn same_findings(&self, other: &CheckOutcome) -> bool {
        self.check == other.check
            && self.passed == other.passed
            && self.details == other.details
            && self.metrics == other.metrics
    }
}

/// Run the named check. Parameter errors and simulator failures surface as
/// `Err`; a check that ran to completion but found a violated claim returns
/// `Ok` with `passed == false`.
pub fn run_check(name: &str, opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let started = Instant::now();
    let mut outcome = match name {
        "twirl" => twirl_check(opts)?,
        "gl" => gl_check(opts)?,
        "hybrid-decision" => hybrid_decision_check(opts)?,
        "otp-correctness" => otp_correctness_check(opts)?,
        "purified-gap" => purified_gap_check(opts)?,
        other => return Err(CheckError::UnknownCheck { name: other.to_string() }),
    };
    outcome.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(outcome)
}

fn bad(reason: impl Into<String>) -> CheckError {
    CheckError::BadParams { reason: reason.into() }
}

fn random_state(qubits: usize, rng: &mut dyn rand::RngCore) -> StateVector {
    let dim = 1usize << qubits;
    let u = gates::random_unitary(dim, rng);
    StateVector::from_amplitudes(u.column(0).iter().cloned().collect())
        .expect("unitary columns are normalized")
}

// ---------------------------------------------------------------------------
// twirl
// ---------------------------------------------------------------------------

fn twirl_check(opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let qubits = opts.qubits;
    if !(1..=2).contains(&qubits) {
        return Err(bad("the Clifford group is enumerated at 1 or 2 qubits only"));
    }
    let instances = opts.instances.unwrap_or(if qubits == 1 { 1000 } else { 100 });
    if instances == 0 {
        return Err(bad("at least one instance is required"));
    }
    let paulis = PauliString::enumerate_hermitian(qubits);

    let norms: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i);
            let first = rng.gen_range(0..paulis.len());
            let second = loop {
                let j = rng.gen_range(0..paulis.len());
                if j != first {
                    break j;
                }
            };
            let psi = random_state(qubits, &mut rng);
            clifford_twirl_sum(&paulis[first], &paulis[second], &psi).norm()
        })
        .collect();
    let max_norm = norms.into_iter().fold(0.0f64, f64::max);

    // An equal pair must not cancel: each summand is a rank-one projector,
    // so the trace of the sum is the group order.
    let mut rng = stream_rng(opts.seed, u64::MAX);
    let same = rng.gen_range(0..paulis.len());
    let psi = random_state(qubits, &mut rng);
    let control_norm = clifford_twirl_sum(&paulis[same], &paulis[same], &psi).norm();

    let order = clifford_group_order(qubits);
    let mut out = CheckOutcome::new("twirl");
    out.passed = max_norm < TWIRL_TOL && control_norm > 1.0;
    out.details.push(format!(
        "{instances} distinct-pair instances on {qubits} qubit(s) ({order} group \
         elements): max Frobenius norm {max_norm:.3e} (tolerance {TWIRL_TOL:.0e})"
    ));
    out.details.push(format!(
        "equal-pair control: Frobenius norm {control_norm:.3} (must exceed 1)"
    ));
    out.metrics.insert("instances".into(), instances as f64);
    out.metrics.insert("qubits".into(), qubits as f64);
    out.metrics.insert("group_order".into(), order as f64);
    out.metrics.insert("max_frobenius_norm".into(), max_norm);
    out.metrics.insert("control_frobenius_norm".into(), control_norm);
    Ok(out)
}

// ---------------------------------------------------------------------------
// gl
// ---------------------------------------------------------------------------

fn gl_check(opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let bits = opts.bits;
    if !(1..=4).contains(&bits) {
        return Err(bad("extractor index widths above 4 bits are not desk-scale"));
    }
    let instances = opts.instances.unwrap_or(50);
    if instances == 0 || instances >= 1 << 31 {
        return Err(bad("instance count must be positive and below 2^31"));
    }
    let runs = opts.runs.unwrap_or(10_000);
    if runs == 0 || runs >= 1 << 32 {
        return Err(bad("run count must be positive and below 2^32"));
    }

    let mut max_dev = 0.0f64;
    let mut worst = (0u64, 0usize, 0.0f64, 0.0f64);
    for i in 0..instances {
        let mut rng = stream_rng(opts.seed, i << 32);
        let m = 1 + (i as usize % bits);
        let fam_a = SampledFamily::random(m, 1, &mut rng);
        let fam_b = SampledFamily::random(m, 1, &mut rng);
        let psi = random_state(2, &mut rng);
        let x = BitVector::random(m, &mut rng);
        let formula = gl_success_formula(&fam_a, &[0], &fam_b, &[1], &psi, &x)?;

        let hits: u64 = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(opts.seed, (i << 32) | (r + 1));
                let mut state = psi.clone();
                let got_a = gl_extract(&fam_a, &mut state, &[0], &mut rng)?;
                let got_b = gl_extract(&fam_b, &mut state, &[1], &mut rng)?;
                Ok(u64::from(got_a == x && got_b == x))
            })
            .sum::<Result<u64, GlError>>()?;
        let empirical = hits as f64 / runs as f64;
        let sigma = (formula * (1.0 - formula) / runs as f64).sqrt() + 1e-9;
        let dev = (empirical - formula).abs() / sigma;
        if dev > max_dev {
            max_dev = dev;
            worst = (i, m, formula, empirical);
        }
    }

    let mut out = CheckOutcome::new("gl");
    out.passed = max_dev <= 3.0;
    out.details.push(format!(
        "{instances} instances at index widths 1..={bits}, {runs} extraction pairs \
         each: largest deviation {max_dev:.2} sigma (limit 3)"
    ));
    out.details.push(format!(
        "largest deviation at instance {} (width {}): formula {:.6}, empirical {:.6}",
        worst.0, worst.1, worst.2, worst.3
    ));
    out.metrics.insert("instances".into(), instances as f64);
    out.metrics.insert("runs".into(), runs as f64);
    out.metrics.insert("bits".into(), bits as f64);
    out.metrics.insert("max_sigma_deviation".into(), max_dev);
    out.metrics.insert("worst_formula".into(), worst.2);
    out.metrics.insert("worst_empirical".into(), worst.3);
    Ok(out)
}

// ---------------------------------------------------------------------------
// hybrid-decision
// ---------------------------------------------------------------------------

fn hybrid_decision_check(opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let trials = opts.trials.unwrap_or(100);
    if trials == 0 {
        return Err(bad("at least one trial per hybrid stage is required"));
    }
    let cfg = HybridConfig {
        trials,
        master_seed: opts.seed,
        prf_input_len: 8,
        prf_output_len: 8,
    };
    let expected_audits = 3 * trials;

    let mut out = CheckOutcome::new("hybrid-decision");
    out.passed = true;
    out.metrics.insert("trials".into(), trials as f64);
    out.metrics.insert("expected_audits".into(), expected_audits as f64);

    let chains: [(&str, Arc<dyn crate::games::Adversary>); 2] = [
        ("guess", builtin_adversary("random_guess")?),
        ("pirate", Arc::new(AliasingPirate)),
    ];
    for (tag, adv) in chains {
        let report = match hybrid_chain_decision(&cfg, adv) {
            Ok(report) => report,
            Err(GameError::EquivalenceFailure { stage, witness }) => {
                out.passed = false;
                out.details.push(format!(
                    "{tag} chain: program pair for {stage} differs at input {witness}"
                ));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if report.equiv_audits != expected_audits {
            out.passed = false;
        }
        let rates: Vec<String> = report
            .stages
            .iter()
            .map(|stage| format!("{:.3}", stage.win_rate))
            .collect();
        out.details.push(format!(
            "{tag} chain: {} exhaustive audits, stage rates {}, terminal {:.3}",
            report.equiv_audits,
            rates.join(" "),
            report.terminal.win_rate
        ));
        for stage in &report.stages {
            out.metrics.insert(format!("{tag}_{}", stage.game), stage.win_rate);
        }
        out.metrics.insert(format!("{tag}_terminal"), report.terminal.win_rate);
        out.metrics.insert(format!("{tag}_audits"), report.equiv_audits as f64);
        if tag == "pirate" {
            // The substitutions are function-preserving, so a strategy that
            // wins by honestly evaluating the programs must keep winning.
            let floor = report
                .stages
                .iter()
                .map(|s| s.win_rate)
                .chain([report.terminal.win_rate])
                .fold(1.0f64, f64::min);
            out.metrics.insert("pirate_floor".into(), floor);
            if floor < 0.9 {
                out.passed = false;
                out.details.push(format!(
                    "pirate rate dropped to {floor:.3} across the chain (floor 0.9)"
                ));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// otp-correctness
// ---------------------------------------------------------------------------

fn otp_correctness_check(opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let instances = opts.instances.unwrap_or(100);
    if instances == 0 {
        return Err(bad("at least one instance is required"));
    }

    let tallies: Vec<(u64, u64)> = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64), CheckError> {
            let mut rng = stream_rng(opts.seed, i);
            // Alternate between a padded single-bit table and an unpadded
            // two-bit table; both sit well inside the register cap.
            let (in_len, pad_len) = if i % 2 == 0 { (1, 1) } else { (2, 0) };
            let rows: Vec<u64> =
                (0..1u64 << in_len).map(|_| rng.gen_range(0..2)).collect();
            let table = TableProgram::from_fn(in_len, 1, |x| {
                BitVector::from_index(1, rows[x.to_index() as usize])
            });
            let imp = QuantumImplementation::densify(&table, &mut rng)?;
            let artifact = clifford_otp_obfuscate(&imp, pad_len, &mut rng)?;
            let mut evaluations = 0;
            let mut mismatches = 0;
            // Two passes over the domain: the second detects demolition.
            for _ in 0..2 {
                for x in full_domain(in_len) {
                    let got = artifact.evaluate(&x, &mut rng)?;
                    let want = table.eval(&x, &mut rng);
                    evaluations += 1;
                    if Some(&got) != want.bits() {
                        mismatches += 1;
                    }
                }
            }
            Ok((evaluations, mismatches))
        })
        .collect::<Result<_, _>>()?;
    let evaluations: u64 = tallies.iter().map(|t| t.0).sum();
    let mismatches: u64 = tallies.iter().map(|t| t.1).sum();

    let mut out = CheckOutcome::new("otp-correctness");
    out.passed = mismatches == 0;
    out.details.push(format!(
        "{instances} obfuscated tables, {evaluations} full-domain evaluations \
         (two passes each): {mismatches} mismatches"
    ));
    out.metrics.insert("instances".into(), instances as f64);
    out.metrics.insert("evaluations".into(), evaluations as f64);
    out.metrics.insert("mismatches".into(), mismatches as f64);
    Ok(out)
}

// ---------------------------------------------------------------------------
// purified-gap
// ---------------------------------------------------------------------------

fn purified_gap_check(opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let queries = opts.queries;
    if !(1..=4).contains(&queries) {
        return Err(bad("query counts above 4 are not desk-scale"));
    }
    let instances = opts.instances.unwrap_or(25);
    if instances == 0 {
        return Err(bad("at least one instance is required"));
    }

    // A query-free or query-ignoring adversary sees identical oracles.
    let identity = gates::identity(8);
    let mut identity_max = purified_hybrid_gap(0, &identity, false)?;
    for q in 1..=queries {
        for b in [false, true] {
            identity_max = identity_max.max(purified_hybrid_gap(q, &identity, b)?);
        }
    }

    let mut cases = Vec::new();
    for q in 1..=queries {
        for i in 0..instances {
            let mut rng = stream_rng(opts.seed, ((q as u64) << 32) | i);
            let adv = gates::random_unitary(8, &mut rng);
            for b in [false, true] {
                cases.push((q, b, adv.clone()));
            }
        }
    }
    let gaps: Vec<(usize, f64)> = cases
        .par_iter()
        .map(|(q, b, adv)| Ok((*q, purified_hybrid_gap(*q, adv, *b)?)))
        .collect::<Result<_, CheckError>>()?;

    let mut max_gap = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut violations = 0u64;
    for (q, gap) in gaps {
        let bound = (q * (q + 1)) as f64 * 0.5;
        max_gap = max_gap.max(gap);
        max_ratio = max_ratio.max(gap / bound);
        if gap > bound + GAP_SLACK {
            violations += 1;
        }
    }

    let mut out = CheckOutcome::new("purified-gap");
    out.passed = violations == 0 && identity_max < 1e-12;
    out.details.push(format!(
        "{} random single-query adversaries per query count up to {queries}: \
         {violations} bound violations, largest gap/bound ratio {max_ratio:.3}",
        instances
    ));
    out.details.push(format!(
        "identity adversary: largest gap {identity_max:.3e} (must vanish)"
    ));
    out.metrics.insert("queries".into(), queries as f64);
    out.metrics.insert("instances".into(), instances as f64);
    out.metrics.insert("max_gap".into(), max_gap);
    out.metrics.insert("max_gap_bound_ratio".into(), max_ratio);
    out.metrics.insert("identity_max_gap".into(), identity_max);
    out.metrics.insert("violations".into(), violations as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(check: &str) -> CheckOptions {
        let mut opts = CheckOptions::default();
        match check {
            "twirl" => opts.instances = Some(8),
            "gl" => {
                opts.bits = 2;
                opts.instances = Some(4);
                opts.runs = Some(1000);
            }
            "hybrid-decision" => opts.trials = Some(12),
            "otp-correctness" => opts.instances = Some(6),
            "purified-gap" => {
                opts.queries = 2;
                opts.instances = Some(3);
            }
            _ => unreachable!(),
        }
        opts
    }

    #[test]
    fn every_registered_check_passes_at_smoke_scale() {
        for name in CHECK_NAMES {
            let outcome = run_check(name, &small(name)).expect(name);
            assert!(outcome.passed, "{name} failed: {:?}", outcome.details);
            assert_eq!(outcome.check, name);
            assert!(!outcome.details.is_empty());
        }
    }

    #[test]
    fn unknown_names_and_bad_parameters_are_rejected() {
        assert!(matches!(
            run_check("entropy", &CheckOptions::default()),
            Err(CheckError::UnknownCheck { .. })
        ));
        let mut opts = CheckOptions::default();
        opts.qubits = 3;
        assert!(matches!(run_check("twirl", &opts), Err(CheckError::BadParams { .. })));
        let mut opts = CheckOptions::default();
        opts.queries = 9;
        assert!(matches!(
            run_check("purified-gap", &opts),
            Err(CheckError::BadParams { .. })
        ));
        let mut opts = small("gl");
        opts.bits = 0;
        assert!(matches!(run_check("gl", &opts), Err(CheckError::BadParams { .. })));
    }

    #[test]
    fn reruns_with_one_seed_report_identical_findings() {
        for name in ["twirl", "gl"] {
            let first = run_check(name, &small(name)).unwrap();
            let second = run_check(name, &small(name)).unwrap();
            assert!(first.same_findings(&second), "{name} drifted across reruns");
        }
    }

    #[test]
    fn seeds_steer_the_sampled_instances() {
        let base = run_check("gl", &small("gl")).unwrap();
        let mut opts = small("gl");
        opts.seed = 8;
        let moved = run_check("gl", &opts).unwrap();
        assert_ne!(
            base.metrics["worst_formula"], moved.metrics["worst_formula"],
            "different seeds should sample different instances"
        );
    }
}

