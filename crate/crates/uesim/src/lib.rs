//! A desk-scale simulation laboratory for unclonable encryption and opaque
//! quantum programs.
//!
//! The crate provides exact, seeded, small-dimension implementations of the
//! pieces that make up this corner of quantum cryptography:
//!
//! - [`f2`]: packed linear algebra over GF(2), including the constrained
//!   matrix sampling the coupled encryption scheme relies on;
//! - [`qsim`]: a dense statevector simulator with Pauli and Clifford
//!   machinery (uniform tableau sampling, conjugation, densification,
//!   exhaustive group enumeration at one and two qubits);
//! - [`bb84`]: conjugate coding of classical strings into qubits and
//!   non-demolition decoding;
//! - [`crypto`]: the bit-level PRG, GGM-style puncturable PRF, and the
//!   parameter arithmetic shared by the schemes;
//! - [`unclonable`]: the unclonable-encryption candidates, the coupled
//!   two-key scheme, and the key-testing compiler;
//! - [`programs`]: classical program descriptors (plain, point, patched,
//!   search-patched, coset point) evaluated behind opaque wrappers;
//! - [`opaque`]: evaluation-only program wrappers, the Clifford one-time-pad
//!   obfuscator, and the purified two-oracle hybrid used to audit it;
//! - [`gl`]: Goldreich-Levin coherent extraction and the simultaneous
//!   version's success formula;
//! - [`games`]: the security-game harness, builtin pirate strategies, and
//!   the reduction wrappers that translate adversaries between games;
//! - [`checks`]: named, seeded verification routines shared by the CLI and
//!   the acceptance suite.
//!
//! Everything is deterministic under a caller-supplied seed; Monte Carlo
//! tallies are reproducible bit-for-bit.

pub mod bb84;
pub mod checks;
pub mod crypto;
pub mod f2;
pub mod games;
pub mod gl;
pub mod opaque;
pub mod programs;
pub mod unclonable;
pub mod qsim;
