//! Simulator, fault-tolerance verifier, and real-time decoder for a
//! [[10,1,4]] concatenated code: a two-qubit decoherence-free-subspace (DFS)
//! code nested inside the five-qubit code.
//!
//! The crate is organized bottom-up:
//!
//! - [`pauli`]: signed Pauli strings in symplectic bit-vector form, syndromes,
//!   and a brute-force minimum-weight oracle.
//! - [`codes`]: stabilizer code definitions ([[2,1,1]], [[5,1,3]], [[10,1,4]]),
//!   the concatenation map, and structural verification including distance by
//!   coset enumeration.
//! - [`circuit`]: a small circuit IR with a line-oriented text form.
//! - [`engine`]: two interchangeable execution engines — a stabilizer-tableau
//!   engine with Pauli-frame error tracking, and a dense state-vector engine
//!   for non-Clifford (coherent-dephasing) circuits.
//! - [`noise`]: quasi-static and fast dephasing, depolarizing gate noise,
//!   SPAM errors, and classical leakage, with named presets.
//! - [`ft`]: syndrome-extraction circuit synthesis, the cyclic matching
//!   decoder with hook-error flag tables, the adaptive QEC cycle, and the
//!   exhaustive single-fault scan.
//! - [`experiments`]: quantum-memory experiments, success metrics, and
//!   post-selection retention.
//! - [`fit`]: weighted least-squares decay-model fitting and lifetime
//!   extraction.
//! - [`config`]: key-value run configuration and the reproducibility manifest.

pub mod circuit;
pub mod codes;
pub mod config;
pub mod engine;
pub mod experiments;
pub mod fit;
pub mod ft;
pub mod noise;
pub mod pauli;

pub use codes::CodeSpec;
pub use pauli::{Axis, PauliString, SyndromeVector};
