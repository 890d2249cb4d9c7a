//! The adaptive error-correction cycle.
//!
//! One cycle walks a fixed escalation ladder, spending ancillas only when
//! something already looks wrong:
//!
//! 1. leakage check on all data qubits (reported leaks are reset in place),
//! 2. the five pair checks — any hit escalates straight to re-extraction,
//! 3. otherwise flagged round 1 (s0, s1), then flagged round 2 (s2, s3) —
//!    a syndrome or flag hit escalates and later rounds are skipped,
//! 4. on escalation, one full unflagged pass (pair checks again plus all four
//!    s ladders) replaces the trigger's readings; its syndromes, with any
//!    flags from the trigger round, form the record handed to the decoder.
//!
//! A clean cycle therefore costs two flagged rounds (five ancillas each) and
//! measures no s check twice, while a triggered cycle pays for the full
//! nine-check readout (eight distinct ancillas). Decoder corrections are
//! applied as noiseless frame updates — bookkeeping, not physical gates.
//!
//! Stages run as separate circuits with classical control between them; a
//! shared executor keeps one fault-site stream and one reported-bit trace
//! across the whole cycle.

use rand::RngCore;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Instruction};
use crate::codes::CodeSpec;
use crate::engine::{Engine, ExecError, Executor, FaultInjector};
use crate::ft::decoder::{DecodeMode, DecodeOutcome, Decoder, DecoderError, SyndromeRecord};
use crate::ft::hook::{build_hook_table, HookError};
use crate::ft::se::{synthesize_se_circuits, SeCircuits, SeError, N_DATA, N_QUBITS};

#[derive(Error, Debug)]
pub enum CycleError {
    #[error(transparent)]
    Se(#[from] SeError),
    #[error(transparent)]
    Hook(#[from] HookError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("stage left no register named {0}")]
    MissingRegister(String),
}

/// Which stage escalated the cycle into the full unflagged readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// One of the five pair checks fired.
    PairCheck,
    /// Flagged round 1 or 2 saw a syndrome bit or a flag.
    FlaggedRound(u8),
}

/// What one cycle measured and decided.
#[derive(Debug, Clone)]
pub struct CycleReport {
    pub record: SyndromeRecord,
    pub outcome: DecodeOutcome,
    pub trigger: Option<Trigger>,
    /// Flagged rounds actually executed (0 when the pair checks escalated).
    pub flagged_rounds_run: u8,
    /// A nontrivial correction was applied to the state.
    pub corrected: bool,
}

/// Synthesized circuits and decoder for running cycles on a 20-qubit engine.
pub struct CycleDriver {
    se: SeCircuits,
    decoder: Decoder,
    leakage: Circuit,
}

/// An idle window of `duration` seconds on the data block; the noise model
/// attaches dephasing, depolarizing, and leakage here.
pub fn data_idle(duration: f64) -> Circuit {
    let mut c = Circuit::new(N_QUBITS);
    c.push(Instruction::Idle { qubits: (0..N_DATA).collect(), duration });
    c
}

fn reg<'f>(
    file: &'f std::collections::BTreeMap<String, Vec<bool>>,
    name: &str,
) -> Result<&'f Vec<bool>, CycleError> {
    file.get(name).ok_or_else(|| CycleError::MissingRegister(name.to_string()))
}

fn mask(bits: &[bool]) -> u16 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u16::from(b) << i))
}

impl CycleDriver {
    pub fn new(code: &CodeSpec) -> Result<Self, CycleError> {
        Self::with_circuits(code, synthesize_se_circuits(code)?)
    }

    /// Build the driver around externally supplied extraction circuits (for
    /// controlled experiments on modified circuits); the hook table is
    /// rebuilt from whatever circuits are given.
    pub fn with_circuits(code: &CodeSpec, se: SeCircuits) -> Result<Self, CycleError> {
        let mut decoder = Decoder::new(code)?;
        decoder.set_hook_table(build_hook_table(&se, code)?);
        let mut leakage = Circuit::new(N_QUBITS);
        leakage.declare_register("leak", N_DATA)?;
        leakage.push(Instruction::LeakageDetect { qubits: (0..N_DATA).collect(), reg: "leak".into() });
        leakage.validate()?;
        Ok(Self { se, decoder, leakage })
    }

    pub fn circuits(&self) -> &SeCircuits {
        &self.se
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// The five pair checks; raw 1 is the quiet outcome, so r inverts.
    fn read_pair_checks<E: Engine, I: FaultInjector, R: RngCore>(
        &self,
        exec: &mut Executor<E, I, R>,
    ) -> Result<u8, CycleError> {
        let file = exec.run(&self.se.dfs_se)?;
        Ok(!(mask(reg(&file, "r_raw")?) as u8) & 0b1_1111)
    }

    /// The full re-extraction: pair checks again, then every s ladder.
    fn unflagged_pass<E: Engine, I: FaultInjector, R: RngCore>(
        &self,
        exec: &mut Executor<E, I, R>,
    ) -> Result<(u8, u8), CycleError> {
        let r = self.read_pair_checks(exec)?;
        let mut s = 0u8;
        for (j, circuit) in self.se.unflagged.iter().enumerate() {
            let file = exec.run(circuit)?;
            if reg(&file, "s_raw")?[0] {
                s |= 1 << j;
            }
        }
        Ok((r, s))
    }

    /// Run one full cycle on the executor's engine and apply the decoder's
    /// verdict. In post-selection mode a rejected record leaves the state
    /// untouched; the caller sees `outcome.rejected` and abandons the shot.
    /// Decoder tie-breaks draw from the executor's stream.
    pub fn run_cycle<E: Engine, I: FaultInjector, R: RngCore>(
        &self,
        exec: &mut Executor<E, I, R>,
        mode: DecodeMode,
    ) -> Result<CycleReport, CycleError> {
        self.run_cycle_inner(exec, mode, None)
    }

    /// [`run_cycle`](Self::run_cycle) with decoder tie-breaks drawn from a
    /// dedicated stream, so decode decisions reproduce independently of how
    /// much randomness the noise consumed.
    pub fn run_cycle_with_ties<E: Engine, I: FaultInjector, R: RngCore>(
        &self,
        exec: &mut Executor<E, I, R>,
        mode: DecodeMode,
        ties: &mut dyn RngCore,
    ) -> Result<CycleReport, CycleError> {
        self.run_cycle_inner(exec, mode, Some(ties))
    }

    fn run_cycle_inner<E: Engine, I: FaultInjector, R: RngCore>(
        &self,
        exec: &mut Executor<E, I, R>,
        mode: DecodeMode,
        ties: Option<&mut dyn RngCore>,
    ) -> Result<CycleReport, CycleError> {
        let file = exec.run(&self.leakage)?;
        let leak_detected = mask(reg(&file, "leak")?);

        let mut trigger = None;
        let mut flags = 0u8;
        let mut flag_round = 0u8;
        let mut flagged_rounds_run = 0u8;

        let r0 = self.read_pair_checks(exec)?;
        if r0 != 0 {
            trigger = Some(Trigger::PairCheck);
        } else {
            for round in 1..=2u8 {
                let file = exec.run(&self.se.flagged[round as usize - 1])?;
                flagged_rounds_run += 1;
                let s_raw = mask(reg(&file, "s_raw")?);
                let f = mask(reg(&file, "flags")?) as u8;
                if s_raw != 0 || f != 0 {
                    trigger = Some(Trigger::FlaggedRound(round));
                    if f != 0 {
                        flags = f;
                        flag_round = round;
                    }
                    break;
                }
            }
        }

        let mut record = SyndromeRecord::new(0, 0);
        record.leak_detected = leak_detected;
        if trigger.is_some() {
            let (r, s) = self.unflagged_pass(exec)?;
            record.r = r;
            record.s = s;
            record.unflagged_taken = true;
            record.flags = flags;
            record.flag_round = flag_round;
        }

        let outcome = match ties {
            Some(ties) => self.decoder.decode_full(&record, mode, ties)?,
            None => self.decoder.decode_full(&record, mode, exec.rng)?,
        };
        let mut corrected = false;
        if !outcome.rejected {
            for q in 0..N_DATA {
                if let Some(axis) = outcome.correction.axis(q) {
                    exec.engine.pauli_gate(q, axis);
                    corrected = true;
                }
            }
        }
        Ok(CycleReport { record, outcome, trigger, flagged_rounds_run, corrected })
    }
}
