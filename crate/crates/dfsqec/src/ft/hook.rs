//! Flag lookup table: corrections for ancilla-borne faults caught by flags.
//!
//! A fault on a syndrome ancilla mid-ladder propagates onto the data qubits
//! it has yet to couple to. The flag windows are placed so every such fault
//! with a weight->1 residual fires a flag; the table maps what the flags and
//! the follow-up unflagged extraction report to the exact residual.
//!
//! [`build_hook_table`] fills the table by exhaustive single-fault
//! enumeration over the flagged circuits: every Pauli after every gate and
//! preparation (including mixed data-ancilla pairs on two-qubit gates) and
//! every measurement flip is propagated symbolically to the end of the
//! circuit. Faults that fire no flag are the graph decoder's problem; each
//! flagged fault contributes an entry keyed by its flag pattern and the true
//! syndrome of its data residual, valued by the lightest stabilizer-
//! equivalent representative. A key collision between logically inequivalent
//! residuals means the flag scheme failed and construction aborts.

use crate::circuit::{Circuit, Instruction};
use crate::codes::{CodeError, CodeSpec};
use crate::ft::se::{SeCircuits, N_DATA};
use crate::pauli::{Axis, PauliError, PauliString};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HookError {
    #[error(
        "conflict at round {round} flags {flags:03b} r {r:05b} s {s:04b}: \
         {existing} and {new} differ logically"
    )]
    Conflict { round: u8, flags: u8, r: u8, s: u8, existing: String, new: String },
    #[error("flagged circuit contains {0}, which the fault propagator does not model")]
    Unsupported(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HookKey {
    /// Flagged round the flags fired in (1 or 2).
    pub round: u8,
    /// f1..f3, bit 0 = f1.
    pub flags: u8,
    /// Unflagged pair checks r0..r4 measured after the flags fired.
    pub r: u8,
    /// Unflagged s0..s3.
    pub s: u8,
}

/// Keyed corrections for flagged faults. Inserts are conflict-checked: two
/// faults may share a key only when their residuals act identically on the
/// code space.
#[derive(Debug, Clone, Default)]
pub struct HookTable {
    entries: HashMap<HookKey, PauliString>,
}

impl HookTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records `correction` under `key`, keeping the lighter representative
    /// when a logically equivalent entry exists.
    pub fn insert(
        &mut self,
        code: &CodeSpec,
        key: HookKey,
        correction: PauliString,
    ) -> Result<(), HookError> {
        match self.entries.get_mut(&key) {
            None => {
                self.entries.insert(key, correction);
                Ok(())
            }
            Some(existing) => {
                if !code.logically_equivalent(existing, &correction)? {
                    return Err(HookError::Conflict {
                        round: key.round,
                        flags: key.flags,
                        r: key.r,
                        s: key.s,
                        existing: existing.to_string(),
                        new: correction.to_string(),
                    });
                }
                if correction.weight() < existing.weight() {
                    *existing = correction;
                }
                Ok(())
            }
        }
    }

    pub fn lookup(&self, round: u8, flags: u8, r: u8, s: u8) -> Option<&PauliString> {
        self.entries.get(&HookKey { round, flags, r, s })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HookKey, &PauliString)> {
        self.entries.iter()
    }
}

/// A Pauli error frame over the circuit's qubit register plus the
/// measurement-report flips it has caused so far.
#[derive(Debug, Clone, Default)]
struct FaultFrame {
    x: u64,
    z: u64,
    /// Flipped report bits as (register name, bit index).
    flips: Vec<(&'static str, usize)>,
}

impl FaultFrame {
    fn seed1(q: usize, axis: Axis) -> Self {
        let (x, z) = axis.xz();
        Self { x: (x as u64) << q, z: (z as u64) << q, flips: Vec::new() }
    }

    fn seed2(a: usize, pa: Option<Axis>, b: usize, pb: Option<Axis>) -> Self {
        let mut f = Self::default();
        if let Some(p) = pa {
            let (x, z) = p.xz();
            f.x |= (x as u64) << a;
            f.z |= (z as u64) << a;
        }
        if let Some(p) = pb {
            let (x, z) = p.xz();
            f.x |= (x as u64) << b;
            f.z |= (z as u64) << b;
        }
        f
    }

    fn bit(&self, mask: u64, q: usize) -> bool {
        mask >> q & 1 != 0
    }

    fn swap_xz(&mut self, q: usize) {
        let (xb, zb) = (self.bit(self.x, q), self.bit(self.z, q));
        self.x = self.x & !(1 << q) | (zb as u64) << q;
        self.z = self.z & !(1 << q) | (xb as u64) << q;
    }

    /// S and S-dagger conjugate X to +/-Y; the sign never matters here.
    fn s_gate(&mut self, q: usize) {
        self.z ^= self.x & 1 << q;
    }

    fn cnot(&mut self, c: usize, t: usize) {
        if self.bit(self.x, c) {
            self.x ^= 1 << t;
        }
        if self.bit(self.z, t) {
            self.z ^= 1 << c;
        }
    }

    fn clear(&mut self, q: usize) {
        self.x &= !(1 << q);
        self.z &= !(1 << q);
    }

    fn record(&mut self, reg: &'static str, bit: usize, flip: bool) {
        if flip {
            self.flips.push((reg, bit));
        }
    }

    /// Conjugate the frame through one instruction, recording report flips.
    fn step(&mut self, instr: &Instruction) -> Result<(), HookError> {
        match instr {
            Instruction::H(q) => self.swap_xz(*q),
            Instruction::S(q) | Instruction::Sdg(q) => self.s_gate(*q),
            Instruction::X(_) | Instruction::Y(_) | Instruction::Z(_) | Instruction::Barrier => {}
            Instruction::Cnot { control, target } => self.cnot(*control, *target),
            Instruction::Cz { a, b } => {
                if self.bit(self.x, *a) {
                    self.z ^= 1 << *b;
                }
                if self.bit(self.x, *b) {
                    self.z ^= 1 << *a;
                }
            }
            Instruction::ControlledPauli { control, control_basis, target, target_pauli } => {
                // Same decomposition the engines use: rotate control basis to
                // Z and target Pauli to X around a CNOT.
                let (c, t) = (*control, *target);
                match control_basis {
                    Axis::Z => {}
                    Axis::X => self.swap_xz(c),
                    Axis::Y => {
                        self.s_gate(c);
                        self.swap_xz(c);
                    }
                }
                match target_pauli {
                    Axis::X => {}
                    Axis::Y => self.s_gate(t),
                    Axis::Z => self.swap_xz(t),
                }
                self.cnot(c, t);
                match target_pauli {
                    Axis::X => {}
                    Axis::Y => self.s_gate(t),
                    Axis::Z => self.swap_xz(t),
                }
                match control_basis {
                    Axis::Z => {}
                    Axis::X => self.swap_xz(c),
                    Axis::Y => {
                        self.swap_xz(c);
                        self.s_gate(c);
                    }
                }
            }
            Instruction::PrepareZ(q) | Instruction::Reset(q) => self.clear(*q),
            Instruction::MeasureZ { q, out } => {
                self.record(leak_static(&out.reg)?, out.bit, self.bit(self.x, *q));
                self.clear(*q);
            }
            Instruction::MeasureX { q, out } => {
                self.record(leak_static(&out.reg)?, out.bit, self.bit(self.z, *q));
                self.clear(*q);
            }
            Instruction::MeasureY { q, out } => {
                let flip = self.bit(self.x, *q) ^ self.bit(self.z, *q);
                self.record(leak_static(&out.reg)?, out.bit, flip);
                self.clear(*q);
            }
            other @ (Instruction::Rz { .. }
            | Instruction::LeakageDetect { .. }
            | Instruction::Idle { .. }
            | Instruction::Conditional { .. }) => {
                return Err(HookError::Unsupported(other.to_string()));
            }
        }
        Ok(())
    }
}

/// The flagged circuits only write `s_raw` and `flags`; map to static names
/// so frames need no owned strings.
fn leak_static(reg: &str) -> Result<&'static str, HookError> {
    match reg {
        "s_raw" => Ok("s_raw"),
        "flags" => Ok("flags"),
        other => Err(HookError::Unsupported(format!("register {other}"))),
    }
}

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

/// Every single-fault frame a circuit site can seed, paired with the index of
/// the first instruction it propagates through.
fn fault_seeds(circuit: &Circuit) -> Vec<(FaultFrame, usize)> {
    let mut seeds = Vec::new();
    for (i, instr) in circuit.instructions.iter().enumerate() {
        match instr {
            Instruction::H(q)
            | Instruction::S(q)
            | Instruction::Sdg(q)
            | Instruction::X(q)
            | Instruction::Y(q)
            | Instruction::Z(q)
            | Instruction::PrepareZ(q)
            | Instruction::Reset(q) => {
                for axis in AXES {
                    seeds.push((FaultFrame::seed1(*q, axis), i + 1));
                }
            }
            Instruction::Cnot { control: a, target: b }
            | Instruction::Cz { a, b }
            | Instruction::ControlledPauli { control: a, target: b, .. } => {
                for pa in [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)] {
                    for pb in [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)] {
                        if pa.is_none() && pb.is_none() {
                            continue;
                        }
                        seeds.push((FaultFrame::seed2(*a, pa, *b, pb), i + 1));
                    }
                }
            }
            Instruction::MeasureZ { out, .. }
            | Instruction::MeasureX { out, .. }
            | Instruction::MeasureY { out, .. } => {
                // A classical report flip: seed an empty frame past the
                // measurement and flip its bit directly.
                let mut frame = FaultFrame::default();
                if let Ok(reg) = leak_static(&out.reg) {
                    frame.flips.push((reg, out.bit));
                }
                seeds.push((frame, i + 1));
            }
            Instruction::Barrier
            | Instruction::Rz { .. }
            | Instruction::LeakageDetect { .. }
            | Instruction::Idle { .. }
            | Instruction::Conditional { .. } => {}
        }
    }
    seeds
}

/// Reduce `error` to its lightest representative modulo the full stabilizer
/// group (deterministic: first minimum in subset order).
fn min_weight_rep(code: &CodeSpec, error: &PauliString) -> Result<PauliString, HookError> {
    let mut best = error.unsigned();
    for mask in 1u32..1 << code.generators.len() {
        let mut p = error.clone();
        for (g, generator) in code.generators.iter().enumerate() {
            if mask >> g & 1 != 0 {
                p = p.multiply(generator)?;
            }
        }
        if p.weight() < best.weight() {
            best = p.unsigned();
        }
    }
    Ok(best)
}

/// Enumerate every single fault in both flagged rounds and collect the
/// corrections for all flag-firing faults, conflict-checking throughout.
pub fn build_hook_table(se: &SeCircuits, code: &CodeSpec) -> Result<HookTable, HookError> {
    let mut table = HookTable::new();
    for (round_idx, circuit) in se.flagged.iter().enumerate() {
        let round = round_idx as u8 + 1;
        for (mut frame, start) in fault_seeds(circuit) {
            for instr in &circuit.instructions[start..] {
                frame.step(instr)?;
            }
            let mut flags = 0u8;
            for &(reg, bit) in &frame.flips {
                if reg == "flags" {
                    flags ^= 1 << bit;
                }
            }
            if flags == 0 {
                continue;
            }
            let data_mask = (1u64 << N_DATA) - 1;
            debug_assert_eq!(
                (frame.x | frame.z) & !data_mask,
                0,
                "every ancilla is measured, clearing its frame"
            );
            let residual = PauliString::from_bits(N_DATA, frame.x & data_mask, frame.z & data_mask)?;
            let syndrome = code.syndrome(&residual)?.bits();
            let key = HookKey {
                round,
                flags,
                r: (syndrome & 0x1f) as u8,
                s: (syndrome >> 5 & 0xf) as u8,
            };
            let correction = min_weight_rep(code, &residual)?;
            table.insert(code, key, correction)?;
        }
    }
    Ok(table)
}
