//! Logical state preparation by measure-and-fix.
//!
//! Starting from |0...0>, each check is read out through an ancilla ladder
//! and, when the outcome lands in the wrong eigenspace, flipped into place by
//! a precomputed fixup Pauli — one that anticommutes with the check just
//! measured and commutes with every other check, so earlier fixes survive.
//! The fixups come from a GF(2) symplectic solve. The logical operator is
//! measured last and fixed with the anticommuting partner logical.
//!
//! Three states are prepared natively (Z at +1, X at -1, Y at -1); the
//! orthogonal partners reuse the same circuit followed by a transversal
//! logical Pauli. Preparation is not fault tolerant — it is the experiment's
//! t=0 reference, and the memory protocol assumes a clean start.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::{BitRef, Circuit, CircuitError, Condition, Instruction};
use crate::codes::{CodeError, CodeSpec};
use crate::pauli::{Axis, PauliError, PauliString};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EncodeError {
    #[error("checks are not independent; no fixup basis exists")]
    DegenerateChecks,
    #[error("code has no logical operator for axis {0}")]
    MissingLogical(Axis),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// The six logical eigenstates, by logical basis and eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum LogicalState {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl LogicalState {
    pub const ALL: [LogicalState; 6] = [
        LogicalState::Zero,
        LogicalState::One,
        LogicalState::Plus,
        LogicalState::Minus,
        LogicalState::PlusI,
        LogicalState::MinusI,
    ];

    /// The logical operator this state is an eigenstate of.
    pub fn basis(self) -> Axis {
        match self {
            LogicalState::Zero | LogicalState::One => Axis::Z,
            LogicalState::Plus | LogicalState::Minus => Axis::X,
            LogicalState::PlusI | LogicalState::MinusI => Axis::Y,
        }
    }

    /// The eigenvalue, +1 or -1.
    pub fn sign(self) -> i8 {
        match self {
            LogicalState::Zero | LogicalState::Plus | LogicalState::PlusI => 1,
            _ => -1,
        }
    }

    /// The opposite eigenstate in the same basis.
    pub fn orthogonal(self) -> Self {
        match self {
            LogicalState::Zero => LogicalState::One,
            LogicalState::One => LogicalState::Zero,
            LogicalState::Plus => LogicalState::Minus,
            LogicalState::Minus => LogicalState::Plus,
            LogicalState::PlusI => LogicalState::MinusI,
            LogicalState::MinusI => LogicalState::PlusI,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LogicalState::Zero => "0",
            LogicalState::One => "1",
            LogicalState::Plus => "+",
            LogicalState::Minus => "-",
            LogicalState::PlusI => "+i",
            LogicalState::MinusI => "-i",
        }
    }

    /// The natively prepared eigenvalue for each basis; the partner state
    /// needs a trailing logical Pauli.
    fn native_sign(basis: Axis) -> i8 {
        match basis {
            Axis::Z => 1,
            Axis::X | Axis::Y => -1,
        }
    }
}

impl fmt::Display for LogicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LogicalState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0" => Ok(LogicalState::Zero),
            "1" => Ok(LogicalState::One),
            "+" => Ok(LogicalState::Plus),
            "-" => Ok(LogicalState::Minus),
            "+i" | "i+" => Ok(LogicalState::PlusI),
            "-i" | "i-" => Ok(LogicalState::MinusI),
            other => Err(format!("unknown logical state {other:?} (want 0 1 + - +i -i)")),
        }
    }
}

/// Fixup Paulis for a commuting independent check set: `fixups[k]`
/// anticommutes with `checks[k]` and commutes with every other check.
pub fn solve_fixups(n: usize, checks: &[PauliString]) -> Result<Vec<PauliString>, EncodeError> {
    let m = checks.len();
    assert!(2 * n <= 64 && m <= 32, "solver sized for small codes");
    // Unknown v packs (x_bits | z_bits << n); constraint row for check O is
    // (z_O | x_O << n) so that row . v = <P, O> symplectically.
    let mut rows: Vec<(u64, u32)> = checks
        .iter()
        .enumerate()
        .map(|(j, o)| (o.z_bits() | o.x_bits() << n, 1u32 << j))
        .collect();
    let mut pivots = Vec::with_capacity(m);
    let mut done = 0;
    for col in 0..2 * n {
        let Some(row) = (done..m).find(|&i| rows[i].0 >> col & 1 != 0) else {
            continue;
        };
        rows.swap(done, row);
        let (lead, aug) = rows[done];
        for (i, r) in rows.iter_mut().enumerate() {
            if i != done && r.0 >> col & 1 != 0 {
                r.0 ^= lead;
                r.1 ^= aug;
            }
        }
        pivots.push(col);
        done += 1;
        if done == m {
            break;
        }
    }
    if done < m {
        return Err(EncodeError::DegenerateChecks);
    }
    let mut fixups = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = 0u64;
        for (i, &p) in pivots.iter().enumerate() {
            if rows[i].1 >> k & 1 != 0 {
                v |= 1 << p;
            }
        }
        let mask = (1u64 << n) - 1;
        fixups.push(PauliString::from_bits(n, v & mask, v >> n)?);
    }
    Ok(fixups)
}

/// Builds preparation circuits for one code. Circuits span `code.n + 1`
/// qubits: the data block plus one reused ancilla.
#[derive(Debug, Clone)]
pub struct Encoder {
    code: CodeSpec,
    fixups: Vec<PauliString>,
}

impl Encoder {
    pub fn new(code: &CodeSpec) -> Result<Self, EncodeError> {
        let fixups = solve_fixups(code.n, &code.generators)?;
        Ok(Self { code: code.clone(), fixups })
    }

    fn logical(&self, basis: Axis) -> &PauliString {
        match basis {
            Axis::X => &self.code.logical_x,
            Axis::Y => &self.code.logical_y,
            Axis::Z => &self.code.logical_z,
        }
    }

    /// The preparation circuit for one logical eigenstate. Register `init`
    /// holds the raw check outcomes (one bit per check, logical last).
    pub fn circuit(&self, state: LogicalState) -> Result<Circuit, EncodeError> {
        let n = self.code.n;
        let ancilla = n;
        let mut c = Circuit::new(n + 1);
        let n_checks = self.code.generators.len();
        c.declare_register("init", n_checks + 1)?;

        for (k, (check, fixup)) in self.code.generators.iter().zip(&self.fixups).enumerate() {
            // The ladder reads the unsigned operator; a signed check flips
            // the target bit (+1 for every stabilizer).
            let target = check.sign()? < 0;
            push_measure_fix(&mut c, check, fixup, ancilla, k, target)?;
        }

        let basis = state.basis();
        let logical = self.logical(basis).clone();
        let native = LogicalState::native_sign(basis);
        let target = logical.sign()? * native < 0;
        let partner = match basis {
            Axis::Z => self.logical(Axis::X).clone(),
            Axis::X | Axis::Y => self.logical(Axis::Z).clone(),
        };
        push_measure_fix(&mut c, &logical, &partner, ancilla, n_checks, target)?;

        if state.sign() != native {
            // The orthogonal partner: apply the anticommuting logical.
            for q in 0..n {
                if let Some(axis) = partner.axis(q) {
                    c.push(pauli_instruction(q, axis));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn pauli_instruction(q: usize, axis: Axis) -> Instruction {
    match axis {
        Axis::X => Instruction::X(q),
        Axis::Y => Instruction::Y(q),
        Axis::Z => Instruction::Z(q),
    }
}

/// One ancilla-ladder readout of `op` into `init[k]`, followed by per-letter
/// fixup gates conditioned on the outcome missing `target`.
fn push_measure_fix(
    c: &mut Circuit,
    op: &PauliString,
    fixup: &PauliString,
    ancilla: usize,
    k: usize,
    target: bool,
) -> Result<(), EncodeError> {
    c.push(Instruction::PrepareZ(ancilla));
    for q in 0..op.num_qubits() {
        if let Some(axis) = op.axis(q) {
            c.push(Instruction::ControlledPauli {
                control: q,
                control_basis: axis,
                target: ancilla,
                target_pauli: Axis::X,
            });
        }
    }
    let out = BitRef { reg: "init".into(), bit: k };
    c.push(Instruction::MeasureZ { q: ancilla, out: out.clone() });
    for q in 0..fixup.num_qubits() {
        if let Some(axis) = fixup.axis(q) {
            c.push(Instruction::Conditional {
                cond: Condition { bit: out.clone(), value: !target },
                body: Box::new(pauli_instruction(q, axis)),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::codes::build_1014;
    use crate::engine::{CliffordEngine, Engine, Executor, NoNoise, StatevectorEngine};

    use super::*;

    #[test]
    fn fixups_pair_off_against_their_checks() {
        let code = build_1014();
        let fixups = solve_fixups(code.n, &code.generators).unwrap();
        for (k, fixup) in fixups.iter().enumerate() {
            for (j, check) in code.generators.iter().enumerate() {
                let anti = !fixup.commutes(check).unwrap();
                assert_eq!(anti, j == k, "fixup {k} vs check {j}");
            }
        }
    }

    fn assert_expect<E: Engine>(engine: &E, op: &PauliString, want: f64, ctx: &dyn fmt::Display) {
        let val = engine.expectation(&op.embedded(11).unwrap()).unwrap();
        let val = val.unwrap_or_else(|| panic!("{ctx}: {op} not determined"));
        assert!((val - want).abs() < 1e-9, "{ctx}: {op} gave {val}, want {want}");
    }

    fn assert_prepared<E: Engine>(engine: &E, code: &CodeSpec, state: LogicalState) {
        for check in &code.generators {
            assert_expect(engine, check, 1.0, &state);
        }
        let logical = match state.basis() {
            Axis::X => &code.logical_x,
            Axis::Y => &code.logical_y,
            Axis::Z => &code.logical_z,
        };
        assert_expect(engine, logical, state.sign() as f64, &state);
    }

    #[test]
    fn all_six_states_come_out_stabilized_on_the_tableau() {
        let code = build_1014();
        let encoder = Encoder::new(&code).unwrap();
        for state in LogicalState::ALL {
            let circuit = encoder.circuit(state).unwrap();
            for seed in 0..5 {
                let mut engine = CliffordEngine::new(11).unwrap();
                let mut noise = NoNoise;
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                Executor::new(&mut engine, &mut noise, &mut rng).run(&circuit).unwrap();
                assert_prepared(&engine, &code, state);
            }
        }
    }

    #[test]
    fn statevector_engine_agrees_on_preparation() {
        let code = build_1014();
        let encoder = Encoder::new(&code).unwrap();
        for state in LogicalState::ALL {
            let circuit = encoder.circuit(state).unwrap();
            let mut engine = StatevectorEngine::new(11).unwrap();
            let mut noise = NoNoise;
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            Executor::new(&mut engine, &mut noise, &mut rng).run(&circuit).unwrap();
            assert_prepared(&engine, &code, state);
        }
    }

    #[test]
    fn state_labels_round_trip() {
        for state in LogicalState::ALL {
            assert_eq!(state.label().parse::<LogicalState>().unwrap(), state);
        }
        assert!("q".parse::<LogicalState>().is_err());
    }
}
