//! Minimal gate-level circuit IR with a line-oriented text form.
//!
//! Circuits are straight-line sequences over a fixed qubit register plus
//! named classical bit registers. Adaptive control flow (the QEC cycle's
//! branching) lives at the protocol layer, which runs one circuit block at a
//! time and inspects outcomes; the IR itself only supports single-instruction
//! conditionals, used for classically controlled corrections.
//!
//! Text form, one instruction per line (`#` starts a comment):
//!
//! ```text
//! H 3
//! CNOT 0 10
//! CP X 2 X 10        # X-basis control on q2, X applied to q10
//! RZ 4 0.125
//! MZ 10 -> syn[0]
//! X 4 if syn[0]==1
//! LEAKDETECT 0 1 2 -> leak
//! IDLE 2.89 0 1 2 3
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::pauli::Axis;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {q} out of range for {n} qubits")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("gate addresses qubit {0} twice")]
    DuplicateQubit(usize),
    #[error("register {0} is not declared")]
    UnknownRegister(String),
    #[error("bit {bit} out of range for register {reg} of width {width}")]
    BitOutOfRange { reg: String, bit: usize, width: usize },
    #[error("register {0} declared twice")]
    DuplicateRegister(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Target of a measurement: one bit in a named register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRef {
    pub reg: String,
    pub bit: usize,
}

impl fmt::Display for BitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.reg, self.bit)
    }
}

/// Condition `reg[bit] == value` attached to a conditional instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub bit: BitRef,
    pub value: bool,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}=={}", self.bit, u8::from(self.value))
    }
}

/// One circuit instruction.
#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
    /// Controlled Pauli with an arbitrary control basis: in the control
    /// qubit's `control_basis` eigenbasis, the -1 eigenstate applies
    /// `target_pauli` to the target. `CP Z c X t` is CNOT; `CP Z a Z b` is CZ.
    ControlledPauli { control: usize, control_basis: Axis, target: usize, target_pauli: Axis },
    /// Z rotation by `theta` radians: diag(exp(-i theta/2), exp(+i theta/2)).
    Rz { q: usize, theta: f64 },
    /// Prepare |0> (fresh qubit at block start or mid-circuit reuse).
    PrepareZ(usize),
    /// Active reset to |0> (measure and flip), used for MCMR ancilla reuse.
    Reset(usize),
    MeasureZ { q: usize, out: BitRef },
    MeasureX { q: usize, out: BitRef },
    MeasureY { q: usize, out: BitRef },
    /// Check the listed qubits for leakage; write one bit per qubit into the
    /// register (1 = leaked) and reset any leaked qubit to |0>.
    LeakageDetect { qubits: Vec<usize>, reg: String },
    /// Idle the listed qubits for `duration` seconds (noise attaches here).
    Idle { qubits: Vec<usize>, duration: f64 },
    /// Scheduling barrier; a no-op hook.
    Barrier,
    /// Classically controlled single instruction.
    Conditional { cond: Condition, body: Box<Instruction> },
}

impl Instruction {
    /// Qubits touched by the instruction, in gate-operand order.
    pub fn qubits(&self) -> Vec<usize> {
        use Instruction::*;
        match self {
            H(q) | S(q) | Sdg(q) | X(q) | Y(q) | Z(q) | Rz { q, .. } | PrepareZ(q) | Reset(q) => vec![*q],
            MeasureZ { q, .. } | MeasureX { q, .. } | MeasureY { q, .. } => vec![*q],
            Cnot { control, target } => vec![*control, *target],
            Cz { a, b } => vec![*a, *b],
            ControlledPauli { control, target, .. } => vec![*control, *target],
            LeakageDetect { qubits, .. } | Idle { qubits, .. } => qubits.clone(),
            Barrier => vec![],
            Conditional { body, .. } => body.qubits(),
        }
    }

    fn mnemonic(&self) -> String {
        use Instruction::*;
        match self {
            H(q) => format!("H {q}"),
            S(q) => format!("S {q}"),
            Sdg(q) => format!("SDG {q}"),
            X(q) => format!("X {q}"),
            Y(q) => format!("Y {q}"),
            Z(q) => format!("Z {q}"),
            Cnot { control, target } => format!("CNOT {control} {target}"),
            Cz { a, b } => format!("CZ {a} {b}"),
            ControlledPauli { control, control_basis, target, target_pauli } => {
                format!("CP {control_basis} {control} {target_pauli} {target}")
            }
            Rz { q, theta } => format!("RZ {q} {theta}"),
            PrepareZ(q) => format!("PREP {q}"),
            Reset(q) => format!("RESET {q}"),
            MeasureZ { q, out } => format!("MZ {q} -> {out}"),
            MeasureX { q, out } => format!("MX {q} -> {out}"),
            MeasureY { q, out } => format!("MY {q} -> {out}"),
            LeakageDetect { qubits, reg } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                format!("LEAKDETECT {} -> {reg}", qs.join(" "))
            }
            Idle { qubits, duration } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                format!("IDLE {duration} {}", qs.join(" "))
            }
            Barrier => "BARRIER".into(),
            Conditional { cond, body } => format!("{} if {cond}", body.mnemonic()),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mnemonic())
    }
}

/// A circuit over `n_qubits` qubits and declared classical registers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    /// Register name -> width in bits.
    pub registers: BTreeMap<String, usize>,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, registers: BTreeMap::new(), instructions: Vec::new() }
    }

    pub fn declare_register(&mut self, name: &str, width: usize) -> Result<(), CircuitError> {
        if self.registers.insert(name.to_string(), width).is_some() {
            return Err(CircuitError::DuplicateRegister(name.to_string()));
        }
        Ok(())
    }

    pub fn push(&mut self, instr: Instruction) {
        self.instructions.push(instr);
    }

    /// Validate all qubit indices and register references.
    pub fn validate(&self) -> Result<(), CircuitError> {
        for instr in &self.instructions {
            self.validate_instr(instr)?;
        }
        Ok(())
    }

    fn validate_instr(&self, instr: &Instruction) -> Result<(), CircuitError> {
        let qubits = instr.qubits();
        for &q in &qubits {
            if q >= self.n_qubits {
                return Err(CircuitError::QubitOutOfRange { q, n: self.n_qubits });
            }
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(CircuitError::DuplicateQubit(qubits[0]));
        }
        match instr {
            Instruction::MeasureZ { out, .. }
            | Instruction::MeasureX { out, .. }
            | Instruction::MeasureY { out, .. } => self.validate_bit(out)?,
            Instruction::LeakageDetect { qubits, reg } => {
                let width = *self
                    .registers
                    .get(reg)
                    .ok_or_else(|| CircuitError::UnknownRegister(reg.clone()))?;
                if qubits.len() > width {
                    return Err(CircuitError::BitOutOfRange {
                        reg: reg.clone(),
                        bit: qubits.len() - 1,
                        width,
                    });
                }
            }
            Instruction::Conditional { cond, body } => {
                self.validate_bit(&cond.bit)?;
                self.validate_instr(body)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_bit(&self, bit: &BitRef) -> Result<(), CircuitError> {
        let width = *self
            .registers
            .get(&bit.reg)
            .ok_or_else(|| CircuitError::UnknownRegister(bit.reg.clone()))?;
        if bit.bit >= width {
            return Err(CircuitError::BitOutOfRange { reg: bit.reg.clone(), bit: bit.bit, width });
        }
        Ok(())
    }

    /// Serialize to the line format. Register declarations come first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("QUBITS {}\n", self.n_qubits));
        for (name, width) in &self.registers {
            out.push_str(&format!("REG {name} {width}\n"));
        }
        for instr in &self.instructions {
            out.push_str(&instr.mnemonic());
            out.push('\n');
        }
        out
    }

    /// Parse the line format produced by [`Circuit::to_text`].
    pub fn from_text(text: &str) -> Result<Self, CircuitError> {
        let mut circuit = Circuit::new(0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| CircuitError::Parse { line: lineno + 1, msg: msg.to_string() };
            let (stmt, cond) = match line.split_once(" if ") {
                Some((s, c)) => (s.trim(), Some(parse_condition(c.trim(), lineno + 1)?)),
                None => (line, None),
            };
            let mut tok = stmt.split_whitespace();
            let head = tok.next().ok_or_else(|| err("empty statement"))?;
            let rest: Vec<&str> = tok.collect();
            let instr = match head {
                "QUBITS" => {
                    circuit.n_qubits = parse_num(rest.first(), lineno + 1)?;
                    continue;
                }
                "REG" => {
                    let name = *rest.first().ok_or_else(|| err("REG needs a name"))?;
                    let width = parse_num(rest.get(1), lineno + 1)?;
                    circuit
                        .declare_register(name, width)
                        .map_err(|e| err(&e.to_string()))?;
                    continue;
                }
                "H" | "S" | "SDG" | "X" | "Y" | "Z" | "PREP" | "RESET" => {
                    let q = parse_num(rest.first(), lineno + 1)?;
                    match head {
                        "H" => Instruction::H(q),
                        "S" => Instruction::S(q),
                        "SDG" => Instruction::Sdg(q),
                        "X" => Instruction::X(q),
                        "Y" => Instruction::Y(q),
                        "Z" => Instruction::Z(q),
                        "PREP" => Instruction::PrepareZ(q),
                        _ => Instruction::Reset(q),
                    }
                }
                "CNOT" => Instruction::Cnot {
                    control: parse_num(rest.first(), lineno + 1)?,
                    target: parse_num(rest.get(1), lineno + 1)?,
                },
                "CZ" => Instruction::Cz {
                    a: parse_num(rest.first(), lineno + 1)?,
                    b: parse_num(rest.get(1), lineno + 1)?,
                },
                "CP" => Instruction::ControlledPauli {
                    control_basis: parse_axis(rest.first(), lineno + 1)?,
                    control: parse_num(rest.get(1), lineno + 1)?,
                    target_pauli: parse_axis(rest.get(2), lineno + 1)?,
                    target: parse_num(rest.get(3), lineno + 1)?,
                },
                "RZ" => Instruction::Rz {
                    q: parse_num(rest.first(), lineno + 1)?,
                    theta: rest
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("RZ needs an angle"))?,
                },
                "MZ" | "MX" | "MY" => {
                    let q = parse_num(rest.first(), lineno + 1)?;
                    let arrow = rest.get(1).copied();
                    if arrow != Some("->") {
                        return Err(err("measurement needs `-> reg[i]`"));
                    }
                    let out = parse_bitref(rest.get(2).copied(), lineno + 1)?;
                    match head {
                        "MZ" => Instruction::MeasureZ { q, out },
                        "MX" => Instruction::MeasureX { q, out },
                        _ => Instruction::MeasureY { q, out },
                    }
                }
                "LEAKDETECT" => {
                    let arrow = rest
                        .iter()
                        .position(|&t| t == "->")
                        .ok_or_else(|| err("LEAKDETECT needs `-> reg`"))?;
                    let qubits = rest[..arrow]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| err("bad qubit index")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let reg = rest
                        .get(arrow + 1)
                        .ok_or_else(|| err("LEAKDETECT needs a register"))?
                        .to_string();
                    Instruction::LeakageDetect { qubits, reg }
                }
                "IDLE" => {
                    let duration: f64 = rest
                        .first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("IDLE needs a duration"))?;
                    let qubits = rest[1..]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| err("bad qubit index")))
                        .collect::<Result<Vec<_>, _>>()?;
                    Instruction::Idle { qubits, duration }
                }
                "BARRIER" => Instruction::Barrier,
                _ => return Err(err("unknown instruction")),
            };
            circuit.push(match cond {
                Some(cond) => Instruction::Conditional { cond, body: Box::new(instr) },
                None => instr,
            });
        }
        circuit.validate()?;
        Ok(circuit)
    }
}

fn parse_num(tok: Option<&&str>, line: usize) -> Result<usize, CircuitError> {
    tok.and_then(|s| s.parse().ok())
        .ok_or(CircuitError::Parse { line, msg: "expected an integer".into() })
}

fn parse_axis(tok: Option<&&str>, line: usize) -> Result<Axis, CircuitError> {
    match tok {
        Some(&"X") => Ok(Axis::X),
        Some(&"Y") => Ok(Axis::Y),
        Some(&"Z") => Ok(Axis::Z),
        _ => Err(CircuitError::Parse { line, msg: "expected X, Y, or Z".into() }),
    }
}

fn parse_bitref(tok: Option<&str>, line: usize) -> Result<BitRef, CircuitError> {
    let err = || CircuitError::Parse { line, msg: "expected reg[i]".into() };
    let tok = tok.ok_or_else(err)?;
    let open = tok.find('[').ok_or_else(err)?;
    if !tok.ends_with(']') {
        return Err(err());
    }
    let reg = tok[..open].to_string();
    let bit = tok[open + 1..tok.len() - 1].parse().map_err(|_| err())?;
    Ok(BitRef { reg, bit })
}

fn parse_condition(text: &str, line: usize) -> Result<Condition, CircuitError> {
    let err = || CircuitError::Parse { line, msg: "expected reg[i]==0|1".into() };
    let (lhs, rhs) = text.split_once("==").ok_or_else(err)?;
    let bit = parse_bitref(Some(lhs.trim()), line)?;
    let value = match rhs.trim() {
        "0" => false,
        "1" => true,
        _ => return Err(err()),
    };
    Ok(Condition { bit, value })
}
