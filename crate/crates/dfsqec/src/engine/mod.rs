//! Simulation engines and the circuit executor.
//!
//! Two engines implement [`Engine`]: a stabilizer tableau carrying a merged
//! Pauli frame ([`CliffordEngine`]) and a dense statevector
//! ([`StatevectorEngine`]). The [`Executor`] walks a circuit, applies ideal
//! instructions through the engine, and consults a [`FaultInjector`] at every
//! fault site (after each gate and preparation, at each measurement, and per
//! qubit of each idle window). Noise models and the exhaustive fault scan are
//! both injectors, so Monte Carlo runs and the scan share one site walk.

pub mod clifford;
pub mod statevector;

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

pub use clifford::CliffordEngine;
pub use statevector::StatevectorEngine;

use crate::circuit::{BitRef, Circuit, CircuitError, Instruction};
use crate::pauli::{Axis, PauliError, PauliString};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("{op} is not supported by this engine")]
    Unsupported { op: &'static str },
    #[error("qubit {q} out of range for {n} qubits")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("engine holds {engine} qubits but operand has {operand}")]
    SizeMismatch { engine: usize, operand: usize },
    #[error("observable has an imaginary phase")]
    NonHermitianObservable,
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ExecError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("register {0} missing at runtime")]
    MissingRegister(String),
}

/// Classical state produced by one circuit run: register name -> bits.
pub type RegisterFile = BTreeMap<String, Vec<bool>>;

/// Common interface of the two simulation engines.
///
/// All qubit arguments must be in range; engines check and panic on misuse
/// (the executor validates circuits before running). Gates on leaked qubits
/// are skipped, and Z measurements of leaked qubits report 1 without
/// collapsing anything. `prepare_z`, `reset`, and `leak_reset` return the
/// qubit to a fresh unleaked |0>.
pub trait Engine {
    fn num_qubits(&self) -> usize;

    fn h(&mut self, q: usize);
    fn s(&mut self, q: usize);
    fn sdg(&mut self, q: usize);
    fn pauli_gate(&mut self, q: usize, axis: Axis);
    fn cnot(&mut self, control: usize, target: usize);
    fn cz(&mut self, a: usize, b: usize);
    fn rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError>;

    /// Prepare |0> on `q`, discarding its current state.
    fn prepare_z(&mut self, q: usize, rng: &mut dyn RngCore);

    /// Measure Z on `q` and return the reported outcome.
    fn measure_z(&mut self, q: usize, rng: &mut dyn RngCore) -> bool;

    /// Inject a single-qubit Pauli error (a noise event, not a gate).
    fn inject_axis(&mut self, q: usize, axis: Axis);

    /// Inject a Z rotation error by `theta` radians.
    fn inject_rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError>;

    /// Mark `q` as leaked out of the computational subspace.
    fn set_leaked(&mut self, q: usize);
    fn is_leaked(&self, q: usize) -> bool;

    /// Reset `q` to a fresh |0>, clearing any leak flag.
    fn leak_reset(&mut self, q: usize, rng: &mut dyn RngCore);

    /// Expectation of a Hermitian Pauli observable on the current (true)
    /// state. `None` means indefinite for the tableau engine; the statevector
    /// engine always returns the exact value.
    fn expectation(&self, observable: &PauliString) -> Result<Option<f64>, EngineError>;

    /// Measure in the given basis via basis-change gates around `measure_z`.
    fn measure(&mut self, q: usize, basis: Axis, rng: &mut dyn RngCore) -> bool {
        match basis {
            Axis::Z => self.measure_z(q, rng),
            Axis::X => {
                self.h(q);
                let m = self.measure_z(q, rng);
                self.h(q);
                m
            }
            Axis::Y => {
                // Sdg then H maps Y to Z.
                self.sdg(q);
                self.h(q);
                let m = self.measure_z(q, rng);
                self.h(q);
                self.s(q);
                m
            }
        }
    }

    /// Controlled Pauli decomposed around CNOT: rotate the control basis to Z
    /// and the target Pauli to X, apply CNOT, rotate back.
    fn controlled_pauli(&mut self, control: usize, control_basis: Axis, target: usize, target_pauli: Axis) {
        let enter = |e: &mut Self| match control_basis {
            Axis::Z => {}
            Axis::X => e.h(control),
            Axis::Y => {
                e.sdg(control);
                e.h(control);
            }
        };
        let exit = |e: &mut Self| match control_basis {
            Axis::Z => {}
            Axis::X => e.h(control),
            Axis::Y => {
                e.h(control);
                e.s(control);
            }
        };
        enter(self);
        match target_pauli {
            Axis::X => {}
            Axis::Y => self.sdg(target),
            Axis::Z => self.h(target),
        }
        self.cnot(control, target);
        match target_pauli {
            Axis::X => {}
            Axis::Y => self.s(target),
            Axis::Z => self.h(target),
        }
        exit(self);
    }
}

/// Noise drawn for one qubit of one idle window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdleEffect {
    /// Stochastic Pauli to inject (twirled dephasing, fast dephasing).
    pub pauli: Option<Axis>,
    /// Coherent Z rotation angle in radians (0 = none).
    pub rz: f64,
    /// Leak the qubit out of the computational subspace.
    pub leak: bool,
}

/// Callback interface consulted at every fault site during execution.
///
/// Implementations: the no-op baseline, stochastic noise models, and the
/// single-fault planner of the exhaustive scan. Sites are visited in program
/// order, so a deterministic injector paired with a fixed rng stream yields
/// bit-identical runs.
pub trait FaultInjector {
    /// After a one-qubit unitary gate on `q`.
    fn after_gate1(&mut self, q: usize, rng: &mut dyn RngCore) -> Option<Axis>;

    /// After a two-qubit unitary gate on `(a, b)`; returns per-qubit Paulis.
    fn after_gate2(&mut self, a: usize, b: usize, rng: &mut dyn RngCore) -> (Option<Axis>, Option<Axis>);

    /// After a |0> preparation or reset of `q`.
    fn after_prep(&mut self, q: usize, rng: &mut dyn RngCore) -> Option<Axis>;

    /// Classical flip of the reported outcome of a measurement of `q`.
    fn measure_flip(&mut self, q: usize, rng: &mut dyn RngCore) -> bool;

    /// Classical flip of the reported leak bit for `q` in a leakage check.
    fn leak_report_flip(&mut self, q: usize, rng: &mut dyn RngCore) -> bool;

    /// Noise for qubit `q` idling for `duration` seconds.
    fn idle(&mut self, q: usize, duration: f64, rng: &mut dyn RngCore) -> IdleEffect;
}

/// Injector that leaves every site clean.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoNoise;

impl FaultInjector for NoNoise {
    fn after_gate1(&mut self, _q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        None
    }
    fn after_gate2(&mut self, _a: usize, _b: usize, _rng: &mut dyn RngCore) -> (Option<Axis>, Option<Axis>) {
        (None, None)
    }
    fn after_prep(&mut self, _q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        None
    }
    fn measure_flip(&mut self, _q: usize, _rng: &mut dyn RngCore) -> bool {
        false
    }
    fn leak_report_flip(&mut self, _q: usize, _rng: &mut dyn RngCore) -> bool {
        false
    }
    fn idle(&mut self, _q: usize, _duration: f64, _rng: &mut dyn RngCore) -> IdleEffect {
        IdleEffect::default()
    }
}

/// Walks circuits over an engine, consulting a fault injector at every site
/// and recording reported measurement outcomes.
pub struct Executor<'a, E: Engine, I: FaultInjector, R: RngCore> {
    pub engine: &'a mut E,
    pub injector: &'a mut I,
    pub rng: &'a mut R,
    /// Every reported bit (measurements and leak checks) across all `run`
    /// calls, in program order. Used to certify that two runs followed the
    /// same branches.
    pub trace: Vec<bool>,
}

impl<'a, E: Engine, I: FaultInjector, R: RngCore> Executor<'a, E, I, R> {
    pub fn new(engine: &'a mut E, injector: &'a mut I, rng: &'a mut R) -> Self {
        Self { engine, injector, rng, trace: Vec::new() }
    }

    /// Run one circuit; classical registers are freshly zeroed per run.
    pub fn run(&mut self, circuit: &Circuit) -> Result<RegisterFile, ExecError> {
        circuit.validate()?;
        if circuit.n_qubits > self.engine.num_qubits() {
            return Err(EngineError::SizeMismatch {
                engine: self.engine.num_qubits(),
                operand: circuit.n_qubits,
            }
            .into());
        }
        let mut regs: RegisterFile = circuit
            .registers
            .iter()
            .map(|(name, width)| (name.clone(), vec![false; *width]))
            .collect();
        for instr in &circuit.instructions {
            self.exec(instr, &mut regs)?;
        }
        Ok(regs)
    }

    fn exec(&mut self, instr: &Instruction, regs: &mut RegisterFile) -> Result<(), ExecError> {
        use Instruction::*;
        match instr {
            H(q) => {
                self.engine.h(*q);
                self.post1(*q);
            }
            S(q) => {
                self.engine.s(*q);
                self.post1(*q);
            }
            Sdg(q) => {
                self.engine.sdg(*q);
                self.post1(*q);
            }
            X(q) => {
                self.engine.pauli_gate(*q, Axis::X);
                self.post1(*q);
            }
            Y(q) => {
                self.engine.pauli_gate(*q, Axis::Y);
                self.post1(*q);
            }
            Z(q) => {
                self.engine.pauli_gate(*q, Axis::Z);
                self.post1(*q);
            }
            Rz { q, theta } => {
                self.engine.rz(*q, *theta)?;
                self.post1(*q);
            }
            Cnot { control, target } => {
                self.engine.cnot(*control, *target);
                self.post2(*control, *target);
            }
            Cz { a, b } => {
                self.engine.cz(*a, *b);
                self.post2(*a, *b);
            }
            ControlledPauli { control, control_basis, target, target_pauli } => {
                self.engine.controlled_pauli(*control, *control_basis, *target, *target_pauli);
                self.post2(*control, *target);
            }
            PrepareZ(q) => {
                self.engine.prepare_z(*q, self.rng);
                if let Some(axis) = self.injector.after_prep(*q, self.rng) {
                    self.engine.inject_axis(*q, axis);
                }
            }
            Reset(q) => {
                self.engine.leak_reset(*q, self.rng);
                if let Some(axis) = self.injector.after_prep(*q, self.rng) {
                    self.engine.inject_axis(*q, axis);
                }
            }
            MeasureZ { q, out } => self.measure_into(*q, Axis::Z, out, regs)?,
            MeasureX { q, out } => self.measure_into(*q, Axis::X, out, regs)?,
            MeasureY { q, out } => self.measure_into(*q, Axis::Y, out, regs)?,
            LeakageDetect { qubits, reg } => {
                for (slot, &q) in qubits.iter().enumerate() {
                    let mut bit = self.engine.is_leaked(q);
                    if self.injector.leak_report_flip(q, self.rng) {
                        bit = !bit;
                    }
                    // The apparatus acts on what it reports: a reported leak
                    // triggers a reset, a missed leak leaves the qubit alone.
                    if bit {
                        self.engine.leak_reset(q, self.rng);
                    }
                    set_reg(regs, reg, slot, bit)?;
                    self.trace.push(bit);
                }
            }
            Idle { qubits, duration } => {
                for &q in qubits {
                    let effect = self.injector.idle(q, *duration, self.rng);
                    if effect.rz != 0.0 {
                        self.engine.inject_rz(q, effect.rz)?;
                    }
                    if let Some(axis) = effect.pauli {
                        self.engine.inject_axis(q, axis);
                    }
                    if effect.leak {
                        self.engine.set_leaked(q);
                    }
                }
            }
            Barrier => {}
            Conditional { cond, body } => {
                let bit = get_reg(regs, &cond.bit)?;
                if bit == cond.value {
                    self.exec(body, regs)?;
                }
            }
        }
        Ok(())
    }

    fn post1(&mut self, q: usize) {
        if let Some(axis) = self.injector.after_gate1(q, self.rng) {
            self.engine.inject_axis(q, axis);
        }
    }

    fn post2(&mut self, a: usize, b: usize) {
        let (pa, pb) = self.injector.after_gate2(a, b, self.rng);
        if let Some(axis) = pa {
            self.engine.inject_axis(a, axis);
        }
        if let Some(axis) = pb {
            self.engine.inject_axis(b, axis);
        }
    }

    fn measure_into(&mut self, q: usize, basis: Axis, out: &BitRef, regs: &mut RegisterFile) -> Result<(), ExecError> {
        let mut bit = self.engine.measure(q, basis, self.rng);
        if self.injector.measure_flip(q, self.rng) {
            bit = !bit;
        }
        set_reg(regs, &out.reg, out.bit, bit)?;
        self.trace.push(bit);
        Ok(())
    }
}

fn set_reg(regs: &mut RegisterFile, reg: &str, bit: usize, value: bool) -> Result<(), ExecError> {
    let bits = regs.get_mut(reg).ok_or_else(|| ExecError::MissingRegister(reg.to_string()))?;
    bits[bit] = value;
    Ok(())
}

fn get_reg(regs: &RegisterFile, bit: &BitRef) -> Result<bool, ExecError> {
    let bits = regs.get(&bit.reg).ok_or_else(|| ExecError::MissingRegister(bit.reg.clone()))?;
    Ok(bits[bit.bit])
}
