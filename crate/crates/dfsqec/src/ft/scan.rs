//! Exhaustive single-fault verification of the error-correction cycle.
//!
//! The cycle is held to the standard fault-tolerance contract for a
//! distance-4 code run one level deep:
//!
//! * **clean-to-codespace** — with no faults, any input state (arbitrary
//!   Pauli error on a codeword) comes out in the codespace;
//! * **clean-corrects** — with no faults, an input carrying at most one
//!   error comes out as the exact original codeword, logical value included;
//! * **single-fault-bounded** — one fault anywhere in the cycle (any Pauli
//!   after any gate, any measurement or leak-report flip, any Pauli or leak
//!   during the idle window) leaves the clean input within a weight-1 error
//!   of itself, modulo stabilizers, with no logical flip.
//!
//! Together these bound the per-cycle logical failure at O(p^2).
//!
//! Fault sites are enumerated by recording every injector callback along the
//! fault-free trajectory; the re-extraction stage never runs on that
//! trajectory, so its sites host no fault — they would be a second fault.
//! Each planted fault is run twice, from encoded Z and X eigenstates, and the
//! two runs must report bit-identical traces; check expectations give the
//! residual's syndrome and the two logical expectations give its logical
//! class. The verdict comes from an independently built coset table: the
//! minimum Pauli weight of every (syndrome, logical-class) coset, computed
//! by brute force over all 4^10 Paulis.

use rand::SeedableRng;
use rand::RngCore;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::codes::CodeSpec;
use crate::engine::{
    CliffordEngine, Engine, EngineError, ExecError, Executor, FaultInjector, IdleEffect, NoNoise,
};
use crate::ft::cycle::{data_idle, CycleDriver, CycleError, CycleReport};
use crate::ft::decoder::DecodeMode;
use crate::ft::encode::{EncodeError, Encoder, LogicalState};
use crate::ft::se::{SeCircuits, F1, F2, F3, N_DATA, N_QUBITS};
use crate::pauli::{Axis, PauliError, PauliString};

const ENCODE_SEED: u64 = 0x51a5_0001;
const SCAN_SEED: u64 = 0x51a5_0002;

#[derive(Error, Debug)]
pub enum ScanError {
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("scan needs the 10-qubit code, got n={0}")]
    WrongCode(usize),
    #[error("site {site} variant {variant}: the two runs took different branches")]
    RunsDiverged { site: usize, variant: u8 },
    #[error("site {site} was never reached during replay")]
    SiteNotReached { site: usize },
    #[error("check {check} indefinite on the output state")]
    IndefiniteCheck { check: usize },
    #[error("logical operator indefinite on the output state")]
    IndefiniteLogical,
}

/// One injector callback along the fault-free trajectory; each kind hosts a
/// fixed set of fault variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    /// After a one-qubit gate: X, Y or Z.
    Gate1 { q: usize },
    /// After a two-qubit gate: the 15 nontrivial two-qubit Paulis.
    Gate2 { a: usize, b: usize },
    /// After a |0> preparation or reset: X, Y or Z.
    Prep { q: usize },
    /// Reported measurement outcome flips.
    MeasureFlip { q: usize },
    /// Reported leak bit flips (a spurious reset on a clean input).
    LeakReportFlip { q: usize },
    /// One idling qubit: X, Y, Z or a leak out of the qubit subspace.
    Idle { q: usize },
}

impl SiteKind {
    pub fn variants(self) -> u8 {
        match self {
            SiteKind::Gate1 { .. } | SiteKind::Prep { .. } => 3,
            SiteKind::Gate2 { .. } => 15,
            SiteKind::MeasureFlip { .. } | SiteKind::LeakReportFlip { .. } => 1,
            SiteKind::Idle { .. } => 4,
        }
    }

    pub fn describe(self, variant: u8) -> String {
        let axis = |i: u8| ["I", "X", "Y", "Z"][i as usize];
        match self {
            SiteKind::Gate1 { q } => format!("{} on qubit {q} after a 1q gate", axis(variant + 1)),
            SiteKind::Gate2 { a, b } => {
                let c = variant + 1;
                format!("{}(q{a}) {}(q{b}) after a 2q gate", axis(c >> 2), axis(c & 3))
            }
            SiteKind::Prep { q } => format!("{} on qubit {q} after preparation", axis(variant + 1)),
            SiteKind::MeasureFlip { q } => format!("flipped readout of qubit {q}"),
            SiteKind::LeakReportFlip { q } => format!("flipped leak report for qubit {q}"),
            SiteKind::Idle { q } => match variant {
                3 => format!("leak of qubit {q} while idling"),
                v => format!("{} on qubit {q} while idling", axis(v + 1)),
            },
        }
    }
}

fn axis_of(i: u8) -> Option<Axis> {
    match i {
        0 => None,
        1 => Some(Axis::X),
        2 => Some(Axis::Y),
        3 => Some(Axis::Z),
        _ => unreachable!("axis index"),
    }
}

/// Logs every callback without injecting anything.
#[derive(Default)]
struct Recorder {
    sites: Vec<SiteKind>,
}

impl FaultInjector for Recorder {
    fn after_gate1(&mut self, q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        self.sites.push(SiteKind::Gate1 { q });
        None
    }
    fn after_gate2(&mut self, a: usize, b: usize, _rng: &mut dyn RngCore) -> (Option<Axis>, Option<Axis>) {
        self.sites.push(SiteKind::Gate2 { a, b });
        (None, None)
    }
    fn after_prep(&mut self, q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        self.sites.push(SiteKind::Prep { q });
        None
    }
    fn measure_flip(&mut self, q: usize, _rng: &mut dyn RngCore) -> bool {
        self.sites.push(SiteKind::MeasureFlip { q });
        false
    }
    fn leak_report_flip(&mut self, q: usize, _rng: &mut dyn RngCore) -> bool {
        self.sites.push(SiteKind::LeakReportFlip { q });
        false
    }
    fn idle(&mut self, q: usize, _duration: f64, _rng: &mut dyn RngCore) -> IdleEffect {
        self.sites.push(SiteKind::Idle { q });
        IdleEffect::default()
    }
}

/// Plants exactly one fault: callback number `target` fires `variant`.
struct OneFault {
    target: usize,
    variant: u8,
    cursor: usize,
    fired: bool,
}

impl OneFault {
    fn new(target: usize, variant: u8) -> Self {
        Self { target, variant, cursor: 0, fired: false }
    }

    fn hit(&mut self) -> bool {
        let hit = self.cursor == self.target;
        self.cursor += 1;
        if hit {
            self.fired = true;
        }
        hit
    }
}

impl FaultInjector for OneFault {
    fn after_gate1(&mut self, _q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        if self.hit() {
            axis_of(self.variant + 1)
        } else {
            None
        }
    }
    fn after_gate2(&mut self, _a: usize, _b: usize, _rng: &mut dyn RngCore) -> (Option<Axis>, Option<Axis>) {
        if self.hit() {
            let c = self.variant + 1;
            (axis_of(c >> 2), axis_of(c & 3))
        } else {
            (None, None)
        }
    }
    fn after_prep(&mut self, _q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
        if self.hit() {
            axis_of(self.variant + 1)
        } else {
            None
        }
    }
    fn measure_flip(&mut self, _q: usize, _rng: &mut dyn RngCore) -> bool {
        self.hit()
    }
    fn leak_report_flip(&mut self, _q: usize, _rng: &mut dyn RngCore) -> bool {
        self.hit()
    }
    fn idle(&mut self, _q: usize, _duration: f64, _rng: &mut dyn RngCore) -> IdleEffect {
        if self.hit() {
            match self.variant {
                3 => IdleEffect { leak: true, ..IdleEffect::default() },
                v => IdleEffect { pauli: axis_of(v + 1), ..IdleEffect::default() },
            }
        } else {
            IdleEffect::default()
        }
    }
}

/// Number of (syndrome, logical-class) cosets: 9 syndrome bits, one logical
/// Z-flip bit, one logical X-flip bit.
pub const CLASSES: usize = 1 << 11;

/// Minimum Pauli weight of every coset of the stabilizer group, built by
/// walking all 4^10 Paulis. The independent ground truth for "an error of at
/// most weight 1".
pub struct CosetTable {
    min_weight: Vec<u8>,
    rep: Vec<PauliString>,
}

impl CosetTable {
    pub fn build(code: &CodeSpec) -> Result<Self, ScanError> {
        let n = code.n;
        if n != N_DATA {
            return Err(ScanError::WrongCode(n));
        }
        let gens: Vec<(u64, u64)> =
            code.generators.iter().map(|g| (g.x_bits(), g.z_bits())).collect();
        let (lzx, lzz) = (code.logical_z.x_bits(), code.logical_z.z_bits());
        let (lxx, lxz) = (code.logical_x.x_bits(), code.logical_x.z_bits());

        let mut min_weight = vec![u8::MAX; CLASSES];
        let mut rep = vec![PauliString::identity(n)?; CLASSES];
        let odd = |v: u64| v.count_ones() & 1 == 1;
        for x in 0..1u64 << n {
            for z in 0..1u64 << n {
                let mut idx = 0usize;
                for (i, &(gx, gz)) in gens.iter().enumerate() {
                    if odd((x & gz) ^ (z & gx)) {
                        idx |= 1 << i;
                    }
                }
                if odd((x & lzz) ^ (z & lzx)) {
                    idx |= 1 << 9;
                }
                if odd((x & lxz) ^ (z & lxx)) {
                    idx |= 1 << 10;
                }
                let w = (x | z).count_ones() as u8;
                if w < min_weight[idx] {
                    min_weight[idx] = w;
                    rep[idx] = PauliString::from_bits(n, x, z)?;
                }
            }
        }
        Ok(Self { min_weight, rep })
    }

    /// Coset index from a 9-bit syndrome and the two logical flip bits.
    pub fn class_index(syndrome: u16, z_flip: bool, x_flip: bool) -> usize {
        (syndrome as usize & 0x1ff) | (usize::from(z_flip) << 9) | (usize::from(x_flip) << 10)
    }

    pub fn min_weight(&self, class: usize) -> u8 {
        self.min_weight[class]
    }

    pub fn representative(&self, class: usize) -> &PauliString {
        &self.rep[class]
    }
}

/// Fault-tolerance contract clauses, named by what they demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    CleanToCodespace,
    CleanCorrects,
    SingleFaultBounded,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::CleanToCodespace => "clean-to-codespace",
            Condition::CleanCorrects => "clean-corrects",
            Condition::SingleFaultBounded => "single-fault-bounded",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: Condition,
    pub detail: String,
}

/// What the sweep saw. `violations` empty means the contract holds.
#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    /// Injector callbacks along the fault-free trajectory.
    pub sites: usize,
    /// Planted (site, variant) faults actually run.
    pub faults: usize,
    /// Arbitrary-error inputs run fault-free for the codespace clause.
    pub codespace_cases: usize,
    /// At-most-one-error inputs run fault-free for the correction clause.
    pub correction_cases: usize,
    pub violations: Vec<Violation>,
    /// Faults whose cycle escalated to the re-extraction pass.
    pub escalated: usize,
    /// Faults decoded through the hook table.
    pub hook_hits: usize,
    /// Faults whose record decoded ambiguously (counted, not forbidden).
    pub ambiguous: usize,
    /// Largest residual coset weight seen over all faults.
    pub max_residual_weight: u8,
}

/// The scanner: prepared input states, the coset ground truth, and the cycle
/// driver under test.
pub struct FaultScan {
    driver: CycleDriver,
    coset: CosetTable,
    checks: Vec<PauliString>,
    logicals: [PauliString; 2],
    prepared: [CliffordEngine; 2],
    idle: Circuit,
}

impl FaultScan {
    pub fn new(code: &CodeSpec) -> Result<Self, ScanError> {
        Self::with_driver(code, CycleDriver::new(code)?)
    }

    /// Scan a driver built on modified circuits (the negative control).
    pub fn with_driver(code: &CodeSpec, driver: CycleDriver) -> Result<Self, ScanError> {
        if code.n != N_DATA {
            return Err(ScanError::WrongCode(code.n));
        }
        let coset = CosetTable::build(code)?;
        let checks = code
            .generators
            .iter()
            .map(|g| g.embedded(N_QUBITS))
            .collect::<Result<Vec<_>, _>>()?;
        let logicals = [code.logical_z.embedded(N_QUBITS)?, code.logical_x.embedded(N_QUBITS)?];

        let encoder = Encoder::new(code)?;
        let mut prepared = Vec::new();
        for (i, state) in [LogicalState::Zero, LogicalState::Plus].into_iter().enumerate() {
            let mut engine = CliffordEngine::new(N_QUBITS)?;
            let mut noise = NoNoise;
            let mut rng = ChaCha12Rng::seed_from_u64(ENCODE_SEED + i as u64);
            Executor::new(&mut engine, &mut noise, &mut rng).run(&encoder.circuit(state)?)?;
            prepared.push(engine);
        }
        let prepared = match <[CliffordEngine; 2]>::try_from(prepared) {
            Ok(p) => p,
            Err(_) => unreachable!("two states prepared"),
        };
        Ok(Self { driver, coset, checks, logicals, prepared, idle: data_idle(1.0) })
    }

    pub fn coset_table(&self) -> &CosetTable {
        &self.coset
    }

    /// All fault sites, recorded along the fault-free trajectory.
    pub fn enumerate(&self) -> Result<Vec<SiteKind>, ScanError> {
        let mut engine = self.prepared[0].clone();
        let mut recorder = Recorder::default();
        let (_, _) = self.cycle_on(&mut engine, &mut recorder)?;
        Ok(recorder.sites)
    }

    fn cycle_on<I: FaultInjector>(
        &self,
        engine: &mut CliffordEngine,
        injector: &mut I,
    ) -> Result<(CycleReport, Vec<bool>), ScanError> {
        let mut rng = ChaCha12Rng::seed_from_u64(SCAN_SEED);
        let mut exec = Executor::new(engine, injector, &mut rng);
        exec.run(&self.idle)?;
        let report = self.driver.run_cycle(&mut exec, DecodeMode::Correct)?;
        let trace = std::mem::take(&mut exec.trace);
        Ok((report, trace))
    }

    fn syndrome_bits(&self, engine: &CliffordEngine) -> Result<u16, ScanError> {
        let mut syn = 0u16;
        for (i, check) in self.checks.iter().enumerate() {
            let v = engine.expectation(check)?.ok_or(ScanError::IndefiniteCheck { check: i })?;
            if v < 0.0 {
                syn |= 1 << i;
            }
        }
        Ok(syn)
    }

    /// Fault-free cycles on every error coset must land in the codespace.
    fn sweep_codespace(&self, report: &mut ScanReport) -> Result<(), ScanError> {
        for class in 0..CLASSES {
            let error = self.coset.representative(class).embedded(N_QUBITS)?;
            let mut engine = self.prepared[0].clone();
            engine.inject(&error)?;
            let mut noise = NoNoise;
            let (_, _) = self.cycle_on(&mut engine, &mut noise)?;
            report.codespace_cases += 1;
            let syn = self.syndrome_bits(&engine)?;
            if syn != 0 {
                report.violations.push(Violation {
                    condition: Condition::CleanToCodespace,
                    detail: format!(
                        "input {} left syndrome {syn:09b}",
                        self.coset.representative(class)
                    ),
                });
            }
        }
        Ok(())
    }

    /// Fault-free cycles on inputs with at most one error must restore the
    /// exact codeword, logical eigenvalue included.
    fn sweep_corrections(&self, report: &mut ScanReport) -> Result<(), ScanError> {
        let mut inputs = vec![PauliString::identity(N_DATA)?];
        for q in 0..N_DATA {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                inputs.push(PauliString::single(N_DATA, q, axis)?);
            }
        }
        for error in &inputs {
            for which in 0..2 {
                let mut engine = self.prepared[which].clone();
                engine.inject(&error.embedded(N_QUBITS)?)?;
                let mut noise = NoNoise;
                let (_, _) = self.cycle_on(&mut engine, &mut noise)?;
                report.correction_cases += 1;
                let syn = self.syndrome_bits(&engine)?;
                let logical = engine
                    .expectation(&self.logicals[which])?
                    .ok_or(ScanError::IndefiniteLogical)?;
                if syn != 0 || logical < 0.0 {
                    report.violations.push(Violation {
                        condition: Condition::CleanCorrects,
                        detail: format!(
                            "input {error} on state {}: syndrome {syn:09b}, logical {logical}",
                            ["Z+", "X+"][which]
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Every planted single fault must leave a residual of coset weight <= 1
    /// with no logical flip.
    fn sweep_faults(&self, sites: &[SiteKind], report: &mut ScanReport) -> Result<(), ScanError> {
        for (site, &kind) in sites.iter().enumerate() {
            for variant in 0..kind.variants() {
                report.faults += 1;
                let mut runs = Vec::with_capacity(2);
                for which in 0..2 {
                    let mut engine = self.prepared[which].clone();
                    let mut injector = OneFault::new(site, variant);
                    let (cycle, trace) = self.cycle_on(&mut engine, &mut injector)?;
                    if !injector.fired {
                        return Err(ScanError::SiteNotReached { site });
                    }
                    let syn = self.syndrome_bits(&engine)?;
                    let logical = engine
                        .expectation(&self.logicals[which])?
                        .ok_or(ScanError::IndefiniteLogical)?;
                    runs.push((cycle, trace, syn, logical < 0.0));
                }
                let (cycle, trace_z, syn_z, z_flip) = &runs[0];
                let (_, trace_x, syn_x, x_flip) = &runs[1];
                if trace_z != trace_x || syn_z != syn_x {
                    return Err(ScanError::RunsDiverged { site, variant: variant });
                }

                if cycle.trigger.is_some() {
                    report.escalated += 1;
                }
                if cycle.record.flags != 0 && cycle.outcome.candidates_considered == 0 {
                    report.hook_hits += 1;
                }
                if cycle.outcome.ambiguous {
                    report.ambiguous += 1;
                }

                let class = CosetTable::class_index(*syn_z, *z_flip, *x_flip);
                let weight = self.coset.min_weight(class);
                report.max_residual_weight = report.max_residual_weight.max(weight);
                if weight > 1 {
                    report.violations.push(Violation {
                        condition: Condition::SingleFaultBounded,
                        detail: format!(
                            "site {site} ({}): residual class {} (weight {weight}), record {}",
                            kind.describe(variant),
                            self.coset.representative(class),
                            cycle.record,
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// The full sweep over all three clauses.
    pub fn run(&self) -> Result<ScanReport, ScanError> {
        let sites = self.enumerate()?;
        let mut report = ScanReport { sites: sites.len(), ..ScanReport::default() };
        self.sweep_codespace(&mut report)?;
        self.sweep_corrections(&mut report)?;
        self.sweep_faults(&sites, &mut report)?;
        Ok(report)
    }
}

/// The same extraction circuits with every flag-qubit instruction removed —
/// hooks fly under the radar. Exists to prove the scan has teeth.
pub fn deflagged_circuits(se: &SeCircuits) -> SeCircuits {
    let strip = |c: &Circuit| -> Circuit {
        let mut out = c.clone();
        out.instructions
            .retain(|i| !i.qubits().iter().any(|&q| q == F1 || q == F2 || q == F3));
        out
    };
    SeCircuits {
        dfs_se: se.dfs_se.clone(),
        flagged: [strip(&se.flagged[0]), strip(&se.flagged[1])],
        unflagged: se.unflagged.clone(),
    }
}
