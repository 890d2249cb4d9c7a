//! Syndrome-extraction circuit synthesis.
//!
//! Three circuit families over 10 data qubits plus a 10-ancilla MCMR pool:
//!
//! * `dfs_se` — the five pair checks r_i, one ancilla each, two CNOTs. A raw
//!   bit of 1 is the no-error outcome: the checks are -Z_{2i}Z_{2i+1}, so the
//!   codespace holds odd ZZ parity, and either CNOT failing deposits at most
//!   a weight-1-equivalent data error (a full ZZ hook is the pair stabilizer
//!   itself).
//! * `flagged_1` / `flagged_2` — two s checks per round (s0,s1 then s2,s3),
//!   one ladder each on ancillas a0/a1, guarded by flag qubits f1/f2 plus a
//!   shared f3.  Couplings are data-controlled X onto the |0>-prepared
//!   ancilla, so an ancilla Z or Y fault after coupling k propagates the
//!   remaining letters (a hook) onto the data, while an ancilla X fault only
//!   flips the readout.  Each flag opens and closes with a CNOT onto the
//!   ancilla: a hook inside the window kicks one Z onto the flag (read out in
//!   X), a hook before the window is copied twice and cancels.  Windows are
//!   placed so every unflagged hook suffix is weight <= 1 up to stabilizers:
//!   f1/f2 span couplings 1..4, f3 spans couplings 3..4, giving three
//!   distinct patterns ({f}, {f,f3}, none) that the hook table keys on.
//! * `unflagged_[s0..s3]` — plain one-ancilla ladders in the same coupling
//!   order, used for the re-extraction pass.  With the five pair checks they
//!   read all nine syndromes on eight distinct ancillas (s3 reuses the first
//!   pair ancilla after its measurement).
//!
//! The coupling order within each ladder is load-bearing: it fixes which
//! error class each hook suffix lands in.  The order below puts s1's Z
//! couplings last so its late hooks reduce to ZZ pairs, which is what lets
//! the flag patterns separate the colliding classes (an X0X1-like hook from
//! early in s0's ladder shares a syndrome with a Z4Z7-like hook from late in
//! s1's).  The exhaustive fault scan and the hook-table conflict check
//! certify the construction.

use thiserror::Error;

use crate::circuit::{BitRef, Circuit, CircuitError, Instruction};
use crate::codes::CodeSpec;
use crate::pauli::{Axis, PauliError, PauliString};

/// Number of data qubits.
pub const N_DATA: usize = 10;
/// Register size: data plus the 10-ancilla MCMR pool.
pub const N_QUBITS: usize = 20;

/// Syndrome ancillas of the flagged rounds.
pub const A0: usize = 10;
pub const A1: usize = 11;
/// Flag qubits: f1 guards the a0 ladder, f2 the a1 ladder, f3 is shared.
pub const F1: usize = 12;
pub const F2: usize = 13;
pub const F3: usize = 14;

/// Ancilla for pair check r_i in `dfs_se`.
pub const DFS_ANC: [usize; 5] = [10, 11, 12, 13, 14];
/// Ancillas of the four unflagged s circuits (s3 reuses the first pair
/// ancilla, keeping the unflagged pass within eight distinct ancillas).
pub const UNFLAGGED_ANC: [usize; 4] = [15, 16, 17, 10];

/// Data couplings of each s check in extraction order.
const COUPLINGS: [[(usize, Axis); 6]; 4] = [
    [(0, Axis::X), (1, Axis::X), (2, Axis::Z), (4, Axis::Z), (6, Axis::X), (7, Axis::X)],
    [(2, Axis::X), (3, Axis::X), (8, Axis::X), (9, Axis::X), (4, Axis::Z), (6, Axis::Z)],
    [(0, Axis::X), (1, Axis::X), (4, Axis::X), (5, Axis::X), (6, Axis::Z), (8, Axis::Z)],
    [(0, Axis::Z), (2, Axis::X), (3, Axis::X), (6, Axis::X), (7, Axis::X), (8, Axis::Z)],
];

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SeError {
    #[error("expected the 10-qubit code with 9 checks, got {n} qubits and {gens} checks")]
    WrongCode { n: usize, gens: usize },
    #[error("coupling order for s{idx} does not multiply to the check")]
    CouplingMismatch { idx: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// The synthesized extraction circuits for one QEC cycle.
#[derive(Debug, Clone)]
pub struct SeCircuits {
    /// All five pair checks; register `r_raw[0..5]`, 1 = no error.
    pub dfs_se: Circuit,
    /// Flagged rounds 1 and 2; registers `s_raw[0..2]` (syndrome convention,
    /// 0 = no error) and `flags[0..3]` (f1, f2, f3).
    pub flagged: [Circuit; 2],
    /// One circuit per s check; register `s_raw[0]`.
    pub unflagged: [Circuit; 4],
}

/// Data coupling order of the s_idx extraction ladder.
pub fn coupling_order(idx: usize) -> &'static [(usize, Axis); 6] {
    &COUPLINGS[idx]
}

pub fn synthesize_se_circuits(code: &CodeSpec) -> Result<SeCircuits, SeError> {
    if code.n != N_DATA || code.generators.len() != 9 {
        return Err(SeError::WrongCode { n: code.n, gens: code.generators.len() });
    }
    for (idx, order) in COUPLINGS.iter().enumerate() {
        let mut product = PauliString::identity(N_DATA)?;
        for &(q, axis) in order {
            product = product.multiply(&PauliString::single(N_DATA, q, axis)?)?;
        }
        if product.unsigned() != code.generators[5 + idx].unsigned() {
            return Err(SeError::CouplingMismatch { idx });
        }
    }

    let mut dfs_se = Circuit::new(N_QUBITS);
    dfs_se.declare_register("r_raw", 5)?;
    for &anc in &DFS_ANC {
        dfs_se.push(Instruction::PrepareZ(anc));
    }
    for (i, &anc) in DFS_ANC.iter().enumerate() {
        dfs_se.push(Instruction::Cnot { control: 2 * i, target: anc });
        dfs_se.push(Instruction::Cnot { control: 2 * i + 1, target: anc });
    }
    for (i, &anc) in DFS_ANC.iter().enumerate() {
        dfs_se.push(Instruction::MeasureZ { q: anc, out: bit("r_raw", i) });
    }

    let flagged = [flagged_round(0)?, flagged_round(1)?];

    let mut unflagged = Vec::with_capacity(4);
    for idx in 0..4 {
        let mut c = Circuit::new(N_QUBITS);
        c.declare_register("s_raw", 1)?;
        let anc = UNFLAGGED_ANC[idx];
        c.push(Instruction::PrepareZ(anc));
        for &(q, axis) in &COUPLINGS[idx] {
            c.push(coupling(q, axis, anc));
        }
        c.push(Instruction::MeasureZ { q: anc, out: bit("s_raw", 0) });
        unflagged.push(c);
    }
    let unflagged: [Circuit; 4] = unflagged.try_into().expect("four circuits");

    let circuits = SeCircuits { dfs_se, flagged, unflagged };
    circuits.dfs_se.validate()?;
    for c in circuits.flagged.iter().chain(circuits.unflagged.iter()) {
        c.validate()?;
    }
    Ok(circuits)
}

fn bit(reg: &str, i: usize) -> BitRef {
    BitRef { reg: reg.into(), bit: i }
}

fn coupling(data: usize, basis: Axis, anc: usize) -> Instruction {
    Instruction::ControlledPauli {
        control: data,
        control_basis: basis,
        target: anc,
        target_pauli: Axis::X,
    }
}

/// Round 0 extracts s0 (a0) and s1 (a1); round 1 extracts s2 and s3.
fn flagged_round(round: usize) -> Result<Circuit, SeError> {
    let mut c = Circuit::new(N_QUBITS);
    c.declare_register("s_raw", 2)?;
    c.declare_register("flags", 3)?;
    c.push(Instruction::PrepareZ(F3));
    c.push(Instruction::H(F3));
    push_ladder(&mut c, &COUPLINGS[2 * round], A0, F1, 0);
    push_ladder(&mut c, &COUPLINGS[2 * round + 1], A1, F2, 1);
    c.push(Instruction::MeasureX { q: F3, out: bit("flags", 2) });
    Ok(c)
}

/// One flagged extraction ladder: six couplings onto `anc`, the primary flag
/// window around couplings 1..4, the shared f3 window around couplings 3..4.
fn push_ladder(c: &mut Circuit, order: &[(usize, Axis); 6], anc: usize, primary: usize, slot: usize) {
    c.push(Instruction::PrepareZ(anc));
    c.push(Instruction::PrepareZ(primary));
    c.push(Instruction::H(primary));
    for (k, &(q, axis)) in order.iter().enumerate() {
        c.push(coupling(q, axis, anc));
        match k {
            0 => c.push(Instruction::Cnot { control: primary, target: anc }),
            2 => c.push(Instruction::Cnot { control: F3, target: anc }),
            4 => {
                c.push(Instruction::Cnot { control: primary, target: anc });
                c.push(Instruction::Cnot { control: F3, target: anc });
            }
            _ => {}
        }
    }
    c.push(Instruction::MeasureZ { q: anc, out: bit("s_raw", slot) });
    c.push(Instruction::MeasureX { q: primary, out: bit("flags", slot) });
}

#[cfg(test)]
mod tests {
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    use crate::codes::build_1014;
    use crate::engine::{CliffordEngine, Engine, Executor, FaultInjector, IdleEffect, NoNoise};

    use super::*;

    fn circuits() -> SeCircuits {
        synthesize_se_circuits(&build_1014()).unwrap()
    }

    #[test]
    fn couplings_multiply_to_the_checks() {
        // Checked inside synthesis; failure would surface as an error here.
        circuits();
        // build_513 has 5 qubits and 4 checks; the shape check rejects it.
        assert!(matches!(
            synthesize_se_circuits(&crate::codes::build_513()),
            Err(SeError::WrongCode { n: 5, gens: 4 })
        ));
    }

    #[test]
    fn circuits_survive_a_text_round_trip() {
        let se = circuits();
        for c in [&se.dfs_se, &se.flagged[0], &se.flagged[1], &se.unflagged[2]] {
            let back = Circuit::from_text(&c.to_text()).unwrap();
            assert_eq!(&back, c);
        }
    }

    /// |0101...> holds every pair in odd ZZ parity, the codespace value for
    /// the minus-signed pair checks, so every raw bit reads 1.
    #[test]
    fn dfs_raw_bits_read_one_without_errors() {
        let se = circuits();
        let mut engine = CliffordEngine::new(N_QUBITS).unwrap();
        for q in (1..N_DATA).step_by(2) {
            engine.pauli_gate(q, Axis::X);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut noise = NoNoise;
        let regs = Executor::new(&mut engine, &mut noise, &mut rng).run(&se.dfs_se).unwrap();
        assert_eq!(regs["r_raw"], vec![true; 5]);
    }

    #[test]
    fn dfs_raw_bit_drops_on_a_pair_flip() {
        let se = circuits();
        let mut engine = CliffordEngine::new(N_QUBITS).unwrap();
        for q in (1..N_DATA).step_by(2) {
            engine.pauli_gate(q, Axis::X);
        }
        engine.inject_axis(4, Axis::X);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut noise = NoNoise;
        let regs = Executor::new(&mut engine, &mut noise, &mut rng).run(&se.dfs_se).unwrap();
        assert_eq!(regs["r_raw"], vec![true, true, false, true, true]);
    }

    /// Prepare the product eigenstate of one s check (|+> under X letters,
    /// |0> under Z letters): its circuit must read 0, and a single
    /// anticommuting Pauli must flip the readout to 1.
    #[test]
    fn unflagged_circuits_measure_their_checks() {
        let se = circuits();
        for idx in 0..4 {
            for flip in [false, true] {
                let mut engine = CliffordEngine::new(N_QUBITS).unwrap();
                let order = coupling_order(idx);
                for &(q, axis) in order {
                    if axis == Axis::X {
                        engine.h(q);
                    }
                }
                if flip {
                    let (q, axis) = order[0];
                    let anti = if axis == Axis::X { Axis::Z } else { Axis::X };
                    engine.inject_axis(q, anti);
                }
                let mut rng = ChaCha12Rng::seed_from_u64(7);
                let mut noise = NoNoise;
                let regs =
                    Executor::new(&mut engine, &mut noise, &mut rng).run(&se.unflagged[idx]).unwrap();
                assert_eq!(regs["s_raw"], vec![flip], "s{idx} flip={flip}");
            }
        }
    }

    /// The flagged ladders must be quantum-non-demolition readouts of the
    /// same two checks: collapse each check with its unflagged circuit first,
    /// then demand the flagged round reproduce both bits with silent flags,
    /// and the unflagged readouts stay stable afterwards.
    #[test]
    fn flagged_rounds_agree_with_unflagged_readout() {
        let se = circuits();
        for round in 0..2 {
            let mut engine = CliffordEngine::new(N_QUBITS).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(11 + round as u64);
            let mut noise = NoNoise;
            let mut exec = Executor::new(&mut engine, &mut noise, &mut rng);
            let a = exec.run(&se.unflagged[2 * round]).unwrap()["s_raw"][0];
            let b = exec.run(&se.unflagged[2 * round + 1]).unwrap()["s_raw"][0];
            let regs = exec.run(&se.flagged[round]).unwrap();
            assert_eq!(regs["s_raw"], vec![a, b], "round {round}");
            assert_eq!(regs["flags"], vec![false; 3], "round {round}");
            let a2 = exec.run(&se.unflagged[2 * round]).unwrap()["s_raw"][0];
            let b2 = exec.run(&se.unflagged[2 * round + 1]).unwrap()["s_raw"][0];
            assert_eq!((a2, b2), (a, b), "round {round} readout must be QND");
        }
    }

    /// Inject Z on the specified qubit after the k-th two-qubit gate whose
    /// target is that qubit.
    struct ZAfterGate {
        target_qubit: usize,
        after: usize,
        seen: usize,
    }

    impl FaultInjector for ZAfterGate {
        fn after_gate1(&mut self, _q: usize, _rng: &mut dyn RngCore) -> Option<Axis> {
            None
        }
        fn after_gate2(&mut self, _a: usize, b: usize, _rng: &mut dyn RngCore) -> (Option<Axis>, Option<Axis>) {
            if b != self.target_qubit {
                return (None, None);
            }
            let hit = self.seen == self.after;
            self.seen += 1;
            (None, hit.then_some(Axis::Z))
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
        fn idle(&mut self, _q: usize, _d: f64, _rng: &mut dyn RngCore) -> IdleEffect {
            IdleEffect::default()
        }
    }

    /// An ancilla Z after the second coupling of s0's ladder (gate order on
    /// a0: coupling 0, f1 open, coupling 1) must fire exactly f1 and deposit
    /// the remaining letters Z2 Z4 X6 X7 on the data — an X0X1-equivalent
    /// hook, visible as a lone s3 flip in a later unflagged pass.
    #[test]
    fn midladder_ancilla_z_fires_a_flag_and_hooks_the_data() {
        let se = circuits();
        let mut engine = CliffordEngine::new(N_QUBITS).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let mut noise = NoNoise;
        let mut before = [false; 4];
        {
            let mut exec = Executor::new(&mut engine, &mut noise, &mut rng);
            for (idx, slot) in before.iter_mut().enumerate() {
                *slot = exec.run(&se.unflagged[idx]).unwrap()["s_raw"][0];
            }
        }
        // a0's gate sequence: coupling 0 (seen=0), f1 open (seen=1),
        // coupling 1 (seen=2) — inject after that third gate.
        let mut hook = ZAfterGate { target_qubit: A0, after: 2, seen: 0 };
        let regs = {
            let mut exec = Executor::new(&mut engine, &mut hook, &mut rng);
            exec.run(&se.flagged[0]).unwrap()
        };
        assert_eq!(regs["flags"], vec![true, false, false], "only f1 fires");
        assert_eq!(regs["s_raw"], vec![before[0], before[1]], "ancilla Z leaves readout intact");
        let mut after = [false; 4];
        {
            let mut exec = Executor::new(&mut engine, &mut noise, &mut rng);
            for (idx, slot) in after.iter_mut().enumerate() {
                *slot = exec.run(&se.unflagged[idx]).unwrap()["s_raw"][0];
            }
        }
        let flips: Vec<bool> = before.iter().zip(&after).map(|(b, a)| b != a).collect();
        assert_eq!(flips, vec![false, false, false, true], "X0X1-like hook flips s3 alone");
    }
}
