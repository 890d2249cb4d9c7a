//! Stabilizer tableau engine with a merged Pauli frame.
//!
//! The tableau tracks a reference state through destabilizer/stabilizer rows.
//! All stochastic Pauli events (noise injections and decoder corrections
//! alike) multiply into one frame `F`; the true state is `F |ref>`. Gates
//! conjugate the frame along with the rows. A Z measurement reports the
//! reference outcome XORed with the frame's X component on that qubit; the
//! reference collapses on its own outcome and the frame is untouched, which
//! reproduces the true joint outcome distribution even under classical
//! feedback, because the reported bits are exactly the true-state bits.
//!
//! Reset clears the frame on the reset qubit: whatever error history the
//! qubit carried, a fresh |0> has none. Leaked qubits sit outside the
//! computational subspace: gates touching them are skipped and their Z
//! measurements report 1 (the dark outcome) without collapsing anything.

use rand::RngCore;

use crate::pauli::{Axis, PauliString};

use super::{Engine, EngineError};

#[derive(Debug, Clone)]
pub struct CliffordEngine {
    n: usize,
    destab: Vec<PauliString>,
    stab: Vec<PauliString>,
    frame: PauliString,
    leaked: u64,
}

impl CliffordEngine {
    /// All qubits start in |0> with an empty frame.
    pub fn new(n: usize) -> Result<Self, EngineError> {
        let mut destab = Vec::with_capacity(n);
        let mut stab = Vec::with_capacity(n);
        for q in 0..n {
            destab.push(PauliString::single(n, q, Axis::X)?);
            stab.push(PauliString::single(n, q, Axis::Z)?);
        }
        Ok(Self { n, destab, stab, frame: PauliString::identity(n)?, leaked: 0 })
    }

    pub fn stabilizer(&self, i: usize) -> &PauliString {
        &self.stab[i]
    }

    pub fn frame(&self) -> &PauliString {
        &self.frame
    }

    /// Multiply a multi-qubit Pauli error into the frame.
    pub fn inject(&mut self, error: &PauliString) -> Result<(), EngineError> {
        let mut masked = *error;
        for q in 0..self.n {
            if self.leaked >> q & 1 == 1 {
                masked.clear_qubit(q);
            }
        }
        self.frame = masked.multiply(&self.frame)?;
        Ok(())
    }

    fn conj_all(&mut self, f: impl Fn(&mut PauliString)) {
        for row in self.destab.iter_mut().chain(self.stab.iter_mut()) {
            f(row);
        }
        f(&mut self.frame);
    }

    /// Measure Z on the reference state only (no frame adjustment, no leak
    /// handling); collapses the reference.
    fn reference_measure_z(&mut self, q: usize, rng: &mut dyn RngCore) -> bool {
        let bit = 1u64 << q;
        if let Some(p) = (0..self.n).find(|&i| self.stab[i].x_bits() & bit != 0) {
            // Z_q anticommutes with a stabilizer: outcome is a fair coin.
            let outcome = rng.next_u32() & 1 == 1;
            let pivot = self.stab[p];
            for i in 0..self.n {
                if i != p && self.stab[i].x_bits() & bit != 0 {
                    self.stab[i] = self.stab[i].multiply(&pivot).expect("same width");
                }
                if self.destab[i].x_bits() & bit != 0 && i != p {
                    self.destab[i] = self.destab[i].multiply(&pivot).expect("same width");
                }
            }
            self.destab[p] = pivot;
            let mut collapsed = PauliString::single(self.n, q, Axis::Z).expect("in range");
            if outcome {
                collapsed.negate();
            }
            self.stab[p] = collapsed;
            outcome
        } else {
            // Determinate: Z_q is the product of the stabilizer rows marked
            // by destabilizers that anticommute with it.
            let mut acc = PauliString::identity(self.n).expect("in range");
            for i in 0..self.n {
                if self.destab[i].x_bits() & bit != 0 {
                    acc = acc.multiply(&self.stab[i]).expect("same width");
                }
            }
            debug_assert_eq!(acc.x_bits(), 0);
            debug_assert_eq!(acc.z_bits(), bit);
            acc.sign().expect("stabilizer products are real") < 0
        }
    }

    /// Reference-only Pauli gate, used to fix up resets without touching the
    /// frame.
    fn reference_x(&mut self, q: usize) {
        for row in self.destab.iter_mut().chain(self.stab.iter_mut()) {
            row.conj_pauli(q, Axis::X);
        }
    }

    fn fresh_zero(&mut self, q: usize, rng: &mut dyn RngCore) {
        self.leaked &= !(1u64 << q);
        if self.reference_measure_z(q, rng) {
            self.reference_x(q);
        }
        self.frame.clear_qubit(q);
    }
}

impl Engine for CliffordEngine {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn h(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        self.conj_all(|p| p.conj_h(q));
    }

    fn s(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        self.conj_all(|p| p.conj_s(q));
    }

    fn sdg(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        self.conj_all(|p| p.conj_sdg(q));
    }

    fn pauli_gate(&mut self, q: usize, axis: Axis) {
        if self.is_leaked(q) {
            return;
        }
        self.conj_all(|p| p.conj_pauli(q, axis));
    }

    fn cnot(&mut self, control: usize, target: usize) {
        if self.is_leaked(control) || self.is_leaked(target) {
            return;
        }
        self.conj_all(|p| p.conj_cnot(control, target));
    }

    fn cz(&mut self, a: usize, b: usize) {
        if self.is_leaked(a) || self.is_leaked(b) {
            return;
        }
        self.conj_all(|p| p.conj_cz(a, b));
    }

    fn rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError> {
        // Only Clifford angles are representable.
        let quarter = theta / std::f64::consts::FRAC_PI_2;
        let nearest = quarter.round();
        if (quarter - nearest).abs() > 1e-12 {
            return Err(EngineError::Unsupported { op: "non-Clifford RZ angle" });
        }
        match nearest.rem_euclid(4.0) as u8 {
            0 => {}
            1 => self.s(q),
            2 => self.pauli_gate(q, Axis::Z),
            3 => self.sdg(q),
            _ => unreachable!(),
        }
        Ok(())
    }

    fn prepare_z(&mut self, q: usize, rng: &mut dyn RngCore) {
        self.fresh_zero(q, rng);
    }

    fn measure_z(&mut self, q: usize, rng: &mut dyn RngCore) -> bool {
        if self.is_leaked(q) {
            return true;
        }
        let reference = self.reference_measure_z(q, rng);
        reference ^ (self.frame.x_bits() >> q & 1 == 1)
    }

    fn inject_axis(&mut self, q: usize, axis: Axis) {
        if self.is_leaked(q) {
            return;
        }
        let single = PauliString::single(self.n, q, axis).expect("in range");
        self.frame = single.multiply(&self.frame).expect("same width");
    }

    fn inject_rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError> {
        if theta == 0.0 {
            return Ok(());
        }
        let _ = q;
        Err(EngineError::Unsupported { op: "coherent RZ noise on the tableau engine" })
    }

    fn set_leaked(&mut self, q: usize) {
        self.leaked |= 1u64 << q;
    }

    fn is_leaked(&self, q: usize) -> bool {
        self.leaked >> q & 1 == 1
    }

    fn leak_reset(&mut self, q: usize, rng: &mut dyn RngCore) {
        self.fresh_zero(q, rng);
    }

    fn expectation(&self, observable: &PauliString) -> Result<Option<f64>, EngineError> {
        if observable.num_qubits() != self.n {
            return Err(EngineError::SizeMismatch { engine: self.n, operand: observable.num_qubits() });
        }
        let p_sign = observable.sign().map_err(|_| EngineError::NonHermitianObservable)?;
        if observable.is_identity_up_to_phase() {
            return Ok(Some(p_sign as f64));
        }
        let support = observable.x_bits() | observable.z_bits();
        if support & self.leaked != 0 {
            return Ok(None);
        }
        for row in &self.stab {
            if !row.commutes(observable)? {
                return Ok(None);
            }
        }
        // The observable commutes with the whole group, so it is +-(product
        // of the stabilizer rows its anticommuting destabilizers mark).
        let mut acc = PauliString::identity(self.n)?;
        for i in 0..self.n {
            if !self.destab[i].commutes(observable)? {
                acc = acc.multiply(&self.stab[i])?;
            }
        }
        debug_assert_eq!(acc.unsigned(), observable.unsigned());
        let reference = acc.sign().expect("stabilizer products are real") * p_sign;
        let frame_sign = if self.frame.commutes(observable)? { 1 } else { -1 };
        Ok(Some((reference * frame_sign) as f64))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;

    fn fixed_rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(7)
    }

    fn exp(e: &CliffordEngine, n: usize, text: &str) -> Option<f64> {
        e.expectation(&PauliString::parse(n, text).unwrap()).unwrap()
    }

    #[test]
    fn bell_state_stabilizers() {
        let mut rng = fixed_rng();
        let mut e = CliffordEngine::new(2).unwrap();
        e.h(0);
        e.cnot(0, 1);
        assert_eq!(exp(&e, 2, "X0X1"), Some(1.0));
        assert_eq!(exp(&e, 2, "Z0Z1"), Some(1.0));
        assert_eq!(exp(&e, 2, "-Y0Y1"), Some(1.0));
        assert_eq!(exp(&e, 2, "Z0"), None);
        // Measuring Z0 collapses; the two outcomes must agree.
        let m0 = e.measure_z(0, &mut rng);
        let m1 = e.measure_z(1, &mut rng);
        assert_eq!(m0, m1);
        assert_eq!(exp(&e, 2, "Z0Z1"), Some(1.0));
    }

    #[test]
    fn deterministic_measurement_sign() {
        let mut rng = fixed_rng();
        let mut e = CliffordEngine::new(1).unwrap();
        e.pauli_gate(0, Axis::X);
        assert!(e.measure_z(0, &mut rng));
        // |1> again after collapse.
        assert!(e.measure_z(0, &mut rng));
        assert_eq!(exp(&e, 1, "-Z0"), Some(1.0));
    }

    #[test]
    fn frame_follows_cnot_conjugation() {
        // Z injected on the target before CNOT spreads to both qubits.
        let mut e = CliffordEngine::new(2).unwrap();
        e.inject_axis(1, Axis::Z);
        e.cnot(0, 1);
        assert_eq!(e.frame().unsigned(), PauliString::parse(2, "Z0Z1").unwrap());
    }

    #[test]
    fn frame_errors_flip_reported_outcomes() {
        let mut rng = fixed_rng();
        let mut e = CliffordEngine::new(2).unwrap();
        e.inject_axis(0, Axis::X);
        assert!(e.measure_z(0, &mut rng));
        assert!(!e.measure_z(1, &mut rng));
        // The true state is X|00>: expectation sees through the frame.
        assert_eq!(exp(&e, 2, "-Z0"), Some(1.0));
    }

    #[test]
    fn injected_frame_equals_injected_gates() {
        // Same circuit, errors as frame injections vs as reference gates:
        // every Pauli expectation on the true state must agree.
        let mut a = CliffordEngine::new(3).unwrap();
        let mut b = CliffordEngine::new(3).unwrap();
        let script: &[fn(&mut CliffordEngine)] = &[
            |e| e.h(0),
            |e| e.cnot(0, 1),
            |e| e.s(1),
            |e| e.cz(1, 2),
            |e| e.h(2),
            |e| e.cnot(2, 0),
        ];
        let errors = [(1usize, Axis::Y), (0, Axis::Z), (2, Axis::X)];
        for (step, gate) in script.iter().enumerate() {
            gate(&mut a);
            gate(&mut b);
            if step < errors.len() {
                let (q, axis) = errors[step];
                a.inject_axis(q, axis);
                b.pauli_gate(q, axis);
            }
        }
        for bits in 0..(1u32 << 6) {
            let x = (bits & 0b111) as u64;
            let z = (bits >> 3) as u64;
            let p = PauliString::from_bits(3, x, z).unwrap();
            assert_eq!(a.expectation(&p).unwrap(), b.expectation(&p).unwrap(), "{p}");
        }
    }

    #[test]
    fn reset_clears_frame_and_state() {
        let mut rng = fixed_rng();
        let mut e = CliffordEngine::new(2).unwrap();
        e.h(0);
        e.cnot(0, 1);
        e.inject_axis(0, Axis::X);
        e.inject_axis(1, Axis::Z);
        e.prepare_z(0, &mut rng);
        assert_eq!(exp(&e, 2, "Z0"), Some(1.0));
        // Partner collapsed to a definite Z eigenstate, frame Z1 is intact
        // but invisible to Z measurements.
        assert!(exp(&e, 2, "Z1").is_some());
        assert_eq!(e.frame().unsigned(), PauliString::parse(2, "Z1").unwrap());
    }

    #[test]
    fn leaked_qubit_semantics() {
        let mut rng = fixed_rng();
        let mut e = CliffordEngine::new(2).unwrap();
        e.set_leaked(0);
        // Gates are skipped: the partner stays in |0>.
        e.cnot(0, 1);
        e.h(0);
        assert_eq!(exp(&e, 2, "Z1"), Some(1.0));
        // Dark outcome.
        assert!(e.measure_z(0, &mut rng));
        assert!(e.is_leaked(0));
        // Observables touching a leaked qubit are indefinite.
        assert_eq!(exp(&e, 2, "Z0"), None);
        e.leak_reset(0, &mut rng);
        assert!(!e.is_leaked(0));
        assert_eq!(exp(&e, 2, "Z0"), Some(1.0));
        assert!(!e.measure_z(0, &mut rng));
    }

    #[test]
    fn clifford_rz_angles_only() {
        let mut e = CliffordEngine::new(1).unwrap();
        e.h(0);
        // Two quarter turns = Z.
        e.rz(0, std::f64::consts::FRAC_PI_2).unwrap();
        e.rz(0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_eq!(exp(&e, 1, "-X0"), Some(1.0));
        assert!(e.rz(0, 0.3).is_err());
        assert!(e.inject_rz(0, 0.3).is_err());
        e.inject_rz(0, 0.0).unwrap();
    }

    #[test]
    fn random_outcomes_are_seed_reproducible() {
        let run = || {
            let mut rng = fixed_rng();
            let mut e = CliffordEngine::new(4).unwrap();
            let mut bits = Vec::new();
            for q in 0..4 {
                e.h(q);
                bits.push(e.measure_z(q, &mut rng));
            }
            bits
        };
        assert_eq!(run(), run());
    }
}
