//! Dense statevector engine for coherent-noise runs.
//!
//! Amplitudes are indexed little-endian: qubit `q` is bit `q` of the index.
//! Unlike the tableau engine there is no Pauli frame; injected errors and
//! decoder corrections are applied as physical operations. Leak semantics
//! match the tableau engine: gates on leaked qubits are skipped and their Z
//! measurements report the dark outcome 1.

use num_complex::Complex64;
use rand::RngCore;

use crate::pauli::{Axis, PauliString};

use super::{Engine, EngineError};

/// Dense amplitudes above this size do not fit the desk-scale budget.
pub const MAX_STATEVECTOR_QUBITS: usize = 22;

#[derive(Debug, Clone)]
pub struct StatevectorEngine {
    n: usize,
    amps: Vec<Complex64>,
    leaked: u64,
}

/// Uniform f64 in [0, 1) from the top 53 bits of one draw.
pub(crate) fn rand_f64(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl StatevectorEngine {
    pub fn new(n: usize) -> Result<Self, EngineError> {
        if n > MAX_STATEVECTOR_QUBITS {
            return Err(EngineError::Unsupported { op: "statevector beyond the qubit cap" });
        }
        let mut amps = vec![Complex64::ZERO; 1 << n];
        amps[0] = Complex64::ONE;
        Ok(Self { n, amps, leaked: 0 })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Result<Complex64, EngineError> {
        if self.n != other.n {
            return Err(EngineError::SizeMismatch { engine: self.n, operand: other.n });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |<self|other>|^2.
    pub fn overlap(&self, other: &Self) -> Result<f64, EngineError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Apply a full signed Pauli string as a physical operation, including
    /// its global phase.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), EngineError> {
        if p.num_qubits() != self.n {
            return Err(EngineError::SizeMismatch { engine: self.n, operand: p.num_qubits() });
        }
        let x = p.x_bits();
        let z = p.z_bits();
        // Canonical form i^phase X^x Z^z: recover i^phase from the sign and
        // the per-Y units.
        let mut k = ((x & z).count_ones() & 3) as u8;
        if p.sign().map_err(|_| EngineError::NonHermitianObservable)? < 0 {
            k = (k + 2) & 3;
        }
        let scalar = [Complex64::ONE, Complex64::I, -Complex64::ONE, -Complex64::I][k as usize];
        let len = self.amps.len();
        let mut out = vec![Complex64::ZERO; len];
        for i in 0..len {
            let sign = if ((i as u64 & z).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
            out[i ^ x as usize] = scalar * sign * self.amps[i];
        }
        self.amps = out;
        Ok(())
    }

    /// Project qubit `q` onto the given Z outcome, renormalize, and return
    /// the probability the branch had. Intended for post-selected analyses.
    pub fn project_z(&mut self, q: usize, outcome: bool) -> f64 {
        let bit = 1usize << q;
        let keep = |i: usize| (i & bit != 0) == outcome;
        let p: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!(p > 1e-15, "projecting onto a zero-probability branch");
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a = if keep(i) { *a * scale } else { Complex64::ZERO };
        }
        p
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let j = i | bit;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn phase_where(&mut self, mask: impl Fn(usize) -> bool, phase: Complex64) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            if mask(i) {
                *a *= phase;
            }
        }
    }

    fn prob_one(&self, q: usize) -> f64 {
        let bit = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn fresh_zero(&mut self, q: usize, rng: &mut dyn RngCore) {
        self.leaked &= !(1u64 << q);
        let p1 = self.prob_one(q);
        let outcome = if p1 >= 1.0 - 1e-12 {
            true
        } else if p1 <= 1e-12 {
            false
        } else {
            rand_f64(rng) < p1
        };
        self.project_z(q, outcome);
        if outcome {
            let m = [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]];
            self.apply_1q(q, m);
        }
    }
}

impl Engine for StatevectorEngine {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn h(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.apply_1q(q, [[s, s], [s, -s]]);
    }

    fn s(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        let bit = 1usize << q;
        self.phase_where(|i| i & bit != 0, Complex64::I);
    }

    fn sdg(&mut self, q: usize) {
        if self.is_leaked(q) {
            return;
        }
        let bit = 1usize << q;
        self.phase_where(|i| i & bit != 0, -Complex64::I);
    }

    fn pauli_gate(&mut self, q: usize, axis: Axis) {
        if self.is_leaked(q) {
            return;
        }
        let bit = 1usize << q;
        match axis {
            Axis::X => self.apply_1q(q, [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]]),
            Axis::Y => self.apply_1q(q, [[Complex64::ZERO, -Complex64::I], [Complex64::I, Complex64::ZERO]]),
            Axis::Z => self.phase_where(|i| i & bit != 0, -Complex64::ONE),
        }
    }

    fn cnot(&mut self, control: usize, target: usize) {
        if self.is_leaked(control) || self.is_leaked(target) {
            return;
        }
        let cb = 1usize << control;
        let tb = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn cz(&mut self, a: usize, b: usize) {
        if self.is_leaked(a) || self.is_leaked(b) {
            return;
        }
        let ab = 1usize << a;
        let bb = 1usize << b;
        self.phase_where(|i| i & ab != 0 && i & bb != 0, -Complex64::ONE);
    }

    fn rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError> {
        if self.is_leaked(q) {
            return Ok(());
        }
        let bit = 1usize << q;
        let minus = Complex64::from_polar(1.0, -theta / 2.0);
        let plus = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & bit == 0 { minus } else { plus };
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
        let p1 = self.prob_one(q);
        let outcome = if p1 >= 1.0 - 1e-12 {
            true
        } else if p1 <= 1e-12 {
            false
        } else {
            rand_f64(rng) < p1
        };
        self.project_z(q, outcome);
        outcome
    }

    fn inject_axis(&mut self, q: usize, axis: Axis) {
        self.pauli_gate(q, axis);
    }

    fn inject_rz(&mut self, q: usize, theta: f64) -> Result<(), EngineError> {
        self.rz(q, theta)
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
        let support = observable.x_bits() | observable.z_bits();
        if support & self.leaked != 0 {
            return Ok(None);
        }
        let x = observable.x_bits() as usize;
        let z = observable.z_bits();
        let mut k = ((observable.x_bits() & z).count_ones() & 3) as u8;
        if observable.sign().map_err(|_| EngineError::NonHermitianObservable)? < 0 {
            k = (k + 2) & 3;
        }
        let scalar = [Complex64::ONE, Complex64::I, -Complex64::ONE, -Complex64::I][k as usize];
        let mut acc = Complex64::ZERO;
        for (i, a) in self.amps.iter().enumerate() {
            let sign = if ((i as u64 & z).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
            acc += self.amps[i ^ x].conj() * scalar * sign * a;
        }
        debug_assert!(acc.im.abs() < 1e-9, "Hermitian expectation must be real");
        Ok(Some(acc.re))
    }
}
