//! Signed Pauli strings in symplectic bit-vector form.
//!
//! A string on `n` qubits is stored as two packed bit words (X and Z
//! components) plus a power of `i`. The canonical operator form is
//! `i^phase * X^x * Z^z` with the X factor to the left of the Z factor on
//! every qubit, so `Y = i X Z` contributes one unit of phase. Weight and
//! commutation checks are popcounts; multiplication is two XORs and a phase
//! update. The externally visible sign is restricted to ±1; the full Z4 phase
//! exists only transiently during multiplication and is reported as an error
//! if a caller asks for the sign of an imaginary product.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on qubit count so components fit one 64-bit word each.
pub const MAX_QUBITS: usize = 64;

/// Errors from Pauli algebra and parsing.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("qubit count mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("qubit count {0} exceeds maximum {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("phase is i^{k}, not a real sign")]
    ImaginaryPhase { k: u8 },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: &'static str },
    #[error("syndrome length {0} exceeds maximum 32")]
    SyndromeTooLong(usize),
}

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// (x-bit, z-bit) of the axis in symplectic form.
    pub fn xz(self) -> (bool, bool) {
        match self {
            Axis::X => (true, false),
            Axis::Y => (true, true),
            Axis::Z => (false, true),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Signed Pauli string on up to [`MAX_QUBITS`] qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
    /// Power of i in the canonical form `i^phase * X^x * Z^z`, mod 4.
    phase: u8,
}

impl PauliString {
    /// The identity on `n` qubits with +1 sign.
    pub fn identity(n: usize) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        Ok(Self { n: n as u8, x: 0, z: 0, phase: 0 })
    }

    /// A single-axis Pauli `P_q` with +1 sign.
    pub fn single(n: usize, q: usize, axis: Axis) -> Result<Self, PauliError> {
        Self::from_sparse(n, &[(q, axis)], 1)
    }

    /// Build from `(qubit, axis)` entries and a ±1 sign. Entries must not
    /// repeat a qubit.
    pub fn from_sparse(n: usize, entries: &[(usize, Axis)], sign: i8) -> Result<Self, PauliError> {
        let mut p = Self::identity(n)?;
        for &(q, axis) in entries {
            if q >= n {
                return Err(PauliError::IndexOutOfRange { index: q, n });
            }
            let bit = 1u64 << q;
            debug_assert!(p.x & bit == 0 && p.z & bit == 0, "repeated qubit {q}");
            let (xb, zb) = axis.xz();
            if xb {
                p.x |= bit;
            }
            if zb {
                p.z |= bit;
            }
            if xb && zb {
                p.phase = (p.phase + 1) & 3;
            }
        }
        if sign < 0 {
            p.phase = (p.phase + 2) & 3;
        }
        Ok(p)
    }

    /// Build directly from packed component words (sign +1).
    pub fn from_bits(n: usize, x: u64, z: u64) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let mask = mask(n);
        let (x, z) = (x & mask, z & mask);
        let phase = ((x & z).count_ones() as u8) & 3;
        Ok(Self { n: n as u8, x, z, phase })
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    /// Number of qubits acted on nontrivially.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// The axis at qubit `q`, or `None` for identity.
    pub fn axis(&self, q: usize) -> Option<Axis> {
        let bit = 1u64 << q;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => None,
            (true, false) => Some(Axis::X),
            (true, true) => Some(Axis::Y),
            (false, true) => Some(Axis::Z),
        }
    }

    /// ±1 sign. Errors if the tracked phase is imaginary.
    pub fn sign(&self) -> Result<i8, PauliError> {
        match self.display_phase() {
            0 => Ok(1),
            2 => Ok(-1),
            k => Err(PauliError::ImaginaryPhase { k }),
        }
    }

    /// Power of i in front of the letter form (Y letters absorbed), mod 4.
    fn display_phase(&self) -> u8 {
        (self.phase + 4 - (((self.x & self.z).count_ones() as u8) & 3)) & 3
    }

    /// Flip the sign (multiply by -1).
    pub fn negate(&mut self) {
        self.phase = (self.phase + 2) & 3;
    }

    /// The same operator viewed on a wider register (identity on the new
    /// qubits), preserving sign.
    pub fn embedded(&self, n: usize) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        if n < self.n as usize {
            return Err(PauliError::IndexOutOfRange { index: self.n as usize - 1, n });
        }
        Ok(Self { n: n as u8, ..*self })
    }

    /// Multiply by the scalar i.
    pub fn mul_i(&self) -> Self {
        let mut p = *self;
        p.phase = (p.phase + 1) & 3;
        p
    }

    /// Drop the phase, keeping the unsigned string.
    pub fn unsigned(&self) -> Self {
        let mut p = *self;
        p.phase = ((p.x & p.z).count_ones() as u8) & 3;
        p
    }

    /// Group product `self * rhs` with full phase tracking.
    pub fn multiply(&self, rhs: &Self) -> Result<Self, PauliError> {
        if self.n != rhs.n {
            return Err(PauliError::DimensionMismatch(self.n as usize, rhs.n as usize));
        }
        // Moving rhs's X factors left past self's Z factors anticommutes
        // pairwise: each crossing contributes -1 = i^2.
        let crossings = (self.z & rhs.x).count_ones() as u8;
        Ok(Self {
            n: self.n,
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            phase: (self.phase + rhs.phase + 2 * crossings) & 3,
        })
    }

    /// True when the two strings commute.
    pub fn commutes(&self, rhs: &Self) -> Result<bool, PauliError> {
        Ok(self.symplectic_bit(rhs)? == 0)
    }

    /// Symplectic product: 0 = commute, 1 = anticommute.
    pub fn symplectic_bit(&self, rhs: &Self) -> Result<u8, PauliError> {
        if self.n != rhs.n {
            return Err(PauliError::DimensionMismatch(self.n as usize, rhs.n as usize));
        }
        let s = (self.x & rhs.z).count_ones() + (self.z & rhs.x).count_ones();
        Ok((s & 1) as u8)
    }

    // Clifford conjugation rules P -> G P G^dag in the canonical form
    // `i^phase * X^x * Z^z`. With the phase explicit (Y carries its i in
    // `phase`, not in the letter), CNOT needs no phase term at all; the other
    // rules pick up i^2 whenever a same-qubit X and Z factor swap order, or
    // i^(+-1) when S-type gates create or absorb a Z factor next to an X.

    /// Conjugate by H on qubit `q`: X <-> Z.
    pub(crate) fn conj_h(&mut self, q: usize) {
        let bit = 1u64 << q;
        if self.x & self.z & bit != 0 {
            self.phase = (self.phase + 2) & 3;
        }
        let xq = self.x & bit;
        let zq = self.z & bit;
        self.x = (self.x & !bit) | zq;
        self.z = (self.z & !bit) | xq;
    }

    /// Conjugate by S on qubit `q`: X -> Y, Z -> Z.
    pub(crate) fn conj_s(&mut self, q: usize) {
        let bit = 1u64 << q;
        if self.x & bit != 0 {
            self.phase = (self.phase + 1) & 3;
            self.z ^= bit;
        }
    }

    /// Conjugate by S^dag on qubit `q`: X -> -Y, Z -> Z.
    pub(crate) fn conj_sdg(&mut self, q: usize) {
        let bit = 1u64 << q;
        if self.x & bit != 0 {
            self.phase = (self.phase + 3) & 3;
            self.z ^= bit;
        }
    }

    /// Conjugate by the Pauli gate `axis` on qubit `q` (sign flips only).
    pub(crate) fn conj_pauli(&mut self, q: usize, axis: Axis) {
        let bit = 1u64 << q;
        let anti = match axis {
            Axis::X => self.z & bit != 0,
            Axis::Y => (self.x ^ self.z) & bit != 0,
            Axis::Z => self.x & bit != 0,
        };
        if anti {
            self.phase = (self.phase + 2) & 3;
        }
    }

    /// Conjugate by CNOT with control `c`, target `t`.
    pub(crate) fn conj_cnot(&mut self, c: usize, t: usize) {
        let cb = 1u64 << c;
        let tb = 1u64 << t;
        if self.x & cb != 0 {
            self.x ^= tb;
        }
        if self.z & tb != 0 {
            self.z ^= cb;
        }
    }

    /// Conjugate by CZ on qubits `a`, `b`.
    pub(crate) fn conj_cz(&mut self, a: usize, b: usize) {
        let ab = 1u64 << a;
        let bb = 1u64 << b;
        if self.x & ab != 0 && self.x & bb != 0 {
            self.phase = (self.phase + 2) & 3;
        }
        if self.x & ab != 0 {
            self.z ^= bb;
        }
        if self.x & bb != 0 {
            self.z ^= ab;
        }
    }

    /// Erase both components on qubit `q`, leaving the rest untouched.
    pub(crate) fn clear_qubit(&mut self, q: usize) {
        let bit = 1u64 << q;
        self.x &= !bit;
        self.z &= !bit;
    }

    /// Parse the text form `sign? (letter index)+` (or `I` for identity) on a
    /// declared number of qubits. Indices must be strictly increasing.
    pub fn parse(n: usize, s: &str) -> Result<Self, PauliError> {
        let b = s.as_bytes();
        let mut pos = 0;
        let mut sign = 1i8;
        if pos < b.len() && (b[pos] == b'-' || b[pos] == b'+') {
            if b[pos] == b'-' {
                sign = -1;
            }
            pos += 1;
        }
        if pos >= b.len() {
            return Err(PauliError::Parse { pos, msg: "empty Pauli string" });
        }
        if b[pos] == b'I' {
            if pos + 1 != b.len() {
                return Err(PauliError::Parse { pos: pos + 1, msg: "trailing input after I" });
            }
            let mut p = Self::identity(n)?;
            if sign < 0 {
                p.negate();
            }
            return Ok(p);
        }
        let mut entries: Vec<(usize, Axis)> = Vec::new();
        let mut last: Option<usize> = None;
        while pos < b.len() {
            let axis = match b[pos] {
                b'X' => Axis::X,
                b'Y' => Axis::Y,
                b'Z' => Axis::Z,
                _ => return Err(PauliError::Parse { pos, msg: "expected X, Y, or Z" }),
            };
            pos += 1;
            let start = pos;
            while pos < b.len() && b[pos].is_ascii_digit() {
                pos += 1;
            }
            if pos == start {
                return Err(PauliError::Parse { pos, msg: "expected qubit index" });
            }
            let idx: usize = s[start..pos]
                .parse()
                .map_err(|_| PauliError::Parse { pos: start, msg: "index out of range" })?;
            if let Some(prev) = last {
                if idx <= prev {
                    return Err(PauliError::Parse { pos: start, msg: "indices must increase" });
                }
            }
            last = Some(idx);
            entries.push((idx, axis));
        }
        Self::from_sparse(n, &entries, sign)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.display_phase() {
            0 => {}
            1 => write!(f, "i")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i")?,
        }
        if self.is_identity_up_to_phase() {
            return write!(f, "I");
        }
        for q in 0..self.num_qubits() {
            if let Some(axis) = self.axis(q) {
                write!(f, "{}{}", axis.letter(), q)?;
            }
        }
        Ok(())
    }
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Ordered syndrome bits, one per generator, packed little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SyndromeVector {
    bits: u32,
    len: u8,
}

impl SyndromeVector {
    pub fn zeros(len: usize) -> Result<Self, PauliError> {
        if len > 32 {
            return Err(PauliError::SyndromeTooLong(len));
        }
        Ok(Self { bits: 0, len: len as u8 })
    }

    pub fn from_bits(bits: u32, len: usize) -> Result<Self, PauliError> {
        let mut s = Self::zeros(len)?;
        s.bits = bits & if len == 32 { u32::MAX } else { (1 << len) - 1 };
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.bits >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len());
        if v {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Parse a fixed-length bit string such as `10010`, first generator first.
    pub fn parse(s: &str) -> Result<Self, PauliError> {
        if s.len() > 32 {
            return Err(PauliError::SyndromeTooLong(s.len()));
        }
        let mut v = Self::zeros(s.len())?;
        for (i, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => v.set(i, true),
                _ => return Err(PauliError::Parse { pos: i, msg: "expected 0 or 1" }),
            }
        }
        Ok(v)
    }
}

impl fmt::Display for SyndromeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", if self.bit(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Syndrome of `error` against an ordered generator list: bit i is 1 when the
/// error anticommutes with generator i. Generator signs do not enter.
pub fn syndrome_of(error: &PauliString, generators: &[PauliString]) -> Result<SyndromeVector, PauliError> {
    let mut s = SyndromeVector::zeros(generators.len())?;
    for (i, g) in generators.iter().enumerate() {
        s.set(i, error.symplectic_bit(g)? == 1);
    }
    Ok(s)
}

/// Which single-qubit letters an enumeration may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliClass {
    Any,
    XOnly,
    ZOnly,
}

/// Exhaustive minimum-weight oracle: enumerate Pauli strings by increasing
/// weight and return every string of the first weight whose syndrome matches.
/// Intended for small `n` (cost grows as C(n,w)·3^w); this is the reference
/// the fast decoder is tested against.
pub fn brute_force_min_weight(
    syndrome: &SyndromeVector,
    generators: &[PauliString],
    n: usize,
    class: PauliClass,
) -> Result<Vec<PauliString>, PauliError> {
    if n > 16 {
        return Err(PauliError::TooManyQubits(n));
    }
    if syndrome.len() != generators.len() {
        return Err(PauliError::DimensionMismatch(syndrome.len(), generators.len()));
    }
    let mut supports: Vec<u64> = (0..1u64 << n).collect();
    supports.sort_by_key(|m| m.count_ones());
    let mut matches: Vec<PauliString> = Vec::new();
    let mut found_weight: Option<u32> = None;
    for &support in &supports {
        let w = support.count_ones();
        if let Some(fw) = found_weight {
            if w > fw {
                break;
            }
        }
        let qubits: Vec<usize> = (0..n).filter(|q| support >> q & 1 == 1).collect();
        let letter_count: usize = match class {
            PauliClass::Any => 3usize.pow(w),
            _ => 1,
        };
        for letters in 0..letter_count {
            let (mut x, mut z) = (0u64, 0u64);
            let mut rem = letters;
            for &q in &qubits {
                let axis = match class {
                    PauliClass::XOnly => Axis::X,
                    PauliClass::ZOnly => Axis::Z,
                    PauliClass::Any => {
                        let a = match rem % 3 {
                            0 => Axis::X,
                            1 => Axis::Y,
                            _ => Axis::Z,
                        };
                        rem /= 3;
                        a
                    }
                };
                let (xb, zb) = axis.xz();
                if xb {
                    x |= 1 << q;
                }
                if zb {
                    z |= 1 << q;
                }
            }
            let p = PauliString::from_bits(n, x, z)?;
            if syndrome_of(&p, generators)? == *syndrome {
                found_weight = Some(w);
                matches.push(p);
            }
        }
    }
    Ok(matches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: usize, s: &str) -> PauliString {
        PauliString::parse(n, s).unwrap()
    }

    #[test]
    fn single_letter_products() {
        let n = 1;
        let (x, y, z) = (p(n, "X0"), p(n, "Y0"), p(n, "Z0"));
        // X*Z = -iY, Z*X = iY, X*Y = iZ, Y*X = -iZ, Z*Y = -iX, Y*Z = iX.
        assert_eq!(x.multiply(&z).unwrap().to_string(), "-iY0");
        assert_eq!(z.multiply(&x).unwrap().to_string(), "iY0");
        assert_eq!(x.multiply(&y).unwrap().to_string(), "iZ0");
        assert_eq!(y.multiply(&x).unwrap().to_string(), "-iZ0");
        assert_eq!(z.multiply(&y).unwrap().to_string(), "-iX0");
        assert_eq!(y.multiply(&z).unwrap().to_string(), "iX0");
        for a in [x, y, z] {
            let sq = a.multiply(&a).unwrap();
            assert!(sq.is_identity_up_to_phase());
            assert_eq!(sq.sign().unwrap(), 1);
        }
    }

    #[test]
    fn sign_tracking_through_products() {
        let n = 2;
        let zz = p(n, "-Z0Z1");
        assert_eq!(zz.sign().unwrap(), -1);
        let sq = zz.multiply(&zz).unwrap();
        assert_eq!(sq.sign().unwrap(), 1);
        assert!(sq.is_identity_up_to_phase());
        // (X0X1)(Z0) = (X0 Z0) X1 = -i Y0 X1.
        let xx = p(n, "X0X1");
        let z0 = p(n, "Z0");
        let prod = xx.multiply(&z0).unwrap();
        assert_eq!(prod.to_string(), "-iY0X1");
        assert!(prod.sign().is_err());
        // i * X0X1 * Z0 = Y0X1 with +1 sign: emulate by multiplying by -i
        // squared... the codes module owns the logical-Y convention; here we
        // just confirm the phase exponent.
        assert_eq!(prod.display_phase(), 3);
    }

    #[test]
    fn commutation_basics() {
        let n = 2;
        assert!(!p(n, "X0").commutes(&p(n, "Z0")).unwrap());
        assert!(p(n, "X0").commutes(&p(n, "Z1")).unwrap());
        assert!(p(n, "X0X1").commutes(&p(n, "Z0Z1")).unwrap());
        assert!(!p(n, "X0X1").commutes(&p(n, "Z0")).unwrap());
    }

    #[test]
    fn parse_display_roundtrip_and_errors() {
        for s in ["X0", "-Z0Z1", "Y0X1", "X1Z6", "-I", "I", "X0Y3Z5"] {
            let q = p(10, s);
            assert_eq!(q.to_string(), s.trim_start_matches('+'));
        }
        assert!(PauliString::parse(10, "Z1Z0").is_err(), "indices must increase");
        assert!(PauliString::parse(10, "Q0").is_err());
        assert!(PauliString::parse(10, "Z").is_err());
        assert!(PauliString::parse(2, "Z5").is_err());
        assert!(PauliString::parse(10, "").is_err());
    }

    #[test]
    fn syndrome_ordering_is_generator_order() {
        let n = 2;
        let gens = [p(n, "-Z0Z1"), p(n, "X0X1")];
        let s = syndrome_of(&p(n, "X0"), &gens).unwrap();
        assert_eq!(s.to_string(), "10");
        let s = syndrome_of(&p(n, "Z0"), &gens).unwrap();
        assert_eq!(s.to_string(), "01");
    }

    #[test]
    fn brute_force_finds_all_degenerate_minima() {
        // Single generator -Z0Z1: syndrome 1 is produced by X0, Y0, X1, Y1 at
        // weight 1.
        let gens = [p(2, "-Z0Z1")];
        let s = SyndromeVector::parse("1").unwrap();
        let found = brute_force_min_weight(&s, &gens, 2, PauliClass::Any).unwrap();
        let mut reps: Vec<String> = found.iter().map(|q| q.to_string()).collect();
        reps.sort();
        assert_eq!(reps, ["X0", "X1", "Y0", "Y1"]);
        let found = brute_force_min_weight(&s, &gens, 2, PauliClass::XOnly).unwrap();
        assert_eq!(found.len(), 2);
        // Trivial syndrome at weight 0 is the identity alone.
        let s0 = SyndromeVector::parse("0").unwrap();
        let found = brute_force_min_weight(&s0, &gens, 2, PauliClass::Any).unwrap();
        assert_eq!(found.len(), 1);
        assert!(found[0].is_identity_up_to_phase());
    }

    #[test]
    fn syndrome_vector_text() {
        let v = SyndromeVector::parse("10010").unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.bit(0) && v.bit(3));
        assert_eq!(v.to_string(), "10010");
        assert!(SyndromeVector::parse("10x").is_err());
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        let m = mask(n);
        (0..=m, 0..=m, 0u8..4).prop_map(move |(x, z, ph)| {
            let mut p = PauliString::from_bits(n, x, z).unwrap();
            if ph & 2 != 0 {
                p.negate();
            }
            p
        })
    }

    proptest! {
        #[test]
        fn prop_commutes_symmetric(a in arb_pauli(8), b in arb_pauli(8)) {
            prop_assert_eq!(a.symplectic_bit(&b).unwrap(), b.symplectic_bit(&a).unwrap());
        }

        #[test]
        fn prop_weight_subadditive(a in arb_pauli(8), b in arb_pauli(8)) {
            let prod = a.multiply(&b).unwrap();
            prop_assert!(prod.weight() <= a.weight() + b.weight());
        }

        #[test]
        fn prop_multiply_associative(a in arb_pauli(6), b in arb_pauli(6), c in arb_pauli(6)) {
            let ab_c = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let a_bc = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
        }

        #[test]
        fn prop_self_product_is_positive_identity(a in arb_pauli(8)) {
            let sq = a.multiply(&a).unwrap();
            prop_assert!(sq.is_identity_up_to_phase());
            prop_assert_eq!(sq.sign().unwrap(), 1);
        }

        #[test]
        fn prop_real_strings_roundtrip(a in arb_pauli(8)) {
            // Restrict to real signs: every from_bits/negate string is real.
            let text = a.to_string();
            let back = PauliString::parse(8, &text).unwrap();
            prop_assert_eq!(a, back);
        }

        #[test]
        fn prop_syndrome_of_product_is_xor(a in arb_pauli(8), b in arb_pauli(8)) {
            let gens = [
                PauliString::parse(8, "X0Z1Z2X3").unwrap(),
                PauliString::parse(8, "-Z0Z1").unwrap(),
                PauliString::parse(8, "X4X5X6X7").unwrap(),
            ];
            let sa = syndrome_of(&a, &gens).unwrap();
            let sb = syndrome_of(&b, &gens).unwrap();
            let sp = syndrome_of(&a.multiply(&b).unwrap(), &gens).unwrap();
            prop_assert_eq!(sp.bits(), sa.bits() ^ sb.bits());
        }
    }

    /// Image of a conjugation automorphism on a full string, built from its
    /// images on the single-letter generators: Phi(i^phase X^x Z^z) =
    /// i^phase * prod Phi(X_q) * prod Phi(Z_q). Independent of the bitwise
    /// conj_* rules, so it serves as their oracle.
    fn conj_oracle(
        p: &PauliString,
        img_x: impl Fn(usize) -> PauliString,
        img_z: impl Fn(usize) -> PauliString,
    ) -> PauliString {
        let n = p.num_qubits();
        let mut acc = PauliString::identity(n).unwrap();
        for q in 0..n {
            if p.x_bits() >> q & 1 == 1 {
                acc = acc.multiply(&img_x(q)).unwrap();
            }
        }
        for q in 0..n {
            if p.z_bits() >> q & 1 == 1 {
                acc = acc.multiply(&img_z(q)).unwrap();
            }
        }
        // Reapply the full canonical-form phase of the input: its displayed
        // i-exponent plus one unit per Y site.
        let canon = ((p.x_bits() & p.z_bits()).count_ones() & 3) as u8;
        let extra = (p.sign_exponent() + canon) & 3;
        for _ in 0..extra {
            acc = acc.mul_i();
        }
        acc
    }

    impl PauliString {
        fn sign_exponent(&self) -> u8 {
            // Full i^k including the canonical Y contributions.
            let mut k = 0u8;
            let mut probe = *self;
            while probe.sign().is_err() || probe.sign().unwrap() < 0 {
                probe = probe.mul_i();
                k += 1;
            }
            (4 - k) & 3
        }
    }

    fn sp(n: usize, entries: &[(usize, Axis)], sign: i8) -> PauliString {
        PauliString::from_sparse(n, entries, sign).unwrap()
    }

    proptest! {
        #[test]
        fn prop_conj_rules_match_generator_images(
            a in arb_pauli(4),
            q in 0usize..4,
            r in 0usize..4,
        ) {
            let n = 4;
            // H on q.
            let mut got = a;
            got.conj_h(q);
            let want = conj_oracle(
                &a,
                |k| sp(n, &[(k, if k == q { Axis::Z } else { Axis::X })], 1),
                |k| sp(n, &[(k, if k == q { Axis::X } else { Axis::Z })], 1),
            );
            prop_assert_eq!(got, want, "H({})", q);

            // S on q: X -> Y.
            let mut got = a;
            got.conj_s(q);
            let want = conj_oracle(
                &a,
                |k| sp(n, &[(k, if k == q { Axis::Y } else { Axis::X })], 1),
                |k| sp(n, &[(k, Axis::Z)], 1),
            );
            prop_assert_eq!(got, want, "S({})", q);

            // S^dag on q: X -> -Y.
            let mut got = a;
            got.conj_sdg(q);
            let want = conj_oracle(
                &a,
                |k| sp(n, &[(k, if k == q { Axis::Y } else { Axis::X })], if k == q { -1 } else { 1 }),
                |k| sp(n, &[(k, Axis::Z)], 1),
            );
            prop_assert_eq!(got, want, "Sdg({})", q);

            // Pauli gates: sign flips on anticommuting letters.
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let mut got = a;
                got.conj_pauli(q, axis);
                let g = PauliString::single(n, q, axis).unwrap();
                let flip_x = !g.commutes(&sp(n, &[(q, Axis::X)], 1)).unwrap();
                let flip_z = !g.commutes(&sp(n, &[(q, Axis::Z)], 1)).unwrap();
                let want = conj_oracle(
                    &a,
                    |k| sp(n, &[(k, Axis::X)], if k == q && flip_x { -1 } else { 1 }),
                    |k| sp(n, &[(k, Axis::Z)], if k == q && flip_z { -1 } else { 1 }),
                );
                prop_assert_eq!(got, want, "{}({})", axis.letter(), q);
            }

            if q != r {
                // CNOT control q target r: X_c -> X_c X_t, Z_t -> Z_c Z_t.
                let mut got = a;
                got.conj_cnot(q, r);
                let want = conj_oracle(
                    &a,
                    |k| if k == q { sp(n, &[(q, Axis::X), (r, Axis::X)], 1) } else { sp(n, &[(k, Axis::X)], 1) },
                    |k| if k == r { sp(n, &[(q, Axis::Z), (r, Axis::Z)], 1) } else { sp(n, &[(k, Axis::Z)], 1) },
                );
                prop_assert_eq!(got, want, "CNOT({},{})", q, r);

                // CZ on q, r: X_a -> X_a Z_b both ways.
                let mut got = a;
                got.conj_cz(q, r);
                let want = conj_oracle(
                    &a,
                    |k| {
                        if k == q {
                            sp(n, &[(q, Axis::X), (r, Axis::Z)], 1)
                        } else if k == r {
                            sp(n, &[(q, Axis::Z), (r, Axis::X)], 1)
                        } else {
                            sp(n, &[(k, Axis::X)], 1)
                        }
                    },
                    |k| sp(n, &[(k, Axis::Z)], 1),
                );
                prop_assert_eq!(got, want, "CZ({},{})", q, r);
            }
        }
    }

    #[test]
    fn conj_spot_checks_with_signs() {
        let n = 2;
        // H: Y -> -Y.
        let mut p = sp(n, &[(0, Axis::Y)], 1);
        p.conj_h(0);
        assert_eq!(p, sp(n, &[(0, Axis::Y)], -1));
        // S: Y -> -X.
        let mut p = sp(n, &[(0, Axis::Y)], 1);
        p.conj_s(0);
        assert_eq!(p, sp(n, &[(0, Axis::X)], -1));
        // CNOT: Y_t -> Z_c Y_t.
        let mut p = sp(n, &[(1, Axis::Y)], 1);
        p.conj_cnot(0, 1);
        assert_eq!(p, sp(n, &[(0, Axis::Z), (1, Axis::Y)], 1));
        // CZ: X_a X_b -> +Y_a Y_b.
        let mut p = sp(n, &[(0, Axis::X), (1, Axis::X)], 1);
        p.conj_cz(0, 1);
        assert_eq!(p, sp(n, &[(0, Axis::Y), (1, Axis::Y)], 1));
        // clear_qubit drops one site.
        let mut p = sp(n, &[(0, Axis::Y), (1, Axis::X)], 1);
        p.clear_qubit(0);
        assert_eq!(p.unsigned(), sp(n, &[(1, Axis::X)], 1));
    }
}
