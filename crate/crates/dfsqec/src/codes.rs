//! Stabilizer code definitions and structural verification.
//!
//! Three codes are built here: the two-qubit decoherence-free-subspace (DFS)
//! code stabilized by -Z0Z1, the five-qubit code, and their concatenation, a
//! [[10,1,4]] code in which qubit i of the five-qubit code is realized as the
//! DFS pair (2i, 2i+1). Verification recomputes everything that the rest of
//! the crate relies on: generator commutation, logical algebra including the
//! Y = i·X·Z sign convention, group closure, and distance by coset
//! enumeration.

use serde::Serialize;
use thiserror::Error;

use crate::pauli::{syndrome_of, Axis, PauliError, PauliString, SyndromeVector};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("pauli error: {0}")]
    Pauli(#[from] PauliError),
    #[error("generators {i} and {j} anticommute")]
    NonCommutingGenerators { i: usize, j: usize },
    #[error("logical {name} anticommutes with generator {i}")]
    LogicalNotInNormalizer { name: &'static str, i: usize },
    #[error("logical X and Z must anticommute")]
    LogicalsCommute,
    #[error("logical Y differs from i*X*Z ({got})")]
    LogicalYConvention { got: String },
    #[error("generators are not independent (group size 2^{got}, expected 2^{expected})")]
    DependentGenerators { got: usize, expected: usize },
    #[error("computed distance {got} does not match declared {declared}")]
    DistanceMismatch { got: u32, declared: u32 },
    #[error("concatenation of outer generator {index} gives {got}, expected {expected}")]
    ConcatenationMismatch { index: usize, got: String, expected: String },
    #[error("expected a code with {expected} qubits, got {got}")]
    WrongBlockSize { expected: usize, got: usize },
}

/// A stabilizer code with one logical qubit.
#[derive(Debug, Clone)]
pub struct CodeSpec {
    pub name: &'static str,
    pub n: usize,
    pub k: usize,
    pub d: u32,
    /// Signed generators in the fixed order used by every syndrome in the
    /// crate (for the concatenated code: r0..r4 then s0..s3).
    pub generators: Vec<PauliString>,
    pub logical_x: PauliString,
    pub logical_y: PauliString,
    pub logical_z: PauliString,
}

impl CodeSpec {
    /// Syndrome of an error against this code's generators, in generator
    /// order.
    pub fn syndrome(&self, error: &PauliString) -> Result<SyndromeVector, CodeError> {
        Ok(syndrome_of(error, &self.generators)?)
    }

    /// True when `a` and `b` act identically on the code space: their product
    /// has trivial syndrome and commutes with both logicals (global phase is
    /// ignored).
    pub fn logically_equivalent(&self, a: &PauliString, b: &PauliString) -> Result<bool, CodeError> {
        let prod = a.multiply(b)?;
        Ok(self.syndrome(&prod)?.is_trivial()
            && prod.commutes(&self.logical_x)?
            && prod.commutes(&self.logical_z)?)
    }

    /// Logical action of a trivial-syndrome Pauli: (flips X readout, flips Z
    /// readout). An error flips the Z̄ readout when it anticommutes with Z̄.
    pub fn logical_action(&self, p: &PauliString) -> Result<(bool, bool), CodeError> {
        Ok((p.symplectic_bit(&self.logical_x)? == 1, p.symplectic_bit(&self.logical_z)? == 1))
    }
}

/// One verification check with its outcome, for structured reports.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`verify_code`]: individual checks plus the computed distance.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub code: String,
    pub n: usize,
    pub distance_declared: u32,
    pub distance_computed: u32,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The two-qubit DFS code: stabilizer -Z0Z1, code words |01> and |10>.
pub fn build_dfs() -> CodeSpec {
    let n = 2;
    let generators = vec![PauliString::parse(n, "-Z0Z1").unwrap()];
    let logical_x = PauliString::parse(n, "X0X1").unwrap();
    let logical_z = PauliString::parse(n, "Z0").unwrap();
    let logical_y = logical_y_convention(&logical_x, &logical_z);
    CodeSpec { name: "[[2,1,1]]", n, k: 1, d: 1, generators, logical_x, logical_y, logical_z }
}

/// The five-qubit code in its cyclic XZZX presentation.
pub fn build_513() -> CodeSpec {
    let n = 5;
    let generators = vec![
        PauliString::parse(n, "X0Z1Z2X3").unwrap(),
        PauliString::parse(n, "X1Z2Z3X4").unwrap(),
        PauliString::parse(n, "X0X2Z3Z4").unwrap(),
        PauliString::parse(n, "Z0X1X3Z4").unwrap(),
    ];
    let logical_x = PauliString::parse(n, "X0X1X2X3X4").unwrap();
    let logical_z = PauliString::parse(n, "Z0Z1Z2Z3Z4").unwrap();
    let logical_y = logical_y_convention(&logical_x, &logical_z);
    CodeSpec { name: "[[5,1,3]]", n, k: 1, d: 3, generators, logical_x, logical_y, logical_z }
}

/// Substitution of one code's logical operators into another code's qubits.
///
/// Outer qubit `i` becomes the inner block on qubits `(block_size*i ..
/// block_size*(i+1))`; each outer letter is replaced by the inner code's
/// corresponding logical operator, with signs composed through the
/// phase-tracking multiply.
#[derive(Debug, Clone)]
pub struct ConcatenationMap {
    pub outer: CodeSpec,
    pub inner: CodeSpec,
}

impl ConcatenationMap {
    pub fn new(outer: CodeSpec, inner: CodeSpec) -> Self {
        Self { outer, inner }
    }

    pub fn total_qubits(&self) -> usize {
        self.outer.n * self.inner.n
    }

    /// Map an operator on the outer code's qubits to the physical qubits.
    pub fn substitute(&self, p: &PauliString) -> Result<PauliString, CodeError> {
        if p.num_qubits() != self.outer.n {
            return Err(CodeError::WrongBlockSize { expected: self.outer.n, got: p.num_qubits() });
        }
        let n = self.total_qubits();
        let mut out = PauliString::identity(n)?;
        if p.sign()? < 0 {
            out.negate();
        }
        for q in 0..self.outer.n {
            let logical = match p.axis(q) {
                None => continue,
                Some(Axis::X) => &self.inner.logical_x,
                Some(Axis::Y) => &self.inner.logical_y,
                Some(Axis::Z) => &self.inner.logical_z,
            };
            out = out.multiply(&embed(logical, n, q * self.inner.n)?)?;
        }
        Ok(out)
    }

    /// The inner code's generators on every block, block order first.
    pub fn inner_generators(&self) -> Result<Vec<PauliString>, CodeError> {
        let n = self.total_qubits();
        let mut gens = Vec::new();
        for block in 0..self.outer.n {
            for g in &self.inner.generators {
                gens.push(embed(g, n, block * self.inner.n)?);
            }
        }
        Ok(gens)
    }
}

/// Translate a Pauli string to a wider register at a qubit offset.
fn embed(p: &PauliString, n: usize, offset: usize) -> Result<PauliString, CodeError> {
    let mut entries = Vec::new();
    for q in 0..p.num_qubits() {
        if let Some(axis) = p.axis(q) {
            entries.push((q + offset, axis));
        }
    }
    Ok(PauliString::from_sparse(n, &entries, p.sign()?)?)
}

/// The concatenated [[10,1,4]] code: DFS pairs inside the five-qubit code.
///
/// Generator order is fixed crate-wide: r0..r4 (the per-pair -ZZ checks),
/// then s0..s3 (the substituted five-qubit generators).
pub fn build_1014() -> CodeSpec {
    let map = ConcatenationMap::new(build_513(), build_dfs());
    let n = map.total_qubits();
    let mut generators = map.inner_generators().unwrap();
    for g in &map.outer.generators {
        generators.push(map.substitute(g).unwrap());
    }
    let logical_x = map.substitute(&map.outer.logical_x).unwrap();
    let logical_z = map.substitute(&map.outer.logical_z).unwrap();
    let logical_y = logical_y_convention(&logical_x, &logical_z);
    CodeSpec { name: "[[10,1,4]]", n, k: 1, d: 4, generators, logical_x, logical_y, logical_z }
}

/// The crate-wide logical-Y convention: Y = i·X·Z, which lands on a +1-phase
/// string for every code built here.
fn logical_y_convention(x: &PauliString, z: &PauliString) -> PauliString {
    x.multiply(z).unwrap().mul_i()
}

/// Full structural verification of a code.
pub fn verify_code(code: &CodeSpec) -> Result<VerifyReport, CodeError> {
    let mut checks = Vec::new();
    let mut fail: Option<CodeError> = None;

    // Pairwise generator commutation.
    let mut commute_ok = true;
    'outer: for i in 0..code.generators.len() {
        for j in (i + 1)..code.generators.len() {
            if !code.generators[i].commutes(&code.generators[j])? {
                commute_ok = false;
                fail.get_or_insert(CodeError::NonCommutingGenerators { i, j });
                checks.push(CheckResult {
                    name: "generators_commute".into(),
                    passed: false,
                    detail: format!("generators {i} and {j} anticommute"),
                });
                break 'outer;
            }
        }
    }
    if commute_ok {
        checks.push(CheckResult {
            name: "generators_commute".into(),
            passed: true,
            detail: format!("{} generators pairwise commute", code.generators.len()),
        });
    }

    // Generator independence (group closure size).
    let rank = symplectic_rank(&code.generators);
    let indep = rank == code.generators.len();
    if !indep {
        fail.get_or_insert(CodeError::DependentGenerators { got: rank, expected: code.generators.len() });
    }
    checks.push(CheckResult {
        name: "generators_independent".into(),
        passed: indep,
        detail: format!("group closure size 2^{rank} from {} generators", code.generators.len()),
    });

    // Logicals normalize the stabilizer.
    for (name, l) in [("X", &code.logical_x), ("Y", &code.logical_y), ("Z", &code.logical_z)] {
        let mut ok = true;
        for (i, g) in code.generators.iter().enumerate() {
            if !l.commutes(g)? {
                ok = false;
                fail.get_or_insert(CodeError::LogicalNotInNormalizer { name: logical_name(name), i });
                break;
            }
        }
        checks.push(CheckResult {
            name: format!("logical_{name}_in_normalizer"),
            passed: ok,
            detail: format!("logical {name} commutes with all generators"),
        });
    }

    // Logical algebra: X̄ and Z̄ anticommute, Ȳ = i X̄ Z̄ with +1 sign.
    let xz_anti = !code.logical_x.commutes(&code.logical_z)?;
    if !xz_anti {
        fail.get_or_insert(CodeError::LogicalsCommute);
    }
    checks.push(CheckResult {
        name: "logical_xz_anticommute".into(),
        passed: xz_anti,
        detail: "logical X and Z anticommute".into(),
    });
    let y_expected = code.logical_x.multiply(&code.logical_z)?.mul_i();
    let y_ok = y_expected == code.logical_y && code.logical_y.sign() == Ok(1);
    if !y_ok {
        fail.get_or_insert(CodeError::LogicalYConvention { got: code.logical_y.to_string() });
    }
    checks.push(CheckResult {
        name: "logical_y_convention".into(),
        passed: y_ok,
        detail: format!("logical Y = i·X·Z = {y_expected}"),
    });

    // Distance by coset enumeration: the smallest-weight Pauli commuting with
    // every generator while acting nontrivially on the logical qubit.
    let computed = compute_distance(code)?;
    let d_ok = computed == code.d;
    if !d_ok {
        fail.get_or_insert(CodeError::DistanceMismatch { got: computed, declared: code.d });
    }
    checks.push(CheckResult {
        name: "distance".into(),
        passed: d_ok,
        detail: format!("coset enumeration gives distance {computed} (declared {})", code.d),
    });

    let report = VerifyReport {
        code: code.name.to_string(),
        n: code.n,
        distance_declared: code.d,
        distance_computed: computed,
        checks,
    };
    match fail {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn logical_name(name: &str) -> &'static str {
    match name {
        "X" => "X",
        "Y" => "Y",
        _ => "Z",
    }
}

/// Rank of the generator set over GF(2) in symplectic (x|z) form.
fn symplectic_rank(gens: &[PauliString]) -> usize {
    let mut rows: Vec<u128> = gens
        .iter()
        .map(|g| ((g.x_bits() as u128) << 64) | g.z_bits() as u128)
        .collect();
    let mut rank = 0;
    for bit in (0..128).rev() {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && rows[r] >> bit & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Code distance by coset enumeration: smallest weight w such that some
/// weight-w Pauli has trivial syndrome and anticommutes with a logical
/// operator.
pub fn compute_distance(code: &CodeSpec) -> Result<u32, CodeError> {
    let n = code.n;
    let mut supports: Vec<u64> = (0..1u64 << n).collect();
    supports.sort_by_key(|m| m.count_ones());
    for &support in supports.iter().skip(1) {
        let w = support.count_ones();
        let qubits: Vec<usize> = (0..n).filter(|q| support >> q & 1 == 1).collect();
        for letters in 0..3usize.pow(w) {
            let (mut x, mut z) = (0u64, 0u64);
            let mut rem = letters;
            for &q in &qubits {
                match rem % 3 {
                    0 => x |= 1 << q,
                    1 => {
                        x |= 1 << q;
                        z |= 1 << q;
                    }
                    _ => z |= 1 << q,
                }
                rem /= 3;
            }
            let p = PauliString::from_bits(n, x, z)?;
            if code.syndrome(&p)?.is_trivial()
                && (!p.commutes(&code.logical_x)? || !p.commutes(&code.logical_z)?)
            {
                return Ok(w);
            }
        }
    }
    Ok(n as u32)
}

/// The weight-4 logical representatives of the concatenated code that make
/// syndrome ties possible: Z_{2i-2} X_{2i} X_{2i+1} Z_{2i+2} with indices mod
/// 10. Each is verified to normalize the stabilizer and act nontrivially.
pub fn minimal_even_distance_logicals(code: &CodeSpec) -> Result<Vec<PauliString>, CodeError> {
    if code.n != 10 {
        return Err(CodeError::WrongBlockSize { expected: 10, got: code.n });
    }
    let mut out = Vec::new();
    for i in 0..5usize {
        let left = (2 * i + 8) % 10; // 2i - 2 mod 10
        let right = (2 * i + 2) % 10;
        let mut entries = vec![(left, Axis::Z), (2 * i, Axis::X), (2 * i + 1, Axis::X), (right, Axis::Z)];
        entries.sort_by_key(|e| e.0);
        let p = PauliString::from_sparse(code.n, &entries, 1)?;
        if !code.syndrome(&p)?.is_trivial() {
            return Err(CodeError::ConcatenationMismatch {
                index: i,
                got: p.to_string(),
                expected: "trivial syndrome".into(),
            });
        }
        let (fx, fz) = code.logical_action(&p)?;
        if !fx && !fz {
            return Err(CodeError::ConcatenationMismatch {
                index: i,
                got: p.to_string(),
                expected: "nontrivial logical action".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

/// Verify that the concatenation map reproduces the stored [[10,1,4]]
/// generators and logicals bit-for-bit including signs.
pub fn verify_concatenation(code: &CodeSpec) -> Result<Vec<CheckResult>, CodeError> {
    let map = ConcatenationMap::new(build_513(), build_dfs());
    let mut checks = Vec::new();
    let inner = map.inner_generators()?;
    for (i, g) in inner.iter().enumerate() {
        let stored = &code.generators[i];
        if g != stored {
            return Err(CodeError::ConcatenationMismatch {
                index: i,
                got: g.to_string(),
                expected: stored.to_string(),
            });
        }
    }
    checks.push(CheckResult {
        name: "pair_checks_match".into(),
        passed: true,
        detail: "r0..r4 equal the DFS stabilizer on each pair".into(),
    });
    for (j, g) in map.outer.generators.iter().enumerate() {
        let sub = map.substitute(g)?;
        let stored = &code.generators[inner.len() + j];
        if &sub != stored {
            return Err(CodeError::ConcatenationMismatch {
                index: inner.len() + j,
                got: sub.to_string(),
                expected: stored.to_string(),
            });
        }
    }
    checks.push(CheckResult {
        name: "substituted_generators_match".into(),
        passed: true,
        detail: "s0..s3 equal the substituted five-qubit generators".into(),
    });
    for (name, outer_l, stored) in [
        ("X", &map.outer.logical_x, &code.logical_x),
        ("Y", &map.outer.logical_y, &code.logical_y),
        ("Z", &map.outer.logical_z, &code.logical_z),
    ] {
        let sub = map.substitute(outer_l)?;
        if &sub != stored {
            return Err(CodeError::ConcatenationMismatch {
                index: 9,
                got: sub.to_string(),
                expected: stored.to_string(),
            });
        }
        checks.push(CheckResult {
            name: format!("logical_{name}_matches"),
            passed: true,
            detail: format!("substituted logical {name} = {sub}"),
        });
    }
    Ok(checks)
}
