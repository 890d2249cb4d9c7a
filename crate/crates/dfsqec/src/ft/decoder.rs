//! Real-time decoder for the concatenated code.
//!
//! X decoding: each fired pair check r_i admits X_{2i} or X_{2i+1}; for each
//! of the 2^m combinations the residual s bits are matched to a minimal set
//! of Z edges (an edge on a fired pair merges with the X choice into a Y, up
//! to the pair stabilizer).  Candidates are ranked by corrected weight first,
//! then by how few Z edges they use — Z errors dominate idling noise, so the
//! lighter Z set is the likelier explanation.  Surviving ties are grouped by
//! logical action: one class decodes cleanly, several force a seeded guess or
//! a post-selection rejection.

use crate::codes::CodeSpec;
use crate::ft::graph::{DecodingGraph, EdgeSet, GraphError, EDGES};
use crate::ft::hook::HookTable;
use crate::pauli::{PauliError, PauliString, SyndromeVector};
use rand::RngCore;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("flags {flags:03b} fired but the record names no flagged round")]
    MissingRound { flags: u8 },
    #[error("record parse: {0}")]
    Parse(String),
}

/// One cycle's measured bits. `r`/`s` hold the values the decoder consumes:
/// the unflagged readings when that extraction ran, the flagged ones
/// otherwise. Bit i of `r` is r_i, bit j of `s` is s_j, bit k of `flags` is
/// f_{k+1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyndromeRecord {
    pub r: u8,
    pub s: u8,
    pub flags: u8,
    /// Flagged round the flags belong to (1 or 2); 0 when no flags fired.
    pub flag_round: u8,
    pub unflagged_taken: bool,
    /// Per-data-qubit leak reports from the detection stage.
    pub leak_detected: u16,
}

impl SyndromeRecord {
    pub fn new(r: u8, s: u8) -> Self {
        Self { r: r & 0b1_1111, s: s & 0b1111, flags: 0, flag_round: 0, unflagged_taken: false, leak_detected: 0 }
    }

    pub fn with_flags(mut self, flags: u8, round: u8) -> Self {
        self.flags = flags & 0b111;
        self.flag_round = round;
        self
    }

    /// Redundant product check, recomputed as s parity.
    pub fn sp(&self) -> bool {
        (self.s.count_ones() & 1) == 1
    }

    pub fn is_trivial(&self) -> bool {
        self.r == 0 && self.s == 0 && self.flags == 0
    }

    /// The record as a 9-bit syndrome in generator order r0..r4, s0..s3.
    pub fn syndrome(&self) -> SyndromeVector {
        SyndromeVector::from_bits(self.r as u32 | ((self.s as u32) << 5), 9)
            .expect("9 <= max syndrome length")
    }

    pub fn parse(text: &str) -> Result<Self, DecoderError> {
        let mut r = None;
        let mut s = None;
        let mut flags = None;
        let mut round = 0u8;
        for token in text.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| DecoderError::Parse(format!("expected key=value, got {token:?}")))?;
            match key {
                "r" => r = Some(parse_bits(value, 5)?),
                "s" => s = Some(parse_bits(value, 4)?),
                "flags" => flags = Some(parse_bits(value, 3)?),
                "round" => {
                    round = value
                        .parse::<u8>()
                        .ok()
                        .filter(|v| (1..=2).contains(v))
                        .ok_or_else(|| DecoderError::Parse(format!("round must be 1 or 2, got {value:?}")))?;
                }
                other => return Err(DecoderError::Parse(format!("unknown field {other:?}"))),
            }
        }
        let r = r.ok_or_else(|| DecoderError::Parse("missing r field".into()))?;
        let s = s.ok_or_else(|| DecoderError::Parse("missing s field".into()))?;
        let flags = flags.unwrap_or(0);
        if flags != 0 && round == 0 {
            return Err(DecoderError::Parse("flags fired but no round given".into()));
        }
        let mut rec = Self::new(r, s).with_flags(flags, if flags == 0 { 0 } else { round });
        rec.unflagged_taken = !rec.is_trivial();
        Ok(rec)
    }
}

/// Bits are written index-first: `r=10000` means r0 = 1.
fn parse_bits(value: &str, n: usize) -> Result<u8, DecoderError> {
    if value.len() != n || !value.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(DecoderError::Parse(format!("expected {n} binary digits, got {value:?}")));
    }
    let mut bits = 0u8;
    for (i, b) in value.bytes().enumerate() {
        if b == b'1' {
            bits |= 1 << i;
        }
    }
    Ok(bits)
}

fn fmt_bits(bits: u8, n: usize, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    for i in 0..n {
        write!(out, "{}", (bits >> i) & 1)?;
    }
    Ok(())
}

impl fmt::Display for SyndromeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r=")?;
        fmt_bits(self.r, 5, f)?;
        write!(f, " s=")?;
        fmt_bits(self.s, 4, f)?;
        write!(f, " flags=")?;
        fmt_bits(self.flags, 3, f)?;
        if self.flags != 0 {
            write!(f, " round={}", self.flag_round)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Correct,
    PostSelect,
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub correction: PauliString,
    /// Logically inequivalent candidates tied at the minimum.
    pub ambiguous: bool,
    /// Post-selection verdict; always false in correct mode.
    pub rejected: bool,
    /// X-combination candidates examined (0 on a hook-table hit).
    pub candidates_considered: u32,
    /// Random words consumed; nonzero only for an ambiguous guess.
    pub rng_draws: u32,
}

/// Upper bound on same-key candidates: 2^5 combinations.
const MAX_CANDIDATES: usize = 32;

pub struct Decoder {
    graph: DecodingGraph,
    code: CodeSpec,
    /// Symplectic halves of the logicals, for O(1) class signatures.
    lx_x: u64,
    lx_z: u64,
    lz_x: u64,
    lz_z: u64,
    hook: Option<HookTable>,
}

#[derive(Clone, Copy)]
struct Candidate {
    x: u64,
    z: u64,
    sig: u8,
}

impl Decoder {
    pub fn new(code: &CodeSpec) -> Result<Self, DecoderError> {
        let graph = DecodingGraph::build(code)?;
        Ok(Self {
            graph,
            code: code.clone(),
            lx_x: code.logical_x.x_bits(),
            lx_z: code.logical_x.z_bits(),
            lz_x: code.logical_z.x_bits(),
            lz_z: code.logical_z.z_bits(),
            hook: None,
        })
    }

    pub fn set_hook_table(&mut self, table: HookTable) {
        self.hook = Some(table);
    }

    pub fn hook_table(&self) -> Option<&HookTable> {
        self.hook.as_ref()
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    fn signature(&self, x: u64, z: u64) -> u8 {
        let sx = ((x & self.lx_z).count_ones() + (z & self.lx_x).count_ones()) & 1;
        let sz = ((x & self.lz_z).count_ones() + (z & self.lz_x).count_ones()) & 1;
        (sx << 1 | sz) as u8
    }

    /// Assembles the fully reduced candidate for one X combination: the X
    /// choice on every fired pair (merged to Y when that pair's edge is in
    /// the set, using the pair stabilizer for odd-qubit choices) plus the
    /// unmerged Z edges.
    fn assemble(&self, r: u8, combo: u8, set: EdgeSet) -> (u64, u64) {
        let mut x = 0u64;
        let mut z = 0u64;
        let mut combo_bit = 0;
        for pair in 0..EDGES {
            let edge_here = set & (1 << pair) != 0;
            if r & (1 << pair) != 0 {
                let q = 2 * pair + ((combo >> combo_bit) & 1) as usize;
                combo_bit += 1;
                x |= 1 << q;
                if edge_here {
                    z |= 1 << q;
                }
            } else if edge_here {
                z |= 1 << (2 * pair);
            }
        }
        (x, z)
    }

    pub fn decode_full(
        &self,
        record: &SyndromeRecord,
        mode: DecodeMode,
        rng: &mut dyn RngCore,
    ) -> Result<DecodeOutcome, DecoderError> {
        if record.flags != 0 {
            if !(1..=2).contains(&record.flag_round) {
                return Err(DecoderError::MissingRound { flags: record.flags });
            }
            if let Some(table) = &self.hook {
                if let Some(correction) =
                    table.lookup(record.flag_round, record.flags, record.r, record.s)
                {
                    let mut outcome = DecodeOutcome {
                        correction: correction.clone(),
                        ambiguous: false,
                        rejected: false,
                        candidates_considered: 0,
                        rng_draws: 0,
                    };
                    if mode == DecodeMode::PostSelect {
                        outcome.rejected = Self::weight_rejected(&outcome.correction);
                    }
                    return Ok(outcome);
                }
            }
        }

        let m = record.r.count_ones();
        let combos = 1u32 << m;

        let mut best_key = (u32::MAX, u32::MAX);
        let mut mins = [Candidate { x: 0, z: 0, sig: 0 }; MAX_CANDIDATES];
        let mut n_min = 0usize;
        for combo in 0..combos as u8 {
            let mut smask = 0u8;
            let mut combo_bit = 0;
            for pair in 0..EDGES {
                if record.r & (1 << pair) != 0 {
                    let q = 2 * pair + ((combo >> combo_bit) & 1) as usize;
                    combo_bit += 1;
                    smask ^= self.graph.x_smask(q);
                }
            }
            let z_set = self.graph.decode_z(record.s ^ smask).best;
            let (x, z) = self.assemble(record.r, combo, z_set);
            let key = ((x | z).count_ones(), z_set.count_ones());
            if key < best_key {
                best_key = key;
                n_min = 0;
            }
            if key == best_key {
                let sig = self.signature(x, z);
                mins[n_min] = Candidate { x, z, sig };
                n_min += 1;
            }
        }
        debug_assert!(n_min >= 1);

        // Distinct logical classes in first-appearance order.
        let mut classes = [0usize; 4];
        let mut n_classes = 0usize;
        'cands: for i in 0..n_min {
            for &c in classes.iter().take(n_classes) {
                if mins[c].sig == mins[i].sig {
                    continue 'cands;
                }
            }
            classes[n_classes] = i;
            n_classes += 1;
        }

        let mut rng_draws = 0u32;
        let mut rejected = false;
        let ambiguous = n_classes > 1;
        let chosen = if !ambiguous {
            mins[0]
        } else {
            match mode {
                DecodeMode::Correct => {
                    rng_draws = 1;
                    let idx = ((rng.next_u32() as u64 * n_classes as u64) >> 32) as usize;
                    mins[classes[idx]]
                }
                DecodeMode::PostSelect => {
                    rejected = true;
                    mins[0]
                }
            }
        };
        let correction = PauliString::from_bits(10, chosen.x, chosen.z)?;
        if mode == DecodeMode::PostSelect && !rejected {
            rejected = Self::weight_rejected(&correction);
        }
        Ok(DecodeOutcome { correction, ambiguous, rejected, candidates_considered: combos, rng_draws })
    }

    /// Post-selection weight rules: drop pure-Z weight-2 corrections (they
    /// complete to weight-4 logicals) and anything of weight 3 or more.
    fn weight_rejected(correction: &PauliString) -> bool {
        let w = correction.weight();
        w >= 3 || (w == 2 && correction.x_bits() == 0)
    }
}
