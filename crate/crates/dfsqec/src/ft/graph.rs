//! Decoding graph for Z errors on the concatenated code.
//!
//! Five check nodes: s0..s3 plus the redundant product check sp = s0*s1*s2*s3.
//! Each even-index Z error flips exactly two nodes, so Z decoding is matching
//! on a cycle; odd-index Z errors equal even ones up to the pair stabilizers.

use crate::codes::CodeSpec;
use crate::pauli::{Axis, PauliError, PauliString};
use thiserror::Error;

pub const NODES: usize = 5;
pub const EDGES: usize = 5;

/// Bitmask over the five edges; bit i is the even-index Z on pair i.
pub type EdgeSet = u8;
pub const ALL_EDGES: EdgeSet = 0b1_1111;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("expected the 10-qubit concatenated code, got n={n} with {gens} generators")]
    WrongCode { n: usize, gens: usize },
    #[error("Z on qubit {qubit} flips {count} check nodes, expected exactly 2")]
    NotGraphLike { qubit: usize, count: usize },
    #[error("check adjacency is not a single cycle")]
    NotACycle,
    #[error("X on qubit {qubit} flips the wrong pair checks")]
    BadPairCheck { qubit: usize },
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// The two edge sets compatible with a fired-node pattern. `alt` is only
/// populated on an exact size tie, which a 5-edge cycle cannot produce; it is
/// kept so callers handle the general matching contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZCandidates {
    pub best: EdgeSet,
    pub alt: Option<EdgeSet>,
}

#[derive(Debug, Clone)]
pub struct DecodingGraph {
    /// Node pair flipped by Z_{2i}; node 4 is the product check.
    edge_nodes: [(u8, u8); EDGES],
    /// cycle_edges[j] joins cycle_nodes[j] and cycle_nodes[(j+1) % 5].
    cycle_nodes: [u8; NODES],
    cycle_edges: [u8; EDGES],
    /// s0..s3 bits flipped by X_q, for q in 0..10.
    x_smask: [u8; 10],
    /// s0..s3 bits flipped by the edge's Z (node pair restricted to s0..s3).
    edge_smask: [u8; EDGES],
}

impl DecodingGraph {
    pub fn build(code: &CodeSpec) -> Result<Self, GraphError> {
        if code.n != 10 || code.generators.len() != 9 {
            return Err(GraphError::WrongCode { n: code.n, gens: code.generators.len() });
        }
        let mut nodes: Vec<PauliString> = code.generators[5..9].to_vec();
        let mut product = nodes[0].clone();
        for node in &nodes[1..] {
            product = product.multiply(node)?;
        }
        nodes.push(product);

        let mut edge_nodes = [(0u8, 0u8); EDGES];
        let mut edge_smask = [0u8; EDGES];
        for pair in 0..EDGES {
            let z = PauliString::single(10, 2 * pair, Axis::Z)?;
            let mut hit = Vec::new();
            for (idx, node) in nodes.iter().enumerate() {
                if !z.commutes(node)? {
                    hit.push(idx as u8);
                }
            }
            if hit.len() != 2 {
                return Err(GraphError::NotGraphLike { qubit: 2 * pair, count: hit.len() });
            }
            edge_nodes[pair] = (hit[0], hit[1]);
            for &n in &hit {
                if n < 4 {
                    edge_smask[pair] |= 1 << n;
                }
            }
        }

        // X_q must flip the pair check r_{q/2} and no other r; its s-bits are
        // free and recorded in x_smask.
        let mut x_smask = [0u8; 10];
        for q in 0..10 {
            let x = PauliString::single(10, q, Axis::X)?;
            let synd = code.syndrome(&x).map_err(|_| GraphError::BadPairCheck { qubit: q })?;
            let r_part = synd.bits() & 0b1_1111;
            if r_part != 1 << (q / 2) {
                return Err(GraphError::BadPairCheck { qubit: q });
            }
            x_smask[q] = ((synd.bits() >> 5) & 0b1111) as u8;
        }

        let (cycle_nodes, cycle_edges) = walk_cycle(&edge_nodes)?;
        Ok(Self { edge_nodes, cycle_nodes, cycle_edges, x_smask, edge_smask })
    }

    pub fn edge_endpoints(&self, edge: usize) -> (u8, u8) {
        self.edge_nodes[edge]
    }

    /// s0..s3 bits flipped by X_q.
    pub fn x_smask(&self, q: usize) -> u8 {
        self.x_smask[q]
    }

    pub fn edge_smask(&self, edge: usize) -> u8 {
        self.edge_smask[edge]
    }

    /// The even-index Z error an edge stands for.
    pub fn edge_pauli(&self, edge: usize) -> PauliString {
        PauliString::single(10, 2 * edge, Axis::Z).expect("10 <= MAX_QUBITS")
    }

    /// Fired-node mask for four measured s bits; the product node fires on
    /// odd parity.
    fn fired(s_bits: u8) -> u8 {
        let s = s_bits & 0b1111;
        let parity = (s.count_ones() & 1) as u8;
        s | (parity << 4)
    }

    /// Minimum-size edge sets whose boundary is the fired-node pattern of
    /// `s_bits`. Pairs fired nodes by walking the cycle once; the complement
    /// is the only other solution.
    pub fn decode_z(&self, s_bits: u8) -> ZCandidates {
        let fired = Self::fired(s_bits);
        let mut inside = false;
        let mut set: EdgeSet = 0;
        for j in 0..EDGES {
            if fired & (1 << self.cycle_nodes[j]) != 0 {
                inside = !inside;
            }
            if inside {
                set |= 1 << self.cycle_edges[j];
            }
        }
        debug_assert!(!inside, "fired count must be even");
        let comp = set ^ ALL_EDGES;
        debug_assert_eq!(self.edge_set_boundary(set), fired);
        debug_assert_eq!(self.edge_set_boundary(comp), fired);
        let (a, b) = if set.count_ones() <= comp.count_ones() { (set, comp) } else { (comp, set) };
        if a.count_ones() == b.count_ones() {
            ZCandidates { best: a, alt: Some(b) }
        } else {
            ZCandidates { best: a, alt: None }
        }
    }

    fn edge_set_boundary(&self, set: EdgeSet) -> u8 {
        let mut fired = 0u8;
        for e in 0..EDGES {
            if set & (1 << e) != 0 {
                let (a, b) = self.edge_nodes[e];
                fired ^= (1 << a) | (1 << b);
            }
        }
        fired
    }
}

/// Orders nodes and edges around the unique cycle, starting from node 0 via
/// its lowest-numbered edge.
fn walk_cycle(edge_nodes: &[(u8, u8); EDGES]) -> Result<([u8; NODES], [u8; EDGES]), GraphError> {
    let mut incident: [Vec<u8>; NODES] = Default::default();
    for (e, &(a, b)) in edge_nodes.iter().enumerate() {
        incident[a as usize].push(e as u8);
        incident[b as usize].push(e as u8);
    }
    if incident.iter().any(|v| v.len() != 2) {
        return Err(GraphError::NotACycle);
    }

    let mut cycle_nodes = [0u8; NODES];
    let mut cycle_edges = [0u8; EDGES];
    let mut node = 0u8;
    let mut edge = incident[0][0];
    for j in 0..EDGES {
        cycle_nodes[j] = node;
        cycle_edges[j] = edge;
        let (a, b) = edge_nodes[edge as usize];
        node = if a == node { b } else { a };
        edge = *incident[node as usize]
            .iter()
            .find(|&&e| e != edge)
            .expect("degree-2 node has another edge");
    }
    if node != 0 {
        return Err(GraphError::NotACycle);
    }
    let mut seen = [false; NODES];
    for &n in &cycle_nodes {
        seen[n as usize] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(GraphError::NotACycle);
    }
    Ok((cycle_nodes, cycle_edges))
}
