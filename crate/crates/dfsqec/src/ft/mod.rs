//! Fault-tolerance layer: decoding graph, lookup decoder, syndrome
//! extraction circuits, flag hook table, the adaptive QEC cycle, and the
//! exhaustive single-fault scan.

pub mod cycle;
pub mod decoder;
pub mod encode;
pub mod graph;
pub mod hook;
pub mod scan;
pub mod se;
