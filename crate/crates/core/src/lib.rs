//! Multiport interaction combinator nets and their multi-token machines.
//!
//! The crate is organised in four layers:
//!
//! * [`net`] — the port-graph data model: cells (`gamma`, `delta2`,
//!   `epsilon`, and `delta1` in extension mode), wires, labelled free
//!   ports, validation, a line-oriented DSL, parallel composition,
//!   isomorphism via canonical forms, and vicious-circle detection.
//! * [`reduction`] — redex enumeration and the interaction rules,
//!   with leftmost / seeded-random / exhaustive strategies.
//! * [`machine`] — the multi-token machine: mobile marriage tokens
//!   carrying a pair of stacks, static status and matching tokens,
//!   internal move and marriage transitions, external labelled
//!   transitions, and the focused-sequence apparatus.
//! * [`lts`] and [`analysis`] — multiset-labelled transition systems
//!   with synchronising parallel composition, bounded (bi)simulation
//!   games, and executable checks: soundness per rule, compositionality,
//!   standardisation of computations, and termination adequacy.

pub mod analysis;
pub mod lts;
pub mod machine;
pub mod net;
pub mod reduction;

pub use net::{Cell, CellId, CellKind, Label, Mode, Net, PartialInjection, PortId};
