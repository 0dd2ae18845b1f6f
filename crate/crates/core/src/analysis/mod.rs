//! Executable checks over nets and their machines: per-rule soundness,
//! compositionality, computation standardisation, and the termination
//! adequacy comparison, plus the corpus they run on.

pub mod checks;
pub mod corpus;
pub mod standard;
pub mod termination;

pub use checks::{
    adequacy_check, compositionality_check, default_probes, preservation_probe, soundness_check,
    AdequacyReport, CheckError, PreservationReport, SoundnessReport,
};
pub use standard::{random_computation, standardize, Computation, StandardComputation, Thunk};
pub use termination::{net_fin, net_inf, net_verdicts, tm_fin, tm_inf, tm_verdicts, Bounds, TerminationVerdict, Tri};
