//! Static robustness analysis for transaction programs running under
//! multiversion Read Committed (MVRC).
//!
//! A workload is a relational schema plus a set of abstract transaction
//! programs (BTPs): typed statements over relations with loops, branching,
//! and foreign-key annotations. The analysis unfolds each program into a
//! finite set of linear programs, builds a summary graph over-approximating
//! every dependency that an MVRC schedule can exhibit between program
//! instantiations, and searches that graph for dangerous cycle patterns.
//! If none exist, every MVRC-allowed execution of the workload is
//! conflict-serializable and the workload can safely run under MVRC.
//!
//! The [`oracle`] module is an independent brute-force implementation of the
//! multiversion schedule semantics. It instantiates linear programs into
//! concrete transactions, enumerates or samples MVRC-allowed schedules, and
//! cross-checks the analysis (dependency classification, cycle conditions,
//! and summary-graph coverage) at desk scale.

pub mod bench;
pub mod dsl;
pub mod oracle;
pub mod robustness;
pub mod sql;
pub mod summary;
pub mod unfold;
pub mod workload;
