//! Simulation, trace analysis, and exhaustive verification for
//! self-stabilizing spanning-tree protocols under permanent Byzantine faults
//! in the shared-variable model.
//!
//! The pieces:
//!
//! * [`topology`] — port-numbered graphs, Byzantine placement, derived
//!   metrics;
//! * [`state_model`] — configurations, local views, guarded rules,
//!   composite-atomic steps;
//! * [`protocols`] — `cafs` (cyclic re-parenting, strongly stabilizing) and
//!   `greedy` (minimum-height chasing, the negative control);
//! * [`scheduling`] — bounded-fair daemons and Byzantine write strategies;
//! * [`sim`] — seeded runs;
//! * [`trace_store`] — digest-verified trace files and replay;
//! * [`analysis`] — legitimacy, stability, perturbation intervals,
//!   containment verdicts;
//! * [`explorer`] — exhaustive fairness-bounded search: convergence
//!   certificates, exact worst-case action counts, containment certification.

pub mod analysis;
pub mod demo;
pub mod explorer;
pub mod protocols;
pub mod scheduling;
pub mod sim;
pub mod state_model;
pub mod topology;
pub mod trace_store;

pub use analysis::{
    containment_report, is_c_legitimate, is_c_stable, ContainmentParams, ContainmentReport,
    PerturbationInterval, Stability, Verdict,
};
pub use explorer::{
    certify_temporal_containment, explore, worst_case_actions, AdversaryClass, CertifyOutcome,
    ExplorationBudget, ExplorationResult, ExploreError, StartSet,
};
pub use protocols::{Cafs, Greedy};
pub use scheduling::{
    Adversary, AdversaryStrategy, DaemonMode, PolicyKind, Scheduler, SchedulerPolicy,
};
pub use sim::{random_configuration, run, spanning_configuration, RunHistory, StepRecord};
pub use state_model::{
    apply_step, enabled_rules, local_view, ByzantineWrite, Configuration, Height, LocalView,
    ProcessState, Protocol,
};
pub use topology::{generate, parse_generator_spec, GraphMetrics, ProcessId, Topology};
pub use trace_store::{record, ExecutionTrace, TraceHeader};
