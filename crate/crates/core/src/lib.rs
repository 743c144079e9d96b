//! Discrete-time simulator and analysis toolkit for online scheduling of
//! weighted, deadline-constrained packets over a fading wireless channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: packets, fade traces, instances, schedule outcomes, and an
//!   independent outcome validator.
//! - [`engine`]: the step-by-step simulation loop that drives a policy,
//!   enforces the decision contract, and records a replayable decision log.
//! - [`policy`]: the online policies (a semi-greedy abort rule and an
//!   earliest-deadline rule with provisional planning) plus chain-extraction
//!   utilities for abort-sequence analysis.
//! - [`oracle`]: exact offline optima — the clairvoyant no-abort search on
//!   fading instances and the slotted bounded-delay variant.
//! - [`lab`]: instance constructions — adversarial lower-bound families,
//!   random generators, and the bounded-delay-to-fading reduction.
//! - [`harness`]: batch experiment runner with CSV/JSON reporting.

pub mod engine;
pub mod harness;
pub mod lab;
pub mod model;
pub mod oracle;
pub mod policy;

pub use engine::{replay, run, Decision, DecisionLog, EngineError, PolicyView, VisibilityMode};
pub use harness::{
    evaluate, evaluate_suite, generate, load_instances, parse_policy_spec, prepare_policy,
    run_experiment, summarize, sweep, ExperimentConfig, GeneratedInstance, GeneratorSpec,
    HarnessError, InstanceSource, PolicyEntry, PolicySummary, PreparedPolicy, RandomSuiteSpec,
    Ratio, Report, ReportRow, SweepConfig, SweepParameter, SweepReport, SweepRow,
};
pub use lab::{
    chain_bound, extract_chains, gen_phi_instance, gen_random, gen_ratio2_family,
    reduce_bounded_delay, AnnotatedInstance, Chain, FadeProcess, LabError, RandomSuiteParams,
    Reduction, WeightDist,
};
pub use model::{
    completion_step, validate_outcome, FadeTrace, Instance, ModelError, Packet, PacketId,
    ScheduleOutcome, Step,
};
pub use oracle::{
    adversary_replay, bounded_delay_greedy, bounded_delay_optimal, offline_optimal,
    offline_optimal_with_cap, BoundedDelayInstance, BoundedDelayPlan, OracleError,
    DEFAULT_ORACLE_CAP,
};
pub use policy::{phi, EdfBeta, Policy, SemiGreedy};
