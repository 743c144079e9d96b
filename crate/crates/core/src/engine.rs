//! Step-by-step simulation of an online policy against a fade trace.
//!
//! The engine owns the clock. At every step it batches that step's arrivals,
//! eagerly expires pending packets that can no longer meet their deadline
//! (quality is non-negative, so infeasibility is permanent), invokes the
//! policy exactly once, applies the decision, and only then accumulates the
//! step's channel quality into the running transmission. Aborts take effect
//! at the start of a step — the aborted packet gives up all progress and the
//! step's quality goes to its replacement.
//!
//! Policies see the channel through a [`PolicyView`]. Under
//! [`VisibilityMode::FadeKnown`] the full trace is visible; under
//! [`VisibilityMode::FadeUnknownWithCommitOracle`] the only channel
//! information is the current step's quality and a boolean per-packet
//! feasibility query ("would a commit right now finish by the deadline?").
//! Because candidates are pre-filtered by that query, a committed packet is
//! guaranteed to complete on time unless the policy itself aborts it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    completion_step, reaches_unit_length, validate_outcome, FadeTrace, Instance, Packet, PacketId,
    ScheduleOutcome, Step, Transmission, TxStatus,
};
use crate::policy::Policy;

/// How much of the channel a policy is allowed to observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMode {
    /// The policy sees the entire fade trace.
    FadeKnown,
    /// The policy sees only the current step's quality plus a one-step
    /// commit oracle: a boolean per packet saying whether a transmission
    /// started now would finish by that packet's deadline.
    FadeUnknownWithCommitOracle,
}

impl fmt::Display for VisibilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VisibilityMode::FadeKnown => "fade_known",
            VisibilityMode::FadeUnknownWithCommitOracle => "fade_unknown_with_commit_oracle",
        })
    }
}

/// What a policy may do at a step boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Keep transmitting the running packet. Legal only while one is running.
    Continue,
    /// Transmit nothing this step. Legal only while nothing is running.
    Idle,
    /// Commit a feasible pending packet. Legal only while nothing is running.
    Start(PacketId),
    /// Abort the running packet (it returns to pending with zero progress)
    /// and commit a feasible pending packet in the same step.
    AbortAndStart(PacketId),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Continue => write!(f, "continue"),
            Decision::Idle => write!(f, "idle"),
            Decision::Start(id) => write!(f, "start({id})"),
            Decision::AbortAndStart(id) => write!(f, "abort_and_start({id})"),
        }
    }
}

/// The running transmission as shown to the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningView {
    pub packet: Packet,
    pub started: Step,
}

/// Everything a policy may consult when deciding.
///
/// `pending` lists the released, not-yet-expired packets (the running packet
/// is not among them), sorted by id; every entry passes the feasibility
/// query at `now` because the engine drops dead packets before deciding.
#[derive(Debug, Clone, Copy)]
pub struct PolicyView<'a> {
    pub now: Step,
    pub pending: &'a [Packet],
    pub running: Option<RunningView>,
    quality_now: f64,
    completion_now: Option<Step>,
    trace: Option<&'a FadeTrace>,
}

impl<'a> PolicyView<'a> {
    /// Channel quality of the current step (visible in every mode).
    pub fn quality_now(&self) -> f64 {
        self.quality_now
    }

    /// One-step commit oracle: would a transmission started now complete by
    /// `packet`'s deadline?
    pub fn feasible(&self, packet: &Packet) -> bool {
        matches!(self.completion_now, Some(c) if c <= packet.deadline)
    }

    /// Full fade trace, available only under [`VisibilityMode::FadeKnown`].
    pub fn trace(&self) -> Option<&'a FadeTrace> {
        self.trace
    }
}

/// One effect the engine applied while processing a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    /// Pending packets dropped because no commit from this step onward can
    /// meet their deadline.
    Expired { packets: Vec<PacketId> },
    /// A packet was committed and began transmitting.
    Committed { packet: PacketId },
    /// The running packet was aborted; it lost all progress.
    Aborted { packet: PacketId },
    /// The running packet accumulated a full unit of quality and was
    /// delivered.
    Completed { packet: PacketId },
}

/// One step of history: what the policy saw, what it chose, what happened.
/// An empty `events` list means the step passed without observable effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: Step,
    /// Ids of the pending packets shown to the policy (post-expiry).
    pub pending: Vec<PacketId>,
    /// Id of the packet that was running when the policy was invoked.
    pub running: Option<PacketId>,
    pub decision: Decision,
    pub events: Vec<StepEvent>,
}

/// Complete per-step history of a run; one record per step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub mode: VisibilityMode,
    pub records: Vec<DecisionRecord>,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    mode: VisibilityMode,
}

impl DecisionLog {
    /// Serializes as JSON Lines: a header line carrying the visibility mode,
    /// then one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out =
            serde_json::to_string(&LogHeader { mode: self.mode }).expect("header serializes");
        for record in &self.records {
            out.push('\n');
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
        }
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EngineError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines.next().ok_or(EngineError::LogFormat {
            line: 1,
            message: "empty decision log".into(),
        })?;
        let header: LogHeader =
            serde_json::from_str(header_line).map_err(|e| EngineError::LogFormat {
                line: 1,
                message: e.to_string(),
            })?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let record: DecisionRecord =
                serde_json::from_str(line).map_err(|e| EngineError::LogFormat {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(DecisionLog { mode: header.mode, records })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("policy {policy} requires {required} but was run under {got}")]
    ModeMismatch { policy: String, required: VisibilityMode, got: VisibilityMode },
    #[error("step {step}: policy broke the decision contract: {reason}")]
    PolicyContract { step: Step, reason: String },
    #[error("step {step}: replay diverged from the log: {detail}")]
    ReplayMismatch { step: Step, detail: String },
    #[error("decision log line {line}: {message}")]
    LogFormat { line: usize, message: String },
}

fn contract(step: Step, reason: impl Into<String>) -> EngineError {
    EngineError::PolicyContract { step, reason: reason.into() }
}

struct Running {
    packet: Packet,
    started: Step,
    accumulated: f64,
}

/// Runs `policy` over `instance` under `mode` and returns the validated
/// outcome together with the per-step decision log.
///
/// Two calls with the same arguments produce identical results; policies are
/// pure functions of their view.
pub fn run(
    instance: &Instance,
    policy: &dyn Policy,
    mode: VisibilityMode,
) -> Result<(ScheduleOutcome, DecisionLog), EngineError> {
    if let Some(required) = policy.required_mode() {
        if required != mode {
            return Err(EngineError::ModeMismatch { policy: policy.name(), required, got: mode });
        }
    }
    run_with(instance, mode, |view| policy.decide(view))
}

/// Core loop shared by [`run`] and [`replay`]; `decide` is invoked exactly
/// once per step.
pub(crate) fn run_with(
    instance: &Instance,
    mode: VisibilityMode,
    mut decide: impl FnMut(&PolicyView<'_>) -> Decision,
) -> Result<(ScheduleOutcome, DecisionLog), EngineError> {
    let trace = instance.trace();
    let mut pending: Vec<Packet> = Vec::new();
    let mut running: Option<Running> = None;
    let mut transmissions: Vec<Transmission> = Vec::new();
    let mut records: Vec<DecisionRecord> = Vec::new();

    for now in 1..=trace.horizon() {
        pending.extend(instance.packets().iter().copied().filter(|p| p.release == now));
        pending.sort_by_key(|p| p.id);

        let completion_now =
            completion_step(now, trace).expect("loop keeps the step inside the horizon");
        let feasible_now =
            |p: &Packet| matches!(completion_now, Some(c) if c <= p.deadline);

        let mut events: Vec<StepEvent> = Vec::new();
        let expired: Vec<PacketId> =
            pending.iter().filter(|p| !feasible_now(p)).map(|p| p.id).collect();
        if !expired.is_empty() {
            pending.retain(feasible_now);
            events.push(StepEvent::Expired { packets: expired });
        }

        let view = PolicyView {
            now,
            pending: &pending,
            running: running
                .as_ref()
                .map(|r| RunningView { packet: r.packet, started: r.started }),
            quality_now: trace.quality(now),
            completion_now,
            trace: match mode {
                VisibilityMode::FadeKnown => Some(trace),
                VisibilityMode::FadeUnknownWithCommitOracle => None,
            },
        };
        let pending_ids: Vec<PacketId> = pending.iter().map(|p| p.id).collect();
        let running_id = view.running.map(|r| r.packet.id);
        let decision = decide(&view);

        match decision {
            Decision::Idle => {
                if running.is_some() {
                    return Err(contract(now, "idle while a packet is running"));
                }
            }
            Decision::Continue => {
                if running.is_none() {
                    return Err(contract(now, "continue with no running packet"));
                }
            }
            Decision::Start(id) => {
                if running.is_some() {
                    return Err(contract(now, format!("start({id}) while a packet is running")));
                }
                let idx = pending.iter().position(|p| p.id == id).ok_or_else(|| {
                    contract(now, format!("start({id}) names no feasible pending packet"))
                })?;
                let packet = pending.remove(idx);
                events.push(StepEvent::Committed { packet: packet.id });
                running = Some(Running { packet, started: now, accumulated: 0.0 });
            }
            Decision::AbortAndStart(id) => {
                if running.is_none() {
                    return Err(contract(
                        now,
                        format!("abort_and_start({id}) with no running packet"),
                    ));
                }
                let idx = pending.iter().position(|p| p.id == id).ok_or_else(|| {
                    contract(now, format!("abort_and_start({id}) names no feasible pending packet"))
                })?;
                let replacement = pending.remove(idx);
                let old = running.take().expect("checked above");
                debug_assert!(old.started < now, "a packet cannot be aborted at its start step");
                transmissions.push(Transmission {
                    packet: old.packet.id,
                    start: old.started,
                    end: now - 1,
                    status: TxStatus::Aborted { at: now },
                });
                events.push(StepEvent::Aborted { packet: old.packet.id });
                // Back to pending with zero progress; next step's expiry
                // sweep decides whether it can still be rescued.
                pending.push(old.packet);
                events.push(StepEvent::Committed { packet: replacement.id });
                running = Some(Running { packet: replacement, started: now, accumulated: 0.0 });
            }
        }

        if let Some(r) = running.as_mut() {
            r.accumulated += trace.quality(now);
            if reaches_unit_length(r.accumulated) {
                transmissions.push(Transmission {
                    packet: r.packet.id,
                    start: r.started,
                    end: now,
                    status: TxStatus::Completed,
                });
                events.push(StepEvent::Completed { packet: r.packet.id });
                running = None;
            }
        }

        records.push(DecisionRecord {
            step: now,
            pending: pending_ids,
            running: running_id,
            decision,
            events,
        });
    }

    debug_assert!(
        running.is_none(),
        "a committed packet must complete within the horizon (commit oracle guarantees it)"
    );
    let outcome = ScheduleOutcome::assemble(instance, transmissions);
    debug_assert!(
        validate_outcome(instance, &outcome).is_empty(),
        "engine produced an invalid outcome: {:?}",
        validate_outcome(instance, &outcome)
    );
    Ok((outcome, DecisionLog { mode, records }))
}

/// Re-derives an outcome by re-driving the engine with the log's decisions,
/// then checks the regenerated history equals the log record-for-record.
/// A log produced by [`run`] on the same instance replays to the identical
/// outcome; a perturbed or mismatched log fails with a contract or
/// divergence error.
pub fn replay(instance: &Instance, log: &DecisionLog) -> Result<ScheduleOutcome, EngineError> {
    let mut next = 0usize;
    let (outcome, regenerated) = run_with(instance, log.mode, |view| {
        let decision = match log.records.get(next) {
            // A short log leaves later steps idle; the final record
            // comparison (or the contract check) reports the divergence.
            None => Decision::Idle,
            Some(record) => record.decision,
        };
        let _ = view;
        next += 1;
        decision
    })?;
    if regenerated.records.len() != log.records.len() {
        return Err(EngineError::ReplayMismatch {
            step: log.records.len().min(regenerated.records.len()) as Step + 1,
            detail: format!(
                "log holds {} records but the instance has {} steps",
                log.records.len(),
                regenerated.records.len()
            ),
        });
    }
    for (actual, expected) in regenerated.records.iter().zip(&log.records) {
        if actual != expected {
            return Err(EngineError::ReplayMismatch {
                step: expected.step,
                detail: format!("log record {expected:?} but replay produced {actual:?}"),
            });
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::delivered_value;

    /// Starts the heaviest feasible pending packet when idle, never aborts.
    struct StartHeaviest;

    impl Policy for StartHeaviest {
        fn name(&self) -> String {
            "test-start-heaviest".into()
        }
        fn required_mode(&self) -> Option<VisibilityMode> {
            None
        }
        fn decide(&self, view: &PolicyView<'_>) -> Decision {
            if view.running.is_some() {
                return Decision::Continue;
            }
            view.pending
                .iter()
                .max_by(|a, b| {
                    a.weight
                        .partial_cmp(&b.weight)
                        .expect("weights are finite")
                        .then(b.deadline.cmp(&a.deadline))
                        .then(b.id.cmp(&a.id))
                })
                .map_or(Decision::Idle, |p| Decision::Start(p.id))
        }
    }

    /// Plays back a fixed decision list, then idles.
    struct Scripted(std::cell::RefCell<std::collections::VecDeque<Decision>>);

    impl Scripted {
        fn new(decisions: impl IntoIterator<Item = Decision>) -> Self {
            Scripted(std::cell::RefCell::new(decisions.into_iter().collect()))
        }
    }

    impl Policy for Scripted {
        fn name(&self) -> String {
            "test-scripted".into()
        }
        fn required_mode(&self) -> Option<VisibilityMode> {
            None
        }
        fn decide(&self, _view: &PolicyView<'_>) -> Decision {
            self.0.borrow_mut().pop_front().unwrap_or(Decision::Idle)
        }
    }

    const ORACLE: VisibilityMode = VisibilityMode::FadeUnknownWithCommitOracle;

    fn packet(id: u64, release: Step, weight: f64, deadline: Step) -> Packet {
        Packet::new(id, release, weight, deadline).unwrap()
    }

    fn half_instance(packets: Vec<Packet>, horizon: Step) -> Instance {
        Instance::new(packets, FadeTrace::constant(0.5, horizon).unwrap()).unwrap()
    }

    #[test]
    fn empty_instance_yields_empty_outcome() {
        let inst = half_instance(vec![], 3);
        let (outcome, log) = run(&inst, &StartHeaviest, ORACLE).unwrap();
        assert!(outcome.transmissions.is_empty());
        assert_eq!(outcome.throughput, 0.0);
        assert_eq!(log.records.len(), 3);
        assert!(log.records.iter().all(|r| r.decision == Decision::Idle && r.events.is_empty()));
    }

    #[test]
    fn single_packet_completes_over_two_half_quality_steps() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 2)], 2);
        let (outcome, log) = run(&inst, &StartHeaviest, ORACLE).unwrap();
        assert_eq!(outcome.delivered.len(), 1);
        assert_eq!(outcome.transmissions[0].start, 1);
        assert_eq!(outcome.transmissions[0].end, 2);
        assert_eq!(log.records[0].decision, Decision::Start(PacketId(1)));
        assert_eq!(log.records[1].decision, Decision::Continue);
        assert!(log.records[1].events.contains(&StepEvent::Completed { packet: PacketId(1) }));
    }

    #[test]
    fn unattended_packet_expires_with_a_logged_event() {
        // p2 needs two half-quality steps but the script ignores it until its
        // window (release 2, deadline 3) can no longer fit a transmission.
        let inst = half_instance(vec![packet(1, 1, 1.0, 5), packet(2, 2, 1.0, 3)], 5);
        let script = Scripted::new([
            Decision::Start(PacketId(1)),
            Decision::Continue,
            Decision::Idle,
            Decision::Idle,
            Decision::Idle,
        ]);
        let (outcome, log) = run(&inst, &script, ORACLE).unwrap();
        assert_eq!(outcome.throughput, 1.0);
        assert_eq!(
            log.records[2].events,
            vec![StepEvent::Expired { packets: vec![PacketId(2)] }]
        );
        assert!(log.records[2].pending.is_empty());
    }

    #[test]
    fn abort_returns_packet_with_zero_progress() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 5), packet(2, 2, 5.0, 3)], 5);
        let script = Scripted::new([
            Decision::Start(PacketId(1)),
            Decision::AbortAndStart(PacketId(2)),
            Decision::Continue,
            Decision::Start(PacketId(1)),
            Decision::Continue,
        ]);
        let (outcome, _log) = run(&inst, &script, ORACLE).unwrap();
        assert_eq!(outcome.throughput, 6.0);
        let aborted = &outcome.transmissions[0];
        assert_eq!(aborted.packet, PacketId(1));
        assert_eq!((aborted.start, aborted.end), (1, 1));
        assert_eq!(aborted.status, TxStatus::Aborted { at: 2 });
        // The rescue attempt must span two fresh steps: no carried progress.
        let rescue = outcome
            .transmissions
            .iter()
            .find(|t| t.packet == PacketId(1) && t.status == TxStatus::Completed)
            .unwrap();
        assert_eq!((rescue.start, rescue.end), (4, 5));
        assert!(validate_outcome(&inst, &outcome).is_empty());
        assert_eq!(delivered_value(&inst, &outcome.delivered), 6.0);
    }

    #[test]
    fn contract_violations_are_reported_with_their_step() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 4)], 4);
        let cases: Vec<(Vec<Decision>, &str)> = vec![
            (vec![Decision::Continue], "continue with no running"),
            (vec![Decision::Start(PacketId(9))], "unknown packet"),
            (vec![Decision::AbortAndStart(PacketId(1))], "abort with nothing running"),
            (
                vec![Decision::Start(PacketId(1)), Decision::Start(PacketId(1))],
                "start while running",
            ),
            (
                vec![Decision::Start(PacketId(1)), Decision::Idle],
                "idle while running",
            ),
        ];
        for (script, what) in cases {
            let steps = script.len() as Step;
            let err = run(&inst, &Scripted::new(script), ORACLE).unwrap_err();
            match err {
                EngineError::PolicyContract { step, .. } => {
                    assert_eq!(step, steps, "wrong step for case: {what}")
                }
                other => panic!("expected contract error for {what}, got {other:?}"),
            }
        }
    }

    #[test]
    fn starting_an_expired_packet_is_a_contract_violation() {
        // p1's last feasible commit step is 2 (completion from 3 lands at 4 > 3).
        let inst = half_instance(vec![packet(1, 1, 1.0, 3)], 5);
        let script = Scripted::new([Decision::Idle, Decision::Idle, Decision::Start(PacketId(1))]);
        let err = run(&inst, &script, ORACLE).unwrap_err();
        assert!(matches!(err, EngineError::PolicyContract { step: 3, .. }));
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = half_instance(
            vec![packet(1, 1, 1.0, 5), packet(2, 2, 2.0, 4), packet(3, 2, 2.0, 5)],
            5,
        );
        let a = run(&inst, &StartHeaviest, ORACLE).unwrap();
        let b = run(&inst, &StartHeaviest, ORACLE).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replay_reproduces_the_outcome_exactly() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 5), packet(2, 2, 5.0, 3)], 5);
        let script = Scripted::new([
            Decision::Start(PacketId(1)),
            Decision::AbortAndStart(PacketId(2)),
            Decision::Continue,
            Decision::Start(PacketId(1)),
            Decision::Continue,
        ]);
        let (outcome, log) = run(&inst, &script, ORACLE).unwrap();
        assert_eq!(replay(&inst, &log).unwrap(), outcome);
    }

    #[test]
    fn replay_rejects_a_perturbed_log() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 2), packet(2, 1, 2.0, 4)], 4);
        let (_, log) = run(&inst, &StartHeaviest, ORACLE).unwrap();

        let mut altered = log.clone();
        altered.records[0].decision = Decision::Start(PacketId(1));
        let err = replay(&inst, &altered).unwrap_err();
        assert!(matches!(
            err,
            EngineError::ReplayMismatch { .. } | EngineError::PolicyContract { .. }
        ));

        let mut truncated = log.clone();
        truncated.records.pop();
        assert!(replay(&inst, &truncated).is_err());
    }

    #[test]
    fn replay_rejects_a_log_from_another_instance() {
        let a = half_instance(vec![packet(1, 1, 1.0, 4)], 4);
        let b = half_instance(vec![packet(1, 2, 1.0, 4)], 4);
        let (_, log) = run(&a, &StartHeaviest, ORACLE).unwrap();
        assert!(replay(&b, &log).is_err());
    }

    #[test]
    fn decision_log_round_trips_through_jsonl() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 5), packet(2, 2, 5.0, 3)], 5);
        let script = Scripted::new([
            Decision::Start(PacketId(1)),
            Decision::AbortAndStart(PacketId(2)),
            Decision::Continue,
            Decision::Start(PacketId(1)),
            Decision::Continue,
        ]);
        let (_, log) = run(&inst, &script, ORACLE).unwrap();
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 1 + log.records.len());
        let back = DecisionLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn jsonl_parser_reports_bad_lines() {
        assert!(matches!(
            DecisionLog::from_jsonl(""),
            Err(EngineError::LogFormat { line: 1, .. })
        ));
        let text = "{\"mode\":\"fade_known\"}\nnot json\n";
        assert!(matches!(
            DecisionLog::from_jsonl(text),
            Err(EngineError::LogFormat { line: 2, .. })
        ));
    }

    #[test]
    fn fade_known_view_exposes_the_trace_and_oracle_mode_hides_it() {
        let inst = half_instance(vec![packet(1, 1, 1.0, 2)], 2);
        struct Probe(VisibilityMode);
        impl Policy for Probe {
            fn name(&self) -> String {
                "test-probe".into()
            }
            fn required_mode(&self) -> Option<VisibilityMode> {
                None
            }
            fn decide(&self, view: &PolicyView<'_>) -> Decision {
                match self.0 {
                    VisibilityMode::FadeKnown => assert!(view.trace().is_some()),
                    VisibilityMode::FadeUnknownWithCommitOracle => {
                        assert!(view.trace().is_none())
                    }
                }
                assert_eq!(view.quality_now(), 0.5);
                if view.running.is_some() {
                    Decision::Continue
                } else {
                    Decision::Start(PacketId(1))
                }
            }
        }
        run(&inst, &Probe(VisibilityMode::FadeKnown), VisibilityMode::FadeKnown).unwrap();
        run(&inst, &Probe(ORACLE), ORACLE).unwrap();
    }

    #[test]
    fn mode_mismatch_is_rejected_before_running() {
        struct NeedsTrace;
        impl Policy for NeedsTrace {
            fn name(&self) -> String {
                "test-needs-trace".into()
            }
            fn required_mode(&self) -> Option<VisibilityMode> {
                Some(VisibilityMode::FadeKnown)
            }
            fn decide(&self, _view: &PolicyView<'_>) -> Decision {
                Decision::Idle
            }
        }
        let inst = half_instance(vec![], 2);
        let err = run(&inst, &NeedsTrace, ORACLE).unwrap_err();
        assert!(matches!(err, EngineError::ModeMismatch { .. }));
    }
}
