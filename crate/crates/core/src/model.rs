//! Packets, fade traces, instances, and schedule outcomes.
//!
//! Time is discrete and 1-based. Every packet has the same (unit) length; the
//! channel contributes quality `q_t ∈ [0, 1]` of that length per step it is
//! occupied. A transmission started at step `s` completes at the first step
//! `e ≥ s` with `q_s + … + q_e ≥ 1`; steps are atomic, so any quality beyond
//! the unit length in step `e` is wasted. A packet counts as delivered only
//! when its completion step is at or before its deadline.
//!
//! Preemption is restart-only: an aborted transmission contributes nothing,
//! and a later transmission of the same packet must accumulate a full unit of
//! quality on its own.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based discrete time step.
pub type Step = u32;

/// Opaque packet identifier. Ordering is used only for deterministic
/// tie-breaking and canonical iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Absolute tolerance when comparing a cumulative quality sum against the
/// unit packet length. Traces are routinely built from reciprocals (for
/// example five steps of quality 1/5), whose float sum can land a few ulps
/// below 1; the tolerance keeps such segments worth exactly one packet.
pub const COMPLETION_EPS: f64 = 1e-9;

/// True when a cumulative quality sum counts as a full packet length.
#[inline]
pub fn reaches_unit_length(sum: f64) -> bool {
    sum >= 1.0 - COMPLETION_EPS
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("packet {id}: weight {weight} must be finite and non-negative")]
    BadWeight { id: PacketId, weight: f64 },
    #[error("packet {id}: release {release} must be a positive step")]
    BadRelease { id: PacketId, release: Step },
    #[error("packet {id}: deadline {deadline} precedes release {release}")]
    DeadlineBeforeRelease { id: PacketId, release: Step, deadline: Step },
    #[error("packet {id}: deadline {deadline} exceeds horizon {horizon}")]
    DeadlineBeyondHorizon { id: PacketId, deadline: Step, horizon: Step },
    #[error("duplicate packet id {id}")]
    DuplicateId { id: PacketId },
    #[error("fade trace must cover at least one step")]
    EmptyTrace,
    #[error("quality {value} at step {step} is outside [0, 1]")]
    BadQuality { step: Step, value: f64 },
    #[error("step {start} is outside the trace horizon {horizon}")]
    StartOutOfRange { start: Step, horizon: Step },
    #[error("packet {id} cannot start at step {start} before its release {release}")]
    StartBeforeRelease { id: PacketId, start: Step, release: Step },
}

/// A packet: released at `release`, worth `weight` if it completes no later
/// than `deadline`. Weights are non-negative; zero-weight packets are legal
/// and act as placeholders in model reductions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub release: Step,
    pub weight: f64,
    pub deadline: Step,
}

impl Packet {
    pub fn new(id: u64, release: Step, weight: f64, deadline: Step) -> Result<Self, ModelError> {
        let id = PacketId(id);
        if !weight.is_finite() || weight < 0.0 {
            return Err(ModelError::BadWeight { id, weight });
        }
        if release == 0 {
            return Err(ModelError::BadRelease { id, release });
        }
        if deadline < release {
            return Err(ModelError::DeadlineBeforeRelease { id, release, deadline });
        }
        Ok(Packet { id, release, weight, deadline })
    }
}

/// Per-step channel quality over a finite horizon, indexed by 1-based step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FadeTrace {
    qualities: Vec<f64>,
}

impl FadeTrace {
    pub fn new(qualities: Vec<f64>) -> Result<Self, ModelError> {
        if qualities.is_empty() {
            return Err(ModelError::EmptyTrace);
        }
        for (i, &q) in qualities.iter().enumerate() {
            if !q.is_finite() || !(0.0..=1.0).contains(&q) {
                return Err(ModelError::BadQuality { step: i as Step + 1, value: q });
            }
        }
        Ok(FadeTrace { qualities })
    }

    pub fn constant(q: f64, horizon: Step) -> Result<Self, ModelError> {
        FadeTrace::new(vec![q; horizon as usize])
    }

    pub fn horizon(&self) -> Step {
        self.qualities.len() as Step
    }

    /// Quality of a 1-based step. Panics when the step is outside the horizon.
    pub fn quality(&self, step: Step) -> f64 {
        self.qualities[step as usize - 1]
    }

    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }
}

impl TryFrom<Vec<f64>> for FadeTrace {
    type Error = ModelError;
    fn try_from(qualities: Vec<f64>) -> Result<Self, ModelError> {
        FadeTrace::new(qualities)
    }
}

impl From<FadeTrace> for Vec<f64> {
    fn from(trace: FadeTrace) -> Vec<f64> {
        trace.qualities
    }
}

/// First step `e ≥ start` at which the cumulative quality from `start`
/// reaches a full packet length, or `None` when the trace ends first.
///
/// The sum is inclusive of both endpoints, so a transmission spans
/// `e − start + 1` steps. Quality left over in step `e` is wasted.
pub fn completion_step(start: Step, trace: &FadeTrace) -> Result<Option<Step>, ModelError> {
    if start == 0 || start > trace.horizon() {
        return Err(ModelError::StartOutOfRange { start, horizon: trace.horizon() });
    }
    let mut sum = 0.0;
    for step in start..=trace.horizon() {
        sum += trace.quality(step);
        if reaches_unit_length(sum) {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

/// Would committing `packet` at `start` let it finish by its deadline?
///
/// This is the one-step-lookahead feasibility oracle: policies that cannot
/// see future fade states may still rely on this boolean. Because quality is
/// non-negative, a packet that is infeasible at some step stays infeasible at
/// every later step.
pub fn commit_feasible(packet: &Packet, start: Step, trace: &FadeTrace) -> Result<bool, ModelError> {
    if start < packet.release {
        return Err(ModelError::StartBeforeRelease {
            id: packet.id,
            start,
            release: packet.release,
        });
    }
    Ok(match completion_step(start, trace)? {
        Some(end) => end <= packet.deadline,
        None => false,
    })
}

/// An instance: a packet arrival sequence plus the channel's fade trace.
/// Packets are held sorted by id; ids are unique and every deadline lies
/// within the trace horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    packets: Vec<Packet>,
    trace: FadeTrace,
}

impl Instance {
    pub fn new(mut packets: Vec<Packet>, trace: FadeTrace) -> Result<Self, ModelError> {
        packets.sort_by_key(|p| p.id);
        for pair in packets.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateId { id: pair[0].id });
            }
        }
        for p in &packets {
            // Re-validate fields so deserialized packets obey the same rules.
            Packet::new(p.id.0, p.release, p.weight, p.deadline)?;
            if p.deadline > trace.horizon() {
                return Err(ModelError::DeadlineBeyondHorizon {
                    id: p.id,
                    deadline: p.deadline,
                    horizon: trace.horizon(),
                });
            }
        }
        Ok(Instance { packets, trace })
    }

    /// Packets sorted by id.
    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet> {
        self.packets
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.packets[i])
    }

    pub fn trace(&self) -> &FadeTrace {
        &self.trace
    }

    pub fn horizon(&self) -> Step {
        self.trace.horizon()
    }
}

/// On-disk form: `{ "horizon": H, "qualities": [...], "packets": [...] }`.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    horizon: Step,
    qualities: Vec<f64>,
    packets: Vec<Packet>,
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        InstanceFile {
            horizon: self.horizon(),
            qualities: self.trace.qualities.clone(),
            packets: self.packets.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = InstanceFile::deserialize(deserializer)?;
        if file.horizon as usize != file.qualities.len() {
            return Err(serde::de::Error::custom(format!(
                "horizon {} does not match {} quality entries",
                file.horizon,
                file.qualities.len()
            )));
        }
        let trace = FadeTrace::new(file.qualities).map_err(serde::de::Error::custom)?;
        Instance::new(file.packets, trace).map_err(serde::de::Error::custom)
    }
}

/// Outcome of one transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Completed,
    /// Aborted at the given step, before consuming any of that step's quality;
    /// the last occupied step is therefore `at − 1`.
    Aborted { at: Step },
}

/// A contiguous run of steps `start..=end` spent on one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub packet: PacketId,
    pub start: Step,
    pub end: Step,
    pub status: TxStatus,
}

/// Everything a schedule produced: the attempt list in start order, the set
/// of delivered packets, and their total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub transmissions: Vec<Transmission>,
    pub delivered: BTreeSet<PacketId>,
    pub throughput: f64,
}

impl ScheduleOutcome {
    /// Builds an outcome whose `delivered` and `throughput` fields are derived
    /// from the transmission list, in the canonical (id-ascending) sum order.
    pub fn assemble(instance: &Instance, mut transmissions: Vec<Transmission>) -> Self {
        transmissions.sort_by_key(|t| (t.start, t.packet));
        let delivered: BTreeSet<PacketId> = transmissions
            .iter()
            .filter(|t| matches!(t.status, TxStatus::Completed))
            .map(|t| t.packet)
            .collect();
        let throughput = delivered_value(instance, &delivered);
        ScheduleOutcome { transmissions, delivered, throughput }
    }

    pub fn empty() -> Self {
        ScheduleOutcome { transmissions: Vec::new(), delivered: BTreeSet::new(), throughput: 0.0 }
    }
}

/// Total weight of a packet collection, summed in ascending id order so the
/// same set always produces a bit-identical float regardless of how callers
/// ordered it.
pub fn canonical_weight_sum<'a>(packets: impl IntoIterator<Item = &'a Packet>) -> f64 {
    let mut weights: Vec<(PacketId, f64)> =
        packets.into_iter().map(|p| (p.id, p.weight)).collect();
    weights.sort_by_key(|(id, _)| *id);
    weights.into_iter().map(|(_, w)| w).sum()
}

/// Total weight of a delivered id set, summed in ascending id order so equal
/// sets always produce bit-identical totals.
pub fn delivered_value(instance: &Instance, delivered: &BTreeSet<PacketId>) -> f64 {
    canonical_weight_sum(delivered.iter().filter_map(|id| instance.packet(*id)))
}

/// Weighted throughput of an outcome, recomputed from the instance.
pub fn weighted_throughput(instance: &Instance, outcome: &ScheduleOutcome) -> f64 {
    delivered_value(instance, &outcome.delivered)
}

/// A single rule an outcome breaks. Violations are ordinary data so callers
/// can report all of them; an empty list means the outcome is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    UnknownPacket { id: PacketId },
    BadInterval { id: PacketId, start: Step, end: Step },
    OutsideHorizon { id: PacketId, end: Step, horizon: Step },
    StartBeforeRelease { id: PacketId, start: Step, release: Step },
    OverlapAtStep { step: Step, first: PacketId, second: PacketId },
    LateCompletion { id: PacketId, end: Step, deadline: Step },
    ShortCompletion { id: PacketId, start: Step, end: Step, sum: f64 },
    NotMinimal { id: PacketId, start: Step, end: Step },
    AbortMarkerMismatch { id: PacketId, at: Step, end: Step },
    AbortedAfterCompletion { id: PacketId, start: Step, end: Step },
    DuplicateCompletion { id: PacketId },
    DeliveredMismatch,
    ThroughputMismatch { stored: f64, computed: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownPacket { id } => write!(f, "transmission names unknown packet {id}"),
            Violation::BadInterval { id, start, end } => {
                write!(f, "packet {id}: transmission interval {start}..={end} is malformed")
            }
            Violation::OutsideHorizon { id, end, horizon } => {
                write!(f, "packet {id}: transmission ends at {end} beyond horizon {horizon}")
            }
            Violation::StartBeforeRelease { id, start, release } => {
                write!(f, "packet {id}: starts at {start} before release {release}")
            }
            Violation::OverlapAtStep { step, first, second } => {
                write!(f, "step {step} is occupied by both packet {first} and packet {second}")
            }
            Violation::LateCompletion { id, end, deadline } => {
                write!(f, "packet {id}: completes at {end} after deadline {deadline}")
            }
            Violation::ShortCompletion { id, start, end, sum } => write!(
                f,
                "packet {id}: steps {start}..={end} accumulate quality {sum} < 1; restarted \
                 transmissions may not reuse earlier progress"
            ),
            Violation::NotMinimal { id, start, end } => {
                write!(f, "packet {id}: already complete before claimed end {end} (start {start})")
            }
            Violation::AbortMarkerMismatch { id, at, end } => {
                write!(f, "packet {id}: abort step {at} does not follow last occupied step {end}")
            }
            Violation::AbortedAfterCompletion { id, start, end } => {
                write!(f, "packet {id}: marked aborted although steps {start}..={end} complete it")
            }
            Violation::DuplicateCompletion { id } => {
                write!(f, "packet {id} completes more than once")
            }
            Violation::DeliveredMismatch => {
                write!(f, "delivered set does not equal the completed transmission set")
            }
            Violation::ThroughputMismatch { stored, computed } => {
                write!(f, "stored throughput {stored} differs from recomputed {computed}")
            }
        }
    }
}

/// Checks an outcome against the instance and returns every rule it breaks.
///
/// Accepted outcomes are exactly those a step-by-step replay of the claimed
/// transmissions against the trace would reproduce: intervals are disjoint
/// and inside the horizon, starts respect releases, completed transmissions
/// accumulate a full unit of quality with a minimal end step and finish by
/// their deadline, aborted ones stop strictly short of a unit, no packet is
/// delivered twice, and the delivered set and throughput match.
pub fn validate_outcome(instance: &Instance, outcome: &ScheduleOutcome) -> Vec<Violation> {
    let mut violations = Vec::new();
    let horizon = instance.horizon();
    let mut occupied: Vec<Option<PacketId>> = vec![None; horizon as usize + 1];
    let mut completed: BTreeSet<PacketId> = BTreeSet::new();

    for tx in &outcome.transmissions {
        let Some(packet) = instance.packet(tx.packet) else {
            violations.push(Violation::UnknownPacket { id: tx.packet });
            continue;
        };
        if tx.start == 0 || tx.start > tx.end {
            violations.push(Violation::BadInterval { id: tx.packet, start: tx.start, end: tx.end });
            continue;
        }
        if tx.end > horizon {
            violations.push(Violation::OutsideHorizon { id: tx.packet, end: tx.end, horizon });
            continue;
        }
        if tx.start < packet.release {
            violations.push(Violation::StartBeforeRelease {
                id: tx.packet,
                start: tx.start,
                release: packet.release,
            });
        }
        for step in tx.start..=tx.end {
            match occupied[step as usize] {
                Some(other) => violations.push(Violation::OverlapAtStep {
                    step,
                    first: other,
                    second: tx.packet,
                }),
                None => occupied[step as usize] = Some(tx.packet),
            }
        }
        let total: f64 = (tx.start..=tx.end).map(|s| instance.trace.quality(s)).sum();
        let before_end: f64 = (tx.start..tx.end).map(|s| instance.trace.quality(s)).sum();
        match tx.status {
            TxStatus::Completed => {
                if tx.end > packet.deadline {
                    violations.push(Violation::LateCompletion {
                        id: tx.packet,
                        end: tx.end,
                        deadline: packet.deadline,
                    });
                }
                if !reaches_unit_length(total) {
                    violations.push(Violation::ShortCompletion {
                        id: tx.packet,
                        start: tx.start,
                        end: tx.end,
                        sum: total,
                    });
                }
                if tx.end > tx.start && reaches_unit_length(before_end) {
                    violations.push(Violation::NotMinimal {
                        id: tx.packet,
                        start: tx.start,
                        end: tx.end,
                    });
                }
                if !completed.insert(tx.packet) {
                    violations.push(Violation::DuplicateCompletion { id: tx.packet });
                }
            }
            TxStatus::Aborted { at } => {
                if at != tx.end + 1 {
                    violations.push(Violation::AbortMarkerMismatch {
                        id: tx.packet,
                        at,
                        end: tx.end,
                    });
                }
                if reaches_unit_length(total) {
                    violations.push(Violation::AbortedAfterCompletion {
                        id: tx.packet,
                        start: tx.start,
                        end: tx.end,
                    });
                }
            }
        }
    }

    if outcome.delivered != completed {
        violations.push(Violation::DeliveredMismatch);
    }
    let computed = delivered_value(instance, &outcome.delivered);
    if computed != outcome.throughput {
        violations.push(Violation::ThroughputMismatch {
            stored: outcome.throughput,
            computed,
        });
    }
    violations
}
