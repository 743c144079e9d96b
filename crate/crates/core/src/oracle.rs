//! Exact offline optima by exhaustive search.
//!
//! Two solvers provide ground truth at test scale:
//!
//! - [`offline_optimal`] — the clairvoyant adversary on a fading instance.
//!   It searches over no-abort schedules (committing a packet and running it
//!   to completion), which loses nothing: aborting a transmission only
//!   discards channel quality an offline scheduler could have left unused by
//!   idling instead. Committing earlier within an idle stretch always
//!   dominates committing later (completions are monotone in the start
//!   step), so the search branches only on "commit one of the currently
//!   feasible packets now" or "stay idle until the next arrival".
//! - [`bounded_delay_optimal`] — the slotted model, one unit-length packet
//!   per slot, release ≤ slot ≤ deadline. [`bounded_delay_greedy`] computes
//!   the same value by a completely different route (greedy by weight over a
//!   transversal matroid) and exists so tests can cross-check the search.
//!
//! Both searches carry hard caps and fail loudly rather than degrade.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_with, Decision, VisibilityMode};
use crate::model::{
    completion_step, validate_outcome, FadeTrace, Instance, ModelError, Packet, PacketId,
    ScheduleOutcome, Step, Transmission, TxStatus, Violation,
};

/// Default packet cap for [`offline_optimal`].
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// Packet cap for [`bounded_delay_optimal`].
pub const BOUNDED_DELAY_CAP: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {packets} packets, which exceeds the search cap of {cap}")]
    CapExceeded { packets: usize, cap: usize },
    #[error("invalid transmission plan: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPlan { violations: Vec<Violation> },
}

/// Executes an explicit list of `(packet, start step)` commitments — each
/// run to completion, no aborts — and returns the validated outcome.
///
/// The plan is first checked against the schedule rules (releases, overlap,
/// deadlines, full-quality completion); any breach is returned as
/// [`OracleError::InvalidPlan`] carrying every violation. A clean plan is
/// then re-executed through the simulation engine, so the returned outcome
/// went through the same machinery as any policy's.
pub fn adversary_replay(
    instance: &Instance,
    plan: &[(PacketId, Step)],
) -> Result<ScheduleOutcome, OracleError> {
    let trace = instance.trace();
    let horizon = trace.horizon();
    let claimed: Vec<Transmission> = plan
        .iter()
        .map(|&(id, start)| {
            let end = if (1..=horizon).contains(&start) {
                completion_step(start, trace)
                    .expect("start checked against the horizon")
                    // A transmission the trace cannot finish: claim the rest
                    // of the horizon and let the validator report the
                    // shortfall.
                    .unwrap_or(horizon)
            } else {
                start
            };
            Transmission { packet: id, start, end, status: TxStatus::Completed }
        })
        .collect();
    let outcome = ScheduleOutcome::assemble(instance, claimed);
    let violations = validate_outcome(instance, &outcome);
    if !violations.is_empty() {
        return Err(OracleError::InvalidPlan { violations });
    }

    let starts: BTreeMap<Step, PacketId> = plan.iter().map(|&(id, s)| (s, id)).collect();
    let (confirmed, _log) = run_with(instance, VisibilityMode::FadeKnown, |view| {
        match starts.get(&view.now) {
            Some(&id) => Decision::Start(id),
            None if view.running.is_some() => Decision::Continue,
            None => Decision::Idle,
        }
    })
    .expect("a validated plan executes cleanly");
    debug_assert_eq!(confirmed, outcome);
    Ok(confirmed)
}

/// A candidate solution during the search, ordered by value, then by
/// lexicographically smallest delivered id set, then by earliest completion
/// profile.
#[derive(Debug, Clone, PartialEq)]
struct Rank {
    value: f64,
    delivered: Vec<PacketId>,
    completions: Vec<Step>,
    plan: Vec<(PacketId, Step)>,
}

impl Rank {
    fn empty() -> Self {
        Rank { value: 0.0, delivered: Vec::new(), completions: Vec::new(), plan: Vec::new() }
    }

    fn beats(&self, other: &Rank) -> bool {
        if self.value != other.value {
            return self.value > other.value;
        }
        if self.delivered != other.delivered {
            return self.delivered < other.delivered;
        }
        self.completions < other.completions
    }
}

struct Search<'a> {
    packets: &'a [Packet],
    trace: &'a FadeTrace,
    instance: &'a Instance,
    memo: HashMap<(Step, u64), Rank>,
}

impl Search<'_> {
    fn solve(&mut self, step: Step, mask: u64) -> Rank {
        if mask == 0 || step > self.trace.horizon() {
            return Rank::empty();
        }
        let completion_now =
            completion_step(step, self.trace).expect("search stays within the horizon");
        // Once the remaining trace cannot accumulate a full unit, nothing can
        // complete at this step or any later one.
        let Some(finish) = completion_now else {
            return Rank::empty();
        };

        // Canonical state: drop released packets that can no longer finish
        // (infeasibility is permanent), so equivalent states share memo hits.
        let mut live = mask;
        for (i, p) in self.packets.iter().enumerate() {
            if mask >> i & 1 == 1 && p.release <= step && finish > p.deadline {
                live &= !(1 << i);
            }
        }
        if live == 0 {
            return Rank::empty();
        }
        if let Some(found) = self.memo.get(&(step, live)) {
            return found.clone();
        }

        // Doing nothing forever is always an option; it matters for ties,
        // where a smaller delivered set outranks one padded with zero-weight
        // packets.
        let mut best = Rank::empty();
        for (i, p) in self.packets.iter().enumerate() {
            if live >> i & 1 == 1 && p.release <= step {
                let child = self.solve(finish + 1, live & !(1 << i));
                let candidate = self.compose(p, step, finish, child);
                if candidate.beats(&best) {
                    best = candidate;
                }
            }
        }
        let next_arrival = self
            .packets
            .iter()
            .enumerate()
            .filter(|(i, p)| live >> i & 1 == 1 && p.release > step)
            .map(|(_, p)| p.release)
            .min();
        if let Some(next) = next_arrival {
            let candidate = self.solve(next, live);
            if candidate.beats(&best) {
                best = candidate;
            }
        }

        self.memo.insert((step, live), best.clone());
        best
    }

    fn compose(&self, packet: &Packet, start: Step, finish: Step, child: Rank) -> Rank {
        let mut delivered = child.delivered;
        let pos = delivered.partition_point(|&id| id < packet.id);
        delivered.insert(pos, packet.id);
        let mut completions = child.completions;
        let cpos = completions.partition_point(|&c| c < finish);
        completions.insert(cpos, finish);
        let mut plan = Vec::with_capacity(child.plan.len() + 1);
        plan.push((packet.id, start));
        plan.extend(child.plan);
        // Ascending-id summation keeps equal delivered sets bit-identical.
        let value = delivered
            .iter()
            .map(|id| self.instance.packet(*id).expect("delivered ids come from the instance").weight)
            .sum();
        Rank { value, delivered, completions, plan }
    }
}

/// Maximum weighted throughput any offline schedule can achieve, as a
/// validated outcome. Ties go to the lexicographically smallest delivered id
/// set, then the earliest completion profile. Fails with
/// [`OracleError::CapExceeded`] beyond [`DEFAULT_ORACLE_CAP`] packets.
pub fn offline_optimal(instance: &Instance) -> Result<ScheduleOutcome, OracleError> {
    offline_optimal_with_cap(instance, DEFAULT_ORACLE_CAP)
}

/// [`offline_optimal`] with an explicit packet cap (at most 64).
pub fn offline_optimal_with_cap(
    instance: &Instance,
    cap: usize,
) -> Result<ScheduleOutcome, OracleError> {
    let n = instance.packets().len();
    if n > cap.min(64) {
        return Err(OracleError::CapExceeded { packets: n, cap: cap.min(64) });
    }
    let mut search = Search {
        packets: instance.packets(),
        trace: instance.trace(),
        instance,
        memo: HashMap::new(),
    };
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let best = search.solve(1, full);
    let outcome = adversary_replay(instance, &best.plan)
        .expect("the search only composes feasible commitments");
    debug_assert_eq!(outcome.throughput, best.value);
    Ok(outcome)
}

/// A slotted instance: unit packets, one slot each, release ≤ slot ≤ deadline.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDelayInstance {
    packets: Vec<Packet>,
    horizon: Step,
}

impl BoundedDelayInstance {
    pub fn new(mut packets: Vec<Packet>, horizon: Step) -> Result<Self, ModelError> {
        packets.sort_by_key(|p| p.id);
        for pair in packets.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateId { id: pair[0].id });
            }
        }
        for p in &packets {
            Packet::new(p.id.0, p.release, p.weight, p.deadline)?;
            if p.deadline > horizon {
                return Err(ModelError::DeadlineBeyondHorizon {
                    id: p.id,
                    deadline: p.deadline,
                    horizon,
                });
            }
        }
        Ok(BoundedDelayInstance { packets, horizon })
    }

    /// Packets sorted by id; release and deadline are slot indices.
    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    /// Number of slots.
    pub fn horizon(&self) -> Step {
        self.horizon
    }
}

/// On-disk form mirrors the fading instance format, with a model marker in
/// place of the qualities: `{ "model": "bounded-delay", "horizon": H,
/// "packets": [...] }`.
#[derive(Serialize, Deserialize)]
struct BoundedDelayFile {
    model: String,
    horizon: Step,
    packets: Vec<Packet>,
}

impl Serialize for BoundedDelayInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        BoundedDelayFile {
            model: "bounded-delay".to_string(),
            horizon: self.horizon,
            packets: self.packets.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundedDelayInstance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = BoundedDelayFile::deserialize(deserializer)?;
        if file.model != "bounded-delay" {
            return Err(serde::de::Error::custom(format!(
                "expected model \"bounded-delay\", got {:?}",
                file.model
            )));
        }
        BoundedDelayInstance::new(file.packets, file.horizon).map_err(serde::de::Error::custom)
    }
}

/// An optimal slot assignment for a bounded-delay instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedDelayPlan {
    pub value: f64,
    pub slots: BTreeMap<Step, PacketId>,
}

#[derive(Debug, Clone, PartialEq)]
struct BdRank {
    value: f64,
    delivered: Vec<PacketId>,
    slots: Vec<(Step, PacketId)>,
}

impl BdRank {
    fn empty() -> Self {
        BdRank { value: 0.0, delivered: Vec::new(), slots: Vec::new() }
    }

    fn beats(&self, other: &BdRank) -> bool {
        if self.value != other.value {
            return self.value > other.value;
        }
        self.delivered < other.delivered
    }
}

struct BdSearch<'a> {
    packets: &'a [Packet],
    horizon: Step,
    memo: HashMap<(Step, u32), BdRank>,
}

impl BdSearch<'_> {
    fn solve(&mut self, slot: Step, used: u32) -> BdRank {
        if slot > self.horizon {
            return BdRank::empty();
        }
        // Canonical state: a packet whose deadline has passed is as good as
        // used.
        let mut avail = !used;
        for (i, p) in self.packets.iter().enumerate() {
            if p.deadline < slot {
                avail &= !(1 << i);
            }
        }
        avail &= (1u32 << self.packets.len()) - 1;
        if avail == 0 {
            return BdRank::empty();
        }
        if let Some(found) = self.memo.get(&(slot, avail)) {
            return found.clone();
        }

        let mut best = self.solve(slot + 1, used);
        for (i, p) in self.packets.iter().enumerate() {
            if avail >> i & 1 == 1 && p.release <= slot && slot <= p.deadline {
                let child = self.solve(slot + 1, used | 1 << i);
                let candidate = self.compose(p, slot, child);
                if candidate.beats(&best) {
                    best = candidate;
                }
            }
        }

        self.memo.insert((slot, avail), best.clone());
        best
    }

    fn compose(&self, packet: &Packet, slot: Step, child: BdRank) -> BdRank {
        let mut delivered = child.delivered;
        let pos = delivered.partition_point(|&id| id < packet.id);
        delivered.insert(pos, packet.id);
        let mut slots = Vec::with_capacity(child.slots.len() + 1);
        slots.push((slot, packet.id));
        slots.extend(child.slots);
        let by_id: HashMap<PacketId, f64> =
            self.packets.iter().map(|p| (p.id, p.weight)).collect();
        let value = delivered.iter().map(|id| by_id[id]).sum();
        BdRank { value, delivered, slots }
    }
}

/// Maximum total weight over assignments of packets to distinct slots within
/// their release/deadline windows, plus a witnessing assignment. Ties go to
/// the lexicographically smallest delivered id set.
pub fn bounded_delay_optimal(bd: &BoundedDelayInstance) -> Result<BoundedDelayPlan, OracleError> {
    let n = bd.packets().len();
    if n > BOUNDED_DELAY_CAP {
        return Err(OracleError::CapExceeded { packets: n, cap: BOUNDED_DELAY_CAP });
    }
    let mut search = BdSearch { packets: bd.packets(), horizon: bd.horizon(), memo: HashMap::new() };
    let best = search.solve(1, 0);
    Ok(BoundedDelayPlan { value: best.value, slots: best.slots.into_iter().collect() })
}

/// Can every packet of `chosen` be placed in a distinct slot within its
/// window? Deadline-ordered earliest-fit is exact for unit jobs.
fn slot_assignable(chosen: &[&Packet], horizon: Step) -> bool {
    let mut order: Vec<&Packet> = chosen.to_vec();
    order.sort_by_key(|p| (p.deadline, p.release, p.id));
    let mut taken: Vec<Step> = Vec::new();
    for p in order {
        let slot = (p.release..=p.deadline.min(horizon)).find(|s| !taken.contains(s));
        match slot {
            Some(s) => taken.push(s),
            None => return false,
        }
    }
    true
}

/// Independent route to the bounded-delay optimum: greedy by descending
/// weight (ties: earlier deadline, then smaller id), admitting a packet iff
/// the admitted set still has a feasible slot assignment. Feasible sets form
/// a transversal matroid, so the greedy value is exact; tests compare it
/// against [`bounded_delay_optimal`] rather than trusting that argument.
pub fn bounded_delay_greedy(bd: &BoundedDelayInstance) -> f64 {
    let mut order: Vec<&Packet> = bd.packets().iter().collect();
    order.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .expect("weights are finite")
            .then(a.deadline.cmp(&b.deadline))
            .then(a.id.cmp(&b.id))
    });
    let mut admitted: Vec<&Packet> = Vec::new();
    for p in order {
        let mut trial = admitted.clone();
        trial.push(p);
        if slot_assignable(&trial, bd.horizon()) {
            admitted = trial;
        }
    }
    crate::model::canonical_weight_sum(admitted.iter().copied())
}
