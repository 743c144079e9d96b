//! Online scheduling policies.
//!
//! Two parameterized policies carry the interesting behavior:
//!
//! - [`SemiGreedy`] aborts the running packet whenever a pending packet is at
//!   least `alpha` times heavier. It consults only the commit oracle, so it
//!   works under either visibility mode.
//! - [`EdfBeta`] plans with full trace knowledge: when idle it computes an
//!   optimal provisional schedule over the pending packets and starts an
//!   early-deadline member whose weight clears a `beta`-scaled threshold;
//!   while transmitting it aborts only for a sufficiently heavy packet that
//!   arrived this very step.
//!
//! Three deliberately naive baselines ([`GreedyMax`], [`EarliestDeadline`],
//! [`NonabortCommit`]) exist to exhibit bad worst-case behavior in
//! experiments and tests.

use std::cmp::Ordering;

use thiserror::Error;

use crate::engine::{Decision, PolicyView, VisibilityMode};
use crate::model::{canonical_weight_sum, completion_step, FadeTrace, Packet, Step};

/// The golden ratio, (1 + √5)/2 — the abort threshold at which the
/// semi-greedy policy attains its best worst-case ratio of φ².
pub fn phi() -> f64 {
    (1.0 + 5.0_f64.sqrt()) / 2.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("alpha must be a finite number greater than 1, got {0}")]
    BadAlpha(f64),
    #[error("beta must be a finite number greater than 1, got {0}")]
    BadBeta(f64),
}

/// An online scheduling policy: a pure function from the per-step view to a
/// decision. Implementations carry parameters only, never per-run state.
pub trait Policy {
    /// Stable identifier used in reports and error messages,
    /// e.g. `semi-greedy:alpha=1.618`.
    fn name(&self) -> String;
    /// The visibility mode this policy needs, if it cannot run under both.
    fn required_mode(&self) -> Option<VisibilityMode>;
    fn decide(&self, view: &PolicyView<'_>) -> Decision;
}

/// True when `a` is preferred over `b` by weight, breaking ties toward the
/// earlier deadline and then the smaller id.
fn outranks_by_weight(a: &Packet, b: &Packet) -> bool {
    match a.weight.partial_cmp(&b.weight).expect("weights are finite") {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.deadline, a.id) < (b.deadline, b.id),
    }
}

/// Heaviest packet under the weight-primary tie-break, if any.
fn heaviest<'a>(packets: impl IntoIterator<Item = &'a Packet>) -> Option<&'a Packet> {
    packets
        .into_iter()
        .reduce(|best, p| if outranks_by_weight(p, best) { p } else { best })
}

/// Earliest-deadline packet, breaking ties toward the smaller id.
fn earliest_deadline<'a>(packets: impl IntoIterator<Item = &'a Packet>) -> Option<&'a Packet> {
    packets.into_iter().min_by_key(|p| (p.deadline, p.id))
}

/// Abort-threshold policy: start the heaviest feasible pending packet
/// whenever its weight is at least `alpha` times the running packet's weight
/// (an empty channel counts as weight zero, so it never stays idle while
/// anything is feasible).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiGreedy {
    alpha: f64,
}

impl SemiGreedy {
    pub fn new(alpha: f64) -> Result<Self, PolicyError> {
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(PolicyError::BadAlpha(alpha));
        }
        Ok(SemiGreedy { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Policy for SemiGreedy {
    fn name(&self) -> String {
        format!("semi-greedy:alpha={}", self.alpha)
    }

    fn required_mode(&self) -> Option<VisibilityMode> {
        None
    }

    fn decide(&self, view: &PolicyView<'_>) -> Decision {
        let heavy = heaviest(view.pending);
        match (view.running, heavy) {
            (None, None) => Decision::Idle,
            (None, Some(h)) => Decision::Start(h.id),
            (Some(_), None) => Decision::Continue,
            (Some(running), Some(h)) => {
                if h.weight >= self.alpha * running.packet.weight {
                    Decision::AbortAndStart(h.id)
                } else {
                    Decision::Continue
                }
            }
        }
    }
}

/// One planned slot of a provisional schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedTransmission {
    pub packet: Packet,
    pub start: Step,
    pub completion: Step,
}

/// A deadline-ordered, back-to-back plan for a subset of the pending packets
/// starting at some step: the `j`-th member occupies the `j`-th rung of the
/// completion ladder and meets its own deadline there.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvisionalSchedule {
    pub entries: Vec<PlannedTransmission>,
    pub total_value: f64,
}

impl ProvisionalSchedule {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.entries.iter().map(|e| &e.packet)
    }
}

/// Completion steps of up to `m` back-to-back unit-length transmissions, the
/// first starting at `t` (which must be a valid step of the trace): each
/// subsequent transmission starts right after the previous one completes.
/// The ladder is truncated where the trace can no longer complete a packet.
/// Because all packets share the same length, these rungs are
/// packet-independent.
pub fn completion_ladder(t: Step, trace: &FadeTrace, m: usize) -> Vec<Step> {
    let mut rungs = Vec::with_capacity(m);
    let mut start = t;
    while rungs.len() < m && start <= trace.horizon() {
        match completion_step(start, trace).expect("ladder stays within the horizon") {
            Some(c) => {
                rungs.push(c);
                start = c + 1;
            }
            None => break,
        }
    }
    rungs
}

/// Is the deadline-sorted set `members` consistent with the ladder, i.e.
/// does the `j`-th member's deadline admit completion at rung `j`?
fn position_feasible(members: &[&Packet], ladder: &[Step]) -> bool {
    members.len() <= ladder.len()
        && members.iter().zip(ladder).all(|(p, &rung)| p.deadline >= rung)
}

/// Maximum-total-value provisional schedule for `pending` starting at `t`.
///
/// Greedy by descending weight (ties: earlier deadline, then smaller id),
/// admitting a packet iff the admitted set, sorted by deadline, still fits
/// the completion ladder position-by-position. Later rungs only ever demand
/// later deadlines, so admissible sets form a matroid and the greedy sweep
/// is exact; the test suite cross-checks it against subset enumeration
/// rather than trusting that argument.
pub fn optimal_provisional(pending: &[Packet], t: Step, trace: &FadeTrace) -> ProvisionalSchedule {
    let ladder = completion_ladder(t, trace, pending.len());
    let mut by_weight: Vec<&Packet> = pending.iter().collect();
    by_weight.sort_by(|a, b| {
        if outranks_by_weight(a, b) {
            Ordering::Less
        } else if outranks_by_weight(b, a) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });

    let mut admitted: Vec<&Packet> = Vec::new();
    for candidate in by_weight {
        let mut trial = admitted.clone();
        trial.push(candidate);
        trial.sort_by_key(|p| (p.deadline, p.id));
        if position_feasible(&trial, &ladder) {
            admitted = trial;
        }
    }

    let entries: Vec<PlannedTransmission> = admitted
        .iter()
        .enumerate()
        .map(|(j, p)| PlannedTransmission {
            packet: **p,
            start: if j == 0 { t } else { ladder[j - 1] + 1 },
            completion: ladder[j],
        })
        .collect();
    let total_value = canonical_weight_sum(admitted.iter().copied());
    ProvisionalSchedule { entries, total_value }
}

/// Earliest-deadline-first policy with provisional planning and an arrival
/// abort threshold; requires full trace knowledge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfBeta {
    beta: f64,
}

impl EdfBeta {
    pub fn new(beta: f64) -> Result<Self, PolicyError> {
        if !beta.is_finite() || beta <= 1.0 {
            return Err(PolicyError::BadBeta(beta));
        }
        Ok(EdfBeta { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Policy for EdfBeta {
    fn name(&self) -> String {
        format!("edf:beta={}", self.beta)
    }

    fn required_mode(&self) -> Option<VisibilityMode> {
        Some(VisibilityMode::FadeKnown)
    }

    fn decide(&self, view: &PolicyView<'_>) -> Decision {
        if let Some(running) = view.running {
            // Only packets that arrived this very step may preempt, and only
            // with a beta-fold weight advantage.
            let qualifier = heaviest(
                view.pending
                    .iter()
                    .filter(|p| p.release == view.now)
                    .filter(|p| p.weight >= self.beta * running.packet.weight),
            );
            return match qualifier {
                Some(p) => Decision::AbortAndStart(p.id),
                None => Decision::Continue,
            };
        }

        let trace = view.trace().expect("the engine enforces fade-known mode for this policy");
        let plan = optimal_provisional(view.pending, view.now, trace);
        let Some(earliest) = plan.entries.first().map(|e| e.packet) else {
            return Decision::Idle;
        };
        let heavy = *heaviest(plan.packets()).expect("plan is non-empty");
        if earliest.weight >= heavy.weight / self.beta {
            return Decision::Start(earliest.id);
        }
        // The earliest member is too light; take the earliest-deadline member
        // that is heavy enough. The threshold never excludes the heaviest
        // member, so a qualifier always exists.
        let threshold = (self.beta * earliest.weight).max(heavy.weight / self.beta);
        let qualifier = plan
            .packets()
            .find(|p| p.weight >= threshold)
            .expect("the heaviest plan member clears the threshold");
        Decision::Start(qualifier.id)
    }
}

/// Baseline: always chase the heaviest feasible packet, aborting for any
/// strictly heavier one.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyMax;

impl Policy for GreedyMax {
    fn name(&self) -> String {
        "greedy-max".into()
    }

    fn required_mode(&self) -> Option<VisibilityMode> {
        None
    }

    fn decide(&self, view: &PolicyView<'_>) -> Decision {
        let heavy = heaviest(view.pending);
        match (view.running, heavy) {
            (None, None) => Decision::Idle,
            (None, Some(h)) => Decision::Start(h.id),
            (Some(_), None) => Decision::Continue,
            (Some(running), Some(h)) => {
                if h.weight > running.packet.weight {
                    Decision::AbortAndStart(h.id)
                } else {
                    Decision::Continue
                }
            }
        }
    }
}

/// Baseline: always chase the earliest deadline, aborting for any strictly
/// earlier one.
#[derive(Debug, Clone, Copy, Default)]
pub struct EarliestDeadline;

impl Policy for EarliestDeadline {
    fn name(&self) -> String {
        "earliest-deadline".into()
    }

    fn required_mode(&self) -> Option<VisibilityMode> {
        None
    }

    fn decide(&self, view: &PolicyView<'_>) -> Decision {
        let urgent = earliest_deadline(view.pending);
        match (view.running, urgent) {
            (None, None) => Decision::Idle,
            (None, Some(u)) => Decision::Start(u.id),
            (Some(_), None) => Decision::Continue,
            (Some(running), Some(u)) => {
                if u.deadline < running.packet.deadline {
                    Decision::AbortAndStart(u.id)
                } else {
                    Decision::Continue
                }
            }
        }
    }
}

/// Baseline: commit to the earliest-released feasible packet and never abort.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonabortCommit;

impl Policy for NonabortCommit {
    fn name(&self) -> String {
        "nonabort-commit".into()
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
            .min_by_key(|p| (p.release, p.deadline, p.id))
            .map_or(Decision::Idle, |p| Decision::Start(p.id))
    }
}
