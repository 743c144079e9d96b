//! Instance constructions and abort-chain analysis.
//!
//! This module supplies the raw material for competitive-ratio experiments:
//! hand-built adversarial families with known optimal values, seeded random
//! suites over several fade processes, a value-preserving translation of
//! slotted bounded-delay instances into fading instances, and the chain
//! machinery that turns a decision log's abort history into checkable
//! weight-growth sequences.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{DecisionLog, StepEvent};
use crate::model::{FadeTrace, Instance, ModelError, Packet, PacketId, Step};
use crate::oracle::{bounded_delay_optimal, BoundedDelayInstance, OracleError};
use crate::policy::phi;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("alpha must be a finite number greater than 1, got {0}")]
    BadAlpha(f64),
    #[error("step {step}: decision log is not a valid abort-threshold history: {what}")]
    ChainStructure { step: Step, what: String },
    #[error("invalid suite parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Upper-bound coefficient for the total weight of an abort chain with
/// `links` aborts (so `links + 1` packets), relative to the final packet's
/// weight: `(α^(links+1) − 1) / (α^links · (α − 1))`, which is the geometric
/// sum `1 + 1/α + … + 1/α^links`.
///
/// The bound is exactly attained by the chain whose weights grow by a factor
/// of `α` per abort. It increases with `links` toward the limit `α/(α−1)`.
pub fn chain_bound(links: u32, alpha: f64) -> Result<f64, LabError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(LabError::BadAlpha(alpha));
    }
    let k = i32::try_from(links).map_err(|_| LabError::BadParams("links out of range".into()))?;
    Ok((alpha.powi(k + 1) - 1.0) / (alpha.powi(k) * (alpha - 1.0)))
}

/// A maximal abort sequence from one run: each packet was aborted by the
/// commit of the next, and the final packet either completed or was still
/// transmitting when the log ended. Weights grow at least `α`-fold per link.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// Transmission order; each entry is `(id, weight)`.
    pub packets: Vec<(PacketId, f64)>,
    pub alpha: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Number of abort links (packets − 1).
    pub fn links(&self) -> u32 {
        (self.packets.len().saturating_sub(1)) as u32
    }

    /// Total weight, summed in ascending-id order for bit-stable results.
    pub fn total_weight(&self) -> f64 {
        let mut entries = self.packets.clone();
        entries.sort_by_key(|(id, _)| *id);
        entries.into_iter().map(|(_, w)| w).sum()
    }

    pub fn last_weight(&self) -> f64 {
        self.packets.last().map_or(0.0, |(_, w)| *w)
    }

    /// `W(C) / w_last`. Weights along a chain are non-decreasing, so the
    /// last weight is zero only when every weight is; that degenerate chain
    /// reports a neutral ratio of 1.
    pub fn ratio(&self) -> f64 {
        let last = self.last_weight();
        if last == 0.0 {
            1.0
        } else {
            self.total_weight() / last
        }
    }
}

/// Splits a run's history into abort chains: every commit either opens a
/// chain (idle channel) or extends one (it aborted the running packet), and
/// a completion closes the open chain. Returns an error when the log cannot
/// have come from an abort-threshold run with this `alpha` — that is, when
/// some abort's replacement is lighter than `alpha` times the victim — or
/// when the event stream is structurally inconsistent.
///
/// The chains partition the log's transmissions: each started transmission
/// belongs to exactly one chain. A packet that is aborted, later restarted,
/// and run again contributes one chain entry per transmission.
pub fn extract_chains(
    log: &DecisionLog,
    instance: &Instance,
    alpha: f64,
) -> Result<Vec<Chain>, LabError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(LabError::BadAlpha(alpha));
    }
    let weight_of = |id: PacketId, step: Step| -> Result<f64, LabError> {
        instance.packet(id).map(|p| p.weight).ok_or_else(|| LabError::ChainStructure {
            step,
            what: format!("log references packet {id}, which the instance does not contain"),
        })
    };

    let mut chains: Vec<Chain> = Vec::new();
    let mut open: Option<Vec<(PacketId, f64)>> = None;
    let mut aborted_here: Option<PacketId> = None;

    for record in &log.records {
        let step = record.step;
        for event in &record.events {
            match event {
                StepEvent::Expired { .. } => {}
                StepEvent::Aborted { packet } => {
                    let chain = open.as_ref().ok_or_else(|| LabError::ChainStructure {
                        step,
                        what: format!("packet {packet} aborted while no chain is open"),
                    })?;
                    let (tail, _) = *chain.last().expect("open chains are never empty");
                    if tail != *packet {
                        return Err(LabError::ChainStructure {
                            step,
                            what: format!("abort of {packet} but the running packet is {tail}"),
                        });
                    }
                    aborted_here = Some(*packet);
                }
                StepEvent::Committed { packet } => {
                    let weight = weight_of(*packet, step)?;
                    match aborted_here.take() {
                        Some(victim) => {
                            let chain = open.as_mut().expect("abort requires an open chain");
                            let victim_weight = weight_of(victim, step)?;
                            if weight < alpha * victim_weight {
                                return Err(LabError::ChainStructure {
                                    step,
                                    what: format!(
                                        "{packet} (weight {weight}) aborted {victim} (weight \
                                         {victim_weight}) without an {alpha}-fold gain"
                                    ),
                                });
                            }
                            chain.push((*packet, weight));
                        }
                        None => {
                            if open.is_some() {
                                return Err(LabError::ChainStructure {
                                    step,
                                    what: format!(
                                        "commit of {packet} while another packet is running"
                                    ),
                                });
                            }
                            open = Some(vec![(*packet, weight)]);
                        }
                    }
                }
                StepEvent::Completed { packet } => {
                    let chain = open.take().ok_or_else(|| LabError::ChainStructure {
                        step,
                        what: format!("completion of {packet} while no chain is open"),
                    })?;
                    let (tail, _) = *chain.last().expect("open chains are never empty");
                    if tail != *packet {
                        return Err(LabError::ChainStructure {
                            step,
                            what: format!("completion of {packet} but the running packet is {tail}"),
                        });
                    }
                    chains.push(Chain { packets: chain, alpha });
                }
            }
        }
        if aborted_here.is_some() {
            return Err(LabError::ChainStructure {
                step,
                what: "abort without a same-step replacement commit".into(),
            });
        }
    }
    // A packet still transmitting when the log ends closes its chain.
    if let Some(chain) = open {
        chains.push(Chain { packets: chain, alpha });
    }
    Ok(chains)
}

/// An instance paired with the optimal offline value it was built to have.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedInstance {
    pub instance: Instance,
    pub expected_optimal: f64,
}

/// Two-branch adversarial family on a constant-half trace showing that a
/// committed-but-never-aborting scheduler forfeits half the value: the
/// adversary reveals a tight-deadline rival only after the victim commits.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratio2Family {
    pub branch_a: AnnotatedInstance,
    pub branch_b: AnnotatedInstance,
}

/// Branch A: a roomy packet and a tight mid-flight rival; the offline
/// optimum idles first and delivers both (value 2) while a non-aborting
/// scheduler that commits immediately delivers 1. Branch B adds a third
/// packet so that even an abort-capable scheduler that rescues the rival
/// still faces optimal value 2.
pub fn gen_ratio2_family() -> Ratio2Family {
    let build = |packets: Vec<Packet>| {
        Instance::new(packets, FadeTrace::constant(0.5, 5).expect("static trace"))
            .expect("static instance")
    };
    let p = |id, release, deadline| Packet::new(id, release, 1.0, deadline).expect("static packet");
    Ratio2Family {
        branch_a: AnnotatedInstance {
            instance: build(vec![p(1, 1, 5), p(2, 2, 3)]),
            expected_optimal: 2.0,
        },
        branch_b: AnnotatedInstance {
            instance: build(vec![p(1, 1, 5), p(2, 2, 3), p(3, 2, 4)]),
            expected_optimal: 2.0,
        },
    }
}

/// Two-branch family with weights (1, φ) showing a ratio of φ against any
/// online choice: the channel either dies right after the light packet's
/// window (making the heavy one the only prize) or stays up one more step.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFamily {
    pub branch_1: AnnotatedInstance,
    pub branch_2: AnnotatedInstance,
}

/// Both branches release `p₁` (weight 1, deadline 2) and `p₂` (weight φ,
/// deadline 3) at step 1. Branch 1 fades to zero after four half-quality
/// steps, branch 2 after five.
///
/// Under the complete-by-deadline semantics used throughout, the optimum of
/// **both** branches is φ (deliver only `p₂`): in branch 2 a schedule that
/// finishes `p₁` by step 2 cannot also finish `p₂` by its deadline 3. (A
/// looser start-by-deadline reading would allow value 1 + φ on branch 2;
/// this artifact does not use that reading.)
pub fn gen_phi_instance() -> PhiFamily {
    let golden = phi();
    let packets = |a: u64, b: u64| {
        vec![
            Packet::new(a, 1, 1.0, 2).expect("static packet"),
            Packet::new(b, 1, golden, 3).expect("static packet"),
        ]
    };
    let trace = |half_steps: usize| {
        let mut qualities = vec![0.5; half_steps];
        qualities.resize(6, 0.0);
        FadeTrace::new(qualities).expect("static trace")
    };
    PhiFamily {
        branch_1: AnnotatedInstance {
            instance: Instance::new(packets(1, 2), trace(4)).expect("static instance"),
            expected_optimal: golden,
        },
        branch_2: AnnotatedInstance {
            instance: Instance::new(packets(1, 2), trace(5)).expect("static instance"),
            expected_optimal: golden,
        },
    }
}

/// Result of translating a bounded-delay instance into a fading instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub instance: Instance,
    /// Last step of each segment, i.e. the rewritten deadline of the packet
    /// scheduled in that position; the final entry is the horizon.
    pub segment_ends: Vec<Step>,
    /// Packets occupying schedule positions 1..=m, dummies included.
    pub scheduled: Vec<PacketId>,
}

/// Translates a slotted bounded-delay instance into a fading instance with
/// the same optimal value.
///
/// The optimal slot schedule is computed first; empty slots up to the last
/// occupied one are filled with zero-weight placeholder packets. Deadlines
/// along the schedule are then rewritten to be strictly increasing (each
/// lowered to just below its successor's, never raised), and the fade trace
/// is built so that the span between consecutive rewritten deadlines has
/// uniform quality summing to exactly one packet length — each schedule
/// position becomes one just-in-time transmission window. Packets the
/// optimum does not schedule keep their release and weight, with deadlines
/// clamped to the new horizon.
pub fn reduce_bounded_delay(bd: &BoundedDelayInstance) -> Result<Reduction, LabError> {
    let plan = bounded_delay_optimal(bd)?;
    let Some((&last_slot, _)) = plan.slots.iter().next_back() else {
        return Err(LabError::BadParams(
            "the bounded-delay optimum schedules no packets; nothing to translate".into(),
        ));
    };
    let m = last_slot as usize;
    let max_real_id = bd.packets().iter().map(|p| p.id.0).max().unwrap_or(0);
    let by_id: BTreeMap<PacketId, &Packet> = bd.packets().iter().map(|p| (p.id, p)).collect();

    // Position i holds either the scheduled packet or a placeholder pinned
    // to exactly slot i.
    struct Slot {
        id: PacketId,
        release: Step,
        weight: f64,
        deadline: Step,
    }
    let mut positions: Vec<Slot> = (1..=m as Step)
        .map(|slot| match plan.slots.get(&slot) {
            Some(&id) => {
                let p = by_id[&id];
                Slot { id, release: p.release, weight: p.weight, deadline: p.deadline }
            }
            None => Slot {
                id: PacketId(max_real_id + slot as u64),
                release: slot,
                weight: 0.0,
                deadline: slot,
            },
        })
        .collect();

    // Strictly increasing deadlines: lower each to just below its successor,
    // back to front. Slot feasibility (deadline ≥ position) survives.
    for i in (0..m.saturating_sub(1)).rev() {
        positions[i].deadline = positions[i].deadline.min(positions[i + 1].deadline - 1);
    }
    debug_assert!(positions.iter().enumerate().all(|(i, s)| s.deadline > i as Step));

    let segment_ends: Vec<Step> = positions.iter().map(|s| s.deadline).collect();
    let horizon = *segment_ends.last().expect("at least one position");
    let mut qualities = Vec::with_capacity(horizon as usize);
    let mut prev = 0;
    for &end in &segment_ends {
        let len = (end - prev) as usize;
        qualities.extend(std::iter::repeat_n(1.0 / len as f64, len));
        prev = end;
    }
    let trace = FadeTrace::new(qualities)?;

    let mut packets: Vec<Packet> = positions
        .iter()
        .map(|s| Packet::new(s.id.0, s.release, s.weight, s.deadline))
        .collect::<Result<_, _>>()?;
    let scheduled_ids: Vec<PacketId> = positions.iter().map(|s| s.id).collect();
    for p in bd.packets() {
        if scheduled_ids.contains(&p.id) {
            continue;
        }
        if p.release > horizon {
            // An unscheduled packet releasing after every rewritten deadline
            // had a free slot available, so optimality forces weight zero;
            // dropping it cannot change any optimum.
            debug_assert_eq!(p.weight, 0.0);
            continue;
        }
        packets.push(Packet::new(p.id.0, p.release, p.weight, p.deadline.min(horizon))?);
    }

    Ok(Reduction {
        instance: Instance::new(packets, trace)?,
        segment_ends,
        scheduled: scheduled_ids,
    })
}

/// Weight distribution for random suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Pareto with scale `lo` and the given tail `shape` (smaller shape,
    /// heavier tail).
    HeavyTail { lo: f64, shape: f64 },
}

/// Per-step channel quality process for random suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadeProcess {
    Constant { q: f64 },
    /// Independent draws, uniform over the support values.
    Iid { support: Vec<f64> },
    /// Two-state chain starting in the good state.
    TwoStateMarkov { q_good: f64, q_bad: f64, p_good_to_bad: f64, p_bad_to_good: f64 },
}

impl FadeProcess {
    /// Long-run mean quality; used to size deadline windows.
    fn mean_quality(&self) -> f64 {
        match self {
            FadeProcess::Constant { q } => *q,
            FadeProcess::Iid { support } => {
                support.iter().sum::<f64>() / support.len() as f64
            }
            FadeProcess::TwoStateMarkov { q_good, q_bad, p_good_to_bad, p_bad_to_good } => {
                let churn = p_good_to_bad + p_bad_to_good;
                if churn == 0.0 {
                    // No transitions ever happen; the chain stays in its
                    // initial (good) state.
                    *q_good
                } else {
                    let good_share = p_bad_to_good / churn;
                    good_share * q_good + (1.0 - good_share) * q_bad
                }
            }
        }
    }

    fn validate(&self) -> Result<(), LabError> {
        let quality_ok = |q: f64| q.is_finite() && (0.0..=1.0).contains(&q);
        let prob_ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        match self {
            FadeProcess::Constant { q } if !quality_ok(*q) => {
                Err(LabError::BadParams(format!("constant quality {q} outside [0, 1]")))
            }
            FadeProcess::Iid { support } if support.is_empty() => {
                Err(LabError::BadParams("iid support is empty".into()))
            }
            FadeProcess::Iid { support } if !support.iter().all(|&q| quality_ok(q)) => {
                Err(LabError::BadParams("iid support has a quality outside [0, 1]".into()))
            }
            FadeProcess::TwoStateMarkov { q_good, q_bad, p_good_to_bad, p_bad_to_good }
                if !(quality_ok(*q_good)
                    && quality_ok(*q_bad)
                    && prob_ok(*p_good_to_bad)
                    && prob_ok(*p_bad_to_good)) =>
            {
                Err(LabError::BadParams("markov qualities/probabilities outside [0, 1]".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Parameters for a seeded random instance suite.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSuiteParams {
    pub count: usize,
    pub packets_per_instance: usize,
    pub horizon: Step,
    pub weights: WeightDist,
    /// Inclusive range of extra steps granted beyond the mean transmission
    /// span when drawing deadlines.
    pub slack: (Step, Step),
    pub fade: FadeProcess,
    pub seed: u64,
}

impl RandomSuiteParams {
    fn validate(&self) -> Result<Step, LabError> {
        if self.horizon == 0 {
            return Err(LabError::BadParams("horizon must be at least 1".into()));
        }
        match self.weights {
            WeightDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
                    return Err(LabError::BadParams(format!(
                        "uniform weight range [{lo}, {hi}) must be positive and non-empty"
                    )));
                }
            }
            WeightDist::HeavyTail { lo, shape } => {
                if !(lo.is_finite() && shape.is_finite() && lo > 0.0 && shape > 0.0) {
                    return Err(LabError::BadParams(format!(
                        "heavy-tail scale {lo} and shape {shape} must be positive"
                    )));
                }
            }
        }
        if self.slack.0 > self.slack.1 {
            return Err(LabError::BadParams("slack range is inverted".into()));
        }
        self.fade.validate()?;
        let mean = self.fade.mean_quality();
        if mean <= 0.0 {
            return Err(LabError::BadParams(
                "mean channel quality is zero; no packet could ever complete".into(),
            ));
        }
        let mean_span = (1.0 / mean).ceil() as Step;
        if mean_span > self.horizon {
            return Err(LabError::BadParams(format!(
                "horizon {} is shorter than the mean transmission span {}",
                self.horizon, mean_span
            )));
        }
        Ok(mean_span)
    }
}

/// Generates `params.count` instances, deterministically in the seed.
/// Releases fall where a mean-quality transmission still fits before the
/// horizon; deadlines are `release + mean span + slack`, clamped to the
/// horizon. Overload (more demand than the channel can carry) is permitted
/// and expected.
pub fn gen_random(params: &RandomSuiteParams) -> Result<Vec<Instance>, LabError> {
    let mean_span = params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let latest_release = params.horizon - mean_span + 1;

    let mut instances = Vec::with_capacity(params.count);
    for _ in 0..params.count {
        let qualities: Vec<f64> = match &params.fade {
            FadeProcess::Constant { q } => vec![*q; params.horizon as usize],
            FadeProcess::Iid { support } => (0..params.horizon)
                .map(|_| support[rng.gen_range(0..support.len())])
                .collect(),
            FadeProcess::TwoStateMarkov { q_good, q_bad, p_good_to_bad, p_bad_to_good } => {
                let mut good = true;
                (0..params.horizon)
                    .map(|_| {
                        let q = if good { *q_good } else { *q_bad };
                        let flip = if good { *p_good_to_bad } else { *p_bad_to_good };
                        if rng.gen_bool(flip) {
                            good = !good;
                        }
                        q
                    })
                    .collect()
            }
        };
        let trace = FadeTrace::new(qualities)?;

        let packets: Vec<Packet> = (0..params.packets_per_instance)
            .map(|j| {
                let release = rng.gen_range(1..=latest_release);
                let slack = rng.gen_range(params.slack.0..=params.slack.1);
                let deadline = (release + mean_span + slack).min(params.horizon);
                let weight = match params.weights {
                    WeightDist::Uniform { lo, hi } => rng.gen_range(lo..hi),
                    WeightDist::HeavyTail { lo, shape } => {
                        // Pareto by inverse transform; 1−u keeps u away from 0.
                        let u = 1.0 - rng.gen::<f64>();
                        lo * u.powf(-1.0 / shape)
                    }
                };
                Packet::new(j as u64 + 1, release, weight, deadline)
            })
            .collect::<Result<_, _>>()?;
        instances.push(Instance::new(packets, trace)?);
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, VisibilityMode};
    use crate::model::commit_feasible;
    use crate::oracle::{offline_optimal, offline_optimal_with_cap};
    use crate::policy::{GreedyMax, SemiGreedy};

    const ORACLE: VisibilityMode = VisibilityMode::FadeUnknownWithCommitOracle;

    fn packet(id: u64, release: Step, weight: f64, deadline: Step) -> Packet {
        Packet::new(id, release, weight, deadline).unwrap()
    }

    #[test]
    fn chain_bound_matches_the_geometric_sum() {
        assert_eq!(chain_bound(3, 2.0).unwrap(), 15.0 / 8.0);
        assert_eq!(chain_bound(0, 7.3).unwrap(), 1.0);
        for links in 0..12u32 {
            for &alpha in &[1.5, phi(), 2.0, 3.0] {
                let series: f64 = (0..=links).map(|j| alpha.powi(-(j as i32))).sum();
                let closed = chain_bound(links, alpha).unwrap();
                assert!((closed - series).abs() < 1e-12, "links={links} alpha={alpha}");
            }
        }
    }

    #[test]
    fn chain_bound_grows_toward_its_limit() {
        let alpha = phi();
        let mut prev = 0.0;
        for links in 0..60 {
            let b = chain_bound(links, alpha).unwrap();
            assert!(b > prev);
            prev = b;
        }
        let limit = alpha / (alpha - 1.0);
        assert!((chain_bound(200, alpha).unwrap() - limit).abs() < 1e-9);
        assert!((limit - phi() * phi()).abs() < 1e-9);
    }

    #[test]
    fn chain_bound_rejects_bad_alpha() {
        assert!(chain_bound(3, 1.0).is_err());
        assert!(chain_bound(3, f64::NAN).is_err());
    }

    #[test]
    fn abort_free_runs_extract_singleton_chains() {
        let inst = Instance::new(
            vec![packet(1, 1, 1.0, 2), packet(2, 3, 2.0, 4)],
            FadeTrace::constant(0.5, 4).unwrap(),
        )
        .unwrap();
        let sg = SemiGreedy::new(2.0).unwrap();
        let (_, log) = run(&inst, &sg, ORACLE).unwrap();
        let chains = extract_chains(&log, &inst, 2.0).unwrap();
        assert_eq!(chains.len(), 2);
        assert!(chains.iter().all(|c| c.len() == 1 && c.links() == 0));
    }

    #[test]
    fn an_abort_links_victim_and_replacement_into_one_chain() {
        let inst = Instance::new(
            vec![packet(1, 1, 1.0, 6), packet(2, 2, 2.0, 6)],
            FadeTrace::constant(0.5, 6).unwrap(),
        )
        .unwrap();
        let sg = SemiGreedy::new(2.0).unwrap();
        let (_, log) = run(&inst, &sg, ORACLE).unwrap();
        let chains = extract_chains(&log, &inst, 2.0).unwrap();
        let with_abort: Vec<&Chain> = chains.iter().filter(|c| c.links() > 0).collect();
        assert_eq!(with_abort.len(), 1);
        let chain = with_abort[0];
        assert_eq!(
            chain.packets.iter().map(|(id, _)| *id).collect::<Vec<_>>(),
            vec![PacketId(1), PacketId(2)]
        );
        assert_eq!(chain.total_weight(), 3.0);
        assert_eq!(chain.ratio(), 1.5);
        assert!(chain.ratio() <= chain_bound(chain.links(), 2.0).unwrap());
    }

    #[test]
    fn foreign_logs_fail_the_chain_property() {
        // greedy-max aborts for a 1.2-fold gain; that can never happen under
        // a 2-fold abort threshold.
        let inst = Instance::new(
            vec![packet(1, 1, 1.0, 6), packet(2, 2, 1.2, 6)],
            FadeTrace::constant(0.5, 6).unwrap(),
        )
        .unwrap();
        let (_, log) = run(&inst, &GreedyMax, ORACLE).unwrap();
        let err = extract_chains(&log, &inst, 2.0).unwrap_err();
        assert!(matches!(err, LabError::ChainStructure { step: 2, .. }));
    }

    #[test]
    fn a_still_running_tail_closes_its_chain_at_log_end() {
        use crate::engine::{Decision, DecisionRecord};
        let inst = Instance::new(
            vec![packet(1, 1, 1.0, 4)],
            FadeTrace::constant(0.25, 4).unwrap(),
        )
        .unwrap();
        let log = DecisionLog {
            mode: ORACLE,
            records: vec![DecisionRecord {
                step: 1,
                pending: vec![PacketId(1)],
                running: None,
                decision: Decision::Start(PacketId(1)),
                events: vec![StepEvent::Committed { packet: PacketId(1) }],
            }],
        };
        let chains = extract_chains(&log, &inst, 2.0).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].packets, vec![(PacketId(1), 1.0)]);
    }

    #[test]
    fn ratio2_family_matches_its_annotations() {
        let family = gen_ratio2_family();
        assert_eq!(family.branch_a.instance.packets().len(), 2);
        assert_eq!(family.branch_b.instance.packets().len(), 3);
        assert_eq!(family.branch_a.instance.horizon(), 5);
        assert!(family.branch_a.instance.trace().qualities().iter().all(|&q| q == 0.5));
        let opt_a = offline_optimal(&family.branch_a.instance).unwrap();
        assert_eq!(opt_a.throughput, family.branch_a.expected_optimal);
        let opt_b = offline_optimal(&family.branch_b.instance).unwrap();
        assert_eq!(opt_b.throughput, family.branch_b.expected_optimal);
    }

    #[test]
    fn phi_family_matches_its_annotations() {
        let family = gen_phi_instance();
        let golden = phi();
        for branch in [&family.branch_1, &family.branch_2] {
            assert_eq!(branch.expected_optimal, golden);
            let opt = offline_optimal(&branch.instance).unwrap();
            assert_eq!(opt.throughput, golden);
            assert_eq!(opt.delivered.iter().copied().collect::<Vec<_>>(), vec![PacketId(2)]);
        }
        assert_eq!(family.branch_1.instance.trace().qualities(), &[0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);
        assert_eq!(family.branch_2.instance.trace().qualities(), &[0.5, 0.5, 0.5, 0.5, 0.5, 0.0]);
    }

    fn bd(packets: Vec<Packet>, horizon: Step) -> BoundedDelayInstance {
        BoundedDelayInstance::new(packets, horizon).unwrap()
    }

    #[test]
    fn reduction_preserves_the_two_packet_example() {
        let source = bd(vec![packet(1, 1, 5.0, 1), packet(2, 1, 3.0, 2)], 2);
        let reduced = reduce_bounded_delay(&source).unwrap();
        let deadlines: Vec<Step> =
            reduced.instance.packets().iter().map(|p| p.deadline).collect();
        let mut sorted = deadlines.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), deadlines.len(), "deadlines strictly increase");
        assert_eq!(offline_optimal(&reduced.instance).unwrap().throughput, 5.0 + 3.0);
    }

    #[test]
    fn reduction_fills_schedule_holes_with_placeholders() {
        // Releases force slots 1 and 3; slot 2 cannot be filled.
        let source = bd(vec![packet(1, 1, 1.0, 1), packet(2, 3, 1.0, 3)], 3);
        let reduced = reduce_bounded_delay(&source).unwrap();
        assert_eq!(reduced.scheduled.len(), 3);
        let dummy = reduced.instance.packet(reduced.scheduled[1]).unwrap();
        assert_eq!(dummy.weight, 0.0);
        assert_eq!((dummy.release, dummy.deadline), (2, 2));
        assert_eq!(offline_optimal(&reduced.instance).unwrap().throughput, 2.0);
    }

    #[test]
    fn reduction_of_a_single_packet_is_a_single_segment() {
        let source = bd(vec![packet(1, 1, 4.0, 1)], 1);
        let reduced = reduce_bounded_delay(&source).unwrap();
        assert_eq!(reduced.segment_ends, vec![1]);
        assert_eq!(reduced.instance.trace().qualities(), &[1.0]);
        assert_eq!(offline_optimal(&reduced.instance).unwrap().throughput, 4.0);
    }

    #[test]
    fn reduction_carries_unscheduled_packets_with_clamped_deadlines() {
        // Three packets compete for two slots; the lightest is unscheduled
        // but remains present in the fading instance.
        let source = bd(
            vec![packet(1, 1, 5.0, 2), packet(2, 1, 4.0, 2), packet(3, 1, 0.5, 2)],
            4,
        );
        let reduced = reduce_bounded_delay(&source).unwrap();
        let loser = reduced.instance.packet(PacketId(3)).unwrap();
        assert_eq!(loser.weight, 0.5);
        assert!(loser.deadline <= reduced.instance.horizon());
        assert_eq!(
            offline_optimal_with_cap(&reduced.instance, 16).unwrap().throughput,
            bounded_delay_optimal(&source).unwrap().value
        );
    }

    #[test]
    fn empty_bounded_delay_schedules_cannot_be_reduced() {
        let source = bd(vec![], 3);
        assert!(matches!(reduce_bounded_delay(&source), Err(LabError::BadParams(_))));
    }

    fn base_params() -> RandomSuiteParams {
        RandomSuiteParams {
            count: 5,
            packets_per_instance: 4,
            horizon: 10,
            weights: WeightDist::Uniform { lo: 0.5, hi: 3.0 },
            slack: (0, 2),
            fade: FadeProcess::Iid { support: vec![0.25, 0.5, 1.0] },
            seed: 42,
        }
    }

    #[test]
    fn random_suites_are_deterministic_in_the_seed() {
        let params = base_params();
        let a = gen_random(&params).unwrap();
        let b = gen_random(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let mut other = params.clone();
        other.seed = 43;
        assert_ne!(gen_random(&other).unwrap(), a);
    }

    #[test]
    fn random_suites_have_the_requested_shape() {
        let params = base_params();
        let suite = gen_random(&params).unwrap();
        assert_eq!(suite.len(), 5);
        for inst in &suite {
            assert_eq!(inst.packets().len(), 4);
            assert_eq!(inst.horizon(), 10);
        }
    }

    #[test]
    fn full_quality_channel_makes_every_packet_feasible_at_release() {
        let params = RandomSuiteParams {
            fade: FadeProcess::Constant { q: 1.0 },
            slack: (0, 3),
            ..base_params()
        };
        for inst in gen_random(&params).unwrap() {
            for p in inst.packets() {
                assert!(commit_feasible(p, p.release, inst.trace()).unwrap());
            }
        }
    }

    #[test]
    fn heavy_tail_weights_stay_at_or_above_the_scale() {
        let params = RandomSuiteParams {
            weights: WeightDist::HeavyTail { lo: 2.0, shape: 1.5 },
            ..base_params()
        };
        for inst in gen_random(&params).unwrap() {
            assert!(inst.packets().iter().all(|p| p.weight >= 2.0 && p.weight.is_finite()));
        }
    }

    #[test]
    fn markov_traces_use_only_the_two_state_qualities() {
        let params = RandomSuiteParams {
            fade: FadeProcess::TwoStateMarkov {
                q_good: 0.9,
                q_bad: 0.2,
                p_good_to_bad: 0.3,
                p_bad_to_good: 0.5,
            },
            ..base_params()
        };
        for inst in gen_random(&params).unwrap() {
            assert!(inst.trace().qualities().iter().all(|&q| q == 0.9 || q == 0.2));
        }
    }

    #[test]
    fn unsatisfiable_suite_parameters_are_rejected() {
        let too_short = RandomSuiteParams {
            horizon: 2,
            fade: FadeProcess::Constant { q: 0.25 },
            ..base_params()
        };
        assert!(matches!(gen_random(&too_short), Err(LabError::BadParams(_))));

        let dead_channel = RandomSuiteParams {
            fade: FadeProcess::Constant { q: 0.0 },
            ..base_params()
        };
        assert!(gen_random(&dead_channel).is_err());

        let inverted = RandomSuiteParams { slack: (3, 1), ..base_params() };
        assert!(gen_random(&inverted).is_err());

        let bad_weights =
            RandomSuiteParams { weights: WeightDist::Uniform { lo: 2.0, hi: 2.0 }, ..base_params() };
        assert!(gen_random(&bad_weights).is_err());
    }
}
