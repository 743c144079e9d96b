//! Experiment orchestration: load or generate instance suites, run policies
//! against the offline optimum, compute competitive ratios, audit abort
//! chains, and emit deterministic CSV/JSON reports.
//!
//! Reports are bit-stable: instance evaluations may run concurrently, but
//! rows are merged in `(instance id, policy name)` order and every float is
//! printed with a fixed 12-significant-digit format, so identical configs
//! and seeds produce byte-identical files.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run, EngineError, VisibilityMode};
use crate::lab::{
    extract_chains, gen_phi_instance, gen_random, gen_ratio2_family, FadeProcess, LabError,
    RandomSuiteParams, WeightDist,
};
use crate::model::{validate_outcome, Instance, ModelError, Step};
use crate::oracle::{offline_optimal_with_cap, OracleError, DEFAULT_ORACLE_CAP};
use crate::policy::{
    phi, EarliestDeadline, EdfBeta, GreedyMax, NonabortCommit, Policy, SemiGreedy,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("instance {instance_id}, policy {policy}: outcome failed validation: {detail}")]
    OutcomeInvalid { instance_id: String, policy: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A competitive ratio. Finite values serialize as numbers; the unbounded
/// sentinel (an online value of zero against a positive optimum) serializes
/// as the string `"inf"` in both CSV and JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub f64);

impl Ratio {
    /// `opt / online`, with the two degenerate cases pinned: both zero is a
    /// neutral 1, a zero online value against a positive optimum is the
    /// unbounded sentinel.
    pub fn of(online_value: f64, opt_value: f64) -> Ratio {
        if online_value == 0.0 {
            if opt_value == 0.0 {
                Ratio(1.0)
            } else {
                Ratio(f64::INFINITY)
            }
        } else {
            Ratio(opt_value / online_value)
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else {
            serializer.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Ratio;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Ratio, E> {
                Ok(Ratio(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Ratio, E> {
                Ok(Ratio(v as f64))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Ratio, E> {
                Ok(Ratio(v as f64))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Ratio, E> {
                match v {
                    "inf" => Ok(Ratio(f64::INFINITY)),
                    other => Err(E::custom(format!("unexpected ratio string {other:?}"))),
                }
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// One policy to evaluate, as a spec string plus the visibility mode it runs
/// under. Spec strings: `semi-greedy:alpha=<x|phi>`, `edf:beta=<x|phi>`,
/// `greedy-max`, `earliest-deadline`, `nonabort-commit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub policy: String,
    pub mode: VisibilityMode,
}

/// Shape of a random suite as written in config files; the experiment seed
/// is supplied separately so that one config field controls all randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSuiteSpec {
    pub count: usize,
    pub packets_per_instance: usize,
    pub horizon: Step,
    pub weights: WeightDist,
    pub slack: (Step, Step),
    pub fade: FadeProcess,
}

impl RandomSuiteSpec {
    pub fn params(&self, seed: u64) -> RandomSuiteParams {
        RandomSuiteParams {
            count: self.count,
            packets_per_instance: self.packets_per_instance,
            horizon: self.horizon,
            weights: self.weights.clone(),
            slack: self.slack,
            fade: self.fade.clone(),
            seed,
        }
    }
}

/// Built-in instance generators selectable from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum GeneratorSpec {
    /// The two-branch constant-half family with optimum 2.
    Ratio2,
    /// The two-branch golden-ratio family with optimum φ.
    Phi,
    /// A seeded random suite.
    Random(RandomSuiteSpec),
}

/// Where an experiment's instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// JSON instance files matching a glob pattern, identified by file stem.
    Files { glob: String },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: InstanceSource,
    pub policies: Vec<PolicyEntry>,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    #[serde(default)]
    pub csv_out: Option<PathBuf>,
    #[serde(default)]
    pub json_out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_oracle_cap() -> usize {
    DEFAULT_ORACLE_CAP
}

/// One (instance, policy) evaluation. Skipped rows (oracle cap exceeded)
/// keep their identity columns and a reason but no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance_id: String,
    pub policy: String,
    pub mode: VisibilityMode,
    pub online_value: Option<f64>,
    pub opt_value: Option<f64>,
    pub ratio: Option<Ratio>,
    /// Largest `W(C)/w_last` over the row's abort chains; present only for
    /// abort-threshold policies that committed at least one packet.
    pub max_chain_ratio: Option<f64>,
    pub skipped: bool,
    pub reason: String,
}

/// Per-(policy, mode) aggregate over the non-skipped rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub mode: VisibilityMode,
    pub rows: usize,
    pub skipped: usize,
    pub max_ratio: Option<Ratio>,
    pub mean_ratio: Option<Ratio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub oracle_cap: usize,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<PolicySummary>,
}

pub const REPORT_CSV_HEADER: &str =
    "instance_id,policy,mode,online_value,opt_value,ratio,max_chain_ratio,skipped,reason";

/// Formats a finite float with exactly 12 significant digits.
fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_field(s: &str) -> Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(s)
    }
}

fn ratio_field(r: Option<Ratio>) -> String {
    match r {
        None => String::new(),
        Some(r) if r.is_unbounded() => "inf".into(),
        Some(r) => sig12(r.0),
    }
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let fields = [
                csv_field(&row.instance_id).into_owned(),
                csv_field(&row.policy).into_owned(),
                row.mode.to_string(),
                row.online_value.map(sig12).unwrap_or_default(),
                row.opt_value.map(sig12).unwrap_or_default(),
                ratio_field(row.ratio),
                row.max_chain_ratio.map(sig12).unwrap_or_default(),
                row.skipped.to_string(),
                csv_field(&row.reason).into_owned(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// A policy ready to run: the boxed implementation, its canonical name, the
/// mode it was configured with, and — for abort-threshold policies — the α
/// used to audit abort chains.
pub struct PreparedPolicy {
    pub name: String,
    pub mode: VisibilityMode,
    pub policy: Box<dyn Policy + Send + Sync>,
    pub chain_alpha: Option<f64>,
}

/// Parses a policy spec string. The value `phi` is accepted wherever a
/// number is, yielding the golden ratio at full precision.
pub fn parse_policy_spec(
    spec: &str,
) -> Result<(Box<dyn Policy + Send + Sync>, Option<f64>), HarnessError> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let param = |key: &str| -> Result<f64, HarnessError> {
        let args = args.ok_or_else(|| {
            HarnessError::Config(format!("policy '{spec}' needs a parameter: {name}:{key}=<value>"))
        })?;
        let (k, v) = args.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("policy '{spec}': expected {key}=<value> after ':'"))
        })?;
        if k != key {
            return Err(HarnessError::Config(format!(
                "policy '{spec}': unknown parameter '{k}' (expected '{key}')"
            )));
        }
        if v == "phi" {
            return Ok(phi());
        }
        v.parse::<f64>().map_err(|e| {
            HarnessError::Config(format!("policy '{spec}': cannot parse '{v}' as a number: {e}"))
        })
    };
    let no_args = || -> Result<(), HarnessError> {
        match args {
            Some(extra) => Err(HarnessError::Config(format!(
                "policy '{name}' takes no parameters, got ':{extra}'"
            ))),
            None => Ok(()),
        }
    };
    let cfg = |e: crate::policy::PolicyError| HarnessError::Config(e.to_string());
    match name {
        "semi-greedy" => {
            let alpha = param("alpha")?;
            Ok((Box::new(SemiGreedy::new(alpha).map_err(cfg)?), Some(alpha)))
        }
        "edf" => {
            let beta = param("beta")?;
            Ok((Box::new(EdfBeta::new(beta).map_err(cfg)?), None))
        }
        "greedy-max" => {
            no_args()?;
            Ok((Box::new(GreedyMax), None))
        }
        "earliest-deadline" => {
            no_args()?;
            Ok((Box::new(EarliestDeadline), None))
        }
        "nonabort-commit" => {
            no_args()?;
            Ok((Box::new(NonabortCommit), None))
        }
        other => Err(HarnessError::Config(format!(
            "unknown policy '{other}' (known: semi-greedy, edf, greedy-max, earliest-deadline, \
             nonabort-commit)"
        ))),
    }
}

/// Parses and mode-checks one config entry. A policy that requires a
/// visibility mode must be configured with exactly that mode.
pub fn prepare_policy(entry: &PolicyEntry) -> Result<PreparedPolicy, HarnessError> {
    let (policy, chain_alpha) = parse_policy_spec(&entry.policy)?;
    if let Some(required) = policy.required_mode() {
        if required != entry.mode {
            return Err(HarnessError::Config(format!(
                "policy '{}' requires mode {required}, but the config asks for {}",
                entry.policy, entry.mode
            )));
        }
    }
    Ok(PreparedPolicy { name: policy.name(), mode: entry.mode, policy, chain_alpha })
}

/// An instance produced by a generator, with the optimal value the family
/// construction guarantees (random suites carry none).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub id: String,
    pub instance: Instance,
    pub expected_optimal: Option<f64>,
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Vec<GeneratedInstance>, HarnessError> {
    let gi = |id: &str, instance: Instance, expected: Option<f64>| GeneratedInstance {
        id: id.to_string(),
        instance,
        expected_optimal: expected,
    };
    Ok(match spec {
        GeneratorSpec::Ratio2 => {
            let family = gen_ratio2_family();
            vec![
                gi("ratio2-a", family.branch_a.instance, Some(family.branch_a.expected_optimal)),
                gi("ratio2-b", family.branch_b.instance, Some(family.branch_b.expected_optimal)),
            ]
        }
        GeneratorSpec::Phi => {
            let family = gen_phi_instance();
            vec![
                gi("phi-1", family.branch_1.instance, Some(family.branch_1.expected_optimal)),
                gi("phi-2", family.branch_2.instance, Some(family.branch_2.expected_optimal)),
            ]
        }
        GeneratorSpec::Random(shape) => gen_random(&shape.params(seed))?
            .into_iter()
            .enumerate()
            .map(|(i, instance)| gi(&format!("random-{:05}", i + 1), instance, None))
            .collect(),
    })
}

/// Loads the experiment's instances as `(id, instance)` pairs. File sources
/// are read in sorted path order and identified by file stem; duplicate
/// stems are a config error, as ids must be unique.
pub fn load_instances(
    source: &InstanceSource,
    seed: u64,
) -> Result<Vec<(String, Instance)>, HarnessError> {
    match source {
        InstanceSource::Files { glob: pattern } => {
            let entries = glob::glob(pattern)
                .map_err(|e| HarnessError::Config(format!("bad glob '{pattern}': {e}")))?;
            let mut paths: Vec<PathBuf> = entries
                .collect::<Result<_, _>>()
                .map_err(|e| HarnessError::Config(format!("glob '{pattern}': {e}")))?;
            paths.sort();
            let mut named = Vec::with_capacity(paths.len());
            for path in paths {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| {
                        HarnessError::Config(format!("{} has no file stem", path.display()))
                    })?;
                let text = fs::read_to_string(&path)
                    .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                let instance: Instance = serde_json::from_str(&text)
                    .map_err(|source| HarnessError::Parse { path: path.clone(), source })?;
                named.push((stem, instance));
            }
            for pair in named.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(HarnessError::Config(format!(
                        "duplicate instance id '{}' (file stems must be unique)",
                        pair[0].0
                    )));
                }
            }
            Ok(named)
        }
        InstanceSource::Generator(spec) => Ok(generate(spec, seed)?
            .into_iter()
            .map(|g| (g.id, g.instance))
            .collect()),
    }
}

/// Evaluates one policy on one instance: exact optimum, online run, outcome
/// validation, ratio, and chain audit. An instance over the oracle cap
/// yields a skipped row rather than an error.
pub fn evaluate(
    instance_id: &str,
    instance: &Instance,
    prepared: &PreparedPolicy,
    oracle_cap: usize,
) -> Result<ReportRow, HarnessError> {
    let identity = |skipped: bool, reason: String| ReportRow {
        instance_id: instance_id.to_string(),
        policy: prepared.name.clone(),
        mode: prepared.mode,
        online_value: None,
        opt_value: None,
        ratio: None,
        max_chain_ratio: None,
        skipped,
        reason,
    };
    let opt = match offline_optimal_with_cap(instance, oracle_cap) {
        Ok(outcome) => outcome,
        Err(OracleError::CapExceeded { packets, cap }) => {
            return Ok(identity(
                true,
                format!("oracle cap exceeded: {packets} packets, cap {cap}"),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let (outcome, log) = run(instance, prepared.policy.as_ref(), prepared.mode)?;
    let violations = validate_outcome(instance, &outcome);
    if !violations.is_empty() {
        return Err(HarnessError::OutcomeInvalid {
            instance_id: instance_id.to_string(),
            policy: prepared.name.clone(),
            detail: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        });
    }
    let max_chain_ratio = match prepared.chain_alpha {
        Some(alpha) => extract_chains(&log, instance, alpha)?
            .iter()
            .map(|c| c.ratio())
            .reduce(f64::max),
        None => None,
    };
    let mut row = identity(false, String::new());
    row.online_value = Some(outcome.throughput);
    row.opt_value = Some(opt.throughput);
    row.ratio = Some(Ratio::of(outcome.throughput, opt.throughput));
    row.max_chain_ratio = max_chain_ratio;
    Ok(row)
}

/// Evaluates every (instance, policy) pair concurrently and returns the rows
/// sorted by `(instance id, policy name, mode)`.
pub fn evaluate_suite(
    instances: &[(String, Instance)],
    policies: &[PreparedPolicy],
    oracle_cap: usize,
) -> Result<Vec<ReportRow>, HarnessError> {
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..policies.len()).map(move |p| (i, p)))
        .collect();
    let mut rows = tasks
        .par_iter()
        .map(|&(i, p)| {
            let (id, instance) = &instances[i];
            evaluate(id, instance, &policies[p], oracle_cap)
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| {
        (&a.instance_id, &a.policy, a.mode).cmp(&(&b.instance_id, &b.policy, b.mode))
    });
    Ok(rows)
}

/// Aggregates rows per (policy, mode). Every configured pair appears even
/// when no instances ran, so `rows + skipped` always accounts for the whole
/// input.
pub fn summarize(policies: &[PreparedPolicy], rows: &[ReportRow]) -> Vec<PolicySummary> {
    #[derive(Default)]
    struct Agg {
        rows: usize,
        skipped: usize,
        sum: f64,
        max: f64,
    }
    let mut groups: BTreeMap<(String, VisibilityMode), Agg> = policies
        .iter()
        .map(|p| ((p.name.clone(), p.mode), Agg::default()))
        .collect();
    for row in rows {
        let agg = groups.entry((row.policy.clone(), row.mode)).or_default();
        if row.skipped {
            agg.skipped += 1;
        } else {
            agg.rows += 1;
            let r = row.ratio.expect("non-skipped rows carry a ratio").0;
            agg.sum += r;
            agg.max = agg.max.max(r);
        }
    }
    groups
        .into_iter()
        .map(|((policy, mode), agg)| PolicySummary {
            policy,
            mode,
            rows: agg.rows,
            skipped: agg.skipped,
            max_ratio: (agg.rows > 0).then_some(Ratio(agg.max)),
            mean_ratio: (agg.rows > 0).then_some(Ratio(agg.sum / agg.rows as f64)),
        })
        .collect()
}

/// Runs a full experiment: prepare policies (config errors surface before
/// any instance is touched), load instances, evaluate, summarize, and write
/// any configured CSV/JSON outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, HarnessError> {
    if config.oracle_cap == 0 {
        return Err(HarnessError::Config("oracle cap must be positive".into()));
    }
    if config.policies.is_empty() {
        return Err(HarnessError::Config("policy list is empty".into()));
    }
    let policies = config
        .policies
        .iter()
        .map(prepare_policy)
        .collect::<Result<Vec<_>, _>>()?;
    let instances = load_instances(&config.instances, config.seed)?;
    let rows = evaluate_suite(&instances, &policies, config.oracle_cap)?;
    let summary = summarize(&policies, &rows);
    let report = Report { seed: config.seed, oracle_cap: config.oracle_cap, rows, summary };
    if let Some(path) = &config.csv_out {
        fs::write(path, report.to_csv())
            .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    }
    if let Some(path) = &config.json_out {
        fs::write(path, report.to_json()?)
            .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    }
    Ok(report)
}

/// Which policy parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Beta,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Beta => "beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    /// Parameter values, each in (1, 4].
    pub values: Vec<f64>,
    pub instances: InstanceSource,
    /// Defaults per parameter: α runs fade-unknown, β requires fade-known.
    #[serde(default)]
    pub mode: Option<VisibilityMode>,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    #[serde(default)]
    pub csv_out: Option<PathBuf>,
    #[serde(default)]
    pub json_out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Aggregate over the suite at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub max_ratio: Option<Ratio>,
    pub mean_ratio: Option<Ratio>,
    pub rows: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub mode: VisibilityMode,
    pub seed: u64,
    pub oracle_cap: usize,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "parameter,value,max_ratio,mean_ratio,rows,skipped";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let fields = [
                self.parameter.to_string(),
                sig12(row.value),
                ratio_field(row.max_ratio),
                ratio_field(row.mean_ratio),
                row.rows.to_string(),
                row.skipped.to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Runs one policy family across a range of parameter values over a fixed
/// suite, reporting the worst and mean observed ratio per value — the
/// plot-ready view of the parameter trade-off.
pub fn sweep(config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    if config.oracle_cap == 0 {
        return Err(HarnessError::Config("oracle cap must be positive".into()));
    }
    if config.values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one parameter value".into()));
    }
    for &v in &config.values {
        if !v.is_finite() || v <= 1.0 || v > 4.0 {
            return Err(HarnessError::Config(format!(
                "sweep value {v} is outside the supported range (1, 4]"
            )));
        }
    }
    let mode = config.mode.unwrap_or(match config.parameter {
        SweepParameter::Alpha => VisibilityMode::FadeUnknownWithCommitOracle,
        SweepParameter::Beta => VisibilityMode::FadeKnown,
    });
    let policies = config
        .values
        .iter()
        .map(|&v| {
            let spec = match config.parameter {
                SweepParameter::Alpha => format!("semi-greedy:alpha={v}"),
                SweepParameter::Beta => format!("edf:beta={v}"),
            };
            prepare_policy(&PolicyEntry { policy: spec, mode })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let instances = load_instances(&config.instances, config.seed)?;

    let mut rows = Vec::with_capacity(config.values.len());
    for (value, prepared) in config.values.iter().zip(&policies) {
        let evaluated = instances
            .par_iter()
            .map(|(id, instance)| evaluate(id, instance, prepared, config.oracle_cap))
            .collect::<Result<Vec<_>, _>>()?;
        let mut reported = 0usize;
        let mut skipped = 0usize;
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for row in &evaluated {
            if row.skipped {
                skipped += 1;
            } else {
                reported += 1;
                let r = row.ratio.expect("non-skipped rows carry a ratio").0;
                sum += r;
                max = max.max(r);
            }
        }
        rows.push(SweepRow {
            value: *value,
            max_ratio: (reported > 0).then_some(Ratio(max)),
            mean_ratio: (reported > 0).then_some(Ratio(sum / reported as f64)),
            rows: reported,
            skipped,
        });
    }
    let report = SweepReport {
        parameter: config.parameter,
        mode,
        seed: config.seed,
        oracle_cap: config.oracle_cap,
        rows,
    };
    if let Some(path) = &config.csv_out {
        fs::write(path, report.to_csv())
            .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    }
    if let Some(path) = &config.json_out {
        fs::write(path, report.to_json()?)
            .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    }
    Ok(report)
}
