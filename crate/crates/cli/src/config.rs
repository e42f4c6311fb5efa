//! Experiment configuration: the TOML schema, defaults, command-line
//! overrides, and a validator that reports every violation at once
//! instead of stopping at the first.

use std::collections::BTreeSet;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spbench_core::bpr::BprConfig;
use spbench_core::data::{parse_timestamp, ColumnSpec};
use spbench_core::knn::KnnConfig;
use spbench_core::metrics::Metric;
use spbench_core::model::AlgoConfig;
use spbench_core::neumf::NeuMfConfig;
use spbench_core::rng::derive_seed;
use spbench_core::synth::SynthConfig;
use spbench_core::{Result, SpError};

/// When set, relative `[data].path` values resolve against this
/// directory instead of the working directory.
pub const DATA_DIR_ENV: &str = "SPBENCH_DATA_DIR";

/// A timestamp in the config file: either epoch seconds or a date
/// string (`YYYY-MM-DD`, interpreted at UTC midnight).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeValue {
    Epoch(i64),
    Text(String),
}

impl TimeValue {
    fn resolve(&self, field: &str, problems: &mut Vec<String>) -> Option<i64> {
        let text = match self {
            TimeValue::Epoch(t) => return Some(*t),
            TimeValue::Text(s) => s,
        };
        match parse_timestamp(text) {
            Ok(t) => Some(t),
            Err(msg) => {
                problems.push(format!("{field}: {msg}"));
                None
            }
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default)]
    pub user_col: usize,
    #[serde(default = "default_item_col")]
    pub item_col: usize,
    #[serde(default)]
    pub rating_col: Option<usize>,
    #[serde(default = "default_timestamp_col")]
    pub timestamp_col: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub rating_threshold: Option<u32>,
    #[serde(default)]
    pub sample_users: Option<usize>,
}

fn default_item_col() -> usize {
    1
}

fn default_timestamp_col() -> usize {
    2
}

fn default_delimiter() -> String {
    ",".to_string()
}

impl DataSection {
    /// The input path with the CI directory override applied:
    /// a relative path resolves against `SPBENCH_DATA_DIR` when set.
    pub fn resolved_path(&self) -> PathBuf {
        if self.path.is_relative() {
            if let Some(dir) = env::var_os(DATA_DIR_ENV) {
                return PathBuf::from(dir).join(&self.path);
            }
        }
        self.path.clone()
    }

    pub fn column_spec(&self) -> ColumnSpec {
        ColumnSpec {
            user_col: self.user_col,
            item_col: self.item_col,
            rating_col: self.rating_col,
            timestamp_col: self.timestamp_col,
            delimiter: self.delimiter.as_bytes().first().copied().unwrap_or(b','),
            has_header: self.has_header,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_split_mode")]
    pub mode: String,
    #[serde(default)]
    pub d0_end: Option<TimeValue>,
    #[serde(default)]
    pub d1_end: Option<TimeValue>,
    #[serde(default = "default_min_per_period")]
    pub min_per_period: usize,
    #[serde(default = "default_true")]
    pub include_pretrain: bool,
}

fn default_split_mode() -> String {
    "equal_counts".to_string()
}

fn default_min_per_period() -> usize {
    2
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            mode: default_split_mode(),
            d0_end: None,
            d1_end: None,
            min_per_period: default_min_per_period(),
            include_pretrain: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftSection {
    pub fraction: f64,
    /// Defaults to a seed derived from the master seed.
    pub seed: Option<u64>,
}

impl Default for ShiftSection {
    fn default() -> Self {
        ShiftSection {
            fraction: 0.5,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub metrics: Vec<String>,
    pub k: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            metrics: vec![
                "hit_ratio".to_string(),
                "ndcg".to_string(),
                "coverage".to_string(),
            ],
            k: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UknnSection {
    pub k_neighbors: usize,
}

impl Default for UknnSection {
    fn default() -> Self {
        UknnSection { k_neighbors: 50 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BprMfSection {
    pub d: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
}

impl Default for BprMfSection {
    fn default() -> Self {
        BprMfSection {
            d: 64,
            learning_rate: 0.01,
            l2_reg: 0.01,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuMfSection {
    pub d_g: usize,
    pub d_m: usize,
    pub hidden: Vec<usize>,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for NeuMfSection {
    fn default() -> Self {
        NeuMfSection {
            d_g: 16,
            d_m: 32,
            hidden: vec![64, 32, 16],
            negatives_per_positive: 4,
            learning_rate: 0.001,
            epochs: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub clusters: usize,
    pub cluster_affinity: f64,
    pub drift_strength: f64,
    pub five_star_share: f64,
    pub start_ts: i64,
    pub end_ts: i64,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthSection {
            users: d.users,
            items: d.items,
            interactions: d.interactions,
            clusters: d.clusters,
            cluster_affinity: d.cluster_affinity,
            drift_strength: d.drift_strength,
            five_star_share: d.five_star_share,
            start_ts: d.start_ts,
            end_ts: d.end_ts,
            seed: d.seed,
        }
    }
}

impl SynthSection {
    pub fn to_core(&self) -> SynthConfig {
        SynthConfig {
            users: self.users,
            items: self.items,
            interactions: self.interactions,
            clusters: self.clusters,
            cluster_affinity: self.cluster_affinity,
            drift_strength: self.drift_strength,
            five_star_share: self.five_star_share,
            start_ts: self.start_ts,
            end_ts: self.end_ts,
            seed: self.seed,
        }
    }
}

/// The raw file schema. Every field is optional or defaulted; unknown
/// keys are rejected so typos surface as config errors.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<u64>,
    algorithms: Option<Vec<String>>,
    data: Option<DataSection>,
    split: Option<SplitSection>,
    shift: Option<ShiftSection>,
    eval: Option<EvalSection>,
    output: Option<OutputSection>,
    uknn: Option<UknnSection>,
    bprmf: Option<BprMfSection>,
    neumf: Option<NeuMfSection>,
    synth: Option<SynthSection>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub shift_fraction: Option<f64>,
    pub no_pretrain: bool,
}

/// The fully resolved configuration: every default filled in, every
/// override applied. Serialized into the manifest verbatim so a run
/// can be reproduced from its artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub master_seed: u64,
    pub algorithms: Vec<String>,
    pub data: Option<DataSection>,
    pub split: SplitSection,
    pub shift: ShiftSection,
    pub eval: EvalSection,
    pub output: OutputSection,
    pub uknn: UknnSection,
    pub bprmf: BprMfSection,
    pub neumf: NeuMfSection,
    pub synth: Option<SynthSection>,
}

/// How the temporal periods are delimited, after resolving dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedSplitMode {
    ByBoundaries { d0_end: i64, d1_end: i64 },
    EqualCounts { d0_end: Option<i64> },
}

const ALGORITHM_NAMES: [&str; 3] = ["uknn", "bprmf", "neumf"];

impl ResolvedConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            SpError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| {
            SpError::Config(format!("cannot parse config {}: {e}", path.display()))
        })?;

        let mut resolved = ResolvedConfig {
            master_seed: raw.master_seed.unwrap_or(42),
            algorithms: raw.algorithms.unwrap_or_else(|| {
                ALGORITHM_NAMES.iter().map(|s| s.to_string()).collect()
            }),
            data: raw.data,
            split: raw.split.unwrap_or_default(),
            shift: raw.shift.unwrap_or_default(),
            eval: raw.eval.unwrap_or_default(),
            output: raw.output.unwrap_or_default(),
            uknn: raw.uknn.unwrap_or_default(),
            bprmf: raw.bprmf.unwrap_or_default(),
            neumf: raw.neumf.unwrap_or_default(),
            synth: raw.synth,
        };

        if let Some(seed) = overrides.master_seed {
            resolved.master_seed = seed;
        }
        if let Some(dir) = &overrides.out_dir {
            resolved.output.dir = dir.clone();
        }
        if let Some(fraction) = overrides.shift_fraction {
            resolved.shift.fraction = fraction;
        }
        if overrides.no_pretrain {
            resolved.split.include_pretrain = false;
        }
        // Pin the shift seed now so the manifest echo carries the
        // value actually used.
        if resolved.shift.seed.is_none() {
            resolved.shift.seed = Some(derive_seed(resolved.master_seed, "shift"));
        }
        Ok(resolved)
    }

    /// Checks every constraint and reports all violations together.
    /// `data_must_exist` is set by the stages that read the raw input.
    pub fn validate(&self, data_must_exist: bool) -> Result<()> {
        let mut problems = Vec::new();

        if self.algorithms.is_empty() {
            problems.push("algorithms: list must not be empty".to_string());
        }
        let mut seen_algos = BTreeSet::new();
        for name in &self.algorithms {
            if !ALGORITHM_NAMES.contains(&name.as_str()) {
                problems.push(format!(
                    "algorithms: unknown algorithm {name:?} (expected one of {ALGORITHM_NAMES:?})"
                ));
            }
            if !seen_algos.insert(name.as_str()) {
                problems.push(format!("algorithms: {name:?} listed twice"));
            }
        }

        if let Some(data) = &self.data {
            if data.delimiter.len() != 1 || !data.delimiter.is_ascii() {
                problems.push(format!(
                    "data.delimiter: must be a single ASCII character, got {:?}",
                    data.delimiter
                ));
            }
            if data.rating_threshold.is_some() && data.rating_col.is_none() {
                problems.push(
                    "data.rating_threshold: requires data.rating_col to be set".to_string(),
                );
            }
            if data.sample_users == Some(0) {
                problems.push("data.sample_users: must be at least 1".to_string());
            }
            if data_must_exist && !data.resolved_path().exists() {
                problems.push(format!(
                    "data.path: {} does not exist",
                    data.resolved_path().display()
                ));
            }
        } else if data_must_exist {
            problems.push("data: section is required for this command".to_string());
        }

        self.resolve_split_mode_into(&mut problems);
        if self.split.min_per_period < 2 {
            problems.push(
                "split.min_per_period: must be at least 2 (leave-one-out holds out one \
                 interaction per user)"
                    .to_string(),
            );
        }

        if !(0.0..=1.0).contains(&self.shift.fraction) {
            problems.push(format!(
                "shift.fraction: must be in [0, 1], got {}",
                self.shift.fraction
            ));
        }

        if self.eval.k == 0 {
            problems.push("eval.k: must be at least 1".to_string());
        }
        if self.eval.metrics.is_empty() {
            problems.push("eval.metrics: list must not be empty".to_string());
        }
        let mut seen_metrics = BTreeSet::new();
        for name in &self.eval.metrics {
            if Metric::from_name(name).is_err() {
                problems.push(format!("eval.metrics: unknown metric {name:?}"));
            }
            if !seen_metrics.insert(name.as_str()) {
                problems.push(format!("eval.metrics: {name:?} listed twice"));
            }
        }

        if self.uknn.k_neighbors == 0 {
            problems.push("uknn.k_neighbors: must be at least 1".to_string());
        }
        if self.bprmf.d == 0 {
            problems.push("bprmf.d: must be at least 1".to_string());
        }
        if !(self.bprmf.learning_rate > 0.0) {
            problems.push("bprmf.learning_rate: must be positive".to_string());
        }
        if !(self.bprmf.l2_reg >= 0.0) {
            problems.push("bprmf.l2_reg: must be non-negative".to_string());
        }
        if self.bprmf.epochs == 0 {
            problems.push("bprmf.epochs: must be at least 1".to_string());
        }
        if self.neumf.d_g == 0 {
            problems.push("neumf.d_g: must be at least 1".to_string());
        }
        if self.neumf.d_m == 0 {
            problems.push("neumf.d_m: must be at least 1".to_string());
        }
        if self.neumf.hidden.is_empty() {
            problems.push("neumf.hidden: must list at least one layer width".to_string());
        }
        for (l, &w) in self.neumf.hidden.iter().enumerate() {
            if w == 0 {
                problems.push(format!("neumf.hidden[{l}]: must be positive"));
            }
        }
        if self.neumf.negatives_per_positive == 0 {
            problems.push("neumf.negatives_per_positive: must be at least 1".to_string());
        }
        if !(self.neumf.learning_rate > 0.0) {
            problems.push("neumf.learning_rate: must be positive".to_string());
        }
        if self.neumf.epochs == 0 {
            problems.push("neumf.epochs: must be at least 1".to_string());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(SpError::Config(format!(
                "{} problem{}:\n  - {}",
                problems.len(),
                if problems.len() == 1 { "" } else { "s" },
                problems.join("\n  - ")
            )))
        }
    }

    fn resolve_split_mode_into(&self, problems: &mut Vec<String>) -> Option<ResolvedSplitMode> {
        let d0_end = self
            .split
            .d0_end
            .as_ref()
            .and_then(|v| v.resolve("split.d0_end", problems));
        let d1_end = self
            .split
            .d1_end
            .as_ref()
            .and_then(|v| v.resolve("split.d1_end", problems));
        match self.split.mode.as_str() {
            "by_boundaries" => {
                if self.split.d0_end.is_none() {
                    problems.push("split.d0_end: required in by_boundaries mode".to_string());
                }
                if self.split.d1_end.is_none() {
                    problems.push("split.d1_end: required in by_boundaries mode".to_string());
                }
                let (d0_end, d1_end) = (d0_end?, d1_end?);
                if d0_end >= d1_end {
                    problems.push(format!(
                        "split: d0_end ({d0_end}) must be earlier than d1_end ({d1_end})"
                    ));
                    return None;
                }
                Some(ResolvedSplitMode::ByBoundaries { d0_end, d1_end })
            }
            "equal_counts" => {
                if self.split.d1_end.is_some() {
                    problems.push(
                        "split.d1_end: only meaningful in by_boundaries mode".to_string(),
                    );
                    return None;
                }
                Some(ResolvedSplitMode::EqualCounts { d0_end })
            }
            other => {
                problems.push(format!(
                    "split.mode: expected \"by_boundaries\" or \"equal_counts\", got {other:?}"
                ));
                None
            }
        }
    }

    /// The split mode with dates resolved. Call only after
    /// [`ResolvedConfig::validate`] has passed.
    pub fn split_mode(&self) -> ResolvedSplitMode {
        let mut problems = Vec::new();
        self.resolve_split_mode_into(&mut problems)
            .expect("validated config resolves its split mode")
    }

    pub fn shift_seed(&self) -> u64 {
        self.shift.seed.expect("shift seed pinned at load time")
    }

    /// Algorithm configs in the order listed, seeds left at zero; the
    /// experiment derives per-fit seeds from the master seed.
    pub fn algo_configs(&self) -> Vec<AlgoConfig> {
        self.algorithms
            .iter()
            .map(|name| match name.as_str() {
                "uknn" => AlgoConfig::Uknn(KnnConfig {
                    k_neighbors: self.uknn.k_neighbors,
                }),
                "bprmf" => AlgoConfig::BprMf(BprConfig {
                    d: self.bprmf.d,
                    learning_rate: self.bprmf.learning_rate,
                    l2_reg: self.bprmf.l2_reg,
                    epochs: self.bprmf.epochs,
                    seed: 0,
                }),
                "neumf" => AlgoConfig::NeuMf(NeuMfConfig {
                    d_g: self.neumf.d_g,
                    d_m: self.neumf.d_m,
                    hidden: self.neumf.hidden.clone(),
                    negatives_per_positive: self.neumf.negatives_per_positive,
                    learning_rate: self.neumf.learning_rate,
                    epochs: self.neumf.epochs,
                    seed: 0,
                }),
                other => unreachable!("algorithm {other:?} passed validation"),
            })
            .collect()
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        self.eval
            .metrics
            .iter()
            .map(|name| Metric::from_name(name))
            .collect()
    }
}
