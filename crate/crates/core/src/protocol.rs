//! The retraining experiment: fit a legacy model M1 on the pre-shift
//! training data and a retrained model M2 on everything, evaluate
//! both on both holdouts, and derive the two measures from the four
//! scores:
//!
//!   stability  = 1 - (s11 - s21)   (unclipped; > 1 is meaningful)
//!   plasticity = s22 - s12
//!
//! where sij is model Mi's score on holdout j. Also the report
//! writer: one JSON report plus CSV and text renderings of it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpError};
use crate::metrics::{evaluate_model, EvalOutcome, Metric};
use crate::model::{build_candidate_catalog, fit, AlgoConfig, TrainedModel};
use crate::rng::fit_seed;
use crate::split::ExperimentSplits;

/// The four evaluation scores of one (algorithm, metric) cell:
/// models M1/M2 crossed with holdouts D1/D2.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreQuad {
    pub metric: String,
    pub k: usize,
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl ScoreQuad {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s11", self.s11),
            ("s12", self.s12),
            ("s21", self.s21),
            ("s22", self.s22),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SpError::Data(format!(
                    "{} score {name} = {v} is outside [0, 1]",
                    self.metric
                )));
            }
        }
        Ok(())
    }
}

/// How much of its old performance the retrained model keeps. 1 means
/// no interference; values above 1 (retraining helped on old data)
/// are reported as-is, never clipped.
pub fn stability(quad: &ScoreQuad) -> f64 {
    1.0 - (quad.s11 - quad.s21)
}

/// How much the retrained model gains on the new data over the legacy
/// model.
pub fn plasticity(quad: &ScoreQuad) -> f64 {
    quad.s22 - quad.s12
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub algorithm: String,
    pub quad: ScoreQuad,
    pub stability: f64,
    pub plasticity: f64,
}

/// A qualitative expectation checked against the computed rows;
/// informational, never a failure.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DirectionCheck {
    pub comparison: String,
    pub metric: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgoFailure {
    pub algorithm: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgorithmManifest {
    pub algorithm: String,
    pub hyperparameters: serde_json::Value,
    pub fit_seed_m1: u64,
    pub fit_seed_m2: u64,
}

/// Facts about the data the experiment ran on, supplied by whoever
/// prepared it. Everything is content-derived; no paths and no
/// timestamps, so reports stay byte-identical across reruns and
/// output directories.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct UpstreamInfo {
    pub dataset_fingerprint: String,
    pub shift: serde_json::Value,
    pub split: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub k: usize,
    pub metrics: Vec<String>,
    pub dataset_fingerprint: String,
    pub shift: serde_json::Value,
    pub split: serde_json::Value,
    pub algorithms: Vec<AlgorithmManifest>,
}

/// The complete experiment result. `schema` versions the JSON layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpReport {
    pub schema: u32,
    pub manifest: ReportManifest,
    pub rows: Vec<ReportRow>,
    pub direction_checks: Vec<DirectionCheck>,
    pub failures: Vec<AlgoFailure>,
}

pub const REPORT_SCHEMA: u32 = 1;

/// Everything a run produces beyond the report: both fitted models
/// and the four per-user evaluation outcomes, per algorithm.
pub struct AlgoArtifacts {
    pub algorithm_id: String,
    pub model_m1: TrainedModel,
    pub model_m2: TrainedModel,
    pub eval_m1_d1: EvalOutcome,
    pub eval_m1_d2: EvalOutcome,
    pub eval_m2_d1: EvalOutcome,
    pub eval_m2_d2: EvalOutcome,
}

pub struct ExperimentOutput {
    pub report: SpReport,
    pub artifacts: Vec<AlgoArtifacts>,
}

fn hyperparameters_json(config: &AlgoConfig) -> serde_json::Value {
    match config {
        AlgoConfig::Uknn(c) => serde_json::json!({
            "k_neighbors": c.k_neighbors,
        }),
        AlgoConfig::BprMf(c) => serde_json::json!({
            "d": c.d,
            "learning_rate": c.learning_rate,
            "l2_reg": c.l2_reg,
            "epochs": c.epochs,
        }),
        AlgoConfig::NeuMf(c) => serde_json::json!({
            "d_g": c.d_g,
            "d_m": c.d_m,
            "hidden": c.hidden,
            "negatives_per_positive": c.negatives_per_positive,
            "learning_rate": c.learning_rate,
            "epochs": c.epochs,
        }),
    }
}

fn run_one_algorithm(
    splits: &ExperimentSplits,
    config: &AlgoConfig,
    metrics: &[Metric],
    k: usize,
    seed_m1: u64,
    seed_m2: u64,
    catalog: &[u32],
) -> Result<AlgoArtifacts> {
    let model_m1 = fit(&splits.m1_train, config, seed_m1)?;
    let model_m2 = fit(&splits.m2_train, config, seed_m2)?;
    let eval_m1_d1 = evaluate_model(&model_m1, &splits.d1_test, catalog, metrics, k)?;
    let eval_m1_d2 = evaluate_model(&model_m1, &splits.d2_test, catalog, metrics, k)?;
    let eval_m2_d1 = evaluate_model(&model_m2, &splits.d1_test, catalog, metrics, k)?;
    let eval_m2_d2 = evaluate_model(&model_m2, &splits.d2_test, catalog, metrics, k)?;
    Ok(AlgoArtifacts {
        algorithm_id: config.algorithm_id().to_string(),
        model_m1,
        model_m2,
        eval_m1_d1,
        eval_m1_d2,
        eval_m2_d1,
        eval_m2_d2,
    })
}

fn direction_checks(rows: &[ReportRow]) -> Vec<DirectionCheck> {
    let plasticity_of = |algorithm: &str| -> Option<f64> {
        rows.iter()
            .find(|r| r.algorithm == algorithm && r.quad.metric == Metric::HitRatio.name())
            .map(|r| r.plasticity)
    };
    let mut checks = Vec::new();
    if let Some(baseline) = plasticity_of("uknn") {
        for challenger in ["bprmf", "neumf"] {
            if let Some(lhs) = plasticity_of(challenger) {
                checks.push(DirectionCheck {
                    comparison: format!("plasticity({challenger}) > plasticity(uknn)"),
                    metric: Metric::HitRatio.name().to_string(),
                    lhs,
                    rhs: baseline,
                    holds: lhs > baseline,
                });
            }
        }
    }
    checks
}

/// Runs the whole experiment: two fits and four evaluations per
/// algorithm over the shared candidate catalog, one report row per
/// (algorithm, metric). A failure in one algorithm is recorded in the
/// report and the remaining algorithms still run. Fit seeds derive
/// from the master seed, the algorithm, and the training set content,
/// so identical training sets train identically and different ones
/// get independent seeds.
pub fn run_experiment_full(
    splits: &ExperimentSplits,
    algorithms: &[AlgoConfig],
    metrics: &[Metric],
    k: usize,
    master_seed: u64,
    upstream: &UpstreamInfo,
) -> Result<ExperimentOutput> {
    if algorithms.is_empty() {
        return Err(SpError::Config("no algorithms configured".into()));
    }
    {
        let mut ids: Vec<&str> = algorithms.iter().map(|c| c.algorithm_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != algorithms.len() {
            return Err(SpError::Config(
                "each algorithm may be configured at most once".into(),
            ));
        }
    }
    if k == 0 {
        return Err(SpError::Config("list length k must be at least 1".into()));
    }

    let catalog = build_candidate_catalog(splits);
    let mut manifest = ReportManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed,
        k,
        metrics: metrics.iter().map(|m| m.name().to_string()).collect(),
        dataset_fingerprint: upstream.dataset_fingerprint.clone(),
        shift: upstream.shift.clone(),
        split: upstream.split.clone(),
        algorithms: Vec::new(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = Vec::new();
    for config in algorithms {
        let id = config.algorithm_id();
        let seed_m1 = fit_seed(master_seed, id, &splits.m1_train);
        let seed_m2 = fit_seed(master_seed, id, &splits.m2_train);
        manifest.algorithms.push(AlgorithmManifest {
            algorithm: id.to_string(),
            hyperparameters: hyperparameters_json(config),
            fit_seed_m1: seed_m1,
            fit_seed_m2: seed_m2,
        });
        match run_one_algorithm(splits, config, metrics, k, seed_m1, seed_m2, &catalog) {
            Ok(art) => {
                for &metric in metrics {
                    let name = metric.name();
                    let quad = ScoreQuad {
                        metric: name.to_string(),
                        k,
                        s11: art.eval_m1_d1.aggregate[name],
                        s12: art.eval_m1_d2.aggregate[name],
                        s21: art.eval_m2_d1.aggregate[name],
                        s22: art.eval_m2_d2.aggregate[name],
                    };
                    quad.validate()?;
                    rows.push(ReportRow {
                        algorithm: id.to_string(),
                        stability: stability(&quad),
                        plasticity: plasticity(&quad),
                        quad,
                    });
                }
                artifacts.push(art);
            }
            Err(err) => failures.push(AlgoFailure {
                algorithm: id.to_string(),
                message: err.to_string(),
            }),
        }
    }

    let direction_checks = direction_checks(&rows);
    Ok(ExperimentOutput {
        report: SpReport {
            schema: REPORT_SCHEMA,
            manifest,
            rows,
            direction_checks,
            failures,
        },
        artifacts,
    })
}

/// [`run_experiment_full`] without the artifacts, when only the
/// report matters.
pub fn run_experiment(
    splits: &ExperimentSplits,
    algorithms: &[AlgoConfig],
    metrics: &[Metric],
    k: usize,
    master_seed: u64,
    upstream: &UpstreamInfo,
) -> Result<SpReport> {
    run_experiment_full(splits, algorithms, metrics, k, master_seed, upstream)
        .map(|output| output.report)
}

pub const TABLE_CSV_HEADER: &str = "algorithm,metric,k,S11,S12,S21,S22,stability,plasticity";

/// Renders the measure table. One data row per (algorithm, metric),
/// in report order.
pub fn render_table_csv(report: &SpReport) -> String {
    let mut out = String::from(TABLE_CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.algorithm,
            row.quad.metric,
            row.quad.k,
            row.quad.s11,
            row.quad.s12,
            row.quad.s21,
            row.quad.s22,
            row.stability,
            row.plasticity,
        ));
    }
    out
}

/// Renders one algorithm's model-by-holdout score grid in long form,
/// one row per (metric, model, holdout).
pub fn render_heatmap_csv(report: &SpReport, algorithm: &str) -> String {
    let mut out = String::from("metric,model,holdout,score\n");
    for row in report.rows.iter().filter(|r| r.algorithm == algorithm) {
        let m = &row.quad.metric;
        out.push_str(&format!("{m},m1,d1_test,{}\n", row.quad.s11));
        out.push_str(&format!("{m},m1,d2_test,{}\n", row.quad.s12));
        out.push_str(&format!("{m},m2,d1_test,{}\n", row.quad.s21));
        out.push_str(&format!("{m},m2,d2_test,{}\n", row.quad.s22));
    }
    out
}

/// Renders the human-readable summary table.
pub fn render_summary_text(report: &SpReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "stability/plasticity report (tool {}, master seed {})\n\n",
        report.manifest.tool_version, report.manifest.master_seed
    ));
    out.push_str(&format!(
        "{:<10} {:<10} {:>4} {:>9} {:>9} {:>9} {:>9} {:>10} {:>11}\n",
        "algorithm", "metric", "k", "S11", "S12", "S21", "S22", "stability", "plasticity"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<10} {:<10} {:>4} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>10.6} {:>11.6}\n",
            row.algorithm,
            row.quad.metric,
            row.quad.k,
            row.quad.s11,
            row.quad.s12,
            row.quad.s21,
            row.quad.s22,
            row.stability,
            row.plasticity,
        ));
    }
    if !report.direction_checks.is_empty() {
        out.push('\n');
        for check in &report.direction_checks {
            out.push_str(&format!(
                "direction: {} [{}]: {} vs {} -> {}\n",
                check.comparison,
                check.metric,
                check.lhs,
                check.rhs,
                if check.holds { "holds" } else { "does not hold" }
            ));
        }
    }
    if !report.failures.is_empty() {
        out.push('\n');
        for failure in &report.failures {
            out.push_str(&format!("FAILED {}: {}\n", failure.algorithm, failure.message));
        }
    }
    out
}

pub fn report_json(report: &SpReport) -> String {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    json
}

/// Writes the four report files into `out_dir`: report.json,
/// table.csv, one heatmap_<algorithm>.csv per algorithm with rows,
/// and summary.txt. Deterministic content; rewriting the same report
/// reproduces the same bytes.
pub fn write_report(report: &SpReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| SpError::io(out_dir.display().to_string(), e))?;
    let write = |name: &str, content: &str| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|e| SpError::io(path.display().to_string(), e))
    };
    write("report.json", &report_json(report))?;
    write("table.csv", &render_table_csv(report))?;
    let mut algorithms: Vec<&str> = report.rows.iter().map(|r| r.algorithm.as_str()).collect();
    algorithms.dedup();
    for algorithm in algorithms {
        write(
            &format!("heatmap_{algorithm}.csv"),
            &render_heatmap_csv(report, algorithm),
        )?;
    }
    write("summary.txt", &render_summary_text(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpr::BprConfig;
    use crate::data::{Interaction, InteractionLog};
    use crate::knn::KnnConfig;
    use crate::neumf::NeuMfConfig;

    fn quad(s11: f64, s12: f64, s21: f64, s22: f64) -> ScoreQuad {
        ScoreQuad {
            metric: "hit_ratio".into(),
            k: 10,
            s11,
            s12,
            s21,
            s22,
        }
    }

    #[test]
    fn stability_is_one_minus_the_retention_drop() {
        assert_eq!(stability(&quad(0.6, 0.0, 0.4, 0.0)), 0.8);
        assert_eq!(stability(&quad(0.5, 0.0, 0.5, 0.0)), 1.0);
        // a retrained model that improved on the old holdout pushes
        // the measure above 1, mirroring published neighborhood-model
        // behavior; no clipping
        let improved = stability(&quad(0.2, 0.0, 0.238, 0.0));
        assert!((improved - 1.038).abs() < 1e-12);
        assert!(improved > 1.0);
    }

    #[test]
    fn plasticity_is_the_gain_on_the_new_holdout() {
        assert_eq!(plasticity(&quad(0.0, 0.3, 0.0, 0.3)), 0.0);
        assert_eq!(plasticity(&quad(0.0, 0.0, 0.0, 0.3)), 0.3);
        assert_eq!(plasticity(&quad(0.0, 0.0, 0.0, 0.283)), 0.283);
    }

    #[test]
    fn formulas_hold_to_full_precision_on_random_quads() {
        let mut rng = crate::rng::seeded_rng(4242);
        use rand::Rng;
        for _ in 0..1000 {
            let q = quad(rng.random(), rng.random(), rng.random(), rng.random());
            let s = stability(&q);
            let p = plasticity(&q);
            assert_eq!(s, 1.0 - (q.s11 - q.s21));
            assert_eq!(p, q.s22 - q.s12);
            assert!((0.0..=2.0).contains(&s));
            assert!((-1.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn out_of_range_scores_fail_validation() {
        assert!(quad(0.0, 0.5, 1.0, 0.3).validate().is_ok());
        assert!(quad(1.2, 0.5, 1.0, 0.3).validate().is_err());
        assert!(quad(0.0, -0.1, 1.0, 0.3).validate().is_err());
    }

    fn log(rows: &[(u32, u32, i64)]) -> InteractionLog {
        InteractionLog::from_unsorted(
            rows.iter()
                .map(|&(u, i, t)| Interaction::new(u, i, t))
                .collect(),
        )
    }

    /// Four users everywhere, six old items, two items (6, 7) that
    /// only occur in the second period.
    fn tiny_splits() -> ExperimentSplits {
        let d0 = log(&[
            (0, 0, 0),
            (1, 1, 1),
            (2, 2, 2),
            (3, 3, 3),
        ]);
        let d1_train = log(&[
            (0, 1, 10),
            (0, 2, 11),
            (1, 0, 12),
            (1, 2, 13),
            (2, 0, 14),
            (2, 3, 15),
            (3, 1, 16),
            (3, 4, 17),
        ]);
        let d1_test = log(&[(0, 3, 20), (1, 4, 21), (2, 5, 22), (3, 0, 23)]);
        let d2_train = log(&[
            (0, 6, 30),
            (1, 6, 31),
            (2, 7, 32),
            (3, 7, 33),
        ]);
        let d2_test = log(&[(0, 7, 40), (1, 7, 41), (2, 6, 42), (3, 6, 43)]);
        let m1_train = InteractionLog::concat(&[&d0, &d1_train]);
        let m2_train = InteractionLog::concat(&[&d0, &d1_train, &d2_train]);
        ExperimentSplits {
            d1_train,
            d1_test,
            d2_train,
            d2_test,
            m1_train,
            m2_train,
        }
    }

    fn tiny_algos() -> Vec<AlgoConfig> {
        vec![
            AlgoConfig::Uknn(KnnConfig { k_neighbors: 3 }),
            AlgoConfig::BprMf(BprConfig {
                d: 4,
                epochs: 4,
                ..BprConfig::default()
            }),
            AlgoConfig::NeuMf(NeuMfConfig {
                d_g: 3,
                d_m: 3,
                hidden: vec![4],
                negatives_per_positive: 1,
                learning_rate: 0.05,
                epochs: 3,
                ..NeuMfConfig::default()
            }),
        ]
    }

    #[test]
    fn one_algorithm_one_metric_yields_one_row() {
        let splits = tiny_splits();
        let report = run_experiment(
            &splits,
            &[AlgoConfig::Uknn(KnnConfig { k_neighbors: 3 })],
            &[Metric::HitRatio],
            3,
            7,
            &UpstreamInfo::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].algorithm, "uknn");
        assert_eq!(report.rows[0].quad.metric, "hit_ratio");
        assert!(report.failures.is_empty());
    }

    #[test]
    fn three_algorithms_yield_one_row_each_per_metric() {
        let report = run_experiment(
            &tiny_splits(),
            &tiny_algos(),
            &[Metric::HitRatio, Metric::Ndcg],
            3,
            7,
            &UpstreamInfo::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.manifest.algorithms.len(), 3);
        assert!(report.failures.is_empty());
        // two latent models vs the baseline on hit_ratio
        assert_eq!(report.direction_checks.len(), 2);
    }

    #[test]
    fn empty_d2_train_forces_stability_one_and_plasticity_zero() {
        let base = tiny_splits();
        let d2_test = log(&[(0, 3, 40), (1, 4, 41), (2, 5, 42), (3, 0, 43)]);
        let splits = ExperimentSplits {
            d2_train: InteractionLog::default(),
            m2_train: base.m1_train.clone(),
            d2_test,
            ..base
        };
        let report = run_experiment(
            &splits,
            &tiny_algos(),
            &Metric::ALL.to_vec(),
            3,
            99,
            &UpstreamInfo::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 9);
        for row in &report.rows {
            assert_eq!(row.quad.s11, row.quad.s21, "{}", row.algorithm);
            assert_eq!(row.quad.s12, row.quad.s22, "{}", row.algorithm);
            assert_eq!(row.stability, 1.0, "{}", row.algorithm);
            assert_eq!(row.plasticity, 0.0, "{}", row.algorithm);
        }
    }

    #[test]
    fn fully_shifted_d2_truths_cannot_be_ranked_by_the_legacy_model() {
        // items 6 and 7 exist only in d2; the legacy model has never
        // seen them, so as long as every user has at least k known
        // candidates they never enter its lists and s12 stays 0 for
        // the accuracy metrics
        let report = run_experiment(
            &tiny_splits(),
            &tiny_algos(),
            &[Metric::HitRatio, Metric::Ndcg],
            3,
            7,
            &UpstreamInfo::default(),
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.quad.s12, 0.0, "{} {}", row.algorithm, row.quad.metric);
            assert_eq!(
                row.plasticity, row.quad.s22,
                "{} {}",
                row.algorithm, row.quad.metric
            );
        }
    }

    #[test]
    fn one_failing_algorithm_does_not_take_down_the_others() {
        let algorithms = vec![
            AlgoConfig::BprMf(BprConfig {
                epochs: 0, // rejected by config validation
                ..BprConfig::default()
            }),
            AlgoConfig::Uknn(KnnConfig { k_neighbors: 3 }),
        ];
        let report = run_experiment(
            &tiny_splits(),
            &algorithms,
            &[Metric::HitRatio],
            3,
            7,
            &UpstreamInfo::default(),
        )
        .unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].algorithm, "bprmf");
        assert!(report.failures[0].message.contains("epochs"));
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].algorithm, "uknn");
    }

    #[test]
    fn duplicate_algorithms_and_zero_k_are_rejected() {
        let splits = tiny_splits();
        let dup = vec![
            AlgoConfig::Uknn(KnnConfig::default()),
            AlgoConfig::Uknn(KnnConfig { k_neighbors: 2 }),
        ];
        assert!(matches!(
            run_experiment(&splits, &dup, &[Metric::HitRatio], 3, 7, &UpstreamInfo::default()),
            Err(SpError::Config(_))
        ));
        let one = vec![AlgoConfig::Uknn(KnnConfig::default())];
        assert!(matches!(
            run_experiment(&splits, &one, &[Metric::HitRatio], 0, 7, &UpstreamInfo::default()),
            Err(SpError::Config(_))
        ));
        assert!(matches!(
            run_experiment(&splits, &[], &[Metric::HitRatio], 3, 7, &UpstreamInfo::default()),
            Err(SpError::Config(_))
        ));
    }

    #[test]
    fn reruns_are_identical_and_json_recomputes_exactly() {
        let splits = tiny_splits();
        let algos = tiny_algos();
        let a = run_experiment(&splits, &algos, &Metric::ALL, 3, 5, &UpstreamInfo::default())
            .unwrap();
        let b = run_experiment(&splits, &algos, &Metric::ALL, 3, 5, &UpstreamInfo::default())
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(report_json(&a), report_json(&b));

        let parsed: SpReport = serde_json::from_str(&report_json(&a)).unwrap();
        assert_eq!(parsed, a);
        for row in &parsed.rows {
            assert_eq!(row.stability, stability(&row.quad));
            assert_eq!(row.plasticity, plasticity(&row.quad));
            row.quad.validate().unwrap();
        }
    }

    #[test]
    fn written_files_have_the_documented_shape() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(
            &tiny_splits(),
            &tiny_algos(),
            &[Metric::HitRatio],
            3,
            5,
            &UpstreamInfo::default(),
        )
        .unwrap();
        write_report(&report, dir.path()).unwrap();

        let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
        let mut lines = table.lines();
        assert_eq!(lines.next().unwrap(), TABLE_CSV_HEADER);
        assert_eq!(lines.count(), 3);

        for algorithm in ["uknn", "bprmf", "neumf"] {
            let heatmap = std::fs::read_to_string(
                dir.path().join(format!("heatmap_{algorithm}.csv")),
            )
            .unwrap();
            let mut lines = heatmap.lines();
            assert_eq!(lines.next().unwrap(), "metric,model,holdout,score");
            assert_eq!(lines.count(), 4);
        }
        assert!(dir.path().join("summary.txt").exists());

        let first = std::fs::read(dir.path().join("report.json")).unwrap();
        write_report(&report, dir.path()).unwrap();
        let second = std::fs::read(dir.path().join("report.json")).unwrap();
        assert_eq!(first, second);
    }
}
