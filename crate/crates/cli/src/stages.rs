//! The pipeline stages behind the subcommands. Each stage reads the
//! canonical artifacts of its predecessors, writes its own, and
//! records a fragment in `manifest.json`. Later stages recompute the
//! pure upstream transforms (temporal partition, activity filter)
//! from the canonical dataset instead of trusting derived files, so
//! running stages separately and running `all` produce identical
//! artifacts.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use spbench_core::data::{reindex_ids_with, sample_users, InteractionLog};
use spbench_core::io::{
    read_id_map, read_interactions, read_relabel_map, write_id_map, write_interactions,
    write_relabel_map,
};
use spbench_core::metrics::EvalOutcome;
use spbench_core::model::{save_model, TrainedModel};
use spbench_core::protocol::{run_experiment_full, write_report, UpstreamInfo};
use spbench_core::rng::fingerprint_log;
use spbench_core::shift::{apply_relabel, build_relabel_map, ShiftConfig};
use spbench_core::split::{
    assemble_training_sets, leave_one_out, split_temporal, ExperimentSplits, SplitMode,
    TemporalSplit,
};
use spbench_core::synth::write_synth_csv;
use spbench_core::{Result, SpError};

use crate::config::{ResolvedConfig, ResolvedSplitMode};

/// File layout inside the output directory.
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: &Path) -> Self {
        Workspace {
            dir: dir.to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.csv")
    }

    pub fn users_map(&self) -> PathBuf {
        self.dir.join("users.map.csv")
    }

    pub fn items_map(&self) -> PathBuf {
        self.dir.join("items.map.csv")
    }

    pub fn relabel_map(&self) -> PathBuf {
        self.dir.join("relabel_map.csv")
    }

    pub fn period_file(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.csv"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    pub fn ranks(&self, algorithm: &str, model: &str, holdout: &str) -> PathBuf {
        self.dir.join(format!("ranks_{algorithm}_{model}_{holdout}.csv"))
    }

    pub fn losses(&self, algorithm: &str, model: &str) -> PathBuf {
        self.dir.join(format!("loss_{algorithm}_{model}.csv"))
    }

    pub fn model_file(&self, algorithm: &str, model: &str) -> PathBuf {
        self.dir.join("models").join(format!("{algorithm}_{model}.bin"))
    }

    fn ensure_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| SpError::io(self.dir.display().to_string(), e))
    }
}

const PERIOD_FILES: [&str; 5] = ["d0", "d1_train", "d1_test", "d2_train", "d2_test"];

/// Errors for a later stage invoked before its prerequisite ran,
/// naming the stage to run first.
fn require_artifact(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(SpError::Data(format!(
            "missing artifact {}; run the '{stage}' stage first (`spbench {stage}`)",
            path.display()
        )))
    }
}

fn read_manifest(ws: &Workspace) -> Result<Value> {
    let path = ws.manifest();
    if !path.exists() {
        return Ok(json!({}));
    }
    let text =
        fs::read_to_string(&path).map_err(|e| SpError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| {
        SpError::Data(format!("manifest {} is not valid JSON: {e}", path.display()))
    })
}

/// Read-modify-write of `manifest.json`: refreshes the resolved
/// config echo and replaces this stage's fragment. Object keys
/// serialize sorted, so equal content gives equal bytes.
fn update_manifest(ws: &Workspace, cfg: &ResolvedConfig, stage: &str, fragment: Value) -> Result<()> {
    let mut manifest = read_manifest(ws)?;
    if !manifest.is_object() {
        manifest = json!({});
    }
    let map = manifest.as_object_mut().expect("manifest is an object");
    map.insert(
        "config".to_string(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    let stages = map
        .entry("stages".to_string())
        .or_insert_with(|| json!({}));
    if !stages.is_object() {
        *stages = json!({});
    }
    stages
        .as_object_mut()
        .expect("stages is an object")
        .insert(stage.to_string(), fragment);

    let path = ws.manifest();
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| SpError::io(path.display().to_string(), e))
}

fn stage_fragment<'a>(manifest: &'a Value, stage: &str) -> Result<&'a Value> {
    manifest.get("stages").and_then(|s| s.get(stage)).ok_or_else(|| {
        SpError::Data(format!(
            "manifest has no record of the '{stage}' stage; run `spbench {stage}` first"
        ))
    })
}

/// Generates the bundled synthetic dataset at the configured data
/// path, so the full pipeline runs without any external data.
pub fn stage_synth(cfg: &ResolvedConfig) -> Result<()> {
    cfg.validate(false)?;
    let synth = cfg.synth.as_ref().ok_or_else(|| {
        SpError::Config("synth requires a [synth] section in the config".to_string())
    })?;
    let data = cfg.data.as_ref().ok_or_else(|| {
        SpError::Config("synth requires [data].path as the destination".to_string())
    })?;
    let path = data.resolved_path();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| SpError::io(parent.display().to_string(), e))?;
        }
    }
    write_synth_csv(&synth.to_core(), &path)?;
    log::info!("synth: wrote {}", path.display());
    Ok(())
}

/// Parses the raw input, applies the rating threshold and the user
/// sample, and writes the canonical densely indexed dataset plus the
/// id-map sidecars.
pub fn stage_prepare(cfg: &ResolvedConfig) -> Result<()> {
    cfg.validate(true)?;
    let data = cfg.data.as_ref().expect("validated");
    let ws = Workspace::new(&cfg.output.dir);
    ws.ensure_dir()?;

    let path = data.resolved_path();
    let file = fs::File::open(&path).map_err(|e| SpError::io(path.display().to_string(), e))?;
    let label = path.display().to_string();
    let (log, id_map) = spbench_core::data::parse_interactions(
        BufReader::new(file),
        &data.column_spec(),
        data.rating_threshold,
        &label,
    )?;

    let (log, id_map) = match data.sample_users {
        Some(n) => {
            let sampled = sample_users(&log, n, cfg.master_seed)?;
            // Reindex so the canonical dataset is dense again and the
            // sidecar maps cover exactly the sampled population.
            reindex_ids_with(&sampled, &id_map)?
        }
        None => (log, id_map),
    };

    write_interactions(&ws.dataset(), &log)?;
    write_id_map(&ws.users_map(), &ws.items_map(), &id_map)?;
    update_manifest(
        &ws,
        cfg,
        "prepare",
        json!({
            "dataset_fingerprint": fingerprint_log(&log),
            "users": id_map.user_count(),
            "items": id_map.item_count(),
            "interactions": log.len(),
            "sample_users": data.sample_users,
            "rating_threshold": data.rating_threshold,
        }),
    )?;
    log::info!(
        "prepare: {} interactions, {} users, {} items",
        log.len(),
        id_map.user_count(),
        id_map.item_count()
    );
    Ok(())
}

/// The temporal partition plus the per-period activity filter, shared
/// by the shift and split stages. Splits first and filters second
/// (matching how period subsets are defined before users are judged
/// against them), counting per period by actual membership so
/// equal-count splits behave exactly even with tied timestamps at the
/// boundary. Users need `min_per_period` interactions in both
/// leave-one-out periods; the pre-training period does not gate
/// participation, but a removed user's pre-training rows go too.
fn partitioned_and_filtered(cfg: &ResolvedConfig, log: &InteractionLog) -> Result<TemporalSplit> {
    let mode = match cfg.split_mode() {
        ResolvedSplitMode::ByBoundaries { d0_end, d1_end } => {
            SplitMode::ByBoundaries { d0_end, d1_end }
        }
        ResolvedSplitMode::EqualCounts { d0_end } => SplitMode::EqualCounts { d0_end },
    };
    let split = split_temporal(log, mode)?;

    let min = cfg.split.min_per_period;
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for it in &split.d1 {
        counts.entry(it.user).or_default().0 += 1;
    }
    for it in &split.d2 {
        counts.entry(it.user).or_default().1 += 1;
    }
    let keep: HashSet<u32> = counts
        .into_iter()
        .filter(|&(_, (in_d1, in_d2))| in_d1 >= min && in_d2 >= min)
        .map(|(user, _)| user)
        .collect();
    if keep.is_empty() {
        return Err(SpError::EmptyResult(format!(
            "no user has at least {min} interactions in both evaluation periods"
        )));
    }
    Ok(TemporalSplit {
        d0: split.d0.filter_users(&keep),
        d1: split.d1.filter_users(&keep),
        d2: split.d2.filter_users(&keep),
        boundaries: split.boundaries,
    })
}

/// Builds the item relabel map over the post-filter newest period and
/// registers the fresh item keys in the sidecar map.
pub fn stage_shift(cfg: &ResolvedConfig) -> Result<()> {
    cfg.validate(false)?;
    let ws = Workspace::new(&cfg.output.dir);
    require_artifact(&ws.dataset(), "prepare")?;
    let log = read_interactions(&ws.dataset())?;
    let mut id_map = read_id_map(&ws.users_map(), &ws.items_map())?;

    let split = partitioned_and_filtered(cfg, &log)?;
    let d2_items = split.d2.distinct_items().into_iter().collect();
    let shift_config = ShiftConfig {
        fraction: cfg.shift.fraction,
        seed: cfg.shift_seed(),
    };
    let map = build_relabel_map(&d2_items, &shift_config, &mut id_map)?;

    write_relabel_map(&ws.relabel_map(), &map)?;
    write_id_map(&ws.users_map(), &ws.items_map(), &id_map)?;
    update_manifest(
        &ws,
        cfg,
        "shift",
        json!({
            "fraction": shift_config.fraction,
            "seed": shift_config.seed,
            "boundaries": [split.boundaries.0, split.boundaries.1],
            "d2_distinct_items": d2_items.len(),
            "relabeled_items": map.len(),
            "fresh_range": map.fresh_range(),
        }),
    )?;
    log::info!(
        "shift: relabeled {} of {} items in the newest period",
        map.len(),
        d2_items.len()
    );
    Ok(())
}

/// Recomputes the filtered partition, applies the persisted relabel
/// map to the newest period, takes the leave-one-out holdouts, and
/// writes the five canonical period files.
pub fn stage_split(cfg: &ResolvedConfig) -> Result<()> {
    cfg.validate(false)?;
    let ws = Workspace::new(&cfg.output.dir);
    require_artifact(&ws.dataset(), "prepare")?;
    require_artifact(&ws.relabel_map(), "shift")?;
    let log = read_interactions(&ws.dataset())?;
    let map = read_relabel_map(&ws.relabel_map())?;

    let split = partitioned_and_filtered(cfg, &log)?;
    let d2 = apply_relabel(&split.d2, &map)?;
    let (d1_train, d1_test) = leave_one_out(&split.d1)?;
    let (d2_train, d2_test) = leave_one_out(&d2)?;

    let parts = [
        ("d0", &split.d0),
        ("d1_train", &d1_train),
        ("d1_test", &d1_test),
        ("d2_train", &d2_train),
        ("d2_test", &d2_test),
    ];
    let mut counts = serde_json::Map::new();
    for (name, part) in parts {
        write_interactions(&ws.period_file(name), part)?;
        counts.insert(name.to_string(), json!(part.len()));
    }
    update_manifest(
        &ws,
        cfg,
        "split",
        json!({
            "boundaries": [split.boundaries.0, split.boundaries.1],
            "min_per_period": cfg.split.min_per_period,
            "counts": Value::Object(counts),
            "shift_fingerprint": {
                "fraction": cfg.shift.fraction,
                "seed": cfg.shift_seed(),
                "relabeled_items": map.len(),
                "fresh_range": map.fresh_range(),
            },
            "eligible_users": d1_test.len(),
        }),
    )?;
    log::info!(
        "split: {} + {} / {} + {} training/holdout interactions",
        d1_train.len(),
        d2_train.len(),
        d1_test.len(),
        d2_test.len()
    );
    Ok(())
}

fn write_ranks(path: &Path, outcome: &EvalOutcome) -> Result<()> {
    let mut text = String::from("user,truth_item,rank\n");
    for (user, (truth, rank)) in &outcome.per_user_rank {
        match rank {
            Some(r) => text.push_str(&format!("{user},{truth},{r}\n")),
            None => text.push_str(&format!("{user},{truth},\n")),
        }
    }
    fs::write(path, text).map_err(|e| SpError::io(path.display().to_string(), e))
}

fn write_losses(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut text = String::from("epoch,mean_loss\n");
    for (i, loss) in model.epoch_losses().iter().enumerate() {
        text.push_str(&format!("{},{loss}\n", i + 1));
    }
    fs::write(path, text).map_err(|e| SpError::io(path.display().to_string(), e))
}

/// Trains both models per algorithm, evaluates the four
/// (model, holdout) pairs, and writes the report plus the per-user
/// rank and per-epoch loss audit files.
pub fn stage_run(cfg: &ResolvedConfig, save_models: bool) -> Result<()> {
    cfg.validate(false)?;
    let ws = Workspace::new(&cfg.output.dir);
    for name in PERIOD_FILES {
        require_artifact(&ws.period_file(name), "split")?;
    }
    let manifest = read_manifest(&ws)?;
    let dataset_fingerprint = stage_fragment(&manifest, "prepare")?
        .get("dataset_fingerprint")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            SpError::Data("manifest 'prepare' fragment lacks dataset_fingerprint".to_string())
        })?
        .to_string();
    let shift_fragment = stage_fragment(&manifest, "shift")?.clone();
    let split_fragment = stage_fragment(&manifest, "split")?.clone();

    let period = |name: &str| read_interactions(&ws.period_file(name));
    let d0 = period("d0")?;
    let d1_train = period("d1_train")?;
    let d1_test = period("d1_test")?;
    let d2_train = period("d2_train")?;
    let d2_test = period("d2_test")?;
    let pretrain = if cfg.split.include_pretrain {
        d0
    } else {
        InteractionLog::default()
    };
    let (m1_train, m2_train) = assemble_training_sets(&pretrain, &d1_train, &d2_train);
    let splits = ExperimentSplits {
        d1_train,
        d1_test,
        d2_train,
        d2_test,
        m1_train,
        m2_train,
    };

    let upstream = UpstreamInfo {
        dataset_fingerprint,
        shift: shift_fragment,
        split: split_fragment,
    };
    let output = run_experiment_full(
        &splits,
        &cfg.algo_configs(),
        &cfg.metrics()?,
        cfg.eval.k,
        cfg.master_seed,
        &upstream,
    )?;

    write_report(&output.report, ws.dir())?;
    for artifact in &output.artifacts {
        let algo = artifact.algorithm_id.as_str();
        write_ranks(&ws.ranks(algo, "m1", "d1_test"), &artifact.eval_m1_d1)?;
        write_ranks(&ws.ranks(algo, "m1", "d2_test"), &artifact.eval_m1_d2)?;
        write_ranks(&ws.ranks(algo, "m2", "d1_test"), &artifact.eval_m2_d1)?;
        write_ranks(&ws.ranks(algo, "m2", "d2_test"), &artifact.eval_m2_d2)?;
        if !artifact.model_m1.epoch_losses().is_empty() {
            write_losses(&ws.losses(algo, "m1"), &artifact.model_m1)?;
            write_losses(&ws.losses(algo, "m2"), &artifact.model_m2)?;
        }
        if save_models {
            let dir = ws.dir().join("models");
            fs::create_dir_all(&dir).map_err(|e| SpError::io(dir.display().to_string(), e))?;
            save_model(&artifact.model_m1, &ws.model_file(algo, "m1"))?;
            save_model(&artifact.model_m2, &ws.model_file(algo, "m2"))?;
        }
    }

    update_manifest(
        &ws,
        cfg,
        "run",
        json!({
            "algorithms": cfg.algorithms,
            "metrics": cfg.eval.metrics,
            "k": cfg.eval.k,
            "master_seed": cfg.master_seed,
            "include_pretrain": cfg.split.include_pretrain,
            "failures": output
                .report
                .failures
                .iter()
                .map(|f| f.algorithm.clone())
                .collect::<Vec<_>>(),
        }),
    )?;
    for failure in &output.report.failures {
        log::warn!("run: {} failed: {}", failure.algorithm, failure.message);
    }
    for check in &output.report.direction_checks {
        log::info!(
            "run: {} ({}): {} vs {} -> {}",
            check.comparison,
            check.metric,
            check.lhs,
            check.rhs,
            if check.holds { "holds" } else { "does not hold" }
        );
    }
    log::info!("run: report written to {}", ws.report_json().display());
    Ok(())
}

/// Re-renders the derived report files (table, heatmaps, summary)
/// from `report.json`; byte-identical when nothing changed.
pub fn stage_report(cfg: &ResolvedConfig) -> Result<()> {
    cfg.validate(false)?;
    let ws = Workspace::new(&cfg.output.dir);
    require_artifact(&ws.report_json(), "run")?;
    let text = fs::read_to_string(ws.report_json())
        .map_err(|e| SpError::io(ws.report_json().display().to_string(), e))?;
    let report: spbench_core::protocol::SpReport = serde_json::from_str(&text).map_err(|e| {
        SpError::Data(format!(
            "report {} is not a valid report: {e}",
            ws.report_json().display()
        ))
    })?;
    write_report(&report, ws.dir())?;
    log::info!("report: re-rendered files in {}", ws.dir().display());
    Ok(())
}

/// The whole pipeline in one invocation, running the same stage
/// functions in order, so `all` and the stage sequence write
/// identical artifacts.
pub fn stage_all(cfg: &ResolvedConfig, save_models: bool) -> Result<()> {
    stage_prepare(cfg)?;
    stage_shift(cfg)?;
    stage_split(cfg)?;
    stage_run(cfg, save_models)
}
