//! Seeded synthetic interaction generator so the whole pipeline runs
//! without any external dataset. Users belong to interest clusters
//! over contiguous item blocks; after the temporal midpoint a share
//! of draws moves to the next block, giving later data a genuinely
//! different preference pattern for retraining to pick up.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Result, SpError};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// Interest clusters; items split into this many contiguous
    /// blocks and user u belongs to cluster u mod clusters.
    pub clusters: usize,
    /// Probability that a draw lands in the user's own block instead
    /// of a uniformly random one.
    pub cluster_affinity: f64,
    /// Probability that a draw after the midpoint moves to the next
    /// block over, modelling a preference drift.
    pub drift_strength: f64,
    /// Share of rows rated 5; the rest rate uniformly 1 to 4, which
    /// a rating threshold of 5 later filters out.
    pub five_star_share: f64,
    pub start_ts: i64,
    pub end_ts: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 200,
            items: 1000,
            interactions: 10_000,
            clusters: 8,
            cluster_affinity: 0.8,
            drift_strength: 0.5,
            five_star_share: 1.0,
            start_ts: 1_356_998_400, // 2013-01-01
            end_ts: 1_420_070_399,   // 2014-12-31
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRow {
    pub user: String,
    pub item: String,
    pub rating: u32,
    pub timestamp: i64,
}

fn validate(config: &SynthConfig) -> Result<()> {
    let mut problems = Vec::new();
    if config.users == 0 {
        problems.push("users must be at least 1".to_string());
    }
    if config.clusters == 0 {
        problems.push("clusters must be at least 1".to_string());
    } else if config.items < config.clusters {
        problems.push(format!(
            "items ({}) must be at least clusters ({})",
            config.items, config.clusters
        ));
    }
    if config.interactions == 0 {
        problems.push("interactions must be at least 1".to_string());
    }
    for (name, v) in [
        ("cluster_affinity", config.cluster_affinity),
        ("drift_strength", config.drift_strength),
        ("five_star_share", config.five_star_share),
    ] {
        if !(0.0..=1.0).contains(&v) {
            problems.push(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    if config.start_ts >= config.end_ts {
        problems.push(format!(
            "start_ts ({}) must precede end_ts ({})",
            config.start_ts, config.end_ts
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SpError::Config(problems.join("; ")))
    }
}

/// Generates the rows in ascending timestamp order. Same config,
/// same rows.
pub fn generate(config: &SynthConfig) -> Result<Vec<SynthRow>> {
    validate(config)?;
    let mut rng = seeded_rng(config.seed);
    let span = config.end_ts - config.start_ts;
    let midpoint = config.start_ts + span / 2;
    let n = config.interactions;
    let clusters = config.clusters as u32;
    let block = config.items / config.clusters; // first blocks may be 1 larger
    let rem = config.items % config.clusters;
    let block_range = |c: u32| -> (usize, usize) {
        let c = c as usize;
        let start = c * block + c.min(rem);
        let len = block + usize::from(c < rem);
        (start, len)
    };

    let mut rows = Vec::with_capacity(n);
    for step in 0..n {
        let timestamp = if n == 1 {
            config.start_ts
        } else {
            config.start_ts + (span as i128 * step as i128 / (n as i128 - 1)) as i64
        };
        let user = rng.random_range(0..config.users as u32);
        let home = user % clusters;
        let drifted = timestamp >= midpoint && rng.random_range(0.0..1.0) < config.drift_strength;
        let cluster = if drifted {
            (home + 1) % clusters
        } else if rng.random_range(0.0..1.0) < config.cluster_affinity {
            home
        } else {
            rng.random_range(0..clusters)
        };
        let (start, len) = block_range(cluster);
        let item = start + rng.random_range(0..len as u32) as usize;
        let rating = if rng.random_range(0.0..1.0) < config.five_star_share {
            5
        } else {
            rng.random_range(1..5u32)
        };
        rows.push(SynthRow {
            user: format!("u{user}"),
            item: format!("b{item}"),
            rating,
            timestamp,
        });
    }
    Ok(rows)
}

/// Renders the rows as the raw CSV the ingestion stage expects.
pub fn render_csv(rows: &[SynthRow]) -> String {
    let mut out = String::from("user,item,rating,timestamp\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.user, row.item, row.rating, row.timestamp
        ));
    }
    out
}

/// Generates and writes the dataset in one go.
pub fn write_synth_csv(config: &SynthConfig, path: &Path) -> Result<()> {
    let rows = generate(config)?;
    fs::write(path, render_csv(&rows)).map_err(|e| SpError::io(path.display().to_string(), e))
}
