//! Top-k ranking quality metrics over leave-one-out holdouts: hit
//! ratio, NDCG, and catalog coverage. Each user is ranked exactly
//! once and all requested metrics are read off the same rankings.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Result, SpError};
use crate::data::InteractionLog;
use crate::model::{EvalContext, RankedList, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    HitRatio,
    Ndcg,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::HitRatio, Metric::Ndcg, Metric::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HitRatio => "hit_ratio",
            Metric::Ndcg => "ndcg",
            Metric::Coverage => "coverage",
        }
    }

    pub fn from_name(name: &str) -> Result<Metric> {
        match name {
            "hit_ratio" => Ok(Metric::HitRatio),
            "ndcg" => Ok(Metric::Ndcg),
            "coverage" => Ok(Metric::Coverage),
            other => Err(SpError::Config(format!(
                "unknown metric {other:?}; expected hit_ratio, ndcg, or coverage"
            ))),
        }
    }
}

/// Fraction of users whose held-out item appears in their list.
pub fn hit_ratio_at_k(rankings: &[RankedList], truth: &BTreeMap<u32, u32>) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for list in rankings {
        let t = truth[&list.user];
        if list.items.contains(&t) {
            hits += 1;
        }
    }
    hits as f64 / rankings.len() as f64
}

/// Mean discounted gain of the held-out item: 1 / log2(rank + 1) at
/// its 1-based rank, 0 when absent. With a single relevant item the
/// ideal DCG is 1, so no further normalization is needed.
pub fn ndcg_at_k(rankings: &[RankedList], truth: &BTreeMap<u32, u32>) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for list in rankings {
        let t = truth[&list.user];
        if let Some(idx) = list.items.iter().position(|&i| i == t) {
            sum += 1.0 / ((idx as f64 + 2.0).log2());
        }
    }
    sum / rankings.len() as f64
}

/// Distinct items recommended to anyone, as a fraction of the
/// candidate catalog.
pub fn coverage_at_k(rankings: &[RankedList], catalog_size: usize) -> f64 {
    if catalog_size == 0 {
        return 0.0;
    }
    let mut seen: Vec<u32> = rankings.iter().flat_map(|l| l.items.iter().copied()).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len() as f64 / catalog_size as f64
}

/// Everything one evaluation phase produces: the 1-based rank of each
/// user's held-out item (None when it missed the list) and the
/// aggregate value per metric name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub per_user_rank: BTreeMap<u32, (u32, Option<usize>)>,
    pub aggregate: BTreeMap<String, f64>,
}

/// Ranks every holdout user once against the shared catalog and
/// computes the requested metrics from those rankings. Users are
/// aggregated in ascending index order whatever the worker count, so
/// results do not depend on parallelism.
pub fn evaluate_model(
    model: &TrainedModel,
    holdout: &InteractionLog,
    catalog: &[u32],
    metrics: &[Metric],
    k: usize,
) -> Result<EvalOutcome> {
    if holdout.is_empty() {
        return Err(SpError::EmptyResult("holdout has no interactions".into()));
    }
    let mut truth: BTreeMap<u32, u32> = BTreeMap::new();
    for it in holdout {
        if truth.insert(it.user, it.item).is_some() {
            return Err(SpError::Data(format!(
                "holdout has more than one interaction for user {}",
                it.user
            )));
        }
    }

    let ctx = EvalContext::new(model);
    let pairs: Vec<(u32, u32)> = truth.iter().map(|(&u, &i)| (u, i)).collect();
    let rankings: Vec<RankedList> = pairs
        .par_iter()
        .map(|&(user, _)| ctx.rank_top_k(user, catalog, k))
        .collect::<Result<Vec<_>>>()?;

    let mut per_user_rank = BTreeMap::new();
    for (list, &(user, t)) in rankings.iter().zip(&pairs) {
        let rank = list.items.iter().position(|&i| i == t).map(|idx| idx + 1);
        per_user_rank.insert(user, (t, rank));
    }

    let mut aggregate = BTreeMap::new();
    for &metric in metrics {
        let value = match metric {
            Metric::HitRatio => hit_ratio_at_k(&rankings, &truth),
            Metric::Ndcg => ndcg_at_k(&rankings, &truth),
            Metric::Coverage => coverage_at_k(&rankings, catalog.len()),
        };
        aggregate.insert(metric.name().to_string(), value);
    }
    Ok(EvalOutcome {
        per_user_rank,
        aggregate,
    })
}
