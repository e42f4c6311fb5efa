//! Property tests for the data-handling invariants: log
//! normalization, reindexing, per-period filtering, shift injection,
//! temporal splitting, leave-one-out holdouts, and metric bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use proptest::prelude::*;

use spbench_core::data::{
    filter_min_per_period, reindex_ids, IdMap, Interaction, InteractionLog, TimeInterval,
};
use spbench_core::knn::KnnConfig;
use spbench_core::metrics::{evaluate_model, Metric};
use spbench_core::model::{fit, AlgoConfig, EvalContext};
use spbench_core::shift::{apply_relabel, build_relabel_map, ShiftConfig};
use spbench_core::split::{leave_one_out, split_temporal, SplitMode};
use spbench_core::SpError;

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn arb_rows() -> impl Strategy<Value = Vec<(u32, u32, i64)>> {
    proptest::collection::vec((0u32..20, 0u32..30, 0i64..500), 1..150)
}

fn log_of(rows: &[(u32, u32, i64)]) -> InteractionLog {
    InteractionLog::from_unsorted(
        rows.iter()
            .map(|&(u, i, t)| Interaction::new(u, i, t))
            .collect(),
    )
}

proptest! {
    /// Normalization sorts by timestamp and keeps each exact
    /// (user, item, timestamp) row exactly once.
    #[test]
    fn normalized_logs_are_sorted_and_row_unique(rows in arb_rows()) {
        let log = log_of(&rows);
        prop_assert!(log
            .as_slice()
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp));
        let mut seen = HashSet::new();
        for it in &log {
            prop_assert!(seen.insert(*it), "duplicate {it:?}");
        }
        let distinct: HashSet<(u32, u32, i64)> = rows.iter().copied().collect();
        prop_assert_eq!(seen.len(), distinct.len());
    }

    /// Reindexing is idempotent: a second reindex changes nothing and
    /// numbers ids 0..n in first-appearance order.
    #[test]
    fn reindexing_twice_is_the_identity(rows in arb_rows()) {
        let log = log_of(&rows);
        let (dense, map) = reindex_ids(&log);
        let (dense2, map2) = reindex_ids(&dense);
        prop_assert_eq!(&dense2, &dense);
        for idx in 0..map2.user_count() as u32 {
            prop_assert_eq!(map2.user_key(idx).unwrap(), idx.to_string());
        }

        // the rewrite is a bijection consistent across occurrences
        let mut user_map: HashMap<u32, u32> = HashMap::new();
        for (old, new) in log.iter().zip(dense.iter()) {
            prop_assert_eq!(old.timestamp, new.timestamp);
            prop_assert_eq!(*user_map.entry(old.user).or_insert(new.user), new.user);
        }
        prop_assert_eq!(map.user_count(), log.distinct_users().len());
        prop_assert_eq!(map.item_count(), log.distinct_items().len());
        let users = dense.distinct_users();
        prop_assert_eq!(users.len() as u32, *users.last().unwrap() + 1);
    }

    /// Every survivor of the per-period filter meets the minimum in
    /// every interval, non-survivors fail it somewhere, and filtering
    /// again removes nobody else.
    #[test]
    fn period_filter_keeps_exactly_the_qualifying_users(
        rows in arb_rows(),
        min in 1usize..4,
    ) {
        let log = log_of(&rows);
        let intervals = [
            TimeInterval::new(i64::MIN, 200),
            TimeInterval::new(200, 350),
            TimeInterval::new(350, i64::MAX),
        ];
        let counts = |log: &InteractionLog| {
            let mut c: HashMap<u32, [usize; 3]> = HashMap::new();
            for it in log {
                for (k, interval) in intervals.iter().enumerate() {
                    if interval.contains(it.timestamp) {
                        c.entry(it.user).or_default()[k] += 1;
                    }
                }
            }
            c
        };
        let before = counts(&log);
        match filter_min_per_period(&log, &intervals, min) {
            Ok(kept) => {
                let kept_users: HashSet<u32> = kept.distinct_users().into_iter().collect();
                for (user, c) in &before {
                    let qualifies = c.iter().all(|&n| n >= min);
                    prop_assert_eq!(kept_users.contains(user), qualifies, "user {}", user);
                }
                let again = filter_min_per_period(&kept, &intervals, min).unwrap();
                prop_assert_eq!(&again, &kept);
            }
            Err(SpError::EmptyResult(_)) => {
                prop_assert!(before.values().all(|c| c.iter().any(|&n| n < min)));
            }
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    /// The relabel map has exactly the rounded share of items, all
    /// fresh ids are new, and applying it preserves the occurrence
    /// histogram.
    #[test]
    fn shift_injection_preserves_histograms(
        rows in arb_rows(),
        fraction in 0.0f64..=1.0,
        seed in 0u64..50,
    ) {
        let d2 = log_of(&rows);
        let d2_items: BTreeSet<u32> = d2.iter().map(|it| it.item).collect();
        let max_item = *d2_items.iter().max().unwrap();
        let mut id_map = IdMap::new();
        for i in 0..=max_item {
            id_map.intern_item(&format!("b{i}"));
        }
        let next_free = id_map.next_item_index();

        let map = build_relabel_map(&d2_items, &ShiftConfig { fraction, seed }, &mut id_map)
            .unwrap();
        prop_assert_eq!(map.len(), round_half_up(fraction * d2_items.len() as f64));
        for &(original, fresh) in map.entries() {
            prop_assert!(d2_items.contains(&original));
            prop_assert!(fresh >= next_free, "fresh id {fresh} collides");
        }
        let fresh_ids: BTreeSet<u32> = map.entries().iter().map(|&(_, f)| f).collect();
        prop_assert_eq!(fresh_ids.len(), map.len());

        let shifted = apply_relabel(&d2, &map).unwrap();
        prop_assert_eq!(shifted.len(), d2.len());
        let histogram = |log: &InteractionLog| {
            let mut h: BTreeMap<u32, usize> = BTreeMap::new();
            for it in log {
                *h.entry(it.item).or_default() += 1;
            }
            h
        };
        let before = histogram(&d2);
        let after = histogram(&shifted);
        for (&item, &count) in &before {
            let target = map.fresh_index(item).unwrap_or(item);
            prop_assert_eq!(after.get(&target), Some(&count), "item {}", item);
        }
        for (old, new) in d2.iter().zip(shifted.iter()) {
            prop_assert_eq!(old.user, new.user);
            prop_assert_eq!(old.timestamp, new.timestamp);
            prop_assert_eq!(map.fresh_index(old.item).unwrap_or(old.item), new.item);
        }

        // same seed, same map
        let mut id_map2 = IdMap::new();
        for i in 0..=max_item {
            id_map2.intern_item(&format!("b{i}"));
        }
        let map2 = build_relabel_map(&d2_items, &ShiftConfig { fraction, seed }, &mut id_map2)
            .unwrap();
        prop_assert_eq!(map.entries(), map2.entries());
    }

    /// Splitting assigns every interaction to the period its
    /// timestamp demands, with both boundaries half-open.
    #[test]
    fn temporal_split_respects_boundaries(
        rows in arb_rows(),
        d0_end in 0i64..300,
        gap in 1i64..200,
    ) {
        let log = log_of(&rows);
        let d1_end = d0_end + gap;
        match split_temporal(&log, SplitMode::ByBoundaries { d0_end, d1_end }) {
            Ok(split) => {
                prop_assert_eq!(split.d0.len() + split.d1.len() + split.d2.len(), log.len());
                prop_assert!(split.d0.iter().all(|it| it.timestamp < d0_end));
                prop_assert!(split
                    .d1
                    .iter()
                    .all(|it| (d0_end..d1_end).contains(&it.timestamp)));
                prop_assert!(split.d2.iter().all(|it| it.timestamp >= d1_end));
                prop_assert!(!split.d1.is_empty() && !split.d2.is_empty());
                prop_assert_eq!(split.boundaries, (d0_end, d1_end));
            }
            Err(SpError::EmptyResult(_)) => {
                let d1_count = log
                    .iter()
                    .filter(|it| (d0_end..d1_end).contains(&it.timestamp))
                    .count();
                let d2_count = log.iter().filter(|it| it.timestamp >= d1_end).count();
                prop_assert!(d1_count == 0 || d2_count == 0);
            }
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    /// The holdout takes exactly one interaction per user and the
    /// remainder keeps the rest; nothing is shared or lost.
    #[test]
    fn leave_one_out_partitions_each_user(rows in arb_rows()) {
        let log = log_of(&rows);
        let mut per_user: HashMap<u32, usize> = HashMap::new();
        for it in &log {
            *per_user.entry(it.user).or_default() += 1;
        }
        let eligible: HashSet<u32> = per_user
            .iter()
            .filter(|&(_, &n)| n >= 2)
            .map(|(&u, _)| u)
            .collect();
        prop_assume!(!eligible.is_empty());
        let period = log.filter_users(&eligible);

        let (train, test) = leave_one_out(&period).unwrap();
        prop_assert_eq!(test.len(), eligible.len());
        prop_assert_eq!(train.len() + test.len(), period.len());
        let test_users: HashSet<u32> = test.distinct_users().into_iter().collect();
        prop_assert_eq!(&test_users, &eligible);

        // Row-level partition: the exact held-out rows are gone from
        // train (the same pair may recur at earlier timestamps), and
        // each held-out row is the user's latest.
        let train_rows: HashSet<Interaction> = train.iter().copied().collect();
        for it in &test {
            prop_assert!(!train_rows.contains(it));
            let later = train
                .iter()
                .filter(|t| t.user == it.user && t.timestamp > it.timestamp)
                .count();
            prop_assert_eq!(later, 0);
        }
        // multiset equality; tie order within a timestamp may differ
        let mut rejoined: Vec<Interaction> =
            train.iter().chain(test.iter()).copied().collect();
        rejoined.sort_unstable();
        let mut original: Vec<Interaction> = period.iter().copied().collect();
        original.sort_unstable();
        prop_assert_eq!(rejoined, original);
    }

    /// Aggregate metrics stay in [0, 1] and do not depend on catalog
    /// order.
    #[test]
    fn metrics_are_bounded_and_catalog_order_free(
        rows in proptest::collection::vec((0u32..12, 0u32..15, 0i64..100), 24..80),
        k in 1usize..8,
    ) {
        let train = log_of(&rows);
        let model = match fit(&train, &AlgoConfig::Uknn(KnnConfig { k_neighbors: 5 }), 0) {
            Ok(m) => m,
            Err(_) => return Ok(()), // degenerate sample
        };
        let truth_rows: Vec<Interaction> = model
            .known_users()
            .iter()
            .enumerate()
            .map(|(n, &u)| Interaction::new(u, (n as u32) % 17, 1000))
            .collect();
        let holdout = InteractionLog::from_unsorted(truth_rows);
        let mut catalog = train.distinct_items();
        catalog.extend(holdout.distinct_items());
        catalog.sort_unstable();
        catalog.dedup();

        let outcome = evaluate_model(&model, &holdout, &catalog, &Metric::ALL, k).unwrap();
        for (name, value) in &outcome.aggregate {
            prop_assert!((0.0..=1.0).contains(value), "{name} = {value}");
        }

        let mut reversed = catalog.clone();
        reversed.reverse();
        let ctx = EvalContext::new(&model);
        for &user in model.known_users() {
            let a = ctx.rank_top_k(user, &catalog, k).unwrap();
            let b = ctx.rank_top_k(user, &reversed, k).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
