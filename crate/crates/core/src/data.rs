//! Interaction data model and ingestion.
//!
//! The universal data currency is the [`InteractionLog`]: a
//! timestamp-sorted, deduplicated sequence of (user, item, timestamp)
//! events with dense non-negative indices. [`IdMap`] keeps the
//! bidirectional mapping between external keys and dense indices.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use crate::error::{Result, SpError};
use crate::rng::seeded_rng;

/// One implicit-feedback event: user interacted with item at a time,
/// expressed in seconds since the Unix epoch. Indices are dense and
/// resolve through the experiment's [`IdMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub timestamp: i64,
}

impl Interaction {
    pub fn new(user: u32, item: u32, timestamp: i64) -> Self {
        Interaction {
            user,
            item,
            timestamp,
        }
    }
}

/// A sequence of interactions sorted by timestamp ascending, stable
/// with respect to input order for equal timestamps, with exact
/// (user, item, timestamp) duplicates removed (first kept).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    interactions: Vec<Interaction>,
}

impl InteractionLog {
    /// Builds a log from interactions in arbitrary order: stable-sorts
    /// by timestamp and drops exact duplicates, keeping the first
    /// occurrence in sorted order.
    pub fn from_unsorted(mut interactions: Vec<Interaction>) -> Self {
        interactions.sort_by_key(|it| it.timestamp);
        let mut seen = HashSet::with_capacity(interactions.len());
        interactions.retain(|it| seen.insert(*it));
        InteractionLog { interactions }
    }

    /// Wraps a vector already in log order (sorted, deduplicated).
    /// Used by transformations that provably preserve the invariants.
    pub(crate) fn from_sorted(interactions: Vec<Interaction>) -> Self {
        debug_assert!(interactions.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        InteractionLog { interactions }
    }

    /// Concatenates several logs into one, re-sorting stably so that
    /// equal timestamps keep the order of the argument list.
    pub fn concat(parts: &[&InteractionLog]) -> Self {
        let mut all = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for part in parts {
            all.extend_from_slice(part.as_slice());
        }
        InteractionLog::from_unsorted(all)
    }

    pub fn as_slice(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.interactions.iter()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// Distinct user indices, ascending.
    pub fn distinct_users(&self) -> Vec<u32> {
        let mut users: Vec<u32> = self.interactions.iter().map(|it| it.user).collect();
        users.sort_unstable();
        users.dedup();
        users
    }

    /// Distinct item indices, ascending.
    pub fn distinct_items(&self) -> Vec<u32> {
        let mut items: Vec<u32> = self.interactions.iter().map(|it| it.item).collect();
        items.sort_unstable();
        items.dedup();
        items
    }

    pub fn min_timestamp(&self) -> Option<i64> {
        self.interactions.first().map(|it| it.timestamp)
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.interactions.last().map(|it| it.timestamp)
    }

    /// Keeps interactions whose user is in `users`, preserving order.
    pub fn filter_users(&self, users: &HashSet<u32>) -> Self {
        InteractionLog::from_sorted(
            self.interactions
                .iter()
                .filter(|it| users.contains(&it.user))
                .copied()
                .collect(),
        )
    }

    /// Sorted items per user over this log.
    pub fn user_profiles(&self) -> std::collections::BTreeMap<u32, Vec<u32>> {
        let mut profiles: std::collections::BTreeMap<u32, Vec<u32>> =
            std::collections::BTreeMap::new();
        for it in &self.interactions {
            profiles.entry(it.user).or_default().push(it.item);
        }
        for items in profiles.values_mut() {
            items.sort_unstable();
            items.dedup();
        }
        profiles
    }
}

impl<'a> IntoIterator for &'a InteractionLog {
    type Item = &'a Interaction;
    type IntoIter = std::slice::Iter<'a, Interaction>;
    fn into_iter(self) -> Self::IntoIter {
        self.interactions.iter()
    }
}

/// Half-open time interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeInterval {
    pub start: i64,
    pub end: i64,
}

impl TimeInterval {
    pub fn new(start: i64, end: i64) -> Self {
        TimeInterval { start, end }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Bidirectional mapping between external keys and dense indices,
/// for users and items independently. Dense indices are contiguous
/// from 0 in insertion order; forward and reverse maps stay inverse
/// bijections by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    user_forward: HashMap<String, u32>,
    user_reverse: Vec<String>,
    item_forward: HashMap<String, u32>,
    item_reverse: Vec<String>,
}

impl IdMap {
    pub fn new() -> Self {
        IdMap::default()
    }

    /// First unused dense item index; fresh relabeled items are
    /// assigned from here upward.
    pub fn next_item_index(&self) -> u32 {
        self.item_reverse.len() as u32
    }

    pub fn user_count(&self) -> usize {
        self.user_reverse.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_reverse.len()
    }

    /// Returns the dense index for a user key, registering it if new.
    pub fn intern_user(&mut self, key: &str) -> u32 {
        if let Some(&idx) = self.user_forward.get(key) {
            return idx;
        }
        let idx = self.user_reverse.len() as u32;
        self.user_forward.insert(key.to_owned(), idx);
        self.user_reverse.push(key.to_owned());
        idx
    }

    /// Returns the dense index for an item key, registering it if new.
    pub fn intern_item(&mut self, key: &str) -> u32 {
        if let Some(&idx) = self.item_forward.get(key) {
            return idx;
        }
        let idx = self.item_reverse.len() as u32;
        self.item_forward.insert(key.to_owned(), idx);
        self.item_reverse.push(key.to_owned());
        idx
    }

    /// Registers a brand-new item key and returns its index. Unlike
    /// [`IdMap::intern_item`] an existing key is an error; used when
    /// synthesizing fresh relabeled items, where a collision means the
    /// key scheme clashed with real data.
    pub fn add_fresh_item(&mut self, key: &str) -> Result<u32> {
        if self.item_forward.contains_key(key) {
            return Err(SpError::Data(format!(
                "fresh item key {key:?} collides with an existing key"
            )));
        }
        Ok(self.intern_item(key))
    }

    pub fn user_index(&self, key: &str) -> Option<u32> {
        self.user_forward.get(key).copied()
    }

    pub fn item_index(&self, key: &str) -> Option<u32> {
        self.item_forward.get(key).copied()
    }

    pub fn user_key(&self, index: u32) -> Option<&str> {
        self.user_reverse.get(index as usize).map(|s| s.as_str())
    }

    pub fn item_key(&self, index: u32) -> Option<&str> {
        self.item_reverse.get(index as usize).map(|s| s.as_str())
    }

    pub fn user_keys(&self) -> &[String] {
        &self.user_reverse
    }

    pub fn item_keys(&self) -> &[String] {
        &self.item_reverse
    }
}

/// Where to find the relevant columns in a delimited input file.
/// Columns are zero-based positions after splitting on `delimiter`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: usize,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            user_col: 0,
            item_col: 1,
            rating_col: None,
            timestamp_col: 2,
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Parses a timestamp field: integer epoch seconds, a `YYYY-MM-DD`
/// date (interpreted at UTC midnight), or an RFC 3339 datetime.
pub fn parse_timestamp(field: &str) -> std::result::Result<i64, String> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<i64>() {
        if secs < 0 {
            return Err(format!("negative timestamp {secs}"));
        }
        return Ok(secs);
    }
    if let Ok(date) = chrono::NaiveDate::parse_from_str(field, "%Y-%m-%d") {
        let secs = date
            .and_hms_opt(0, 0, 0)
            .expect("midnight is always valid")
            .and_utc()
            .timestamp();
        if secs < 0 {
            return Err(format!("timestamp {field:?} is before the Unix epoch"));
        }
        return Ok(secs);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(field) {
        let secs = dt.timestamp();
        if secs < 0 {
            return Err(format!("timestamp {field:?} is before the Unix epoch"));
        }
        return Ok(secs);
    }
    Err(format!(
        "unparseable timestamp {field:?} (expected epoch seconds, YYYY-MM-DD, or RFC 3339)"
    ))
}

/// Reads delimited text into a canonical log plus a fresh [`IdMap`].
///
/// Rows failing the rating threshold (when both a rating column and a
/// threshold are given) are discarded, not treated as negatives. The
/// result is stable-sorted by timestamp and deduplicated; dense
/// indices are assigned in first-appearance order of the sorted log,
/// which makes parsing an already-canonical file the identity on
/// indices.
///
/// `path_label` only decorates error messages.
pub fn parse_interactions(
    source: impl BufRead,
    format: &ColumnSpec,
    rating_threshold: Option<u32>,
    path_label: &str,
) -> Result<(InteractionLog, IdMap)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true)
        .from_reader(source);

    let needed = [
        Some(format.user_col),
        Some(format.item_col),
        format.rating_col,
        Some(format.timestamp_col),
    ]
    .into_iter()
    .flatten()
    .max()
    .expect("at least one column is required");

    // (user key, item key, timestamp), kept in input order for the
    // stable sort below.
    let mut rows: Vec<(String, String, i64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => SpError::parse(path_label, pos.line(), e.to_string()),
            None => SpError::parse(path_label, 0, e.to_string()),
        })?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(0);
        if record.len() <= needed {
            return Err(SpError::parse(
                path_label,
                line,
                format!(
                    "row has {} columns but column {} is required",
                    record.len(),
                    needed
                ),
            ));
        }
        if let (Some(col), Some(threshold)) = (format.rating_col, rating_threshold) {
            let field = record.get(col).unwrap().trim();
            let rating: f64 = field.parse().map_err(|_| {
                SpError::parse(path_label, line, format!("unparseable rating {field:?}"))
            })?;
            if rating < threshold as f64 {
                continue;
            }
        }
        let timestamp = parse_timestamp(record.get(format.timestamp_col).unwrap())
            .map_err(|msg| SpError::parse(path_label, line, msg))?;
        let user = record.get(format.user_col).unwrap().trim();
        let item = record.get(format.item_col).unwrap().trim();
        if user.is_empty() || item.is_empty() {
            return Err(SpError::parse(path_label, line, "empty user or item key"));
        }
        rows.push((user.to_owned(), item.to_owned(), timestamp));
    }

    if rows.is_empty() {
        return Err(SpError::EmptyResult(format!(
            "{path_label}: no interactions left after parsing and rating filter"
        )));
    }

    // Stable sort, then drop duplicate (user, item, timestamp) rows
    // keeping the first, then intern keys in sorted first-appearance
    // order so indices are reproducible from content alone.
    rows.sort_by_key(|r| r.2);
    let mut seen: HashSet<(String, String, i64)> = HashSet::with_capacity(rows.len());
    let mut map = IdMap::new();
    let mut interactions = Vec::with_capacity(rows.len());
    for (user_key, item_key, timestamp) in rows {
        if !seen.insert((user_key.clone(), item_key.clone(), timestamp)) {
            continue;
        }
        let user = map.intern_user(&user_key);
        let item = map.intern_item(&item_key);
        interactions.push(Interaction::new(user, item, timestamp));
    }

    Ok((InteractionLog::from_sorted(interactions), map))
}

/// Keeps all interactions of exactly `n` users drawn uniformly without
/// replacement, seeded; relative interaction order is preserved.
///
/// The draw is over the ascending list of distinct users, so the
/// result depends only on (log, n, seed).
pub fn sample_users(log: &InteractionLog, n: usize, seed: u64) -> Result<InteractionLog> {
    let users = log.distinct_users();
    if n > users.len() {
        return Err(SpError::Data(format!(
            "cannot sample {n} users from a log with {} distinct users",
            users.len()
        )));
    }
    if n == users.len() {
        return Ok(log.clone());
    }
    let mut rng = seeded_rng(seed);
    let picked = rand::seq::index::sample(&mut rng, users.len(), n);
    let keep: HashSet<u32> = picked.iter().map(|i| users[i]).collect();
    let sampled = log.filter_users(&keep);
    if sampled.is_empty() {
        return Err(SpError::EmptyResult("user sample is empty".into()));
    }
    Ok(sampled)
}

/// Retains only users having at least `min_count` interactions inside
/// every listed interval.
///
/// A single pass reaches the fixed point: removing one user never
/// changes another user's per-interval counts, so the criterion cannot
/// be re-violated by removal.
pub fn filter_min_per_period(
    log: &InteractionLog,
    period_boundaries: &[TimeInterval],
    min_count: usize,
) -> Result<InteractionLog> {
    if period_boundaries.is_empty() {
        return Err(SpError::Config(
            "filter_min_per_period requires at least one interval".into(),
        ));
    }
    // counts[user][k] = interactions of user inside interval k
    let mut counts: HashMap<u32, Vec<usize>> = HashMap::new();
    for it in log {
        for (k, interval) in period_boundaries.iter().enumerate() {
            if interval.contains(it.timestamp) {
                counts.entry(it.user).or_insert_with(|| vec![0; period_boundaries.len()])[k] += 1;
            }
        }
    }
    let keep: HashSet<u32> = counts
        .into_iter()
        .filter(|(_, per)| per.iter().all(|&c| c >= min_count))
        .map(|(u, _)| u)
        .collect();
    let filtered = log.filter_users(&keep);
    if filtered.is_empty() {
        return Err(SpError::EmptyResult(format!(
            "no user has {min_count}+ interactions in every period"
        )));
    }
    Ok(filtered)
}

/// Renumbers users and items to contiguous dense indices in
/// first-appearance order. The returned map's external keys are the
/// decimal form of the previous indices; use [`reindex_ids_with`] to
/// carry original external keys through instead.
pub fn reindex_ids(log: &InteractionLog) -> (InteractionLog, IdMap) {
    let mut map = IdMap::new();
    let interactions = log
        .iter()
        .map(|it| {
            let user = map.intern_user(&it.user.to_string());
            let item = map.intern_item(&it.item.to_string());
            Interaction::new(user, item, it.timestamp)
        })
        .collect();
    (InteractionLog::from_sorted(interactions), map)
}

/// Like [`reindex_ids`] but resolves the previous indices through
/// `old` so the new map keeps the original external keys.
pub fn reindex_ids_with(log: &InteractionLog, old: &IdMap) -> Result<(InteractionLog, IdMap)> {
    let mut map = IdMap::new();
    let mut interactions = Vec::with_capacity(log.len());
    for it in log {
        let user_key = old.user_key(it.user).ok_or_else(|| {
            SpError::Data(format!("user index {} missing from the id map", it.user))
        })?;
        let item_key = old.item_key(it.item).ok_or_else(|| {
            SpError::Data(format!("item index {} missing from the id map", it.item))
        })?;
        let user = map.intern_user(user_key);
        let item = map.intern_item(item_key);
        interactions.push(Interaction::new(user, item, it.timestamp));
    }
    Ok((InteractionLog::from_sorted(interactions), map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn spec_with_rating() -> ColumnSpec {
        ColumnSpec {
            user_col: 0,
            item_col: 1,
            rating_col: Some(2),
            timestamp_col: 3,
            ..ColumnSpec::default()
        }
    }

    #[test]
    fn rating_threshold_keeps_only_qualifying_rows() {
        let input = "user,item,rating,ts\nu1,b1,5,100\nu2,b2,4,200\nu3,b3,5,300\n";
        let (log, _) =
            parse_interactions(Cursor::new(input), &spec_with_rating(), Some(5), "mem").unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn empty_stream_is_a_distinct_error() {
        let err = parse_interactions(
            Cursor::new("user,item,ts\n"),
            &ColumnSpec::default(),
            None,
            "mem",
        )
        .unwrap_err();
        assert!(matches!(err, SpError::EmptyResult(_)), "got {err:?}");
    }

    #[test]
    fn output_is_sorted_by_timestamp() {
        let input = "user,item,ts\nu1,b1,30\nu2,b2,10\nu3,b3,20\n";
        let (log, _) =
            parse_interactions(Cursor::new(input), &ColumnSpec::default(), None, "mem").unwrap();
        let ts: Vec<i64> = log.iter().map(|it| it.timestamp).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let input = "user,item,ts\nu1,b1,100\nu2,b2\n";
        let err = parse_interactions(Cursor::new(input), &ColumnSpec::default(), None, "data.csv")
            .unwrap_err();
        match err {
            SpError::Parse { path, line, .. } => {
                assert_eq!(path, "data.csv");
                assert_eq!(line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_is_a_parse_error() {
        let input = "user,item,ts\nu1,b1,soon\n";
        let err = parse_interactions(Cursor::new(input), &ColumnSpec::default(), None, "mem")
            .unwrap_err();
        assert!(matches!(err, SpError::Parse { line: 2, .. }), "got {err:?}");
    }

    #[test]
    fn dates_parse_as_utc_midnight() {
        assert_eq!(parse_timestamp("1970-01-02").unwrap(), 86_400);
        assert_eq!(parse_timestamp("2013-01-01").unwrap(), 1_356_998_400);
        assert_eq!(parse_timestamp("42").unwrap(), 42);
        assert!(parse_timestamp("-5").is_err());
    }

    #[test]
    fn duplicates_collapse_keeping_first() {
        let input = "user,item,ts\nu1,b1,10\nu1,b1,10\nu1,b1,20\n";
        let (log, _) =
            parse_interactions(Cursor::new(input), &ColumnSpec::default(), None, "mem").unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn parse_then_reindex_is_identity() {
        let input = "user,item,ts\nua,bx,10\nub,by,20\nua,bz,30\n";
        let (log, _) =
            parse_interactions(Cursor::new(input), &ColumnSpec::default(), None, "mem").unwrap();
        let (re, _) = reindex_ids(&log);
        assert_eq!(re, log);
    }

    #[test]
    fn sampling_all_users_is_identity() {
        let log = InteractionLog::from_unsorted(
            (0..5).map(|u| Interaction::new(u, u, u as i64)).collect(),
        );
        assert_eq!(sample_users(&log, 5, 99).unwrap(), log);
    }

    #[test]
    fn sampling_more_users_than_exist_fails() {
        let log = InteractionLog::from_unsorted(vec![Interaction::new(0, 0, 1)]);
        assert!(sample_users(&log, 2, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let log = InteractionLog::from_unsorted(
            (0..100u32)
                .flat_map(|u| (0..3).map(move |j| Interaction::new(u, j, (u * 3 + j) as i64)))
                .collect(),
        );
        let a = sample_users(&log, 10, 42).unwrap();
        let b = sample_users(&log, 10, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.distinct_users().len(), 10);
    }

    #[test]
    fn min_per_period_drops_violating_users() {
        // user 1: 3 in first interval, 1 in second -> removed
        // user 2: 2 and 2 -> kept
        let log = InteractionLog::from_unsorted(vec![
            Interaction::new(1, 0, 10),
            Interaction::new(1, 1, 11),
            Interaction::new(1, 2, 12),
            Interaction::new(1, 3, 105),
            Interaction::new(2, 0, 13),
            Interaction::new(2, 1, 14),
            Interaction::new(2, 2, 101),
            Interaction::new(2, 3, 102),
        ]);
        let intervals = [TimeInterval::new(0, 100), TimeInterval::new(100, 200)];
        let kept = filter_min_per_period(&log, &intervals, 2).unwrap();
        assert_eq!(kept.distinct_users(), vec![2]);
    }

    #[test]
    fn min_per_period_is_noop_when_satisfied() {
        let log = InteractionLog::from_unsorted(vec![
            Interaction::new(1, 0, 10),
            Interaction::new(1, 1, 11),
            Interaction::new(1, 2, 101),
            Interaction::new(1, 3, 102),
        ]);
        let intervals = [TimeInterval::new(0, 100), TimeInterval::new(100, 200)];
        assert_eq!(filter_min_per_period(&log, &intervals, 2).unwrap(), log);
    }

    #[test]
    fn min_per_period_counts_each_interval_separately() {
        // (2,2) kept, (0,5) dropped
        let mut rows = vec![
            Interaction::new(1, 0, 10),
            Interaction::new(1, 1, 20),
            Interaction::new(1, 2, 110),
            Interaction::new(1, 3, 120),
        ];
        rows.extend((0..5).map(|j| Interaction::new(2, j, 130 + j as i64)));
        let log = InteractionLog::from_unsorted(rows);
        let intervals = [TimeInterval::new(0, 100), TimeInterval::new(100, 200)];
        let kept = filter_min_per_period(&log, &intervals, 2).unwrap();
        assert_eq!(kept.distinct_users(), vec![1]);
    }

    #[test]
    fn empty_interval_list_is_a_config_error() {
        let log = InteractionLog::from_unsorted(vec![Interaction::new(0, 0, 1)]);
        assert!(matches!(
            filter_min_per_period(&log, &[], 2),
            Err(SpError::Config(_))
        ));
    }

    #[test]
    fn reindex_uses_first_appearance_order() {
        // items appear as [7, 9, 7, 5] -> dense [0, 1, 0, 2]
        let log = InteractionLog::from_unsorted(vec![
            Interaction::new(3, 7, 1),
            Interaction::new(4, 9, 2),
            Interaction::new(5, 7, 3),
            Interaction::new(6, 5, 4),
        ]);
        let (re, map) = reindex_ids(&log);
        let items: Vec<u32> = re.iter().map(|it| it.item).collect();
        assert_eq!(items, vec![0, 1, 0, 2]);
        assert_eq!(map.item_key(0), Some("7"));
        assert_eq!(map.item_key(2), Some("5"));
    }

    #[test]
    fn reindex_empty_log_gives_empty_map() {
        let (re, map) = reindex_ids(&InteractionLog::default());
        assert!(re.is_empty());
        assert_eq!(map.user_count(), 0);
        assert_eq!(map.item_count(), 0);
    }

    #[test]
    fn id_map_round_trips_every_key() {
        let mut map = IdMap::new();
        for key in ["alpha", "beta", "gamma"] {
            let idx = map.intern_item(key);
            assert_eq!(map.item_index(key), Some(idx));
            assert_eq!(map.item_key(idx), Some(key));
        }
        assert_eq!(map.next_item_index(), 3);
        assert!(map.add_fresh_item("alpha").is_err());
        assert_eq!(map.add_fresh_item("delta").unwrap(), 3);
    }

    #[test]
    fn stable_sort_preserves_input_order_on_ties() {
        let log = InteractionLog::from_unsorted(vec![
            Interaction::new(9, 0, 50),
            Interaction::new(1, 1, 50),
            Interaction::new(2, 2, 50),
        ]);
        let users: Vec<u32> = log.iter().map(|it| it.user).collect();
        assert_eq!(users, vec![9, 1, 2]);
    }
}
