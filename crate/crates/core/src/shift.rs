//! Concept-shift injection: relabel a seeded random sample of the
//! items occurring in the post-boundary period to fresh item indices,
//! consistently across all their occurrences. Models retrained on the
//! shifted period see the relabeled items as entirely new, while the
//! underlying interaction structure is unchanged.

use std::collections::BTreeSet;

use crate::data::{IdMap, Interaction, InteractionLog};
use crate::error::{Result, SpError};
use crate::rng::seeded_rng;

/// Parameters of the injected shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftConfig {
    /// Fraction of distinct items to relabel, in [0, 1].
    pub fraction: f64,
    pub seed: u64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            fraction: 0.5,
            seed: 0,
        }
    }
}

/// Injective mapping from original item indices to fresh ones.
/// `fresh_range` is the inclusive index range the fresh ids occupy,
/// `None` for an empty map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelabelMap {
    entries: Vec<(u32, u32)>,
    fresh_range: Option<(u32, u32)>,
}

impl RelabelMap {
    /// Builds a map from (original, fresh) pairs, validating
    /// injectivity on both sides. Rows are kept sorted by original
    /// index.
    pub fn from_entries(mut entries: Vec<(u32, u32)>) -> Result<Self> {
        entries.sort_unstable();
        let originals: BTreeSet<u32> = entries.iter().map(|&(o, _)| o).collect();
        let fresh: BTreeSet<u32> = entries.iter().map(|&(_, f)| f).collect();
        if originals.len() != entries.len() || fresh.len() != entries.len() {
            return Err(SpError::Data("relabel map is not injective".into()));
        }
        let fresh_range = match (fresh.first(), fresh.last()) {
            (Some(&lo), Some(&hi)) => Some((lo, hi)),
            _ => None,
        };
        Ok(RelabelMap {
            entries,
            fresh_range,
        })
    }

    /// (original, fresh) pairs sorted by original index.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inclusive range of fresh indices, `None` when the map is empty.
    pub fn fresh_range(&self) -> Option<(u32, u32)> {
        self.fresh_range
    }

    pub fn fresh_index(&self, original: u32) -> Option<u32> {
        self.entries
            .binary_search_by_key(&original, |&(o, _)| o)
            .ok()
            .map(|pos| self.entries[pos].1)
    }
}

/// floor(x + 1/2): ties round up, as in round_half_up(2.5) = 3.
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Selects `round_half_up(fraction * |d2_items|)` items uniformly at
/// random (seeded) and assigns each a fresh dense index, starting at
/// `id_map.next_item_index()` and proceeding in ascending order of the
/// original index. Fresh external keys are synthesized as
/// `<original_key>#shifted` and registered in `id_map`.
pub fn build_relabel_map(
    d2_items: &BTreeSet<u32>,
    config: &ShiftConfig,
    id_map: &mut IdMap,
) -> Result<RelabelMap> {
    if !(0.0..=1.0).contains(&config.fraction) {
        return Err(SpError::Config(format!(
            "shift fraction must be in [0, 1], got {}",
            config.fraction
        )));
    }
    if d2_items.is_empty() {
        return Err(SpError::Data(
            "cannot build a relabel map over an empty item set".into(),
        ));
    }
    let items: Vec<u32> = d2_items.iter().copied().collect();
    let n_selected = round_half_up(config.fraction * items.len() as f64);
    let mut rng = seeded_rng(config.seed);
    let mut selected: Vec<u32> = rand::seq::index::sample(&mut rng, items.len(), n_selected)
        .iter()
        .map(|i| items[i])
        .collect();
    selected.sort_unstable();

    let mut entries = Vec::with_capacity(selected.len());
    for original in selected {
        let key = id_map
            .item_key(original)
            .ok_or_else(|| {
                SpError::Data(format!("item index {original} missing from the id map"))
            })?
            .to_owned();
        let fresh = id_map.add_fresh_item(&format!("{key}#shifted"))?;
        entries.push((original, fresh));
    }
    RelabelMap::from_entries(entries)
}

/// Rewrites every occurrence of a mapped item to its fresh index.
/// Users, timestamps, ordering, and unmapped items are untouched.
/// A map entry whose original item never occurs in `d2` signals a
/// map/log mismatch and is rejected.
pub fn apply_relabel(d2: &InteractionLog, map: &RelabelMap) -> Result<InteractionLog> {
    let present: BTreeSet<u32> = d2.iter().map(|it| it.item).collect();
    for &(original, _) in map.entries() {
        if !present.contains(&original) {
            return Err(SpError::Data(format!(
                "relabel map entry for item {original} which does not occur in the target log"
            )));
        }
    }
    let rewritten = d2
        .iter()
        .map(|it| match map.fresh_index(it.item) {
            Some(fresh) => Interaction::new(it.user, fresh, it.timestamp),
            None => *it,
        })
        .collect();
    // Timestamps are unchanged, so sorted order is preserved.
    Ok(InteractionLog::from_sorted(rewritten))
}
