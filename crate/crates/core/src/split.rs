//! Temporal splitting and leave-one-out holdout construction.
//!
//! A log is first cut into a pre-training period D0 and two evaluation
//! periods D1 and D2. Each evaluation period then splits per user into
//! training interactions and a single held-out test interaction. The
//! legacy model trains on D0 plus the D1 training part; the retrained
//! model additionally sees the D2 training part.

use std::collections::{HashMap, HashSet};

use crate::data::InteractionLog;
use crate::error::{Result, SpError};

/// How to cut the log into D0 / D1 / D2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// Assign by timestamp interval. D0 = [min, d0_end), D1 = [d0_end,
    /// d1_end), D2 = [d1_end, max]. Half-open on the right, so an
    /// interaction exactly on a boundary falls into the later period.
    ByBoundaries { d0_end: i64, d1_end: i64 },
    /// Put the first half of post-D0 interactions (in sort order) into
    /// D1 and the rest into D2; odd counts give D1 the extra one.
    /// `d0_end` bounds the optional pre-training period, `None` for an
    /// empty D0.
    EqualCounts { d0_end: Option<i64> },
}

/// The three periods plus the effective boundary timestamps
/// (end of D0, end of D1), recorded for the manifest. For
/// `EqualCounts` the second boundary is the timestamp of the first D2
/// interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    pub d0: InteractionLog,
    pub d1: InteractionLog,
    pub d2: InteractionLog,
    pub boundaries: (i64, i64),
}

/// Cuts `log` into D0 / D1 / D2. D0 may be empty (no pre-training
/// data); an empty D1 or D2 is an error because both periods must
/// yield a holdout.
pub fn split_temporal(log: &InteractionLog, mode: SplitMode) -> Result<TemporalSplit> {
    if log.is_empty() {
        return Err(SpError::EmptyResult("cannot split an empty log".into()));
    }
    let (d0, d1, d2, boundaries) = match mode {
        SplitMode::ByBoundaries { d0_end, d1_end } => {
            if d0_end >= d1_end {
                return Err(SpError::Config(format!(
                    "boundary order violated: end of first period ({d0_end}) must precede end of second ({d1_end})"
                )));
            }
            let mut d0 = Vec::new();
            let mut d1 = Vec::new();
            let mut d2 = Vec::new();
            for it in log {
                if it.timestamp < d0_end {
                    d0.push(*it);
                } else if it.timestamp < d1_end {
                    d1.push(*it);
                } else {
                    d2.push(*it);
                }
            }
            (d0, d1, d2, (d0_end, d1_end))
        }
        SplitMode::EqualCounts { d0_end } => {
            let cut = d0_end.unwrap_or(i64::MIN);
            let mut d0 = Vec::new();
            let mut rest = Vec::new();
            for it in log {
                if it.timestamp < cut {
                    d0.push(*it);
                } else {
                    rest.push(*it);
                }
            }
            // Odd counts: D1 gets the extra interaction.
            let d1_len = rest.len() - rest.len() / 2;
            let d2 = rest.split_off(d1_len);
            let d2_start = d2.first().map(|it| it.timestamp).unwrap_or(i64::MAX);
            let d0_boundary = d0_end.unwrap_or_else(|| log.min_timestamp().unwrap());
            (d0, rest, d2, (d0_boundary, d2_start))
        }
    };
    if d1.is_empty() {
        return Err(SpError::EmptyResult(
            "first evaluation period (D1) is empty; check the split boundaries".into(),
        ));
    }
    if d2.is_empty() {
        return Err(SpError::EmptyResult(
            "second evaluation period (D2) is empty; check the split boundaries".into(),
        ));
    }
    Ok(TemporalSplit {
        d0: InteractionLog::from_sorted(d0),
        d1: InteractionLog::from_sorted(d1),
        d2: InteractionLog::from_sorted(d2),
        boundaries,
    })
}

/// Splits one period per user: the interaction with the latest
/// timestamp (ties: the later one in stable log order) goes to the
/// test set, everything else to the training set.
///
/// Every user must have at least two interactions in the period; a
/// violation means the upstream per-period filter did not run.
pub fn leave_one_out(period: &InteractionLog) -> Result<(InteractionLog, InteractionLog)> {
    // Last position per user in sorted order is the latest by the tie
    // rule, because the log is sorted by timestamp with stable ties.
    let mut last_pos: HashMap<u32, usize> = HashMap::new();
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for (pos, it) in period.iter().enumerate() {
        last_pos.insert(it.user, pos);
        *counts.entry(it.user).or_default() += 1;
    }
    if let Some((user, _)) = counts.iter().find(|&(_, &c)| c < 2) {
        return Err(SpError::Data(format!(
            "user {user} has a single interaction in the period; leave-one-out requires at least two (per-period filter missing?)"
        )));
    }
    let holdout: HashSet<usize> = last_pos.into_values().collect();
    let mut train = Vec::with_capacity(period.len() - holdout.len());
    let mut test = Vec::with_capacity(holdout.len());
    for (pos, it) in period.iter().enumerate() {
        if holdout.contains(&pos) {
            test.push(*it);
        } else {
            train.push(*it);
        }
    }
    Ok((
        InteractionLog::from_sorted(train),
        InteractionLog::from_sorted(test),
    ))
}

/// Assembles the two model training sets: the legacy model sees
/// D0 + D1 training interactions, the retrained model additionally
/// sees the D2 training interactions. Both are stable-sorted.
pub fn assemble_training_sets(
    d0: &InteractionLog,
    d1_train: &InteractionLog,
    d2_train: &InteractionLog,
) -> (InteractionLog, InteractionLog) {
    let m1_train = InteractionLog::concat(&[d0, d1_train]);
    let m2_train = InteractionLog::concat(&[d0, d1_train, d2_train]);
    (m1_train, m2_train)
}

/// All interaction sets one experiment needs: per-period training and
/// holdout parts plus the assembled model training sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplits {
    pub d1_train: InteractionLog,
    pub d1_test: InteractionLog,
    pub d2_train: InteractionLog,
    pub d2_test: InteractionLog,
    pub m1_train: InteractionLog,
    pub m2_train: InteractionLog,
}

impl ExperimentSplits {
    /// Derives holdouts and training sets from a temporal split whose
    /// D2 has already been shift-injected (the shift must precede the
    /// holdout split so that D2 ground truths can be shifted items).
    /// With `include_pretrain` false, D0 is left out of both training
    /// sets.
    pub fn derive(split: &TemporalSplit, include_pretrain: bool) -> Result<Self> {
        let (d1_train, d1_test) = leave_one_out(&split.d1)?;
        let (d2_train, d2_test) = leave_one_out(&split.d2)?;
        let empty = InteractionLog::default();
        let d0 = if include_pretrain { &split.d0 } else { &empty };
        let (m1_train, m2_train) = assemble_training_sets(d0, &d1_train, &d2_train);
        Ok(ExperimentSplits {
            d1_train,
            d1_test,
            d2_train,
            d2_test,
            m1_train,
            m2_train,
        })
    }
}
