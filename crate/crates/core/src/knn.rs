//! User-based KNN recommender: cosine similarity over binary user
//! profiles, neighborhood-weighted item scoring.

use crate::data::InteractionLog;
use crate::error::{Result, SpError};

pub const KNN_ALGORITHM_ID: &str = "uknn";

/// Neighborhood size; the only hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k_neighbors: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k_neighbors: 50 }
    }
}

/// Fitted user-based KNN model: one sorted binary profile per user.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    users: Vec<u32>,
    /// Sorted distinct item indices per user, parallel to `users`.
    profiles: Vec<Vec<u32>>,
    /// sqrt(|profile|), parallel to `users`.
    norms: Vec<f64>,
    k_neighbors: usize,
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Cosine similarity of two binary profiles given as sorted slices:
/// |a ∩ b| / (√|a|·√|b|), evaluated as |a ∩ b| / √(|a|·|b|) so that
/// integer-perfect cases (like 1/√4) come out exact.
pub fn cosine_similarity(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SpError::Data(
            "cosine similarity is undefined for an empty profile".into(),
        ));
    }
    let inter = intersection_size(a, b);
    Ok(inter as f64 / ((a.len() * b.len()) as f64).sqrt())
}

/// Builds per-user profiles from the training log. Deterministic with
/// no randomness; `_seed` exists only for interface uniformity with
/// the trained recommenders and is ignored.
pub fn fit_knn(train: &InteractionLog, k_neighbors: usize, _seed: u64) -> Result<KnnModel> {
    if train.is_empty() {
        return Err(SpError::Training {
            algorithm: KNN_ALGORITHM_ID.into(),
            message: "empty training set".into(),
        });
    }
    if k_neighbors == 0 {
        return Err(SpError::Config("k_neighbors must be at least 1".into()));
    }
    let profile_map = train.user_profiles();
    let mut users = Vec::with_capacity(profile_map.len());
    let mut profiles = Vec::with_capacity(profile_map.len());
    let mut norms = Vec::with_capacity(profile_map.len());
    for (user, items) in profile_map {
        norms.push((items.len() as f64).sqrt());
        users.push(user);
        profiles.push(items);
    }
    Ok(KnnModel {
        users,
        profiles,
        norms,
        k_neighbors,
    })
}

impl KnnModel {
    pub fn users(&self) -> &[u32] {
        &self.users
    }

    pub fn profiles(&self) -> &[Vec<u32>] {
        &self.profiles
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub(crate) fn user_pos(&self, user: u32) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub(crate) fn from_parts(users: Vec<u32>, profiles: Vec<Vec<u32>>, k_neighbors: usize) -> Self {
        let norms = profiles.iter().map(|p| (p.len() as f64).sqrt()).collect();
        KnnModel {
            users,
            profiles,
            norms,
            k_neighbors,
        }
    }

    /// The user's neighborhood: up to `k_neighbors` other users with
    /// positive similarity, ordered by similarity descending and ties
    /// by ascending user index. Returned as (position, similarity).
    pub(crate) fn neighbors(&self, pos: usize) -> Vec<(usize, f64)> {
        let profile = &self.profiles[pos];
        let mut sims: Vec<(usize, f64)> = Vec::new();
        for v in 0..self.users.len() {
            if v == pos {
                continue;
            }
            let inter = intersection_size(profile, &self.profiles[v]);
            if inter == 0 {
                continue;
            }
            let sim = inter as f64 / ((profile.len() * self.profiles[v].len()) as f64).sqrt();
            sims.push((v, sim));
        }
        // users is sorted, so ascending position is ascending index
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        sims.truncate(self.k_neighbors);
        sims
    }
}

/// Neighborhood-weighted score: over the user's top neighbors,
/// Σ sim(u,v)·[item ∈ profile(v)] / Σ sim(u,v), accumulated in
/// neighborhood rank order. 0 when no positive-similarity neighbor
/// exists or no neighbor owns the item.
pub fn score_knn(model: &KnnModel, user: u32, item: u32) -> Result<f64> {
    let pos = model
        .user_pos(user)
        .ok_or_else(|| SpError::Data(format!("unknown user {user}")))?;
    let neighbors = model.neighbors(pos);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(v, sim) in &neighbors {
        den += sim;
        if model.profiles[v].binary_search(&item).is_ok() {
            num += sim;
        }
    }
    if den == 0.0 {
        Ok(0.0)
    } else {
        Ok(num / den)
    }
}
