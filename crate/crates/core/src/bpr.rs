//! Matrix factorization trained with the Bayesian Personalized
//! Ranking pairwise objective: for each observed (user, positive item)
//! and a sampled unseen negative item, minimize -ln sigmoid(x_ui - x_uj)
//! by stochastic gradient descent with L2 regularization.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::InteractionLog;
use crate::error::{Result, SpError};
use crate::model::{ModelState, TrainedModel};
use crate::rng::seeded_rng;

pub const BPR_ALGORITHM_ID: &str = "bprmf";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BprConfig {
    /// Latent dimension.
    pub d: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for BprConfig {
    fn default() -> Self {
        BprConfig {
            d: 64,
            learning_rate: 0.01,
            l2_reg: 0.01,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Latent factor matrices, row-major: `p` is n_users x d (user
/// factors), `q` is n_items x d (item factors). Rows are indexed by
/// position in the model's sorted user/item lists, not by raw index.
#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub d: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl MfParams {
    pub fn user_row(&self, pos: usize) -> &[f64] {
        &self.p[pos * self.d..(pos + 1) * self.d]
    }

    pub fn item_row(&self, pos: usize) -> &[f64] {
        &self.q[pos * self.d..(pos + 1) * self.d]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow for large |z|.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Pairwise ranking loss -ln sigmoid(x_ui - x_uj), evaluated in the
/// log-sum-exp form softplus(x_uj - x_ui) so it stays finite and
/// accurate for extreme score differences.
pub fn bpr_pair_loss(x_ui: f64, x_uj: f64) -> f64 {
    softplus(x_uj - x_ui)
}

/// Gradients of one pairwise step for the triple (u, i_pos, j_neg).
#[derive(Debug, Clone, PartialEq)]
pub struct BprGradients {
    pub d_pu: Vec<f64>,
    pub d_qi: Vec<f64>,
    pub d_qj: Vec<f64>,
}

/// Analytic gradients of softplus(x_uj - x_ui) plus the L2 terms
/// (lambda/2)(|Pu|^2 + |Qi|^2 + |Qj|^2), with e = sigmoid(x_uj - x_ui):
/// dPu = -e (Qi - Qj) + lambda Pu; dQi = -e Pu + lambda Qi;
/// dQj = e Pu + lambda Qj. When i_pos == j_neg the two item rows are
/// the same parameter and their contributions cancel except for
/// regularization.
pub fn bpr_gradients(
    params: &MfParams,
    triple: (usize, usize, usize),
    l2_reg: f64,
) -> BprGradients {
    let (u, i, j) = triple;
    let pu = params.user_row(u);
    let qi = params.item_row(i);
    let qj = params.item_row(j);
    let e = sigmoid(dot(pu, qj) - dot(pu, qi));
    let d = params.d;
    let mut d_pu = vec![0.0; d];
    let mut d_qi = vec![0.0; d];
    let mut d_qj = vec![0.0; d];
    for k in 0..d {
        d_pu[k] = -e * (qi[k] - qj[k]) + l2_reg * pu[k];
        d_qi[k] = -e * pu[k] + l2_reg * qi[k];
        d_qj[k] = e * pu[k] + l2_reg * qj[k];
    }
    BprGradients { d_pu, d_qi, d_qj }
}

/// Trains matrix factorization with the pairwise objective.
///
/// Factors initialize from a seeded Gaussian(0, 0.1), P first then Q,
/// row-major. Each epoch visits every training interaction once in a
/// seeded shuffled order, samples one uniform negative from the items
/// the user has not interacted with, and applies a single SGD step
/// (updates to Qi and Qj use the pre-step Pu). The recorded epoch loss
/// is the mean pairwise loss, without the regularization terms.
pub fn fit_bpr(train: &InteractionLog, config: &BprConfig) -> Result<TrainedModel> {
    let mut problems = Vec::new();
    if config.d == 0 {
        problems.push("d must be at least 1");
    }
    if !(config.learning_rate > 0.0) {
        problems.push("learning_rate must be positive");
    }
    if !(config.l2_reg >= 0.0) {
        problems.push("l2_reg must be non-negative");
    }
    if config.epochs == 0 {
        problems.push("epochs must be at least 1");
    }
    if !problems.is_empty() {
        return Err(SpError::Config(problems.join("; ")));
    }
    if train.is_empty() {
        return Err(SpError::Training {
            algorithm: BPR_ALGORITHM_ID.into(),
            message: "empty training set".into(),
        });
    }

    let users = train.distinct_users();
    let items = train.distinct_items();
    let n_users = users.len();
    let n_items = items.len();
    let d = config.d;

    // (user position, item position) per interaction, in log order
    let pairs: Vec<(u32, u32)> = train
        .iter()
        .map(|it| {
            let u = users.binary_search(&it.user).unwrap() as u32;
            let i = items.binary_search(&it.item).unwrap() as u32;
            (u, i)
        })
        .collect();
    let mut profile_pos: Vec<Vec<u32>> = vec![Vec::new(); n_users];
    for &(u, i) in &pairs {
        profile_pos[u as usize].push(i);
    }
    for prof in &mut profile_pos {
        prof.sort_unstable();
        prof.dedup();
    }

    let mut rng = seeded_rng(config.seed);
    let normal = Normal::new(0.0, 0.1).expect("valid stddev");
    let mut p = vec![0.0; n_users * d];
    let mut q = vec![0.0; n_items * d];
    for slot in p.iter_mut() {
        *slot = normal.sample(&mut rng);
    }
    for slot in q.iter_mut() {
        *slot = normal.sample(&mut rng);
    }

    let lr = config.learning_rate;
    let l2 = config.l2_reg;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut pu_old = vec![0.0; d];
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut skipped_saturated = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut visits = 0usize;
        for &idx in &order {
            let (u, i) = pairs[idx];
            let prof = &profile_pos[u as usize];
            if prof.len() == n_items {
                // user has interacted with the entire catalog
                skipped_saturated += 1;
                continue;
            }
            let j = loop {
                let cand = rng.random_range(0..n_items as u32);
                if prof.binary_search(&cand).is_err() {
                    break cand;
                }
            };
            let (u, i, j) = (u as usize, i as usize, j as usize);
            pu_old.copy_from_slice(&p[u * d..(u + 1) * d]);
            let pu = &pu_old;
            let x_ui = dot(pu, &q[i * d..(i + 1) * d]);
            let x_uj = dot(pu, &q[j * d..(j + 1) * d]);
            loss_sum += bpr_pair_loss(x_ui, x_uj);
            visits += 1;
            let e = sigmoid(x_uj - x_ui);
            for k in 0..d {
                p[u * d + k] -= lr * (-e * (q[i * d + k] - q[j * d + k]) + l2 * pu[k]);
            }
            for k in 0..d {
                q[i * d + k] -= lr * (-e * pu[k] + l2 * q[i * d + k]);
                q[j * d + k] -= lr * (e * pu[k] + l2 * q[j * d + k]);
            }
        }
        epoch_losses.push(if visits == 0 {
            0.0
        } else {
            loss_sum / visits as f64
        });
        if !(p.iter().all(|v| v.is_finite()) && q.iter().all(|v| v.is_finite())) {
            return Err(SpError::Training {
                algorithm: BPR_ALGORITHM_ID.into(),
                message: format!("non-finite parameters after epoch {}", epoch + 1),
            });
        }
    }
    if skipped_saturated > 0 {
        log::warn!(
            "bprmf: skipped {skipped_saturated} visits of users whose profile spans the whole catalog (no negative available)"
        );
    }

    let user_items: Vec<Vec<u32>> = profile_pos
        .iter()
        .map(|prof| prof.iter().map(|&pos| items[pos as usize]).collect())
        .collect();
    let params = MfParams {
        d,
        n_users,
        n_items,
        p,
        q,
    };
    Ok(TrainedModel::from_parts(
        BPR_ALGORITHM_ID,
        config.seed,
        users,
        items,
        user_items,
        epoch_losses,
        ModelState::BprMf(params),
    ))
}

/// Dot product of the user and item factor rows.
pub fn score_bpr(model: &TrainedModel, user: u32, item: u32) -> Result<f64> {
    let ModelState::BprMf(params) = model.state() else {
        return Err(SpError::Data(format!(
            "model {} is not a bprmf model",
            model.algorithm_id()
        )));
    };
    let upos = model
        .user_pos(user)
        .ok_or_else(|| SpError::Data(format!("unknown user {user}")))?;
    let ipos = model
        .item_pos(item)
        .ok_or_else(|| SpError::Data(format!("unknown item {item}")))?;
    Ok(dot(params.user_row(upos), params.item_row(ipos)))
}
