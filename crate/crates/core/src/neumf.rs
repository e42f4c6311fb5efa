//! Neural matrix factorization with two branches: a GMF branch
//! (element-wise product of user and item embeddings) and an MLP
//! branch (ReLU layers over the concatenated embeddings), joined by a
//! logistic output head. Trained pointwise with binary cross-entropy
//! and uniform negative sampling; backpropagation is hand-derived and
//! verified against finite differences.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bpr::{sigmoid, softplus};
use crate::data::InteractionLog;
use crate::error::{Result, SpError};
use crate::model::{ModelState, TrainedModel};
use crate::rng::seeded_rng;

pub const NEUMF_ALGORITHM_ID: &str = "neumf";

#[derive(Debug, Clone, PartialEq)]
pub struct NeuMfConfig {
    /// GMF embedding dimension.
    pub d_g: usize,
    /// MLP embedding dimension.
    pub d_m: usize,
    /// Hidden layer widths of the MLP tower; at least one layer.
    pub hidden: Vec<usize>,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NeuMfConfig {
    fn default() -> Self {
        NeuMfConfig {
            d_g: 16,
            d_m: 32,
            hidden: vec![64, 32, 16],
            negatives_per_positive: 4,
            learning_rate: 0.001,
            epochs: 30,
            seed: 0,
        }
    }
}

/// One affine layer, weights row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// All network parameters. Embedding rows are indexed by position in
/// the model's sorted user/item lists.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuMfParams {
    pub d_g: usize,
    pub d_m: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub gmf_user: Vec<f64>,
    pub gmf_item: Vec<f64>,
    pub mlp_user: Vec<f64>,
    pub mlp_item: Vec<f64>,
    pub layers: Vec<Layer>,
    /// Output head over concat(GMF, top MLP activation).
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl NeuMfParams {
    pub fn gmf_user_row(&self, pos: usize) -> &[f64] {
        &self.gmf_user[pos * self.d_g..(pos + 1) * self.d_g]
    }

    pub fn gmf_item_row(&self, pos: usize) -> &[f64] {
        &self.gmf_item[pos * self.d_g..(pos + 1) * self.d_g]
    }

    pub fn mlp_user_row(&self, pos: usize) -> &[f64] {
        &self.mlp_user[pos * self.d_m..(pos + 1) * self.d_m]
    }

    pub fn mlp_item_row(&self, pos: usize) -> &[f64] {
        &self.mlp_item[pos * self.d_m..(pos + 1) * self.d_m]
    }

    fn check_shapes(&self) {
        let mut in_dim = 2 * self.d_m;
        assert!(!self.layers.is_empty(), "at least one MLP layer");
        for layer in &self.layers {
            assert_eq!(layer.in_dim, in_dim, "layer input width chains");
            assert_eq!(layer.w.len(), layer.in_dim * layer.out_dim);
            assert_eq!(layer.b.len(), layer.out_dim);
            in_dim = layer.out_dim;
        }
        assert_eq!(self.out_w.len(), self.d_g + in_dim);
    }

    /// The user-dependent half of the first MLP layer, including the
    /// bias: `out[j] = b[j] + sum_k w[j,k] * mlp_user[k]`. The full
    /// first-layer pre-activation is this plus the item half, which is
    /// exactly how [`neumf_forward`] computes it, so caching either
    /// half changes nothing in the result bits.
    pub(crate) fn layer0_user_half(&self, user_pos: usize, out: &mut [f64]) {
        let l0 = &self.layers[0];
        let pu = self.mlp_user_row(user_pos);
        for (j, slot) in out.iter_mut().enumerate() {
            let row = &l0.w[j * l0.in_dim..j * l0.in_dim + self.d_m];
            let mut acc = l0.b[j];
            for k in 0..self.d_m {
                acc += row[k] * pu[k];
            }
            *slot = acc;
        }
    }

    /// The item-dependent half of the first MLP layer:
    /// `out[j] = sum_k w[j, d_m + k] * mlp_item[k]`.
    pub(crate) fn layer0_item_half(&self, item_pos: usize, out: &mut [f64]) {
        let l0 = &self.layers[0];
        let qi = self.mlp_item_row(item_pos);
        for (j, slot) in out.iter_mut().enumerate() {
            let row = &l0.w[j * l0.in_dim + self.d_m..(j + 1) * l0.in_dim];
            let mut acc = 0.0;
            for k in 0..self.d_m {
                acc += row[k] * qi[k];
            }
            *slot = acc;
        }
    }

    /// Runs the network above the first-layer pre-activation: ReLU,
    /// the remaining layers, and the output head. `z1` is consumed as
    /// the first pre-activation; `gmf` must hold the element-wise
    /// embedding products. Returns the logit.
    pub(crate) fn logit_from_layer0(&self, z1: &[f64], gmf: &[f64]) -> f64 {
        let mut h: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        for layer in &self.layers[1..] {
            let mut next = vec![0.0; layer.out_dim];
            for (j, slot) in next.iter_mut().enumerate() {
                let row = &layer.w[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut acc = layer.b[j];
                for k in 0..layer.in_dim {
                    acc += row[k] * h[k];
                }
                *slot = acc.max(0.0);
            }
            h = next;
        }
        head_logit(self, gmf, &h)
    }
}

fn head_logit(params: &NeuMfParams, gmf: &[f64], h_top: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, &g) in gmf.iter().enumerate() {
        acc += params.out_w[j] * g;
    }
    for (j, &h) in h_top.iter().enumerate() {
        acc += params.out_w[params.d_g + j] * h;
    }
    params.out_b + acc
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activations {
    /// Element-wise products gmf_user[u] * gmf_item[i].
    pub gmf: Vec<f64>,
    /// Pre-activation per layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-ReLU output per layer.
    pub post: Vec<Vec<f64>>,
    pub logit: f64,
    pub prob: f64,
}

fn forward_into(params: &NeuMfParams, user_pos: usize, item_pos: usize, acts: &mut Activations) {
    let n_layers = params.layers.len();
    acts.gmf.resize(params.d_g, 0.0);
    acts.pre.resize(n_layers, Vec::new());
    acts.post.resize(n_layers, Vec::new());

    // first layer: user half (with bias) plus item half
    let h1 = params.layers[0].out_dim;
    acts.pre[0].resize(h1, 0.0);
    params.layer0_user_half(user_pos, &mut acts.pre[0]);
    let mut item_half = vec![0.0; h1];
    params.layer0_item_half(item_pos, &mut item_half);
    for j in 0..h1 {
        acts.pre[0][j] += item_half[j];
    }
    acts.post[0] = acts.pre[0].iter().map(|&z| z.max(0.0)).collect();

    for l in 1..n_layers {
        let layer = &params.layers[l];
        let (done, rest) = acts.pre.split_at_mut(l);
        let input = &acts.post[l - 1];
        let _ = done;
        rest[0].resize(layer.out_dim, 0.0);
        for j in 0..layer.out_dim {
            let row = &layer.w[j * layer.in_dim..(j + 1) * layer.in_dim];
            let mut acc = layer.b[j];
            for k in 0..layer.in_dim {
                acc += row[k] * input[k];
            }
            rest[0][j] = acc;
        }
        acts.post[l] = rest[0].iter().map(|&z| z.max(0.0)).collect();
    }

    let gu = params.gmf_user_row(user_pos);
    let gi = params.gmf_item_row(item_pos);
    for j in 0..params.d_g {
        acts.gmf[j] = gu[j] * gi[j];
    }
    acts.logit = head_logit(params, &acts.gmf, &acts.post[n_layers - 1]);
    acts.prob = sigmoid(acts.logit);
}

/// Full forward pass for one (user, item) pair, returning the
/// interaction probability and the cached activations for backprop.
pub fn neumf_forward(
    params: &NeuMfParams,
    user_pos: usize,
    item_pos: usize,
) -> (f64, Activations) {
    params.check_shapes();
    let mut acts = Activations::default();
    forward_into(params, user_pos, item_pos, &mut acts);
    (acts.prob, acts)
}

/// Gradients of the binary cross-entropy loss for one example,
/// covering every parameter group. Embedding gradients are for the
/// single user/item row involved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeuMfGradients {
    pub d_gmf_user: Vec<f64>,
    pub d_gmf_item: Vec<f64>,
    pub d_mlp_user: Vec<f64>,
    pub d_mlp_item: Vec<f64>,
    /// (dW, db) per layer.
    pub d_layers: Vec<(Vec<f64>, Vec<f64>)>,
    pub d_out_w: Vec<f64>,
    pub d_out_b: f64,
}

fn backward_into(
    params: &NeuMfParams,
    acts: &Activations,
    user_pos: usize,
    item_pos: usize,
    label: f64,
    grads: &mut NeuMfGradients,
) {
    let n_layers = params.layers.len();
    grads.d_gmf_user.resize(params.d_g, 0.0);
    grads.d_gmf_item.resize(params.d_g, 0.0);
    grads.d_mlp_user.resize(params.d_m, 0.0);
    grads.d_mlp_item.resize(params.d_m, 0.0);
    grads.d_layers.resize(n_layers, (Vec::new(), Vec::new()));
    for (l, layer) in params.layers.iter().enumerate() {
        grads.d_layers[l].0.resize(layer.w.len(), 0.0);
        grads.d_layers[l].1.resize(layer.b.len(), 0.0);
    }
    grads.d_out_w.resize(params.out_w.len(), 0.0);

    // dL/dlogit of -[y ln p + (1-y) ln(1-p)] through the logistic
    let g = acts.prob - label;
    grads.d_out_b = g;
    let gu = params.gmf_user_row(user_pos);
    let gi = params.gmf_item_row(item_pos);
    for j in 0..params.d_g {
        grads.d_out_w[j] = g * acts.gmf[j];
        let d_gmf = g * params.out_w[j];
        grads.d_gmf_user[j] = d_gmf * gi[j];
        grads.d_gmf_item[j] = d_gmf * gu[j];
    }
    let top = n_layers - 1;
    let h_top_dim = params.layers[top].out_dim;
    let mut d_h = vec![0.0; h_top_dim];
    for j in 0..h_top_dim {
        grads.d_out_w[params.d_g + j] = g * acts.post[top][j];
        d_h[j] = g * params.out_w[params.d_g + j];
    }

    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        // ReLU gate; the derivative at exactly 0 is 0
        let mut dz = vec![0.0; layer.out_dim];
        for j in 0..layer.out_dim {
            dz[j] = if acts.pre[l][j] > 0.0 { d_h[j] } else { 0.0 };
        }
        let (dw, db) = &mut grads.d_layers[l];
        let mut d_input = vec![0.0; layer.in_dim];
        if l > 0 {
            let input = &acts.post[l - 1];
            for j in 0..layer.out_dim {
                let row = &mut dw[j * layer.in_dim..(j + 1) * layer.in_dim];
                for k in 0..layer.in_dim {
                    row[k] = dz[j] * input[k];
                    d_input[k] += dz[j] * layer.w[j * layer.in_dim + k];
                }
                db[j] = dz[j];
            }
            d_h = d_input;
        } else {
            // first layer input is concat(mlp_user, mlp_item)
            let pu = params.mlp_user_row(user_pos);
            let qi = params.mlp_item_row(item_pos);
            for j in 0..layer.out_dim {
                let row = &mut dw[j * layer.in_dim..(j + 1) * layer.in_dim];
                for k in 0..params.d_m {
                    row[k] = dz[j] * pu[k];
                    row[params.d_m + k] = dz[j] * qi[k];
                    d_input[k] += dz[j] * layer.w[j * layer.in_dim + k];
                    d_input[params.d_m + k] += dz[j] * layer.w[j * layer.in_dim + params.d_m + k];
                }
                db[j] = dz[j];
            }
            grads.d_mlp_user.copy_from_slice(&d_input[..params.d_m]);
            grads.d_mlp_item.copy_from_slice(&d_input[params.d_m..]);
        }
    }
}

/// Reverse-mode gradients of the BCE loss for one (user, item, label)
/// example, for every parameter group.
pub fn neumf_gradients(
    params: &NeuMfParams,
    user_pos: usize,
    item_pos: usize,
    label: f64,
) -> NeuMfGradients {
    debug_assert!(label == 0.0 || label == 1.0);
    let (_, acts) = neumf_forward(params, user_pos, item_pos);
    let mut grads = NeuMfGradients::default();
    backward_into(params, &acts, user_pos, item_pos, label, &mut grads);
    grads
}

fn apply_step(
    params: &mut NeuMfParams,
    user_pos: usize,
    item_pos: usize,
    grads: &NeuMfGradients,
    lr: f64,
) {
    let d_g = params.d_g;
    let d_m = params.d_m;
    for k in 0..d_g {
        params.gmf_user[user_pos * d_g + k] -= lr * grads.d_gmf_user[k];
        params.gmf_item[item_pos * d_g + k] -= lr * grads.d_gmf_item[k];
    }
    for k in 0..d_m {
        params.mlp_user[user_pos * d_m + k] -= lr * grads.d_mlp_user[k];
        params.mlp_item[item_pos * d_m + k] -= lr * grads.d_mlp_item[k];
    }
    for (layer, (dw, db)) in params.layers.iter_mut().zip(&grads.d_layers) {
        for (w, g) in layer.w.iter_mut().zip(dw) {
            *w -= lr * g;
        }
        for (b, g) in layer.b.iter_mut().zip(db) {
            *b -= lr * g;
        }
    }
    for (w, g) in params.out_w.iter_mut().zip(&grads.d_out_w) {
        *w -= lr * g;
    }
    params.out_b -= lr * grads.d_out_b;
}

/// Binary cross-entropy from the logit, in the overflow-safe form
/// softplus(-z) + (1 - y) z.
fn bce_from_logit(logit: f64, label: f64) -> f64 {
    softplus(-logit) + (1.0 - label) * logit
}

fn validate_config(config: &NeuMfConfig) -> Result<()> {
    let mut problems = Vec::new();
    if config.d_g == 0 {
        problems.push("d_g must be at least 1".to_string());
    }
    if config.d_m == 0 {
        problems.push("d_m must be at least 1".to_string());
    }
    if config.hidden.is_empty() {
        problems.push("hidden must list at least one layer width".to_string());
    }
    for (l, &w) in config.hidden.iter().enumerate() {
        if w == 0 {
            problems.push(format!("hidden[{l}] must be positive"));
        }
    }
    if config.negatives_per_positive == 0 {
        problems.push("negatives_per_positive must be at least 1".to_string());
    }
    if !(config.learning_rate > 0.0) {
        problems.push("learning_rate must be positive".to_string());
    }
    if config.epochs == 0 {
        problems.push("epochs must be at least 1".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SpError::Config(problems.join("; ")))
    }
}

/// Trains the dual-branch network pointwise.
///
/// Embeddings initialize from a seeded Gaussian(0, 0.01) in the order
/// gmf_user, gmf_item, mlp_user, mlp_item; layer weights use He
/// scaling Gaussian(0, sqrt(2 / fan_in)) with zero biases, then the
/// output head the same way. Each epoch visits the positives in a
/// seeded shuffled order; every positive is trained with label 1 and
/// followed by `negatives_per_positive` uniformly sampled unseen items
/// trained with label 0, one SGD step per example. The recorded epoch
/// loss is the mean BCE over all examples of the epoch.
pub fn fit_neumf(train: &InteractionLog, config: &NeuMfConfig) -> Result<TrainedModel> {
    validate_config(config)?;
    if train.is_empty() {
        return Err(SpError::Training {
            algorithm: NEUMF_ALGORITHM_ID.into(),
            message: "empty training set".into(),
        });
    }
    let users = train.distinct_users();
    let items = train.distinct_items();
    let n_users = users.len();
    let n_items = items.len();

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
    let emb = Normal::new(0.0, 0.01).expect("valid stddev");
    let d_g = config.d_g;
    let d_m = config.d_m;
    let mut params = NeuMfParams {
        d_g,
        d_m,
        n_users,
        n_items,
        gmf_user: vec![0.0; n_users * d_g],
        gmf_item: vec![0.0; n_items * d_g],
        mlp_user: vec![0.0; n_users * d_m],
        mlp_item: vec![0.0; n_items * d_m],
        layers: Vec::with_capacity(config.hidden.len()),
        out_w: Vec::new(),
        out_b: 0.0,
    };
    for slot in params
        .gmf_user
        .iter_mut()
        .chain(params.gmf_item.iter_mut())
        .chain(params.mlp_user.iter_mut())
        .chain(params.mlp_item.iter_mut())
    {
        *slot = emb.sample(&mut rng);
    }
    let mut in_dim = 2 * d_m;
    for &out_dim in &config.hidden {
        let he = Normal::new(0.0, (2.0 / in_dim as f64).sqrt()).expect("valid stddev");
        let mut w = vec![0.0; in_dim * out_dim];
        for slot in w.iter_mut() {
            *slot = he.sample(&mut rng);
        }
        params.layers.push(Layer {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        });
        in_dim = out_dim;
    }
    let head_in = d_g + in_dim;
    let he = Normal::new(0.0, (2.0 / head_in as f64).sqrt()).expect("valid stddev");
    params.out_w = (0..head_in).map(|_| he.sample(&mut rng)).collect();
    params.check_shapes();

    let lr = config.learning_rate;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut acts = Activations::default();
    let mut grads = NeuMfGradients::default();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut skipped_saturated = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut examples = 0usize;
        for &idx in &order {
            let (u, i) = pairs[idx];
            let saturated = profile_pos[u as usize].len() == n_items;
            let mut train_example = |params: &mut NeuMfParams, item_pos: usize, label: f64| {
                forward_into(params, u as usize, item_pos, &mut acts);
                loss_sum += bce_from_logit(acts.logit, label);
                examples += 1;
                backward_into(params, &acts, u as usize, item_pos, label, &mut grads);
                apply_step(params, u as usize, item_pos, &grads, lr);
            };
            train_example(&mut params, i as usize, 1.0);
            if saturated {
                skipped_saturated += 1;
                continue;
            }
            for _ in 0..config.negatives_per_positive {
                let j = loop {
                    let cand = rng.random_range(0..n_items as u32);
                    if profile_pos[u as usize].binary_search(&cand).is_err() {
                        break cand;
                    }
                };
                train_example(&mut params, j as usize, 0.0);
            }
        }
        epoch_losses.push(if examples == 0 {
            0.0
        } else {
            loss_sum / examples as f64
        });
        let finite = params.gmf_user.iter().all(|v| v.is_finite())
            && params.gmf_item.iter().all(|v| v.is_finite())
            && params.mlp_user.iter().all(|v| v.is_finite())
            && params.mlp_item.iter().all(|v| v.is_finite())
            && params
                .layers
                .iter()
                .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
            && params.out_w.iter().all(|v| v.is_finite())
            && params.out_b.is_finite();
        if !finite {
            return Err(SpError::Training {
                algorithm: NEUMF_ALGORITHM_ID.into(),
                message: format!(
                    "non-finite parameters after epoch {}; last good epoch {}",
                    epoch + 1,
                    epoch
                ),
            });
        }
    }
    if skipped_saturated > 0 {
        log::warn!(
            "neumf: skipped negative sampling for {skipped_saturated} positives of users whose profile spans the whole catalog"
        );
    }

    let user_items: Vec<Vec<u32>> = profile_pos
        .iter()
        .map(|prof| prof.iter().map(|&pos| items[pos as usize]).collect())
        .collect();
    Ok(TrainedModel::from_parts(
        NEUMF_ALGORITHM_ID,
        config.seed,
        users,
        items,
        user_items,
        epoch_losses,
        ModelState::NeuMf(params),
    ))
}

/// The pre-logistic output (logit) for a known (user, item) pair: a
/// strictly monotone proxy for the interaction probability, so
/// rankings are identical and the logistic is skipped.
pub fn score_neumf(model: &TrainedModel, user: u32, item: u32) -> Result<f64> {
    let ModelState::NeuMf(params) = model.state() else {
        return Err(SpError::Data(format!(
            "model {} is not a neumf model",
            model.algorithm_id()
        )));
    };
    let upos = model
        .user_pos(user)
        .ok_or_else(|| SpError::Data(format!("unknown user {user}")))?;
    let ipos = model
        .item_pos(item)
        .ok_or_else(|| SpError::Data(format!("unknown item {item}")))?;
    let mut acts = Activations::default();
    forward_into(params, upos, ipos, &mut acts);
    Ok(acts.logit)
}
