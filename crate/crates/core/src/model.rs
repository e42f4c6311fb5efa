//! Unified trained-model type over the three recommenders, fitting
//! and scoring dispatch, top-k ranking against a fixed candidate
//! catalog, and a versioned binary serialization whose round trip
//! reproduces scores bit for bit.

use std::fs::File;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use crate::bpr::{self, BprConfig, MfParams, BPR_ALGORITHM_ID};
use crate::data::InteractionLog;
use crate::error::{Result, SpError};
use crate::knn::{fit_knn, KnnConfig, KnnModel, KNN_ALGORITHM_ID};
use crate::neumf::{self, Layer, NeuMfConfig, NeuMfParams, NEUMF_ALGORITHM_ID};
use crate::split::ExperimentSplits;

/// Algorithm-specific fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    Knn(KnnModel),
    BprMf(MfParams),
    NeuMf(NeuMfParams),
}

impl ModelState {
    fn tag(&self) -> u8 {
        match self {
            ModelState::Knn(_) => 0,
            ModelState::BprMf(_) => 1,
            ModelState::NeuMf(_) => 2,
        }
    }
}

/// Hyperparameters for one algorithm; the variant picks the model.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoConfig {
    Uknn(KnnConfig),
    BprMf(BprConfig),
    NeuMf(NeuMfConfig),
}

impl AlgoConfig {
    pub fn algorithm_id(&self) -> &'static str {
        match self {
            AlgoConfig::Uknn(_) => KNN_ALGORITHM_ID,
            AlgoConfig::BprMf(_) => BPR_ALGORITHM_ID,
            AlgoConfig::NeuMf(_) => NEUMF_ALGORITHM_ID,
        }
    }
}

/// A fitted model plus everything evaluation needs: which users and
/// items it knows (sorted), each user's training profile (for
/// excluding seen items from rankings), and the per-epoch training
/// loss curve (empty for KNN, which has no training loop).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    algorithm_id: String,
    seed: u64,
    users: Vec<u32>,
    items: Vec<u32>,
    user_items: Vec<Vec<u32>>,
    epoch_losses: Vec<f64>,
    state: ModelState,
}

impl TrainedModel {
    pub(crate) fn from_parts(
        algorithm_id: &str,
        seed: u64,
        users: Vec<u32>,
        items: Vec<u32>,
        user_items: Vec<Vec<u32>>,
        epoch_losses: Vec<f64>,
        state: ModelState,
    ) -> Self {
        debug_assert_eq!(users.len(), user_items.len());
        debug_assert!(users.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        TrainedModel {
            algorithm_id: algorithm_id.to_string(),
            seed,
            users,
            items,
            user_items,
            epoch_losses,
            state,
        }
    }

    pub fn algorithm_id(&self) -> &str {
        &self.algorithm_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn known_users(&self) -> &[u32] {
        &self.users
    }

    pub fn known_items(&self) -> &[u32] {
        &self.items
    }

    pub fn user_pos(&self, user: u32) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn item_pos(&self, item: u32) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }

    /// The user's training profile, sorted ascending.
    pub fn user_profile(&self, user: u32) -> Option<&[u32]> {
        self.user_pos(user).map(|pos| self.user_items[pos].as_slice())
    }

    /// Mean training loss per epoch, in epoch order.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }
}

/// Fits the configured algorithm on a training log. The seed
/// overrides whatever the config carries, so callers derive one seed
/// per (algorithm, training set) and the config stays shareable.
pub fn fit(train: &InteractionLog, config: &AlgoConfig, seed: u64) -> Result<TrainedModel> {
    match config {
        AlgoConfig::Uknn(c) => {
            let knn = fit_knn(train, c.k_neighbors, seed)?;
            let users = knn.users().to_vec();
            let user_items = knn.profiles().to_vec();
            let items = train.distinct_items();
            Ok(TrainedModel::from_parts(
                KNN_ALGORITHM_ID,
                seed,
                users,
                items,
                user_items,
                Vec::new(),
                ModelState::Knn(knn),
            ))
        }
        AlgoConfig::BprMf(c) => {
            let mut c = c.clone();
            c.seed = seed;
            bpr::fit_bpr(train, &c)
        }
        AlgoConfig::NeuMf(c) => {
            let mut c = c.clone();
            c.seed = seed;
            neumf::fit_neumf(train, &c)
        }
    }
}

/// Scores one (user, item) pair with whichever algorithm the model
/// holds. Unknown users are errors everywhere; unknown items are an
/// error for the factorization models and score 0 for KNN, which is
/// defined for any item.
pub fn score(model: &TrainedModel, user: u32, item: u32) -> Result<f64> {
    match model.state() {
        ModelState::Knn(m) => crate::knn::score_knn(m, user, item),
        ModelState::BprMf(_) => bpr::score_bpr(model, user, item),
        ModelState::NeuMf(_) => neumf::score_neumf(model, user, item),
    }
}

/// The shared candidate catalog both models are ranked against: every
/// item in the larger training set or either holdout, sorted. Both
/// evaluation phases must use the same catalog so the four scores are
/// comparable.
pub fn build_candidate_catalog(splits: &ExperimentSplits) -> Vec<u32> {
    let mut items: Vec<u32> = Vec::new();
    items.extend(splits.m2_train.iter().map(|it| it.item));
    items.extend(splits.d1_test.iter().map(|it| it.item));
    items.extend(splits.d2_test.iter().map(|it| it.item));
    items.sort_unstable();
    items.dedup();
    items
}

/// One user's ranking: items best first with their scores, already
/// truncated to the requested length.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: u32,
    pub items: Vec<u32>,
    pub scores: Vec<f64>,
}

enum Prep {
    Knn,
    BprMf,
    /// Item halves of the first MLP layer, row-major n_items x h1.
    /// The first-layer pre-activation is the sum of the user half and
    /// the item half in both the single-pair forward pass and here,
    /// so caching the item half per catalog changes no result bits.
    NeuMf { h1: usize, item_acc: Vec<f64> },
}

/// Per-model ranking state that is worth computing once when many
/// users are ranked against the same model.
pub struct EvalContext<'a> {
    model: &'a TrainedModel,
    prep: Prep,
}

enum UserScorer<'c> {
    Knn {
        /// Similarity mass per item id over the user's neighborhood,
        /// accumulated in neighborhood rank order.
        acc: Vec<f64>,
        den: f64,
    },
    BprMf {
        params: &'c MfParams,
        upos: usize,
    },
    NeuMf {
        params: &'c NeuMfParams,
        user_half: Vec<f64>,
        gmf_user: &'c [f64],
        item_acc: &'c [f64],
        h1: usize,
        z1: Vec<f64>,
        gmf: Vec<f64>,
    },
}

impl UserScorer<'_> {
    fn score(&mut self, item: u32, item_pos: usize) -> f64 {
        match self {
            UserScorer::Knn { acc, den } => {
                let _ = item_pos;
                if *den == 0.0 {
                    0.0
                } else {
                    acc.get(item as usize).copied().unwrap_or(0.0) / *den
                }
            }
            UserScorer::BprMf { params, upos } => {
                bpr::dot(params.user_row(*upos), params.item_row(item_pos))
            }
            UserScorer::NeuMf {
                params,
                user_half,
                gmf_user,
                item_acc,
                h1,
                z1,
                gmf,
            } => {
                let row = &item_acc[item_pos * *h1..(item_pos + 1) * *h1];
                for j in 0..*h1 {
                    z1[j] = user_half[j] + row[j];
                }
                let gi = params.gmf_item_row(item_pos);
                for j in 0..params.d_g {
                    gmf[j] = gmf_user[j] * gi[j];
                }
                params.logit_from_layer0(z1, gmf)
            }
        }
    }
}

impl<'a> EvalContext<'a> {
    pub fn new(model: &'a TrainedModel) -> Self {
        let prep = match model.state() {
            ModelState::Knn(_) => Prep::Knn,
            ModelState::BprMf(_) => Prep::BprMf,
            ModelState::NeuMf(params) => {
                let h1 = params.layers[0].out_dim;
                let n_items = model.known_items().len();
                let mut item_acc = vec![0.0; n_items * h1];
                for pos in 0..n_items {
                    params.layer0_item_half(pos, &mut item_acc[pos * h1..(pos + 1) * h1]);
                }
                Prep::NeuMf { h1, item_acc }
            }
        };
        EvalContext { model, prep }
    }

    pub fn model(&self) -> &TrainedModel {
        self.model
    }

    fn user_scorer(&self, upos: usize) -> UserScorer<'_> {
        match (&self.prep, self.model.state()) {
            (Prep::Knn, ModelState::Knn(knn)) => {
                let max_id = self.model.items.last().copied().unwrap_or(0);
                let mut acc = vec![0.0f64; max_id as usize + 1];
                let mut den = 0.0;
                for &(v, sim) in &knn.neighbors(upos) {
                    den += sim;
                    for &it in &knn.profiles()[v] {
                        acc[it as usize] += sim;
                    }
                }
                UserScorer::Knn { acc, den }
            }
            (Prep::BprMf, ModelState::BprMf(params)) => UserScorer::BprMf { params, upos },
            (Prep::NeuMf { h1, item_acc }, ModelState::NeuMf(params)) => {
                let mut user_half = vec![0.0; *h1];
                params.layer0_user_half(upos, &mut user_half);
                UserScorer::NeuMf {
                    params,
                    user_half,
                    gmf_user: params.gmf_user_row(upos),
                    item_acc,
                    h1: *h1,
                    z1: vec![0.0; *h1],
                    gmf: vec![0.0; params.d_g],
                }
            }
            _ => unreachable!("context prep matches model state"),
        }
    }

    /// Ranks the catalog for one user and keeps the best `k` entries.
    ///
    /// The user's own training items are excluded outright. Items the
    /// model has never seen score negative infinity, so they sort
    /// after every known item. The order is total: score descending,
    /// ties by ascending item index. Fewer than `k` candidates yield
    /// a shorter list.
    pub fn rank_top_k(&self, user: u32, catalog: &[u32], k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(SpError::Config("list length k must be at least 1".into()));
        }
        let upos = self
            .model
            .user_pos(user)
            .ok_or_else(|| SpError::Data(format!("unknown user {user}")))?;
        let profile = self.model.user_items[upos].as_slice();
        let mut scorer = self.user_scorer(upos);

        let mut cands: Vec<(u32, f64)> = Vec::with_capacity(catalog.len());
        for &item in catalog {
            if profile.binary_search(&item).is_ok() {
                continue;
            }
            let score = match self.model.item_pos(item) {
                Some(ipos) => scorer.score(item, ipos),
                None => f64::NEG_INFINITY,
            };
            cands.push((item, score));
        }

        let cmp = |a: &(u32, f64), b: &(u32, f64)| {
            b.1.partial_cmp(&a.1)
                .expect("scores are never NaN")
                .then(a.0.cmp(&b.0))
        };
        let k_eff = k.min(cands.len());
        if k_eff < cands.len() {
            cands.select_nth_unstable_by(k_eff - 1, cmp);
            cands.truncate(k_eff);
        }
        cands.sort_by(cmp);

        Ok(RankedList {
            user,
            items: cands.iter().map(|&(i, _)| i).collect(),
            scores: cands.iter().map(|&(_, s)| s).collect(),
        })
    }
}

/// One-off ranking for a single user. When ranking many users against
/// the same model, build one [`EvalContext`] and reuse it instead.
pub fn rank_top_k(
    model: &TrainedModel,
    user: u32,
    catalog: &[u32],
    k: usize,
) -> Result<RankedList> {
    EvalContext::new(model).rank_top_k(user, catalog, k)
}

const MODEL_MAGIC: &[u8; 4] = b"SPBM";
const MODEL_VERSION: u16 = 1;

fn put_u32s(out: &mut Vec<u8>, values: &[u32]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.algorithm_id.len() as u32).to_le_bytes());
    out.extend_from_slice(model.algorithm_id.as_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    put_u32s(&mut out, &model.users);
    put_u32s(&mut out, &model.items);
    for profile in &model.user_items {
        put_u32s(&mut out, profile);
    }
    put_f64s(&mut out, &model.epoch_losses);
    out.push(model.state.tag());
    match &model.state {
        ModelState::Knn(knn) => {
            out.extend_from_slice(&(knn.k_neighbors() as u32).to_le_bytes());
        }
        ModelState::BprMf(params) => {
            out.extend_from_slice(&(params.d as u64).to_le_bytes());
            put_f64s(&mut out, &params.p);
            put_f64s(&mut out, &params.q);
        }
        ModelState::NeuMf(params) => {
            out.extend_from_slice(&(params.d_g as u64).to_le_bytes());
            out.extend_from_slice(&(params.d_m as u64).to_le_bytes());
            put_f64s(&mut out, &params.gmf_user);
            put_f64s(&mut out, &params.gmf_item);
            put_f64s(&mut out, &params.mlp_user);
            put_f64s(&mut out, &params.mlp_item);
            out.extend_from_slice(&(params.layers.len() as u64).to_le_bytes());
            for layer in &params.layers {
                out.extend_from_slice(&(layer.in_dim as u64).to_le_bytes());
                out.extend_from_slice(&(layer.out_dim as u64).to_le_bytes());
                put_f64s(&mut out, &layer.w);
                put_f64s(&mut out, &layer.b);
            }
            put_f64s(&mut out, &params.out_w);
            out.extend_from_slice(&params.out_b.to_bits().to_le_bytes());
        }
    }
    out
}

struct Decoder<'a> {
    buf: &'a [u8],
    off: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.off.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(format!(
                "unexpected end of file at byte {} (wanted {} more)",
                self.off, n
            ));
        };
        let slice = &self.buf[self.off..end];
        self.off = end;
        Ok(slice)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn len(&mut self, what: &str) -> std::result::Result<usize, String> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| format!("{what} length {n} does not fit in memory"))
    }

    fn u32s(&mut self, what: &str) -> std::result::Result<Vec<u32>, String> {
        let n = self.len(what)?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| "length overflow".to_string())?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self, what: &str) -> std::result::Result<Vec<f64>, String> {
        let n = self.len(what)?;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| "length overflow".to_string())?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

fn decode_model(buf: &[u8]) -> std::result::Result<TrainedModel, String> {
    let mut d = Decoder { buf, off: 0 };
    if d.take(4)? != MODEL_MAGIC {
        return Err("not a model file (bad magic)".into());
    }
    let version = d.u16()?;
    if version != MODEL_VERSION {
        return Err(format!(
            "unsupported model format version {version} (this build reads {MODEL_VERSION})"
        ));
    }
    let id_len = d.u32()? as usize;
    let algorithm_id = String::from_utf8(d.take(id_len)?.to_vec())
        .map_err(|_| "algorithm id is not valid UTF-8".to_string())?;
    let seed = d.u64()?;
    let users = d.u32s("users")?;
    let items = d.u32s("items")?;
    if !users.windows(2).all(|w| w[0] < w[1]) {
        return Err("user list is not strictly ascending".into());
    }
    if !items.windows(2).all(|w| w[0] < w[1]) {
        return Err("item list is not strictly ascending".into());
    }
    let mut user_items = Vec::with_capacity(users.len());
    for &user in &users {
        let profile = d.u32s("profile")?;
        if !profile.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("profile of user {user} is not strictly ascending"));
        }
        for &it in &profile {
            if items.binary_search(&it).is_err() {
                return Err(format!("profile of user {user} references unknown item {it}"));
            }
        }
        user_items.push(profile);
    }
    let epoch_losses = d.f64s("epoch losses")?;
    let tag = d.u8()?;
    let state = match tag {
        0 => {
            if algorithm_id != KNN_ALGORITHM_ID {
                return Err(format!("state tag 0 under algorithm {algorithm_id}"));
            }
            let k_neighbors = d.u32()? as usize;
            if k_neighbors == 0 {
                return Err("k_neighbors must be at least 1".into());
            }
            ModelState::Knn(KnnModel::from_parts(
                users.clone(),
                user_items.clone(),
                k_neighbors,
            ))
        }
        1 => {
            if algorithm_id != BPR_ALGORITHM_ID {
                return Err(format!("state tag 1 under algorithm {algorithm_id}"));
            }
            let dim = d.len("factor dimension")?;
            let p = d.f64s("user factors")?;
            let q = d.f64s("item factors")?;
            if dim == 0 || p.len() != users.len() * dim || q.len() != items.len() * dim {
                return Err("factor matrix shapes do not match user/item counts".into());
            }
            ModelState::BprMf(MfParams {
                d: dim,
                n_users: users.len(),
                n_items: items.len(),
                p,
                q,
            })
        }
        2 => {
            if algorithm_id != NEUMF_ALGORITHM_ID {
                return Err(format!("state tag 2 under algorithm {algorithm_id}"));
            }
            let d_g = d.len("d_g")?;
            let d_m = d.len("d_m")?;
            let gmf_user = d.f64s("gmf user embeddings")?;
            let gmf_item = d.f64s("gmf item embeddings")?;
            let mlp_user = d.f64s("mlp user embeddings")?;
            let mlp_item = d.f64s("mlp item embeddings")?;
            let n_layers = d.len("layer count")?;
            if n_layers == 0 {
                return Err("network needs at least one hidden layer".into());
            }
            let mut layers = Vec::with_capacity(n_layers);
            let mut expect_in = 2 * d_m;
            for l in 0..n_layers {
                let in_dim = d.len("layer in_dim")?;
                let out_dim = d.len("layer out_dim")?;
                let w = d.f64s("layer weights")?;
                let b = d.f64s("layer biases")?;
                if in_dim != expect_in || out_dim == 0 {
                    return Err(format!("layer {l} dimensions do not chain"));
                }
                if w.len() != in_dim * out_dim || b.len() != out_dim {
                    return Err(format!("layer {l} weight shapes are inconsistent"));
                }
                expect_in = out_dim;
                layers.push(Layer {
                    in_dim,
                    out_dim,
                    w,
                    b,
                });
            }
            let out_w = d.f64s("head weights")?;
            let out_b = d.f64()?;
            if d_g == 0
                || d_m == 0
                || gmf_user.len() != users.len() * d_g
                || gmf_item.len() != items.len() * d_g
                || mlp_user.len() != users.len() * d_m
                || mlp_item.len() != items.len() * d_m
                || out_w.len() != d_g + expect_in
            {
                return Err("network shapes do not match user/item counts".into());
            }
            ModelState::NeuMf(NeuMfParams {
                d_g,
                d_m,
                n_users: users.len(),
                n_items: items.len(),
                gmf_user,
                gmf_item,
                mlp_user,
                mlp_item,
                layers,
                out_w,
                out_b,
            })
        }
        other => return Err(format!("unknown state tag {other}")),
    };
    if d.off != buf.len() {
        return Err(format!("{} trailing bytes after model data", buf.len() - d.off));
    }
    Ok(TrainedModel {
        algorithm_id,
        seed,
        users,
        items,
        user_items,
        epoch_losses,
        state,
    })
}

/// Writes the model to a versioned binary file.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model);
    let mut file = File::create(path).map_err(|e| SpError::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| SpError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads a model back; the loaded model scores bit-for-bit like the
/// one that was saved.
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| SpError::io(path.display().to_string(), e))?;
    decode_model(&bytes).map_err(|message| SpError::ModelFormat {
        path: path.display().to_string(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;

    fn log(rows: &[(u32, u32)]) -> InteractionLog {
        InteractionLog::from_unsorted(
            rows.iter()
                .enumerate()
                .map(|(t, &(u, i))| Interaction::new(u, i, t as i64))
                .collect(),
        )
    }

    fn train_log() -> InteractionLog {
        log(&[
            (0, 0),
            (0, 1),
            (0, 2),
            (1, 0),
            (1, 1),
            (1, 3),
            (2, 2),
            (2, 3),
            (2, 4),
            (3, 0),
            (3, 4),
            (3, 5),
        ])
    }

    fn all_configs() -> Vec<AlgoConfig> {
        vec![
            AlgoConfig::Uknn(KnnConfig { k_neighbors: 3 }),
            AlgoConfig::BprMf(BprConfig {
                d: 4,
                epochs: 5,
                ..BprConfig::default()
            }),
            AlgoConfig::NeuMf(NeuMfConfig {
                d_g: 3,
                d_m: 3,
                hidden: vec![5, 3],
                negatives_per_positive: 2,
                epochs: 3,
                learning_rate: 0.05,
                ..NeuMfConfig::default()
            }),
        ]
    }

    #[test]
    fn catalog_is_sorted_union_of_training_and_holdout_items() {
        let splits = ExperimentSplits {
            d1_train: log(&[(0, 1)]),
            d1_test: log(&[(0, 9)]),
            d2_train: log(&[(1, 3)]),
            d2_test: log(&[(1, 7)]),
            m1_train: log(&[(0, 1)]),
            m2_train: log(&[(0, 1), (1, 3), (0, 5)]),
        };
        assert_eq!(build_candidate_catalog(&splits), vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn batch_ranking_scores_equal_single_pair_scores_bitwise() {
        let train = train_log();
        let mut catalog = train.distinct_items();
        catalog.extend([40, 41]); // unseen by every model
        for config in all_configs() {
            let model = fit(&train, &config, 7).unwrap();
            let ctx = EvalContext::new(&model);
            for &user in model.known_users() {
                let ranked = ctx.rank_top_k(user, &catalog, catalog.len()).unwrap();
                let profile = model.user_profile(user).unwrap();
                assert_eq!(
                    ranked.items.len(),
                    catalog.len() - profile.len(),
                    "{} filters exactly the training items",
                    config.algorithm_id()
                );
                for (&item, &s) in ranked.items.iter().zip(&ranked.scores) {
                    if model.item_pos(item).is_some() {
                        let single = score(&model, user, item).unwrap();
                        assert!(
                            s == single,
                            "{} user {user} item {item}: batch {s} single {single}",
                            config.algorithm_id()
                        );
                    } else {
                        assert_eq!(s, f64::NEG_INFINITY);
                    }
                }
            }
        }
    }

    #[test]
    fn unseen_catalog_items_rank_last_in_ascending_index_order() {
        let model = fit(&train_log(), &AlgoConfig::Uknn(KnnConfig::default()), 0).unwrap();
        let catalog = vec![0, 1, 2, 3, 4, 5, 77, 50, 60];
        let ranked = rank_top_k(&model, 0, &catalog, 9).unwrap();
        assert_eq!(&ranked.items[ranked.items.len() - 3..], &[50, 60, 77]);
        assert!(ranked.scores[ranked.scores.len() - 3..]
            .iter()
            .all(|&s| s == f64::NEG_INFINITY));
    }

    #[test]
    fn equal_scores_break_ties_by_ascending_item_index() {
        // user 9 interacts with item 0 only; its single neighbor owns
        // items 1 and 2 too, so both score identically for user 9
        let model = fit(
            &log(&[(9, 0), (8, 0), (8, 1), (8, 2)]),
            &AlgoConfig::Uknn(KnnConfig::default()),
            0,
        )
        .unwrap();
        let ranked = rank_top_k(&model, 9, &[2, 1, 0], 3).unwrap();
        assert_eq!(ranked.items, vec![1, 2]);
        assert_eq!(ranked.scores[0], ranked.scores[1]);
    }

    #[test]
    fn catalog_order_does_not_change_the_ranking() {
        let train = train_log();
        for config in all_configs() {
            let model = fit(&train, &config, 3).unwrap();
            let forward: Vec<u32> = (0..8).collect();
            let mut backward = forward.clone();
            backward.reverse();
            let ctx = EvalContext::new(&model);
            for &user in model.known_users() {
                let a = ctx.rank_top_k(user, &forward, 4).unwrap();
                let b = ctx.rank_top_k(user, &backward, 4).unwrap();
                assert_eq!(a, b, "{}", config.algorithm_id());
            }
        }
    }

    #[test]
    fn shorter_k_yields_a_prefix_of_longer_k() {
        let train = train_log();
        for config in all_configs() {
            let model = fit(&train, &config, 5).unwrap();
            let catalog = train.distinct_items();
            let ctx = EvalContext::new(&model);
            let long = ctx.rank_top_k(1, &catalog, catalog.len()).unwrap();
            for k in 1..=long.items.len() {
                let short = ctx.rank_top_k(1, &catalog, k).unwrap();
                assert_eq!(short.items[..], long.items[..k]);
                assert_eq!(short.scores[..], long.scores[..k]);
            }
        }
    }

    #[test]
    fn k_larger_than_candidates_returns_all_candidates() {
        let model = fit(&train_log(), &AlgoConfig::Uknn(KnnConfig::default()), 0).unwrap();
        let ranked = rank_top_k(&model, 0, &[0, 1, 2, 3], 100).unwrap();
        // user 0 owns 0, 1, 2 so only item 3 is rankable
        assert_eq!(ranked.items, vec![3]);
    }

    #[test]
    fn zero_k_and_unknown_user_are_errors() {
        let model = fit(&train_log(), &AlgoConfig::Uknn(KnnConfig::default()), 0).unwrap();
        assert!(matches!(
            rank_top_k(&model, 0, &[0], 0),
            Err(SpError::Config(_))
        ));
        assert!(matches!(
            rank_top_k(&model, 42, &[0], 1),
            Err(SpError::Data(_))
        ));
    }

    #[test]
    fn save_and_load_round_trips_every_model_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let train = train_log();
        for config in all_configs() {
            let model = fit(&train, &config, 11).unwrap();
            let path = dir.path().join(format!("{}.model", config.algorithm_id()));
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded, model, "{}", config.algorithm_id());
            for &user in model.known_users() {
                for &item in model.known_items() {
                    let a = score(&model, user, item).unwrap();
                    let b = score(&loaded, user, item).unwrap();
                    assert!(a == b, "score drift after reload: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn loading_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let model = fit(&train_log(), &AlgoConfig::Uknn(KnnConfig::default()), 0).unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let bad_magic = {
            let mut b = good.clone();
            b[0] = b'X';
            b
        };
        let truncated = good[..good.len() - 3].to_vec();
        let trailing = {
            let mut b = good.clone();
            b.push(0);
            b
        };
        let bad_version = {
            let mut b = good.clone();
            b[4] = 99;
            b
        };
        for (name, bytes) in [
            ("magic", bad_magic),
            ("truncated", truncated),
            ("trailing", trailing),
            ("version", bad_version),
        ] {
            std::fs::write(&path, &bytes).unwrap();
            let err = load_model(&path).unwrap_err();
            assert!(
                matches!(err, SpError::ModelFormat { .. }),
                "{name}: {err:?}"
            );
        }
    }

    #[test]
    fn score_dispatch_rejects_unknown_users() {
        for config in all_configs() {
            let model = fit(&train_log(), &config, 1).unwrap();
            assert!(score(&model, 999, 0).is_err(), "{}", config.algorithm_id());
        }
    }
}
