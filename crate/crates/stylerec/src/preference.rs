//! Pairwise preference ranking: BPR, VBPR and the style-subtraction model.
//!
//! All three variants score a user/item pair with a dot product between the
//! user vector and an item representation:
//!   BPR:        q_i
//!   VBPR:       E v_i + q_i
//!   DeepStyle:  E v_i - l_{cat(i)} + q_i
//! and are trained by SGD on the pairwise log-sigmoid objective with one
//! uniformly sampled negative per positive.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Catalog, Interaction};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::linalg::{axpy, dot, log1p_exp_neg, sigmoid, sq_norm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefVariant {
    Bpr,
    Vbpr,
    DeepStyle,
}

impl PrefVariant {
    pub fn uses_features(self) -> bool {
        !matches!(self, PrefVariant::Bpr)
    }

    pub fn name(self) -> &'static str {
        match self {
            PrefVariant::Bpr => "bpr",
            PrefVariant::Vbpr => "vbpr",
            PrefVariant::DeepStyle => "deepstyle",
        }
    }
}

/// Trainable parameters shared by all preference variants. `embed` is d x F
/// (F = 0 for BPR); the embedding tables hold one row per entity.
#[derive(Debug, Clone)]
pub struct DeepStyleParams {
    pub variant: PrefVariant,
    pub d: usize,
    pub feat_dim: usize,
    pub embed: Mat,
    pub cat_vecs: Mat,
    pub user_vecs: Mat,
    pub item_vecs: Mat,
}

#[derive(Debug, Clone)]
pub struct PrefTrainConfig {
    pub d: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for PrefTrainConfig {
    fn default() -> Self {
        PrefTrainConfig {
            d: 10,
            learning_rate: 0.01,
            lambda: 0.01,
            epochs: 20,
            seed: 42,
            init_scale: 0.01,
        }
    }
}

/// A (user, positive item, negative item) training instance.
#[derive(Debug, Clone, Copy)]
pub struct Triple {
    pub user: usize,
    pub pos_item: usize,
    pub neg_item: usize,
}

/// Per-item side information needed for scoring.
#[derive(Debug, Clone, Copy)]
pub struct ItemData<'a> {
    pub features: Option<&'a FeatureStore>,
    pub item_category: &'a [usize],
}

impl<'a> ItemData<'a> {
    fn feature_row(&self, item: usize) -> Result<&'a [f32]> {
        match self.features {
            Some(f) => f.row(item),
            None => Err(Error::Data("no feature store loaded".into())),
        }
    }
}

impl DeepStyleParams {
    pub fn init(
        variant: PrefVariant,
        n_users: usize,
        n_items: usize,
        n_categories: usize,
        feat_dim: usize,
        config: &PrefTrainConfig,
    ) -> Self {
        let feat_dim = if variant.uses_features() { feat_dim } else { 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let s = config.init_scale;
        DeepStyleParams {
            variant,
            d,
            feat_dim,
            embed: Mat::uniform(d, feat_dim, s, &mut rng),
            cat_vecs: Mat::uniform(n_categories, d, s, &mut rng),
            user_vecs: Mat::uniform(n_users, d, s, &mut rng),
            item_vecs: Mat::uniform(n_items, d, s, &mut rng),
        }
    }

    /// E v_i as f64.
    fn embedded_feature(&self, data: &ItemData, item: usize) -> Result<Vec<f64>> {
        let v = data.feature_row(item)?;
        if v.len() != self.feat_dim {
            return Err(Error::Dimension(format!(
                "feature dim {} does not match model feat_dim {}",
                v.len(),
                self.feat_dim
            )));
        }
        let mut out = vec![0.0; self.d];
        for r in 0..self.d {
            let row = self.embed.row(r);
            let mut acc = 0.0;
            for (c, feat) in v.iter().enumerate() {
                acc += row[c] * *feat as f64;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// s_i = E v_i - l_{cat(i)}.
    pub fn style_feature(&self, data: &ItemData, item: usize) -> Result<Vec<f64>> {
        let mut s = self.embedded_feature(data, item)?;
        axpy(&mut s, -1.0, self.cat_vecs.row(data.item_category[item]));
        Ok(s)
    }

    /// The variant-specific item representation the user vector is dotted with.
    pub fn item_repr(&self, data: &ItemData, item: usize) -> Result<Vec<f64>> {
        let mut repr = match self.variant {
            PrefVariant::Bpr => vec![0.0; self.d],
            PrefVariant::Vbpr => self.embedded_feature(data, item)?,
            PrefVariant::DeepStyle => self.style_feature(data, item)?,
        };
        axpy(&mut repr, 1.0, self.item_vecs.row(item));
        Ok(repr)
    }

    /// Representations for every item; used by evaluation and export.
    pub fn all_item_reprs(&self, data: &ItemData) -> Result<Vec<Vec<f64>>> {
        (0..self.item_vecs.rows).map(|i| self.item_repr(data, i)).collect()
    }

    pub fn score(&self, data: &ItemData, user: usize, item: usize) -> Result<f64> {
        Ok(dot(self.user_vecs.row(user), &self.item_repr(data, item)?))
    }
}

/// g(a - b) with g the logistic function.
pub fn pair_probability(score_pos: f64, score_neg: f64) -> f64 {
    sigmoid(score_pos - score_neg)
}

/// Full-shape gradient of the per-triple loss, plus the loss value.
#[derive(Debug, Clone)]
pub struct PrefGrads {
    pub embed: Mat,
    pub cat_vecs: Mat,
    pub user_vecs: Mat,
    pub item_vecs: Mat,
}

impl PrefGrads {
    fn zeros_like(p: &DeepStyleParams) -> Self {
        PrefGrads {
            embed: Mat::zeros(p.embed.rows, p.embed.cols),
            cat_vecs: Mat::zeros(p.cat_vecs.rows, p.cat_vecs.cols),
            user_vecs: Mat::zeros(p.user_vecs.rows, p.user_vecs.cols),
            item_vecs: Mat::zeros(p.item_vecs.rows, p.item_vecs.cols),
        }
    }
}

/// ln(1 + e^{-(y_ui - y_ui')}) + (lambda/2) * squared norm of the parameters
/// this triple touches.
pub fn triple_loss(
    params: &DeepStyleParams,
    data: &ItemData,
    triple: &Triple,
    lambda: f64,
) -> Result<f64> {
    let y_pos = params.score(data, triple.user, triple.pos_item)?;
    let y_neg = params.score(data, triple.user, triple.neg_item)?;
    let mut reg = sq_norm(params.user_vecs.row(triple.user))
        + sq_norm(params.item_vecs.row(triple.pos_item))
        + sq_norm(params.item_vecs.row(triple.neg_item));
    if params.variant.uses_features() {
        reg += params.embed.sq_norm();
    }
    if params.variant == PrefVariant::DeepStyle {
        let cp = data.item_category[triple.pos_item];
        let cn = data.item_category[triple.neg_item];
        reg += sq_norm(params.cat_vecs.row(cp));
        if cn != cp {
            reg += sq_norm(params.cat_vecs.row(cn));
        }
    }
    Ok(log1p_exp_neg(y_pos - y_neg) + 0.5 * lambda * reg)
}

/// Analytic gradient of `triple_loss` with respect to every parameter.
pub fn triple_grads(
    params: &DeepStyleParams,
    data: &ItemData,
    triple: &Triple,
    lambda: f64,
) -> Result<(f64, PrefGrads)> {
    let u = triple.user;
    let (i, j) = (triple.pos_item, triple.neg_item);
    let repr_pos = params.item_repr(data, i)?;
    let repr_neg = params.item_repr(data, j)?;
    let p_u = params.user_vecs.row(u);
    let margin = dot(p_u, &repr_pos) - dot(p_u, &repr_neg);
    // d/dx ln(1 + e^{-x}) = -sigmoid(-x)
    let coeff = -sigmoid(-margin);

    let mut g = PrefGrads::zeros_like(params);

    // user vector: coeff * (repr_pos - repr_neg) + lambda * p_u
    {
        let gu = g.user_vecs.row_mut(u);
        for k in 0..params.d {
            gu[k] = coeff * (repr_pos[k] - repr_neg[k]) + lambda * p_u[k];
        }
    }
    // item vectors: +-coeff * p_u + lambda * q
    {
        let gi = g.item_vecs.row_mut(i);
        let qi = params.item_vecs.row(i);
        for k in 0..params.d {
            gi[k] = coeff * p_u[k] + lambda * qi[k];
        }
    }
    {
        let gj = g.item_vecs.row_mut(j);
        let qj = params.item_vecs.row(j);
        for k in 0..params.d {
            gj[k] += -coeff * p_u[k] + lambda * qj[k];
        }
    }
    if params.variant == PrefVariant::DeepStyle {
        // style subtraction flips the sign: d margin / d l_cp = -p_u
        let cp = data.item_category[i];
        let cn = data.item_category[j];
        {
            let gc = g.cat_vecs.row_mut(cp);
            axpy(gc, -coeff, p_u);
        }
        {
            let gc = g.cat_vecs.row_mut(cn);
            axpy(gc, coeff, p_u);
        }
        for c in [cp, cn] {
            let reg_row = params.cat_vecs.row(c).to_vec();
            axpy(g.cat_vecs.row_mut(c), lambda, &reg_row);
            if cp == cn {
                break;
            }
        }
    }
    if params.variant.uses_features() {
        let v_pos = data.feature_row(i)?;
        let v_neg = data.feature_row(j)?;
        let diff: Vec<f64> = v_pos
            .iter()
            .zip(v_neg)
            .map(|(a, b)| *a as f64 - *b as f64)
            .collect();
        g.embed.add_outer(coeff, p_u, &diff);
        for (ge, e) in g.embed.data.iter_mut().zip(&params.embed.data) {
            *ge += lambda * e;
        }
    }

    let loss = triple_loss(params, data, triple, lambda)?;
    Ok((loss, g))
}

/// One SGD update on the parameters touched by `triple`. Returns the loss
/// at the pre-update parameters.
pub fn sgd_step(
    params: &mut DeepStyleParams,
    data: &ItemData,
    triple: &Triple,
    learning_rate: f64,
    lambda: f64,
) -> Result<f64> {
    let (loss, g) = triple_grads(params, data, triple, lambda)?;
    let eta = learning_rate;
    axpy(params.user_vecs.row_mut(triple.user), -eta, g.user_vecs.row(triple.user));
    axpy(params.item_vecs.row_mut(triple.pos_item), -eta, g.item_vecs.row(triple.pos_item));
    axpy(params.item_vecs.row_mut(triple.neg_item), -eta, g.item_vecs.row(triple.neg_item));
    if params.variant == PrefVariant::DeepStyle {
        let cp = data.item_category[triple.pos_item];
        let cn = data.item_category[triple.neg_item];
        axpy(params.cat_vecs.row_mut(cp), -eta, g.cat_vecs.row(cp));
        if cn != cp {
            axpy(params.cat_vecs.row_mut(cn), -eta, g.cat_vecs.row(cn));
        }
    }
    if params.variant.uses_features() {
        for (e, ge) in params.embed.data.iter_mut().zip(&g.embed.data) {
            *e -= eta * ge;
        }
    }
    Ok(loss)
}

/// Uniform over the items the user never selected, by rejection.
pub fn sample_negative<R: Rng>(
    rng: &mut R,
    user_items: &HashSet<usize>,
    n_items: usize,
) -> Result<usize> {
    if user_items.len() >= n_items {
        return Err(Error::Data("user has selected every item".into()));
    }
    loop {
        let candidate = rng.gen_range(0..n_items);
        if !user_items.contains(&candidate) {
            return Ok(candidate);
        }
    }
}

/// SGD training over the train interactions: shuffled positives, one
/// sampled negative each, per epoch. Returns the model and per-epoch mean
/// triple losses.
pub fn train_preference(
    catalog: &Catalog,
    train: &[Interaction],
    features: Option<&FeatureStore>,
    config: &PrefTrainConfig,
    variant: PrefVariant,
) -> Result<(DeepStyleParams, Vec<f64>)> {
    let feat_dim = match (variant.uses_features(), features) {
        (true, Some(f)) => {
            if f.n_items() != catalog.n_items() {
                return Err(Error::Dimension(format!(
                    "feature store has {} rows, catalog has {} items",
                    f.n_items(),
                    catalog.n_items()
                )));
            }
            f.dim()
        }
        (true, None) => {
            return Err(Error::Data(format!(
                "variant {} requires a feature store",
                variant.name()
            )))
        }
        (false, _) => 0,
    };
    let mut params = DeepStyleParams::init(
        variant,
        catalog.n_users(),
        catalog.n_items(),
        catalog.n_categories(),
        feat_dim,
        config,
    );
    let data = ItemData {
        features: if variant.uses_features() { features } else { None },
        item_category: &catalog.item_category,
    };
    let user_sets = crate::data::user_item_sets(train, catalog.n_users());
    let n_items = catalog.n_items();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &idx in &order {
            let it = &train[idx];
            let neg = sample_negative(&mut rng, &user_sets[it.user], n_items)?;
            let triple = Triple { user: it.user, pos_item: it.item, neg_item: neg };
            loss_sum += sgd_step(&mut params, &data, &triple, config.learning_rate, config.lambda)?;
        }
        epoch_losses.push(loss_sum / train.len().max(1) as f64);
    }
    Ok((params, epoch_losses))
}

fn param_blocks(p: &mut DeepStyleParams) -> [&mut Mat; 4] {
    [&mut p.embed, &mut p.cat_vecs, &mut p.user_vecs, &mut p.item_vecs]
}

fn grad_blocks(g: &PrefGrads) -> [&Mat; 4] {
    [&g.embed, &g.cat_vecs, &g.user_vecs, &g.item_vecs]
}

/// Max relative error between analytic and central-finite-difference
/// gradients over every parameter coordinate. `fault_scale` multiplies the
/// analytic positive-item gradient block, as a self-test hook.
pub fn gradcheck_preference(
    params: &DeepStyleParams,
    data: &ItemData,
    triple: &Triple,
    lambda: f64,
    epsilon: f64,
    fault_scale: Option<f64>,
) -> Result<f64> {
    let (_, mut analytic) = triple_grads(params, data, triple, lambda)?;
    if let Some(s) = fault_scale {
        for v in analytic.item_vecs.row_mut(triple.pos_item) {
            *v *= s;
        }
    }
    let mut work = params.clone();
    let mut max_err: f64 = 0.0;
    for b in 0..4 {
        let n = grad_blocks(&analytic)[b].data.len();
        for k in 0..n {
            let orig = param_blocks(&mut work)[b].data[k];
            param_blocks(&mut work)[b].data[k] = orig + epsilon;
            let up = triple_loss(&work, data, triple, lambda)?;
            param_blocks(&mut work)[b].data[k] = orig - epsilon;
            let down = triple_loss(&work, data, triple, lambda)?;
            param_blocks(&mut work)[b].data[k] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = grad_blocks(&analytic)[b].data[k];
            let denom = (a.abs() + numeric.abs()).max(1e-8);
            max_err = max_err.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureStore;

    fn small_instance(variant: PrefVariant, seed: u64) -> (DeepStyleParams, FeatureStore, Vec<usize>) {
        let d = 4;
        let feat_dim = 8;
        let n_users = 3;
        let n_items = 6;
        let n_categories = 3;
        let config = PrefTrainConfig { d, seed, init_scale: 0.5, ..Default::default() };
        let params = DeepStyleParams::init(variant, n_users, n_items, n_categories, feat_dim, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
        let rows: Vec<f32> = (0..n_items * feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let features = FeatureStore::new(feat_dim, rows).unwrap();
        let item_category: Vec<usize> = (0..n_items).map(|i| i % n_categories).collect();
        (params, features, item_category)
    }

    #[test]
    fn style_feature_zero_category_is_pure_embedding() {
        let (mut params, features, cats) = small_instance(PrefVariant::DeepStyle, 1);
        params.cat_vecs = Mat::zeros(params.cat_vecs.rows, params.cat_vecs.cols);
        let data = ItemData { features: Some(&features), item_category: &cats };
        let s = params.style_feature(&data, 0).unwrap();
        let e = params.embedded_feature(&data, 0).unwrap();
        assert_eq!(s, e);
    }

    #[test]
    fn style_feature_zero_embedding_is_negated_category() {
        let (mut params, features, cats) = small_instance(PrefVariant::DeepStyle, 2);
        params.embed = Mat::zeros(params.embed.rows, params.embed.cols);
        let data = ItemData { features: Some(&features), item_category: &cats };
        let s = params.style_feature(&data, 1).unwrap();
        let l = params.cat_vecs.row(cats[1]);
        for (a, b) in s.iter().zip(l) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn style_feature_matches_triple_loop_oracle() {
        let (params, features, cats) = small_instance(PrefVariant::DeepStyle, 3);
        let data = ItemData { features: Some(&features), item_category: &cats };
        for item in 0..6 {
            let s = params.style_feature(&data, item).unwrap();
            let v = features.row(item).unwrap();
            for r in 0..params.d {
                let mut acc = 0.0;
                for c in 0..params.feat_dim {
                    acc += params.embed.data[r * params.feat_dim + c] * v[c] as f64;
                }
                acc -= params.cat_vecs.row(cats[item])[r];
                assert!((s[r] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_user_vector_scores_zero_for_all_variants() {
        for variant in [PrefVariant::Bpr, PrefVariant::Vbpr, PrefVariant::DeepStyle] {
            let (mut params, features, cats) = small_instance(variant, 4);
            for v in params.user_vecs.row_mut(0) {
                *v = 0.0;
            }
            let data = ItemData {
                features: variant.uses_features().then_some(&features),
                item_category: &cats,
            };
            assert_eq!(params.score(&data, 0, 2).unwrap(), 0.0);
        }
    }

    #[test]
    fn deepstyle_with_zero_categories_reduces_to_vbpr() {
        let (mut ds, features, cats) = small_instance(PrefVariant::DeepStyle, 5);
        ds.cat_vecs = Mat::zeros(ds.cat_vecs.rows, ds.cat_vecs.cols);
        let mut vbpr = ds.clone();
        vbpr.variant = PrefVariant::Vbpr;
        let data = ItemData { features: Some(&features), item_category: &cats };
        for u in 0..3 {
            for i in 0..6 {
                assert_eq!(ds.score(&data, u, i).unwrap(), vbpr.score(&data, u, i).unwrap());
            }
        }
    }

    #[test]
    fn pair_probability_basics() {
        assert!((pair_probability(1.3, 1.3) - 0.5).abs() < 1e-15);
        assert!(pair_probability(60.0, 0.0) > 0.999_999);
        let p = pair_probability(0.0, 50.0);
        assert!(p > 0.0 && p.is_finite());
        // log1p-form loss stays finite where naive exp would overflow
        assert!(log1p_exp_neg(-50.0).is_finite());
    }

    #[test]
    fn pair_probability_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(-30.0..30.0);
            let b: f64 = rng.gen_range(-30.0..30.0);
            assert!((pair_probability(a, b) + pair_probability(b, a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triple_loss_equal_scores_is_ln2() {
        let (mut params, features, cats) = small_instance(PrefVariant::DeepStyle, 6);
        // same item twice would break i != i'; instead force equal scores by
        // zeroing the user vector.
        for v in params.user_vecs.row_mut(0) {
            *v = 0.0;
        }
        let data = ItemData { features: Some(&features), item_category: &cats };
        let t = Triple { user: 0, pos_item: 0, neg_item: 1 };
        let loss = triple_loss(&params, &data, &t, 0.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn triple_loss_matches_direct_formula() {
        let (params, features, cats) = small_instance(PrefVariant::DeepStyle, 7);
        let data = ItemData { features: Some(&features), item_category: &cats };
        // items 2 and 4 live in different categories
        assert_ne!(cats[2], cats[4]);
        let t = Triple { user: 1, pos_item: 2, neg_item: 4 };
        let lambda = 0.03;
        let y_pos = params.score(&data, 1, 2).unwrap();
        let y_neg = params.score(&data, 1, 4).unwrap();
        let mut expected = (1.0 + (-(y_pos - y_neg)).exp()).ln();
        expected += 0.5 * lambda
            * (sq_norm(params.user_vecs.row(1))
                + sq_norm(params.item_vecs.row(2))
                + sq_norm(params.item_vecs.row(4))
                + sq_norm(params.cat_vecs.row(cats[2]))
                + sq_norm(params.cat_vecs.row(cats[4]))
                + params.embed.sq_norm());
        let loss = triple_loss(&params, &data, &t, lambda).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_sampling_avoids_user_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let user_items: HashSet<usize> = [0, 1, 2].into_iter().collect();
        for _ in 0..1000 {
            let neg = sample_negative(&mut rng, &user_items, 5).unwrap();
            assert!(!user_items.contains(&neg));
        }
        // all but one item selected -> the remaining one always comes back
        let almost_all: HashSet<usize> = (0..4).collect();
        for _ in 0..50 {
            assert_eq!(sample_negative(&mut rng, &almost_all, 5).unwrap(), 4);
        }
        let all: HashSet<usize> = (0..5).collect();
        assert!(sample_negative(&mut rng, &all, 5).is_err());
    }

    #[test]
    fn negative_sampling_is_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let user_items: HashSet<usize> = [1, 3].into_iter().collect();
        let n_items = 10;
        let draws = 100_000usize;
        let mut counts = vec![0usize; n_items];
        for _ in 0..draws {
            counts[sample_negative(&mut rng, &user_items, n_items).unwrap()] += 1;
        }
        let expected = draws as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| !user_items.contains(i))
            .map(|(_, &c)| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 7 dof, p = 0.001 critical value is about 24.3
        assert!(chi2 < 24.3, "chi2 = {chi2}");
    }

    #[test]
    fn gradcheck_passes_for_all_variants() {
        for variant in [PrefVariant::Bpr, PrefVariant::Vbpr, PrefVariant::DeepStyle] {
            for lambda in [0.0, 0.01] {
                let (params, features, cats) = small_instance(variant, 21);
                let data = ItemData {
                    features: variant.uses_features().then_some(&features),
                    item_category: &cats,
                };
                let t = Triple { user: 2, pos_item: 1, neg_item: 4 };
                let err =
                    gradcheck_preference(&params, &data, &t, lambda, 1e-5, None).unwrap();
                assert!(err < 1e-4, "{} lambda={lambda}: err={err}", variant.name());
            }
        }
    }

    #[test]
    fn gradcheck_same_category_triple() {
        let (params, features, cats) = small_instance(PrefVariant::DeepStyle, 22);
        let data = ItemData { features: Some(&features), item_category: &cats };
        // items 0 and 3 share category 0
        let t = Triple { user: 0, pos_item: 0, neg_item: 3 };
        let err = gradcheck_preference(&params, &data, &t, 0.01, 1e-5, None).unwrap();
        assert!(err < 1e-4, "err={err}");
    }

    #[test]
    fn gradcheck_detects_scaled_gradient() {
        let (params, features, cats) = small_instance(PrefVariant::DeepStyle, 23);
        let data = ItemData { features: Some(&features), item_category: &cats };
        let t = Triple { user: 1, pos_item: 0, neg_item: 5 };
        let err = gradcheck_preference(&params, &data, &t, 0.0, 1e-5, Some(2.0)).unwrap();
        assert!((err - 1.0 / 3.0).abs() < 1e-3, "expected ~1/3, got {err}");
    }

    #[test]
    fn sgd_step_decreases_fresh_triple_loss() {
        let (mut params, features, cats) = small_instance(PrefVariant::DeepStyle, 24);
        let data = ItemData { features: Some(&features), item_category: &cats };
        let t = Triple { user: 0, pos_item: 2, neg_item: 3 };
        let before = triple_loss(&params, &data, &t, 0.01).unwrap();
        sgd_step(&mut params, &data, &t, 1e-4, 0.01).unwrap();
        let after = triple_loss(&params, &data, &t, 0.01).unwrap();
        assert!(after < before, "loss {before} -> {after}");
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let (_, features, cats) = small_instance(PrefVariant::DeepStyle, 25);
        let catalog = Catalog {
            user_ids: (0..3).map(|u| format!("u{u}")).collect(),
            item_ids: (0..6).map(|i| format!("i{i}")).collect(),
            category_ids: (0..3).map(|c| format!("c{c}")).collect(),
            item_category: cats.clone(),
        };
        let train = vec![Interaction { user: 0, item: 0, category: 0, timestamp: 0 }];
        let config = PrefTrainConfig { d: 4, epochs: 0, seed: 9, ..Default::default() };
        let (trained, losses) =
            train_preference(&catalog, &train, Some(&features), &config, PrefVariant::DeepStyle)
                .unwrap();
        let init =
            DeepStyleParams::init(PrefVariant::DeepStyle, 3, 6, 3, features.dim(), &config);
        assert_eq!(trained.embed, init.embed);
        assert_eq!(trained.user_vecs, init.user_vecs);
        assert!(losses.is_empty());
    }

    #[test]
    fn training_is_deterministic_for_fixed_seed() {
        let (_, features, cats) = small_instance(PrefVariant::Vbpr, 26);
        let catalog = Catalog {
            user_ids: (0..3).map(|u| format!("u{u}")).collect(),
            item_ids: (0..6).map(|i| format!("i{i}")).collect(),
            category_ids: (0..3).map(|c| format!("c{c}")).collect(),
            item_category: cats,
        };
        let mut train = Vec::new();
        for u in 0..3usize {
            for k in 0..5usize {
                train.push(Interaction {
                    user: u,
                    item: (u + k) % 6,
                    category: (u + k) % 3,
                    timestamp: k as i64,
                });
            }
        }
        let config = PrefTrainConfig { d: 4, epochs: 3, seed: 77, ..Default::default() };
        let (a, la) =
            train_preference(&catalog, &train, Some(&features), &config, PrefVariant::Vbpr).unwrap();
        let (b, lb) =
            train_preference(&catalog, &train, Some(&features), &config, PrefVariant::Vbpr).unwrap();
        assert_eq!(a.item_vecs.data, b.item_vecs.data);
        assert_eq!(a.embed.data, b.embed.data);
        assert_eq!(la, lb);
    }
}
