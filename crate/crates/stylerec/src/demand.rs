//! Category demand prediction: a plain GRU baseline and the context-aware
//! CA-GRU cell, trained with full backpropagation through time.
//!
//! The CA-GRU update gate sees input and transition contexts, the reset gate
//! sees transition contexts, and an extra activation gate (input contexts
//! only) modulates the category embedding inside the candidate state. At
//! prediction time two more gates, driven purely by the next step's
//! contexts, modulate the hidden state and the candidate category embedding
//! before the bilinear score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{SequenceStep, UserSequence, INPUT_CONTEXTS, TRANSITION_CONTEXTS};
use crate::error::{Error, Result};
use crate::linalg::{axpy, hadamard, sigmoid, Mat};
use crate::preference::DeepStyleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandKind {
    Gru,
    CaGru,
}

impl DemandKind {
    pub fn name(self) -> &'static str {
        match self {
            DemandKind::Gru => "gru",
            DemandKind::CaGru => "cagru",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruParams {
    pub d: usize,
    pub w_z: Mat,
    pub w_r: Mat,
    pub w_h: Mat,
    pub m_z: Mat,
    pub m_r: Mat,
    pub m_h: Mat,
    /// One d-vector per category.
    pub cat_embed: Mat,
}

#[derive(Debug, Clone)]
pub struct CaGruParams {
    pub d: usize,
    pub w_z: Mat,
    pub w_a: Mat,
    pub w_r: Mat,
    pub w_h: Mat,
    pub m_z: Mat,
    pub m_a: Mat,
    pub m_r: Mat,
    pub m_h: Mat,
    pub i_z: Mat,
    pub i_a: Mat,
    pub t_z: Mat,
    pub t_r: Mat,
    /// Prediction-time activation gate weights (input contexts).
    pub pred_i_a: Mat,
    /// Prediction-time reset gate weights (transition contexts).
    pub pred_t_r: Mat,
    pub cat_embed: Mat,
    /// 84 input-context embeddings.
    pub input_ctx: Mat,
    /// 11 transition-context embeddings.
    pub trans_ctx: Mat,
}

#[derive(Debug, Clone)]
pub enum DemandModel {
    Gru(GruParams),
    CaGru(CaGruParams),
}

#[derive(Debug, Clone)]
pub struct DemandTrainConfig {
    pub d: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_scale_matrix: f64,
    pub init_scale_embed: f64,
}

impl Default for DemandTrainConfig {
    fn default() -> Self {
        DemandTrainConfig {
            d: 10,
            learning_rate: 0.01,
            lambda: 0.01,
            epochs: 20,
            seed: 42,
            init_scale_matrix: 0.1,
            init_scale_embed: 0.01,
        }
    }
}

impl GruParams {
    pub fn init(n_categories: usize, config: &DemandTrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let sm = config.init_scale_matrix;
        let se = config.init_scale_embed;
        GruParams {
            d,
            w_z: Mat::uniform(d, d, sm, &mut rng),
            w_r: Mat::uniform(d, d, sm, &mut rng),
            w_h: Mat::uniform(d, d, sm, &mut rng),
            m_z: Mat::uniform(d, d, sm, &mut rng),
            m_r: Mat::uniform(d, d, sm, &mut rng),
            m_h: Mat::uniform(d, d, sm, &mut rng),
            cat_embed: Mat::uniform(n_categories, d, se, &mut rng),
        }
    }

    fn blocks(&self) -> Vec<&Mat> {
        vec![&self.w_z, &self.w_r, &self.w_h, &self.m_z, &self.m_r, &self.m_h, &self.cat_embed]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.m_z,
            &mut self.m_r,
            &mut self.m_h,
            &mut self.cat_embed,
        ]
    }

    fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        for b in g.blocks_mut() {
            b.data.iter_mut().for_each(|v| *v = 0.0);
        }
        g
    }
}

impl CaGruParams {
    pub fn init(n_categories: usize, config: &DemandTrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let sm = config.init_scale_matrix;
        let se = config.init_scale_embed;
        CaGruParams {
            d,
            w_z: Mat::uniform(d, d, sm, &mut rng),
            w_a: Mat::uniform(d, d, sm, &mut rng),
            w_r: Mat::uniform(d, d, sm, &mut rng),
            w_h: Mat::uniform(d, d, sm, &mut rng),
            m_z: Mat::uniform(d, d, sm, &mut rng),
            m_a: Mat::uniform(d, d, sm, &mut rng),
            m_r: Mat::uniform(d, d, sm, &mut rng),
            m_h: Mat::uniform(d, d, sm, &mut rng),
            i_z: Mat::uniform(d, d, sm, &mut rng),
            i_a: Mat::uniform(d, d, sm, &mut rng),
            t_z: Mat::uniform(d, d, sm, &mut rng),
            t_r: Mat::uniform(d, d, sm, &mut rng),
            pred_i_a: Mat::uniform(d, d, sm, &mut rng),
            pred_t_r: Mat::uniform(d, d, sm, &mut rng),
            cat_embed: Mat::uniform(n_categories, d, se, &mut rng),
            input_ctx: Mat::uniform(INPUT_CONTEXTS, d, se, &mut rng),
            trans_ctx: Mat::uniform(TRANSITION_CONTEXTS, d, se, &mut rng),
        }
    }

    fn blocks(&self) -> Vec<&Mat> {
        vec![
            &self.w_z, &self.w_a, &self.w_r, &self.w_h, &self.m_z, &self.m_a, &self.m_r,
            &self.m_h, &self.i_z, &self.i_a, &self.t_z, &self.t_r, &self.pred_i_a,
            &self.pred_t_r, &self.cat_embed, &self.input_ctx, &self.trans_ctx,
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.w_z,
            &mut self.w_a,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.m_z,
            &mut self.m_a,
            &mut self.m_r,
            &mut self.m_h,
            &mut self.i_z,
            &mut self.i_a,
            &mut self.t_z,
            &mut self.t_r,
            &mut self.pred_i_a,
            &mut self.pred_t_r,
            &mut self.cat_embed,
            &mut self.input_ctx,
            &mut self.trans_ctx,
        ]
    }

    fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        for b in g.blocks_mut() {
            b.data.iter_mut().for_each(|v| *v = 0.0);
        }
        g
    }
}

fn check_contexts(input_ctx: usize, transition_ctx: usize) -> Result<()> {
    if input_ctx >= INPUT_CONTEXTS {
        return Err(Error::Data(format!("input context id {input_ctx} out of range")));
    }
    if transition_ctx >= TRANSITION_CONTEXTS {
        return Err(Error::Data(format!("transition context id {transition_ctx} out of range")));
    }
    Ok(())
}

/// Gate activations cached for backpropagation.
#[derive(Debug, Clone)]
struct CellCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    a: Option<Vec<f64>>,
    r: Vec<f64>,
    h_tilde: Vec<f64>,
    h: Vec<f64>,
}

fn gru_cell(p: &GruParams, h_prev: &[f64], category: usize) -> CellCache {
    let l = p.cat_embed.row(category);
    let mut z_pre = p.w_z.matvec(l);
    axpy(&mut z_pre, 1.0, &p.m_z.matvec(h_prev));
    let z: Vec<f64> = z_pre.iter().map(|&x| sigmoid(x)).collect();
    let mut r_pre = p.w_r.matvec(l);
    axpy(&mut r_pre, 1.0, &p.m_r.matvec(h_prev));
    let r: Vec<f64> = r_pre.iter().map(|&x| sigmoid(x)).collect();
    let mut h_pre = p.w_h.matvec(l);
    axpy(&mut h_pre, 1.0, &p.m_h.matvec(&hadamard(h_prev, &r)));
    let h_tilde: Vec<f64> = h_pre.iter().map(|x| x.tanh()).collect();
    let h: Vec<f64> = (0..p.d)
        .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * h_tilde[k])
        .collect();
    CellCache { h_prev: h_prev.to_vec(), z, a: None, r, h_tilde, h }
}

fn cagru_cell(
    p: &CaGruParams,
    h_prev: &[f64],
    category: usize,
    input_ctx: usize,
    transition_ctx: usize,
) -> Result<CellCache> {
    check_contexts(input_ctx, transition_ctx)?;
    let l = p.cat_embed.row(category);
    let ci = p.input_ctx.row(input_ctx);
    let ct = p.trans_ctx.row(transition_ctx);

    let mut z_pre = p.w_z.matvec(l);
    axpy(&mut z_pre, 1.0, &p.m_z.matvec(h_prev));
    axpy(&mut z_pre, 1.0, &p.i_z.matvec(ci));
    axpy(&mut z_pre, 1.0, &p.t_z.matvec(ct));
    let z: Vec<f64> = z_pre.iter().map(|&x| sigmoid(x)).collect();

    let mut a_pre = p.w_a.matvec(l);
    axpy(&mut a_pre, 1.0, &p.m_a.matvec(h_prev));
    axpy(&mut a_pre, 1.0, &p.i_a.matvec(ci));
    let a: Vec<f64> = a_pre.iter().map(|&x| sigmoid(x)).collect();

    let mut r_pre = p.w_r.matvec(l);
    axpy(&mut r_pre, 1.0, &p.m_r.matvec(h_prev));
    axpy(&mut r_pre, 1.0, &p.t_r.matvec(ct));
    let r: Vec<f64> = r_pre.iter().map(|&x| sigmoid(x)).collect();

    let mut h_pre = p.w_h.matvec(&hadamard(l, &a));
    axpy(&mut h_pre, 1.0, &p.m_h.matvec(&hadamard(h_prev, &r)));
    let h_tilde: Vec<f64> = h_pre.iter().map(|x| x.tanh()).collect();

    let h: Vec<f64> = (0..p.d)
        .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * h_tilde[k])
        .collect();
    Ok(CellCache { h_prev: h_prev.to_vec(), z, a: Some(a), r, h_tilde, h })
}

/// One plain-GRU step.
pub fn gru_forward(p: &GruParams, h_prev: &[f64], category: usize) -> Vec<f64> {
    gru_cell(p, h_prev, category).h
}

/// One CA-GRU step.
pub fn cagru_forward(
    p: &CaGruParams,
    h_prev: &[f64],
    category: usize,
    input_ctx: usize,
    transition_ctx: usize,
) -> Result<Vec<f64>> {
    Ok(cagru_cell(p, h_prev, category, input_ctx, transition_ctx)?.h)
}

/// Per-category scores for the next step, given the next step's contexts.
pub fn predict_category_scores(
    model: &DemandModel,
    h: &[f64],
    next_input_ctx: usize,
    next_transition_ctx: usize,
) -> Result<Vec<f64>> {
    match model {
        DemandModel::Gru(p) => Ok(p.cat_embed.matvec(h)),
        DemandModel::CaGru(p) => {
            check_contexts(next_input_ctx, next_transition_ctx)?;
            let a_p: Vec<f64> = p
                .pred_i_a
                .matvec(p.input_ctx.row(next_input_ctx))
                .iter()
                .map(|&x| sigmoid(x))
                .collect();
            let r_p: Vec<f64> = p
                .pred_t_r
                .matvec(p.trans_ctx.row(next_transition_ctx))
                .iter()
                .map(|&x| sigmoid(x))
                .collect();
            // (h . r') dot (l_j . a') = l_j dot (h . r' . a')
            let weighted: Vec<f64> = (0..p.d).map(|k| h[k] * r_p[k] * a_p[k]).collect();
            Ok(p.cat_embed.matvec(&weighted))
        }
    }
}

/// Softmax with max subtraction.
pub fn category_probabilities(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl DemandModel {
    pub fn kind(&self) -> DemandKind {
        match self {
            DemandModel::Gru(_) => DemandKind::Gru,
            DemandModel::CaGru(_) => DemandKind::CaGru,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            DemandModel::Gru(p) => p.d,
            DemandModel::CaGru(p) => p.d,
        }
    }

    pub fn n_categories(&self) -> usize {
        match self {
            DemandModel::Gru(p) => p.cat_embed.rows,
            DemandModel::CaGru(p) => p.cat_embed.rows,
        }
    }

    /// Advance the hidden state by one observed step.
    pub fn step(&self, h: &[f64], step: &SequenceStep) -> Result<Vec<f64>> {
        match self {
            DemandModel::Gru(p) => Ok(gru_forward(p, h, step.category)),
            DemandModel::CaGru(p) => {
                cagru_forward(p, h, step.category, step.input_ctx, step.transition_ctx)
            }
        }
    }

    fn blocks(&self) -> Vec<&Mat> {
        match self {
            DemandModel::Gru(p) => p.blocks(),
            DemandModel::CaGru(p) => p.blocks(),
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        match self {
            DemandModel::Gru(p) => p.blocks_mut(),
            DemandModel::CaGru(p) => p.blocks_mut(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            DemandModel::Gru(p) => DemandModel::Gru(p.zeros_like()),
            DemandModel::CaGru(p) => DemandModel::CaGru(p.zeros_like()),
        }
    }

    fn sq_norm(&self) -> f64 {
        self.blocks().iter().map(|b| b.sq_norm()).sum()
    }
}

/// Cross-entropy over the sequence: for each step after the first, predict
/// its category from the hidden state of the prefix and that step's own
/// contexts. Adds (lambda/2) times the squared norm of all parameters.
pub fn sequence_loss(model: &DemandModel, steps: &[SequenceStep], lambda: f64) -> Result<f64> {
    if steps.len() < 2 {
        return Err(Error::Data(format!(
            "sequence of length {} is too short to predict from",
            steps.len()
        )));
    }
    let n_cats = model.n_categories() as f64;
    let mut h = vec![0.0; model.d()];
    let mut loss = 0.0;
    for p in 1..steps.len() {
        h = model.step(&h, &steps[p - 1])?;
        let scores =
            predict_category_scores(model, &h, steps[p].input_ctx, steps[p].transition_ctx)?;
        let probs = category_probabilities(&scores);
        loss += -(1.0 / n_cats) * probs[steps[p].category].ln();
    }
    Ok(loss + 0.5 * lambda * model.sq_norm())
}

struct PredCache {
    probs: Vec<f64>,
    a_p: Option<Vec<f64>>,
    r_p: Option<Vec<f64>>,
}

/// Loss and full analytic gradient of `sequence_loss` via BPTT.
pub fn sequence_grads(
    model: &DemandModel,
    steps: &[SequenceStep],
    lambda: f64,
) -> Result<(f64, DemandModel)> {
    if steps.len() < 2 {
        return Err(Error::Data(format!(
            "sequence of length {} is too short to predict from",
            steps.len()
        )));
    }
    let d = model.d();
    let n_cats = model.n_categories();
    let inv_l = 1.0 / n_cats as f64;
    let t_len = steps.len();

    // forward
    let mut cells: Vec<CellCache> = Vec::with_capacity(t_len - 1);
    let mut preds: Vec<PredCache> = Vec::with_capacity(t_len - 1);
    let mut loss = 0.0;
    {
        let mut h = vec![0.0; d];
        for p in 1..t_len {
            let cell = match model {
                DemandModel::Gru(g) => gru_cell(g, &h, steps[p - 1].category),
                DemandModel::CaGru(c) => cagru_cell(
                    c,
                    &h,
                    steps[p - 1].category,
                    steps[p - 1].input_ctx,
                    steps[p - 1].transition_ctx,
                )?,
            };
            h = cell.h.clone();
            cells.push(cell);
            let (scores, a_p, r_p) = match model {
                DemandModel::Gru(g) => (g.cat_embed.matvec(&h), None, None),
                DemandModel::CaGru(c) => {
                    check_contexts(steps[p].input_ctx, steps[p].transition_ctx)?;
                    let a_p: Vec<f64> = c
                        .pred_i_a
                        .matvec(c.input_ctx.row(steps[p].input_ctx))
                        .iter()
                        .map(|&x| sigmoid(x))
                        .collect();
                    let r_p: Vec<f64> = c
                        .pred_t_r
                        .matvec(c.trans_ctx.row(steps[p].transition_ctx))
                        .iter()
                        .map(|&x| sigmoid(x))
                        .collect();
                    let weighted: Vec<f64> = (0..d).map(|k| h[k] * r_p[k] * a_p[k]).collect();
                    (c.cat_embed.matvec(&weighted), Some(a_p), Some(r_p))
                }
            };
            let probs = category_probabilities(&scores);
            loss += -inv_l * probs[steps[p].category].ln();
            preds.push(PredCache { probs, a_p, r_p });
        }
        loss += 0.5 * lambda * model.sq_norm();
    }

    // backward
    let mut grads = model.zeros_like();
    let mut dh_next: Vec<f64> = vec![0.0; d]; // dL/dh_{k} flowing from cell k+1
    for k in (1..t_len).rev() {
        let cell = &cells[k - 1];
        let pred = &preds[k - 1];
        let target = steps[k].category;
        let h = &cell.h;

        // prediction-loss gradient w.r.t. scores
        let dscore: Vec<f64> = pred
            .probs
            .iter()
            .enumerate()
            .map(|(j, &pj)| inv_l * (pj - if j == target { 1.0 } else { 0.0 }))
            .collect();

        let mut dh = dh_next.clone();
        match (&mut grads, model) {
            (DemandModel::Gru(g), DemandModel::Gru(m)) => {
                // score_j = h . l_j
                for (j, &ds) in dscore.iter().enumerate() {
                    axpy(g.cat_embed.row_mut(j), ds, h);
                }
                axpy(&mut dh, 1.0, &m.cat_embed.matvec_t(&dscore));
            }
            (DemandModel::CaGru(g), DemandModel::CaGru(m)) => {
                let a_p = pred.a_p.as_ref().unwrap();
                let r_p = pred.r_p.as_ref().unwrap();
                let weighted: Vec<f64> = (0..d).map(|i| h[i] * r_p[i] * a_p[i]).collect();
                for (j, &ds) in dscore.iter().enumerate() {
                    axpy(g.cat_embed.row_mut(j), ds, &weighted);
                }
                // s_vec = sum_j dscore_j l_j
                let s_vec = m.cat_embed.matvec_t(&dscore);
                for i in 0..d {
                    dh[i] += s_vec[i] * r_p[i] * a_p[i];
                }
                let da_p: Vec<f64> = (0..d).map(|i| s_vec[i] * h[i] * r_p[i]).collect();
                let dr_p: Vec<f64> = (0..d).map(|i| s_vec[i] * h[i] * a_p[i]).collect();
                let da_pre: Vec<f64> =
                    (0..d).map(|i| da_p[i] * a_p[i] * (1.0 - a_p[i])).collect();
                let dr_pre: Vec<f64> =
                    (0..d).map(|i| dr_p[i] * r_p[i] * (1.0 - r_p[i])).collect();
                let ci = m.input_ctx.row(steps[k].input_ctx);
                let ct = m.trans_ctx.row(steps[k].transition_ctx);
                g.pred_i_a.add_outer(1.0, &da_pre, ci);
                g.pred_t_r.add_outer(1.0, &dr_pre, ct);
                axpy(
                    g.input_ctx.row_mut(steps[k].input_ctx),
                    1.0,
                    &m.pred_i_a.matvec_t(&da_pre),
                );
                axpy(
                    g.trans_ctx.row_mut(steps[k].transition_ctx),
                    1.0,
                    &m.pred_t_r.matvec_t(&dr_pre),
                );
            }
            _ => unreachable!(),
        }

        // cell backward
        let h_prev = &cell.h_prev;
        let z = &cell.z;
        let r = &cell.r;
        let h_tilde = &cell.h_tilde;
        let dz: Vec<f64> = (0..d).map(|i| dh[i] * (h_tilde[i] - h_prev[i])).collect();
        let dh_tilde: Vec<f64> = (0..d).map(|i| dh[i] * z[i]).collect();
        let mut dh_prev: Vec<f64> = (0..d).map(|i| dh[i] * (1.0 - z[i])).collect();
        let dh_tilde_pre: Vec<f64> =
            (0..d).map(|i| dh_tilde[i] * (1.0 - h_tilde[i] * h_tilde[i])).collect();
        let dz_pre: Vec<f64> = (0..d).map(|i| dz[i] * z[i] * (1.0 - z[i])).collect();

        match (&mut grads, model) {
            (DemandModel::Gru(g), DemandModel::Gru(m)) => {
                let l = m.cat_embed.row(steps[k - 1].category);
                let mut dl = vec![0.0; d];

                g.w_h.add_outer(1.0, &dh_tilde_pre, l);
                axpy(&mut dl, 1.0, &m.w_h.matvec_t(&dh_tilde_pre));
                let hr = hadamard(h_prev, r);
                g.m_h.add_outer(1.0, &dh_tilde_pre, &hr);
                let v = m.m_h.matvec_t(&dh_tilde_pre);
                let dr: Vec<f64> = (0..d).map(|i| v[i] * h_prev[i]).collect();
                for i in 0..d {
                    dh_prev[i] += v[i] * r[i];
                }
                let dr_pre: Vec<f64> = (0..d).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();

                g.w_z.add_outer(1.0, &dz_pre, l);
                g.m_z.add_outer(1.0, &dz_pre, h_prev);
                axpy(&mut dl, 1.0, &m.w_z.matvec_t(&dz_pre));
                axpy(&mut dh_prev, 1.0, &m.m_z.matvec_t(&dz_pre));

                g.w_r.add_outer(1.0, &dr_pre, l);
                g.m_r.add_outer(1.0, &dr_pre, h_prev);
                axpy(&mut dl, 1.0, &m.w_r.matvec_t(&dr_pre));
                axpy(&mut dh_prev, 1.0, &m.m_r.matvec_t(&dr_pre));

                axpy(g.cat_embed.row_mut(steps[k - 1].category), 1.0, &dl);
            }
            (DemandModel::CaGru(g), DemandModel::CaGru(m)) => {
                let a = cell.a.as_ref().unwrap();
                let l = m.cat_embed.row(steps[k - 1].category);
                let ci = m.input_ctx.row(steps[k - 1].input_ctx);
                let ct = m.trans_ctx.row(steps[k - 1].transition_ctx);
                let mut dl = vec![0.0; d];
                let mut dci = vec![0.0; d];
                let mut dct = vec![0.0; d];

                let la = hadamard(l, a);
                g.w_h.add_outer(1.0, &dh_tilde_pre, &la);
                let v1 = m.w_h.matvec_t(&dh_tilde_pre);
                for i in 0..d {
                    dl[i] += v1[i] * a[i];
                }
                let da: Vec<f64> = (0..d).map(|i| v1[i] * l[i]).collect();
                let hr = hadamard(h_prev, r);
                g.m_h.add_outer(1.0, &dh_tilde_pre, &hr);
                let v2 = m.m_h.matvec_t(&dh_tilde_pre);
                let dr: Vec<f64> = (0..d).map(|i| v2[i] * h_prev[i]).collect();
                for i in 0..d {
                    dh_prev[i] += v2[i] * r[i];
                }
                let da_pre: Vec<f64> = (0..d).map(|i| da[i] * a[i] * (1.0 - a[i])).collect();
                let dr_pre: Vec<f64> = (0..d).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();

                g.w_z.add_outer(1.0, &dz_pre, l);
                g.m_z.add_outer(1.0, &dz_pre, h_prev);
                g.i_z.add_outer(1.0, &dz_pre, ci);
                g.t_z.add_outer(1.0, &dz_pre, ct);
                axpy(&mut dl, 1.0, &m.w_z.matvec_t(&dz_pre));
                axpy(&mut dh_prev, 1.0, &m.m_z.matvec_t(&dz_pre));
                axpy(&mut dci, 1.0, &m.i_z.matvec_t(&dz_pre));
                axpy(&mut dct, 1.0, &m.t_z.matvec_t(&dz_pre));

                g.w_a.add_outer(1.0, &da_pre, l);
                g.m_a.add_outer(1.0, &da_pre, h_prev);
                g.i_a.add_outer(1.0, &da_pre, ci);
                axpy(&mut dl, 1.0, &m.w_a.matvec_t(&da_pre));
                axpy(&mut dh_prev, 1.0, &m.m_a.matvec_t(&da_pre));
                axpy(&mut dci, 1.0, &m.i_a.matvec_t(&da_pre));

                g.w_r.add_outer(1.0, &dr_pre, l);
                g.m_r.add_outer(1.0, &dr_pre, h_prev);
                g.t_r.add_outer(1.0, &dr_pre, ct);
                axpy(&mut dl, 1.0, &m.w_r.matvec_t(&dr_pre));
                axpy(&mut dh_prev, 1.0, &m.m_r.matvec_t(&dr_pre));
                axpy(&mut dct, 1.0, &m.t_r.matvec_t(&dr_pre));

                axpy(g.cat_embed.row_mut(steps[k - 1].category), 1.0, &dl);
                axpy(g.input_ctx.row_mut(steps[k - 1].input_ctx), 1.0, &dci);
                axpy(g.trans_ctx.row_mut(steps[k - 1].transition_ctx), 1.0, &dct);
            }
            _ => unreachable!(),
        }
        dh_next = dh_prev;
    }

    // regularization gradient
    for (gb, pb) in grads.blocks_mut().into_iter().zip(model.blocks()) {
        for (g, p) in gb.data.iter_mut().zip(&pb.data) {
            *g += lambda * p;
        }
    }

    Ok((loss, grads))
}

/// Copy the category embedding table from a trained preference model.
pub fn pretrain_init(deepstyle: &DeepStyleParams, d: usize) -> Result<Mat> {
    if deepstyle.d != d {
        return Err(Error::Dimension(format!(
            "preference model has d = {}, demand model expects d = {d}",
            deepstyle.d
        )));
    }
    Ok(deepstyle.cat_vecs.clone())
}

/// Full-unroll BPTT training: one SGD update per user sequence, shuffled
/// user order per epoch. Sequences shorter than 2 steps are skipped.
pub fn bptt_train(
    sequences: &[UserSequence],
    n_categories: usize,
    config: &DemandTrainConfig,
    kind: DemandKind,
    pretrained_categories: Option<&Mat>,
) -> Result<(DemandModel, Vec<f64>)> {
    let mut model = match kind {
        DemandKind::Gru => DemandModel::Gru(GruParams::init(n_categories, config)),
        DemandKind::CaGru => DemandModel::CaGru(CaGruParams::init(n_categories, config)),
    };
    if let Some(table) = pretrained_categories {
        if table.cols != config.d || table.rows != n_categories {
            return Err(Error::Dimension(format!(
                "pretrained category table is {}x{}, expected {}x{}",
                table.rows, table.cols, n_categories, config.d
            )));
        }
        match &mut model {
            DemandModel::Gru(p) => p.cat_embed = table.clone(),
            DemandModel::CaGru(p) => p.cat_embed = table.clone(),
        }
    }

    let trainable: Vec<&UserSequence> =
        sequences.iter().filter(|s| s.steps.len() >= 2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..trainable.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &idx in &order {
            let (loss, grads) = sequence_grads(&model, &trainable[idx].steps, config.lambda)?;
            loss_sum += loss;
            for (pb, gb) in model.blocks_mut().into_iter().zip(grads.blocks()) {
                for (p, g) in pb.data.iter_mut().zip(&gb.data) {
                    *p -= config.learning_rate * g;
                }
            }
        }
        epoch_losses.push(loss_sum / trainable.len().max(1) as f64);
    }
    Ok((model, epoch_losses))
}

/// Central finite differences on every parameter against the analytic BPTT
/// gradient. `fault_scale`, when set, multiplies the analytic prediction
/// reset-gate block (GRU: the candidate-state block) as a self-test hook.
pub fn gradcheck_demand(
    model: &DemandModel,
    steps: &[SequenceStep],
    lambda: f64,
    epsilon: f64,
    fault_scale: Option<f64>,
) -> Result<f64> {
    let (_, mut analytic) = sequence_grads(model, steps, lambda)?;
    if let Some(s) = fault_scale {
        match &mut analytic {
            DemandModel::Gru(g) => g.w_h.data.iter_mut().for_each(|v| *v *= s),
            DemandModel::CaGru(g) => g.pred_t_r.data.iter_mut().for_each(|v| *v *= s),
        }
    }
    let mut work = model.clone();
    let n_blocks = work.blocks().len();
    let mut max_err: f64 = 0.0;
    for b in 0..n_blocks {
        let n = analytic.blocks()[b].data.len();
        for k in 0..n {
            let orig = work.blocks_mut()[b].data[k];
            work.blocks_mut()[b].data[k] = orig + epsilon;
            let up = sequence_loss(&work, steps, lambda)?;
            work.blocks_mut()[b].data[k] = orig - epsilon;
            let down = sequence_loss(&work, steps, lambda)?;
            work.blocks_mut()[b].data[k] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic.blocks()[b].data[k];
            let denom = (a.abs() + numeric.abs()).max(1e-8);
            max_err = max_err.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_err)
}
