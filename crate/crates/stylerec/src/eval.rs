//! AUC evaluation under warm- and cold-start protocols.
//!
//! Per user: positives are that user's test occurrences (cold mode keeps
//! only occurrences of items with fewer than 5 train records), negatives are
//! all catalog items the user never selected in train or test. A pair
//! counts as a win only when the positive is ranked strictly above the
//! negative; ties count zero. Users with no valid pairs are excluded from
//! the mean rather than scored zero.



use crate::data::{build_sequences, Catalog, DatasetSplit, Interaction};
use crate::demand::{category_probabilities, predict_category_scores, DemandModel};
use crate::error::{Error, Result};
use crate::preference::{DeepStyleParams, ItemData};
use crate::ranker::{aggregate_keys, top_k_categories, AggregateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Warm,
    Cold,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Warm => "warm",
            EvalMode::Cold => "cold",
        }
    }
}

/// AUC over one evaluation mode.
#[derive(Debug, Clone, Copy)]
pub struct ModeReport {
    pub auc: f64,
    pub users_evaluated: usize,
    pub users_skipped: usize,
    pub pair_count: u64,
}

/// A model that assigns every catalog item a ranking key.
pub enum Scorer<'a> {
    /// Static per-user scores from a preference model.
    Preference { params: &'a DeepStyleParams, data: ItemData<'a> },
    /// Two-part ranking from a preference model gated by demand top-k.
    Aggregate {
        params: &'a DeepStyleParams,
        data: ItemData<'a>,
        demand: &'a DemandModel,
        k: usize,
    },
}

fn key_less(a: &AggregateKey, b: &AggregateKey) -> std::cmp::Ordering {
    (a.in_top_k as u8, a.score)
        .partial_cmp(&(b.in_top_k as u8, b.score))
        .expect("finite scores")
}

/// Wins of `pos` over a sorted (ascending by key_less) slice of negatives:
/// the number of negatives strictly below it.
fn wins_against(pos: &AggregateKey, sorted_negs: &[AggregateKey]) -> u64 {
    sorted_negs.partition_point(|n| key_less(n, pos) == std::cmp::Ordering::Less) as u64
}

/// Pairwise AUC of one positive/negative key split; `None` when there are
/// no pairs.
pub fn auc_fast(positives: &[AggregateKey], negatives: &[AggregateKey]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut sorted: Vec<AggregateKey> = negatives.to_vec();
    sorted.sort_by(key_less);
    let wins: u64 = positives.iter().map(|p| wins_against(p, &sorted)).sum();
    Some(wins as f64 / (positives.len() * negatives.len()) as f64)
}

/// Literal double loop over score pairs; the independent oracle for
/// `auc_fast`. Ties count zero.
pub fn auc_bruteforce(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    let mut wins = 0u64;
    for p in pos_scores {
        for n in neg_scores {
            if p > n {
                wins += 1;
            }
        }
    }
    wins as f64 / (pos_scores.len() * neg_scores.len()) as f64
}

/// Mean per-user AUC of `scorer` over the test portion of `split`.
/// `filtered` must be the full filtered interaction set the split was
/// derived from; sequential scorers replay each user's earlier steps before
/// scoring a test step.
pub fn auc(
    scorer: &Scorer,
    catalog: &Catalog,
    filtered: &[Interaction],
    split: &DatasetSplit,
    mode: EvalMode,
) -> Result<ModeReport> {
    if split.test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let n_items = catalog.n_items();
    let selected = crate::data::user_item_sets(filtered, catalog.n_users());
    let mut train_counts = vec![0usize; catalog.n_users()];
    for it in &split.train {
        train_counts[it.user] += 1;
    }

    // static preference scores are user dot item-representation; compute the
    // representations once
    let reprs: Vec<Vec<f64>> = match scorer {
        Scorer::Preference { params, data } | Scorer::Aggregate { params, data, .. } => {
            params.all_item_reprs(data)?
        }
    };

    let sequences = build_sequences(filtered);
    let mut auc_sum = 0.0;
    let mut users_evaluated = 0usize;
    let mut users_skipped = 0usize;
    let mut pair_count = 0u64;

    for seq in &sequences {
        let user = seq.user;
        let negatives: Vec<usize> =
            (0..n_items).filter(|i| !selected[user].contains(i)).collect();
        let pref_scores: Vec<f64> = {
            let p_u = match scorer {
                Scorer::Preference { params, .. } | Scorer::Aggregate { params, .. } => {
                    params.user_vecs.row(user)
                }
            };
            reprs.iter().map(|r| crate::linalg::dot(p_u, r)).collect()
        };

        let mut wins = 0u64;
        let mut pairs = 0u64;
        match scorer {
            Scorer::Preference { .. } => {
                let mut sorted_negs: Vec<AggregateKey> = negatives
                    .iter()
                    .map(|&i| AggregateKey { in_top_k: true, score: pref_scores[i] })
                    .collect();
                sorted_negs.sort_by(key_less);
                for p in train_counts[user]..seq.steps.len() {
                    let item = seq.steps[p].item;
                    if mode == EvalMode::Cold && !split.cold_items.contains(&item) {
                        continue;
                    }
                    let key = AggregateKey { in_top_k: true, score: pref_scores[item] };
                    wins += wins_against(&key, &sorted_negs);
                    pairs += sorted_negs.len() as u64;
                }
            }
            Scorer::Aggregate { data, demand, k, .. } => {
                let mut h = vec![0.0; demand.d()];
                for p in 0..seq.steps.len() {
                    let step = &seq.steps[p];
                    if p >= train_counts[user] && p >= 1 {
                        let item = step.item;
                        let counted =
                            mode == EvalMode::Warm || split.cold_items.contains(&item);
                        if counted {
                            let scores = predict_category_scores(
                                demand,
                                &h,
                                step.input_ctx,
                                step.transition_ctx,
                            )?;
                            let probs = category_probabilities(&scores);
                            let top = top_k_categories(&probs, *k);
                            let keys = aggregate_keys(&pref_scores, data.item_category, &top);
                            let mut sorted_negs: Vec<AggregateKey> =
                                negatives.iter().map(|&i| keys[i]).collect();
                            sorted_negs.sort_by(key_less);
                            wins += wins_against(&keys[item], &sorted_negs);
                            pairs += sorted_negs.len() as u64;
                        }
                    }
                    h = demand.step(&h, step)?;
                }
            }
        }

        if pairs == 0 {
            users_skipped += 1;
        } else {
            auc_sum += wins as f64 / pairs as f64;
            users_evaluated += 1;
            pair_count += pairs;
        }
    }

    Ok(ModeReport {
        auc: if users_evaluated > 0 { auc_sum / users_evaluated as f64 } else { 0.0 },
        users_evaluated,
        users_skipped,
        pair_count,
    })
}

/// Category-prediction AUC: per test step the true next category is the
/// positive, all other categories negatives, pairs pooled per user and the
/// per-user values averaged.
pub fn demand_auc(
    model: &DemandModel,
    catalog: &Catalog,
    filtered: &[Interaction],
    split: &DatasetSplit,
) -> Result<f64> {
    if split.test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let mut train_counts = vec![0usize; catalog.n_users()];
    for it in &split.train {
        train_counts[it.user] += 1;
    }
    let sequences = build_sequences(filtered);
    let mut auc_sum = 0.0;
    let mut users = 0usize;
    for seq in &sequences {
        let mut h = vec![0.0; model.d()];
        let mut wins = 0u64;
        let mut pairs = 0u64;
        for p in 0..seq.steps.len() {
            let step = &seq.steps[p];
            if p >= train_counts[seq.user] && p >= 1 {
                let scores =
                    predict_category_scores(model, &h, step.input_ctx, step.transition_ctx)?;
                let pos = scores[step.category];
                for (j, &s) in scores.iter().enumerate() {
                    if j != step.category {
                        pairs += 1;
                        if pos > s {
                            wins += 1;
                        }
                    }
                }
            }
            h = model.step(&h, step)?;
        }
        if pairs > 0 {
            auc_sum += wins as f64 / pairs as f64;
            users += 1;
        }
    }
    if users == 0 {
        return Err(Error::Data("no users with demand-evaluable test steps".into()));
    }
    Ok(auc_sum / users as f64)
}
