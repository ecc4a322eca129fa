//! Two-part aggregated ranking: items whose category is among the top-k
//! predicted categories come first, both parts ordered by preference score.

use std::cmp::Ordering;

/// Ranking key: top-k membership strictly dominates, then higher preference
/// score. Item-id tiebreaks are applied only when producing ranked lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateKey {
    pub in_top_k: bool,
    pub score: f64,
}

impl AggregateKey {
    /// Ordering in rank position: Less means "ranks earlier".
    pub fn compare(&self, other: &AggregateKey) -> Ordering {
        match (self.in_top_k, other.in_top_k) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => other
                .score
                .partial_cmp(&self.score)
                .expect("scores must be finite"),
        }
    }

    /// Strictly better in the sense of the pairwise AUC indicator.
    pub fn beats(&self, other: &AggregateKey) -> bool {
        self.compare(other) == Ordering::Less
    }
}

/// The k categories with the largest probabilities; ties broken by
/// ascending category id.
pub fn top_k_categories(demand_probs: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..demand_probs.len()).collect();
    idx.sort_by(|&a, &b| {
        demand_probs[b]
            .partial_cmp(&demand_probs[a])
            .expect("probabilities must be finite")
            .then(a.cmp(&b))
    });
    let mut top: Vec<usize> = idx.into_iter().take(k.min(demand_probs.len())).collect();
    top.sort_unstable();
    top
}

/// Keys for every item given its preference score and top-k membership of
/// its category.
pub fn aggregate_keys(
    preference_scores: &[f64],
    item_category: &[usize],
    top_categories: &[usize],
) -> Vec<AggregateKey> {
    let mut in_top = vec![false; item_category.iter().copied().max().map_or(0, |m| m + 1)];
    for &c in top_categories {
        if c < in_top.len() {
            in_top[c] = true;
        }
    }
    preference_scores
        .iter()
        .zip(item_category)
        .map(|(&score, &cat)| AggregateKey { in_top_k: in_top[cat], score })
        .collect()
}

/// Total ordering over all items: top-k part first, each part by descending
/// preference score, item id ascending as the final tiebreak.
pub fn aggregate_rank(
    preference_scores: &[f64],
    item_category: &[usize],
    top_categories: &[usize],
) -> Vec<(usize, AggregateKey)> {
    let keys = aggregate_keys(preference_scores, item_category, top_categories);
    let mut ranked: Vec<(usize, AggregateKey)> = keys.into_iter().enumerate().collect();
    ranked.sort_by(|(ia, ka), (ib, kb)| ka.compare(kb).then(ia.cmp(ib)));
    ranked
}
