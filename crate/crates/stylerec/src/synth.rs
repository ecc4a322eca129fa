//! Synthetic dataset generation with planted ground truth.
//!
//! Item features are a large-norm category prototype plus a small-norm style
//! offset plus noise, so categories dominate the raw feature space. Users
//! pick their next category from a context-dependent softmax (base taste
//! plus beta-weighted context logits) and the item within that category from
//! a softmax over their style affinity.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{input_context_of, START_BIN};
use crate::features::FeatureStore;

/// Category prototypes are this many times larger than style offsets.
const CATEGORY_NORM: f64 = 6.0;
const STYLE_NORM: f64 = 2.0;
const FEATURE_NOISE: f64 = 0.05;

const SECONDS_PER_DAY: i64 = 86_400;
/// Sampling ranges per transition bin (right-closed, in days).
const BIN_RANGES_DAYS: [(f64, f64); 10] = [
    (0.0, 1.0),
    (1.0, 2.0),
    (2.0, 3.0),
    (3.0, 7.0),
    (7.0, 15.0),
    (15.0, 30.0),
    (30.0, 90.0),
    (90.0, 182.0),
    (182.0, 365.0),
    (365.0, 450.0),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_categories: usize,
    pub items_per_category: usize,
    pub feature_dim: usize,
    pub style_dim: usize,
    /// Number of planted style clusters.
    pub n_styles: usize,
    /// Context-effect strength on category demand; 0 removes context signal.
    pub beta: f64,
    /// Softmax temperature of within-category item choice.
    pub temperature: f64,
    pub seed: u64,
    pub seq_len_min: usize,
    pub seq_len_max: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 200,
            n_categories: 30,
            items_per_category: 20,
            feature_dim: 64,
            style_dim: 8,
            n_styles: 6,
            beta: 2.0,
            temperature: 0.3,
            seed: 42,
            seq_len_min: 10,
            seq_len_max: 20,
        }
    }
}

/// Planted truth written alongside the generated files for test assertions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub item_style_cluster: Vec<usize>,
    pub item_category: Vec<usize>,
    /// True style offset per item (before category prototype and noise).
    pub item_style_vec: Vec<Vec<f64>>,
    /// Category prototype per category, at full norm.
    pub category_prototype: Vec<Vec<f64>>,
    pub user_pref: Vec<Vec<f64>>,
    pub base_logits: Vec<Vec<f64>>,
    pub input_ctx_logits: Vec<Vec<f64>>,
    pub trans_ctx_logits: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Interaction rows in the `user,item,category,timestamp` text format.
    pub interactions_text: String,
    pub features: FeatureStore,
    /// Item ids, row order matching the feature store.
    pub manifest: Vec<String>,
    pub ground_truth: GroundTruth,
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn softmax_sample<R: Rng>(logits: &[f64], rng: &mut R) -> usize {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut u = rng.gen::<f64>() * sum;
    for (i, e) in exps.iter().enumerate() {
        u -= e;
        if u <= 0.0 {
            return i;
        }
    }
    exps.len() - 1
}

pub fn generate(config: &SynthConfig) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let f = config.feature_dim;
    let n_items_raw = config.n_categories * config.items_per_category;

    let category_prototype: Vec<Vec<f64>> = (0..config.n_categories)
        .map(|_| random_unit(f, &mut rng).into_iter().map(|x| x * CATEGORY_NORM).collect())
        .collect();

    // style directions live inside the span of the category prototypes, so
    // no linear map can strip category identity from a feature vector
    // without also destroying style information
    let style_basis: Vec<Vec<f64>> = (0..config.style_dim)
        .map(|_| {
            let mut v = vec![0.0; f];
            for proto in &category_prototype {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for (vi, pi) in v.iter_mut().zip(proto) {
                    *vi += c * pi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let style_prototype: Vec<Vec<f64>> = (0..config.n_styles)
        .map(|_| {
            let coeffs = random_unit(config.style_dim, &mut rng);
            let mut v = vec![0.0; f];
            for (c, basis) in coeffs.iter().zip(&style_basis) {
                for (vi, bi) in v.iter_mut().zip(basis) {
                    *vi += c * bi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x * STYLE_NORM / norm).collect()
        })
        .collect();

    let mut item_style_cluster = Vec::with_capacity(n_items_raw);
    let mut item_style_vec: Vec<Vec<f64>> = Vec::with_capacity(n_items_raw);
    let mut raw_features: Vec<Vec<f64>> = Vec::with_capacity(n_items_raw);
    for idx in 0..n_items_raw {
        let cat = idx / config.items_per_category;
        let style = rng.gen_range(0..config.n_styles);
        let style_vec: Vec<f64> = style_prototype[style]
            .iter()
            .map(|&s| s + rng.gen_range(-FEATURE_NOISE..FEATURE_NOISE))
            .collect();
        let v: Vec<f64> = category_prototype[cat]
            .iter()
            .zip(&style_vec)
            .map(|(c, s)| c + s + rng.gen_range(-FEATURE_NOISE..FEATURE_NOISE))
            .collect();
        item_style_cluster.push(style);
        item_style_vec.push(style_vec);
        raw_features.push(v);
    }

    // users: style affinity vector in the style-prototype span
    let user_pref: Vec<Vec<f64>> = (0..config.n_users)
        .map(|_| {
            let mut w = vec![0.0; f];
            for proto in &style_prototype {
                let a: f64 = rng.gen_range(-1.5..1.5);
                for (wi, pi) in w.iter_mut().zip(proto) {
                    *wi += a * pi;
                }
            }
            w
        })
        .collect();

    let base_logits: Vec<Vec<f64>> = (0..config.n_users)
        .map(|_| (0..config.n_categories).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let input_ctx_logits: Vec<Vec<f64>> = (0..crate::data::INPUT_CONTEXTS)
        .map(|_| (0..config.n_categories).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let trans_ctx_logits: Vec<Vec<f64>> = (0..crate::data::TRANSITION_CONTEXTS)
        .map(|_| (0..config.n_categories).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    // per-user per-item style affinity, reused across that user's draws
    let affinity = |u: usize, item: usize| -> f64 {
        user_pref[u]
            .iter()
            .zip(&item_style_vec[item])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };

    // generate selection sequences
    struct Event {
        user: usize,
        item: usize,
        category: usize,
        timestamp: i64,
    }
    let mut events: Vec<Event> = Vec::new();
    let epoch_start = 1_262_304_000i64; // 2010-01-01
    for u in 0..config.n_users {
        let len = rng.gen_range(config.seq_len_min..=config.seq_len_max).clamp(1, 100);
        let mut ts = epoch_start + rng.gen_range(0..180 * SECONDS_PER_DAY);
        for t in 0..len {
            let bin = if t == 0 {
                START_BIN
            } else {
                let b = rng.gen_range(0..BIN_RANGES_DAYS.len());
                let (lo, hi) = BIN_RANGES_DAYS[b];
                let gap_days = rng.gen_range(lo..hi) + 1e-6;
                ts += (gap_days * SECONDS_PER_DAY as f64) as i64 + 1;
                b
            };
            let ictx = input_context_of(ts);
            let logits: Vec<f64> = (0..config.n_categories)
                .map(|c| {
                    base_logits[u][c]
                        + config.beta * (input_ctx_logits[ictx][c] + trans_ctx_logits[bin][c])
                })
                .collect();
            let category = softmax_sample(&logits, &mut rng);

            let first = category * config.items_per_category;
            let item_logits: Vec<f64> = (0..config.items_per_category)
                .map(|j| affinity(u, first + j) / config.temperature.max(1e-9))
                .collect();
            let item = first + softmax_sample(&item_logits, &mut rng);
            events.push(Event { user: u, item, category, timestamp: ts });
        }
    }

    // keep only items that actually occur; their category is then always
    // recoverable from the interaction file
    let mut used = vec![false; n_items_raw];
    for e in &events {
        used[e.item] = true;
    }
    let mut remap = vec![usize::MAX; n_items_raw];
    let mut manifest = Vec::new();
    let mut features_flat: Vec<f32> = Vec::new();
    let mut gt = GroundTruth {
        item_style_cluster: Vec::new(),
        item_category: Vec::new(),
        item_style_vec: Vec::new(),
        category_prototype,
        user_pref,
        base_logits,
        input_ctx_logits,
        trans_ctx_logits,
    };
    for idx in 0..n_items_raw {
        if !used[idx] {
            continue;
        }
        remap[idx] = manifest.len();
        manifest.push(format!("i{idx}"));
        features_flat.extend(raw_features[idx].iter().map(|&v| v as f32));
        gt.item_style_cluster.push(item_style_cluster[idx]);
        gt.item_category.push(idx / config.items_per_category);
        gt.item_style_vec.push(item_style_vec[idx].clone());
    }

    let mut text = String::new();
    for e in &events {
        let item_id = &manifest[remap[e.item]];
        text.push_str(&format!("u{},{},c{},{}\n", e.user, item_id, e.category, e.timestamp));
    }

    SynthOutput {
        interactions_text: text,
        features: FeatureStore::new(f, features_flat).expect("generated features are finite"),
        manifest,
        ground_truth: gt,
    }
}
