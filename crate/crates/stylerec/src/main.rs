use std::collections::HashSet;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stylerec::checkpoint;
use stylerec::config::RunConfig;
use stylerec::data::{
    build_sequences, chronological_split, filter_users, load_interactions, Catalog,
    CatalogBuilder, DatasetSplit, Interaction, SequenceStep, INPUT_CONTEXTS, START_BIN,
    TRANSITION_CONTEXTS,
};
use stylerec::demand::{
    bptt_train, category_probabilities, gradcheck_demand, predict_category_scores, pretrain_init,
    CaGruParams, DemandKind, DemandModel, DemandTrainConfig, GruParams,
};
use stylerec::error::{Error, Result};
use stylerec::eval::{auc, demand_auc, EvalMode, Scorer};
use stylerec::features::{read_manifest, write_manifest, FeatureStore};
use stylerec::kmeans::kmeans_restarts;
use stylerec::preference::{
    gradcheck_preference, train_preference, DeepStyleParams, ItemData, PrefTrainConfig,
    PrefVariant, Triple,
};
use stylerec::ranker::{aggregate_rank, top_k_categories};
use stylerec::synth::{generate, SynthConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "stylerec", about = "Visual preference and demand recommendation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Bpr,
    Vbpr,
    Deepstyle,
    Gru,
    Cagru,
}

impl ModelKind {
    fn pref_variant(self) -> Option<PrefVariant> {
        match self {
            ModelKind::Bpr => Some(PrefVariant::Bpr),
            ModelKind::Vbpr => Some(PrefVariant::Vbpr),
            ModelKind::Deepstyle => Some(PrefVariant::DeepStyle),
            _ => None,
        }
    }

    fn demand_kind(self) -> Option<DemandKind> {
        match self {
            ModelKind::Gru => Some(DemandKind::Gru),
            ModelKind::Cagru => Some(DemandKind::CaGru),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Warm,
    Cold,
    Both,
}

#[derive(Args)]
struct DataArgs {
    /// Interaction file: user,item,category,timestamp rows.
    #[arg(long)]
    interactions: PathBuf,
    /// Binary visual feature file.
    #[arg(long, requires = "manifest")]
    features: Option<PathBuf>,
    /// Item manifest matching the feature rows.
    #[arg(long, requires = "features")]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print split statistics.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Write the summary to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with planted structure.
    Synth {
        /// Directory receiving interactions.csv, features.vfsr, manifest.txt
        /// and ground_truth.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// key=value config file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Train a preference or demand model.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Initialize demand category embeddings from a trained deepstyle
        /// checkpoint.
        #[arg(long)]
        pretrain: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute ranking AUC on the held-out split.
    Evaluate {
        /// Preference or demand model checkpoint.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Demand checkpoint for two-part aggregated ranking.
        #[arg(long)]
        demand: Option<PathBuf>,
        /// Demand categories kept in the top part.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Write the key=value report to a file as well.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank unseen items for one user at their first held-out step.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        demand: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// User id as it appears in the interaction file.
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck {
        /// Scale one analytic gradient block to prove the check can fail.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Cluster learned style features and export item,category,cluster rows.
    ExportStyles {
        /// Deepstyle checkpoint.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 8)]
        clusters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Loaded {
    catalog: Catalog,
    filtered: Vec<Interaction>,
    split: DatasetSplit,
    features: Option<FeatureStore>,
}

fn load_dataset(data: &DataArgs) -> Result<Loaded> {
    let mut builder = match &data.manifest {
        Some(path) => CatalogBuilder::from_manifest(&read_manifest(path)?)?,
        None => CatalogBuilder::new(),
    };
    let file = fs::File::open(&data.interactions)?;
    let raw = load_interactions(BufReader::new(file), &mut builder)?;
    let catalog = builder.finish()?;
    let features = match &data.features {
        Some(path) => {
            let f = FeatureStore::load(path)?;
            if f.n_items() != catalog.n_items() {
                return Err(Error::Dimension(format!(
                    "feature file has {} rows but the manifest lists {} items",
                    f.n_items(),
                    catalog.n_items()
                )));
            }
            Some(f)
        }
        None => None,
    };
    let filtered = filter_users(&raw);
    if filtered.is_empty() {
        return Err(Error::Data("no users left after the activity filter".into()));
    }
    let split = chronological_split(&filtered, 0.8);
    Ok(Loaded { catalog, filtered, split, features })
}

fn item_data<'a>(loaded: &'a Loaded) -> ItemData<'a> {
    ItemData { features: loaded.features.as_ref(), item_category: &loaded.catalog.item_category }
}

fn run_ingest(data: &DataArgs, out: Option<&Path>) -> Result<u8> {
    let loaded = load_dataset(data)?;
    let sequences = build_sequences(&loaded.filtered);
    let mut users_seen: Vec<usize> = loaded.filtered.iter().map(|i| i.user).collect();
    users_seen.sort_unstable();
    users_seen.dedup();
    let mut report = String::new();
    report.push_str(&format!("interactions_filtered={}\n", loaded.filtered.len()));
    report.push_str(&format!("users={}\n", users_seen.len()));
    report.push_str(&format!("items={}\n", loaded.catalog.n_items()));
    report.push_str(&format!("categories={}\n", loaded.catalog.n_categories()));
    report.push_str(&format!("sequences={}\n", sequences.len()));
    report.push_str(&format!("train_interactions={}\n", loaded.split.train.len()));
    report.push_str(&format!("test_interactions={}\n", loaded.split.test.len()));
    report.push_str(&format!("cold_items={}\n", loaded.split.cold_items.len()));
    match out {
        Some(path) => fs::write(path, &report)?,
        None => print!("{report}"),
    }
    Ok(0)
}

fn run_synth(
    out_dir: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    users: Option<usize>,
    beta: Option<f64>,
) -> Result<u8> {
    let mut rc = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(),
    };
    if let Some(s) = seed {
        rc.set("seed", s);
    }
    if let Some(u) = users {
        rc.set("n_users", u);
    }
    if let Some(b) = beta {
        rc.set("beta", b);
    }
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_users: rc.get_usize("n_users", defaults.n_users)?,
        n_categories: rc.get_usize("n_categories", defaults.n_categories)?,
        items_per_category: rc.get_usize("items_per_category", defaults.items_per_category)?,
        feature_dim: rc.get_usize("feature_dim", defaults.feature_dim)?,
        style_dim: rc.get_usize("style_dim", defaults.style_dim)?,
        n_styles: rc.get_usize("n_styles", defaults.n_styles)?,
        beta: rc.get_f64("beta", defaults.beta)?,
        temperature: rc.get_f64("temperature", defaults.temperature)?,
        seed: rc.get_u64("seed", defaults.seed)?,
        seq_len_min: rc.get_usize("seq_len_min", defaults.seq_len_min)?,
        seq_len_max: rc.get_usize("seq_len_max", defaults.seq_len_max)?,
    };
    if cfg.seq_len_min > cfg.seq_len_max || cfg.seq_len_min == 0 {
        return Err(Error::Data("sequence length bounds are inconsistent".into()));
    }
    let out = generate(&cfg);
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("interactions.csv"), &out.interactions_text)?;
    out.features.save(&out_dir.join("features.vfsr"))?;
    write_manifest(&out_dir.join("manifest.txt"), &out.manifest)?;
    let gt = serde_json::to_string(&out.ground_truth)
        .map_err(|e| Error::Data(format!("ground truth serialization failed: {e}")))?;
    fs::write(out_dir.join("ground_truth.json"), gt)?;
    println!("items={}", out.manifest.len());
    println!("interactions={}", out.interactions_text.lines().count());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn run_train(
    model: ModelKind,
    data: &DataArgs,
    out: &Path,
    config: Option<&Path>,
    pretrain: Option<&Path>,
    d: Option<usize>,
    learning_rate: Option<f64>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> Result<u8> {
    let mut rc = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(),
    };
    if let Some(v) = d {
        rc.set("d", v);
    }
    if let Some(v) = learning_rate {
        rc.set("learning_rate", v);
    }
    if let Some(v) = lambda {
        rc.set("lambda", v);
    }
    if let Some(v) = epochs {
        rc.set("epochs", v);
    }
    if let Some(v) = seed {
        rc.set("seed", v);
    }

    let loaded = load_dataset(data)?;
    if let Some(variant) = model.pref_variant() {
        if pretrain.is_some() {
            eprintln!("--pretrain only applies to demand models");
            return Ok(EXIT_USAGE);
        }
        if variant.uses_features() && loaded.features.is_none() {
            eprintln!("{} requires --features and --manifest", variant.name());
            return Ok(EXIT_USAGE);
        }
        let dft = PrefTrainConfig::default();
        let cfg = PrefTrainConfig {
            d: rc.get_usize("d", dft.d)?,
            learning_rate: rc.get_f64("learning_rate", dft.learning_rate)?,
            lambda: rc.get_f64("lambda", dft.lambda)?,
            epochs: rc.get_usize("epochs", dft.epochs)?,
            seed: rc.get_u64("seed", dft.seed)?,
            init_scale: rc.get_f64("init_scale", dft.init_scale)?,
        };
        let (params, losses) = train_preference(
            &loaded.catalog,
            &loaded.split.train,
            loaded.features.as_ref(),
            &cfg,
            variant,
        )?;
        for (e, l) in losses.iter().enumerate() {
            println!("epoch={} loss={l:.6}", e + 1);
        }
        checkpoint::save_preference(out, &params)?;
    } else {
        let kind = model.demand_kind().expect("model is preference or demand");
        let dft = DemandTrainConfig::default();
        let cfg = DemandTrainConfig {
            d: rc.get_usize("d", dft.d)?,
            learning_rate: rc.get_f64("learning_rate", dft.learning_rate)?,
            lambda: rc.get_f64("lambda", dft.lambda)?,
            epochs: rc.get_usize("epochs", dft.epochs)?,
            seed: rc.get_u64("seed", dft.seed)?,
            init_scale_matrix: rc.get_f64("init_scale_matrix", dft.init_scale_matrix)?,
            init_scale_embed: rc.get_f64("init_scale_embed", dft.init_scale_embed)?,
        };
        let pretrained = match pretrain {
            Some(path) => {
                let params = checkpoint::load_preference(path)?;
                if params.cat_vecs.rows != loaded.catalog.n_categories() {
                    return Err(Error::Dimension(format!(
                        "pretrained model covers {} categories, dataset has {}",
                        params.cat_vecs.rows,
                        loaded.catalog.n_categories()
                    )));
                }
                Some(pretrain_init(&params, cfg.d)?)
            }
            None => None,
        };
        let sequences = build_sequences(&loaded.split.train);
        let (demand, losses) = bptt_train(
            &sequences,
            loaded.catalog.n_categories(),
            &cfg,
            kind,
            pretrained.as_ref(),
        )?;
        for (e, l) in losses.iter().enumerate() {
            println!("epoch={} loss={l:.6}", e + 1);
        }
        checkpoint::save_demand(out, &demand)?;
    }
    Ok(0)
}

fn run_evaluate(
    model: &Path,
    data: &DataArgs,
    demand: Option<&Path>,
    k: usize,
    mode: ModeArg,
    report_path: Option<&Path>,
) -> Result<u8> {
    let loaded = load_dataset(data)?;
    let kind = checkpoint::peek_kind(model)?;
    let mut report = String::new();
    report.push_str(&format!("model={kind}\n"));

    if kind == "gru" || kind == "cagru" {
        if demand.is_some() {
            eprintln!("--demand is redundant when --model is a demand checkpoint");
            return Ok(EXIT_USAGE);
        }
        let dm = checkpoint::load_demand(model)?;
        if dm.n_categories() != loaded.catalog.n_categories() {
            return Err(Error::Dimension("category count mismatch".into()));
        }
        let auc_val = demand_auc(&dm, &loaded.catalog, &loaded.filtered, &loaded.split)?;
        report.push_str(&format!("demand_auc={auc_val:.6}\n"));
    } else {
        let params = checkpoint::load_preference(model)?;
        if params.variant.uses_features() && loaded.features.is_none() {
            eprintln!("{} requires --features and --manifest", params.variant.name());
            return Ok(EXIT_USAGE);
        }
        let dm = demand.map(checkpoint::load_demand).transpose()?;
        let idata = item_data(&loaded);
        let scorer = match &dm {
            Some(demand_model) => {
                report.push_str(&format!("k={k}\n"));
                Scorer::Aggregate { params: &params, data: idata, demand: demand_model, k }
            }
            None => Scorer::Preference { params: &params, data: idata },
        };
        let modes: &[EvalMode] = match mode {
            ModeArg::Warm => &[EvalMode::Warm],
            ModeArg::Cold => &[EvalMode::Cold],
            ModeArg::Both => &[EvalMode::Warm, EvalMode::Cold],
        };
        for m in modes {
            let r = auc(&scorer, &loaded.catalog, &loaded.filtered, &loaded.split, *m)?;
            report.push_str(&format!("{}_auc={:.6}\n", m.name(), r.auc));
            report.push_str(&format!("{}_users={}\n", m.name(), r.users_evaluated));
            report.push_str(&format!("{}_pairs={}\n", m.name(), r.pair_count));
        }
    }
    print!("{report}");
    if let Some(path) = report_path {
        fs::write(path, &report)?;
    }
    Ok(0)
}

fn run_recommend(
    model: &Path,
    data: &DataArgs,
    demand: Option<&Path>,
    k: usize,
    user: &str,
    top: usize,
) -> Result<u8> {
    let loaded = load_dataset(data)?;
    let params = checkpoint::load_preference(model)?;
    if params.variant.uses_features() && loaded.features.is_none() {
        eprintln!("{} requires --features and --manifest", params.variant.name());
        return Ok(EXIT_USAGE);
    }
    let uid = loaded
        .catalog
        .user_ids
        .iter()
        .position(|u| u == user)
        .ok_or_else(|| Error::Data(format!("unknown user {user:?}")))?;

    let sequences = build_sequences(&loaded.filtered);
    let seq = sequences
        .iter()
        .find(|s| s.user == uid)
        .ok_or_else(|| Error::Data(format!("user {user:?} was removed by the activity filter")))?;
    let train_count = loaded.split.train.iter().filter(|i| i.user == uid).count();
    if train_count >= seq.steps.len() {
        return Err(Error::Data(format!("user {user:?} has no held-out step")));
    }
    let target: &SequenceStep = &seq.steps[train_count];

    let idata = item_data(&loaded);
    let reprs = params.all_item_reprs(&idata)?;
    let p_u = params.user_vecs.row(uid);
    let scores: Vec<f64> = reprs.iter().map(|r| stylerec::linalg::dot(p_u, r)).collect();

    let top_cats = match demand {
        Some(path) => {
            let dm = checkpoint::load_demand(path)?;
            if dm.n_categories() != loaded.catalog.n_categories() {
                return Err(Error::Dimension("category count mismatch".into()));
            }
            let mut h = vec![0.0; dm.d()];
            for step in &seq.steps[..train_count] {
                h = dm.step(&h, step)?;
            }
            let cat_scores =
                predict_category_scores(&dm, &h, target.input_ctx, target.transition_ctx)?;
            top_k_categories(&category_probabilities(&cat_scores), k)
        }
        // without a demand model every category is in the top part
        None => (0..loaded.catalog.n_categories()).collect(),
    };

    let selected: HashSet<usize> =
        loaded.filtered.iter().filter(|i| i.user == uid).map(|i| i.item).collect();
    let ranked = aggregate_rank(&scores, &loaded.catalog.item_category, &top_cats);
    println!("user,rank,item,category,in_top_k,score");
    let mut rank = 0usize;
    for (item, key) in ranked {
        if selected.contains(&item) {
            continue;
        }
        rank += 1;
        if rank > top {
            break;
        }
        println!(
            "{user},{rank},{},{},{},{:.6}",
            loaded.catalog.item_ids[item],
            loaded.catalog.category_ids[loaded.catalog.item_category[item]],
            key.in_top_k,
            key.score
        );
    }
    Ok(0)
}

fn random_pref_instance(rng: &mut ChaCha8Rng, variant: PrefVariant) -> Result<f64> {
    let (n_users, n_items, n_cats, feat_dim) = (5, 8, 3, 6);
    let cfg = PrefTrainConfig { d: 4, init_scale: 0.5, seed: rng.gen(), ..Default::default() };
    let params = DeepStyleParams::init(variant, n_users, n_items, n_cats, feat_dim, &cfg);
    let feats: Vec<f32> = (0..n_items * feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let store = FeatureStore::new(feat_dim, feats)?;
    let cats: Vec<usize> = (0..n_items).map(|_| rng.gen_range(0..n_cats)).collect();
    let data = ItemData {
        features: variant.uses_features().then_some(&store),
        item_category: &cats,
    };
    let pos = rng.gen_range(0..n_items);
    let mut neg = rng.gen_range(0..n_items);
    while neg == pos {
        neg = rng.gen_range(0..n_items);
    }
    let triple = Triple { user: rng.gen_range(0..n_users), pos_item: pos, neg_item: neg };
    gradcheck_preference(&params, &data, &triple, 0.01, 1e-5, None)
}

fn random_sequence(rng: &mut ChaCha8Rng, n_cats: usize, len: usize) -> Vec<SequenceStep> {
    (0..len)
        .map(|t| SequenceStep {
            category: rng.gen_range(0..n_cats),
            item: 0,
            input_ctx: rng.gen_range(0..INPUT_CONTEXTS),
            transition_ctx: if t == 0 {
                START_BIN
            } else {
                rng.gen_range(0..TRANSITION_CONTEXTS - 1)
            },
            timestamp: t as i64,
        })
        .collect()
}

fn random_demand_instance(rng: &mut ChaCha8Rng, kind: DemandKind) -> Result<f64> {
    let n_cats = 5;
    let cfg = DemandTrainConfig {
        d: 4,
        init_scale_matrix: 0.5,
        init_scale_embed: 0.5,
        seed: rng.gen(),
        ..Default::default()
    };
    let model = match kind {
        DemandKind::Gru => DemandModel::Gru(GruParams::init(n_cats, &cfg)),
        DemandKind::CaGru => DemandModel::CaGru(CaGruParams::init(n_cats, &cfg)),
    };
    let steps = random_sequence(rng, n_cats, 4);
    gradcheck_demand(&model, &steps, 0.01, 1e-5, None)
}

fn run_gradcheck(inject_fault: bool, seed: u64) -> Result<u8> {
    const THRESHOLD: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;

    if inject_fault {
        // one faulty instance per family must trip the check
        let cfg = PrefTrainConfig { d: 4, init_scale: 0.5, seed, ..Default::default() };
        let params = DeepStyleParams::init(PrefVariant::Bpr, 3, 4, 2, 0, &cfg);
        let cats = vec![0, 1, 0, 1];
        let data = ItemData { features: None, item_category: &cats };
        let triple = Triple { user: 0, pos_item: 1, neg_item: 2 };
        let e1 = gradcheck_preference(&params, &data, &triple, 0.01, 1e-5, Some(2.0))?;
        let dcfg = DemandTrainConfig {
            d: 4,
            init_scale_matrix: 0.5,
            init_scale_embed: 0.5,
            seed,
            ..Default::default()
        };
        let model = DemandModel::CaGru(CaGruParams::init(5, &dcfg));
        let steps = random_sequence(&mut rng, 5, 4);
        let e2 = gradcheck_demand(&model, &steps, 0.01, 1e-5, Some(2.0))?;
        println!("injected fault errors: preference={e1:.3e} demand={e2:.3e}");
        if e1 > THRESHOLD && e2 > THRESHOLD {
            println!("fault detected as expected");
            return Ok(EXIT_CHECK);
        }
        println!("FAIL: injected fault was not detected");
        return Ok(EXIT_CHECK);
    }

    for variant in [PrefVariant::Bpr, PrefVariant::Vbpr, PrefVariant::DeepStyle] {
        let mut max_err = 0.0f64;
        for _ in 0..34 {
            max_err = max_err.max(random_pref_instance(&mut rng, variant)?);
        }
        println!("{}: max relative error {max_err:.3e}", variant.name());
        worst = worst.max(max_err);
    }
    for kind in [DemandKind::Gru, DemandKind::CaGru] {
        let mut max_err = 0.0f64;
        for _ in 0..25 {
            max_err = max_err.max(random_demand_instance(&mut rng, kind)?);
        }
        println!("{}: max relative error {max_err:.3e}", kind.name());
        worst = worst.max(max_err);
    }
    if worst < THRESHOLD {
        println!("gradcheck passed (worst {worst:.3e} < {THRESHOLD:.0e})");
        Ok(0)
    } else {
        println!("gradcheck FAILED (worst {worst:.3e} >= {THRESHOLD:.0e})");
        Ok(EXIT_CHECK)
    }
}

fn run_export_styles(
    model: &Path,
    data: &DataArgs,
    clusters: usize,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    let loaded = load_dataset(data)?;
    let params = checkpoint::load_preference(model)?;
    if params.variant != PrefVariant::DeepStyle {
        eprintln!("export-styles requires a deepstyle checkpoint");
        return Ok(EXIT_USAGE);
    }
    if loaded.features.is_none() {
        eprintln!("export-styles requires --features and --manifest");
        return Ok(EXIT_USAGE);
    }
    let idata = item_data(&loaded);
    let points: Vec<Vec<f64>> = (0..loaded.catalog.n_items())
        .map(|i| params.style_feature(&idata, i))
        .collect::<Result<_>>()?;
    let assign = kmeans_restarts(&points, clusters, 200, 10, seed);
    let mut w = fs::File::create(out)?;
    writeln!(w, "item,category,cluster")?;
    for (i, &c) in assign.iter().enumerate() {
        writeln!(
            w,
            "{},{},{c}",
            loaded.catalog.item_ids[i],
            loaded.catalog.category_ids[loaded.catalog.item_category[i]]
        )?;
    }
    println!("clustered {} items into {} groups", assign.len(), clusters);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ingest { data, out } => run_ingest(&data, out.as_deref()),
        Command::Synth { out_dir, config, seed, users, beta } => {
            run_synth(&out_dir, config.as_deref(), seed, users, beta)
        }
        Command::Train {
            model,
            data,
            out,
            config,
            pretrain,
            d,
            learning_rate,
            lambda,
            epochs,
            seed,
        } => run_train(
            model,
            &data,
            &out,
            config.as_deref(),
            pretrain.as_deref(),
            d,
            learning_rate,
            lambda,
            epochs,
            seed,
        ),
        Command::Evaluate { model, data, demand, k, mode, report } => {
            run_evaluate(&model, &data, demand.as_deref(), k, mode, report.as_deref())
        }
        Command::Recommend { model, data, demand, k, user, top } => {
            run_recommend(&model, &data, demand.as_deref(), k, &user, top)
        }
        Command::Gradcheck { inject_fault, seed } => run_gradcheck(inject_fault, seed),
        Command::ExportStyles { model, data, clusters, seed, out } => {
            run_export_styles(&model, &data, clusters, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
