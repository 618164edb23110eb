//! Command-line front end.

mod commands;
mod manifest;
mod settings;
mod sweep;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

pub use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "rgnn", version, about = "Review-graph rating prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw records, split, build vocabulary, documents and graphs.
    Preprocess(CommonArgs),
    /// Train on a preprocessed corpus and keep the best-validation checkpoint.
    Train(CommonArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Train and evaluate the ten named model variants.
    Ablate(CommonArgs),
    /// Train and evaluate every cell of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Export per-word importance scores and pooling decisions.
    Explain(ExplainArgs),
    /// Finite-difference check of the loss gradient on toy instances.
    Gradcheck(GradcheckArgs),
    /// Write a planted synthetic corpus as CSV.
    Synth(SynthArgs),
}

macro_rules! setting_flags {
    (values { $($vf:ident = $vk:literal : $vh:literal,)* } switches { $($sf:ident = $sk:literal : $sh:literal,)* }) => {
        /// One flag per setting; each overrides the config file.
        #[derive(Clone, Debug, Default, Args)]
        pub struct SettingFlags {
            $(
                #[arg(long = $vk, help = $vh, value_name = "VALUE")]
                pub $vf: Option<String>,
            )*
            $(
                #[arg(long = $sk, help = $sh, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
                pub $sf: Option<String>,
            )*
        }

        impl SettingFlags {
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $( if let Some(v) = &self.$vf { out.push(($vk, v.as_str())); } )*
                $( if let Some(v) = &self.$sf { out.push(($sk, v.as_str())); } )*
                out
            }
        }
    };
}

setting_flags! {
    values {
        data = "data": "Input: raw records for preprocess/synth, a preprocessed corpus directory otherwise",
        format = "format": "Raw record format: amazon or csv",
        out = "out": "Output directory",
        seed = "seed": "Root seed for split, init, shuffle and graph coins",
        d0 = "d0": "Word embedding size",
        d1 = "d1": "Entity embedding and readout size",
        d2 = "d2": "Graph layer hidden size",
        layers = "layers": "Number of attention + pooling layers",
        alpha = "alpha": "Pooling ratio in (0, 1]",
        omega = "omega": "Sliding window size (>= 2)",
        fm_factors = "fm-factors": "FM factor size, or auto for d2",
        leaky_slope = "leaky-slope": "LeakyReLU slope of the attention logits",
        epochs = "epochs": "Maximum training epochs",
        batch_size = "batch-size": "Mini-batch size",
        learning_rate = "learning-rate": "Adam learning rate",
        lambda = "lambda": "L2 regularization weight",
        patience = "patience": "Early-stopping patience in epochs",
        min_count = "min-count": "Minimum document frequency of a vocabulary word",
        max_vocab = "max-vocab": "Vocabulary size cap",
        keyword_cap = "keyword-cap": "Keyword budget per entity document",
        stop_words = "stop-words": "Stop-word list: english or none",
    }
    switches {
        no_edge_types = "no-edge-types": "Ablation: drop edge types from attention",
        shared_theta = "shared-theta": "Ablation: one measurement vector for all entities",
        no_diversity_term = "no-diversity-term": "Ablation: importance without neighborhood diversity",
        no_pooling = "no-pooling": "Ablation: no pooling layers",
        no_graph = "no-graph": "Ablation: keyword max-pool instead of graphs",
        dot_product_head = "dot-product-head": "Ablation: dot product instead of the FM head",
        drop_forward = "drop-forward": "Ablation: remove forward edges",
        drop_backward = "drop-backward": "Ablation: remove backward edges",
        drop_self_loop = "drop-self-loop": "Ablation: remove self loops",
        sequential = "sequential": "Run on one thread",
    }
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: SettingFlags,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            s.apply_text(&text)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        for (k, v) in self.flags.pairs() {
            s.set(k, v).with_context(|| format!("flag --{k}"))?;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid as `key=v1,v2;key=v3`, keys as in the config file.
    #[arg(long)]
    pub grid: String,
}

#[derive(Clone, Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// User id; with --item explains a single pair.
    #[arg(long, requires = "item")]
    pub user: Option<String>,
    #[arg(long, requires = "user")]
    pub item: Option<String>,
    /// Without --user/--item, explain the first N test pairs.
    #[arg(long, default_value_t = 10)]
    pub limit: usize,
}

#[derive(Clone, Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    /// Embedding and hidden size of the toy models.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub users: usize,
    #[arg(long, default_value_t = 10)]
    pub items: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a.resolve()?),
        Command::Train(a) => commands::train(&a.resolve()?),
        Command::Eval(a) => commands::eval(&a),
        Command::Ablate(a) => commands::ablate(&a.resolve()?),
        Command::Sweep(a) => sweep::sweep(&a.common.resolve()?, &a.grid),
        Command::Explain(a) => commands::explain(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}
