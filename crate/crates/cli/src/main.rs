//! `gcmp` — drives the event-classification pipeline: generate synthetic
//! data, extract GCMP images, train the stage models, predict, evaluate,
//! run the ablations, and benchmark.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error. Diagnostics go
//! to stderr; results go to files only.

mod commands;
mod config;
mod run_manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gcmp", version, about = "basketball event classification from global/collective motion patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic event dataset.
    Gen {
        /// Base event classes (the taxonomy is fixed at 6).
        #[arg(long, default_value_t = 6)]
        classes: usize,
        /// Clips per class, train + test.
        #[arg(long = "per-class")]
        per_class: usize,
        /// Of those, clips reserved for the test split.
        #[arg(long = "test-per-class", default_value_t = 0)]
        test_per_class: usize,
        /// Square frame edge in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Frames per clip.
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute GCMP images (and optionally raw flow dumps) for clips.
    Flow {
        /// A clip directory or a dataset root containing clips/.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write raw fields as .flo files.
        #[arg(long = "dump-flo", default_value_t = false)]
        dump_flo: bool,
        /// Key-value config file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one pipeline stage on the train split of a dataset.
    Train {
        /// occ5 | pre2 | postsf | flat6 | occ5raw | flat6raw
        #[arg(long)]
        stage: String,
        #[arg(long)]
        data: PathBuf,
        /// Key-value config file with solver/model/training keys.
        #[arg(long)]
        hyper: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the configured batch size.
        #[arg(long)]
        batch: Option<usize>,
        /// Override the configured base learning rate.
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Predict events with the three trained stage models.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "ckpt-occ")]
        ckpt_occ: PathBuf,
        #[arg(long = "ckpt-pre")]
        ckpt_pre: PathBuf,
        #[arg(long = "ckpt-post")]
        ckpt_post: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which split to predict: test | train | all.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a prediction file against the truth manifest.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also render the confusion matrix as a PGM heat image.
        #[arg(long, default_value_t = false)]
        pgm: bool,
    },
    /// Controlled comparisons: input ablation (gcmp) or cascade ablation
    /// (ontology).
    Ablate {
        /// gcmp | ontology
        #[arg(long)]
        mode: String,
        #[arg(long)]
        data: PathBuf,
        /// How many training seeds to average over.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hyper: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Time the prediction phases over a dataset.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "ckpt-occ")]
        ckpt_occ: PathBuf,
        #[arg(long = "ckpt-pre")]
        ckpt_pre: PathBuf,
        #[arg(long = "ckpt-post")]
        ckpt_post: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Count optical-flow time in the totals (excluded by default).
        #[arg(long = "include-flow", default_value_t = false)]
        include_flow: bool,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if let Some(core) = e.downcast_ref::<gcmp_core::Error>() {
        return if core.is_io() { 3 } else { 2 };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            classes,
            per_class,
            test_per_class,
            size,
            frames,
            seed,
            out,
        } => commands::gen::run(classes, per_class, test_per_class, size, frames, seed, &out),
        Command::Flow {
            input,
            out,
            dump_flo,
            config,
        } => commands::flow::run(&input, &out, dump_flo, config.as_deref()),
        Command::Train {
            stage,
            data,
            hyper,
            seed,
            out,
            epochs,
            batch,
            lr,
        } => commands::train::run(&stage, &data, hyper.as_deref(), seed, &out, epochs, batch, lr),
        Command::Predict {
            data,
            ckpt_occ,
            ckpt_pre,
            ckpt_post,
            out,
            split,
            config,
        } => commands::predict::run(&data, &ckpt_occ, &ckpt_pre, &ckpt_post, &out, &split, config.as_deref()),
        Command::Eval { pred, truth, out, pgm } => commands::eval::run(&pred, &truth, &out, pgm),
        Command::Ablate {
            mode,
            data,
            seeds,
            seed,
            out,
            hyper,
            epochs,
        } => commands::ablate::run(&mode, &data, seeds, seed, &out, hyper.as_deref(), epochs),
        Command::Bench {
            data,
            ckpt_occ,
            ckpt_pre,
            ckpt_post,
            out,
            include_flow,
            split,
            config,
        } => commands::bench::run(
            &data,
            &ckpt_occ,
            &ckpt_pre,
            &ckpt_post,
            &out,
            include_flow,
            &split,
            config.as_deref(),
        ),
    }
}
