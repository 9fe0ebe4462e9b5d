//! `poseval`: pose distances, evaluation, pose-space post-processing,
//! multiview annotation and synthetic scene generation from the shell.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poseval::config::{
    DEFAULT_DELTA_FRACTION, DEFAULT_DELTA_O, DEFAULT_KEEP, DEFAULT_MERGE_FRACTION,
    DEFAULT_MIN_RELATIVE_DENSITY,
};
use poseval::scene::{DEFAULT_HEIGHT, DEFAULT_WIDTH};

#[derive(Parser, Debug)]
#[command(name = "poseval", version, about = "Symmetry-aware 6D pose evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Thresholds {
    /// Match threshold as a fraction of the object diameter.
    #[arg(long, default_value_t = DEFAULT_DELTA_FRACTION)]
    pub delta_fraction: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between two poses, next to ADI-style measures.
    Distance {
        #[arg(long)]
        object: PathBuf,
        /// First pose (JSON array, JSON {R, t} or CSV row).
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Precision/recall and AP over a directory of scenes.
    Evaluate {
        #[arg(long)]
        object: PathBuf,
        /// Ground-truth scene files (*.json).
        #[arg(long)]
        gt: PathBuf,
        /// Predictions per scene: <stem>.jsonl votes or <stem>.json scene files.
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Occlusion threshold for instances of interest.
        #[arg(long, default_value_t = DEFAULT_DELTA_O)]
        delta_o: f64,
        /// Per-scene result limits for APn.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3])]
        top_n: Vec<usize>,
        /// Also report the mean of per-scene APs.
        #[arg(long)]
        per_scene_ap: bool,
        /// Report JSON path; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// PR curve CSV path.
        #[arg(long)]
        pr_csv: Option<PathBuf>,
    },
    /// Score-ordered duplicate suppression in pose space.
    Filter {
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        votes: PathBuf,
        /// Suppression radius; defaults to the match threshold.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_KEEP)]
        keep: usize,
        /// Dissimilarity measure by name.
        #[arg(long, default_value = "pose")]
        measure: String,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Output JSON lines; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean-shift modes of scored pose votes.
    Meanshift {
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        votes: PathBuf,
        /// Kernel bandwidth; defaults to the match threshold.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value = "epanechnikov")]
        kernel: String,
        /// Number of top-scored votes used as seeds.
        #[arg(long, default_value_t = DEFAULT_KEEP)]
        seeds: usize,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// Modes closer than this fraction of the bandwidth are merged.
        #[arg(long, default_value_t = DEFAULT_MERGE_FRACTION)]
        merge_fraction: f64,
        /// Modes weaker than this fraction of the strongest are dropped.
        #[arg(long, default_value_t = DEFAULT_MIN_RELATIVE_DENSITY)]
        min_relative_density: f64,
        #[command(flatten)]
        thresholds: Thresholds,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiview PnP ground-truth poses from 2D-3D correspondences.
    Annotate {
        #[arg(long)]
        correspondences: PathBuf,
        /// Express poses for this object's centered model frame.
        #[arg(long)]
        object: Option<PathBuf>,
        /// Fits with a larger RMS reprojection error (px) are failures.
        #[arg(long, default_value_t = poseval::pnp::DEFAULT_DIVERGENCE_RMS)]
        divergence_rms: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic bin scenes with occlusion rates and depth/id images.
    GenScenes {
        #[arg(long)]
        object: PathBuf,
        /// Number of scenes.
        #[arg(long)]
        count: usize,
        /// Instances per scene.
        #[arg(long)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_HEIGHT)]
        height: usize,
    },
    /// Recomputes occlusion rates of a scene file by rendering.
    Occlusion {
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Image size; defaults to the scene's, else 640x480.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Distance { object, a, b, thresholds } => commands::distance::run(&object, &a, &b, &thresholds),
        Command::Evaluate {
            object,
            gt,
            pred,
            thresholds,
            delta_o,
            top_n,
            per_scene_ap,
            report,
            pr_csv,
        } => commands::evaluate::run(commands::evaluate::Options {
            object,
            gt,
            pred,
            delta_fraction: thresholds.delta_fraction,
            delta_o,
            top_n,
            per_scene_ap,
            report,
            pr_csv,
        }),
        Command::Filter {
            object,
            votes,
            radius,
            keep,
            measure,
            thresholds,
            out,
        } => commands::filter::run(&object, &votes, radius, keep, &measure, &thresholds, out.as_deref()),
        Command::Meanshift {
            object,
            votes,
            bandwidth,
            kernel,
            seeds,
            max_iter,
            merge_fraction,
            min_relative_density,
            thresholds,
            out,
        } => commands::meanshift::run(commands::meanshift::Options {
            object,
            votes,
            bandwidth,
            kernel,
            seeds,
            max_iter,
            merge_fraction,
            min_relative_density,
            delta_fraction: thresholds.delta_fraction,
            out,
        }),
        Command::Annotate {
            correspondences,
            object,
            divergence_rms,
            out,
        } => commands::annotate::run(&correspondences, object.as_deref(), divergence_rms, &out),
        Command::GenScenes {
            object,
            count,
            instances,
            seed,
            out,
            width,
            height,
        } => commands::gen_scenes::run(&object, count, instances, seed, &out, width, height),
        Command::Occlusion {
            object,
            scene,
            width,
            height,
            out,
        } => commands::occlusion::run(&object, &scene, width, height, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
