mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mvvote::data::{
    load_multiclass, load_views, one_vs_rest, synth_multiview, write_dataset_csv, DatasetManifest,
    SynthParams,
};
use mvvote::eval::{class_curve, learning_curve, Curve};
use mvvote::{build_pool, default_depths, fit, Error, MvModel};
use serde::Serialize;

use config::{ExperimentFlags, FileConfig, TrainFlags};

#[derive(Parser, Debug)]
#[command(
    name = "mvvote",
    version,
    about = "Multiview double-weighted majority vote classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on a dataset manifest; writes model.json and trace.jsonl
    Train(TrainCmd),
    /// Score the views of a manifest with a saved model
    Predict(PredictCmd),
    /// Repeated random splits at one training size, every method
    Evaluate(EvaluateCmd),
    /// Learning curves over several training sizes
    Curve(CurveCmd),
    /// Write a synthetic multiview dataset with its manifest
    Synth(SynthCmd),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    /// Class treated as +1; every other class is -1
    #[arg(long)]
    positive_class: Option<String>,
}

#[derive(Args, Debug)]
struct TrainCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct PredictCmd {
    /// Model file written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Manifest of the views to score; labels are not needed
    #[arg(long)]
    manifest: PathBuf,
    /// Output CSV with columns index,score,label
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of labeled training examples
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[command(flatten)]
    experiment: ExperimentFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct CurveCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma-separated training sizes
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    experiment: ExperimentFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct SynthCmd {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    views: usize,
    /// Features per view
    #[arg(long, default_value_t = 5)]
    dim: usize,
    /// Share of variance common to all informative views
    #[arg(long, default_value_t = 0.3)]
    redundancy: f64,
    /// Number of label-independent views
    #[arg(long, default_value_t = 1)]
    noise_views: usize,
    /// Class mean offset of informative features
    #[arg(long, default_value_t = 0.5)]
    separation: f64,
}

const DEFAULT_REPS: usize = 20;

/// 1 bad usage or parameters, 2 bad data or files, 3 numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) => 1,
        Error::Numeric(_) | Error::TrainingAborted { .. } => 3,
        _ => 2,
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Writes the fully resolved settings next to the outputs.
fn echo_config<T: Serialize>(dir: &Path, resolved: &T) -> Result<(), Error> {
    write_file(
        &dir.join("config.json"),
        &(serde_json::to_string_pretty(resolved)? + "\n"),
    )
}

fn pick_positive(
    flag: &Option<String>,
    file: &FileConfig,
    manifest: &DatasetManifest,
) -> Option<String> {
    flag.clone()
        .or_else(|| file.positive_class.clone())
        .or_else(|| manifest.positive_class.clone())
}

fn train(cmd: &TrainCmd) -> Result<(), Error> {
    let file = FileConfig::load(cmd.train.config.as_deref())?;
    let mut cfg = file.experiment.clone();
    cmd.train.apply(&mut cfg, cmd.seed)?;
    let manifest = DatasetManifest::load(&cmd.data.manifest)?;
    let positive = pick_positive(&cmd.data.positive_class, &file, &manifest).ok_or_else(|| {
        Error::Input("no positive class: pass --positive-class or set it in the manifest".into())
    })?;
    let data = one_vs_rest(&load_multiclass(&manifest)?, &positive)?;
    let depths = cfg
        .depths
        .clone()
        .unwrap_or_else(|| default_depths(data.n_samples()));
    create_dir(&cmd.out)?;
    echo_config(
        &cmd.out,
        &serde_json::json!({
            "subcommand": "train",
            "manifest": cmd.data.manifest,
            "positive_class": positive,
            "out": cmd.out,
            "seed": cmd.seed,
            "train": cfg.train,
            "depths": depths,
        }),
    )?;

    let pool = build_pool(&data, &depths)?;
    let (model, trace) = match fit(&data, &pool, &cfg.train) {
        Ok(r) => r,
        Err(Error::TrainingAborted { reason, trace }) => {
            write_file(&cmd.out.join("trace.jsonl"), &trace.to_jsonl()?)?;
            return Err(Error::TrainingAborted { reason, trace });
        }
        Err(e) => return Err(e),
    };
    write_file(&cmd.out.join("model.json"), &model.to_json()?)?;
    write_file(&cmd.out.join("trace.jsonl"), &trace.to_jsonl()?)?;
    let accuracy = 1.0 - model.zero_one_risk(&data)?;
    println!(
        "final objective {}",
        trace.final_objective().unwrap_or(f64::NAN)
    );
    println!("training accuracy {accuracy}");
    println!("view weights {:?}", model.weights.rho);
    Ok(())
}

fn predict(cmd: &PredictCmd) -> Result<(), Error> {
    let text = std::fs::read_to_string(&cmd.model).map_err(|e| Error::Io {
        path: cmd.model.clone(),
        source: e,
    })?;
    let as_data = |e: Error, path: &Path| Error::Data {
        path: path.to_path_buf(),
        line: None,
        message: e.to_string(),
    };
    let model = MvModel::from_json(&text).map_err(|e| as_data(e, &cmd.model))?;
    let manifest = DatasetManifest::load(&cmd.manifest)?;
    let (views, _) = load_views(&manifest)?;
    let scores = model
        .scores(&views)
        .map_err(|e| as_data(e, &cmd.manifest))?;
    let mut out = String::from("index,score,label\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{s},{}", mvvote::model::sign_label(*s));
    }
    write_file(&cmd.out, &out)?;
    println!(
        "wrote {} predictions to {}",
        scores.len(),
        cmd.out.display()
    );
    Ok(())
}

fn run_curve(
    subcommand: &str,
    data_args: &DataArgs,
    out: &Path,
    seed: u64,
    sizes: Vec<usize>,
    experiment: &ExperimentFlags,
    train_flags: &TrainFlags,
) -> Result<Curve, Error> {
    let file = FileConfig::load(train_flags.config.as_deref())?;
    let mut exp = experiment.resolve(&file, DEFAULT_REPS)?;
    train_flags.apply(&mut exp.experiment, seed)?;
    let manifest = DatasetManifest::load(&data_args.manifest)?;
    let mc = load_multiclass(&manifest)?;
    let positive = if exp.classes.is_some() {
        None
    } else {
        pick_positive(&data_args.positive_class, &file, &manifest)
    };
    create_dir(out)?;
    echo_config(
        out,
        &serde_json::json!({
            "subcommand": subcommand,
            "manifest": data_args.manifest,
            "positive_class": positive,
            "out": out,
            "seed": seed,
            "sizes": sizes,
            "resolved": exp,
        }),
    )?;
    let curve = match positive {
        Some(p) => learning_curve(
            &one_vs_rest(&mc, &p)?,
            &sizes,
            exp.reps,
            &exp.methods,
            &exp.experiment,
            seed,
        )?,
        None => {
            let classes = exp.classes.clone().unwrap_or_else(|| mc.class_ids());
            class_curve(
                &mc,
                &classes,
                &sizes,
                exp.reps,
                &exp.methods,
                &exp.experiment,
                seed,
            )?
        }
    };
    curve.write(out)?;
    println!(
        "{:<12} {:>6} {:>18} {:>18}",
        "method", "m", "accuracy", "f1"
    );
    for a in &curve.aggregate {
        let pm = |mean: f64, std: Option<f64>| format!("{mean:.4} ± {:.4}", std.unwrap_or(0.0));
        println!(
            "{:<12} {:>6} {:>18} {:>18}",
            a.method.name(),
            a.m,
            pm(a.accuracy_mean, a.accuracy_std),
            pm(a.f1_mean, a.f1_std)
        );
    }
    Ok(curve)
}

fn synth(cmd: &SynthCmd) -> Result<(), Error> {
    let params = SynthParams {
        m: cmd.m,
        views: cmd.views,
        dim: cmd.dim,
        redundancy: cmd.redundancy,
        noise_views: cmd.noise_views,
        separation: cmd.separation,
        seed: cmd.seed,
    };
    let data = synth_multiview(&params)?;
    create_dir(&cmd.out)?;
    let manifest = write_dataset_csv(&data, &cmd.out)?;
    echo_config(
        &cmd.out,
        &serde_json::json!({ "subcommand": "synth", "out": cmd.out, "synth": params }),
    )?;
    println!("{}", manifest.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Train(c) => train(c),
        Command::Predict(c) => predict(c),
        Command::Evaluate(c) => run_curve(
            "evaluate",
            &c.data,
            &c.out,
            c.seed,
            vec![c.m],
            &c.experiment,
            &c.train,
        )
        .map(drop),
        Command::Curve(c) => {
            let file = FileConfig::load(c.train.config.as_deref())?;
            let sizes = c.sizes.clone().or(file.sizes).ok_or_else(|| {
                Error::Input("no training sizes: pass --sizes or set sizes in the config".into())
            })?;
            run_curve(
                "curve",
                &c.data,
                &c.out,
                c.seed,
                sizes,
                &c.experiment,
                &c.train,
            )
            .map(drop)
        }
        Command::Synth(c) => synth(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
