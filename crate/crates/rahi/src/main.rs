//! Command-line surface: generate a synthetic corpus, train the three
//! stages, evaluate, run ablations and the dynamic time-window evaluation,
//! and dump the per-item distribution view.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rahi::config::Config;
use rahi::dataio::{self, ModelArtifact, SyntheticSpec};
use rahi::error::RahiError;
use rahi::pipeline::{
    self, ablate, dynamic_eval, train_all, SplitDataset, TimeThresholdSchedule,
};

#[derive(Parser)]
#[command(
    name = "rahi",
    about = "Hybrid veracity classification: an uncertainty-carrying classifier fused with a reliability-weighted crowd",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file (flat key = value text); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for generation, splitting and training.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for generated files, models and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// News file (defaults to <out>/news.jsonl).
    #[arg(long)]
    news: Option<PathBuf>,
    /// Comments file (defaults to <out>/comments.jsonl).
    #[arg(long)]
    comments: Option<PathBuf>,
    /// Model file (defaults to <out>/model.json).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (news, comments, ground-truth sidecar).
    Synth(CommonArgs),
    /// Train the classifier, the user reliabilities and the fusion encoder.
    Train(CommonArgs),
    /// Evaluate the trained model on the test split.
    Eval(CommonArgs),
    /// Run the four ablation arms (hybrid, machine-only, crowd-only,
    /// no-adjustment).
    Ablate(CommonArgs),
    /// Evaluate over growing comment windows on the default time schedule.
    Dynamic(CommonArgs),
    /// Dump the machine Gaussian, crowd Beta and fused parameters for one
    /// news item.
    Inspect {
        #[command(flatten)]
        common: CommonArgs,
        /// Id of the news item to inspect.
        #[arg(long = "news-id")]
        news_id: String,
    },
}

impl CommonArgs {
    fn config(&self) -> Result<Config, RahiError> {
        match &self.config {
            Some(path) => Config::load(path),
            None => Ok(Config::default()),
        }
    }

    fn news_path(&self) -> PathBuf {
        self.news.clone().unwrap_or_else(|| self.out.join("news.jsonl"))
    }

    fn comments_path(&self) -> PathBuf {
        self.comments.clone().unwrap_or_else(|| self.out.join("comments.jsonl"))
    }

    fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.json"))
    }

    fn ensure_out(&self) -> Result<(), RahiError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| RahiError::io(self.out.display().to_string(), e))
    }
}

fn load_dataset(args: &CommonArgs, cfg: &Config, seed: u64) -> Result<SplitDataset, RahiError> {
    let ingested = dataio::ingest(
        &args.news_path(),
        &args.comments_path(),
        cfg.activity_threshold,
        cfg.activity_mode,
    )?;
    if ingested.duplicate_comments + ingested.orphan_comments + ingested.empty_news > 0 {
        eprintln!(
            "ingest: dropped {} duplicate comments, {} orphan comments, {} empty news",
            ingested.duplicate_comments, ingested.orphan_comments, ingested.empty_news
        );
    }
    if ingested.low_activity_users > 0 {
        eprintln!(
            "ingest: {} users below the activity threshold ({} comments filtered)",
            ingested.low_activity_users, ingested.low_activity_comments
        );
    }
    let index = dataio::index_of(&ingested);
    Ok(SplitDataset::split(
        ingested.news,
        index,
        ingested.commenter_counts,
        cfg,
        seed,
    ))
}

/// Writes one line to stdout; a closed pipe (e.g. piping into `head`) is a
/// clean early exit, not a panic.
macro_rules! out {
    ($($arg:tt)*) => {{
        let mut stdout = std::io::stdout().lock();
        if writeln!(stdout, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

fn print_report(arm: &str, r: &pipeline::MetricsReport) {
    let auc = r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
    out!(
        "{arm}: accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {auc}",
        r.accuracy, r.precision, r.recall, r.f1
    );
}

fn run(cli: Cli) -> Result<(), RahiError> {
    match cli.command {
        Command::Synth(args) => {
            let cfg = args.config()?;
            args.ensure_out()?;
            let spec = SyntheticSpec::from_config(&cfg, args.seed);
            let corpus = dataio::generate_synthetic(&spec);
            let (news, comments, sidecar) = dataio::write_corpus(&args.out, &corpus)?;
            out!(
                "wrote {} news, {} comments from {} users",
                corpus.news.len(),
                corpus.comments.len(),
                corpus.abilities.len()
            );
            for p in [news, comments, sidecar] {
                out!("  {}", p.display());
            }
            Ok(())
        }
        Command::Train(args) => {
            let cfg = args.config()?;
            args.ensure_out()?;
            let data = load_dataset(&args, &cfg, args.seed)?;
            out!(
                "split: {} train / {} valid / {} test",
                data.train.len(),
                data.valid.len(),
                data.test.len()
            );
            let (model, log) = train_all(&data, &cfg, args.seed)?;
            let model_path = args.model_path();
            ModelArtifact { config: cfg, model }.save(&model_path)?;
            let log_path = args.out.join("train_log.csv");
            dataio::write_train_log(&log_path, &log)?;
            if let Some(last) = log.last() {
                let acc = last.valid_accuracy.map_or("n/a".into(), |a| format!("{a:.4}"));
                out!(
                    "trained {} epochs: machine loss {:.4}, crowd loss {:.4}, fusion nll {:.4}, valid accuracy {acc}",
                    log.len(),
                    last.machine_loss,
                    last.crowd_loss,
                    last.fusion_nll
                );
            }
            out!("model -> {}", model_path.display());
            out!("log   -> {}", log_path.display());
            Ok(())
        }
        Command::Eval(args) => {
            let artifact = ModelArtifact::load(&args.model_path())?;
            let cfg = artifact.config;
            let data = load_dataset(&args, &cfg, artifact.model.seed)?;
            let preds = pipeline::predict_split(&artifact.model, &cfg, &data, &data.test);
            let scored: Vec<(f64, u8)> =
                preds.iter().map(|p| (p.hybrid_score(), p.label)).collect();
            let report = pipeline::evaluate(&scored, cfg.metric_mode);
            print_report("hybrid", &report);
            args.ensure_out()?;
            let path = args.out.join("metrics.csv");
            dataio::write_metrics_csv(&path, &[("hybrid".to_string(), -1, report)])?;
            out!("metrics -> {}", path.display());
            Ok(())
        }
        Command::Ablate(args) => {
            let cfg = args.config()?;
            args.ensure_out()?;
            let data = load_dataset(&args, &cfg, args.seed)?;
            let rows = ablate(&data, &cfg, args.seed)?;
            for (arm, report) in &rows {
                print_report(arm, report);
            }
            let csv_rows: Vec<(String, i64, pipeline::MetricsReport)> =
                rows.into_iter().map(|(arm, r)| (arm, -1, r)).collect();
            let path = args.out.join("metrics.csv");
            dataio::write_metrics_csv(&path, &csv_rows)?;
            out!("metrics -> {}", path.display());
            Ok(())
        }
        Command::Dynamic(args) => {
            let artifact = ModelArtifact::load(&args.model_path())?;
            let cfg = artifact.config;
            let data = load_dataset(&args, &cfg, artifact.model.seed)?;
            let schedule = TimeThresholdSchedule::default_schedule();
            let points = dynamic_eval(&data, &artifact.model, &cfg, &schedule);
            let mut rows = Vec::new();
            for p in &points {
                rows.push((pipeline::ARM_HYBRID.to_string(), p.threshold_seconds as i64, p.hybrid.clone()));
                rows.push((pipeline::ARM_MACHINE_ONLY.to_string(), p.threshold_seconds as i64, p.machine.clone()));
                rows.push((pipeline::ARM_CROWD_ONLY.to_string(), p.threshold_seconds as i64, p.crowd.clone()));
            }
            for p in &points {
                out!(
                    "t={:>7}s  hybrid {:.4}  machine {:.4}  crowd {:.4}",
                    p.threshold_seconds, p.hybrid.accuracy, p.machine.accuracy, p.crowd.accuracy
                );
            }
            args.ensure_out()?;
            let path = args.out.join("metrics.csv");
            dataio::write_metrics_csv(&path, &rows)?;
            out!("metrics -> {}", path.display());
            Ok(())
        }
        Command::Inspect { common: args, news_id } => {
            let artifact = ModelArtifact::load(&args.model_path())?;
            let cfg = artifact.config;
            let data = load_dataset(&args, &cfg, artifact.model.seed)?;
            let news = data
                .train
                .iter()
                .chain(&data.valid)
                .chain(&data.test)
                .find(|n| n.id == news_id)
                .ok_or_else(|| RahiError::BadInput(format!("unknown news id '{news_id}'")))?
                .clone();
            let active = data.comments.get(&news.id).map_or(&[][..], |v| &v[..]);
            let n_users = data.n_users_static(&news.id, active.len(), cfg.activity_mode);
            let p = pipeline::predict_news(&artifact.model, &cfg, &news, active, n_users);
            let record = serde_json::json!({
                "news_id": p.news_id,
                "label": p.label,
                "machine_mean": p.machine.mean,
                "machine_variance": p.machine.variance,
                "mc_passes": p.machine.passes,
                "crowd_available": p.crowd.is_some(),
                "e_crowd": p.crowd.as_ref().map(|c| c.e_crowd),
                "n_users": p.crowd.as_ref().map(|c| c.n_users),
                "alpha": p.crowd.as_ref().map(|c| c.beta.alpha),
                "beta": p.crowd.as_ref().map(|c| c.beta.beta),
                "mu": p.fused.mu,
                "sigma": p.fused.sigma(),
                "y_hat": p.prediction.y_hat,
                "verdict": if p.prediction.is_fake { "fake" } else { "true" },
                "reliability": p.prediction.reliability,
            });
            out!("{record}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ RahiError::BadInput(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
