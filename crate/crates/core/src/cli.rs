//! Command-line front end: thin wrappers over the library pipeline.
//!
//! Exit codes: 0 on success, 1 on validation or usage errors, 2 on I/O
//! failures. All randomness flows from `--seed`, so every command is
//! reproducible.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::domain::UsagePattern;
use crate::error::{Error, Result};
use crate::eval::{evaluate_multiuse, evaluate_pipeline, train_pipeline, PipelineConfig};
use crate::indicators::{detect_indicator_count, DEFAULT_EPSILON};
use crate::multiuse::{multi_use_trust, usage_significance, AggregationMethod};
use crate::nnet::TrainConfig;
use crate::synth::{
    generate_dataset, load_dataset, load_model_pair, load_multi_use, save_dataset,
    save_ground_truth, save_model_pair, save_multi_use, GeneratorConfig,
};
use crate::trust::assess;

#[derive(Parser)]
#[command(
    name = "adaptrust",
    version,
    about = "Usage-adaptive trust scoring for crowdsourced IoT services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic marketplace with ground truth.
    Generate(GenerateArgs),
    /// Infer the number of trust indicators from rating data.
    DetectIndicators(DetectArgs),
    /// Train the service and usage models and save them.
    Train(TrainArgs),
    /// Score a service for one usage or a usage pattern.
    Assess(AssessArgs),
    /// Run the split/train/test evaluation and print the metric table.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Ratings CSV (service_id,usage_id,rating).
    #[arg(long)]
    ratings: PathBuf,
    /// Services JSON (schema + services).
    #[arg(long)]
    services: PathBuf,
    /// Usages JSON.
    #[arg(long)]
    usages: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of trust indicators to plant.
    #[arg(long, default_value_t = 2)]
    indicators: usize,
    /// Number of services.
    #[arg(long, default_value_t = 200)]
    num_services: usize,
    /// Number of usages.
    #[arg(long, default_value_t = 8)]
    num_usages: usize,
    /// Number of three-usage session records.
    #[arg(long, default_value_t = 0)]
    multi_use_items: usize,
    /// Gaussian noise standard deviation on the unit trust scale.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Normalized rating-gap threshold for splitting usage clusters.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Directory to write the trained model pair into.
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 4000)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    learning_rate: f64,
    /// Hidden layer width for both networks.
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct AssessArgs {
    /// Directory holding a trained model pair.
    #[arg(long)]
    model_dir: PathBuf,
    /// Services JSON (schema + services).
    #[arg(long)]
    services: PathBuf,
    /// Usages JSON.
    #[arg(long)]
    usages: PathBuf,
    #[arg(long)]
    service_id: String,
    /// Single usage to score against.
    #[arg(long, conflicts_with = "pattern")]
    usage_id: Option<String>,
    /// Comma-separated usage ids forming a multi-use pattern.
    #[arg(long)]
    pattern: Option<String>,
    /// Comma-separated durations (minutes), one per pattern usage.
    #[arg(long)]
    durations: Option<String>,
    /// avg | closeness | weighted
    #[arg(long, default_value = "avg")]
    aggregation: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Training fraction of the rating records.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 4000)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Multi-use session records; switches to multi-use evaluation.
    #[arg(long)]
    multi_use: Option<PathBuf>,
    /// avg | closeness | weighted (multi-use evaluation only).
    #[arg(long, default_value = "avg")]
    aggregation: String,
    /// Optional path for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn pipeline_config(
    epsilon: f64,
    split: f64,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> PipelineConfig {
    PipelineConfig {
        epsilon,
        split_ratio: split,
        split_seed: seed,
        hidden,
        service_train: TrainConfig {
            learning_rate,
            epochs,
            batch_size: usize::MAX,
            seed,
        },
        usage_train: TrainConfig {
            learning_rate,
            epochs,
            batch_size: usize::MAX,
            seed: seed.wrapping_add(1),
        },
    }
}

fn load(args: &DatasetArgs) -> Result<crate::domain::Dataset> {
    load_dataset(&args.ratings, &args.services, &args.usages)
}

fn parse_comma_list(flag: &str, raw: &str) -> Result<Vec<String>> {
    let items: Vec<String> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if items.is_empty() {
        return Err(Error::ConfigInvalid(format!("--{flag} is empty")));
    }
    Ok(items)
}

fn write_report(path: &Path, report: &crate::eval::EvaluationReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    let config = GeneratorConfig {
        indicator_count: args.indicators,
        num_services: args.num_services,
        num_usages: args.num_usages,
        noise_std: args.noise,
        seed: args.seed,
        multi_use_items: args.multi_use_items,
    };
    let (dataset, truth, sessions) = generate_dataset(&config)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    save_dataset(
        &dataset,
        &args.out.join("ratings.csv"),
        &args.out.join("services.json"),
        &args.out.join("usages.json"),
    )?;
    save_ground_truth(&truth, &args.out.join("ground_truth.json"))?;
    if !sessions.is_empty() {
        save_multi_use(&sessions, &args.out.join("multi_use.json"))?;
    }
    println!(
        "generated {} services, {} usages, {} ratings, {} sessions into {}",
        dataset.services.len(),
        dataset.usages.len(),
        dataset.ratings.len(),
        sessions.len(),
        args.out.display()
    );
    Ok(())
}

fn run_detect(args: &DetectArgs) -> Result<()> {
    let dataset = load(&args.dataset)?;
    let (count, partition) = detect_indicator_count(&dataset, args.epsilon)?;
    println!("indicators: {count}");
    for (i, block) in partition.blocks.iter().enumerate() {
        let members: Vec<&str> = block.members.iter().map(String::as_str).collect();
        println!(
            "block {i} (mean rating {:.2}): {}",
            block.mean_rating,
            members.join(" ")
        );
    }
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let dataset = load(&args.dataset)?;
    let config = pipeline_config(
        args.epsilon,
        0.8, // unused: training consumes the whole dataset
        args.hidden,
        args.epochs,
        args.learning_rate,
        args.seed,
    );
    let pair = train_pipeline(&dataset, &config)?;
    save_model_pair(&pair, &args.model_dir)?;
    println!(
        "trained models for {} indicators into {}",
        pair.indicator_count,
        args.model_dir.display()
    );
    Ok(())
}

fn run_assess(args: &AssessArgs) -> Result<()> {
    let pair = load_model_pair(&args.model_dir)?;
    let services = crate::synth::load_services(&args.services)?;
    let usages = crate::synth::load_usages(&args.usages)?;
    let service = services
        .services
        .iter()
        .find(|s| s.id == args.service_id)
        .ok_or_else(|| Error::ConfigInvalid(format!("unknown --service-id {}", args.service_id)))?;

    let score = if let Some(usage_id) = &args.usage_id {
        let usage = usages
            .iter()
            .find(|u| &u.id == usage_id)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown --usage-id {usage_id}")))?;
        assess(&pair, service, usage)?
    } else if let Some(pattern) = &args.pattern {
        let ids = parse_comma_list("pattern", pattern)?;
        let method: AggregationMethod = args.aggregation.parse()?;
        let significances = match &args.durations {
            Some(raw) => {
                let durations: Vec<f64> = parse_comma_list("durations", raw)?
                    .iter()
                    .map(|d| {
                        d.parse::<f64>().map_err(|_| {
                            Error::ConfigInvalid(format!("bad duration {d:?} in --durations"))
                        })
                    })
                    .collect::<Result<_>>()?;
                Some(usage_significance(&durations)?)
            }
            None => None,
        };
        let pattern = UsagePattern::new(ids, significances)?;
        multi_use_trust(&pair, service, &usages, &pattern, method)?
    } else {
        return Err(Error::ConfigInvalid(
            "one of --usage-id or --pattern is required".into(),
        ));
    };
    println!("trust value: {:.4}", score.value);
    println!("trust level: {}", score.level);
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let dataset = load(&args.dataset)?;
    let config = pipeline_config(
        args.epsilon,
        args.split,
        args.hidden,
        args.epochs,
        args.learning_rate,
        args.seed,
    );
    let report = match &args.multi_use {
        Some(path) => {
            let sessions = load_multi_use(path)?;
            let method: AggregationMethod = args.aggregation.parse()?;
            evaluate_multiuse(&dataset, &sessions, method, &config)?
        }
        None => evaluate_pipeline(&dataset, &config)?,
    };
    print!("{report}");
    if let Some(path) = &args.out {
        write_report(path, &report)?;
    }
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

/// Parses arguments and executes the selected subcommand, returning the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Generate(args) => run_generate(args),
        Command::DetectIndicators(args) => run_detect(args),
        Command::Train(args) => run_train(args),
        Command::Assess(args) => run_assess(args),
        Command::Evaluate(args) => run_evaluate(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
