//! Command-line harness: feature extraction, ensemble training,
//! evaluation, prediction and the multi-round protocol.
//!
//! Exit codes: 0 success, 1 internal error, 2 user-input error. All
//! commands are deterministic given a configuration and seeds, never
//! mutate their inputs, and write outputs atomically (write to a
//! temporary file, then rename).

mod config;

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use eneat::dataset::{run_protocol, FeatureTable, RoundProtocol, SampleTable};
use eneat::ensemble::{evaluate_ensemble, predict, train_ensemble_with_reports, EnsembleConfig};
use eneat::haralick::{read_segments, segment_features, SegmentPixels, DEFAULT_OFFSETS};
use eneat::metrics::{format_percent, relative_gain, summary_table, RoundSummary};
use eneat::model_file::{load_model, model_to_bytes};
use eneat::textio::fmt_f64;
use eneat::{seed, SampleRow};

#[derive(Parser)]
#[command(
    name = "eneat",
    version,
    about = "Train and run ensembles of neuroevolved classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Haralick feature vectors from a segment pixel file.
    Features {
        /// Segment pixel file (one pixel per line; see README).
        segments: PathBuf,
        /// Output feature CSV.
        output: PathBuf,
        /// Bands to extract, in order.
        #[arg(long, value_delimiter = ',', default_values_t = [String::from("b4"), String::from("b6")])]
        bands: Vec<String>,
        /// Gray levels for GLCM quantization.
        #[arg(long, default_value_t = 16)]
        levels: usize,
    },
    /// Train an ensemble on a labeled feature CSV and write the model.
    Train {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Labeled training CSV.
        train_csv: PathBuf,
        /// Output model file.
        model_out: PathBuf,
        /// Override ensemble.master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel member-training threads (result-identical to 1).
        #[arg(long)]
        jobs: Option<usize>,
        /// Print per-generation progress tables after training.
        #[arg(short, long)]
        verbose: bool,
    },
    /// Score a model on a labeled test CSV and write a report.
    Evaluate {
        model: PathBuf,
        test_csv: PathBuf,
        report_out: PathBuf,
        /// Seed for prediction tie-breaking (even-sized ensembles only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report_format: ReportFormat,
    },
    /// Classify a feature CSV and write segment_id,label predictions.
    Predict {
        model: PathBuf,
        features_csv: PathBuf,
        output: PathBuf,
        /// Seed for prediction tie-breaking (even-sized ensembles only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the multi-round protocol: per round, train with that round's
    /// seed and evaluate on the test CSV; write detail plus summary.
    Protocol {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        train_csv: PathBuf,
        test_csv: PathBuf,
        report_out: PathBuf,
        /// Baseline balanced accuracy (percent) for the relative-gain line.
        #[arg(long)]
        baseline: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report_format: ReportFormat,
    },
}

enum CliError {
    /// Bad input from the user: exit code 2.
    User(String),
    /// Broken invariant or environment failure: exit code 1.
    Internal(String),
}

impl From<eneat::Error> for CliError {
    fn from(e: eneat::Error) -> Self {
        if e.is_user_input() {
            CliError::User(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Features {
            segments,
            output,
            bands,
            levels,
        } => cmd_features(&segments, &output, &bands, levels),
        Command::Train {
            config,
            train_csv,
            model_out,
            seed,
            jobs,
            verbose,
        } => with_jobs(jobs, || {
            cmd_train(&config, &train_csv, &model_out, seed, verbose)
        }),
        Command::Evaluate {
            model,
            test_csv,
            report_out,
            seed,
            report_format,
        } => cmd_evaluate(&model, &test_csv, &report_out, seed, report_format),
        Command::Predict {
            model,
            features_csv,
            output,
            seed,
        } => cmd_predict(&model, &features_csv, &output, seed),
        Command::Protocol {
            config,
            train_csv,
            test_csv,
            report_out,
            baseline,
            jobs,
            report_format,
        } => with_jobs(jobs, || {
            cmd_protocol(
                &config,
                &train_csv,
                &test_csv,
                &report_out,
                baseline,
                report_format,
            )
        }),
    }
}

/// Run inside a rayon pool of the requested size; member training order
/// does not affect results, so any job count gives identical output.
fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    match jobs {
        None => f(),
        Some(n) => {
            if n == 0 {
                return Err(CliError::User("--jobs must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Internal(format!("cannot build thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn open_reader(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::User(format!("cannot open {}: {e}", path.display())))
}

fn read_to_string(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    open_reader(path)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

/// Write-then-rename so an interrupted run never leaves a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| CliError::User(format!("cannot create file near {}: {e}", path.display())))?;
    tmp.write_all(bytes)
        .and_then(|()| tmp.flush())
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Internal(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

fn load_run_config(path: &Path, seed_override: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::parse(&read_to_string(path)?)?;
    if let Some(seed) = seed_override {
        cfg.ensemble.master_seed = seed;
    }
    Ok(cfg)
}

fn cmd_features(
    segments_path: &Path,
    output: &Path,
    bands: &[String],
    levels: usize,
) -> CliResult<()> {
    if levels < 2 {
        return Err(CliError::User("--levels must be at least 2".into()));
    }
    let segments = read_segments(open_reader(segments_path)?)?;
    let labeled = segments.iter().filter(|s| s.label.is_some()).count();
    let mut bytes = Vec::new();
    if labeled == segments.len() {
        let rows = featurize(&segments, bands, levels)?
            .into_iter()
            .zip(&segments)
            .map(|((segment_id, features), seg)| SampleRow {
                segment_id,
                features,
                label: seg.label.expect("all labeled"),
            })
            .collect();
        let table = SampleTable::new(rows)?;
        table.save_csv(&mut bytes)?;
    } else if labeled == 0 {
        let mut header = String::from("segment_id");
        let dimension = 13 * bands.len();
        for d in 0..dimension {
            header.push_str(&format!(",f_{d}"));
        }
        header.push('\n');
        bytes.extend_from_slice(header.as_bytes());
        for (segment_id, features) in featurize(&segments, bands, levels)? {
            let fields: Vec<String> = features.iter().map(|&x| fmt_f64(x)).collect();
            bytes.extend_from_slice(format!("{segment_id},{}\n", fields.join(",")).as_bytes());
        }
    } else {
        let missing = segments
            .iter()
            .find(|s| s.label.is_none())
            .expect("mixed labels");
        return Err(CliError::User(format!(
            "segment {} has no label while others do; label all segments or none",
            missing.segment_id
        )));
    }
    write_atomic(output, &bytes)?;
    Ok(())
}

fn featurize(
    segments: &[SegmentPixels],
    bands: &[String],
    levels: usize,
) -> CliResult<Vec<(u64, Vec<f64>)>> {
    segments
        .iter()
        .map(|seg| {
            let features = segment_features(seg, bands, levels, &DEFAULT_OFFSETS)?;
            Ok((seg.segment_id, features))
        })
        .collect()
}

fn cmd_train(
    config_path: &Path,
    train_csv: &Path,
    model_out: &Path,
    seed_override: Option<u64>,
    verbose: bool,
) -> CliResult<()> {
    let cfg = load_run_config(config_path, seed_override)?;
    let train = SampleTable::load_csv(open_reader(train_csv)?)?;
    let start = Instant::now();
    let (model, reports) = train_ensemble_with_reports(&cfg.ensemble, &train)?;
    let elapsed = start.elapsed();
    write_atomic(model_out, &model_to_bytes(&model))?;

    for (i, member) in model.members().iter().enumerate() {
        println!(
            "member {i:2}  seed {:>20}  training fitness {}",
            member.seed,
            format_percent(member.fitness)
        );
    }
    println!(
        "trained {} members in {:.1}s -> {}",
        model.n_members(),
        elapsed.as_secs_f64(),
        model_out.display()
    );
    if verbose {
        for (i, report) in reports.iter().enumerate() {
            println!("member {i} ({}):", report.stop_reason.name());
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn cmd_evaluate(
    model_path: &Path,
    test_csv: &Path,
    report_out: &Path,
    predict_seed: u64,
    format: ReportFormat,
) -> CliResult<()> {
    let model = load_model(&mut open_reader(model_path)?)?;
    let test = SampleTable::load_csv(open_reader(test_csv)?)?;
    let mut rng = seed::rng(seed::derive(predict_seed, seed::STREAM_PREDICT));
    let eval = evaluate_ensemble(&model, &test, &mut rng)?;

    let members = RoundSummary {
        mean: eval.member_mean,
        std: eval.member_std,
        min: eval
            .member_accuracies
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        max: eval
            .member_accuracies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    };
    let mut report = String::new();
    match format {
        ReportFormat::Text => {
            report.push_str(&format!(
                "ensemble balanced accuracy: {}\n",
                format_percent(eval.ensemble_balanced_accuracy)
            ));
            report.push_str(&format!(
                "members (n={}): mean {}, std {}, min {}, max {}\n",
                model.n_members(),
                format_percent(members.mean),
                format_percent(members.std),
                format_percent(members.min),
                format_percent(members.max),
            ));
            for (i, acc) in eval.member_accuracies.iter().enumerate() {
                report.push_str(&format!("member {i:2}: {}\n", format_percent(*acc)));
            }
        }
        ReportFormat::Csv => {
            report.push_str("record,index,balanced_accuracy\n");
            report.push_str(&format!(
                "ensemble,,{}\n",
                fmt_f64(eval.ensemble_balanced_accuracy)
            ));
            for (i, acc) in eval.member_accuracies.iter().enumerate() {
                report.push_str(&format!("member,{i},{}\n", fmt_f64(*acc)));
            }
            report.push_str(&format!("member_mean,,{}\n", fmt_f64(members.mean)));
            report.push_str(&format!("member_std,,{}\n", fmt_f64(members.std)));
        }
    }
    write_atomic(report_out, report.as_bytes())?;
    print!("{report}");
    Ok(())
}

fn cmd_predict(
    model_path: &Path,
    features_csv: &Path,
    output: &Path,
    predict_seed: u64,
) -> CliResult<()> {
    let model = load_model(&mut open_reader(model_path)?)?;
    let features = FeatureTable::load_csv(open_reader(features_csv)?)?;
    let mut rng = seed::rng(seed::derive(predict_seed, seed::STREAM_PREDICT));
    let mut out = String::from("segment_id,label\n");
    for (segment_id, vector) in features.rows() {
        let label = predict(&model, vector, &mut rng)?;
        out.push_str(&format!("{segment_id},{label}\n"));
    }
    write_atomic(output, out.as_bytes())?;
    println!(
        "wrote {} predictions -> {}",
        features.rows().len(),
        output.display()
    );
    Ok(())
}

fn cmd_protocol(
    config_path: &Path,
    train_csv: &Path,
    test_csv: &Path,
    report_out: &Path,
    baseline_percent: Option<f64>,
    format: ReportFormat,
) -> CliResult<()> {
    let cfg = load_run_config(config_path, None)?;
    let train = SampleTable::load_csv(open_reader(train_csv)?)?;
    let test = SampleTable::load_csv(open_reader(test_csv)?)?;
    let protocol = RoundProtocol::new(cfg.round_seeds.clone())?;
    let ensemble_cfg: EnsembleConfig = cfg.ensemble.clone();
    let result = run_protocol(&protocol, &ensemble_cfg, &train, &test)?;

    let mut report = String::new();
    match format {
        ReportFormat::Text => {
            for r in &result.rounds {
                report.push_str(&format!(
                    "round {} (seed {}): ensemble {}, member mean {}, member std {}\n",
                    r.round,
                    r.seed,
                    format_percent(r.ensemble_balanced_accuracy),
                    format_percent(r.member_mean),
                    format_percent(r.member_std),
                ));
            }
            report.push('\n');
        }
        ReportFormat::Csv => {
            report.push_str("round,seed,ensemble,member_mean,member_std\n");
            for r in &result.rounds {
                report.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.round,
                    r.seed,
                    format_percent(r.ensemble_balanced_accuracy),
                    format_percent(r.member_mean),
                    format_percent(r.member_std),
                ));
            }
        }
    }
    report.push_str(&summary_table(&[("e-NEAT", result.summary)]));
    if result.degenerate_std {
        report.push_str("note: single round; std reported as 0.0\n");
    }
    if let Some(baseline) = baseline_percent {
        let gain = relative_gain(result.summary.mean * 100.0, baseline)?;
        report.push_str(&format!(
            "relative gain over baseline {baseline:.1}%: {}\n",
            format_percent(gain)
        ));
    }
    write_atomic(report_out, report.as_bytes())?;
    print!("{report}");
    Ok(())
}
