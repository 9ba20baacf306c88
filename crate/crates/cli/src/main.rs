//! `dcrnn`: train, evaluate and benchmark multi-task CTR/CVR models.
//!
//! Exit codes: 0 on success, 2 for usage, config or data errors, 3 when
//! training hits a non-finite loss or gradient.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dcrnn::cross::{param_growth, GrowthRanges};
use dcrnn::data::config::{load_config, DataSource, RunConfig};
use dcrnn::data::{gen_synthetic, load_synth_spec, load_tsv, Dataset};
use dcrnn::evaluation::{count_params, evaluate};
use dcrnn::models::{ModelGraph, ModelSpec};
use dcrnn::nn::checkpoint;
use dcrnn::training::train_with;
use dcrnn::Error;

const CHECKPOINT_FILE: &str = "checkpoint.bin";
const METRICS_FILE: &str = "metrics.tsv";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser)]
#[command(
    name = "dcrnn",
    version,
    about = "Train, evaluate and benchmark multi-task CTR/CVR models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model and write checkpoint, metrics log and manifest.
    Train {
        /// Run configuration (TOML with [model], [plan], [train], [loss], [data]).
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory; created if missing.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Print per-task AUC of a trained checkpoint on a TSV dataset.
    Eval {
        /// Checkpoint written by `train`; its manifest.json must sit beside it.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Labelled TSV dataset using the training schema.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Print parameter-growth tables and DCRNN vs MMoE parameter counts.
    Bench {
        /// Run configuration describing both models.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Generate a synthetic two-task TSV dataset.
    GenData {
        /// Synthetic data spec (TOML).
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        /// Destination TSV file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

/// Everything needed to rebuild and describe a training run.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    config: RunConfig,
    seed: u64,
    started_unix: f64,
    finished_unix: Option<f64>,
    checkpoint: PathBuf,
    metrics: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out } => cmd_train(&config, &out),
        Command::Eval { checkpoint, data } => cmd_eval(&checkpoint, &data),
        Command::Bench { config } => cmd_bench(&config),
        Command::GenData { spec, out } => cmd_gen_data(&spec, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> dcrnn::Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(io_err(format!("writing {}", path.display())))
}

fn cmd_train(config_path: &Path, out: &Path) -> dcrnn::Result<()> {
    let config = load_config(config_path)?;
    fs::create_dir_all(out).map_err(io_err(format!("creating {}", out.display())))?;
    let checkpoint_path = out.join(CHECKPOINT_FILE);
    let metrics_path = out.join(METRICS_FILE);
    let manifest_path = out.join(MANIFEST_FILE);
    let mut manifest = RunManifest {
        seed: config.train.seed,
        config,
        started_unix: now(),
        finished_unix: None,
        checkpoint: checkpoint_path.clone(),
        metrics: metrics_path.clone(),
    };
    write_manifest(&manifest_path, &manifest)?;
    let config = &manifest.config;

    let (train_set, eval_set, stats) = config.load_data()?;
    if let Some([tr, ev]) = stats {
        for (name, s) in [("train", tr), ("eval", ev)] {
            if s.malformed + s.funnel_violations > 0 {
                eprintln!(
                    "{name}: skipped {} malformed and {} funnel-violating lines",
                    s.malformed, s.funnel_violations
                );
            }
        }
    }
    let mut model = config.model_spec().build(config.train.seed)?;
    eprintln!(
        "training {} ({} parameters) on {} examples, evaluating on {}",
        model.name(),
        count_params(&model).total,
        train_set.len(),
        eval_set.len()
    );

    let mut metrics =
        BufWriter::new(File::create(&metrics_path).map_err(io_err(format!("creating {}", metrics_path.display())))?);
    let mut write_error = None;
    let result = train_with(&mut model, &train_set, &eval_set, &config.train, &config.loss, |m| {
        let line = dcrnn::training::TrainLog {
            epochs: vec![m.clone()],
        }
        .to_tsv();
        eprint!("epoch {line}");
        if let Err(e) = metrics.write_all(line.as_bytes()).and_then(|_| metrics.flush()) {
            write_error.get_or_insert(e);
        }
    });
    if let Some(e) = write_error {
        return Err(io_err(format!("writing {}", metrics_path.display()))(e));
    }
    result?;

    let file = File::create(&checkpoint_path).map_err(io_err(format!("creating {}", checkpoint_path.display())))?;
    let mut w = BufWriter::new(file);
    checkpoint::write(model.params(), &mut w)?;
    w.flush()
        .map_err(io_err(format!("writing {}", checkpoint_path.display())))?;

    manifest.finished_unix = Some(now());
    write_manifest(&manifest_path, &manifest)
}

fn load_trained(checkpoint_path: &Path) -> dcrnn::Result<(RunConfig, ModelGraph)> {
    let dir = checkpoint_path.parent().unwrap_or(Path::new("."));
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(format!("reading {}", manifest_path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", manifest_path.display())))?;
    let mut model = manifest.config.model_spec().build(manifest.seed)?;
    let file = File::open(checkpoint_path).map_err(io_err(format!("opening {}", checkpoint_path.display())))?;
    let records = checkpoint::read(std::io::BufReader::new(file))?;
    checkpoint::load_into(model.params_mut(), records)?;
    Ok((manifest.config, model))
}

fn cmd_eval(checkpoint_path: &Path, data_path: &Path) -> dcrnn::Result<()> {
    let (config, model) = load_trained(checkpoint_path)?;
    let tolerance = match &config.data {
        DataSource::Files {
            malformed_tolerance, ..
        } => *malformed_tolerance,
        DataSource::Synthetic { .. } => 0,
    };
    let (data, _) = load_tsv(data_path, &config.schema(), tolerance)?;
    let aucs = evaluate(&model, &data, config.train.batch_size)?;
    println!("task\tname\tauc");
    for (t, a) in aucs.iter().enumerate() {
        println!("{t}\t{}\t{a}", Dataset::TASK_NAMES[t]);
    }
    Ok(())
}

fn cmd_bench(config_path: &Path) -> dcrnn::Result<()> {
    let config = load_config(config_path)?;
    let emb = &config.dcrnn.embedding;
    let x0_width = emb.vocab_sizes.len() * emb.dim;
    let ranges = GrowthRanges {
        depths: (1..=4).collect(),
        widths: vec![8, 16, 32, 64],
        cin_fields: emb.vocab_sizes.len(),
        crnn_input: x0_width,
    };
    let growth = param_growth(&ranges);
    println!("parameter growth (fields {}, X0 width {x0_width})", ranges.cin_fields);
    print!("{}", growth.to_table());
    println!();
    print!("{}", growth.to_csv());
    println!();

    let dcrnn = ModelSpec::Dcrnn(config.dcrnn.clone()).build(config.train.seed)?;
    let mmoe = ModelSpec::Mmoe(config.mmoe.clone()).build(config.train.seed)?;
    for model in [&dcrnn, &mmoe] {
        let report = count_params(model);
        println!("{} parameters: {}", model.name(), report.total);
        for (group, n) in &report.groups {
            println!("  {group:<14} {n:>10}");
        }
    }
    let (d, m) = (count_params(&dcrnn).total, count_params(&mmoe).total);
    println!("param ratio dcrnn/mmoe = {:.6}", d as f64 / m as f64);
    Ok(())
}

fn cmd_gen_data(spec_path: &Path, out: &Path) -> dcrnn::Result<()> {
    let spec = load_synth_spec(spec_path)?;
    let data = gen_synthetic(&spec)?;
    data.save_tsv(out)?;
    if data.is_empty() {
        eprintln!("warning: spec asks for 0 examples; wrote an empty file");
        return Ok(());
    }
    let n = data.len() as f64;
    let observed = data.label_rates();
    let expected = spec.expected_rates();
    println!("wrote {} examples to {}", data.len(), out.display());
    println!("task\tname\trate\texpected\tstd_err");
    for t in 0..2 {
        let p = expected[t];
        let se = (p * (1.0 - p) / n).sqrt();
        println!(
            "{t}\t{}\t{:.6}\t{:.6}\t{:.6}",
            Dataset::TASK_NAMES[t],
            observed[t],
            p,
            se
        );
    }
    Ok(())
}
