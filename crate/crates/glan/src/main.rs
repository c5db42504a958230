//! Command-line front end: corpus preparation and synthesis, training,
//! evaluation, early-detection curves, ablation tables, sensitivity sweeps,
//! and a gradient self-check. Every run that writes files records a manifest
//! first, and identical manifests reproduce identical outputs byte for byte.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use glan::data::{
    generate_synthetic, ingest_path, split, write_corpus, Corpus, Delay, HeteroGraph,
    SyntheticConfig, Vocab,
};
use glan::eval::{
    curve_table, early_detection_sweep, early_detection_sweep_all, evaluate, evaluate_held_out,
    records, sensitivity_sweep, sweep_table, EvalReport, SweepAxis, SweepValue,
};
use glan::model::{
    grad_check_end_to_end, load_checkpoint, save_checkpoint, train, Ablation, Checkpoint,
    TrainConfig,
};
use glan::numerics::{read_precision, Precision, Real};

#[derive(Parser)]
#[command(
    name = "glan",
    version,
    about = "Rumor classification over microblog cascades and their tweet-user graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic cascade corpus.
    Synth(SynthArgs),
    /// Validate a corpus and report its statistics, graph, and split.
    Prepare(PrepareArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on the cascades it never trained on.
    Eval(EvalArgs),
    /// Early-detection curve: evaluate under increasing time delays.
    Early(EarlyArgs),
    /// Train once per ablation mode and compare.
    Ablate(AblateArgs),
    /// Retrain along one hyper-parameter axis and tabulate accuracy.
    Sweep(SweepArgs),
    /// Check end-to-end gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, stats.txt, and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    n_cascades: usize,
    #[arg(long, default_value_t = 16)]
    n_users: usize,
    #[arg(long, default_value_t = 40)]
    vocab_size: usize,
    /// Plant the who-retweets signal (pass =false to disable).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    structure_signal: bool,
    /// Plant the wording signal (pass =false to disable).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    text_signal: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PrepareArgs {
    /// Corpus in JSON-lines form.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for stats.txt, edges.tsv, splits.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Starting point for the configuration.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
    /// key=value file applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single key=value override, repeatable; applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Overrides the seed from the preset/config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Float width of the trained parameters.
    #[arg(long, default_value_t = 64)]
    precision: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Full,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for checkpoint/, train_log.jsonl, manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Also score cascades the model trained on.
    #[arg(long)]
    all: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Optional directory for report files and a manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EarlyArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated delays in hours; `inf` for the full cascades.
    #[arg(long, default_value = "0,1,2,4,8,12,24,36")]
    delays: String,
    /// Also score cascades the model trained on.
    #[arg(long)]
    all: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated subset of full,no_lre,no_gre,only_text.
    #[arg(long, default_value = "full,no_lre,no_gre,only_text")]
    modes: String,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// tweet_length or kernel_sizes.
    #[arg(long)]
    axis: String,
    /// `;`-separated values; kernel combinations use `,` (e.g. "1;3;3,4,5").
    #[arg(long)]
    values: String,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("glan: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    worker_threads();
    match command {
        Command::Synth(args) => run_synth(args)?,
        Command::Prepare(args) => run_prepare(args)?,
        Command::Train(args) => run_train(args)?,
        Command::Eval(args) => run_eval(args)?,
        Command::Early(args) => run_early(args)?,
        Command::Ablate(args) => run_ablate(args)?,
        Command::Sweep(args) => run_sweep(args)?,
        Command::Gradcheck(args) => return run_gradcheck(args),
    }
    Ok(ExitCode::SUCCESS)
}

/// Parallelism cap from GLAN_THREADS, parsed (and complained about) once.
/// Compute runs on one worker; the cap is recorded so manifests capture the
/// environment.
fn worker_threads() -> usize {
    static CAP: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *CAP.get_or_init(|| match std::env::var("GLAN_THREADS") {
        Err(_) => 1,
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                eprintln!("glan: ignoring GLAN_THREADS={raw:?}; using 1 worker");
                1
            }
        },
    })
}

// ===== manifests =====

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    output_dir: String,
    inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<TrainConfig>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    options: BTreeMap<&'static str, String>,
    thread_cap: usize,
}

impl RunManifest {
    fn new(command: &'static str, out: &Path) -> RunManifest {
        RunManifest {
            command,
            output_dir: out.display().to_string(),
            inputs: Vec::new(),
            seed: None,
            precision: None,
            config: None,
            options: BTreeMap::new(),
            thread_cap: worker_threads(),
        }
    }

    fn input(mut self, path: &Path) -> Result<RunManifest> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest,
        });
        Ok(self)
    }

    fn option(mut self, key: &'static str, value: impl ToString) -> RunManifest {
        self.options.insert(key, value.to_string());
        self
    }

    /// Write manifest.json under the run directory. Called before any
    /// computation so a crashed run still leaves its provenance behind.
    fn write(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        write_text(
            &out.join("manifest.json"),
            &(serde_json::to_string_pretty(self)? + "\n"),
        )
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

// ===== shared pieces =====

fn load_corpus(path: &Path) -> Result<Corpus> {
    ingest_path(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn resolve_config(args: &ConfigArgs) -> Result<TrainConfig> {
    if !matches!(args.precision, 32 | 64) {
        bail!("--precision must be 32 or 64, got {}", args.precision);
    }
    let mut cfg = match args.preset {
        Preset::Small => TrainConfig::small(),
        Preset::Full => TrainConfig::full(),
    };
    if let Some(path) = &args.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_file(&text)
            .with_context(|| format!("applying {}", path.display()))?;
    }
    for pair in &args.set {
        let Some((key, value)) = pair.split_once('=') else {
            bail!("--set takes key=value, got {pair:?}");
        };
        cfg.set(key.trim(), value.trim())
            .with_context(|| format!("applying --set {pair}"))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn corpus_stats(corpus: &Corpus) -> String {
    let graph = HeteroGraph::build(corpus.cascades.iter());
    let retweets: usize = corpus.cascades.iter().map(|c| c.retweets.len()).sum();
    let texts = corpus.cascades.iter().flat_map(|c| {
        std::iter::once(c.source.text.as_str())
            .chain(c.retweets.iter().map(|r| r.text.as_str()))
    });
    let vocab = Vocab::build(texts, 1);

    let mut out = String::new();
    out.push_str(&format!("cascades {}\n", corpus.n_cascades()));
    out.push_str(&format!("users {}\n", corpus.users.len()));
    let labels: Vec<String> = corpus
        .label_set
        .classes()
        .iter()
        .map(|&class| {
            let count = corpus.cascades.iter().filter(|c| c.label == class).count();
            format!("{}={count}", class.as_str())
        })
        .collect();
    out.push_str(&format!("labels {}\n", labels.join(" ")));
    out.push_str(&format!(
        "retweets total={retweets} mean={:.2}\n",
        retweets as f64 / corpus.n_cascades().max(1) as f64
    ));
    out.push_str(&format!(
        "graph tweets={} users={} interactions={}\n",
        graph.n_tweets(),
        graph.n_users(),
        graph.total_weight()
    ));
    out.push_str(&format!("vocabulary tokens={}\n", vocab.len()));
    out
}

/// Score the checkpoint on `corpus`: by default only the cascades it never
/// trained on (classified within the full corpus graph), or every cascade
/// under `--all`.
fn score<T: Real>(ckpt: &Checkpoint<T>, corpus: &Corpus, all: bool) -> Result<EvalReport> {
    if all {
        return Ok(evaluate(ckpt, corpus)?);
    }
    evaluate_held_out(ckpt, corpus)
        .map_err(|e| anyhow::anyhow!("{e}; pass --all to score them anyway"))
}

fn checkpoint_precision(model: &Path) -> Result<Precision> {
    let path = model.join(glan::model::PARAMS_FILE);
    let mut reader =
        BufReader::new(File::open(&path).with_context(|| format!("opening {}", path.display()))?);
    Ok(read_precision(&mut reader)?)
}

fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("n {}\n", report.n));
    out.push_str(&format!("accuracy {:.4}\n", report.accuracy));
    out.push_str("class precision recall f1 support\n");
    for class in &report.classes {
        out.push_str(&format!(
            "{} {:.4} {:.4} {:.4} {}\n",
            class.label.as_str(),
            class.precision,
            class.recall,
            class.f1,
            class.support
        ));
    }
    let names: Vec<&str> = report.classes.iter().map(|c| c.label.as_str()).collect();
    out.push_str(&format!("confusion gold\\pred {}\n", names.join(" ")));
    for (name, row) in names.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&format!("{name} {}\n", cells.join(" ")));
    }
    out
}

fn parse_delays(raw: &str) -> Result<Vec<Delay>> {
    raw.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            if part.eq_ignore_ascii_case("inf") {
                return Ok(Delay::Infinite);
            }
            let hours: f64 = part
                .parse()
                .map_err(|_| anyhow::anyhow!("bad delay {part:?}; want hours or inf"))?;
            if !hours.is_finite() || hours < 0.0 {
                bail!("bad delay {part:?}; want a nonnegative hour count");
            }
            Ok(Delay::Finite((hours * 3600.0).round() as i64))
        })
        .collect()
}

fn parse_modes(raw: &str) -> Result<Vec<Ablation>> {
    let modes: Vec<Ablation> = raw
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| Ok(p.parse::<Ablation>()?))
        .collect::<Result<_>>()?;
    if modes.is_empty() {
        bail!("--modes named no ablation");
    }
    Ok(modes)
}

// ===== subcommands =====

fn run_synth(args: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n_cascades: args.n_cascades,
        n_users: args.n_users,
        vocab_size: args.vocab_size,
        structure_signal: args.structure_signal,
        text_signal: args.text_signal,
        seed: args.seed,
    };
    RunManifest::new("synth", &args.out)
        .option("n_cascades", cfg.n_cascades)
        .option("n_users", cfg.n_users)
        .option("vocab_size", cfg.vocab_size)
        .option("structure_signal", cfg.structure_signal)
        .option("text_signal", cfg.text_signal)
        .option("seed", cfg.seed)
        .write(&args.out)?;

    let corpus = generate_synthetic(&cfg)?;
    let corpus_path = args.out.join("corpus.jsonl");
    let mut writer = BufWriter::new(
        File::create(&corpus_path)
            .with_context(|| format!("creating {}", corpus_path.display()))?,
    );
    write_corpus(&corpus, &mut writer)?;
    writer.flush()?;
    write_text(&args.out.join("stats.txt"), &corpus_stats(&corpus))?;
    println!(
        "wrote {} cascades to {}",
        corpus.n_cascades(),
        corpus_path.display()
    );
    Ok(())
}

fn run_prepare(args: PrepareArgs) -> Result<()> {
    RunManifest::new("prepare", &args.out)
        .input(&args.corpus)?
        .option("seed", args.seed)
        .write(&args.out)?;
    let corpus = load_corpus(&args.corpus)?;

    write_text(&args.out.join("stats.txt"), &corpus_stats(&corpus))?;

    let graph = HeteroGraph::build(corpus.cascades.iter());
    let edges_path = args.out.join("edges.tsv");
    let mut edges = BufWriter::new(
        File::create(&edges_path).with_context(|| format!("creating {}", edges_path.display()))?,
    );
    graph.write_edge_list(&mut edges)?;
    edges.flush()?;

    let splits = split(&corpus.cascades, args.seed)?;
    let ids = |part: &[usize]| -> Vec<&str> {
        part.iter()
            .map(|&i| corpus.cascades[i].source.id.as_str())
            .collect()
    };
    let splits_json = serde_json::json!({
        "seed": args.seed,
        "train": ids(&splits.train),
        "dev": ids(&splits.dev),
        "test": ids(&splits.test),
    });
    write_text(
        &args.out.join("splits.json"),
        &(serde_json::to_string_pretty(&splits_json)? + "\n"),
    )?;

    print!("{}", corpus_stats(&corpus));
    println!(
        "split train={} dev={} test={}",
        splits.train.len(),
        splits.dev.len(),
        splits.test.len()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(&args.config)?;
    let mut manifest = RunManifest::new("train", &args.out).input(&args.corpus)?;
    manifest.seed = Some(cfg.seed);
    manifest.precision = Some(args.config.precision);
    manifest.config = Some(cfg.clone());
    manifest.write(&args.out)?;

    let corpus = load_corpus(&args.corpus)?;
    match args.config.precision {
        32 => finish_train(train::<f32>(&corpus, &cfg)?, &args.out),
        _ => finish_train(train::<f64>(&corpus, &cfg)?, &args.out),
    }
}

fn finish_train<T: Real>(outcome: glan::model::TrainOutcome<T>, out: &Path) -> Result<()> {
    save_checkpoint(&outcome.checkpoint, out.join("checkpoint"))?;
    write_text(&out.join("train_log.jsonl"), &records(&outcome.log)?)?;
    println!(
        "trained {} epochs; best dev accuracy {:.4} at epoch {}; checkpoint in {}",
        outcome.log.len(),
        outcome.best_dev_accuracy,
        outcome.best_epoch,
        out.join("checkpoint").display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    match checkpoint_precision(&args.model)? {
        Precision::Bits32 => eval_with::<f32>(&args),
        Precision::Bits64 => eval_with::<f64>(&args),
    }
}

fn eval_with<T: Real>(args: &EvalArgs) -> Result<()> {
    let ckpt: Checkpoint<T> = load_checkpoint(&args.model)?;
    let corpus = load_corpus(&args.corpus)?;
    let report = score(&ckpt, &corpus, args.all)?;

    let rendered = match args.format {
        Format::Table => report_table(&report),
        Format::Records => records(std::slice::from_ref(&report))?,
    };
    if let Some(out) = &args.out {
        RunManifest::new("eval", out)
            .input(&args.corpus)?
            .input(&args.model.join(glan::model::PARAMS_FILE))?
            .option("all", args.all)
            .write(out)?;
        write_text(&out.join("report.jsonl"), &records(&[report])?)?;
    }
    print!("{rendered}");
    Ok(())
}

fn run_early(args: EarlyArgs) -> Result<()> {
    match checkpoint_precision(&args.model)? {
        Precision::Bits32 => early_with::<f32>(&args),
        Precision::Bits64 => early_with::<f64>(&args),
    }
}

fn early_with<T: Real>(args: &EarlyArgs) -> Result<()> {
    let ckpt: Checkpoint<T> = load_checkpoint(&args.model)?;
    let corpus = load_corpus(&args.corpus)?;
    let delays = parse_delays(&args.delays)?;
    let reports = if args.all {
        early_detection_sweep_all(&ckpt, &corpus, &delays)?
    } else {
        early_detection_sweep(&ckpt, &corpus, &delays)?
    };

    let rendered = match args.format {
        Format::Table => curve_table(&reports),
        Format::Records => records(&reports)?,
    };
    if let Some(out) = &args.out {
        RunManifest::new("early", out)
            .input(&args.corpus)?
            .input(&args.model.join(glan::model::PARAMS_FILE))?
            .option("delays", &args.delays)
            .option("all", args.all)
            .write(out)?;
        write_text(&out.join("curve.tsv"), &curve_table(&reports))?;
        write_text(&out.join("reports.jsonl"), &records(&reports)?)?;
    }
    print!("{rendered}");
    Ok(())
}

#[derive(Serialize)]
struct AblateRow {
    mode: &'static str,
    dev_accuracy: f64,
    report: EvalReport,
}

fn run_ablate(args: AblateArgs) -> Result<()> {
    let cfg = resolve_config(&args.config)?;
    let modes = parse_modes(&args.modes)?;
    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("ablate", out)
            .input(&args.corpus)?
            .option("modes", &args.modes);
        manifest.seed = Some(cfg.seed);
        manifest.precision = Some(args.config.precision);
        manifest.config = Some(cfg.clone());
        manifest.write(out)?;
    }
    let corpus = load_corpus(&args.corpus)?;
    let rows = match args.config.precision {
        32 => ablate_rows::<f32>(&corpus, &cfg, &modes)?,
        _ => ablate_rows::<f64>(&corpus, &cfg, &modes)?,
    };

    let rendered = match args.format {
        Format::Table => ablate_table(&rows),
        Format::Records => records(&rows)?,
    };
    if let Some(out) = &args.out {
        write_text(&out.join("ablate.tsv"), &ablate_table(&rows))?;
        write_text(&out.join("ablate.jsonl"), &records(&rows)?)?;
    }
    print!("{rendered}");
    Ok(())
}

fn ablate_rows<T: Real>(
    corpus: &Corpus,
    base: &TrainConfig,
    modes: &[Ablation],
) -> Result<Vec<AblateRow>> {
    modes
        .iter()
        .map(|&mode| {
            let mut cfg = base.clone();
            cfg.ablation = mode;
            let outcome = train::<T>(corpus, &cfg)?;
            let report = evaluate_held_out(&outcome.checkpoint, corpus)?;
            Ok(AblateRow {
                mode: mode.as_str(),
                dev_accuracy: outcome.best_dev_accuracy,
                report,
            })
        })
        .collect()
}

fn ablate_table(rows: &[AblateRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        let f1s: Vec<String> = first
            .report
            .classes
            .iter()
            .map(|c| format!("{}_f1", c.label.as_str()))
            .collect();
        out.push_str(&format!(
            "# mode dev_accuracy test_accuracy {}\n",
            f1s.join(" ")
        ));
    }
    for row in rows {
        let f1s: Vec<String> = row
            .report
            .classes
            .iter()
            .map(|c| format!("{:.4}", c.f1))
            .collect();
        out.push_str(&format!(
            "{} {:.4} {:.4} {}\n",
            row.mode,
            row.dev_accuracy,
            row.report.accuracy,
            f1s.join(" ")
        ));
    }
    out
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = resolve_config(&args.config)?;
    let axis: SweepAxis = args.axis.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let values = SweepValue::parse_list(axis, &args.values)?;
    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("sweep", out)
            .input(&args.corpus)?
            .option("axis", axis)
            .option("values", &args.values);
        manifest.seed = Some(cfg.seed);
        manifest.precision = Some(args.config.precision);
        manifest.config = Some(cfg.clone());
        manifest.write(out)?;
    }
    let corpus = load_corpus(&args.corpus)?;
    let points = match args.config.precision {
        32 => sensitivity_sweep::<f32>(&corpus, &cfg, axis, &values)?,
        _ => sensitivity_sweep::<f64>(&corpus, &cfg, axis, &values)?,
    };

    let rendered = match args.format {
        Format::Table => sweep_table(&points),
        Format::Records => records(&points)?,
    };
    if let Some(out) = &args.out {
        write_text(&out.join("sweep.tsv"), &sweep_table(&points))?;
        write_text(&out.join("sweep.jsonl"), &records(&points)?)?;
    }
    print!("{rendered}");
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let corpus = generate_synthetic(&SyntheticConfig {
        n_cascades: 3,
        n_users: 4,
        vocab_size: 12,
        structure_signal: true,
        text_signal: true,
        seed: args.seed,
    })?;
    let mut cfg = TrainConfig::small();
    cfg.d = 12;
    cfg.d_u = 8;
    cfg.text_len = 10;
    cfg.kernel_widths = vec![2, 3];
    cfg.filters_per_width = 6;
    cfg.local_heads = 2;
    cfg.global_heads = 2;
    cfg.rounds = 1;
    cfg.seed = args.seed;

    let report = grad_check_end_to_end(&corpus, &cfg)?;
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
