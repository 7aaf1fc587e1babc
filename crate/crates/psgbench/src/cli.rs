//! Command definitions and their implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use psgbench_core::backbone::BackboneConfig;
use psgbench_core::data::{generate_synthetic_cohort, record_ids, RecordManifest, RecordSource, Split, SyntheticConfig};
use psgbench_core::eval::{
    finetune_and_evaluate, run_compute_controlled, run_fewshot, summarize_fewshot, BootstrapConfig, ComputeConfig,
    FewshotConfig, Method, MetricReport, Protocol,
};
use psgbench_core::finetune::{embed_records, EmbeddingMethod, EmbeddingTable, FinetuneConfig, HeadConfig, Task};
use psgbench_core::optim::AdamConfig;
use psgbench_core::pretrain::{pretrain, PretrainConfig, PretrainObjective, StopRule};
use psgbench_core::spectral::BaselineKind;
use psgbench_core::train::TrainStatus;
use serde::Serialize;

use crate::checkpoint;
use crate::disk::{self, write_json, DiskSource, MANIFEST_FILE};
use crate::report::{write_loss_csv, write_predictions_csv, write_reports_csv};

/// Default cohort directory when `--data` / `--out` are not given.
pub const DATA_ENV: &str = "PSGBENCH_DATA";
pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "psgbench", version, about = "Self-supervised PSG representation benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort with manifest and splits.
    Generate(GenerateArgs),
    /// Pretrain a backbone with one objective.
    Pretrain(PretrainArgs),
    /// Fine-tune a task head on frozen embeddings and evaluate it.
    FinetuneEval(FinetuneArgs),
    /// Run an evaluation protocol.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
}

#[derive(Debug, Subcommand)]
pub enum ProtocolCommand {
    /// Fine-tune on sampled subsets of training subjects.
    Fewshot(FewshotArgs),
    /// Pretrain for fixed epoch budgets, then fine-tune and evaluate.
    Compute(ComputeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the contents of a non-empty output directory.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Output directory; defaults to $PSGBENCH_DATA.
    #[arg(long, env = DATA_ENV)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub subjects: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub records_per_subject: u64,
    /// Seconds per record, a multiple of 300.
    #[arg(long, default_value_t = 3600)]
    pub duration_s: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Cohort directory; defaults to $PSGBENCH_DATA.
    #[arg(long, env = DATA_ENV)]
    pub data: PathBuf,
}

fn parse_objective(s: &str) -> Result<PretrainObjective, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = PretrainObjective::ALL.iter().map(|o| o.name()).collect();
        format!("unknown objective `{s}`; valid objectives: {}", names.join(", "))
    })
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|_| format!("unknown task `{s}`; valid tasks: staging, apnea, age, survival"))
}

fn parse_baseline(s: &str) -> Result<BaselineKind, String> {
    match s {
        "baseline_time" => Ok(BaselineKind::Time),
        "baseline_freq" => Ok(BaselineKind::Freq),
        _ => Err(format!("unknown method `{s}`; valid methods: baseline_time, baseline_freq")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Early-stopping epoch cap.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub val_records: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_parser = parse_objective, required_unless_present = "config")]
    pub objective: Option<PretrainObjective>,
    /// Pretraining configuration file; replaces every other training flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train for exactly this many epochs instead of early stopping.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Segments drawn from the start of each record per epoch.
    #[arg(long)]
    pub max_segments_per_record: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Head width; defaults to the backbone width.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Segments embedded per forward pass.
    #[arg(long, default_value_t = 4)]
    pub embed_chunk: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// Pretraining checkpoint providing the frozen backbone.
    #[arg(long, required_unless_present = "method", conflicts_with = "method")]
    pub checkpoint: Option<PathBuf>,
    /// Baseline embeddings instead of a backbone.
    #[arg(long, value_parser = parse_baseline)]
    pub method: Option<BaselineKind>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FewshotArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// Pretraining checkpoints to compare.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    /// Baselines to compare.
    #[arg(long = "method", value_parser = parse_baseline)]
    pub methods: Vec<BaselineKind>,
    #[arg(long, value_delimiter = ',', default_values_t = psgbench_core::data::DEFAULT_FEWSHOT_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = psgbench_core::data::DEFAULT_FEWSHOT_REPLICATES)]
    pub replicates: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_objective, required = true)]
    pub objectives: Vec<PretrainObjective>,
    #[arg(long, value_delimiter = ',', default_values_t = psgbench_core::eval::COMPUTE_EPOCHS)]
    pub epochs: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_task, default_value = "staging")]
    pub tasks: Vec<Task>,
    /// Training subjects used for pretraining.
    #[arg(long, default_value_t = psgbench_core::eval::COMPUTE_SUBJECTS)]
    pub subset_size: usize,
    #[arg(long)]
    pub max_segments_per_record: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

/// What every output directory records about the run that produced it.
#[derive(Serialize)]
struct Echo<'a, A: Serialize, C: Serialize> {
    command: &'a str,
    argv: &'a [String],
    args: &'a A,
    resolved: C,
}

fn echo<A: Serialize, C: Serialize>(out: &Path, command: &str, argv: &[String], args: &A, resolved: C) -> Result<()> {
    // --force changes how the directory is prepared, not what goes in it.
    let argv: Vec<String> = argv.iter().filter(|a| *a != "--force").cloned().collect();
    write_json(&out.join(CONFIG_ECHO), &Echo { command, argv: &argv, args, resolved })?;
    Ok(())
}

/// Creates `dir`, refusing to touch a non-empty one unless `force`.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?.next().is_some();
        if non_empty {
            if !force {
                bail!("output directory {} is not empty; pass --force to replace it", dir.display());
            }
            fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn open_cohort(data: &DataArgs) -> Result<(RecordManifest, DiskSource)> {
    let (m, s) = DiskSource::open(&data.data).with_context(|| format!("opening cohort {}", data.data.display()))?;
    Ok((m, s))
}

pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, argv),
        Command::Pretrain(a) => cmd_pretrain(&a, argv),
        Command::FinetuneEval(a) => cmd_finetune_eval(&a, argv),
        Command::Protocol(ProtocolCommand::Fewshot(a)) => cmd_fewshot(&a, argv),
        Command::Protocol(ProtocolCommand::Compute(a)) => cmd_compute(&a, argv),
    }
}

#[derive(Serialize)]
struct CohortSummary {
    records: usize,
    subjects: usize,
    train: usize,
    validation: usize,
    test: usize,
}

pub fn cmd_generate(a: &GenerateArgs, argv: &[String]) -> Result<()> {
    let config = SyntheticConfig {
        n_subjects: a.subjects as usize,
        records_per_subject: a.records_per_subject as usize,
        duration_s: a.duration_s,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let (mut manifest, cohort) = generate_synthetic_cohort(config.clone())?;
    prepare_output(&a.out, a.force)?;
    let records_dir = a.out.join("records");
    fs::create_dir_all(&records_dir).with_context(|| format!("creating {}", records_dir.display()))?;
    for (i, entry) in manifest.entries.iter_mut().enumerate() {
        entry.path = format!("records/{}", entry.path);
        disk::write_record(&a.out.join(&entry.path), &cohort.load(i)?)?;
    }
    disk::write_manifest(&a.out.join(MANIFEST_FILE), &manifest)?;
    let [train, validation, test] = manifest.split_counts();
    let summary = CohortSummary {
        records: manifest.len(),
        subjects: manifest.subjects().len(),
        train,
        validation,
        test,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    echo(&a.out, "generate", argv, a, &config)?;
    println!(
        "{} records from {} subjects: train {train}, validation {validation}, test {test}",
        summary.records, summary.subjects
    );
    Ok(())
}

fn pretrain_preset(objective: PretrainObjective, preset: Preset) -> PretrainConfig {
    let desk = PretrainConfig::desk(objective);
    match preset {
        Preset::Desk => desk,
        Preset::Paper => PretrainConfig {
            backbone: BackboneConfig::paper(),
            batch_size: 256,
            val_records: 100,
            ..desk
        },
    }
}

/// Builds the pretraining configuration from a config file or flags.
pub fn resolve_pretrain(a: &PretrainArgs) -> Result<PretrainConfig> {
    let mut c = match &a.config {
        Some(path) => disk::read_json::<PretrainConfig>(path)?,
        None => {
            let objective = a.objective.ok_or_else(|| anyhow!("--objective is required"))?;
            let mut c = pretrain_preset(objective, a.train.preset);
            c.seed = a.train.seed;
            if let Some(lr) = a.train.lr {
                c.adam.lr = lr;
            }
            if let Some(b) = a.train.batch_size {
                c.batch_size = b;
            }
            if let Some(v) = a.train.val_records {
                c.val_records = v;
            }
            if let StopRule::EarlyStopping { max_epochs, patience } = &mut c.stop {
                *max_epochs = a.train.max_epochs.unwrap_or(*max_epochs);
                *patience = a.train.patience.unwrap_or(*patience);
            }
            if let Some(epochs) = a.epochs {
                c.stop = StopRule::FixedEpochs { epochs };
            }
            c.max_segments_per_record = a.max_segments_per_record;
            c
        }
    };
    if a.config.is_some() {
        if let Some(o) = a.objective {
            c.objective = o;
        }
    }
    c.backbone.seed = c.seed;
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct PretrainSummary<'a> {
    objective: PretrainObjective,
    status: &'a TrainStatus,
    epochs_run: usize,
    steps: usize,
    kept_epoch: usize,
    best_val_loss: Option<f64>,
    train_records: usize,
    val_records: usize,
}

pub fn cmd_pretrain(a: &PretrainArgs, argv: &[String]) -> Result<()> {
    let config = resolve_pretrain(a)?;
    let (manifest, source) = open_cohort(&a.data)?;
    prepare_output(&a.output.out, a.output.force)?;
    echo(&a.output.out, "pretrain", argv, a, &config)?;
    let train = manifest.indices(Split::Train);
    let val = manifest.indices(Split::Validation);
    eprintln!("pretraining {} on {} records", config.objective, train.len());
    let outcome = pretrain(&source, &train, &val, &config, &mut |p| {
        if p.split == Split::Validation {
            eprintln!("epoch {} validation loss {:.6}", p.epoch, p.loss);
        }
    })?;
    let out = &a.output.out;
    checkpoint::write_pretrain(&out.join("checkpoint.bin"), &outcome.model, source.layout(), &config)?;
    write_loss_csv(&out.join("loss.csv"), &outcome.curve)?;
    write_json(
        &out.join("summary.json"),
        &PretrainSummary {
            objective: config.objective,
            status: &outcome.status,
            epochs_run: outcome.epochs_run,
            steps: outcome.steps,
            kept_epoch: outcome.kept_epoch,
            best_val_loss: outcome.best_val_loss,
            train_records: train.len(),
            val_records: val.len().min(config.val_records),
        },
    )?;
    if let TrainStatus::Diverged { step } = outcome.status {
        bail!("pretraining diverged at step {step}; checkpoint holds the last finite parameters");
    }
    eprintln!("kept epoch {} of {}", outcome.kept_epoch, outcome.epochs_run);
    Ok(())
}

fn finetune_template(task: Task, d_in: usize, width: usize, t: &TrainArgs) -> FinetuneConfig {
    let mut c = FinetuneConfig::desk(HeadConfig::new(task, d_in, width));
    if t.preset == Preset::Paper {
        c.val_records = 100;
    }
    c.seed = t.seed;
    c.head.seed = t.seed;
    if let Some(lr) = t.lr {
        c.adam = AdamConfig { lr, ..c.adam };
    }
    c.batch_size = t.batch_size.unwrap_or(c.batch_size);
    c.max_epochs = t.max_epochs.unwrap_or(c.max_epochs);
    c.patience = t.patience.unwrap_or(c.patience);
    c.val_records = t.val_records.unwrap_or(c.val_records);
    c
}

fn default_width(preset: Preset) -> usize {
    match preset {
        Preset::Desk => BackboneConfig::desk().d_model,
        Preset::Paper => BackboneConfig::paper().d_model,
    }
}

fn bootstrap(e: &EvalArgs, seed: u64) -> BootstrapConfig {
    BootstrapConfig {
        n_boot: e.n_boot,
        level: e.level,
        seed,
    }
}

/// Records the fine-tuning protocols touch: all three splits.
fn used_records(manifest: &RecordManifest) -> Vec<usize> {
    Split::ALL.iter().flat_map(|&s| manifest.indices(s)).collect()
}

fn embed(source: &DiskSource, records: &[usize], method: EmbeddingMethod<'_>, chunk: usize) -> Result<EmbeddingTable> {
    eprintln!("embedding {} records", records.len());
    Ok(embed_records(source, records, method, psgbench_core::MAX_RECORD_PATCHES, chunk)?)
}

#[derive(Serialize)]
struct FinetuneResolved<'a> {
    method: &'a str,
    finetune: &'a FinetuneConfig,
    bootstrap: BootstrapConfig,
}

#[derive(Serialize)]
struct FinetuneSummary<'a> {
    task: Task,
    method: &'a str,
    status: &'a TrainStatus,
    epochs_run: usize,
    kept_epoch: usize,
    best_val_loss: Option<f64>,
    train_records: usize,
    test_records: usize,
}

pub fn cmd_finetune_eval(a: &FinetuneArgs, argv: &[String]) -> Result<()> {
    let (manifest, source) = open_cohort(&a.data)?;
    let ckpt = match &a.checkpoint {
        Some(p) => Some(checkpoint::read_pretrain(p, source.layout())?),
        None => None,
    };
    let (method_name, embedding, width) = match (&ckpt, a.method) {
        (Some(c), _) => (
            c.config.objective.name(),
            EmbeddingMethod::Backbone(&c.backbone),
            c.config.backbone.d_model,
        ),
        (None, Some(kind)) => (kind.name(), EmbeddingMethod::Baseline(kind), default_width(a.train.preset)),
        (None, None) => bail!("either --checkpoint or --method is required"),
    };
    let width = a.eval.width.unwrap_or(width);
    let template = finetune_template(a.task, embedding.dim(), width, &a.train);
    let boot = bootstrap(&a.eval, a.train.seed);
    template.validate()?;
    prepare_output(&a.output.out, a.output.force)?;
    let out = &a.output.out;
    echo(
        out,
        "finetune-eval",
        argv,
        a,
        FinetuneResolved {
            method: method_name,
            finetune: &template,
            bootstrap: boot,
        },
    )?;
    let table = embed(&source, &used_records(&manifest), embedding, a.eval.embed_chunk)?;
    let (train, val, test) = (
        manifest.indices(Split::Train),
        manifest.indices(Split::Validation),
        manifest.indices(Split::Test),
    );
    eprintln!("fine-tuning {} head on {} records", a.task, train.len());
    let (outcome, values) = finetune_and_evaluate(&source, &table, a.task, &train, &val, &test, &template, boot)?;
    let rows: Vec<MetricReport> = values
        .iter()
        .map(|v| v.report(a.task, method_name, test.len(), Protocol::Full, a.train.seed))
        .collect();
    let ids = record_ids(&source);
    write_reports_csv(&out.join("metrics.csv"), &rows)?;
    write_json(&out.join("metrics.json"), &rows)?;
    write_predictions_csv(&out.join("predictions.csv"), a.task, &outcome.predictions, &ids)?;
    write_loss_csv(&out.join("loss.csv"), &outcome.curve)?;
    checkpoint::write_head(
        &out.join("head.bin"),
        &outcome.head,
        source.layout(),
        &serde_json::to_value(&template)?,
        a.train.seed,
    )?;
    write_json(
        &out.join("summary.json"),
        &FinetuneSummary {
            task: a.task,
            method: method_name,
            status: &outcome.status,
            epochs_run: outcome.epochs_run,
            kept_epoch: outcome.kept_epoch,
            best_val_loss: outcome.best_val_loss,
            train_records: train.len(),
            test_records: test.len(),
        },
    )?;
    for r in &rows {
        match r.value {
            Some(v) => println!(
                "{} {} {} = {v:.4} [{:.4}, {:.4}]",
                r.task,
                r.method,
                r.metric,
                r.ci_low.unwrap_or(f64::NAN),
                r.ci_high.unwrap_or(f64::NAN)
            ),
            None => println!("{} {} {} undefined", r.task, r.method, r.metric),
        }
    }
    Ok(())
}

fn write_rows(out: &Path, rows: &[MetricReport]) -> Result<()> {
    write_reports_csv(&out.join("results.csv"), rows)?;
    write_json(&out.join("results.json"), rows)?;
    Ok(())
}

#[derive(Serialize)]
struct FewshotResolved<'a> {
    methods: &'a [String],
    fewshot: &'a FewshotConfig,
}

pub fn cmd_fewshot(a: &FewshotArgs, argv: &[String]) -> Result<()> {
    if a.checkpoints.is_empty() && a.methods.is_empty() {
        bail!("give at least one --checkpoint or --method");
    }
    let (manifest, source) = open_cohort(&a.data)?;
    let mut ckpts = Vec::new();
    for p in &a.checkpoints {
        ckpts.push(checkpoint::read_pretrain(p, source.layout())?);
    }
    let mut named: Vec<(String, EmbeddingMethod<'_>)> = ckpts
        .iter()
        .map(|c| (c.config.objective.name().to_string(), EmbeddingMethod::Backbone(&c.backbone)))
        .collect();
    named.extend(a.methods.iter().map(|&k| (Method::Baseline(k).name().to_string(), EmbeddingMethod::Baseline(k))));
    let width = a.eval.width.unwrap_or_else(|| {
        ckpts.first().map_or(default_width(a.train.preset), |c| c.config.backbone.d_model)
    });
    let config = FewshotConfig {
        task: a.task,
        sizes: a.sizes.clone(),
        replicates: a.replicates,
        finetune: finetune_template(a.task, 1, width, &a.train),
        bootstrap: bootstrap(&a.eval, a.train.seed),
        seed: a.train.seed,
    };
    let names: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
    prepare_output(&a.output.out, a.output.force)?;
    echo(&a.output.out, "protocol fewshot", argv, a, FewshotResolved { methods: &names, fewshot: &config })?;
    let used = used_records(&manifest);
    let mut tables = Vec::with_capacity(named.len());
    for (_, m) in &named {
        tables.push(embed(&source, &used, *m, a.eval.embed_chunk)?);
    }
    let methods: Vec<(String, &EmbeddingTable)> = names.iter().cloned().zip(tables.iter()).collect();
    eprintln!(
        "few-shot: {} methods x {} sizes x {} replicates",
        methods.len(),
        config.sizes.len(),
        config.replicates
    );
    let rows = run_fewshot(&source, &manifest, &methods, &config)?;
    write_rows(&a.output.out, &rows)?;
    write_reports_csv(&a.output.out.join("summary.csv"), &summarize_fewshot(&rows))?;
    println!("{} rows written to {}", rows.len(), a.output.out.join("results.csv").display());
    Ok(())
}

pub fn cmd_compute(a: &ComputeArgs, argv: &[String]) -> Result<()> {
    let (manifest, source) = open_cohort(&a.data)?;
    let mut pretrain_cfg = pretrain_preset(a.objectives[0], a.train.preset);
    pretrain_cfg.seed = a.train.seed;
    pretrain_cfg.backbone.seed = a.train.seed;
    pretrain_cfg.max_segments_per_record = a.max_segments_per_record;
    if let Some(lr) = a.train.lr {
        pretrain_cfg.adam.lr = lr;
    }
    if let Some(b) = a.train.batch_size {
        pretrain_cfg.batch_size = b;
    }
    let width = a.eval.width.unwrap_or(pretrain_cfg.backbone.d_model);
    let config = ComputeConfig {
        epochs: a.epochs.clone(),
        subset_size: a.subset_size,
        tasks: a.tasks.clone(),
        pretrain: pretrain_cfg,
        finetune: finetune_template(a.tasks[0], 1, width, &a.train),
        bootstrap: bootstrap(&a.eval, a.train.seed),
        embed_chunk: a.eval.embed_chunk,
        seed: a.train.seed,
    };
    prepare_output(&a.output.out, a.output.force)?;
    echo(&a.output.out, "protocol compute", argv, a, &config)?;
    let rows = run_compute_controlled(&source, &manifest, &a.objectives, &config, &mut |o, e| {
        eprintln!("pretraining {o} for {e} epochs");
    })?;
    write_rows(&a.output.out, &rows)?;
    println!("{} rows written to {}", rows.len(), a.output.out.join("results.csv").display());
    Ok(())
}
