use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapConfig;
use super::report::{evaluate_task, primary_metric, MetricReport, Protocol};
use crate::data::{sample_fewshot_subsets, RecordManifest, RecordSource, Split};
use crate::finetune::{embed_records, finetune, EmbeddingMethod, EmbeddingTable, FinetuneConfig, HeadConfig, Task};
use crate::pretrain::{pretrain, PretrainConfig, PretrainObjective, StopRule};
use crate::spectral::BaselineKind;
use crate::{Error, Result};

/// A representation: one of the pretraining objectives or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Objective(PretrainObjective),
    Baseline(BaselineKind),
}

impl Method {
    /// The eight objectives followed by the two baselines.
    pub fn all() -> Vec<Method> {
        PretrainObjective::ALL
            .into_iter()
            .map(Method::Objective)
            .chain([Method::Baseline(BaselineKind::Time), Method::Baseline(BaselineKind::Freq)])
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Objective(o) => o.name(),
            Method::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown method `{s}`")))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().into()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Fine-tunes one head and evaluates it on the test split. The template's
/// task and input width are replaced by `task` and the table width.
pub fn finetune_and_evaluate<S: RecordSource + ?Sized>(
    source: &S,
    table: &EmbeddingTable,
    task: Task,
    train: &[usize],
    val: &[usize],
    test: &[usize],
    template: &FinetuneConfig,
    boot: BootstrapConfig,
) -> Result<(crate::finetune::FinetuneOutcome, Vec<super::MetricValue>)> {
    let config = FinetuneConfig {
        head: HeadConfig {
            task,
            d_in: table.dim,
            ..template.head.clone()
        },
        ..template.clone()
    };
    let outcome = finetune(source, table, train, val, test, &config)?;
    let labels: Vec<_> = outcome.predictions.iter().map(|p| &source.meta(p.record).labels).collect();
    let values = evaluate_task(task, &outcome.predictions, &labels, boot)?;
    Ok((outcome, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewshotConfig {
    pub task: Task,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub finetune: FinetuneConfig,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
}

/// Few-shot protocol: for every method and every sampled training subset,
/// fine-tune on the subset's records and report the task's primary metric.
/// Yields `methods × sizes × replicates` rows.
pub fn run_fewshot<S: RecordSource + ?Sized>(
    source: &S,
    manifest: &RecordManifest,
    methods: &[(String, &EmbeddingTable)],
    config: &FewshotConfig,
) -> Result<Vec<MetricReport>> {
    let subsets = sample_fewshot_subsets(manifest, &config.sizes, config.replicates, config.seed)?;
    let val = manifest.indices(Split::Validation);
    let test = manifest.indices(Split::Test);
    let mut rows = Vec::with_capacity(methods.len() * subsets.len());
    for (name, table) in methods {
        for subset in &subsets {
            let train: Vec<usize> = manifest
                .indices(Split::Train)
                .into_iter()
                .filter(|&i| subset.subjects.binary_search(&manifest.entries[i].subject_id).is_ok())
                .collect();
            let (_, values) =
                finetune_and_evaluate(source, table, config.task, &train, &val, &test, &config.finetune, config.bootstrap)?;
            let primary = values
                .iter()
                .find(|v| v.metric == primary_metric(config.task))
                .expect("primary metric is always evaluated");
            let mut row = primary.report(config.task, name, test.len(), Protocol::Fewshot, config.seed);
            row.subset_size = Some(subset.size);
            row.replicate = Some(subset.replicate);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Mean of the primary metric over replicates, one row per method and size.
/// Rows with an undefined value are skipped; intervals are dropped.
pub fn summarize_fewshot(rows: &[MetricReport]) -> Vec<MetricReport> {
    let mut out: Vec<(MetricReport, usize)> = Vec::new();
    for r in rows {
        let Some(v) = r.value else { continue };
        match out
            .iter_mut()
            .find(|(o, _)| o.method == r.method && o.subset_size == r.subset_size && o.task == r.task)
        {
            Some((o, k)) => {
                *o.value.as_mut().unwrap() += v;
                *k += 1;
            }
            None => out.push((
                MetricReport {
                    replicate: None,
                    ci_low: None,
                    ci_high: None,
                    ..r.clone()
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(mut o, k)| {
            o.value = o.value.map(|s| s / k as f64);
            o
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeConfig {
    pub epochs: Vec<usize>,
    /// Training subjects used for pretraining.
    pub subset_size: usize,
    pub tasks: Vec<Task>,
    /// Template; objective and stop rule are set per run.
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub bootstrap: BootstrapConfig,
    pub embed_chunk: usize,
    pub seed: u64,
}

pub const COMPUTE_EPOCHS: [usize; 3] = [1, 4, 16];
pub const COMPUTE_SUBJECTS: usize = 64;

/// Compute-controlled protocol: every objective is pretrained for exactly
/// each epoch budget on one fixed subject subset, then fine-tuned on the
/// full training split. Yields `objectives × epochs × tasks` rows.
pub fn run_compute_controlled<S: RecordSource + ?Sized>(
    source: &S,
    manifest: &RecordManifest,
    objectives: &[PretrainObjective],
    config: &ComputeConfig,
    progress: &mut dyn FnMut(PretrainObjective, usize),
) -> Result<Vec<MetricReport>> {
    if config.epochs.is_empty() || config.epochs.contains(&0) {
        return Err(Error::config("epochs", "budgets must be positive"));
    }
    let subset = sample_fewshot_subsets(manifest, &[config.subset_size], 1, config.seed)?.remove(0);
    let train = manifest.indices(Split::Train);
    let val = manifest.indices(Split::Validation);
    let test = manifest.indices(Split::Test);
    let pretrain_records: Vec<usize> = train
        .iter()
        .copied()
        .filter(|&i| subset.subjects.binary_search(&manifest.entries[i].subject_id).is_ok())
        .collect();
    let used: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
    let max_patches = config.finetune.head.max_patches;
    let mut rows = Vec::with_capacity(objectives.len() * config.epochs.len() * config.tasks.len());
    for &objective in objectives {
        for &epochs in &config.epochs {
            progress(objective, epochs);
            let pc = PretrainConfig {
                objective,
                stop: StopRule::FixedEpochs { epochs },
                ..config.pretrain.clone()
            };
            let outcome = pretrain(source, &pretrain_records, &val, &pc, &mut |_| {})?;
            let backbone = &outcome.model.backbone;
            let table = embed_records(source, &used, EmbeddingMethod::Backbone(backbone), max_patches, config.embed_chunk)?;
            for &task in &config.tasks {
                let (_, values) =
                    finetune_and_evaluate(source, &table, task, &train, &val, &test, &config.finetune, config.bootstrap)?;
                let primary = values
                    .iter()
                    .find(|v| v.metric == primary_metric(task))
                    .expect("primary metric is always evaluated");
                let mut row = primary.report(task, objective.name(), test.len(), Protocol::Compute, config.seed);
                row.pretrain_epochs = Some(epochs);
                row.subset_size = Some(config.subset_size);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
