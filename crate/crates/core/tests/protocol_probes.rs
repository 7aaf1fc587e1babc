//! Protocol-level behaviour on a small synthetic cohort: more labelled
//! subjects should not hurt, and more pretraining should not collapse.

use psgbench_core::backbone::BackboneConfig;
use psgbench_core::data::{generate_synthetic_cohort, RecordManifest, Split, SyntheticCohort, SyntheticConfig};
use psgbench_core::eval::{
    run_compute_controlled, run_fewshot, summarize_fewshot, BootstrapConfig, ComputeConfig, FewshotConfig,
};
use psgbench_core::finetune::{embed_records, EmbeddingMethod, FinetuneConfig, HeadConfig, Task};
use psgbench_core::pretrain::{pretrain, PretrainConfig, PretrainObjective, StopRule};

fn cohort() -> (RecordManifest, SyntheticCohort) {
    // 90 subjects leave 66 in the training split.
    generate_synthetic_cohort(SyntheticConfig::tiny(90, 600, 21)).unwrap()
}

fn boot() -> BootstrapConfig {
    BootstrapConfig { n_boot: 100, ..Default::default() }
}

fn staging_template(d_in: usize) -> FinetuneConfig {
    FinetuneConfig::desk(HeadConfig::new(Task::Staging, d_in, BackboneConfig::desk().d_model))
}

#[test]
fn fewshot_metric_grows_from_one_to_sixty_four_subjects() {
    let (manifest, cohort) = cohort();
    assert!(manifest.subjects_in(Split::Train).len() >= 64);
    let mut config = PretrainConfig::desk(PretrainObjective::ClPairwise);
    config.stop = StopRule::FixedEpochs { epochs: 3 };
    let out = pretrain(&cohort, &manifest.indices(Split::Train), &manifest.indices(Split::Validation), &config, &mut |_| {}).unwrap();
    let all: Vec<usize> = (0..manifest.len()).collect();
    let table = embed_records(&cohort, &all, EmbeddingMethod::Backbone(&out.model.backbone), 5760, 4).unwrap();
    let rows = run_fewshot(
        &cohort,
        &manifest,
        &[("cl_pairwise".to_string(), &table)],
        &FewshotConfig {
            task: Task::Staging,
            sizes: vec![1, 64],
            replicates: 3,
            finetune: staging_template(table.dim),
            bootstrap: boot(),
            seed: 0,
        },
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    let summary = summarize_fewshot(&rows);
    let at = |size: usize| summary.iter().find(|r| r.subset_size == Some(size)).and_then(|r| r.value).unwrap();
    assert!(at(64) >= at(1), "size 64 {} < size 1 {}", at(64), at(1));
}

#[test]
fn four_epochs_of_contrastive_pretraining_do_not_fall_behind_one() {
    let (manifest, cohort) = cohort();
    let pretrain = PretrainConfig::desk(PretrainObjective::ClPairwise);
    let config = ComputeConfig {
        epochs: vec![1, 4],
        subset_size: 64,
        tasks: vec![Task::Staging],
        finetune: staging_template(pretrain.backbone.embed_dim()),
        pretrain,
        bootstrap: boot(),
        embed_chunk: 4,
        seed: 0,
    };
    let rows = run_compute_controlled(&cohort, &manifest, &[PretrainObjective::ClPairwise], &config, &mut |_, _| {}).unwrap();
    assert_eq!(rows.len(), 2);
    let at = |e: usize| rows.iter().find(|r| r.pretrain_epochs == Some(e)).and_then(|r| r.value).unwrap();
    assert!(at(4) >= at(1) - 0.05, "4 epochs {} vs 1 epoch {}", at(4), at(1));
}
