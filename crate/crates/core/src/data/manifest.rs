use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, tag};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub subject_id: String,
    pub path: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    /// Proportions of the reference cohort: 12,952 / 1,500 / 3,015 of
    /// 17,467 recordings.
    pub const REFERENCE: SplitRatios = SplitRatios {
        train: 12_952.0 / 17_467.0,
        validation: 1_500.0 / 17_467.0,
        test: 3_015.0 / 17_467.0,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("ratios", "fractions must be nonnegative"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::config(
                "ratios",
                alloc::format!("fractions sum to {sum}, not 1"),
            ));
        }
        Ok(())
    }

    /// Record counts per split for `n` records: validation and test are
    /// rounded, train takes the remainder.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let val = libm::round(n as f64 * self.validation) as usize;
        let test = libm::round(n as f64 * self.test) as usize;
        let val = val.min(n);
        let test = test.min(n - val);
        [n - val - test, val, test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl RecordManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices of one split, in manifest order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Record counts as `[train, validation, test]`.
    pub fn split_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for e in &self.entries {
            out[e.split as usize] += 1;
        }
        out
    }

    /// Subjects in first-appearance order with their entry indices.
    pub fn subjects(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            let slot = map.entry(e.subject_id.as_str()).or_default();
            if slot.is_empty() {
                order.push(e.subject_id.clone());
            }
            slot.push(i);
        }
        order
            .into_iter()
            .map(|s| {
                let idx = map[s.as_str()].clone();
                (s, idx)
            })
            .collect()
    }

    /// Subjects of one split, in first-appearance order.
    pub fn subjects_in(&self, split: Split) -> Vec<String> {
        self.subjects()
            .into_iter()
            .filter(|(_, idx)| self.entries[idx[0]].split == split)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn position(&self, record_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.record_id == record_id)
    }
}

/// Randomly partitions subjects into train/validation/test so that every
/// record of a subject lands in the same split. Record counts follow
/// `ratios` exactly when each subject has one record and approximately
/// otherwise; each split receives at least one subject.
pub fn assign_splits(
    manifest: &RecordManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<RecordManifest> {
    ratios.validate()?;
    let mut subjects = manifest.subjects();
    if subjects.len() < 3 {
        return Err(Error::InvalidInput(alloc::format!(
            "{} subjects cannot fill 3 splits",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut rng::stream(seed, &[tag::SPLIT]));
    let mut target = ratios.counts(manifest.len());
    // Never leave a split empty.
    for s in [1, 2] {
        if target[s] == 0 {
            target[s] = 1;
            target[0] = target[0].saturating_sub(1);
        }
    }
    let mut filled = [0usize; 3];
    let mut out = manifest.clone();
    out.seed = seed;
    let order = [Split::Validation, Split::Test, Split::Train];
    let remaining_subjects = subjects.len();
    for (k, (_, idx)) in subjects.iter().enumerate() {
        let n = idx.len();
        let left = remaining_subjects - k;
        let empty: Vec<Split> = order
            .iter()
            .copied()
            .filter(|s| filled[*s as usize] == 0)
            .collect();
        let split = if left <= empty.len() {
            // Reserve the last subjects for splits that are still empty.
            empty[0]
        } else {
            order
                .iter()
                .copied()
                .find(|s| filled[*s as usize] + n <= target[*s as usize])
                .unwrap_or_else(|| {
                    *order
                        .iter()
                        .max_by_key(|s| {
                            target[**s as usize] as isize - filled[**s as usize] as isize
                        })
                        .unwrap()
                })
        };
        filled[split as usize] += n;
        for &i in idx {
            out.entries[i].split = split;
        }
    }
    Ok(out)
}

/// One sampled group of training subjects for the few-shot protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewshotSubset {
    pub size: usize,
    pub replicate: usize,
    pub subjects: Vec<String>,
}

pub const DEFAULT_FEWSHOT_SIZES: [usize; 6] = [1, 8, 64, 256, 512, 1024];
pub const DEFAULT_FEWSHOT_REPLICATES: usize = 3;

/// For every size, `replicates` uniform samples without replacement of the
/// training subjects, each from its own seeded stream.
pub fn sample_fewshot_subsets(
    manifest: &RecordManifest,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<FewshotSubset>> {
    let population = manifest.subjects_in(Split::Train);
    let mut out = Vec::with_capacity(sizes.len() * replicates);
    for &size in sizes {
        if size > population.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "few-shot size {size} exceeds {} training subjects",
                population.len()
            )));
        }
        for replicate in 0..replicates {
            let mut r = rng::stream(seed, &[tag::FEWSHOT, size as u64, replicate as u64]);
            let mut subjects: Vec<String> =
                population.choose_multiple(&mut r, size).cloned().collect();
            subjects.sort();
            out.push(FewshotSubset {
                size,
                replicate,
                subjects,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn manifest(subjects: usize, per_subject: usize) -> RecordManifest {
        let mut entries = Vec::new();
        for s in 0..subjects {
            for r in 0..per_subject {
                entries.push(ManifestEntry {
                    record_id: format!("s{s:05}_r{r}"),
                    subject_id: format!("s{s:05}"),
                    path: format!("s{s:05}_r{r}.f32"),
                    split: Split::Train,
                });
            }
        }
        RecordManifest { entries, seed: 0 }
    }

    fn assert_subject_closure(m: &RecordManifest) {
        for (_, idx) in m.subjects() {
            assert!(idx
                .iter()
                .all(|&i| m.entries[i].split == m.entries[idx[0]].split));
        }
    }

    #[test]
    fn reference_cohort_sizes() {
        let m = assign_splits(&manifest(17_467, 1), SplitRatios::REFERENCE, 1).unwrap();
        assert_eq!(m.split_counts(), [12_952, 1_500, 3_015]);
    }

    #[test]
    fn subjects_never_straddle_splits() {
        let m = assign_splits(&manifest(40, 3), SplitRatios::REFERENCE, 9).unwrap();
        assert_subject_closure(&m);
        assert_eq!(m.split_counts().iter().sum::<usize>(), 120);
        assert!(m.split_counts().iter().all(|&c| c > 0));
    }

    #[test]
    fn seeds_change_partition_not_sizes() {
        let base = manifest(200, 1);
        let a = assign_splits(&base, SplitRatios::REFERENCE, 1).unwrap();
        let b = assign_splits(&base, SplitRatios::REFERENCE, 2).unwrap();
        assert_eq!(a.split_counts(), b.split_counts());
        assert_ne!(a.entries, b.entries);
        assert_eq!(a, assign_splits(&base, SplitRatios::REFERENCE, 1).unwrap());
    }

    #[test]
    fn tiny_cohorts() {
        assert!(assign_splits(&manifest(2, 1), SplitRatios::REFERENCE, 0).is_err());
        let m = assign_splits(&manifest(3, 2), SplitRatios::REFERENCE, 0).unwrap();
        assert_eq!(m.split_counts(), [2, 2, 2]);
    }

    #[test]
    fn rejects_bad_ratios() {
        let r = SplitRatios {
            train: 0.5,
            validation: 0.2,
            test: 0.2,
        };
        assert!(assign_splits(&manifest(10, 1), r, 0).is_err());
    }

    #[test]
    fn fewshot_counts_and_determinism() {
        let m = assign_splits(&manifest(60, 2), SplitRatios::REFERENCE, 3).unwrap();
        let subsets = sample_fewshot_subsets(&m, &[1, 8], 3, 11).unwrap();
        assert_eq!(subsets.len(), 6);
        assert_eq!(subsets, sample_fewshot_subsets(&m, &[1, 8], 3, 11).unwrap());
        for s in &subsets {
            assert_eq!(s.subjects.len(), s.size);
        }
        let all = m.subjects_in(Split::Train);
        let full = sample_fewshot_subsets(&m, &[all.len()], 1, 5).unwrap();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(full[0].subjects, sorted);
        assert!(sample_fewshot_subsets(&m, &[all.len() + 1], 1, 5).is_err());
    }
}
