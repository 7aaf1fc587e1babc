use alloc::vec::Vec;

use crate::backbone::Backbone;
use crate::data::RecordSource;
use crate::spectral::{baseline_embed, BaselineKind, BASELINE_DIM};
use crate::tensor::Tensor;
use crate::{Error, Result, PATCH_LEN, SEGMENT_PATCHES};

/// Where patch embeddings come from.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingMethod<'a> {
    Backbone(&'a Backbone),
    Baseline(BaselineKind),
}

impl EmbeddingMethod<'_> {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingMethod::Backbone(b) => b.config().embed_dim(),
            EmbeddingMethod::Baseline(_) => BASELINE_DIM,
        }
    }

    fn segment_patches(&self) -> usize {
        match self {
            EmbeddingMethod::Backbone(b) => b.config().segment_patches,
            EmbeddingMethod::Baseline(_) => SEGMENT_PATCHES,
        }
    }
}

/// Patch embeddings `[T × dim]` per record, indexed like the source.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub records: Vec<Option<Tensor>>,
}

impl EmbeddingTable {
    pub fn get(&self, record: usize) -> Result<&Tensor> {
        self.records
            .get(record)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("record {record} has no embeddings")))
    }
}

/// Embeds whole segments from the start of each record, at most
/// `max_patches` patches. Segments are embedded `chunk` at a time.
pub fn embed_records<S: RecordSource + ?Sized>(
    source: &S,
    records: &[usize],
    method: EmbeddingMethod<'_>,
    max_patches: usize,
    chunk: usize,
) -> Result<EmbeddingTable> {
    let per_seg = method.segment_patches();
    let seg_len = per_seg * PATCH_LEN;
    let dim = method.dim();
    let n_ch = source.layout().len();
    let mut table = EmbeddingTable {
        dim,
        records: alloc::vec![None; source.len()],
    };
    for &rec in records {
        let n_seg = (source.meta(rec).n_samples / seg_len).min(max_patches.div_ceil(per_seg));
        let mut rows: Vec<f64> = Vec::with_capacity(n_seg * per_seg * dim);
        let mut s = 0;
        while s < n_seg {
            let k = chunk.max(1).min(n_seg - s);
            let window = source.read_window(rec, s * seg_len, k * seg_len)?;
            match method {
                EmbeddingMethod::Backbone(b) => {
                    let total = k * seg_len;
                    let segs: Vec<Vec<f32>> = (0..k)
                        .map(|i| {
                            (0..n_ch)
                                .flat_map(|c| window[c * total + i * seg_len..c * total + (i + 1) * seg_len].iter().copied())
                                .collect()
                        })
                        .collect();
                    let refs: Vec<&[f32]> = segs.iter().map(Vec::as_slice).collect();
                    rows.extend_from_slice(b.embed(&refs, per_seg)?.data());
                }
                EmbeddingMethod::Baseline(kind) => {
                    let total = k * seg_len;
                    let mut patch = alloc::vec![0.0; n_ch * PATCH_LEN];
                    for p in 0..k * per_seg {
                        for c in 0..n_ch {
                            let src = &window[c * total + p * PATCH_LEN..c * total + (p + 1) * PATCH_LEN];
                            for (d, &v) in patch[c * PATCH_LEN..(c + 1) * PATCH_LEN].iter_mut().zip(src) {
                                *d = v as f64;
                            }
                        }
                        rows.extend(baseline_embed(kind, &patch, source.layout())?.vector);
                    }
                }
            }
            s += k;
        }
        let t = (rows.len() / dim).min(max_patches);
        rows.truncate(t * dim);
        table.records[rec] = Some(Tensor::from_vec(t, dim, rows));
    }
    Ok(table)
}
