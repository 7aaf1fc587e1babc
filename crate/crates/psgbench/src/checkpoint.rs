//! Parameter files: an 8-byte little-endian header length, a JSON header
//! naming every tensor with its shape, then all values as little-endian
//! `f64` in header order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use psgbench_core::autograd::ParamStore;
use psgbench_core::backbone::Backbone;
use psgbench_core::data::ChannelLayout;
use psgbench_core::finetune::{Task, TaskHead};
use psgbench_core::pretrain::{Decoder, PretrainConfig, PretrainModel, PretrainObjective};
use psgbench_core::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{format, io, json, Result};

pub const FORMAT: &str = "psgbench-checkpoint";
pub const VERSION: u32 = 1;
const DECODER_PREFIX: &str = "decoder.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Pretrain,
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub kind: CheckpointKind,
    pub seed: u64,
    pub objective: Option<PretrainObjective>,
    pub task: Option<Task>,
    pub layout: ChannelLayout,
    /// The training configuration, as written by the producing command.
    pub config: serde_json::Value,
    pub tensors: Vec<TensorInfo>,
}

/// Writes `header` (its tensor list is replaced) and the tensors of `store`.
pub fn write(path: &Path, mut header: Header, store: &ParamStore) -> Result<()> {
    header.tensors = store
        .iter()
        .map(|(name, t)| TensorInfo {
            name: name.to_string(),
            shape: [t.rows(), t.cols()],
        })
        .collect();
    let head = serde_json::to_vec(&header).map_err(json(path))?;
    let mut w = BufWriter::new(File::create(path).map_err(io(path))?);
    w.write_all(&(head.len() as u64).to_le_bytes()).map_err(io(path))?;
    w.write_all(&head).map_err(io(path))?;
    for t in store.tensors() {
        for v in t.data() {
            w.write_all(&v.to_le_bytes()).map_err(io(path))?;
        }
    }
    w.flush().map_err(io(path))
}

pub fn read(path: &Path) -> Result<(Header, ParamStore)> {
    let bytes = fs::read(path).map_err(io(path))?;
    let short = || format(path, "truncated checkpoint");
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(short)?.try_into().unwrap();
    let head_len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| short())?;
    let head_end = 8usize.checked_add(head_len).ok_or_else(short)?;
    let header: Header = serde_json::from_slice(bytes.get(8..head_end).ok_or_else(short)?).map_err(json(path))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(format(path, format!("not a {FORMAT} v{VERSION} file")));
    }
    let mut store = ParamStore::new();
    let mut at = head_end;
    for info in &header.tensors {
        let n = info.shape[0] * info.shape[1];
        let raw = bytes.get(at..at + 8 * n).ok_or_else(short)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        store.add(info.name.clone(), Tensor::from_vec(info.shape[0], info.shape[1], data));
        at += 8 * n;
    }
    if at != bytes.len() {
        return Err(format(path, "trailing bytes after the last tensor"));
    }
    Ok((header, store))
}

/// Saves backbone and decoder of a pretraining run.
pub fn write_pretrain(path: &Path, model: &PretrainModel, layout: &ChannelLayout, config: &PretrainConfig) -> Result<()> {
    let mut store = model.backbone.params().clone();
    if let Some(d) = &model.decoder {
        for (name, t) in d.params().iter() {
            store.add(name, t.clone());
        }
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        kind: CheckpointKind::Pretrain,
        seed: config.seed,
        objective: Some(config.objective),
        task: None,
        layout: layout.clone(),
        config: serde_json::to_value(config).map_err(json(path))?,
        tensors: Vec::new(),
    };
    write(path, header, &store)
}

/// A pretraining checkpoint restored for use as a frozen encoder.
pub struct PretrainCheckpoint {
    pub header: Header,
    pub config: PretrainConfig,
    pub backbone: Backbone,
    pub decoder: Option<Decoder>,
}

/// Loads a pretraining checkpoint and checks it against the data layout.
pub fn read_pretrain(path: &Path, layout: &ChannelLayout) -> Result<PretrainCheckpoint> {
    let (header, store) = read(path)?;
    if header.kind != CheckpointKind::Pretrain {
        return Err(format(path, "expected a pretraining checkpoint"));
    }
    if header.layout != *layout {
        return Err(format(path, "checkpoint channel layout does not match the cohort"));
    }
    let config: PretrainConfig = serde_json::from_value(header.config.clone()).map_err(json(path))?;
    let mut backbone_params = ParamStore::new();
    let mut decoder_params = ParamStore::new();
    for (name, t) in store.iter() {
        let target = if name.starts_with(DECODER_PREFIX) { &mut decoder_params } else { &mut backbone_params };
        target.add(name, t.clone());
    }
    let backbone = Backbone::from_params(config.backbone.clone(), layout, backbone_params)
        .map_err(|e| format(path, format!("incompatible backbone: {e}")))?;
    let decoder = if decoder_params.is_empty() {
        None
    } else {
        Some(Decoder::from_params(&config.backbone, decoder_params).map_err(|e| format(path, format!("incompatible decoder: {e}")))?)
    };
    Ok(PretrainCheckpoint {
        header,
        config,
        backbone,
        decoder,
    })
}

/// Saves a fine-tuned head together with its input standardization, stored
/// as the `[1 × d_in]` tensors `scaler.mean` and `scaler.inv_std`.
pub fn write_head(path: &Path, head: &TaskHead, layout: &ChannelLayout, config: &serde_json::Value, seed: u64) -> Result<()> {
    let mut store = head.params().clone();
    let s = head.scaler();
    store.add("scaler.mean", Tensor::from_vec(1, s.mean.len(), s.mean.clone()));
    store.add("scaler.inv_std", Tensor::from_vec(1, s.inv_std.len(), s.inv_std.clone()));
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        kind: CheckpointKind::Head,
        seed,
        objective: None,
        task: Some(head.config().task),
        layout: layout.clone(),
        config: config.clone(),
        tensors: Vec::new(),
    };
    write(path, header, &store)
}
