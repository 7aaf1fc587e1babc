//! On-disk cohorts: one raw `.f32` file and one JSON sidecar per record,
//! indexed by a JSON-lines manifest.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use psgbench_core::data::{Channel, ChannelLayout, LabelSet, ManifestEntry, PsgRecord, RecordManifest, RecordMeta, RecordSource};
use psgbench_core::PATCH_LEN;
use serde::{Deserialize, Serialize};

use crate::error::{format, io, json, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Per-record metadata stored next to the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub record_id: String,
    pub subject_id: String,
    pub channels: Vec<Channel>,
    pub sample_rate_hz: u32,
    pub n_samples: usize,
    pub labels: LabelSet,
}

impl Sidecar {
    pub fn of(record: &PsgRecord) -> Self {
        Self {
            record_id: record.meta.record_id.clone(),
            subject_id: record.meta.subject_id.clone(),
            channels: record.layout.channels.clone(),
            sample_rate_hz: record.layout.sample_rate_hz,
            n_samples: record.meta.n_samples,
            labels: record.meta.labels.clone(),
        }
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout {
            channels: self.channels.clone(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn meta(&self) -> RecordMeta {
        RecordMeta {
            record_id: self.record_id.clone(),
            subject_id: self.subject_id.clone(),
            n_samples: self.n_samples,
            labels: self.labels.clone(),
        }
    }
}

/// The sidecar of `samples.f32` is `samples.json`.
pub fn sidecar_path(samples: &Path) -> PathBuf {
    samples.with_extension("json")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json(path))
}

/// Writes channel-major little-endian samples and the sidecar.
pub fn write_record(samples: &Path, record: &PsgRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(samples).map_err(io(samples))?);
    for v in &record.signal {
        w.write_all(&v.to_le_bytes()).map_err(io(samples))?;
    }
    w.flush().map_err(io(samples))?;
    write_json(&sidecar_path(samples), &Sidecar::of(record))
}

/// One JSON object per line, in manifest order.
pub fn write_manifest(path: &Path, manifest: &RecordManifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io(path))?);
    for e in &manifest.entries {
        serde_json::to_writer(&mut w, e).map_err(json(path))?;
        w.write_all(b"\n").map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_manifest(path: &Path) -> Result<RecordManifest> {
    let file = File::open(path).map_err(io(path))?;
    let mut entries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str::<ManifestEntry>(&line).map_err(json(path))?);
    }
    Ok(RecordManifest { entries, seed: 0 })
}

/// Records of a cohort directory, read lazily from disk.
#[derive(Debug)]
pub struct DiskSource {
    layout: ChannelLayout,
    metas: Vec<RecordMeta>,
    paths: Vec<PathBuf>,
}

impl DiskSource {
    /// Opens `root/manifest.jsonl` and every sidecar it lists. All records
    /// must share one channel layout and have files of the declared size.
    pub fn open(root: &Path) -> Result<(RecordManifest, DiskSource)> {
        let manifest_path = root.join(MANIFEST_FILE);
        let manifest = read_manifest(&manifest_path)?;
        if manifest.is_empty() {
            return Err(format(&manifest_path, "manifest lists no records"));
        }
        let mut layout: Option<ChannelLayout> = None;
        let mut metas = Vec::with_capacity(manifest.len());
        let mut paths = Vec::with_capacity(manifest.len());
        for e in &manifest.entries {
            let samples = root.join(&e.path);
            let side_path = sidecar_path(&samples);
            let side: Sidecar = read_json(&side_path)?;
            if side.record_id != e.record_id || side.subject_id != e.subject_id {
                return Err(format(&side_path, "sidecar ids disagree with the manifest"));
            }
            let l = side.layout();
            match &layout {
                None => layout = Some(l),
                Some(first) if *first != l => {
                    return Err(format(&side_path, "channel layout differs from the first record"))
                }
                Some(_) => {}
            }
            if side.labels.hypnogram.len() != side.n_samples / PATCH_LEN {
                return Err(format(&side_path, "hypnogram length does not match the patch count"));
            }
            let expected = (side.n_samples * side.channels.len() * 4) as u64;
            let actual = fs::metadata(&samples).map_err(io(&samples))?.len();
            if actual != expected {
                return Err(format(&samples, format!("{actual} bytes, expected {expected}")));
            }
            metas.push(side.meta());
            paths.push(samples);
        }
        let layout = layout.expect("manifest is not empty");
        Ok((manifest, DiskSource { layout, metas, paths }))
    }

    pub fn path(&self, index: usize) -> &Path {
        &self.paths[index]
    }
}

impl RecordSource for DiskSource {
    fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    fn len(&self) -> usize {
        self.metas.len()
    }

    fn meta(&self, index: usize) -> &RecordMeta {
        &self.metas[index]
    }

    fn read_window(&self, index: usize, start: usize, len: usize) -> psgbench_core::Result<Vec<f32>> {
        let n = self.metas[index].n_samples;
        let path = &self.paths[index];
        if start + len > n {
            return Err(psgbench_core::Error::Source(std::format!(
                "window {start}+{len} beyond {n} samples of {}",
                path.display()
            )));
        }
        let fail = |e: std::io::Error| psgbench_core::Error::Source(std::format!("{}: {e}", path.display()));
        let mut file = File::open(path).map_err(fail)?;
        let mut out = Vec::with_capacity(len * self.layout.len());
        let mut buf = vec![0u8; len * 4];
        for c in 0..self.layout.len() {
            file.seek(SeekFrom::Start(((c * n + start) * 4) as u64)).map_err(fail)?;
            file.read_exact(&mut buf).map_err(fail)?;
            out.extend(buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
        }
        Ok(out)
    }
}
