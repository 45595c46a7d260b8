use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bin_events, read_events, EventStream, SpikeRaster};
use crate::error::{Result, SnnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One line of a JSON-lines manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub split: Split,
    pub class_count: usize,
    pub channel_count: u32,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(SnnError::MalformedInput(
                "class_count must be positive".into(),
            ));
        }
        if let Some(r) = self.records.iter().find(|r| r.label >= self.class_count) {
            return Err(SnnError::MalformedInput(format!(
                "{}: label {} outside [0, {})",
                r.path.display(),
                r.label,
                self.class_count
            )));
        }
        Ok(())
    }

    /// Errors if any sample path appears in both splits.
    pub fn ensure_disjoint(&self, other: &DatasetManifest) -> Result<()> {
        let mine: HashSet<&PathBuf> = self.records.iter().map(|r| &r.path).collect();
        match other.records.iter().find(|r| mine.contains(&r.path)) {
            Some(r) => Err(SnnError::MalformedInput(format!(
                "{} appears in both {} and {} splits",
                r.path.display(),
                self.split,
                other.split
            ))),
            None => Ok(()),
        }
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        let mut f = fs::File::create(path).map_err(|e| SnnError::io(path, e))?;
        f.write_all(&out).map_err(|e| SnnError::io(path, e))
    }

    /// Reads a JSON-lines manifest. Relative sample paths are resolved
    /// against the manifest's directory. `class_count` defaults to the
    /// largest label plus one; `channel_count` is taken from the first
    /// sample file.
    pub fn read_jsonl(
        path: impl AsRef<Path>,
        split: Split,
        class_count: Option<usize>,
    ) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let f = fs::File::open(path).map_err(|e| SnnError::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| SnnError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                SnnError::MalformedInput(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            if rec.path.is_relative() {
                rec.path = base.join(&rec.path);
            }
            records.push(rec);
        }
        let first = records.first().ok_or_else(|| {
            SnnError::MalformedInput(format!("{}: manifest is empty", path.display()))
        })?;
        let channel_count = read_events(&first.path)?.channel_count();
        let class_count =
            class_count.unwrap_or_else(|| records.iter().map(|r| r.label + 1).max().unwrap_or(1));
        let manifest = DatasetManifest {
            split,
            class_count,
            channel_count,
            records,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

/// In-memory event streams with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub streams: Vec<EventStream>,
    pub labels: Vec<usize>,
}

impl SplitData {
    pub fn bin(&self, dt_ms: f64, steps: usize, class_count: usize) -> Result<Dataset> {
        let rasters = self
            .streams
            .par_iter()
            .map(|s| bin_events(s, dt_ms, steps))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(rasters, self.labels.clone(), class_count)
    }
}

/// Loads every sample named by a manifest. Files are read in parallel.
pub fn load_split(manifest: &DatasetManifest) -> Result<SplitData> {
    manifest.validate()?;
    let streams = manifest
        .records
        .par_iter()
        .map(|r| {
            let s = read_events(&r.path)?;
            if s.channel_count() != manifest.channel_count {
                return Err(SnnError::MalformedInput(format!(
                    "{} has {} channels, manifest expects {}",
                    r.path.display(),
                    s.channel_count(),
                    manifest.channel_count
                )));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitData {
        streams,
        labels: manifest.records.iter().map(|r| r.label).collect(),
    })
}

/// Binned, labelled samples ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rasters: Vec<SpikeRaster>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(rasters: Vec<SpikeRaster>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if rasters.len() != labels.len() {
            return Err(SnnError::Dimension(format!(
                "{} rasters but {} labels",
                rasters.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(SnnError::MalformedInput(format!(
                "label {l} outside [0, {class_count})"
            )));
        }
        if let Some(first) = rasters.first() {
            let shape = (first.steps(), first.channels());
            if rasters.iter().any(|r| (r.steps(), r.channels()) != shape) {
                return Err(SnnError::Dimension("rasters differ in shape".into()));
            }
        }
        Ok(Dataset {
            rasters,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.rasters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rasters.is_empty()
    }

    pub fn channels(&self) -> Option<usize> {
        self.rasters.first().map(SpikeRaster::channels)
    }
}
