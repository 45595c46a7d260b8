//! Converters from foreign sources into canonical event files plus one
//! JSON-lines manifest per split.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use snn_core::event_data::{
    generate_synthetic_dataset, write_events, DatasetManifest, Event, EventStream, ManifestRecord,
    Split, SyntheticTaskSpec,
};

use crate::status::Failure;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvertSummary {
    pub adapter: String,
    pub channel_count: u32,
    pub class_count: usize,
    pub train_samples: usize,
    pub test_samples: usize,
}

pub trait Adapter {
    fn name(&self) -> &'static str;
    /// Reads `source` and writes `train.jsonl`, `test.jsonl` and the event
    /// files they reference under `out`.
    fn convert(&self, source: &Path, out: &Path) -> Result<ConvertSummary, Failure>;
}

pub fn adapters() -> Vec<Box<dyn Adapter>> {
    vec![
        Box::new(SyntheticAdapter),
        Box::new(CsvAdapter {
            channel_count: None,
        }),
    ]
}

pub fn find_adapter(name: &str, channel_count: Option<u32>) -> Result<Box<dyn Adapter>, Failure> {
    match name {
        "synthetic" => Ok(Box::new(SyntheticAdapter)),
        "csv" => Ok(Box::new(CsvAdapter { channel_count })),
        other => Err(Failure::config(format!(
            "unknown adapter `{other}`; expected one of {}",
            adapters()
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

fn write_split(
    out: &Path,
    split: Split,
    class_count: usize,
    channel_count: u32,
    samples: &[(EventStream, usize)],
) -> Result<(), Failure> {
    let dir = out.join(split.to_string());
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    let mut records = Vec::with_capacity(samples.len());
    for (i, (stream, label)) in samples.iter().enumerate() {
        let rel = format!("{split}/{i:06}.evs");
        write_events(out.join(&rel), stream)?;
        records.push(ManifestRecord {
            path: rel.into(),
            label: *label,
        });
    }
    let manifest = DatasetManifest {
        split,
        class_count,
        channel_count,
        records,
    };
    manifest.validate()?;
    manifest.write_jsonl(out.join(format!("{split}.jsonl")))?;
    Ok(())
}

/// Source: a TOML file holding a synthetic task description.
pub struct SyntheticAdapter;

impl Adapter for SyntheticAdapter {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn convert(&self, source: &Path, out: &Path) -> Result<ConvertSummary, Failure> {
        let text = fs::read_to_string(source)
            .map_err(|e| Failure::data(format!("{}: {e}", source.display())))?;
        let spec: SyntheticTaskSpec = toml::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {}", source.display(), e.message())))?;
        export_synthetic(&spec, out)
    }
}

pub fn export_synthetic(spec: &SyntheticTaskSpec, out: &Path) -> Result<ConvertSummary, Failure> {
    let data = generate_synthetic_dataset(spec)?;
    for (split, d) in [(Split::Train, &data.train), (Split::Test, &data.test)] {
        let samples: Vec<_> = d
            .streams
            .iter()
            .cloned()
            .zip(d.labels.iter().copied())
            .collect();
        write_split(out, split, spec.class_count, spec.channel_count, &samples)?;
    }
    Ok(ConvertSummary {
        adapter: "synthetic".into(),
        channel_count: spec.channel_count,
        class_count: spec.class_count,
        train_samples: spec.train_samples,
        test_samples: spec.test_samples,
    })
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    split: Split,
    sample: u64,
    label: usize,
    time_us: u64,
    channel: u32,
}

/// Source: one CSV with header `split,sample,label,time_us,channel`, one
/// event per row. Rows of a sample may appear in any order. The channel
/// count defaults to the largest channel seen plus one.
pub struct CsvAdapter {
    pub channel_count: Option<u32>,
}

impl Adapter for CsvAdapter {
    fn name(&self) -> &'static str {
        "csv"
    }

    fn convert(&self, source: &Path, out: &Path) -> Result<ConvertSummary, Failure> {
        let mut reader = csv::Reader::from_path(source)
            .map_err(|e| Failure::data(format!("{}: {e}", source.display())))?;
        let mut samples: BTreeMap<(Split, u64), (usize, Vec<Event>)> = BTreeMap::new();
        let mut max_channel = 0;
        for (n, row) in reader.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| {
                Failure::data(format!("{}: record {}: {e}", source.display(), n + 1))
            })?;
            let entry = samples
                .entry((row.split, row.sample))
                .or_insert((row.label, Vec::new()));
            if entry.0 != row.label {
                return Err(Failure::data(format!(
                    "{}: record {}: sample {} of {} has labels {} and {}",
                    source.display(),
                    n + 1,
                    row.sample,
                    row.split,
                    entry.0,
                    row.label
                )));
            }
            max_channel = max_channel.max(row.channel);
            entry.1.push(Event {
                time_us: row.time_us,
                channel: row.channel,
            });
        }
        let channel_count = self.channel_count.unwrap_or(max_channel + 1);
        let class_count = samples.values().map(|s| s.0 + 1).max().unwrap_or(1);
        let mut counts = [0; 2];
        for (k, split) in [Split::Train, Split::Test].into_iter().enumerate() {
            let mut list = Vec::new();
            for (_, (label, events)) in samples.iter_mut().filter(|(key, _)| key.0 == split) {
                events.sort();
                list.push((
                    EventStream::new(channel_count, std::mem::take(events))?,
                    *label,
                ));
            }
            if list.is_empty() {
                return Err(Failure::data(format!(
                    "{}: no {split} samples",
                    source.display()
                )));
            }
            counts[k] = list.len();
            write_split(out, split, class_count, channel_count, &list)?;
        }
        Ok(ConvertSummary {
            adapter: "csv".into(),
            channel_count,
            class_count,
            train_samples: counts[0],
            test_samples: counts[1],
        })
    }
}
