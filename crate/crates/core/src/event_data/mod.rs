//! Event ingestion: canonical event files, spike-raster binning, dataset
//! manifests and synthetic desk-scale tasks.

mod format;
mod manifest;
mod synthetic;

pub use format::{read_events, write_events, EVENT_MAGIC};
pub use manifest::{load_split, Dataset, DatasetManifest, ManifestRecord, Split, SplitData};
pub use synthetic::{generate_synthetic_dataset, SyntheticDataset, SyntheticTaskSpec, TaskKind};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

/// Default simulation step in milliseconds.
pub const DEFAULT_DT_MS: f64 = 14.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub time_us: u64,
    pub channel: u32,
}

/// Time-ordered spike events of a single sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    channel_count: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates ordering and channel range.
    pub fn new(channel_count: u32, events: Vec<Event>) -> Result<Self> {
        if channel_count == 0 {
            return Err(SnnError::MalformedInput(
                "channel_count must be positive".into(),
            ));
        }
        if let Some((i, e)) = events
            .iter()
            .enumerate()
            .find(|(_, e)| e.channel >= channel_count)
        {
            return Err(SnnError::MalformedInput(format!(
                "event {i} on channel {} but stream has {channel_count} channels",
                e.channel
            )));
        }
        if let Some(i) = events.windows(2).position(|w| w[1].time_us < w[0].time_us) {
            return Err(SnnError::MalformedInput(format!(
                "event {} at {} us precedes event {} at {} us",
                i + 1,
                events[i + 1].time_us,
                i,
                events[i].time_us
            )));
        }
        Ok(EventStream {
            channel_count,
            events,
        })
    }

    pub fn empty(channel_count: u32) -> Result<Self> {
        Self::new(channel_count, Vec::new())
    }

    pub fn channel_count(&self) -> u32 {
        self.channel_count
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Binary `steps × channels` spike matrix at a fixed time resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRaster {
    steps: usize,
    channels: usize,
    dt_ms: f64,
    bits: Vec<u8>,
}

impl SpikeRaster {
    pub fn zeros(steps: usize, channels: usize, dt_ms: f64) -> Self {
        SpikeRaster {
            steps,
            channels,
            dt_ms,
            bits: vec![0; steps * channels],
        }
    }

    /// Builds a raster from nested rows; every entry must be 0 or 1.
    pub fn from_rows(rows: &[Vec<u8>], dt_ms: f64) -> Result<Self> {
        let steps = rows.len();
        let channels = rows.first().map_or(0, Vec::len);
        if steps == 0 || channels == 0 {
            return Err(SnnError::MalformedInput("raster must be non-empty".into()));
        }
        let mut raster = SpikeRaster::zeros(steps, channels, dt_ms);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != channels {
                return Err(SnnError::Dimension(format!(
                    "raster row {t} has {} channels, expected {channels}",
                    row.len()
                )));
            }
            for (c, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(SnnError::MalformedInput(format!(
                        "raster entry ({t},{c}) = {b} is not binary"
                    )));
                }
                raster.bits[t * channels + c] = b;
            }
        }
        Ok(raster)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> bool {
        self.bits[t * self.channels + c] != 0
    }

    pub fn set(&mut self, t: usize, c: usize, on: bool) {
        self.bits[t * self.channels + c] = on as u8;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[u8] {
        &self.bits[t * self.channels..(t + 1) * self.channels]
    }

    /// Row `t` as a 0/1 float vector written into `out`.
    pub fn row_into(&self, t: usize, out: &mut [f64]) {
        for (o, &b) in out.iter_mut().zip(self.row(t)) {
            *o = b as f64;
        }
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// One event per set bit, placed at the first microsecond of its bin.
    pub fn to_event_stream(&self) -> Result<EventStream> {
        let bin_us = 1000.0 * self.dt_ms;
        let mut events = Vec::with_capacity(self.spike_count());
        for t in 0..self.steps {
            let time_us = (t as f64 * bin_us).ceil() as u64;
            for c in 0..self.channels {
                if self.get(t, c) {
                    events.push(Event {
                        time_us,
                        channel: c as u32,
                    });
                }
            }
        }
        EventStream::new(self.channels as u32, events)
    }
}

/// Bins a stream into a `steps × channel_count` raster. Events past the last
/// bin are dropped and coincident events clamp to a single spike.
pub fn bin_events(stream: &EventStream, dt_ms: f64, steps: usize) -> Result<SpikeRaster> {
    if !(dt_ms > 0.0) || !dt_ms.is_finite() {
        return Err(SnnError::Domain(format!(
            "dt_ms must be positive, got {dt_ms}"
        )));
    }
    if steps == 0 {
        return Err(SnnError::Domain("steps must be at least 1".into()));
    }
    let channels = stream.channel_count() as usize;
    let bin_us = 1000.0 * dt_ms;
    let mut raster = SpikeRaster::zeros(steps, channels, dt_ms);
    for e in stream.events() {
        let c = e.channel as usize;
        if c >= channels {
            return Err(SnnError::MalformedInput(format!(
                "channel {c} out of range for {channels} channels"
            )));
        }
        let bin = (e.time_us as f64 / bin_us).floor() as usize;
        if bin >= steps {
            // Sorted input: everything after this is out of range too.
            break;
        }
        raster.bits[bin * channels + c] = 1;
    }
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(time_us: u64, channel: u32) -> Event {
        Event { time_us, channel }
    }

    #[test]
    fn single_event_lands_in_floor_bin() {
        let s = EventStream::new(4, vec![ev(20_000, 3)]).unwrap();
        let r = bin_events(&s, 14.0, 4).unwrap();
        for t in 0..4 {
            for c in 0..4 {
                assert_eq!(r.get(t, c), t == 1 && c == 3);
            }
        }
    }

    #[test]
    fn empty_stream_gives_zero_raster() {
        let s = EventStream::empty(2).unwrap();
        let r = bin_events(&s, 14.0, 5).unwrap();
        assert_eq!((r.steps(), r.channels()), (5, 2));
        assert_eq!(r.spike_count(), 0);
    }

    #[test]
    fn late_events_are_truncated_and_duplicates_clamp() {
        let s = EventStream::new(1, vec![ev(0, 0), ev(5, 0), ev(14_000 * 3, 0)]).unwrap();
        let r = bin_events(&s, 14.0, 3).unwrap();
        assert_eq!(r.spike_count(), 1);
        assert!(r.get(0, 0));
    }

    #[test]
    fn rejects_bad_streams() {
        assert!(matches!(
            EventStream::new(2, vec![ev(0, 2)]),
            Err(SnnError::MalformedInput(_))
        ));
        assert!(EventStream::new(2, vec![ev(10, 0), ev(5, 1)]).is_err());
        let s = EventStream::empty(1).unwrap();
        assert!(bin_events(&s, 0.0, 3).is_err());
        assert!(bin_events(&s, 14.0, 0).is_err());
    }

    #[test]
    fn matches_scalar_binning_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut events: Vec<Event> = (0..1000)
            .map(|_| ev(rng.random_range(0..800_000), rng.random_range(0..10)))
            .collect();
        events.sort();
        let s = EventStream::new(10, events.clone()).unwrap();
        let r = bin_events(&s, 14.0, 50).unwrap();

        let mut oracle = [[false; 10]; 50];
        for e in &events {
            let t = e.time_us / 14_000;
            if t < 50 {
                oracle[t as usize][e.channel as usize] = true;
            }
        }
        for (t, row) in oracle.iter().enumerate() {
            for (c, &bit) in row.iter().enumerate() {
                assert_eq!(r.get(t, c), bit, "bin ({t},{c})");
            }
        }
    }

    proptest! {
        #[test]
        fn rebinning_is_idempotent(
            raw in prop::collection::vec((0u64..400_000, 0u32..6), 0..200),
            dt in prop::sample::select(vec![1.0, 7.5, 14.0, 20.0]),
        ) {
            let mut events: Vec<Event> = raw.into_iter().map(|(t, c)| ev(t, c)).collect();
            events.sort();
            let s = EventStream::new(6, events).unwrap();
            let r = bin_events(&s, dt, 30).unwrap();
            prop_assert!(r.spike_count() <= s.len());
            let again = bin_events(&r.to_event_stream().unwrap(), dt, 30).unwrap();
            prop_assert_eq!(r, again);
        }
    }
}
