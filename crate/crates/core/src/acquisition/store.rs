//! Append-only sample store.
//!
//! The file is plain text: `# key=value` metadata lines, the column header
//! `t_ms,active_w,reactive_var,voltage_v,current_a,energy_wh`, then one record
//! per line. Gap markers read `GAP,t_start_ms,t_end_ms` and cover the
//! half-open interval of sample instants that were never acquired.
//!
//! Records are flushed one at a time, so a reader of a live or crashed store
//! sees a prefix; an unterminated last line is treated as a torn write and
//! dropped.

use crate::series::{Millis, PowerSample, PowerSeries};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CODEC_VERSION: &str = "1";
pub const COLUMNS: &str = "t_ms,active_w,reactive_var,voltage_v,current_a,energy_wh";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt record at byte {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("timestamp {t_ms} does not advance past {last_ms}")]
    NonIncreasing { t_ms: Millis, last_ms: Millis },
    #[error("invalid gap [{start_ms}, {end_ms})")]
    BadGap { start_ms: Millis, end_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoreEntry {
    Sample(PowerSample),
    /// Sample instants in `[start_ms, end_ms)` were lost.
    Gap {
        start_ms: Millis,
        end_ms: Millis,
    },
}

impl StoreEntry {
    fn overlaps(&self, from: Millis, to: Millis) -> bool {
        match *self {
            StoreEntry::Sample(s) => from <= s.t_ms && s.t_ms < to,
            StoreEntry::Gap { start_ms, end_ms } => start_ms < to && from < end_ms,
        }
    }
}

/// Run metadata written as the `# key=value` header, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreMeta {
    pub entries: Vec<(String, String)>,
}

impl StoreMeta {
    pub fn new() -> Self {
        Self::default().with("codec_version", CODEC_VERSION)
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Single writer of a store file.
pub struct StoreWriter {
    out: BufWriter<File>,
    path: PathBuf,
    last_t: Option<Millis>,
    samples: usize,
    gaps: usize,
}

impl StoreWriter {
    pub fn create(path: impl AsRef<Path>, meta: &StoreMeta) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(io_err)?;
        let mut out = BufWriter::new(file);
        let mut header = String::new();
        for (k, v) in &meta.entries {
            header.push_str(&format!("# {}={}\n", k.trim(), v.replace('\n', " ")));
        }
        header.push_str(COLUMNS);
        header.push('\n');
        out.write_all(header.as_bytes())
            .and_then(|_| out.flush())
            .map_err(io_err)?;
        Ok(Self {
            out,
            path,
            last_t: None,
            samples: 0,
            gaps: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn samples_written(&self) -> usize {
        self.samples
    }

    pub fn gaps_written(&self) -> usize {
        self.gaps
    }

    pub fn last_t_ms(&self) -> Option<Millis> {
        self.last_t
    }

    pub fn append_sample(&mut self, s: &PowerSample) -> Result<(), StoreError> {
        if let Some(last) = self.last_t {
            if s.t_ms <= last {
                return Err(StoreError::NonIncreasing {
                    t_ms: s.t_ms,
                    last_ms: last,
                });
            }
        }
        let line = format!(
            "{},{},{},{},{},{}\n",
            s.t_ms, s.active_w, s.reactive_var, s.voltage_v, s.current_a, s.energy_wh
        );
        self.write_line(&line)?;
        self.last_t = Some(s.t_ms);
        self.samples += 1;
        Ok(())
    }

    pub fn append_gap(&mut self, start_ms: Millis, end_ms: Millis) -> Result<(), StoreError> {
        let after_last = self.last_t.is_none_or(|last| start_ms > last);
        if start_ms >= end_ms || !after_last {
            return Err(StoreError::BadGap { start_ms, end_ms });
        }
        self.write_line(&format!("GAP,{start_ms},{end_ms}\n"))?;
        // a later sample may sit exactly at end_ms
        self.last_t = Some(end_ms - 1);
        self.gaps += 1;
        Ok(())
    }

    fn write_line(&mut self, line: &str) -> Result<(), StoreError> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// A fully parsed store.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSeries {
    pub meta: StoreMeta,
    pub entries: Vec<StoreEntry>,
    /// Bytes of an unterminated final line that were discarded.
    pub torn_tail_bytes: usize,
}

impl StoredSeries {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| StoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, StoreError> {
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let torn_tail_bytes = bytes.len() - complete;
        let mut meta = StoreMeta::default();
        let mut entries = Vec::new();
        let mut seen_columns = false;
        let mut last_t: Option<Millis> = None;
        let mut offset = 0u64;

        for raw in bytes[..complete].split_inclusive(|&b| b == b'\n') {
            let line_offset = offset;
            offset += raw.len() as u64;
            let corrupt = |reason: String| StoreError::Corrupt {
                offset: line_offset,
                reason,
            };
            let line = std::str::from_utf8(raw)
                .map_err(|_| corrupt("not utf-8".into()))?
                .trim_end_matches(['\n', '\r']);
            if !seen_columns {
                if let Some(kv) = line.strip_prefix('#') {
                    let (k, v) = kv
                        .trim()
                        .split_once('=')
                        .ok_or_else(|| corrupt("metadata without `=`".into()))?;
                    meta.entries
                        .push((k.trim().to_string(), v.trim().to_string()));
                    continue;
                }
                if line != COLUMNS {
                    return Err(corrupt(format!("expected column header `{COLUMNS}`")));
                }
                seen_columns = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let int = |s: &str| {
                s.parse::<Millis>()
                    .map_err(|_| corrupt(format!("bad integer `{s}`")))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| corrupt(format!("bad number `{s}`")))
            };
            let entry = if fields[0] == "GAP" {
                if fields.len() != 3 {
                    return Err(corrupt("gap marker needs 3 fields".into()));
                }
                let (start_ms, end_ms) = (int(fields[1])?, int(fields[2])?);
                if start_ms >= end_ms || last_t.is_some_and(|l| start_ms <= l) {
                    return Err(corrupt(format!("gap [{start_ms}, {end_ms}) out of order")));
                }
                last_t = Some(end_ms - 1);
                StoreEntry::Gap { start_ms, end_ms }
            } else {
                if fields.len() != 6 {
                    return Err(corrupt(format!(
                        "expected 6 fields, found {}",
                        fields.len()
                    )));
                }
                let t_ms = int(fields[0])?;
                if last_t.is_some_and(|l| t_ms <= l) {
                    return Err(corrupt(format!("timestamp {t_ms} is not increasing")));
                }
                last_t = Some(t_ms);
                StoreEntry::Sample(PowerSample {
                    t_ms,
                    active_w: num(fields[1])?,
                    reactive_var: num(fields[2])?,
                    voltage_v: num(fields[3])?,
                    current_a: num(fields[4])?,
                    energy_wh: num(fields[5])?,
                })
            };
            entries.push(entry);
        }
        if !seen_columns && complete > 0 {
            return Err(StoreError::Corrupt {
                offset,
                reason: "missing column header".into(),
            });
        }
        Ok(Self {
            meta,
            entries,
            torn_tail_bytes,
        })
    }

    /// Entries touching `[from, to)`; gaps straddling a bound are included.
    pub fn range(&self, from: Millis, to: Millis) -> Vec<StoreEntry> {
        self.entries
            .iter()
            .filter(|e| e.overlaps(from, to))
            .copied()
            .collect()
    }

    pub fn samples(&self) -> impl Iterator<Item = &PowerSample> {
        self.entries.iter().filter_map(|e| match e {
            StoreEntry::Sample(s) => Some(s),
            StoreEntry::Gap { .. } => None,
        })
    }

    pub fn gaps(&self) -> impl Iterator<Item = (Millis, Millis)> + '_ {
        self.entries.iter().filter_map(|e| match *e {
            StoreEntry::Gap { start_ms, end_ms } => Some((start_ms, end_ms)),
            StoreEntry::Sample(_) => None,
        })
    }

    pub fn power_series(&self) -> PowerSeries {
        let samples: Vec<PowerSample> = self.samples().copied().collect();
        PowerSeries::from_samples(&samples)
    }
}

/// Reads the entries of the store at `path` touching `[from, to)`.
pub fn read_series(
    path: impl AsRef<Path>,
    from: Millis,
    to: Millis,
) -> Result<Vec<StoreEntry>, StoreError> {
    Ok(StoredSeries::open(path)?.range(from, to))
}
