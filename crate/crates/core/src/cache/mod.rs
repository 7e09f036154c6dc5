//! Persistent schedule decisions keyed by (device, graph structure, F, op).
//!
//! On disk the cache is a text file with one tab-separated record per line,
//! written in key order so that storing an unchanged cache reproduces the
//! file byte for byte. Lines starting with `#` are comments. Field order:
//!
//! ```text
//! schema_version  device_sig  graph_sig(hex)  F  op
//! mapping  f_tile  rows_per_chunk  vectorized(0/1)  hub_threshold
//! t_b_ms  t_star_ms  alpha  timestamp(unix s)  toolchain
//! ```

mod sig;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

pub use sig::graph_sig;

use crate::kernels::{KernelVariant, Mapping, Op};

pub const SCHEMA_VERSION: u32 = 1;
const FIELDS: usize = 15;
const HEADER: &str = "# autosage schedule cache\n# schema_version\tdevice_sig\tgraph_sig\tF\top\tmapping\tf_tile\trows_per_chunk\tvectorized\thub_threshold\tt_b_ms\tt_star_ms\talpha\ttimestamp\ttoolchain\n";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScheduleKey {
    pub device_sig: String,
    pub graph_sig: u64,
    pub f: usize,
    pub op: Op,
}

impl std::fmt::Display for ScheduleKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {:016x}, F={}, {})",
            self.device_sig, self.graph_sig, self.f, self.op
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub key: ScheduleKey,
    pub choice: KernelVariant,
    pub t_b: f64,
    pub t_star: f64,
    pub alpha: f64,
    pub timestamp: u64,
    pub schema_version: u32,
    pub toolchain: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt cache record at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("unknown cache schema version {version} at line {line}")]
    Schema { line: usize, version: String },
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl CacheRecord {
    pub fn new(key: ScheduleKey, choice: KernelVariant, t_b: f64, t_star: f64, alpha: f64) -> Self {
        Self {
            key,
            choice,
            t_b,
            t_star,
            alpha,
            timestamp: unix_now(),
            schema_version: SCHEMA_VERSION,
            toolchain: toolchain_note(),
        }
    }

    pub fn to_line(&self) -> String {
        let c = &self.choice;
        format!(
            "{}\t{}\t{:016x}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.schema_version,
            clean(&self.key.device_sig),
            self.key.graph_sig,
            self.key.f,
            self.key.op,
            c.mapping.as_str(),
            c.f_tile,
            c.rows_per_chunk,
            c.vectorized as u8,
            c.hub_threshold,
            self.t_b,
            self.t_star,
            self.alpha,
            self.timestamp,
            clean(&self.toolchain),
        )
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<Self, CacheError> {
        let corrupt = |reason: String| CacheError::Corrupt {
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] != SCHEMA_VERSION.to_string() {
            return Err(CacheError::Schema {
                line: lineno,
                version: fields[0].to_owned(),
            });
        }
        if fields.len() != FIELDS {
            return Err(corrupt(format!(
                "expected {FIELDS} fields, found {}",
                fields.len()
            )));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str, lineno: usize) -> Result<T, CacheError> {
            s.parse().map_err(|_| CacheError::Corrupt {
                line: lineno,
                reason: format!("bad {name} `{s}`"),
            })
        }
        let graph_sig = u64::from_str_radix(fields[2], 16)
            .map_err(|_| corrupt(format!("bad graph_sig `{}`", fields[2])))?;
        let op: Op = fields[4]
            .parse()
            .map_err(|e: crate::kernels::VariantParseError| corrupt(e.to_string()))?;
        let mapping = match fields[5] {
            "baseline" => Mapping::Baseline,
            "rowparallel" => Mapping::RowParallel,
            "hubsplit" => Mapping::HubSplit,
            other => return Err(corrupt(format!("bad mapping `{other}`"))),
        };
        let vectorized = match fields[8] {
            "0" => false,
            "1" => true,
            other => return Err(corrupt(format!("bad vectorized flag `{other}`"))),
        };
        let choice = if mapping == Mapping::Baseline {
            KernelVariant::baseline(op)
        } else {
            let v = KernelVariant {
                op,
                mapping,
                f_tile: num(fields[6], "f_tile", lineno)?,
                rows_per_chunk: num(fields[7], "rows_per_chunk", lineno)?,
                vectorized,
                hub_threshold: num(fields[9], "hub_threshold", lineno)?,
            };
            v.check().map_err(corrupt)?;
            v
        };
        Ok(Self {
            key: ScheduleKey {
                device_sig: fields[1].to_owned(),
                graph_sig,
                f: num(fields[3], "F", lineno)?,
                op,
            },
            choice,
            t_b: num(fields[10], "t_b", lineno)?,
            t_star: num(fields[11], "t_star", lineno)?,
            alpha: num(fields[12], "alpha", lineno)?,
            timestamp: num(fields[13], "timestamp", lineno)?,
            schema_version: SCHEMA_VERSION,
            toolchain: fields[14].to_owned(),
        })
    }
}

/// Artifact version and build target of the kernels.
pub fn toolchain_note() -> String {
    format!(
        "{} {}-{}",
        crate::ARTIFACT_VERSION,
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// In-memory decision cache, optionally bound to a file.
#[derive(Debug, Default)]
pub struct ScheduleCache {
    records: RwLock<BTreeMap<ScheduleKey, CacheRecord>>,
    path: Option<PathBuf>,
    file_lock: Mutex<()>,
}

impl ScheduleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cache persisted at `path`, loaded now if the file exists.
    pub fn persistent(path: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let path = path.into();
        let cache = Self {
            path: Some(path.clone()),
            ..Self::default()
        };
        if path.exists() {
            cache.load(&path)?;
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &ScheduleKey) -> Option<CacheRecord> {
        self.records.read().unwrap().get(key).cloned()
    }

    pub fn put(&self, record: CacheRecord) {
        self.records
            .write()
            .unwrap()
            .insert(record.key.clone(), record);
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records in key order.
    pub fn records(&self) -> Vec<CacheRecord> {
        self.records.read().unwrap().values().cloned().collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        for r in self.records.read().unwrap().values() {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    /// Parse a cache file body. Fails on the first bad line.
    pub fn parse_text(text: &str) -> Result<BTreeMap<ScheduleKey, CacheRecord>, CacheError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let r = CacheRecord::parse_line(line, i + 1)?;
            map.insert(r.key.clone(), r);
        }
        Ok(map)
    }

    /// Replace the in-memory contents with the records in `path`.
    pub fn load(&self, path: impl AsRef<Path>) -> Result<(), CacheError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CacheError::Io {
            path: path.into(),
            source,
        })?;
        let map = Self::parse_text(&text)?;
        *self.records.write().unwrap() = map;
        Ok(())
    }

    /// Write every record to `path` (via a temporary file and rename).
    pub fn store(&self, path: impl AsRef<Path>) -> Result<(), CacheError> {
        let path = path.as_ref();
        let _guard = self.file_lock.lock().unwrap();
        let text = self.to_text();
        let io_err = |source| CacheError::Io {
            path: path.into(),
            source,
        };
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(text.as_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    }

    /// Store to the bound path, if any.
    pub fn flush(&self) -> Result<(), CacheError> {
        match &self.path {
            Some(p) => self.store(p),
            None => Ok(()),
        }
    }
}

/// Whether decisions may be probed or must come from the cache.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReplayPolicy {
    #[default]
    Probe,
    /// Never probe. A miss falls back to the baseline with a warning, or is
    /// an error when `strict`.
    ReplayOnly { strict: bool },
}

pub fn replay_mode(strict: bool) -> ReplayPolicy {
    ReplayPolicy::ReplayOnly { strict }
}

impl ReplayPolicy {
    pub fn from_env() -> Result<Self, crate::env::EnvError> {
        use crate::env;
        if env::flag(env::REPLAY_ONLY)?.unwrap_or(false) {
            Ok(replay_mode(env::flag(env::REPLAY_STRICT)?.unwrap_or(false)))
        } else {
            Ok(ReplayPolicy::Probe)
        }
    }

    pub fn is_replay(&self) -> bool {
        matches!(self, ReplayPolicy::ReplayOnly { .. })
    }
}
