use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use autosage::cache::unix_now;
use autosage::kernels::{KernelError, KernelResult};
use autosage::scheduler::{lower_median, DeviceProfile, ProbeConfig, ScheduleDecision};
use serde::Serialize;

use crate::CliError;

pub fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

/// `baseline / chosen` computed from the printed (3-decimal) values, so the
/// CSV is self-consistent.
pub fn speedup(baseline_ms: f64, chosen_ms: f64) -> String {
    let round = |x: f64| (x * 1e3).round() / 1e3;
    let (b, c) = (round(baseline_ms), round(chosen_ms));
    if c > 0.0 {
        fmt3(b / c)
    } else {
        fmt3(baseline_ms / chosen_ms)
    }
}

/// Median of `iters` timed calls after `warmup` untimed ones.
pub fn median_ms(
    iters: usize,
    warmup: usize,
    mut run: impl FnMut() -> Result<KernelResult, KernelError>,
) -> Result<f64, KernelError> {
    for _ in 0..warmup {
        run()?;
    }
    let samples = (0..iters.max(1))
        .map(|_| run().map(|r| r.elapsed_ms))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(lower_median(&samples))
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            text: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.text)?;
        Ok(())
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

#[derive(Serialize)]
pub struct DeviceMeta {
    pub device_sig: String,
    pub bw_eff_bytes_per_s: f64,
    pub flops_eff_per_s: f64,
    pub cores: usize,
}

impl From<&DeviceProfile> for DeviceMeta {
    fn from(d: &DeviceProfile) -> Self {
        Self {
            device_sig: d.device_sig.clone(),
            bw_eff_bytes_per_s: d.bw_eff,
            flops_eff_per_s: d.flops_eff,
            cores: d.cores,
        }
    }
}

#[derive(Serialize)]
pub struct CfgMeta {
    pub frac: f64,
    pub min_rows: usize,
    pub probe_iters: usize,
    pub cap_ms: f64,
    pub top_k: usize,
    pub alpha: f64,
    pub cache: Option<String>,
    pub replay_only: bool,
    pub replay_strict: bool,
    pub forced: Option<String>,
}

#[derive(Serialize)]
pub struct TimingMeta {
    pub iters: usize,
    pub warmup: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct DecisionMeta {
    pub f: usize,
    pub op: String,
    pub choice: String,
    pub source: String,
    pub t_b_ms: Option<f64>,
    pub t_star_ms: Option<f64>,
    pub alpha: Option<f64>,
}

impl From<&ScheduleDecision> for DecisionMeta {
    fn from(d: &ScheduleDecision) -> Self {
        Self {
            f: d.key.f,
            op: d.key.op.to_string(),
            choice: d.choice.to_string(),
            source: d.source.to_string(),
            t_b_ms: d.record.as_ref().map(|r| r.t_b),
            t_star_ms: d.record.as_ref().map(|r| r.t_star),
            alpha: d.record.as_ref().map(|r| r.alpha),
        }
    }
}

/// The `.meta.json` document written next to every CSV.
#[derive(Serialize)]
pub struct Sidecar {
    pub artifact_version: &'static str,
    pub command: String,
    pub dataset: String,
    pub timestamp: u64,
    pub device: DeviceMeta,
    pub env: BTreeMap<String, String>,
    pub cfg: Option<CfgMeta>,
    pub timing: TimingMeta,
    pub decisions: Vec<DecisionMeta>,
}

impl Sidecar {
    pub fn new(command: &str, dataset: &str, device: &DeviceProfile, timing: TimingMeta) -> Self {
        Self {
            artifact_version: autosage::ARTIFACT_VERSION,
            command: command.to_owned(),
            dataset: dataset.to_owned(),
            timestamp: unix_now(),
            device: device.into(),
            env: autosage::env::snapshot(),
            cfg: None,
            timing,
            decisions: Vec::new(),
        }
    }

    pub fn with_cfg(
        mut self,
        cfg: &ProbeConfig,
        replay: (bool, bool),
        cache: Option<&Path>,
        forced: Option<&str>,
    ) -> Self {
        self.cfg = Some(CfgMeta {
            frac: cfg.frac,
            min_rows: cfg.min_rows,
            probe_iters: cfg.iters,
            cap_ms: cfg.cap_ms,
            top_k: cfg.top_k,
            alpha: cfg.alpha,
            cache: cache.map(|p| p.display().to_string()),
            replay_only: replay.0,
            replay_strict: replay.1,
            forced: forced.map(str::to_owned),
        });
        self
    }

    /// Write the sidecar for `csv`.
    pub fn write(&self, csv: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(sidecar_path(csv), text + "\n")?;
        Ok(())
    }
}
