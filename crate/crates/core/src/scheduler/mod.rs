//! Per-input kernel selection.
//!
//! For an uncached (device, graph, F, op) key the scheduler extracts degree
//! features, ranks the variant grid with a cost estimate, times the baseline
//! and the `top_k` cheapest candidates on a degree-stratified row sample,
//! and keeps the fastest candidate only if `t_star <= alpha * t_b`.
//! Otherwise the baseline runs. Decisions go to the [`ScheduleCache`].
//!
//! Probe timings assume an otherwise idle machine; probing holds an
//! exclusive lock so at most one probe runs per scheduler.

mod config;
mod cost;
mod device;
mod timing;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

pub use config::ProbeConfig;
pub use cost::{
    estimate_cost, imbalance, shortlist, traffic, variant_grid, F_TILES, ROWS_PER_CHUNK,
};
pub use device::{host_signature, DeviceProfile};
pub use timing::{lower_median, time_kernel, KernelTiming, ProbeClock, ScriptedClock, WallClock};

use crate::cache::{graph_sig, CacheError, CacheRecord, ReplayPolicy, ScheduleCache, ScheduleKey};
use crate::csr::{extract_features, induced_row_sample, DenseMatrix};
use crate::env::{self, EnvError};
use crate::kernels::{
    dispatch, vec4_eligible, KernelError, KernelOverrides, KernelResult, KernelVariant, Operands,
    DEFAULT_HUB_THRESHOLD,
};

/// The acceptance rule. Exact comparison; a tie accepts the candidate.
pub fn guardrail(t_b: f64, t_star: f64, alpha: f64) -> bool {
    t_star <= alpha * t_b
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTiming {
    pub timing: KernelTiming,
    pub estimate_ms: f64,
}

/// What a probe measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub baseline: KernelTiming,
    /// Timed candidates in shortlist order.
    pub candidates: Vec<CandidateTiming>,
    /// Candidate with the smallest median (first in shortlist order on ties).
    pub best: KernelVariant,
    pub t_b: f64,
    pub t_star: f64,
    pub alpha: f64,
    pub sample_rows: usize,
    /// Wall time spent in warm-ups and timed runs.
    pub probe_wall_ms: f64,
    /// Same quantity as seen by the probe clock.
    pub probe_clock_ms: f64,
    pub launches: u64,
}

impl ProbeReport {
    pub fn accepted(&self) -> bool {
        guardrail(self.t_b, self.t_star, self.alpha)
    }

    /// Probe median of whatever the guardrail selected.
    pub fn chosen_ms(&self) -> f64 {
        if self.accepted() {
            self.t_star
        } else {
            self.t_b
        }
    }

    /// Slowest single run of any target, warm-ups included.
    pub fn slowest_run_ms(&self) -> f64 {
        self.candidates
            .iter()
            .map(|c| c.timing.slowest_run_ms)
            .fold(self.baseline.slowest_run_ms, f64::max)
    }

    pub fn targets(&self) -> usize {
        self.candidates.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSource {
    Probed,
    Cached,
    Replayed,
    ForcedEnv,
    /// Replay mode without a record: the baseline runs.
    ReplayMiss,
}

impl DecisionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionSource::Probed => "probed",
            DecisionSource::Cached => "cached",
            DecisionSource::Replayed => "replayed",
            DecisionSource::ForcedEnv => "forced-env",
            DecisionSource::ReplayMiss => "replay-miss",
        }
    }
}

impl std::fmt::Display for DecisionSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    pub key: ScheduleKey,
    pub choice: KernelVariant,
    pub source: DecisionSource,
    /// Present when this call probed.
    pub report: Option<ProbeReport>,
    /// The stored record, for probed, cached and replayed decisions.
    pub record: Option<CacheRecord>,
}

impl ScheduleDecision {
    /// `autosage` for a tuned variant, `baseline` otherwise.
    pub fn label(&self) -> &'static str {
        if self.choice.is_baseline() {
            "baseline"
        } else {
            "autosage"
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("replay-only cache miss for {0}")]
    ReplayMiss(ScheduleKey),
    #[error("invalid probe configuration: {0}")]
    Config(String),
}

pub struct Scheduler {
    cfg: ProbeConfig,
    device: DeviceProfile,
    cache: Arc<ScheduleCache>,
    replay: ReplayPolicy,
    overrides: KernelOverrides,
    forced: Option<String>,
    clock: Arc<dyn ProbeClock>,
    launches: AtomicU64,
    probing: Mutex<()>,
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("cfg", &self.cfg)
            .field("device", &self.device)
            .field("replay", &self.replay)
            .field("overrides", &self.overrides)
            .field("forced", &self.forced)
            .field("launches", &self.launches)
            .finish_non_exhaustive()
    }
}

impl Scheduler {
    /// Scheduler with an in-memory cache and a wall clock.
    pub fn new(cfg: ProbeConfig, device: DeviceProfile) -> Result<Self, ScheduleError> {
        cfg.validate().map_err(ScheduleError::Config)?;
        Ok(Self {
            cfg,
            device,
            cache: Arc::new(ScheduleCache::new()),
            replay: ReplayPolicy::Probe,
            overrides: KernelOverrides::default(),
            forced: None,
            clock: Arc::new(WallClock),
            launches: AtomicU64::new(0),
            probing: Mutex::new(()),
        })
    }

    /// Configuration, cache, replay policy, overrides and forced choice all
    /// taken from `AUTOSAGE_*`; the device is calibrated once per process.
    pub fn from_env() -> Result<Self, ScheduleError> {
        let cache = match env::raw(env::CACHE) {
            Some(path) => ScheduleCache::persistent(path)?,
            None => ScheduleCache::new(),
        };
        Ok(
            Self::new(ProbeConfig::from_env()?, DeviceProfile::detect())?
                .with_cache(Arc::new(cache))
                .with_replay(ReplayPolicy::from_env()?)
                .with_overrides(KernelOverrides::from_env()?)
                .with_forced(env::raw(env::FORCE)),
        )
    }

    pub fn with_cache(mut self, cache: Arc<ScheduleCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn ProbeClock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_replay(mut self, replay: ReplayPolicy) -> Self {
        self.replay = replay;
        self
    }

    pub fn with_overrides(mut self, overrides: KernelOverrides) -> Self {
        self.overrides = overrides;
        self
    }

    /// Choice string (e.g. `hubsplit:ft=64:rpc=4:vec=1:hubt=256`) that
    /// bypasses probing for both ops.
    pub fn with_forced(mut self, forced: Option<String>) -> Self {
        self.forced = forced;
        self
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.cfg
    }

    pub fn device(&self) -> &DeviceProfile {
        &self.device
    }

    pub fn cache(&self) -> &Arc<ScheduleCache> {
        &self.cache
    }

    pub fn replay(&self) -> ReplayPolicy {
        self.replay
    }

    /// Kernel calls made by probes since construction.
    pub fn probe_launches(&self) -> u64 {
        self.launches.load(Ordering::Relaxed)
    }

    pub fn key_for(&self, operands: &Operands<'_>) -> ScheduleKey {
        ScheduleKey {
            device_sig: self.device.device_sig.clone(),
            graph_sig: graph_sig(operands.sparse()),
            f: operands.width(),
            op: operands.op(),
        }
    }

    /// Pick a variant for `operands`.
    pub fn decide(&self, operands: Operands<'_>) -> Result<ScheduleDecision, ScheduleError> {
        operands.check()?;
        let key = self.key_for(&operands);
        if let Some(s) = &self.forced {
            let choice = KernelVariant::parse_choice(key.op, s).map_err(|e| EnvError {
                var: env::FORCE,
                value: s.clone(),
                reason: e.to_string(),
            })?;
            choice.check().map_err(KernelError::Variant)?;
            return Ok(ScheduleDecision {
                key,
                choice,
                source: DecisionSource::ForcedEnv,
                report: None,
                record: None,
            });
        }
        if let ReplayPolicy::ReplayOnly { strict } = self.replay {
            return match self.cache.get(&key) {
                Some(r) => Ok(Self::from_record(r, DecisionSource::Replayed)),
                None if strict => Err(ScheduleError::ReplayMiss(key)),
                None => {
                    log::warn!("no cached decision for {key} in replay mode; running the baseline");
                    let choice = KernelVariant::baseline(key.op);
                    Ok(ScheduleDecision {
                        key,
                        choice,
                        source: DecisionSource::ReplayMiss,
                        report: None,
                        record: None,
                    })
                }
            };
        }
        if let Some(r) = self.cache.get(&key) {
            return Ok(Self::from_record(r, DecisionSource::Cached));
        }
        let _guard = self.probing.lock().unwrap();
        if let Some(r) = self.cache.get(&key) {
            return Ok(Self::from_record(r, DecisionSource::Cached));
        }
        let report = self.probe(operands)?;
        let choice = if report.accepted() {
            report.best
        } else {
            KernelVariant::baseline(key.op)
        };
        log::info!(
            "{key}: t_b={:.4} ms, t*={:.4} ms ({}), alpha={} -> {}",
            report.t_b,
            report.t_star,
            report.best,
            report.alpha,
            choice
        );
        let record = CacheRecord::new(key.clone(), choice, report.t_b, report.t_star, report.alpha);
        self.cache.put(record.clone());
        self.cache.flush()?;
        Ok(ScheduleDecision {
            key,
            choice,
            source: DecisionSource::Probed,
            report: Some(report),
            record: Some(record),
        })
    }

    fn from_record(r: CacheRecord, source: DecisionSource) -> ScheduleDecision {
        ScheduleDecision {
            key: r.key.clone(),
            choice: r.choice,
            source,
            report: None,
            record: Some(r),
        }
    }

    /// Time the baseline and the shortlisted candidates on a row sample.
    /// Does not consult or update the cache.
    pub fn probe(&self, operands: Operands<'_>) -> Result<ProbeReport, ScheduleError> {
        operands.check()?;
        let op = operands.op();
        let m = operands.sparse();
        let f = operands.width();
        let hub_threshold = self
            .overrides
            .hub_threshold
            .unwrap_or(DEFAULT_HUB_THRESHOLD);
        let gf = extract_features(m, hub_threshold);
        let eligible = vec4_eligible(f, &operands.alignments());

        let mut candidates: Vec<(KernelVariant, f64)> = Vec::with_capacity(self.cfg.top_k);
        for (v, est) in shortlist(&gf, f, op, &self.device, eligible, hub_threshold) {
            let v = self.overrides.apply(v);
            if candidates.len() == self.cfg.top_k {
                break;
            }
            if !candidates.iter().any(|(c, _)| *c == v) {
                candidates.push((v, est));
            }
        }

        let sample = induced_row_sample(m, self.cfg.frac, self.cfg.min_rows);
        let gathered;
        let sample_ops = match operands {
            Operands::SpMM { b, .. } => Operands::SpMM {
                a: &sample.matrix,
                b,
            },
            Operands::SDDMM { x, y, .. } => {
                gathered = x.gather_rows(&sample.rows);
                Operands::SDDMM {
                    pattern: &sample.matrix,
                    x: &gathered,
                    y,
                }
            }
        };

        let start_launches = self.probe_launches();
        let start = Instant::now();
        let baseline = self.time_target(&KernelVariant::baseline(op), sample_ops)?;
        let mut timed = Vec::with_capacity(candidates.len());
        for (v, estimate_ms) in candidates {
            timed.push(CandidateTiming {
                timing: self.time_target(&v, sample_ops)?,
                estimate_ms,
            });
        }
        let probe_wall_ms = start.elapsed().as_secs_f64() * 1e3;

        let best = timed
            .iter()
            .min_by(|a, b| a.timing.median_ms.total_cmp(&b.timing.median_ms))
            .map(|c| (c.timing.variant, c.timing.median_ms));
        let (best, t_star) = best.unwrap_or((baseline.variant, baseline.median_ms));
        let probe_clock_ms = std::iter::once(&baseline)
            .chain(timed.iter().map(|c| &c.timing))
            .map(|t| t.warmup_ms + t.timed_total_ms)
            .sum();
        Ok(ProbeReport {
            t_b: baseline.median_ms,
            baseline,
            candidates: timed,
            best,
            t_star,
            alpha: self.cfg.alpha,
            sample_rows: sample.rows.len(),
            probe_wall_ms,
            probe_clock_ms,
            launches: self.probe_launches() - start_launches,
        })
    }

    fn time_target(
        &self,
        v: &KernelVariant,
        ops: Operands<'_>,
    ) -> Result<KernelTiming, KernelError> {
        let mut run = || {
            self.launches.fetch_add(1, Ordering::Relaxed);
            dispatch(v, ops).map(drop)
        };
        time_kernel(
            self.clock.as_ref(),
            v,
            self.cfg.iters,
            self.cfg.cap_ms,
            &mut run,
        )
    }

    /// Decide, then run the chosen variant on the full operands.
    pub fn run(
        &self,
        operands: Operands<'_>,
    ) -> Result<(ScheduleDecision, KernelResult), ScheduleError> {
        let decision = self.decide(operands)?;
        let result = dispatch(&decision.choice, operands)?;
        Ok((decision, result))
    }

    pub fn spmm_auto(
        &self,
        a: &crate::CsrMatrix,
        b: &DenseMatrix,
    ) -> Result<DenseMatrix, ScheduleError> {
        let (_, r) = self.run(Operands::SpMM { a, b })?;
        Ok(r.output.into_dense().expect("spmm yields a dense matrix"))
    }

    pub fn sddmm_auto(
        &self,
        pattern: &crate::CsrMatrix,
        x: &DenseMatrix,
        y: &DenseMatrix,
    ) -> Result<Vec<f32>, ScheduleError> {
        let (_, r) = self.run(Operands::SDDMM { pattern, x, y })?;
        Ok(r.output.into_values().expect("sddmm yields values"))
    }
}
