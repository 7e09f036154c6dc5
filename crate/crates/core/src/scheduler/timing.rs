//! Capped median timing of probe kernels, with an injectable clock.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use crate::kernels::{KernelError, KernelVariant};

/// Source of probe timings. `measure` runs the kernel once and reports the
/// elapsed milliseconds. `warmup` runs it outside the median and the cap,
/// reporting its duration only for budget accounting.
pub trait ProbeClock: Send + Sync {
    fn warmup(
        &self,
        target: &KernelVariant,
        run: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError>;

    fn measure(
        &self,
        target: &KernelVariant,
        run: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError>;
}

/// Monotonic wall clock around synchronous kernel calls.
#[derive(Debug, Default, Clone, Copy)]
pub struct WallClock;

/// Smallest reportable duration, so medians stay strictly positive.
const MIN_MS: f64 = 1e-6;

impl ProbeClock for WallClock {
    fn warmup(
        &self,
        target: &KernelVariant,
        run: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError> {
        self.measure(target, run)
    }

    fn measure(
        &self,
        _: &KernelVariant,
        run: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError> {
        let t = Instant::now();
        run()?;
        Ok((t.elapsed().as_secs_f64() * 1e3).max(MIN_MS))
    }
}

/// Deterministic fake clock: never runs kernels, returns
/// `script(variant, n)` for the `n`-th timed call on `variant`.
pub struct ScriptedClock<F> {
    script: F,
    calls: Mutex<HashMap<KernelVariant, usize>>,
}

impl<F: Fn(&KernelVariant, usize) -> f64 + Send + Sync> ScriptedClock<F> {
    pub fn new(script: F) -> Self {
        Self {
            script,
            calls: Mutex::new(HashMap::new()),
        }
    }
}

impl<F: Fn(&KernelVariant, usize) -> f64 + Send + Sync> ProbeClock for ScriptedClock<F> {
    fn warmup(
        &self,
        _: &KernelVariant,
        _: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError> {
        Ok(0.0)
    }

    fn measure(
        &self,
        target: &KernelVariant,
        _: &mut dyn FnMut() -> Result<(), KernelError>,
    ) -> Result<f64, KernelError> {
        let mut calls = self.calls.lock().unwrap();
        let n = calls.entry(*target).or_insert(0);
        let t = (self.script)(target, *n);
        *n += 1;
        Ok(t)
    }
}

/// Result of timing one target.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTiming {
    pub variant: KernelVariant,
    pub median_ms: f64,
    /// Timed runs completed (the warm-up is not counted).
    pub completed: usize,
    /// Stopped before `iters` because the cap was exceeded.
    pub capped: bool,
    /// Sum of the timed runs.
    pub timed_total_ms: f64,
    pub warmup_ms: f64,
    /// Slowest single run, warm-up included.
    pub slowest_run_ms: f64,
}

/// Lower median of `samples`.
pub fn lower_median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s[(s.len() - 1) / 2]
}

/// One warm-up outside the median, then up to `iters` timed runs, stopping as soon as
/// the timed runs add up to more than `cap_ms` (at least one timed run is
/// always completed).
pub fn time_kernel(
    clock: &dyn ProbeClock,
    target: &KernelVariant,
    iters: usize,
    cap_ms: f64,
    run: &mut dyn FnMut() -> Result<(), KernelError>,
) -> Result<KernelTiming, KernelError> {
    let iters = iters.max(1);
    let warmup_ms = clock.warmup(target, run)?;
    let mut samples = Vec::with_capacity(iters);
    let mut total = 0.0;
    for _ in 0..iters {
        let t = clock.measure(target, run)?;
        samples.push(t);
        total += t;
        if total > cap_ms {
            break;
        }
    }
    Ok(KernelTiming {
        variant: *target,
        median_ms: lower_median(&samples),
        completed: samples.len(),
        capped: samples.len() < iters,
        timed_total_ms: total,
        warmup_ms,
        slowest_run_ms: samples.iter().copied().fold(warmup_ms, f64::max),
    })
}
