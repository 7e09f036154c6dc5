use std::hint::black_box;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

/// Host capabilities used by the cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    /// CPU model, logical worker count and artifact version.
    pub device_sig: String,
    /// Effective memory bandwidth, bytes per second.
    pub bw_eff: f64,
    /// Effective compute throughput, FLOP per second.
    pub flops_eff: f64,
    pub cores: usize,
}

/// Bytes touched by the bandwidth calibration.
const TRIAD_BYTES: usize = 64 << 20;
const FMA_ITERS: usize = 1 << 21;
const FMA_CHAINS: usize = 8;

static DETECTED: OnceLock<DeviceProfile> = OnceLock::new();

fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_owned())
        })
        .unwrap_or_else(|| format!("{}-cpu", std::env::consts::ARCH))
}

pub fn host_signature(cores: usize) -> String {
    format!("{}|{}t|{}", cpu_model(), cores, crate::ARTIFACT_VERSION)
}

/// Best-of-three parallel `a = b + s * c` over `TRIAD_BYTES` in total.
fn measure_bandwidth() -> f64 {
    let len = TRIAD_BYTES / (3 * std::mem::size_of::<f32>());
    let b = vec![1.0f32; len];
    let c = vec![2.0f32; len];
    let mut a = vec![0.0f32; len];
    let s = black_box(0.5f32);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let t = Instant::now();
        a.par_chunks_mut(1 << 16)
            .zip(b.par_chunks(1 << 16))
            .zip(c.par_chunks(1 << 16))
            .for_each(|((a, b), c)| {
                for ((x, &y), &z) in a.iter_mut().zip(b).zip(c) {
                    *x = y + s * z;
                }
            });
        black_box(&a);
        best = best.min(t.elapsed().as_secs_f64());
    }
    (3 * len * std::mem::size_of::<f32>()) as f64 / best.max(1e-9)
}

/// Independent multiply-add chains on every worker.
fn measure_flops(workers: usize) -> f64 {
    let t = Instant::now();
    let sink: f64 = (0..workers)
        .into_par_iter()
        .map(|w| {
            let mut acc = [1.0f64 + w as f64; FMA_CHAINS];
            let m = black_box(0.999_999f64);
            let c = black_box(1e-7f64);
            for _ in 0..FMA_ITERS {
                for x in acc.iter_mut() {
                    *x = *x * m + c;
                }
            }
            acc.iter().sum::<f64>()
        })
        .sum();
    black_box(sink);
    let flops = (2 * FMA_CHAINS * FMA_ITERS * workers) as f64;
    flops / t.elapsed().as_secs_f64().max(1e-9)
}

impl DeviceProfile {
    /// Profile with hand-set capabilities for the current host signature.
    pub fn fixed(bw_eff: f64, flops_eff: f64, cores: usize) -> Self {
        assert!(
            bw_eff > 0.0 && flops_eff > 0.0,
            "device capabilities must be positive"
        );
        Self {
            device_sig: host_signature(cores),
            bw_eff,
            flops_eff,
            cores: cores.max(1),
        }
    }

    /// Calibrate once per process and reuse afterwards.
    pub fn detect() -> Self {
        DETECTED.get_or_init(Self::calibrate).clone()
    }

    pub fn calibrate() -> Self {
        let cores = rayon::current_num_threads().max(1);
        let bw_eff = measure_bandwidth();
        let flops_eff = measure_flops(cores);
        log::debug!(
            "calibrated host: {:.2} GB/s, {:.2} GFLOP/s, {cores} workers",
            bw_eff / 1e9,
            flops_eff / 1e9
        );
        Self {
            device_sig: host_signature(cores),
            bw_eff,
            flops_eff,
            cores,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bw_eff: self.bw_eff * factor,
            flops_eff: self.flops_eff * factor,
            ..self.clone()
        }
    }
}
