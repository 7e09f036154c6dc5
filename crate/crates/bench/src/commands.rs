use std::path::{Path, PathBuf};
use std::sync::Arc;

use autosage::attention::{attention_probe_breakdown, csr_attention_forward, AttentionInputs};
use autosage::cache::{ReplayPolicy, ScheduleCache};
use autosage::csr::{
    extract_features, gen_er, gen_hub_fixed, gen_hubskew, load_csr, save_csr, CsrMatrix,
    DenseMatrix, GenError,
};
use autosage::env;
use autosage::kernels::{
    dispatch, vec4_eligible, ExecPath, KernelError, KernelOverrides, KernelResult, KernelVariant,
    Operands, DEFAULT_HUB_THRESHOLD,
};
use autosage::scheduler::{DeviceProfile, ProbeConfig, ScheduleDecision, Scheduler};
use autosage::Op;

use crate::report::{fmt3, median_ms, speedup, Csv, DecisionMeta, Sidecar, TimingMeta};
use crate::{
    AblateArgs, AttentionArgs, BenchArgs, CliError, GenKind, ReplayArgs, SchedArgs, SweepArgs,
    TimingArgs,
};

pub const BENCH_HEADER: &str = "dataset,F,op,choice,baseline_ms,chosen_ms,speedup";

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub fn gen(kind: GenKind) -> Result<(), CliError> {
    let (m, out) = match kind {
        GenKind::Er { n, p, seed, out } => (gen_er(n, p, seed)?, out),
        GenKind::Hubskew {
            n,
            k,
            h,
            hub_factor,
            seed,
            out,
        } => (gen_hubskew(n, k, h, hub_factor, seed)?, out),
        GenKind::Hubfixed {
            n,
            hubs,
            hub_deg,
            other_deg,
            seed,
            out,
        } => (gen_hub_fixed(n, hubs, hub_deg, other_deg, seed)?, out),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_csr(&m, &out)?;
    let gf = extract_features(&m, DEFAULT_HUB_THRESHOLD);
    println!(
        "wrote {}: n_rows={} nnz={} p25={} p50={} p75={} p90={} p99={} max={} mean={:.3}",
        out.display(),
        gf.n_rows,
        gf.nnz,
        gf.p25,
        gf.p50,
        gf.p75,
        gf.p90,
        gf.p99,
        gf.max_degree,
        gf.mean_degree
    );
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into())
}

/// Owned dense operands for one (graph, op, F) cell.
#[allow(clippy::upper_case_acronyms)]
enum Inputs {
    SpMM {
        b: DenseMatrix,
    },
    SDDMM {
        pattern: CsrMatrix,
        x: DenseMatrix,
        y: DenseMatrix,
    },
}

impl Inputs {
    fn new(graph: &CsrMatrix, op: Op, f: usize, seed: u64) -> Self {
        match op {
            Op::SpMM => Inputs::SpMM {
                b: DenseMatrix::random(graph.n_cols(), f, seed),
            },
            Op::SDDMM => Inputs::SDDMM {
                pattern: graph.pattern(),
                x: DenseMatrix::random(graph.n_rows(), f, seed),
                y: DenseMatrix::random(graph.n_cols(), f, seed.wrapping_add(1)),
            },
        }
    }

    fn operands<'a>(&'a self, graph: &'a CsrMatrix) -> Operands<'a> {
        match self {
            Inputs::SpMM { b } => Operands::SpMM { a: graph, b },
            Inputs::SDDMM { pattern, x, y } => Operands::SDDMM { pattern, x, y },
        }
    }
}

/// Resolved scheduler settings, flag > env > default.
struct Resolved {
    sched: Scheduler,
    cache_path: Option<PathBuf>,
    replay_only: bool,
    strict: bool,
    forced: Option<String>,
}

fn scheduler(a: &SchedArgs) -> Result<Resolved, CliError> {
    let mut cfg = ProbeConfig::from_env()?;
    if let Some(v) = a.frac {
        cfg.frac = v;
    }
    if let Some(v) = a.min_rows {
        cfg.min_rows = v;
    }
    if let Some(v) = a.probe_iters {
        cfg.iters = v;
    }
    if let Some(v) = a.cap_ms {
        cfg.cap_ms = v;
    }
    if let Some(v) = a.top_k {
        cfg.top_k = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    let cache_path = a
        .cache
        .clone()
        .or_else(|| env::raw(env::CACHE).map(PathBuf::from));
    let cache = match &cache_path {
        Some(p) => ScheduleCache::persistent(p)?,
        None => ScheduleCache::new(),
    };
    let replay_only = a.replay_only || env::flag(env::REPLAY_ONLY)?.unwrap_or(false);
    let strict = a.strict || env::flag(env::REPLAY_STRICT)?.unwrap_or(false);
    let replay = if replay_only {
        ReplayPolicy::ReplayOnly { strict }
    } else {
        ReplayPolicy::Probe
    };
    let forced = a.force.clone().or_else(|| env::raw(env::FORCE));
    let sched = Scheduler::new(cfg, DeviceProfile::detect())?
        .with_cache(Arc::new(cache))
        .with_replay(replay)
        .with_overrides(KernelOverrides::from_env()?)
        .with_forced(forced.clone());
    Ok(Resolved {
        sched,
        cache_path,
        replay_only,
        strict,
        forced,
    })
}

fn sidecar(command: &str, dataset: &str, t: &TimingArgs, r: &Resolved) -> Sidecar {
    Sidecar::new(command, dataset, r.sched.device(), timing_meta(t)).with_cfg(
        r.sched.config(),
        (r.replay_only, r.strict),
        r.cache_path.as_deref(),
        r.forced.as_deref(),
    )
}

fn timing_meta(t: &TimingArgs) -> TimingMeta {
    TimingMeta {
        iters: t.iters,
        warmup: t.warmup,
        seed: t.seed,
    }
}

fn time_variant(v: &KernelVariant, ops: Operands<'_>, t: &TimingArgs) -> Result<f64, KernelError> {
    median_ms(t.iters, t.warmup, || dispatch(v, ops))
}

fn describe(d: &ScheduleDecision) -> String {
    match &d.record {
        Some(r) => format!(
            "{} [{}] t_b={:.4} t*={:.4}",
            d.choice, d.source, r.t_b, r.t_star
        ),
        None => format!("{} [{}]", d.choice, d.source),
    }
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let graph = load_csr(&a.graph)?;
    let dataset = dataset_name(&a.graph);
    let r = scheduler(&a.sched)?;
    let mut csv = Csv::new(BENCH_HEADER);
    let mut meta = sidecar("bench", &dataset, &a.timing, &r);
    for op in a.op.ops() {
        for &f in &a.f {
            let inputs = Inputs::new(&graph, op, f, a.timing.seed);
            let ops = inputs.operands(&graph);
            let baseline_ms = time_variant(&KernelVariant::baseline(op), ops, &a.timing)?;
            let d = r.sched.decide(ops)?;
            let chosen_ms = time_variant(&d.choice, ops, &a.timing)?;
            println!(
                "{dataset} F={f} {op}: {} baseline={baseline_ms:.3} ms chosen={chosen_ms:.3} ms",
                describe(&d)
            );
            csv.row(&[
                dataset.clone(),
                f.to_string(),
                op.to_string(),
                d.label().into(),
                fmt3(baseline_ms),
                fmt3(chosen_ms),
                speedup(baseline_ms, chosen_ms),
            ]);
            meta.decisions.push(DecisionMeta::from(&d));
        }
    }
    csv.write(&a.out)?;
    meta.write(&a.out)?;
    Ok(())
}

fn max_rel_err(got: &[f32], want: &[f32]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w as f64).abs() / (w as f64).abs().max(1e-1))
        .fold(0.0, f64::max)
}

pub fn sweep_split(a: SweepArgs) -> Result<(), CliError> {
    let graph = load_csr(&a.graph)?;
    let dataset = dataset_name(&a.graph);
    let device = DeviceProfile::detect();
    let mut csv = Csv::new(
        "dataset,F,op,hub_threshold,heavy_rows,baseline_ms,rowparallel_ms,hubsplit_ms,speedup,max_rel_err",
    );
    for op in a.op.ops() {
        let inputs = Inputs::new(&graph, op, a.f, a.timing.seed);
        let ops = inputs.operands(&graph);
        let vec = vec4_eligible(a.f, &ops.alignments());
        let base = KernelVariant::baseline(op);
        let reference = dispatch(&base, ops)?.output;
        let baseline_ms = time_variant(&base, ops, &a.timing)?;
        let rp = KernelVariant::row_parallel(op, a.f_tile, a.rows_per_chunk, vec);
        let rowparallel_ms = time_variant(&rp, ops, &a.timing)?;
        for &t in &a.thresholds {
            let hs = KernelVariant::hub_split(op, a.f_tile, a.rows_per_chunk, vec, t.max(1));
            let out = dispatch(&hs, ops)?.output;
            let err = max_rel_err(out.as_f32(), reference.as_f32());
            if err > 1e-5 {
                return Err(CliError::Usage(format!(
                    "{hs} deviates from the baseline by {err:e}"
                )));
            }
            let hubsplit_ms = time_variant(&hs, ops, &a.timing)?;
            let heavy = (0..graph.n_rows())
                .filter(|&i| graph.degree(i) >= t.max(1))
                .count();
            println!(
                "{dataset} F={} {op} hubt={t}: heavy={heavy} hubsplit={hubsplit_ms:.3} ms",
                a.f
            );
            csv.row(&[
                dataset.clone(),
                a.f.to_string(),
                op.to_string(),
                t.to_string(),
                heavy.to_string(),
                fmt3(baseline_ms),
                fmt3(rowparallel_ms),
                fmt3(hubsplit_ms),
                speedup(baseline_ms, hubsplit_ms),
                format!("{err:.2e}"),
            ]);
        }
    }
    csv.write(&a.out)?;
    Sidecar::new("sweep-split", &dataset, &device, timing_meta(&a.timing)).write(&a.out)?;
    Ok(())
}

pub fn ablate_vec(a: AblateArgs) -> Result<(), CliError> {
    let graph = load_csr(&a.graph)?;
    let dataset = dataset_name(&a.graph);
    let r = scheduler(&a.sched)?;
    let mut csv = Csv::new("dataset,F,op,variant,off_ms,on_ms,speedup");
    let mut meta = sidecar("ablate-vec", &dataset, &a.timing, &r);
    for op in a.op.ops() {
        for &f in &a.f {
            let inputs = Inputs::new(&graph, op, f, a.timing.seed);
            let ops = inputs.operands(&graph);
            let d = r.sched.decide(ops)?;
            let mut v = if d.choice.is_baseline() {
                KernelVariant::row_parallel(op, 64, 4, true)
            } else {
                d.choice
            };
            meta.decisions.push(DecisionMeta::from(&d));
            v.vectorized = false;
            let off_ms = time_variant(&v, ops, &a.timing)?;
            let name = v.to_string().replace(":vec=0", "");
            let eligible = vec4_eligible(f, &ops.alignments());
            let (on, ratio) = if eligible {
                let on_v = KernelVariant {
                    vectorized: true,
                    ..v
                };
                let path = dispatch(&on_v, ops)?.path;
                if path != ExecPath::Vectorized {
                    log::warn!("{on_v} fell back to scalar at F={f}");
                }
                let on_ms = time_variant(&on_v, ops, &a.timing)?;
                (fmt3(on_ms), speedup(off_ms, on_ms))
            } else {
                ("ineligible".to_owned(), "ineligible".to_owned())
            };
            println!("{dataset} F={f} {op} {name}: off={off_ms:.3} ms on={on} speedup={ratio}");
            csv.row(&[
                dataset.clone(),
                f.to_string(),
                op.to_string(),
                name,
                fmt3(off_ms),
                on,
                ratio,
            ]);
        }
    }
    csv.write(&a.out)?;
    meta.write(&a.out)?;
    Ok(())
}

pub fn attention(a: AttentionArgs) -> Result<(), CliError> {
    let graph = load_csr(&a.graph)?;
    let dataset = dataset_name(&a.graph);
    let pattern = graph.pattern();
    let q = DenseMatrix::random(pattern.n_rows(), a.f, a.timing.seed);
    let k = DenseMatrix::random(pattern.n_cols(), a.f, a.timing.seed.wrapping_add(1));
    let v = DenseMatrix::random(pattern.n_cols(), a.f_out, a.timing.seed.wrapping_add(2));
    let inputs = AttentionInputs {
        pattern: &pattern,
        q: &q,
        k: &k,
        v: &v,
    };

    let r = scheduler(&a.sched)?;
    let replay = Scheduler::new(*r.sched.config(), r.sched.device().clone())?
        .with_cache(r.sched.cache().clone())
        .with_replay(ReplayPolicy::ReplayOnly { strict: r.strict });
    let mut csv = Csv::new(
        "dataset,F,F_out,phase,sddmm_choice,sddmm_source,spmm_choice,spmm_source,probe_launches,probe_ms,first_ms,median_ms",
    );
    let mut meta = sidecar("attention", &dataset, &a.timing, &r);
    for (phase, sched) in [("cold", &r.sched), ("warm", &r.sched), ("replay", &replay)] {
        let start = std::time::Instant::now();
        let run = attention_probe_breakdown(&inputs, sched)?;
        let first_ms = start.elapsed().as_secs_f64() * 1e3;
        let probe_ms: f64 = [&run.sddmm, &run.spmm]
            .iter()
            .filter_map(|d| d.report.as_ref())
            .map(|r| r.probe_wall_ms)
            .fold(0.0, |a, b| a + b);
        for _ in 0..a.timing.warmup {
            csr_attention_forward(&inputs, sched)?;
        }
        let mut samples = Vec::with_capacity(a.timing.iters.max(1));
        for _ in 0..a.timing.iters.max(1) {
            let t = std::time::Instant::now();
            csr_attention_forward(&inputs, sched)?;
            samples.push(t.elapsed().as_secs_f64() * 1e3);
        }
        let median = autosage::scheduler::lower_median(&samples);
        println!(
            "{dataset} attention {phase}: sddmm {} | spmm {} | probes={} median={median:.3} ms",
            describe(&run.sddmm),
            describe(&run.spmm),
            run.probe_launches()
        );
        csv.row(&[
            dataset.clone(),
            a.f.to_string(),
            a.f_out.to_string(),
            phase.into(),
            run.sddmm.choice.to_string(),
            run.sddmm.source.to_string(),
            run.spmm.choice.to_string(),
            run.spmm.source.to_string(),
            run.probe_launches().to_string(),
            fmt3(probe_ms),
            fmt3(first_ms),
            fmt3(median),
        ]);
        if phase == "cold" {
            meta.decisions.push(DecisionMeta::from(&run.sddmm));
            meta.decisions.push(DecisionMeta::from(&run.spmm));
        }
    }
    r.sched.cache().flush()?;
    csv.write(&a.out)?;
    meta.write(&a.out)?;
    Ok(())
}

pub fn replay(a: ReplayArgs) -> Result<(), CliError> {
    let graph = load_csr(&a.graph)?;
    let dataset = dataset_name(&a.graph);
    let cache = Arc::new(ScheduleCache::new());
    if a.cache.exists() {
        cache.load(&a.cache)?;
    }
    let sched = Scheduler::new(ProbeConfig::default(), DeviceProfile::detect())?
        .with_cache(cache.clone())
        .with_replay(ReplayPolicy::ReplayOnly { strict: a.strict });
    for op in a.op.ops() {
        let inputs = Inputs::new(&graph, op, a.f, a.timing.seed);
        let ops = inputs.operands(&graph);
        let d = sched.decide(ops)?;
        if let Some(rec) = cache.get(&d.key) {
            if rec.choice != d.choice {
                return Err(CliError::Usage(format!(
                    "replayed {} differs from recorded {}",
                    d.choice, rec.choice
                )));
            }
        }
        let ms = time_variant(&d.choice, ops, &a.timing)?;
        let result: KernelResult = dispatch(&d.choice, ops)?;
        println!(
            "{dataset} F={} {op}: choice={} label={} source={} path={:?} retimed_ms={ms:.3}",
            a.f,
            d.choice,
            d.label(),
            d.source,
            result.path
        );
    }
    if sched.probe_launches() != 0 {
        return Err(CliError::Usage("replay launched probe kernels".into()));
    }
    Ok(())
}
