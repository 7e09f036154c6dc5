mod common;

use std::sync::Arc;

use autosage::attention::{csr_attention_forward, AttentionInputs};
use autosage::cache::{replay_mode, CacheRecord, ScheduleCache};
use autosage::csr::{
    extract_features, gen_er, gen_hub_fixed, gen_hubskew, induced_row_sample, read_csr, validate,
    write_csr, CsrMatrix, DenseMatrix,
};
use autosage::kernels::{dispatch, row_softmax, KernelVariant, Operands};
use autosage::scheduler::{
    shortlist, variant_grid, DeviceProfile, ProbeConfig, Scheduler, ScriptedClock,
};
use autosage::Op;
use proptest::prelude::*;

use common::{sddmm_oracle, spmm_oracle, worst};

fn valid(m: &CsrMatrix) -> bool {
    validate(m.n_rows(), m.n_cols(), m.rowptr(), m.colind(), m.values()).is_ok()
}

fn rows_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = CsrMatrix> {
    (1..=max_rows, 1..=max_cols)
        .prop_flat_map(|(n, m)| {
            let row = proptest::collection::btree_map(0..m as u32, -1.0f32..1.0, 0..=m.min(24));
            (Just(m), proptest::collection::vec(row, n))
        })
        .prop_map(|(m, rows)| {
            let rows = rows.into_iter().map(|r| r.into_iter().collect()).collect();
            CsrMatrix::from_rows(m, rows, true).unwrap()
        })
}

fn width() -> impl Strategy<Value = usize> {
    prop_oneof![
        1usize..=8,
        Just(31),
        Just(32),
        Just(33),
        Just(63),
        Just(64),
        Just(128)
    ]
}

fn p99_over_max(m: &CsrMatrix) -> f64 {
    let gf = extract_features(m, usize::MAX);
    if gf.max_degree == 0 {
        return 1.0;
    }
    gf.p99 as f64 / gf.max_degree as f64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn generators_produce_valid_csr(n in 0usize..400, k in 0usize..8, p in 0.0f64..0.05,
                                    hubs in 0usize..8, seed in any::<u64>()) {
        prop_assert!(valid(&gen_er(n, p, seed).unwrap()));
        prop_assert!(valid(&gen_hubskew(n, k, 0.1, 16, seed).unwrap()));
        let m = gen_hub_fixed(n, hubs, n / 2, k.min(n), seed).unwrap();
        prop_assert!(valid(&m));
        prop_assert_eq!(m.nnz(), hubs.min(n) * (n / 2) + (n - hubs.min(n)) * k.min(n));
    }

    #[test]
    fn sample_size_and_tail_ratio(n in 1000usize..4000, hubs in 1usize..=4, hub_deg in 64usize..800,
                                  other in 1usize..=16, frac in 0.01f64..0.5, seed in any::<u64>()) {
        let g = gen_hub_fixed(n, hubs, hub_deg, other, seed).unwrap();
        let s = induced_row_sample(&g, frac, 512);
        let want = n.min(512usize.max((frac * n as f64).ceil() as usize));
        prop_assert_eq!(s.matrix.n_rows(), want);
        prop_assert_eq!(s.rows.len(), want);
        prop_assert!(valid(&s.matrix));
        let ratio = p99_over_max(&s.matrix) / p99_over_max(&g);
        prop_assert!((0.5..=2.0).contains(&ratio), "p99/max ratio moved by {ratio}");
    }

    #[test]
    fn save_then_load_is_identity(m in rows_strategy(40, 40), pattern_only in any::<bool>()) {
        let m = if pattern_only { m.pattern() } else { m };
        let mut buf = Vec::new();
        write_csr(&m, &mut buf).unwrap();
        let back = read_csr(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn variants_match_dense_oracle(a in rows_strategy(96, 96), f in width(), hubt in 1usize..32,
                                   seed in any::<u64>()) {
        let b = DenseMatrix::random(a.n_cols(), f, seed);
        let x = DenseMatrix::random(a.n_rows(), f, seed ^ 1);
        let y = DenseMatrix::random(a.n_cols(), f, seed ^ 2);
        let p = a.pattern();
        let want_c = spmm_oracle(&a, &b);
        let want_s = sddmm_oracle(&p, &x, &y);
        for op in [Op::SpMM, Op::SDDMM] {
            let (ops, want) = match op {
                Op::SpMM => (Operands::SpMM { a: &a, b: &b }, &want_c),
                Op::SDDMM => (Operands::SDDMM { pattern: &p, x: &x, y: &y }, &want_s),
            };
            let mut all = variant_grid(op, true, hubt);
            all.push(KernelVariant::baseline(op));
            for v in all {
                let first = dispatch(&v, ops).unwrap();
                prop_assert!(worst(first.output.as_f32(), want, 1e-5, 1e-6) <= 1.0, "{}", v);
                let again = dispatch(&v, ops).unwrap();
                prop_assert_eq!(first.output.as_f32(), again.output.as_f32(), "{} not deterministic", v);
            }
        }
    }

    #[test]
    fn full_row_sddmm_is_dense_product(m in 1usize..80, f in width(), seed in any::<u64>()) {
        let p = CsrMatrix::from_rows(m, vec![(0..m as u32).map(|c| (c, 1.0)).collect()], false).unwrap();
        let x = DenseMatrix::random(1, f, seed);
        let y = DenseMatrix::random(m, f, seed ^ 3);
        let want: Vec<f64> = (0..m)
            .map(|j| (0..f).map(|t| x.get(0, t) as f64 * y.get(j, t) as f64).sum())
            .collect();
        for v in variant_grid(Op::SDDMM, true, 8) {
            let r = dispatch(&v, Operands::SDDMM { pattern: &p, x: &x, y: &y }).unwrap();
            prop_assert!(worst(r.output.as_f32(), &want, 1e-5, 1e-6) <= 1.0);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(m in rows_strategy(60, 200), shift in -1000i32..=1000) {
        // Multiples of 2^-10 keep `v + shift` exact in f32.
        let vals: Vec<f32> = m.values().unwrap().iter().map(|v| (v * 1024.0).round() / 1024.0).collect();
        let m = m.with_values(vals.clone()).unwrap();
        let s = row_softmax(&m).unwrap();
        let shifted = m.with_values(vals.iter().map(|v| v + shift as f32).collect()).unwrap();
        let shifted = row_softmax(&shifted).unwrap();
        let (sv, tv) = (s.values().unwrap(), shifted.values().unwrap());
        for i in (0..m.n_rows()).filter(|&i| m.degree(i) > 0) {
            let sum: f64 = sv[m.row_range(i)].iter().map(|&p| p as f64).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6, "row {i} sums to {sum}");
        }
        for (a, b) in sv.iter().zip(tv) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn decisions_are_pure_under_a_script(n in 600usize..1500, hub_deg in 0usize..600, f in width(),
                                         base in 0.5f64..2.0, gain in 0.5f64..1.5, seed in any::<u64>()) {
        let g = gen_hub_fixed(n, 2, hub_deg, 4, seed).unwrap();
        let b = DenseMatrix::random(n, f, seed);
        let run = || {
            let script = move |v: &KernelVariant, call: usize| {
                if v.is_baseline() { base } else { base * gain + (v.f_tile + call % 3) as f64 * 1e-3 }
            };
            Scheduler::new(ProbeConfig::default(), DeviceProfile::fixed(1e10, 1e11, 4))
                .unwrap()
                .with_clock(Arc::new(ScriptedClock::new(script)))
                .decide(Operands::SpMM { a: &g, b: &b })
                .unwrap()
        };
        let (d1, d2) = (run(), run());
        prop_assert_eq!(d1.choice, d2.choice);
        let (r1, r2) = (d1.report.unwrap(), d2.report.unwrap());
        prop_assert_eq!(r1.t_b, r2.t_b);
        prop_assert_eq!(r1.t_star, r2.t_star);
        prop_assert_eq!(r1.targets(), r2.targets());
    }

    #[test]
    fn shortlist_order_is_scale_free(n in 200usize..2000, hub_deg in 0usize..1000, f in width(),
                                     scale in 0.01f64..100.0, seed in any::<u64>()) {
        let g = gen_hub_fixed(n, 3, hub_deg.min(n), 5, seed).unwrap();
        let gf = extract_features(&g, 64);
        let dp = DeviceProfile::fixed(2e10, 1e12, 4);
        for op in [Op::SpMM, Op::SDDMM] {
            let order = |d: &DeviceProfile| -> Vec<KernelVariant> {
                shortlist(&gf, f, op, d, true, 64).into_iter().map(|(v, _)| v).collect()
            };
            prop_assert_eq!(order(&dp), order(&dp.scaled(scale)));
        }
    }
}

/// Every schedule the scheduler can pick, as (sddmm, spmm) combinations.
fn combos() -> Vec<(KernelVariant, KernelVariant)> {
    let mut sd = variant_grid(Op::SDDMM, true, 4);
    sd.push(KernelVariant::baseline(Op::SDDMM));
    let mut sp = variant_grid(Op::SpMM, true, 4);
    sp.push(KernelVariant::baseline(Op::SpMM));
    sd.iter()
        .step_by(3)
        .flat_map(|&a| sp.iter().step_by(5).map(move |&b| (a, b)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn attention_ignores_the_schedule(s in rows_strategy(48, 48), f in width(), fo in 1usize..=16,
                                      seed in any::<u64>()) {
        let s = s.pattern();
        let q = DenseMatrix::random(s.n_rows(), f, seed);
        let k = DenseMatrix::random(s.n_cols(), f, seed ^ 5);
        let v = DenseMatrix::random(s.n_cols(), fo, seed ^ 6);
        let inputs = AttentionInputs { pattern: &s, q: &q, k: &k, v: &v };
        let probe = Scheduler::new(ProbeConfig::default(), DeviceProfile::fixed(1e10, 1e11, 4)).unwrap();
        let sddmm_key = probe.key_for(&Operands::SDDMM { pattern: &s, x: &q, y: &k });
        let spmm_key = probe.key_for(&Operands::SpMM { a: &s, b: &v });
        let mut reference: Option<Vec<f32>> = None;
        for (a, b) in combos() {
            let cache = Arc::new(ScheduleCache::new());
            cache.put(CacheRecord::new(sddmm_key.clone(), a, 1.0, 1.0, 0.95));
            cache.put(CacheRecord::new(spmm_key.clone(), b, 1.0, 1.0, 0.95));
            let sched = Scheduler::new(ProbeConfig::default(), DeviceProfile::fixed(1e10, 1e11, 4))
                .unwrap()
                .with_cache(cache)
                .with_replay(replay_mode(true));
            let out = csr_attention_forward(&inputs, &sched).unwrap().to_vec();
            match &reference {
                None => reference = Some(out),
                Some(r) => {
                    for (x, y) in r.iter().zip(&out) {
                        prop_assert!((x - y).abs() <= 2e-5, "{} / {}: {} vs {}", a, b, x, y);
                    }
                }
            }
        }
    }
}

#[test]
fn keys_never_cross_width_or_op() {
    let g = gen_er(2000, 4e-3, 9).unwrap();
    let p = g.pattern();
    let b64 = DenseMatrix::random(2000, 64, 1);
    let b128 = DenseMatrix::random(2000, 128, 1);
    let sched =
        Scheduler::new(ProbeConfig::default(), DeviceProfile::fixed(1e10, 1e11, 4)).unwrap();
    let first = sched.decide(Operands::SpMM { a: &g, b: &b64 }).unwrap();
    let wider = sched.decide(Operands::SpMM { a: &g, b: &b128 }).unwrap();
    let other = sched
        .decide(Operands::SDDMM {
            pattern: &p,
            x: &b64,
            y: &b64,
        })
        .unwrap();
    assert_eq!(wider.source.as_str(), "probed");
    assert_eq!(other.source.as_str(), "probed");
    assert_ne!(first.key, wider.key);
    assert_ne!(first.key, other.key);
    assert_eq!(sched.cache().len(), 3);
}

#[test]
fn repeated_stores_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.tsv");
    let g = gen_hub_fixed(1200, 1, 300, 4, 2).unwrap();
    let sched = Scheduler::new(ProbeConfig::default(), DeviceProfile::fixed(1e10, 1e11, 4))
        .unwrap()
        .with_clock(Arc::new(ScriptedClock::new(|v: &KernelVariant, _| {
            if v.is_baseline() {
                2.0
            } else {
                1.0
            }
        })));
    for f in [8, 16, 32] {
        let b = DenseMatrix::random(1200, f, 3);
        sched.decide(Operands::SpMM { a: &g, b: &b }).unwrap();
    }
    sched.cache().store(&path).unwrap();
    let once = std::fs::read(&path).unwrap();
    sched.cache().store(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), once);
    let reloaded = ScheduleCache::new();
    reloaded.load(&path).unwrap();
    assert_eq!(reloaded.records(), sched.cache().records());
}
