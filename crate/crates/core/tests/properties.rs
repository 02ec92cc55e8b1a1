use proptest::prelude::*;

use forklab_core::analysis::{
    argmax_factor, classify, estimate_method, geomean, ranksum_exact, ranksum_normal, ranksum_test, Class,
    DecisionRecord, MethodRecord,
};
use forklab_core::dataset::{filter, read_csv, standardize, write_csv, DataPoint, Dataset, FilterConfig};
use forklab_core::lang::{print_program, LoopId};
use forklab_core::loopopts::{peel, unroll, Phase, UNROLL_FACTORS};
use forklab_core::runtime::{Clock, Machine};
use forklab_core::selftime::{OutlierConfig, PerfStorage};
use forklab_core::{parse, Program, Value};

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..1000).prop_map(|v| v.to_string()),
        (0i64..100).prop_map(|v| format!("{v}.5")),
        Just("a".to_string()),
        Just("b".to_string()),
        Just("g".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let ops = prop::sample::select(vec!["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"]);
        prop_oneof![
            (inner.clone(), ops, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            inner.clone().prop_map(|e| format!("-{e}")),
            inner.clone().prop_map(|e| format!("!{e}")),
            inner.clone().prop_map(|e| format!("arr[{e}]")),
            inner.prop_map(|e| format!("h({e})")),
        ]
    })
}

fn stmts() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        expr().prop_map(|e| format!("a = {e};")),
        expr().prop_map(|e| format!("g = {e};")),
        (expr(), expr()).prop_map(|(i, e)| format!("arr[{i}] = {e};")),
        expr().prop_map(|e| format!("out({e});")),
        expr().prop_map(|e| format!("pause({e});")),
        expr().prop_map(|e| format!("return {e};")),
        Just("return;".to_string()),
    ];
    let block = simple.prop_recursive(3, 16, 4, |inner| {
        let body = prop::collection::vec(inner, 0..4).prop_map(|v| v.join(" "));
        prop_oneof![
            (expr(), body.clone()).prop_map(|(c, t)| format!("if ({c}) {{ {t} }}")),
            (expr(), body.clone(), body.clone()).prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
            (expr(), body.clone()).prop_map(|(c, t)| format!("while ({c}) {{ {t} }}")),
            (expr(), expr(), 1i64..5, body).prop_map(|(i, l, s, t)| format!("for (k = {i}; k < {l}; k += {s}) {{ {t} }}")),
        ]
    });
    prop::collection::vec(block, 0..5).prop_map(|v| v.join("\n  "))
}

fn program_text() -> impl Strategy<Value = String> {
    (expr(), stmts()).prop_map(|(init, body)| {
        format!("global g;\nglobal arr[4];\nfn h(p) {{ return p; }}\nfn main(a, b) {{\n  let t = {init};\n  {body}\n}}\n")
    })
}

fn run(prog: &Program, args: &[Value]) -> (Result<Option<Value>, String>, Vec<Value>) {
    let mut m = Machine::interpreter(prog, Clock::virtual_clock());
    let r = m.call("main", args).map_err(|e| e.to_string());
    (r, m.take_output())
}

fn loop_program(shape: usize, init: i64, step: i64, guard: bool) -> String {
    let guard = if guard { "if (g > 100) { return -1; }" } else { "" };
    match shape {
        0 => format!("global g;\nfn main(n) {{ let s = 0; for (i = {init}; i < n; i += {step}) {{ {guard} s = s + i * 3; out(s); }} return s; }}"),
        1 => format!("global g;\nfn main(n) {{ let s = 0; let i = {init}; while (i < n) {{ {guard} s = s + i; out(i); i = i + {step}; }} return s; }}"),
        _ => format!("global g;\nfn main(n) {{ let s = 0.5; for (i = {init}; i < n; i += {step}) {{ {guard} s = s * 1.5 + i; }} out(s); return s; }}"),
    }
}

fn point(unit: usize, baseline: bool, inv: u64, avg: f64, speedup: f64, features: Vec<f64>) -> DataPoint {
    DataPoint {
        benchmark: "b".into(),
        function: format!("f{unit}"),
        unit_id: unit,
        loop_id: Some(LoopId(0)),
        phase: Phase::Unroll,
        param: if baseline { 1 } else { 4 },
        invocations: inv,
        total_time: (avg * inv as f64) as u64,
        avg_time: avg,
        baseline_avg: avg * speedup,
        speedup: if baseline { 1.0 } else { speedup },
        heuristic_decision: 1,
        is_baseline: baseline,
        features,
    }
}

fn dataset() -> impl Strategy<Value = Dataset> {
    let row = (0usize..4, any::<bool>(), 0u64..300, 0.0f64..200.0, 0.5f64..2.0, prop::collection::vec(-5.0f64..5.0, 3));
    prop::collection::vec(row, 0..40).prop_map(|rows| Dataset {
        feature_names: vec!["x".into(), "y".into(), "z".into()],
        rows: rows
            .into_iter()
            .map(|(u, b, inv, avg, s, f)| point(u, b, inv, avg, s, f))
            .collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_is_identity(src in program_text()) {
        let p = parse(&src).unwrap();
        let again = parse(&print_program(&p)).unwrap();
        prop_assert_eq!(p, again);
    }

    #[test]
    fn transforms_preserve_behavior(
        shape in 0usize..3,
        init in -5i64..5,
        step in 1i64..4,
        n in -3i64..70,
        guard in any::<bool>(),
    ) {
        let prog = parse(&loop_program(shape, init, step, guard)).unwrap();
        let expected = run(&prog, &[Value::Int(n)]);
        let f = prog.function("main").unwrap();
        let mut variants = vec![peel(f, LoopId(0)).unwrap()];
        for &factor in &UNROLL_FACTORS {
            variants.push(unroll(f, LoopId(0), factor).unwrap());
        }
        for g in variants {
            let mut q = prog.clone();
            *q.function_mut("main").unwrap() = g;
            prop_assert_eq!(&run(&q, &[Value::Int(n)]), &expected);
        }
    }

    #[test]
    fn filter_is_idempotent(d in dataset()) {
        let cfg = FilterConfig::default();
        let (once, stats) = filter(&d, &cfg);
        let (twice, _) = filter(&once, &cfg);
        prop_assert_eq!(&once, &twice);
        prop_assert!(stats.filtered <= stats.raw);
        prop_assert!((0.0..=100.0).contains(&stats.percent));
    }

    #[test]
    fn csv_round_trip(d in dataset()) {
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_std(d in dataset()) {
        prop_assume!(d.rows.len() >= 2);
        let Ok((z, _)) = standardize(&d) else { return Ok(()) };
        let n = z.rows.len() as f64;
        for j in 0..z.feature_names.len() {
            let mean = z.rows.iter().map(|r| r.features[j]).sum::<f64>() / n;
            let var = z.rows.iter().map(|r| (r.features[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn estimate_scales_with_invocations(
        tb in 1.0f64..500.0,
        avgs in prop::collection::vec(1.0f64..500.0, 0..6),
        i in 1u64..1000,
        k in 1u64..50,
    ) {
        let rec = |inv: u64| MethodRecord {
            benchmark: "b".into(),
            function: "m".into(),
            unit_id: 0,
            invocations: inv,
            baseline_avg: tb,
            decisions: avgs
                .iter()
                .enumerate()
                .map(|(d, &t)| DecisionRecord {
                    loop_id: Some(LoopId(d as u32)),
                    phase: Phase::Peel,
                    averages: [(0, tb), (1, t)].into_iter().collect(),
                })
                .collect(),
        };
        let ones = vec![1; avgs.len()];
        let zeros = vec![0; avgs.len()];
        let a = estimate_method(&rec(i), &ones).unwrap();
        let b = estimate_method(&rec(i * k), &ones).unwrap();
        prop_assert!((b - a * k as f64).abs() <= 1e-9 * b.abs().max(1.0));
        prop_assert_eq!(estimate_method(&rec(i), &zeros).unwrap(), i as f64 * tb);
    }

    #[test]
    fn argmax_ignores_positive_scaling(p in prop::collection::vec(-10.0f64..10.0, 6), c in 0.001f64..1000.0) {
        let fs = [1, 2, 4, 8, 16, 32];
        let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
        prop_assert_eq!(argmax_factor(&fs, &p), argmax_factor(&fs, &scaled));
    }

    #[test]
    fn alternation_is_fair(n in 2usize..8, calls in 0usize..300) {
        let prog = parse("fn f() { return 1; }").unwrap();
        let f = prog.function("f").unwrap();
        let mut storage = PerfStorage::default();
        let base = storage.alloc_unit(n).unwrap();
        let forks = (0..n)
            .map(|k| forklab_core::selftime::instrument(f, base, k, OutlierConfig::disabled()).unwrap())
            .collect();
        let d = forklab_core::forking::recombine(0, forks, base).unwrap();
        let mut m = Machine::interpreter(&prog, Clock::virtual_clock()).with_storage(storage);
        m.install("f", forklab_core::runtime::Code::Dispatch(std::rc::Rc::new(d)));
        for _ in 0..calls {
            m.call("f", &[]).unwrap();
        }
        for k in 0..n {
            let want = (calls / n + usize::from(k < calls % n)) as u64;
            prop_assert_eq!(m.storage().invocations(base, k), want);
        }
    }

    #[test]
    fn rejected_samples_change_nothing(
        normal in prop::collection::vec(50u64..150, 30..120),
        spikes in prop::collection::vec((0usize..120, 2_000u64..1_000_000), 0..40),
    ) {
        let cfg = OutlierConfig::default();
        let mut clean = PerfStorage::default();
        let mut noisy = PerfStorage::default();
        let cb = clean.alloc_unit(2).unwrap();
        let nb = noisy.alloc_unit(2).unwrap();
        for (i, &t) in normal.iter().enumerate() {
            if i >= cfg.warmup as usize {
                for &(at, spike) in spikes.iter().filter(|(at, _)| *at == i) {
                    let _ = at;
                    prop_assert!(!noisy.record_exit(nb, 1, spike, &cfg));
                }
            }
            clean.record_exit(cb, 1, t, &cfg);
            noisy.record_exit(nb, 1, t, &cfg);
        }
        prop_assert_eq!(clean.invocations(cb, 1), noisy.invocations(nb, 1));
        prop_assert_eq!(clean.total_time(cb, 1), noisy.total_time(nb, 1));
    }

    #[test]
    fn geomean_is_homogeneous(xs in prop::collection::vec(0.01f64..100.0, 1..20), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let (g, gs) = (geomean(&xs).unwrap(), geomean(&scaled).unwrap());
        prop_assert!((gs - c * g).abs() <= 1e-12 * gs.max(1.0) * 10.0);
    }

    #[test]
    fn classes_partition(applied in any::<bool>(), s in 0.001f64..1000.0) {
        let c = classify(applied, s);
        prop_assert_eq!(c == Class::FP, applied && s < 1.0);
        prop_assert_eq!(c == Class::FN, !applied && s > 1.0);
        prop_assert_eq!(c == Class::TP, applied && s >= 1.0);
        prop_assert_eq!(c == Class::TN, !applied && s <= 1.0);
    }

    #[test]
    fn ranksum_is_symmetric(
        a in prop::collection::vec(0i32..20, 1..15),
        b in prop::collection::vec(0i32..20, 1..15),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let (ab, ba) = (ranksum_test(&a, &b), ranksum_test(&b, &a));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!(ab.p > 0.0 && ab.p <= 1.0);
    }
}

/// Every tie-free split of 0..n+m with two or more values per side and
/// five or more overall. A single-value side or a 2+2 split can differ by
/// up to 0.13; see the README.
#[test]
fn exact_and_normal_p_agree_for_small_samples() {
    let mut worst: f64 = 0.0;
    for total in 5..=12usize {
        for n in 2..=total - 2 {
            for mask in 0u32..(1 << total) {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let a: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i as f64).collect();
                let b: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 0).map(|i| i as f64).collect();
                let gap = (ranksum_exact(&a, &b).p - ranksum_normal(&a, &b).p).abs();
                worst = worst.max(gap);
            }
        }
    }
    assert!(worst <= 0.06, "worst gap {worst}");
}
