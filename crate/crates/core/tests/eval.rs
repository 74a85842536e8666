use polytune::codegen::{KernelSpec, OpCensus, Strides};
use polytune::eval::{
    evaluate_interpreted, host_supports_native, AnalyticCostModel, Backend, EvalError, Evaluator, GemmInputs, Memoized,
    NativeConfig, NativeEvaluator, TileTrafficModel,
};
use polytune::reuse::CacheHierarchy;
use polytune::variants::{Dim, VariantDescriptor};
use proptest::prelude::*;

fn spec(ui: usize, uj: usize, uk: usize, n: usize, k: usize) -> KernelSpec {
    KernelSpec::new(ui, uj, uk, Strides::dense(n, k))
}

#[test]
fn analytic_cycles_from_census() {
    let model = AnalyticCostModel::default();
    let s = spec(1, 16, 1, 16, 16);
    let c = OpCensus::of(&s, 16, 16, 16);
    // 256 FMAs, B loads and broadcasts, 16 C load/store pairs, 16 + 256 loop
    // iterations and no residue.
    let expected = (256.0 * 3.0 + 32.0) + (16.0 + 256.0);
    assert_eq!(c.outer_iterations + c.inner_iterations, 272);
    let r = model.evaluate(&s, 16, 16, 16).unwrap();
    assert_eq!(r.raw_time, expected * 1e-9);
    assert_eq!(r.performance, 2.0 * 4096.0 / expected);
    assert_eq!(r.backend, Backend::Analytic);
}

#[test]
fn residue_costs_more_per_flop() {
    let model = AnalyticCostModel::default();
    let full = model.evaluate(&spec(2, 32, 2, 64, 64), 64, 64, 64).unwrap().performance;
    let tail = model.evaluate(&spec(2, 32, 2, 70, 64), 64, 70, 64).unwrap().performance;
    assert!(tail < full);
}

#[test]
fn infeasible_specs_rejected() {
    let model = AnalyticCostModel::default();
    assert!(matches!(model.evaluate(&spec(8, 64, 8, 64, 64), 64, 64, 64), Err(EvalError::Infeasible(_))));
    assert!(matches!(model.evaluate(&spec(1, 16, 1, 64, 64), 0, 64, 64), Err(EvalError::InvalidArgument(_))));
}

#[test]
fn interpreted_examples() {
    evaluate_interpreted(&spec(1, 16, 1, 16, 16), &GemmInputs::random(16, 16, 16, 3)).unwrap();
    evaluate_interpreted(&spec(2, 16, 2, 17, 3), &GemmInputs::random(5, 17, 3, 4)).unwrap();
}

#[test]
fn memoized_evaluator_caches() {
    let memo = Memoized::new(AnalyticCostModel::default());
    let s = spec(2, 32, 2, 34, 34);
    let a = memo.evaluate(&s, 34, 34, 34).unwrap();
    let b = memo.evaluate(&s, 34, 34, 34).unwrap();
    assert_eq!(a, b);
    assert_eq!(memo.cached(), 1);
}

#[test]
fn traffic_model_prefers_cache_resident_tiles() {
    let cache = CacheHierarchy::cascade_lake();
    let m = TileTrafficModel::default();
    let ext = [2048, 2048, 2048];
    let order = [Dim::I, Dim::J, Dim::K];
    let good = VariantDescriptor::new(order, [256, 256, 256], [32, 32, 32]);
    let bad = VariantDescriptor::new(order, [2048, 2048, 2048], [2048, 2048, 2048]);
    assert!(m.performance(&good, ext, &cache) > m.performance(&bad, ext, &cache));
}

#[test]
fn native_backend_checks_and_times() {
    let config = NativeConfig { repetitions: 5, ..Default::default() };
    if let Err(e) = host_supports_native(&config) {
        eprintln!("skipping native backend test: {e}");
        return;
    }
    let native = NativeEvaluator::new(config);
    for (s, m, n, k) in [(spec(2, 16, 2, 17, 3), 5, 17, 3), (spec(4, 32, 1, 70, 29), 13, 70, 29)] {
        let worst = native.check_against_interpreter(&s, &GemmInputs::random(m, n, k, 9)).unwrap();
        assert!(worst <= 1e-4);
    }
    let r = native.evaluate(&spec(2, 32, 2, 64, 64), 64, 64, 64).unwrap();
    assert!(r.performance > 0.0 && r.correctness_checked);
    let s = native.evaluate_scalar(&spec(2, 32, 2, 64, 64), 64, 64, 64).unwrap();
    assert!(s.performance > 0.0);
}

#[test]
fn broken_compiler_reports_toolchain_error() {
    let config = NativeConfig {
        compiler: ["gcc", "-DSYNTAX_ERROR=", "-include", "/nonexistent.h", "-o", "{bin}", "{src}"]
            .map(String::from)
            .to_vec(),
        repetitions: 1,
        ..Default::default()
    };
    if host_supports_native(&NativeConfig::default()).is_err() {
        return;
    }
    let r = NativeEvaluator::new(config).evaluate(&spec(1, 16, 1, 16, 16), 16, 16, 16);
    assert!(matches!(r, Err(EvalError::Toolchain { .. })), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn analytic_is_positive_and_pure(
        ui in 1usize..=4, ujv in 1usize..=2, uk in 1usize..=4,
        m in 1usize..=200, n in 1usize..=200, k in 1usize..=200,
    ) {
        let model = AnalyticCostModel::default();
        let s = spec(ui, 16 * ujv, uk, n, k);
        let a = model.evaluate(&s, m, n, k).unwrap();
        let b = model.evaluate(&s, m, n, k).unwrap();
        prop_assert!(a.performance > 0.0 && a.performance.is_finite());
        prop_assert_eq!(a.performance.to_bits(), b.performance.to_bits());
    }
}
