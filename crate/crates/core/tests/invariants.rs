use std::sync::OnceLock;

use pcombine_core::combiners::{afp_stat, afz_stat};
use pcombine_core::metapipe::{association_measure, fit_feature_regression, run_meta, synth_studies, MetaConfig, SynthConfig};
use pcombine_core::nulldist::build_null_table;
use pcombine_core::{Engine, Method, MethodSpec, Observation, OneSidedPair, PValueVector, TableSettings};
use proptest::prelude::*;

fn engine() -> &'static Engine {
    static ENGINE: OnceLock<Engine> = OnceLock::new();
    ENGINE.get_or_init(|| Engine::new(TableSettings::new(2_000, 17)))
}

fn pvalues() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0f64..=1.0, 1e-12f64..1e-3], 2..7)
}

fn observation(u: &[f64]) -> Observation {
    let two = PValueVector::new(u.iter().map(|x| (2.0 * x.min(1.0 - x)).min(1.0)).collect()).unwrap();
    let left = PValueVector::new(u.to_vec()).unwrap();
    let right = PValueVector::new(u.iter().map(|x| 1.0 - x).collect()).unwrap();
    Observation::both(two, OneSidedPair::new(left, right).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combined_pvalues_lie_in_unit_interval(u in pvalues()) {
        let obs = observation(&u);
        for m in [Method::Fisher, Method::Stouffer, Method::MinP, Method::AFp, Method::AFz, Method::Cauchy,
                  Method::HC, Method::BJ, Method::Pearson, Method::FE, Method::FECS] {
            let r = engine().combine(&MethodSpec::new(m), &obs).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.pvalue), "{m}: {}", r.pvalue);
        }
    }

    #[test]
    fn selected_weights_mark_the_smallest_pvalues(u in pvalues()) {
        let obs = observation(&u);
        for m in [Method::AFp, Method::AFz] {
            let r = engine().combine(&MethodSpec::new(m), &obs).unwrap();
            let w = r.selected_weights.unwrap();
            let j = r.j_star.unwrap();
            prop_assert_eq!(w.len(), u.len());
            prop_assert_eq!(w.iter().filter(|b| **b).count(), j);
            let p = obs.two_sided_values().unwrap().values();
            let max_in = p.iter().zip(&w).filter(|(_, b)| **b).map(|(v, _)| *v).fold(0.0, f64::max);
            let min_out = p.iter().zip(&w).filter(|(_, b)| !**b).map(|(v, _)| *v).fold(1.0, f64::min);
            prop_assert!(max_in <= min_out);
        }
    }

    #[test]
    fn adaptive_traces_are_sorted_permutations(v in pvalues()) {
        let p = PValueVector::new(v).unwrap();
        for stat in [afp_stat(&p), afz_stat(&p)] {
            let t = &stat.trace;
            prop_assert_eq!(t.partial_stats.len(), p.len());
            prop_assert!(t.ordered_p.windows(2).all(|w| w[0] <= w[1]));
            let mut order = t.order.clone();
            order.sort();
            prop_assert_eq!(order, (0..p.len()).collect::<Vec<_>>());
            for (r, &i) in t.order.iter().enumerate() {
                prop_assert_eq!(t.ordered_p[r], p.values()[i]);
            }
            prop_assert_eq!(stat.statistic, t.partial_stats[stat.j_star - 1]);
        }
    }

    #[test]
    fn regression_tails_are_complementary(
        y in prop::collection::vec(-5.0f64..5.0, 6..15),
        shift in -1.0f64..1.0,
    ) {
        let m = y.len();
        let age: Vec<f64> = (0..m).map(|i| 1.0 + i as f64 * 1.5).collect();
        let sex: Vec<f64> = (0..m).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = y.iter().zip(&age).map(|(v, a)| v + shift * a).collect();
        let fit = fit_feature_regression(&y, &age, &sex).unwrap();
        prop_assert!((fit.p_left + fit.p_right - 1.0).abs() <= 1e-9);
        prop_assert!((fit.p_two - (2.0 * fit.p_left.min(fit.p_right)).min(1.0)).abs() <= 1e-12);
    }

    #[test]
    fn association_sign_follows_beta(beta in -3.0f64..3.0, p in 1e-10f64..1.0) {
        let sign: i8 = if beta < 0.0 { -1 } else { 1 };
        let e = association_measure(sign, p, 1.0 - p);
        let min = p.min(1.0 - p);
        if min < 1.0 {
            prop_assert_eq!(e > 0.0, sign > 0);
        }
    }
}

#[test]
fn null_tables_are_sorted_and_reproducible() {
    for m in [Method::AFp, Method::HC, Method::OTFsoft] {
        let spec = MethodSpec::new(m);
        let a = build_null_table(&spec, 4, 1_000, 3).unwrap();
        let b = build_null_table(&spec, 4, 1_000, 3).unwrap();
        assert_eq!(a.stats().len(), 1_000);
        assert!(a.stats().windows(2).all(|w| w[0] <= w[1]));
        let bits = |t: &pcombine_core::NullTable| t.stats().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn pipeline_rows_satisfy_result_invariants() {
    let mut config = SynthConfig::preset("mixed", 3).unwrap();
    config.signals.truncate(60);
    let synth = synth_studies(&config).unwrap();
    let methods = [MethodSpec::new(Method::Fisher), MethodSpec::new(Method::FECS)];
    let out = run_meta(engine(), &synth.studies, &methods, &MetaConfig::default()).unwrap();
    assert_eq!(out.features.len(), 60);
    assert!(out.features.windows(2).all(|w| w[0].feature_id < w[1].feature_id));
    for f in &out.features {
        assert!(f.s_sign.unsigned_abs() as usize <= synth.studies.len());
        for s in &f.studies {
            assert!((s.fit.p_left + s.fit.p_right - 1.0).abs() <= 1e-9);
        }
        for key in &out.methods {
            // m p / m can round one ulp below p
            assert!(f.q_value[key] >= f.combined_p[key] * (1.0 - 4.0 * f64::EPSILON));
        }
    }
}
