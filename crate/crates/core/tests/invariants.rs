use approx::assert_abs_diff_eq;
use lifeline::archimedean::{arch_diagonal, GeneratorSpec};
use lifeline::convert::{min_survival_by_counts, min_survival_weighted, survivor_count_pmf};
use lifeline::copulas::{cyclic_alpha, extend_cyclic, Copula};
use lifeline::loadsharing::{
    generate_singleton_min_stable, necessary_min_stable, ordering_probabilities, ExThls,
};
use lifeline::model::Quantity;
use lifeline::montecarlo::{read_batch, write_batch, SampleBatch};
use proptest::prelude::*;

fn totals() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=5).prop_flat_map(|r| prop::collection::vec(0.2f64..5.0, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orderstats_are_ordered_and_counts_sum_to_one(l in totals(), t in 0.0f64..6.0) {
        let ex = ExThls::new(l).unwrap();
        let os = ex.orderstat_family();
        let r = os.r();
        for k in 1..r {
            prop_assert!(os.survival(k, t) <= os.survival(k + 1, t) + 1e-12);
        }
        let total: f64 = (0..=r).map(|h| survivor_count_pmf(&os, h, t).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for d in 1..=r {
            let a = min_survival_weighted(&os, d, t);
            assert_abs_diff_eq!(a, min_survival_by_counts(&os, d, t), epsilon = 1e-10);
            assert_abs_diff_eq!(a, ex.min_survival(d, t).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn generated_models_keep_their_totals(
        l in prop::collection::vec(0.2f64..5.0, 3..=4),
        seed in any::<u64>(),
    ) {
        let g = generate_singleton_min_stable(&l, seed, false).unwrap();
        prop_assert!(necessary_min_stable(&g.spec).pass);
        let probs = ordering_probabilities(&g.spec);
        let sum: f64 = probs.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        for (order, _) in probs {
            for k in 0..order.len() {
                assert_abs_diff_eq!(g.spec.total(&order[..k]), l[k], epsilon = 1e-9 * l[k]);
            }
        }
    }

    #[test]
    fn clayton_sections_lie_between_bounds(theta in 0.1f64..5.0, u in 0.01f64..0.99, ell in 2usize..6) {
        let g = GeneratorSpec::clayton(theta).unwrap();
        let d = arch_diagonal(&g, ell, u).unwrap();
        // Frechet bounds of an ell-copula diagonal
        prop_assert!(d <= u + 1e-15);
        prop_assert!(d >= (ell as f64 * u - (ell - 1) as f64).max(0.0) - 1e-15);
        prop_assert!(arch_diagonal(&g, ell, (u + 0.005).min(1.0)).unwrap() >= d);
    }

    #[test]
    fn skew_fgm_respects_frechet_bounds(theta in -3.0f64..=1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let c = Copula::skew_fgm(theta).unwrap();
        let x = c.eval(&[u, v]);
        prop_assert!(x <= u.min(v) + 1e-15);
        prop_assert!(x >= (u + v - 1.0).max(0.0) - 1e-15);
    }

    #[test]
    fn cyclic_weights_form_a_probability_row(n in 3usize..12) {
        let a = cyclic_alpha(n);
        prop_assert_eq!(a[n][1], 1.0);
        for d in 2..=n {
            prop_assert!((0.0..=1.0).contains(&a[n][d]));
            prop_assert!(a[n][d] <= a[n][d - 1]);
        }
    }

    #[test]
    fn cyclic_extension_keeps_margins(theta in -1.0f64..=1.0, u in 0.0f64..=1.0) {
        let seed = Copula::skew_fgm(theta).unwrap();
        let (c3, _) = extend_cyclic(&seed, None).unwrap();
        assert_abs_diff_eq!(c3.eval(&[u, 1.0, 1.0]), u, epsilon = 1e-14);
        assert_abs_diff_eq!(c3.eval(&[1.0, 1.0, u]), u, epsilon = 1e-14);
    }

    #[test]
    fn quantities_print_and_parse(k in 1usize..=5, units in prop::sample::subsequence(vec![0usize, 1, 2, 3, 4], 1..=5)) {
        for q in [Quantity::OrderStat(k), Quantity::Min(k), Quantity::Mu(k), Quantity::Survivor(units.clone())] {
            prop_assert_eq!(Quantity::parse(&q.to_string(), 5).unwrap(), q);
        }
    }

    #[test]
    fn batches_survive_csv(rows in prop::collection::vec(prop::collection::vec(1e-300f64..1e300, 3), 1..20)) {
        let batch = SampleBatch { seed: 9, fingerprint: "x:1".into(), rows, resampled_ties: 2 };
        let mut buf = Vec::new();
        write_batch(&batch, &mut buf).unwrap();
        let back = read_batch(buf.as_slice()).unwrap();
        prop_assert_eq!(back, batch);
    }
}
