//! Randomized invariant suites for the trust pipeline.

use adaptrust::domain::IndicatorVector;
use adaptrust::eval::{evaluate_pipeline, metrics, split_dataset, PipelineConfig};
use adaptrust::models::{predict_service_indicators, predict_usage_expectations, TrainedModelPair};
use adaptrust::multiuse::{
    aggregate_average, aggregate_closeness, aggregate_closeness_weighted, fairness,
    usage_significance, GridSpec,
};
use adaptrust::nnet::{gradient_check, Network, TrainConfig, TrainSample};
use adaptrust::synth::{
    generate_dataset, load_dataset, load_model_pair, save_dataset, save_model_pair,
    GeneratorConfig,
};
use adaptrust::trust::{adaptive_trust, trust_level};
use proptest::prelude::*;

fn unit_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, len)
}

fn expectation_set(k: usize, n: usize) -> impl Strategy<Value = Vec<IndicatorVector>> {
    prop::collection::vec(unit_vec(k).prop_map(IndicatorVector), n)
}

/// Brute-force minimax spread at ten-times-finer resolution.
fn fine_grid_best(values: &[f64], weights: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        let mut g = 0.0f64;
        let mut h = f64::INFINITY;
        for (x, w) in values.iter().zip(weights) {
            let d = w * (p - x).abs();
            g = g.max(d);
            h = h.min(d);
        }
        best = best.min(g - h);
    }
    best
}

fn coarse_spread(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut g = 0.0f64;
    let mut h = f64::INFINITY;
    for (x, w) in values.iter().zip(weights) {
        let d = w * (p - x).abs();
        g = g.max(d);
        h = h.min(d);
    }
    g - h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adaptive_trust_stays_in_range(
        f_s in unit_vec(4),
        f_u in unit_vec(4).prop_filter("positive expectation", |v| v.iter().sum::<f64>() > 0.0),
    ) {
        let t = adaptive_trust(&IndicatorVector(f_s), &IndicatorVector(f_u)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
    }

    #[test]
    fn adaptive_trust_is_monotone_in_service_components(
        f_s in unit_vec(4),
        f_u in unit_vec(4).prop_filter("positive expectation", |v| v.iter().sum::<f64>() > 0.0),
        idx in 0usize..4,
        bump in 0.0..=1.0f64,
    ) {
        let base = adaptive_trust(&IndicatorVector(f_s.clone()), &IndicatorVector(f_u.clone())).unwrap();
        let mut raised = f_s;
        raised[idx] = (raised[idx] + bump).min(1.0);
        let after = adaptive_trust(&IndicatorVector(raised), &IndicatorVector(f_u)).unwrap();
        prop_assert!(after + 1e-12 >= base);
    }

    #[test]
    fn adaptive_trust_saturates_exactly_on_dominance(
        f_u in unit_vec(4).prop_filter("positive expectation", |v| v.iter().sum::<f64>() > 0.0),
        slack in unit_vec(4),
    ) {
        let dominating: Vec<f64> = f_u
            .iter()
            .zip(&slack)
            .map(|(u, s)| (u + s * (1.0 - u)).min(1.0))
            .collect();
        let t = adaptive_trust(&IndicatorVector(dominating), &IndicatorVector(f_u.clone())).unwrap();
        prop_assert!((t - 1.0).abs() < 1e-12);
        // Strictly undercutting the largest expectation breaks saturation.
        let (argmax, max) = f_u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, v)| (i, *v))
            .unwrap();
        prop_assume!(max > 1e-6);
        let mut short = f_u.clone();
        short[argmax] = max / 2.0;
        let t = adaptive_trust(&IndicatorVector(short), &IndicatorVector(f_u)).unwrap();
        prop_assert!(t < 1.0);
    }

    #[test]
    fn trust_level_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(trust_level(lo).unwrap() <= trust_level(hi).unwrap());
    }

    #[test]
    fn fairness_is_in_range_and_permutation_invariant(
        agg in unit_vec(3),
        exps in expectation_set(3, 5),
    ) {
        let agg = IndicatorVector(agg);
        let f = fairness(&agg, &exps).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        let mut rotated = exps.clone();
        rotated.rotate_left(2);
        prop_assert!((fairness(&agg, &rotated).unwrap() - f).abs() < 1e-12);
        let mut reversed = exps;
        reversed.reverse();
        prop_assert!((fairness(&agg, &reversed).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn closeness_is_grid_optimal_against_finer_brute_force(
        exps in expectation_set(2, 4),
    ) {
        let grid = GridSpec::default();
        let result = aggregate_closeness(&exps, &grid).unwrap();
        let weights = vec![1.0; exps.len()];
        for indicator in 0..2 {
            let values: Vec<f64> = exps.iter().map(|e| e.values()[indicator]).collect();
            if values.iter().all(|v| *v == values[0]) {
                prop_assert_eq!(result.vector.values()[indicator], values[0]);
                continue;
            }
            let fine = fine_grid_best(&values, &weights);
            let [lo, hi] = result.per_indicator_optimal_range[indicator];
            // No finer-grid point may beat the coarse optimum by more than
            // one coarse step of slack (the objective is 2-Lipschitz).
            for p in [lo, hi] {
                prop_assert!(coarse_spread(&values, &weights, p) <= fine + 0.02 + 1e-9);
            }
        }
    }

    #[test]
    fn uniform_significances_preserve_argmin_sets(
        exps in expectation_set(3, 4),
    ) {
        let grid = GridSpec::default();
        let unweighted = aggregate_closeness(&exps, &grid).unwrap();
        let uniform = vec![1.0 / exps.len() as f64; exps.len()];
        let weighted = aggregate_closeness_weighted(&exps, &uniform, &grid).unwrap();
        prop_assert_eq!(
            unweighted.per_indicator_optimal_range,
            weighted.per_indicator_optimal_range
        );
    }

    #[test]
    fn average_aggregation_is_permutation_invariant(exps in expectation_set(3, 5)) {
        let a = aggregate_average(&exps).unwrap();
        let mut rotated = exps;
        rotated.rotate_left(3);
        let b = aggregate_average(&rotated).unwrap();
        for (x, y) in a.vector.values().iter().zip(b.vector.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn significances_form_a_distribution(durations in prop::collection::vec(0.01..100.0f64, 1..6)) {
        let s = usage_significance(&durations).unwrap();
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(s.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn metrics_are_permutation_invariant(
        pairs in prop::collection::vec((1u8..=10, 1u8..=10), 2..40),
        rot in 0usize..40,
    ) {
        let predicted: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let actual: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let a = metrics(&predicted, &actual).unwrap();
        let mut rotated = pairs;
        let rot = rot % rotated.len();
        rotated.rotate_left(rot);
        let predicted: Vec<u8> = rotated.iter().map(|p| p.0).collect();
        let actual: Vec<u8> = rotated.iter().map(|p| p.1).collect();
        let b = metrics(&predicted, &actual).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn backpropagation_matches_finite_differences(
        seed in any::<u64>(),
        hidden in 2usize..6,
        inputs in 1usize..4,
        outputs in 1usize..3,
    ) {
        let net = Network::new(&[inputs, hidden, outputs], seed).unwrap();
        let input: Vec<f64> = (0..inputs).map(|i| (i as f64 * 0.37 + 0.1) % 1.0).collect();
        let target = vec![0.8; outputs];
        let sample = TrainSample::fully_labeled(input, target);
        let err = gradient_check(&net, &sample, 1e-5).unwrap();
        prop_assert!(err < 1e-4, "gradient mismatch {err}");
    }

    #[test]
    fn dataset_files_round_trip(
        k in 1usize..4,
        services in 2usize..8,
        extra_usages in 0usize..5,
        noise in 0.0..0.3f64,
        seed in any::<u64>(),
    ) {
        let config = GeneratorConfig {
            indicator_count: k,
            num_services: services,
            num_usages: k + extra_usages,
            noise_std: noise,
            seed,
            multi_use_items: 0,
        };
        let (dataset, _, _) = generate_dataset(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = dir.path().join("ratings.csv");
        let s = dir.path().join("services.json");
        let u = dir.path().join("usages.json");
        save_dataset(&dataset, &r, &s, &u).unwrap();
        prop_assert_eq!(load_dataset(&r, &s, &u).unwrap(), dataset);
    }

    #[test]
    fn model_files_round_trip(seed in any::<u64>(), hidden in 2usize..10) {
        let config = GeneratorConfig {
            indicator_count: 2,
            num_services: 4,
            num_usages: 4,
            noise_std: 0.0,
            seed,
            multi_use_items: 0,
        };
        let (dataset, _, _) = generate_dataset(&config).unwrap();
        let pair = TrainedModelPair {
            service_model: Network::new(&[dataset.schema.encoded_width(), hidden, 2], seed).unwrap(),
            usage_model: Network::new(&[2, hidden, 2], seed.wrapping_add(1)).unwrap(),
            schema: dataset.schema.clone(),
            vocabulary: adaptrust::models::build_metadata_vocabulary(&dataset.usages).unwrap(),
            indicator_count: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        save_model_pair(&pair, dir.path()).unwrap();
        let loaded = load_model_pair(dir.path()).unwrap();
        prop_assert_eq!(&loaded, &pair);
        let service = &dataset.services[0];
        prop_assert_eq!(
            predict_service_indicators(&pair, service).unwrap(),
            predict_service_indicators(&loaded, service).unwrap()
        );
        let usage = &dataset.usages[0];
        prop_assert_eq!(
            predict_usage_expectations(&pair, usage).unwrap(),
            predict_usage_expectations(&loaded, usage).unwrap()
        );
    }

    #[test]
    fn split_is_deterministic_per_seed(seed in any::<u64>(), data_seed in any::<u64>()) {
        let config = GeneratorConfig {
            indicator_count: 2,
            num_services: 6,
            num_usages: 4,
            noise_std: 0.1,
            seed: data_seed,
            multi_use_items: 0,
        };
        let (dataset, _, _) = generate_dataset(&config).unwrap();
        let (a_train, a_test) = split_dataset(&dataset, 0.8, seed).unwrap();
        let (b_train, b_test) = split_dataset(&dataset, 0.8, seed).unwrap();
        prop_assert_eq!(a_train.ratings, b_train.ratings);
        prop_assert_eq!(a_test.ratings, b_test.ratings);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn full_pipeline_reports_are_bit_identical_per_seed(seed in any::<u64>()) {
        let config = GeneratorConfig {
            indicator_count: 2,
            num_services: 10,
            num_usages: 4,
            noise_std: 0.05,
            seed,
            multi_use_items: 0,
        };
        let (dataset, _, _) = generate_dataset(&config).unwrap();
        let pc = PipelineConfig {
            hidden: 4,
            service_train: TrainConfig {
                learning_rate: 1.0,
                epochs: 40,
                batch_size: 16,
                seed: 42,
            },
            usage_train: TrainConfig {
                learning_rate: 1.0,
                epochs: 40,
                batch_size: usize::MAX,
                seed: 43,
            },
            ..PipelineConfig::default()
        };
        let a = evaluate_pipeline(&dataset, &pc).unwrap();
        let b = evaluate_pipeline(&dataset, &pc).unwrap();
        prop_assert_eq!(a, b);
    }
}
