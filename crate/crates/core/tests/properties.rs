//! Randomised invariants of the solver, the estimators and the pipeline.

mod common;

use common::{image_instance, line_instance};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfit_core::geometry::least_squares_fit;
use rfit_core::influence::{
    exact_influence_full, exact_influence_k_subset, hoeffding_bound, influence_from_table,
    normalize, sample_influence_classical, within_delta_fraction,
};
use rfit_core::lattice::{build_truth_table_naive, is_monotone};
use rfit_core::minimax::SolverConfig;
use rfit_core::oracle::{FeasibilityOracle, FnOracle};
use rfit_core::pipeline::{
    consensus, generate, robust_fit, threshold_mask, FitOptions, GeneratorParams, Method,
};
use rfit_core::quantum::{build_dataset_table, bv_sample, fwht_spectrum, OracleTable};
use rfit_core::{Dataset, ModelKind, SubsetMask};

const CAP: usize = 20;

/// Up-closure of `generators`: `f(z) = 1` iff `z` contains one of them.
fn monotone_table(n: usize, generators: &[u64]) -> Vec<bool> {
    (0..1u64 << n)
        .map(|t| generators.iter().any(|&g| g != 0 && t & g == g))
        .collect()
}

fn monotone_function() -> impl Strategy<Value = (usize, Vec<u64>)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), prop::collection::vec(1u64..1 << n, 0..6)))
}

fn model_kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Line2D),
        Just(ModelKind::Triangulation),
        Just(ModelKind::Homography),
    ]
}

fn instance(kind: ModelKind, n: usize, inliers: usize, seed: u64) -> rfit_core::pipeline::Instance {
    match kind {
        ModelKind::Line2D => line_instance(n, inliers, seed),
        _ => image_instance(kind, n, inliers, seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn g_is_monotone_under_inclusion(
        kind in model_kind(),
        seed in 0u64..1000,
        small in any::<u16>(),
        extra in any::<u16>(),
    ) {
        let n = 9;
        let inst = instance(kind, n, 6, seed);
        let data = inst.dataset().unwrap();
        let cfg = SolverConfig::default();
        let b = SubsetMask::from_index(u64::from(small) & 0x1ff, n);
        let c = SubsetMask::from_index((u64::from(small) | u64::from(extra)) & 0x1ff, n);
        prop_assert!(b.is_subset_of(&c));
        let gb = data.solve(&b, &cfg).unwrap().value;
        let gc = data.solve(&c, &cfg).unwrap().value;
        prop_assert!(gb <= gc + 2.0 * cfg.tol, "g(B) = {gb} > g(C) = {gc}");
    }

    #[test]
    fn f_tables_are_monotone(kind in model_kind(), seed in 0u64..1000, n in 3usize..=7) {
        let inst = instance(kind, n, n / 2 + 1, seed);
        let data = inst.dataset().unwrap();
        let table = build_truth_table_naive(&FeasibilityOracle::new(&data, inst.eps), CAP).unwrap();
        prop_assert!(!table[0]);
        prop_assert!(is_monotone(&table));
    }

    #[test]
    fn exact_influence_commutes_with_permutations(seed in 0u64..1000, shuffle in any::<u64>()) {
        let n = 8;
        let inst = line_instance(n, 5, seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let permuted: Vec<_> = order.iter().map(|&i| inst.points[i].clone()).collect();

        let data = inst.dataset().unwrap();
        let data_p = Dataset::new(ModelKind::Line2D, &permuted).unwrap();
        let (alpha, _) = exact_influence_full(&FeasibilityOracle::new(&data, inst.eps), CAP).unwrap();
        let (alpha_p, _) =
            exact_influence_full(&FeasibilityOracle::new(&data_p, inst.eps), CAP).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(alpha_p.alphas[j], alpha.alphas[i]);
        }
    }

    #[test]
    fn duplicated_points_get_equal_influence(
        kind in model_kind(),
        seed in 0u64..1000,
        which in 0usize..7,
    ) {
        let inst = instance(kind, 7, 4, seed);
        let mut points = inst.points.clone();
        points.push(points[which].clone());
        let data = Dataset::new(kind, &points).unwrap();
        let (alpha, _) = exact_influence_full(&FeasibilityOracle::new(&data, inst.eps), CAP).unwrap();
        prop_assert_eq!(alpha.alphas[which], alpha.alphas[7]);
    }

    #[test]
    fn influences_are_even_multiples_of_the_lattice_step((n, generators) in monotone_function()) {
        let table = monotone_table(n, &generators);
        let alphas = influence_from_table(&table).unwrap();
        let size = (1u64 << n) as f64;
        for a in alphas {
            prop_assert!((0.0..=1.0).contains(&a));
            let flips = a * size;
            prop_assert_eq!(flips.fract(), 0.0);
            prop_assert_eq!(flips as u64 % 2, 0);
        }
    }

    #[test]
    fn parseval_and_fourier_influence((n, generators) in monotone_function()) {
        let table = monotone_table(n, &generators);
        let spec = fwht_spectrum(&OracleTable::from_bits(table.clone(), None).unwrap());
        prop_assert!((spec.parseval_sum() - 1.0).abs() <= 1e-12);
        let from_spec = rfit_core::quantum::influence_from_spectrum(&spec).unwrap();
        let from_table = influence_from_table(&table).unwrap();
        for (a, b) in from_spec.alphas.iter().zip(&from_table) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn threshold_mask_grows_with_gamma(
        alphas in prop::collection::vec(0.0f64..1.0, 1..30),
        g1 in 0.0f64..1.0,
        g2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let norm = normalize(&alphas);
        let a = threshold_mask(&norm, lo);
        let b = threshold_mask(&norm, hi);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
    }

    #[test]
    fn k_subset_expectation_is_the_mean_indicator(
        (n, generators) in monotone_function(),
        k_frac in 0.0f64..1.0,
    ) {
        let k = ((n as f64 * k_frac) as usize).min(n);
        let table = monotone_table(n, &generators);
        let oracle = FnOracle::new(n, |z: &SubsetMask| table[z.to_index().unwrap() as usize]);
        let exact = exact_influence_k_subset(&oracle, k).unwrap();
        let subsets: Vec<usize> = (0..1usize << n).filter(|t| t.count_ones() as usize == k).collect();
        for i in 0..n {
            let flips = subsets.iter().filter(|&&t| table[t] != table[t ^ 1 << i]).count();
            let mean = flips as f64 / subsets.len() as f64;
            prop_assert!((exact.alphas[i] - mean).abs() <= 1e-15);
        }
    }

    #[test]
    fn generator_is_deterministic(kind in model_kind(), seed in any::<u64>(), n in 4usize..30) {
        let params = GeneratorParams {
            kind,
            n,
            inliers: n * 2 / 3,
            sigma: if kind == ModelKind::Line2D { 0.1 } else { 1.0 },
            spread: if kind == ModelKind::Line2D { 10.0 } else { 640.0 },
            seed,
        };
        let a = generate(&params).unwrap().to_json().unwrap();
        let b = generate(&params).unwrap().to_json().unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn classical_queries_are_m_times_n_plus_one() {
    let inst = line_instance(12, 8, 5);
    let data = inst.dataset().unwrap();
    let oracle = FeasibilityOracle::new(&data, inst.eps);
    for m in [1, 17, 300] {
        let (_, trace) = sample_influence_classical(&oracle, 3, m, 9).unwrap();
        assert_eq!(trace.queries, (m * 13) as u64);
    }
}

#[test]
fn sampler_concentration_grows_with_m() {
    let inst = line_instance(10, 7, 21);
    let data = inst.dataset().unwrap();
    let oracle = FeasibilityOracle::new(&data, inst.eps);
    let expected = exact_influence_k_subset(&oracle, 3).unwrap();
    let mut previous = 0.0;
    for m in [50, 200, 800, 3200] {
        let mut fractions: Vec<f64> = (0..30)
            .map(|seed| {
                let (est, _) = sample_influence_classical(&oracle, 3, m, seed).unwrap();
                within_delta_fraction(&est, &expected, 0.05).unwrap()
            })
            .collect();
        fractions.sort_by(f64::total_cmp);
        let median = fractions[15];
        assert!(median >= previous, "median fell to {median} at M = {m}");
        assert!(
            median >= hoeffding_bound(m, 0.05),
            "M = {m}: median {median}"
        );
        previous = median;
    }
}

#[test]
fn quantum_masks_match_exact_masks() {
    // normalised exact influences of this instance stay ≥ 0.12 away from γ
    let inst = line_instance(10, 7, 35);
    let data = inst.dataset().unwrap();
    let oracle = FeasibilityOracle::new(&data, inst.eps);
    let (exact, _) = exact_influence_full(&oracle, CAP).unwrap();
    let exact_mask = threshold_mask(&exact.normalized(), 0.3);
    let spec = fwht_spectrum(&build_dataset_table(&data, inst.eps, CAP).unwrap());
    let hits = (0..100)
        .filter(|&seed| {
            let (est, _) = bv_sample(&spec, 5000, seed).unwrap();
            threshold_mask(&est.normalized(), 0.3) == exact_mask
        })
        .count();
    assert!(hits >= 95, "{hits}/100 seeds");
}

#[test]
fn robust_refit_beats_least_squares_at_n_100() {
    let inst = line_instance(100, 60, 41);
    let data = inst.dataset().unwrap();
    let fit = robust_fit(
        &inst,
        &FitOptions {
            method: Method::Classical,
            m: 800,
            seed: 1,
            ..FitOptions::default()
        },
    )
    .unwrap();
    let ols = least_squares_fit(ModelKind::Line2D, &inst.points, &SubsetMask::full(100)).unwrap();
    let baseline = consensus(&data, &ols, inst.eps);
    assert!(
        fit.consensus >= baseline,
        "refit {} vs least squares {baseline}",
        fit.consensus
    );
}

#[test]
fn well_separated_lines_split_cleanly() {
    for seed in [3, 14, 15] {
        let inst = line_instance(12, 8, seed);
        let data = inst.dataset().unwrap();
        let (alpha, _) =
            exact_influence_full(&FeasibilityOracle::new(&data, inst.eps), CAP).unwrap();
        let norm = alpha.normalized();
        let labels = inst.labels().unwrap();
        let max_inlier = (0..12)
            .filter(|&i| labels[i])
            .map(|i| norm[i])
            .fold(0.0, f64::max);
        let min_outlier = (0..12)
            .filter(|&i| !labels[i])
            .map(|i| norm[i])
            .fold(f64::INFINITY, f64::min);
        assert!(
            min_outlier > max_inlier,
            "seed {seed}: {min_outlier} vs {max_inlier}"
        );
    }
}
