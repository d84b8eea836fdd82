//! Property tests: structural invariants that must hold for any admissible
//! input, not just the worked examples.

use mmlrt_core::censored_exp::{
    cov_scores, lambda_sup, profile_lambda, rho, sample_censored, v_theta, CensExpSample,
    ThetaSearch,
};
use mmlrt_core::ctmc::{CtmcParams, SuffStats, OCCUPATION_TOL};
use mmlrt_core::io::to_json_17;
use mmlrt_core::mixture::{lrt_statistic, FitOptions, LrtMode};
use mmlrt_core::rng::{derive_seed, stream_rng};
use mmlrt_core::special::{chi2_quantile, chi2_sf};
use proptest::prelude::*;

fn simplex(w: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, w).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Jump matrix with zero diagonal; optionally the last state is absorbing.
fn gamma_matrix(w: usize, absorb_last: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(simplex(w - 1), w).prop_map(move |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(j, off)| {
                if absorb_last && j == w - 1 {
                    return vec![0.0; w];
                }
                let mut row = Vec::with_capacity(w);
                let mut it = off.into_iter();
                for k in 0..w {
                    row.push(if k == j { 0.0 } else { it.next().unwrap() });
                }
                row
            })
            .collect()
    })
}

fn chain() -> impl Strategy<Value = CtmcParams> {
    (2usize..=4, any::<bool>())
        .prop_flat_map(|(w, absorb_last)| {
            (
                simplex(w),
                proptest::collection::vec(0.2f64..3.0, w),
                gamma_matrix(w, absorb_last),
                0.5f64..3.0,
                Just(absorb_last),
            )
        })
        .prop_map(|(alpha, mut beta, gamma, t, absorb_last)| {
            let w = alpha.len();
            if absorb_last {
                beta[w - 1] = 0.0;
            }
            CtmcParams::new(alpha, beta, gamma, t).expect("constructed to be valid")
        })
}

fn stats_from(params: &CtmcParams, n: usize, seed: u64) -> Vec<SuffStats> {
    let mut rng = stream_rng(seed, &[0]);
    (0..n)
        .map(|_| SuffStats::from_path(&params.sample_path(&mut rng), params.w()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampled_paths_validate_and_have_finite_density(params in chain(), seed in any::<u64>()) {
        let mut rng = stream_rng(seed, &[1]);
        for _ in 0..16 {
            let path = params.sample_path(&mut rng);
            path.validate().unwrap();
            let stats = SuffStats::from_path(&path, params.w()).unwrap();
            let total: f64 = stats.tau.iter().sum();
            prop_assert!((total - params.horizon_t).abs() <= OCCUPATION_TOL);
            let jumps: u64 = stats.njk.iter().flatten().sum();
            prop_assert_eq!(jumps as usize, stats.m);
            let ll = params.log_density(&stats);
            prop_assert!(ll.is_finite(), "own-sample density must be finite, got {}", ll);
        }
    }

    #[test]
    fn json_17_round_trips_parameters_bit_exactly(params in chain()) {
        let text = to_json_17(&params).unwrap();
        let back: CtmcParams = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(params, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn em_ascends_and_never_loses_to_the_null(params in chain(), seed in any::<u64>()) {
        let samples = stats_from(&params, 12, seed);
        let opts = FitOptions {
            n_restarts: 3,
            max_iters: 200,
            seed: derive_seed(seed, &[2]),
            ..FitOptions::default()
        };
        let res = lrt_statistic(&samples, params.horizon_t, &LrtMode::Composite, &opts).unwrap();
        prop_assert!(res.lambda >= 0.0);
        prop_assert!(res.lambda_raw >= -1e-8, "raw dipped: {}", res.lambda_raw);
        prop_assert!((res.two_lambda - 2.0 * res.lambda).abs() == 0.0);
        for w in res.fit_two.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "EM trace decreased: {} -> {}", w[0], w[1]);
        }
        // Shared-jump-matrix estimate decouples: the mixture's gamma is the
        // pooled one-component gamma, bit for bit.
        let one = res.fit_one.as_ref().unwrap();
        prop_assert_eq!(&res.fit_two.params.gamma, &one.params.gamma);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_is_the_normalized_covariance(
        s in -2.5f64..2.5,
        t in -2.5f64..2.5,
        horizon in 0.3f64..8.0,
    ) {
        let th_s = s.exp() + 0.5;
        let th_t = t.exp() + 0.5;
        prop_assume!((th_s - 1.0).abs() > 1e-6 && (th_t - 1.0).abs() > 1e-6);
        let r = rho(s, t, Some(horizon));
        prop_assert!(r.abs() <= 1.0 + 1e-12);
        prop_assert_eq!(r, rho(t, s, Some(horizon)), "asymmetric rho");
        let lhs = r * (v_theta(th_s, horizon) * v_theta(th_t, horizon)).sqrt();
        let rhs = cov_scores(th_s, th_t, horizon);
        prop_assert!((lhs - rhs).abs() < 1e-12, "identity broke: {} vs {}", lhs, rhs);
    }

    #[test]
    fn chi2_quantile_inverts_the_tail(df in 1usize..10, p in 0.001f64..0.5) {
        let q = chi2_quantile(p, df).unwrap();
        let back = chi2_sf(q, df).unwrap();
        prop_assert!((back - p).abs() < 1e-10 * p.max(1e-3), "{} vs {}", back, p);
    }

    #[test]
    fn seed_streams_separate(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        prop_assert_ne!(derive_seed(master, &[0, a]), derive_seed(master, &[a, 0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profile_stays_in_bounds(
        theta_true in 0.3f64..3.0,
        theta_probe in 0.1f64..6.0,
        n in 3usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = stream_rng(seed, &[3]);
        let sample = sample_censored(theta_true, 1.0, n, &mut rng).unwrap();
        let pt = profile_lambda(&sample, theta_probe).unwrap();
        prop_assert!(pt.lambda >= 0.0 && pt.lambda.is_finite());
        prop_assert!((0.0..=1.0).contains(&pt.p_hat));
        // theta = 1 is the null itself: flat profile.
        let null_pt = profile_lambda(&sample, 1.0).unwrap();
        prop_assert_eq!(null_pt.lambda, 0.0);
        prop_assert_eq!(null_pt.p_hat, 0.0);
    }

    #[test]
    fn sup_dominates_every_profile_point(n in 5usize..30, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, &[4]);
        let sample = sample_censored(1.0, 1.0, n, &mut rng).unwrap();
        let search = ThetaSearch {
            theta_min: 0.05,
            theta_max: 25.0,
            grid_points: 96,
            refine_tol: 1e-7,
        };
        let sup = lambda_sup(&sample, &search).unwrap();
        prop_assert!(sup.lambda >= 0.0);
        prop_assert!((0.0..=1.0).contains(&sup.p_hat));
        for i in 0..12 {
            let th = (search.theta_min.ln()
                + (search.theta_max.ln() - search.theta_min.ln()) * i as f64 / 11.0)
                .exp();
            let pt = profile_lambda(&sample, th).unwrap();
            prop_assert!(
                sup.lambda >= pt.lambda - 1e-12,
                "sup {} below profile {} at theta {}",
                sup.lambda,
                pt.lambda,
                th
            );
        }
    }

    #[test]
    fn censoring_survives_serialization(theta in 0.4f64..2.5, n in 2usize..30, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, &[5]);
        let sample = sample_censored(theta, 1.0, n, &mut rng).unwrap();
        let text = to_json_17(&sample).unwrap();
        let back: CensExpSample = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&sample, &back);
        prop_assert_eq!(sample.n_censored(), back.n_censored());
    }
}
