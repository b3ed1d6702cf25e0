use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pricing_core::covariates::{feature_normalize, make_feature, next_covariate, phase_of, CovariateStream, CovariateStreamSpec};
use pricing_core::estimation::{
    maximize, qmle_fit, DesignMatrix, Estimator, EstimatorConfig, Observation, QuasiObjective, SolverOptions,
};
use pricing_core::glm::{expected_revenue, mean_demand, optimal_price, LinkFunction, PriceRange};
use pricing_core::harness::config::{ExperimentConfig, PolicyName};
use pricing_core::harness::run_trial;
use pricing_core::policies::{ucb_select, Policy, PolicyKind, PolicySettings};

fn range() -> PriceRange {
    PriceRange::new(0.1, 5.0).unwrap()
}

fn links() -> Vec<LinkFunction> {
    vec![
        LinkFunction::identity(),
        LinkFunction::logistic(3.0),
        LinkFunction::custom("exp", f64::exp, f64::exp, 3.0),
    ]
}

fn vec_in(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

/// `(d, beta, gamma, x)` with `gamma <= 0` entrywise and `x >= 0`, so `x'gamma <= 0`.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|d| (vec_in(d, -1.0, 1.5), vec_in(d, -1.0, -0.01), vec_in(d, 0.01, 1.0)))
}

fn theta_of(beta: &[f64], gamma: &[f64]) -> DVector<f64> {
    DVector::from_iterator(beta.len() * 2, beta.iter().chain(gamma).copied())
}

fn history(d: usize, n: usize, seed: u64, link: &LinkFunction) -> Vec<Observation> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = DVector::from_fn(2 * d, |_, _| rng.random_range(-0.5..0.5));
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0) / (d as f64).sqrt()).collect();
            let p = rng.random_range(0.1..5.0);
            let z = make_feature(&x, p).into_vector() / (1.0 + p * p).sqrt();
            let mean = link.g(z.dot(&truth));
            let y = if link.has_unit_range() {
                f64::from(rng.random::<f64>() < mean)
            } else {
                mean + rng.random_range(-0.3..0.3)
            };
            Observation::new(z, y)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn demand_decreases_in_price((beta, gamma, x) in instance(), li in 0usize..3) {
        let link = &links()[li];
        let theta = theta_of(&beta, &gamma);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let p = 0.1 + 4.9 * i as f64 / 199.0;
            let m = mean_demand(link, &theta, &x, p).unwrap();
            prop_assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn identity_demand_is_linear((beta, gamma, x) in instance(), p in 0.1f64..5.0) {
        let theta = theta_of(&beta, &gamma);
        let a: f64 = x.iter().zip(&beta).map(|(u, v)| u * v).sum();
        let b: f64 = x.iter().zip(&gamma).map(|(u, v)| u * v).sum();
        prop_assert_eq!(mean_demand(&LinkFunction::identity(), &theta, &x, p).unwrap(), a + b * p);
    }

    #[test]
    fn optimal_price_beats_dense_grid((beta, gamma, x) in instance(), li in 0usize..3) {
        let link = &links()[li];
        let theta = theta_of(&beta, &gamma);
        let best = optimal_price(link, &theta, &x, range()).unwrap();
        prop_assert!(range().contains(best.price));
        let grid_max = (0..2000)
            .map(|i| expected_revenue(link, &theta, &x, 0.1 + 4.9 * i as f64 / 1999.0).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(best.revenue >= grid_max - 1e-8, "{} < {}", best.revenue, grid_max);
    }

    #[test]
    fn feature_norm_identity(x in vec_in(5, -2.0, 2.0), p in -5.0f64..5.0) {
        let z = make_feature(&x, p);
        let nx: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((z.as_vector().norm_squared() - nx * (1.0 + p * p)).abs() <= 1e-12 * (1.0 + nx * (1.0 + p * p)));
        prop_assert_eq!(&z.as_vector().as_slice()[..5], &x[..]);
    }

    #[test]
    fn normalized_features_in_unit_ball(x in vec_in(4, 0.0, 3.0), p in 0.1f64..5.0) {
        let mut x = x;
        feature_normalize(&mut x, 5.0);
        prop_assert!(make_feature(&x, p).as_vector().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn phase_changes_only_at_boundaries(horizon in 2usize..3000, phases in 2usize..8) {
        prop_assume!(horizon >= phases);
        let boundaries: Vec<usize> = (1..phases).map(|k| horizon * k / phases + 1).collect();
        for t in 2..=horizon {
            let changed = phase_of(t, horizon, phases) != phase_of(t - 1, horizon, phases);
            prop_assert_eq!(changed, boundaries.contains(&t), "t = {}", t);
        }
        prop_assert_eq!(phase_of(1, horizon, phases), 1);
        prop_assert_eq!(phase_of(horizon, horizon, phases), phases);
    }

    #[test]
    fn covariate_streams_are_deterministic(seed in any::<u64>(), phases in prop::sample::select(vec![0usize, 2, 6])) {
        let spec = if phases == 0 { CovariateStreamSpec::iid(6) } else { CovariateStreamSpec::phased(6, phases) };
        let stream = CovariateStream::new(spec.clone(), 60).unwrap();
        let a = stream.sequence(5.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = stream.sequence(5.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let x = next_covariate(&spec, 1, 60, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(x.iter().all(|&v| (0.0..=spec.scale).contains(&v)));
    }

    #[test]
    fn objective_is_strictly_concave(d in 1usize..4, n in 1usize..40, seed in any::<u64>(), li in 0usize..3) {
        let link = links()[li].clone();
        let obj = QuasiObjective::from_history(link, 1.0, &history(d, n, seed, &links()[li])).unwrap();
        let theta = DVector::from_fn(2 * d, |i, _| ((seed >> (i % 32)) & 7) as f64 / 7.0 - 0.5);
        let h = obj.neg_hessian(&theta);
        let min_eig = h.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= obj.strong_concavity() * (1.0 - 1e-9));
    }

    #[test]
    fn ridge_closed_form_matches_fit(d in 1usize..5, n in 1usize..50, seed in any::<u64>()) {
        let link = LinkFunction::identity();
        let hist = history(d, n, seed, &link);
        let mut a = DMatrix::<f64>::identity(2 * d, 2 * d) * 2.0;
        let mut b = DVector::<f64>::zeros(2 * d);
        for o in &hist {
            a += &o.z * o.z.transpose();
            b += &o.z * o.demand;
        }
        let oracle = a.lu().solve(&b).unwrap();
        prop_assume!(oracle.norm() <= 3.0);
        let (fit, _) = qmle_fit(&link, &hist, 1.0, 3.0, 1e-12).unwrap();
        prop_assert!((fit.as_vector() - oracle).amax() <= 1e-6);
    }

    #[test]
    fn gap_certificate_bounds_suboptimality(d in 1usize..4, n in 1usize..40, seed in any::<u64>(), li in 0usize..3) {
        let link = links()[li].clone();
        let obj = QuasiObjective::from_history(link, 1.0, &history(d, n, seed, &links()[li])).unwrap();
        let start = DVector::zeros(2 * d);
        let exact = maximize(&obj, 3.0, &start, &SolverOptions::with_tol(1e-14)).unwrap();
        let loose_opts = SolverOptions { max_iter: 2, ..SolverOptions::with_tol(1e-3) };
        let loose = maximize(&obj, 3.0, &start, &loose_opts).unwrap();
        let sub = obj.value(&exact.theta).unwrap() - obj.value(&loose.theta).unwrap();
        prop_assert!(sub <= loose.gap + 1e-9, "suboptimality {} > certificate {}", sub, loose.gap);
        prop_assert!(loose.theta.norm() <= 3.0 + 1e-9);
    }

    #[test]
    fn design_log_det_is_monotone(zs in prop::collection::vec(vec_in(4, -1.0, 1.0), 1..60)) {
        let mut design = DesignMatrix::new(4, 1.0);
        let mut direct = DMatrix::<f64>::identity(4, 4);
        let mut prev = design.log_det();
        for z in &zs {
            let z = DVector::from_column_slice(z);
            design.update(&z);
            direct += &z * z.transpose();
            prop_assert!(design.log_det() >= prev - 1e-12);
            prev = design.log_det();
        }
        let exact = direct.clone().cholesky().unwrap();
        let ld: f64 = exact.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        prop_assert!((design.log_det() - ld).abs() <= 1e-8);
        let inv = exact.inverse();
        prop_assert!((design.inverse() - inv).amax() <= 1e-8);
    }

    #[test]
    fn ucb_candidate_dominates_center(seed in any::<u64>(), x in vec_in(2, 0.0, 1.0), radius in 0.0f64..2.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = EstimatorConfig { lambda: 1.0, theta_bar: 3.0, sigma_bar: 0.25, horizon: 50, solver: SolverOptions::default() };
        let mut est = Estimator::full(LinkFunction::identity(), 2, cfg).unwrap();
        for _ in 0..10 {
            let xi = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            est.observe(&xi, rng.random_range(0.1..5.0), rng.random_range(0.0..2.0)).unwrap();
        }
        est.refit().unwrap();
        let center = optimal_price(est.link(), est.estimate(), &x, range()).unwrap();
        let c = ucb_select(&est, &x, range(), 16, radius, &mut rng).unwrap();
        prop_assert!(c.choice.revenue >= center.revenue);
        prop_assert!(range().contains(c.choice.price));
    }

    #[test]
    fn ce_with_true_beta_has_no_regret((beta, gamma, x) in instance()) {
        let theta = theta_of(&beta, &gamma);
        let link = LinkFunction::identity();
        let opt = optimal_price(&link, &theta, &x, range()).unwrap();
        prop_assume!(opt.price > 0.1 && opt.price < 5.0);
        let cfg = EstimatorConfig { lambda: 1e-9, theta_bar: 10.0, sigma_bar: 0.25, horizon: 10, solver: SolverOptions::default() };
        let mut pol = Policy::new(PolicyKind::Ce { gamma: gamma.clone() }, link.clone(), beta.len(), range(), cfg, PolicySettings::default()).unwrap();
        // noiseless observations with a vanishing ridge pin beta_hat to beta*
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..400 {
            let mut xi = vec![0.0; beta.len()];
            xi[i % beta.len()] = 1.0;
            let p = 1.0;
            pol.observe(&xi, p, mean_demand(&link, &theta, &xi, p).unwrap()).unwrap();
        }
        let p = pol.choose_price(&x, 1, &mut rng).unwrap();
        let regret = opt.revenue - expected_revenue(&link, &theta, &x, p).unwrap();
        prop_assert!(regret <= 1e-10, "regret {}", regret);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_policy_prices_in_range_and_accounts_regret(
        seed in any::<u64>(),
        kind in prop::sample::select(vec![
            PolicyName::Ucb, PolicyName::UcbApprox, PolicyName::Ts, PolicyName::TsApprox,
            PolicyName::Ce, PolicyName::Cils, PolicyName::Oracle,
        ]),
        phased in any::<bool>(),
    ) {
        let mut cfg = ExperimentConfig::new(2, 80, 1, seed, kind);
        cfg.policy.k = 8;
        if phased {
            cfg.covariates.mode = pricing_core::harness::config::CovariateModeName::Phased;
            cfg.covariates.phases = Some(2);
        }
        let r = run_trial(&cfg, 0).unwrap();
        prop_assert!(r.accounting_residual() <= 1e-8);
        let mut prev = 0.0;
        for row in &r.ledger {
            prop_assert!(cfg.price_range().contains(row.price));
            prop_assert!(row.inst_regret >= -1e-8);
            prop_assert!(row.cum_regret >= prev - 1e-8);
            prev = row.cum_regret;
        }
        let again = run_trial(&cfg, 0).unwrap();
        prop_assert_eq!(&r, &again);

        let mut oracle = cfg.clone();
        oracle.policy.kind = PolicyName::Oracle;
        let o = run_trial(&oracle, 0).unwrap();
        prop_assert_eq!(&o.theta_star, &r.theta_star);
        prop_assert!(o.final_regret().abs() <= 80.0 * 1e-8);
        prop_assert!(r.final_regret() >= o.final_regret() - 1e-8);
        for (a, b) in o.ledger.iter().zip(&r.ledger) {
            prop_assert_eq!(&a.x, &b.x);
        }
    }

    #[test]
    fn config_survives_json_and_toml(
        d in 1usize..20, horizon in 1usize..5000, trials in 1usize..200, seed in 0u64..(1 << 62),
        kind in prop::sample::select(vec![PolicyName::Ucb, PolicyName::Ts, PolicyName::Cils, PolicyName::Ce]),
        lambda in 0.01f64..10.0, tol in 1e-12f64..1e-2,
    ) {
        let mut cfg = ExperimentConfig::new(d, horizon, trials, seed, kind);
        cfg.policy.lambda = lambda;
        cfg.policy.tol = tol;
        let json = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(&serde_json::from_str::<ExperimentConfig>(&json).unwrap(), &cfg);
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(&ExperimentConfig::from_toml_str(&text).unwrap(), &cfg);
    }
}
