//! Estimator oracles: enumeration checks of the neural-network estimator,
//! calibration of the standard estimator, error-bound and erf validation,
//! and ensemble determinism.

mod common;

use common::{exact_rbm_expectation, random_observable, random_rbm, rng};
use nnqe::dataset::MeasurementRecord;
use nnqe::estimator::{
    self, erf, error_upper_bound, standard_estimate, standard_variance_exact, AccuracyConfig,
    EnsembleConfig, EnsembleData,
};
use nnqe::exactsim::{self, ground_state, sample_measurements, BasisAssignment};
use nnqe::pauli::{Observable, PauliString};
use nnqe::sampler::SamplerConfig;
use nnqe::seeding::derive_seed;
use nnqe::trainer::{SelectionRule, TrainConfig};

#[test]
fn nn_estimate_matches_dense_enumeration() {
    // Random instances at N <= 3: the MC mean lands within 5 standard
    // errors of <psi|O|psi>/<psi|psi> computed through the dense matrix.
    let mut r = rng(501, "nn-oracle");
    for case in 0..8 {
        let n = 1 + case % 3;
        let rbm = random_rbm(n, 1 + case % 2, 0.45, &mut r);
        let obs = random_observable(n, 6, &mut r);
        let exact = exact_rbm_expectation(&rbm, &obs);
        let cfg = SamplerConfig {
            betas: vec![0.4, 0.7, 1.0],
            sweeps_burn_in: 200,
            sweeps_between_samples: 1,
            seed: 600 + case as u64,
        };
        let n_mc = 20_000;
        let report = estimator::nn_estimate(&rbm, &obs, n_mc, &cfg).unwrap();
        let tolerance = 5.0 * report.std_error + 1e-9;
        assert!(
            (report.mean - exact).abs() < tolerance,
            "case {case}: {} vs exact {exact} (se {})",
            report.mean,
            report.std_error
        );
        assert!(report.imag_mean.abs() <= 5.0 * report.imag_std_error + 1e-9);
    }
}

/// Per-term datasets with exactly S shots each, simulated independently on
/// the exact state (the hardware protocol for the standard estimator).
fn per_term_groups(
    state: &exactsim::StateVector,
    obs: &Observable,
    shots: usize,
    seed: u64,
) -> Vec<Vec<MeasurementRecord>> {
    obs.terms()
        .iter()
        .enumerate()
        .map(|(k, term)| {
            let basis = BasisAssignment::for_pauli(&term.string);
            sample_measurements(state, &[basis], shots, derive_seed(seed, &format!("term/{k}")))
                .unwrap()
                .records()
                .to_vec()
        })
        .collect()
}

#[test]
fn standard_estimator_calibration() {
    // 1000 seeded repetitions at S = 1000 on the K = 3 block observable:
    // unbiasedness, spread against the analytic standard error, and
    // 95% coverage of the corresponding interval.
    let obs = Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap();
    let (e0, state) = ground_state(&obs).unwrap();
    let shots = 1000usize;
    let sigma2_exact = standard_variance_exact(&state, &obs).unwrap();
    let eps_exact = (sigma2_exact / shots as f64).sqrt();

    let repetitions = 1000usize;
    let mut means = Vec::with_capacity(repetitions);
    let mut covered = 0usize;
    for rep in 0..repetitions {
        let groups = per_term_groups(&state, &obs, shots, 7000 + rep as u64);
        let report = standard_estimate(&groups, &obs).unwrap();
        means.push(report.mean);
        if (report.mean - e0).abs() <= 1.96 * report.std_error {
            covered += 1;
        }
    }
    let grand_mean = means.iter().sum::<f64>() / repetitions as f64;
    assert!(
        (grand_mean - e0).abs() <= 5.0 * eps_exact / (repetitions as f64).sqrt(),
        "grand mean {grand_mean} vs exact {e0}"
    );
    let spread = (means.iter().map(|m| (m - grand_mean).powi(2)).sum::<f64>()
        / (repetitions as f64 - 1.0))
        .sqrt();
    assert!(
        (spread / eps_exact - 1.0).abs() <= 0.2,
        "spread {spread} vs predicted {eps_exact}"
    );
    let coverage = covered as f64 / repetitions as f64;
    assert!(
        (0.92..=0.98).contains(&coverage),
        "coverage {coverage} outside 95% +- 3%"
    );
}

#[test]
fn error_bound_dominates_equal_shot_error() {
    // epsilon^2_qc from exact ground-state variances with S = M/K stays
    // below (sum |c|)^2 / M on the tested instances.
    let mut cases = vec![
        Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap(),
        Observable::parse("0.5 ZZ\n-0.5 XX\n0.5 YY\n-0.5 ZI").unwrap(),
    ];
    let mut r = rng(502, "bound");
    for _ in 0..6 {
        cases.push(random_observable(3, 5, &mut r));
    }
    for obs in &cases {
        let (_, state) = ground_state(obs).unwrap();
        let sigma2 = standard_variance_exact(&state, obs).unwrap();
        for shots in [10usize, 100, 1000] {
            let m = shots * obs.n_terms();
            let eps2_qc = sigma2 / shots as f64;
            let eps2_max = error_upper_bound(obs, m).unwrap();
            assert!(
                eps2_qc <= eps2_max + 1e-15,
                "obs {obs}: {eps2_qc} > {eps2_max}"
            );
        }
    }
}

#[test]
fn erf_against_alternating_series_oracle() {
    // Independent route: the alternating Maclaurin series
    // erf(x) = 2/sqrt(pi) sum (-1)^n x^{2n+1} / (n! (2n+1)), accurate to
    // ~1e-11 for x <= 4. 1000 points, absolute error <= 1e-7.
    let oracle = |x: f64| -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 1.0f64;
        loop {
            term *= -x * x / n;
            let contribution = term / (2.0 * n + 1.0);
            sum += contribution;
            if contribution.abs() < 1e-18 || n > 400.0 {
                break;
            }
            n += 1.0;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    };
    for k in 0..1000 {
        let x = 4.0 * (k as f64 + 0.5) / 1000.0;
        let got = erf(x);
        let expected = oracle(x);
        assert!(
            (got - expected).abs() <= 1e-7,
            "x = {x}: {got} vs {expected}"
        );
        assert!((erf(-x) + got).abs() < 1e-15);
    }
    // Beyond the series range the implementation saturates; erfc(x) there
    // is below 1.6e-8, within the 1e-7 budget.
    for x in [4.0, 4.5, 6.0, 30.0] {
        assert_eq!(erf(x), 1.0);
    }
}

#[test]
fn nn_variance_zero_on_product_eigenstate_rbm() {
    // Hand-built RBM representing |11>: Z Z has local value +1 ... -1
    // exactly; the sampler never leaves the peak, variance is 0.
    let a = 14.0;
    let rbm = nnqe::rbm::RbmWavefunction::new(
        2,
        1,
        vec![
            num_complex::Complex64::new(a, 0.0),
            num_complex::Complex64::new(a, 0.0),
        ],
        vec![num_complex::Complex64::new(0.0, 0.0)],
        vec![num_complex::Complex64::new(0.0, 0.0); 2],
    )
    .unwrap();
    let obs = Observable::parse("1.0 ZZ").unwrap();
    let cfg = SamplerConfig {
        betas: vec![0.5, 1.0],
        sweeps_burn_in: 100,
        sweeps_between_samples: 1,
        seed: 3,
    };
    let report = estimator::nn_estimate(&rbm, &obs, 2000, &cfg).unwrap();
    assert_eq!(report.mean, 1.0);
    assert_eq!(report.variance, 0.0);
}

fn small_train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 200,
        epochs: 8,
        checkpoint_pool: 5,
        selection_rule: SelectionRule::LowestEnergy,
        selection_n_mc: 2000,
        seed,
        ..TrainConfig::default()
    }
}

fn small_sampler_cfg() -> SamplerConfig {
    SamplerConfig {
        betas: vec![0.4, 0.7, 1.0],
        sweeps_burn_in: 40,
        sweeps_between_samples: 1,
        seed: 0,
    }
}

#[test]
fn ensemble_synthetic_mode_and_determinism() {
    let obs = Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap();
    let (e0, state) = ground_state(&obs).unwrap();
    let cfg = EnsembleConfig {
        replicates: 3,
        n_mc: 4000,
        seed: 21,
        exact_energy: Some(e0),
        accuracy: AccuracyConfig::default(),
    };
    let data = EnsembleData::Synthetic {
        state: &state,
        total_shots: 3000,
    };
    let report = estimator::ensemble_run(
        &obs,
        data,
        &cfg,
        &small_train_cfg(0),
        &small_sampler_cfg(),
    )
    .unwrap();
    assert_eq!(report.estimates.len(), 3);
    assert!(!report.is_partial());
    assert!(report.p_within_accuracy.is_some());
    // Loose sanity: trained estimates land in the right region.
    for e in &report.estimates {
        assert!((e - e0).abs() < 0.3, "estimate {e} far from {e0}");
    }

    let again = estimator::ensemble_run(
        &obs,
        EnsembleData::Synthetic {
            state: &state,
            total_shots: 3000,
        },
        &cfg,
        &small_train_cfg(0),
        &small_sampler_cfg(),
    )
    .unwrap();
    assert_eq!(report.estimates, again.estimates);
    assert_eq!(report.mean, again.mean);
    assert_eq!(report.variance, again.variance);
}

#[test]
fn replicates_with_identical_seeds_have_zero_spread() {
    // Two replicates handed the same seed give the same estimate, so the
    // ensemble spread of [e, e] is exactly zero.
    let obs = Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap();
    let (e0, state) = ground_state(&obs).unwrap();
    let cfg = EnsembleConfig {
        replicates: 2,
        n_mc: 2000,
        seed: 31,
        exact_energy: Some(e0),
        accuracy: AccuracyConfig::default(),
    };
    let data = EnsembleData::Synthetic {
        state: &state,
        total_shots: 1500,
    };
    let first = estimator::single_replicate(
        &obs,
        &data,
        77,
        &cfg,
        &small_train_cfg(0),
        &small_sampler_cfg(),
    )
    .unwrap();
    let second = estimator::single_replicate(
        &obs,
        &data,
        77,
        &cfg,
        &small_train_cfg(0),
        &small_sampler_cfg(),
    )
    .unwrap();
    assert_eq!(first, second);
    let estimates = [first, second];
    let mean = (estimates[0] + estimates[1]) / 2.0;
    let delta2 = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>();
    assert_eq!(delta2, 0.0);
}

#[test]
fn ensemble_pool_mode_shapes() {
    // Fig. 5 style workflow: subsample replicate datasets out of one pool.
    let obs = Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap();
    let (_, state) = ground_state(&obs).unwrap();
    let pool_bases: Vec<BasisAssignment> = obs
        .terms()
        .iter()
        .map(|t| BasisAssignment::for_pauli(&t.string))
        .collect();
    let pool =
        exactsim::sample_uniform_basis_measurements(&state, &pool_bases, 6000, 99).unwrap();
    let cfg = EnsembleConfig {
        replicates: 2,
        n_mc: 2000,
        seed: 22,
        exact_energy: None,
        accuracy: AccuracyConfig::default(),
    };
    let report = estimator::ensemble_run(
        &obs,
        EnsembleData::Pool {
            dataset: &pool,
            subsample: 1500,
        },
        &cfg,
        &small_train_cfg(1),
        &small_sampler_cfg(),
    )
    .unwrap();
    assert_eq!(report.estimates.len(), 2);
    assert!(report.p_within_accuracy.is_none());
    assert!(report.variance >= 0.0);
}

#[test]
fn pauli_variance_eigenstate_sanity() {
    // sigma^2[P] = 1 - <P>^2 convention: exact-variance route vs direct
    // sampling variance of eigenvalues.
    let obs = Observable::parse("-1.0 XX\n-1.0 ZI\n-1.0 IZ").unwrap();
    let (_, state) = ground_state(&obs).unwrap();
    let xx: PauliString = "XX".parse().unwrap();
    let exact_var = exactsim::pauli_variance_exact(&state, &xx).unwrap();
    let basis = BasisAssignment::for_pauli(&xx);
    let shots = 200_000;
    let ds = sample_measurements(&state, &[basis], shots, 42).unwrap();
    let eigenvalues: Vec<f64> = ds
        .records()
        .iter()
        .map(|r| xx.outcome_eigenvalue(r.bits()).unwrap())
        .collect();
    let mean = eigenvalues.iter().sum::<f64>() / shots as f64;
    let var = eigenvalues.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (shots as f64 - 1.0);
    assert!((var - exact_var).abs() < 0.01, "{var} vs {exact_var}");
}
