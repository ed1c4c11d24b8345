//! Measurement estimators and uncertainty analysis.
//!
//! Two routes to the expectation value of a Pauli-sum observable:
//!
//! * the neural-network Monte Carlo estimator, which averages the local
//!   ratio values `<sigma|O|psi> / <sigma|psi>` over configurations drawn
//!   from the trained RBM distribution, and
//! * the standard per-Pauli estimator, which averages measured eigenvalues
//!   term by term and combines them with the coefficients.
//!
//! Also here: the shot-budget arithmetic M = K x S, the coefficient-sum
//! error upper bound, chemical-accuracy probabilities via an erf
//! evaluation accurate to well below 1e-7, and the replicate-ensemble
//! protocol that trains many networks on independent datasets to measure
//! the estimator's own spread.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dataset::{Dataset, MeasurementRecord};
use crate::error::{Error, Result};
use crate::exactsim::{BasisAssignment, StateVector};
use crate::pauli::Observable;
use crate::rbm::RbmWavefunction;
use crate::sampler::{self, SamplerConfig};
use crate::seeding::derive_seed;
use crate::trainer::{self, TrainConfig};

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMethod {
    NeuralNetwork,
    Standard,
}

impl EstimatorMethod {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorMethod::NeuralNetwork => "nn",
            EstimatorMethod::Standard => "standard",
        }
    }
}

/// Point estimate with spread diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub method: EstimatorMethod,
    pub mean: f64,
    /// Sample variance (divisor n - 1).
    pub variance: f64,
    /// Standard error of the mean: sqrt(variance / n_samples).
    pub std_error: f64,
    /// Monte Carlo samples (nn) or effective per-term shots (standard).
    pub n_samples: usize,
    /// Imaginary residue of the mean local value; a diagnostic that must
    /// stay within 5 standard errors of its own spread.
    pub imag_mean: f64,
    pub imag_std_error: f64,
}

/// Shot budget: M total measurements split evenly over K Pauli terms.
#[derive(Debug, Clone, Copy)]
pub struct ShotBudget {
    pub total: usize,
    pub terms: usize,
    pub shots_per_term: usize,
}

impl ShotBudget {
    /// Floor division; the remainder is discarded and logged.
    pub fn new(total: usize, terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(Error::invalid("observable has no terms"));
        }
        let shots_per_term = total / terms;
        if shots_per_term == 0 {
            return Err(Error::invalid(format!(
                "budget of {total} measurements gives no shots for {terms} terms"
            )));
        }
        let remainder = total % terms;
        if remainder > 0 {
            log::info!("shot budget discards remainder {remainder} of {total} (K = {terms})");
        }
        Ok(ShotBudget {
            total: terms * shots_per_term,
            terms,
            shots_per_term,
        })
    }
}

/// Chemical-accuracy target, in the energy units of the observable.
#[derive(Debug, Clone, Copy)]
pub struct AccuracyConfig {
    pub chemical_accuracy: f64,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        AccuracyConfig {
            chemical_accuracy: 1.6e-3,
        }
    }
}

impl AccuracyConfig {
    pub fn new(chemical_accuracy: f64) -> Result<Self> {
        if !chemical_accuracy.is_finite() || chemical_accuracy <= 0.0 {
            return Err(Error::invalid("chemical accuracy must be positive"));
        }
        Ok(AccuracyConfig { chemical_accuracy })
    }
}

/// Neural-network Monte Carlo estimate of `<O>` on the RBM state.
///
/// Draws `n_mc` configurations from |psi|^2 and averages the local values
/// `O_j = sum_sigma' (psi(sigma') / psi(sigma_j)) <sigma_j|O|sigma'>`.
pub fn nn_estimate(
    rbm: &RbmWavefunction,
    obs: &Observable,
    n_mc: usize,
    sampler_cfg: &SamplerConfig,
) -> Result<EstimateReport> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be >= 1"));
    }
    if obs.n_qubits() != rbm.n_visible() {
        return Err(Error::Dimension {
            expected: rbm.n_visible(),
            got: obs.n_qubits(),
        });
    }
    let samples = sampler::draw_samples(rbm, sampler_cfg, n_mc)?;

    // Configurations repeat heavily at small N; memoize log psi and the
    // local values. Lookups do not disturb the accumulation order.
    let mut log_psi_cache: HashMap<Vec<u8>, Complex64> = HashMap::new();
    let mut local_cache: HashMap<Vec<u8>, Complex64> = HashMap::new();
    let mut locals = Vec::with_capacity(n_mc);
    for sigma in &samples {
        if let Some(value) = local_cache.get(sigma) {
            locals.push(*value);
            continue;
        }
        let log_here = match log_psi_cache.get(sigma) {
            Some(l) => *l,
            None => {
                let l = rbm.log_psi(sigma)?;
                log_psi_cache.insert(sigma.clone(), l);
                l
            }
        };
        let mut local = Complex64::new(0.0, 0.0);
        for (sigma_prime, element) in obs.connected_elements(sigma)? {
            let log_there = match log_psi_cache.get(&sigma_prime) {
                Some(l) => *l,
                None => {
                    let l = rbm.log_psi(&sigma_prime)?;
                    log_psi_cache.insert(sigma_prime.clone(), l);
                    l
                }
            };
            local += element * (log_there - log_here).exp();
        }
        local_cache.insert(sigma.clone(), local);
        locals.push(local);
    }

    let n = locals.len() as f64;
    let mean_re = locals.iter().map(|v| v.re).sum::<f64>() / n;
    let mean_im = locals.iter().map(|v| v.im).sum::<f64>() / n;
    let (variance, imag_variance) = if locals.len() > 1 {
        let var_re = locals.iter().map(|v| (v.re - mean_re).powi(2)).sum::<f64>() / (n - 1.0);
        let var_im = locals.iter().map(|v| (v.im - mean_im).powi(2)).sum::<f64>() / (n - 1.0);
        (var_re, var_im)
    } else {
        (0.0, 0.0)
    };
    let imag_std_error = (imag_variance / n).sqrt();
    if mean_im.abs() > 5.0 * imag_std_error && mean_im.abs() > 1e-12 {
        log::warn!(
            "imaginary residue {mean_im:e} exceeds 5 standard errors ({imag_std_error:e})"
        );
    }
    Ok(EstimateReport {
        method: EstimatorMethod::NeuralNetwork,
        mean: mean_re,
        variance,
        std_error: (variance / n).sqrt(),
        n_samples: locals.len(),
        imag_mean: mean_im,
        imag_std_error,
    })
}

/// Standard per-Pauli estimator from grouped measurement records.
///
/// Per-term sample means and variances combine as
/// `mean = sum c_k mean_k`, `variance = sum c_k^2 var_k`, and the standard
/// error uses the per-term shot counts. Identity-only terms contribute
/// their coefficient exactly with zero variance.
pub fn standard_estimate(
    groups: &[Vec<MeasurementRecord>],
    obs: &Observable,
) -> Result<EstimateReport> {
    if groups.len() != obs.n_terms() {
        return Err(Error::Dimension {
            expected: obs.n_terms(),
            got: groups.len(),
        });
    }
    let mut mean = 0.0f64;
    let mut variance = 0.0f64;
    let mut err2 = 0.0f64;
    let mut shot_counts: Vec<usize> = Vec::new();
    for (k, term) in obs.terms().iter().enumerate() {
        if term.string.is_identity() {
            mean += term.coefficient;
            continue;
        }
        let records = &groups[k];
        let s = records.len();
        if s < 2 {
            return Err(Error::invalid(format!(
                "term {k} ({}) has {s} records; the sample variance needs at least 2",
                term.string
            )));
        }
        let eigenvalues: Vec<f64> = records
            .iter()
            .map(|r| term.string.outcome_eigenvalue(r.bits()))
            .collect::<Result<_>>()?;
        let term_mean = eigenvalues.iter().sum::<f64>() / s as f64;
        let term_var = eigenvalues
            .iter()
            .map(|p| (p - term_mean).powi(2))
            .sum::<f64>()
            / (s as f64 - 1.0);
        mean += term.coefficient * term_mean;
        variance += term.coefficient * term.coefficient * term_var;
        err2 += term.coefficient * term.coefficient * term_var / s as f64;
        shot_counts.push(s);
    }
    let std_error = err2.sqrt();
    // Effective per-term shot count restores std_error = sqrt(var / n).
    let n_samples = if shot_counts.windows(2).all(|w| w[0] == w[1]) && !shot_counts.is_empty() {
        shot_counts[0]
    } else if err2 > 0.0 {
        (variance / err2).round() as usize
    } else {
        shot_counts.iter().copied().min().unwrap_or(0)
    };
    Ok(EstimateReport {
        method: EstimatorMethod::Standard,
        mean,
        variance,
        std_error,
        n_samples,
        imag_mean: 0.0,
        imag_std_error: 0.0,
    })
}

/// Exact standard-estimator variance on a known state:
/// `sum_k c_k^2 (1 - <P_k>^2)` (the convention used for synthetic-data
/// comparisons, instead of sample variances).
pub fn standard_variance_exact(state: &StateVector, obs: &Observable) -> Result<f64> {
    let mut total = 0.0;
    for term in obs.terms() {
        if term.string.is_identity() {
            continue;
        }
        let var = crate::exactsim::pauli_variance_exact(state, &term.string)?;
        total += term.coefficient * term.coefficient * var;
    }
    Ok(total)
}

/// Worst-case squared error of the standard estimator:
/// `(sum_k |c_k|)^2 / M`, identity terms included.
pub fn error_upper_bound(obs: &Observable, total_measurements: usize) -> Result<f64> {
    if total_measurements == 0 {
        return Err(Error::invalid("total measurements must be >= 1"));
    }
    let sum = obs.coefficient_abs_sum();
    Ok(sum * sum / total_measurements as f64)
}

/// Error function, absolute error well below 1e-7 everywhere.
///
/// Uses the positive-term series
/// `erf(x) = (2/sqrt(pi)) e^{-x^2} sum_n 2^n x^{2n+1} / (2n+1)!!`,
/// which has no cancellation, and saturates to 1 beyond x = 4 where
/// erfc < 1.6e-8.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x >= 4.0 {
        return 1.0;
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * x * x / (2.0 * f64::from(n) + 1.0);
        sum += term;
        if term < sum * 1e-17 || n > 300 {
            break;
        }
    }
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    two_over_sqrt_pi * (-x * x).exp() * sum
}

/// Probability that the standard estimator lands within chemical accuracy:
/// `Erf( E sqrt(S / (2 sigma^2)) )`. A zero variance gives certainty.
pub fn p_chem_accuracy_standard(sigma2_qc: f64, shots_per_term: usize, acc: &AccuracyConfig) -> f64 {
    if sigma2_qc <= 0.0 {
        return 1.0;
    }
    let arg = acc.chemical_accuracy * (shots_per_term as f64 / (2.0 * sigma2_qc)).sqrt();
    erf(arg)
}

/// Upper-bound variant: the variance is replaced by its worst case
/// `(sum_k |c_k|)^2`, keeping the per-term shot count S in the argument.
pub fn p_chem_accuracy_max(obs: &Observable, shots_per_term: usize, acc: &AccuracyConfig) -> f64 {
    let sum = obs.coefficient_abs_sum();
    p_chem_accuracy_standard(sum * sum, shots_per_term, acc)
}

/// Where the replicate datasets come from.
pub enum EnsembleData<'a> {
    /// Fresh synthetic measurements from an exact state per replicate.
    Synthetic {
        state: &'a StateVector,
        total_shots: usize,
    },
    /// Independent random subsamples of an ingested measurement pool.
    Pool {
        dataset: &'a Dataset,
        subsample: usize,
    },
}

/// Replicate-ensemble settings.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub replicates: usize,
    /// Monte Carlo samples for each replicate's final estimate.
    pub n_mc: usize,
    pub seed: u64,
    /// Exact reference energy; enables the empirical accuracy probability.
    pub exact_energy: Option<f64>,
    pub accuracy: AccuracyConfig,
}

/// Spread statistics of estimates across independently trained replicas.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Sample variance of the replicate estimates (Delta^2).
    pub variance: f64,
    /// Fraction of replicates within chemical accuracy of the exact
    /// energy, when one is known.
    pub p_within_accuracy: Option<f64>,
    /// (replicate index, error) for replicates that failed.
    pub failures: Vec<(usize, String)>,
}

impl EnsembleReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Train `replicates` networks on independent datasets and estimate the
/// observable with each, reporting the spread of the estimates.
///
/// Replicates run in parallel with derived seeds; results are reduced in
/// replicate order so the report is deterministic.
pub fn ensemble_run(
    obs: &Observable,
    data: EnsembleData<'_>,
    cfg: &EnsembleConfig,
    train_cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<EnsembleReport> {
    if cfg.replicates < 2 {
        return Err(Error::invalid("ensemble needs at least 2 replicates"));
    }
    if let EnsembleData::Pool { dataset, subsample } = &data {
        if *subsample > dataset.len() {
            return Err(Error::invalid(format!(
                "subsample {} exceeds pool size {}",
                subsample,
                dataset.len()
            )));
        }
    }
    let basis_pool = observable_basis_pool(obs);

    let results: Vec<std::result::Result<f64, String>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &format!("replicate/{r}"));
            run_replicate(obs, &data, &basis_pool, seed, cfg, train_cfg, sampler_cfg)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut estimates = Vec::with_capacity(cfg.replicates);
    let mut failures = Vec::new();
    for (r, result) in results.into_iter().enumerate() {
        match result {
            Ok(value) => estimates.push(value),
            Err(message) => failures.push((r, message)),
        }
    }
    if estimates.is_empty() {
        return Err(Error::invalid("every ensemble replicate failed"));
    }
    if !failures.is_empty() {
        log::warn!("{} of {} replicates failed", failures.len(), cfg.replicates);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = if estimates.len() > 1 {
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let p_within_accuracy = cfg.exact_energy.map(|e0| {
        estimates
            .iter()
            .filter(|e| (*e - e0).abs() < cfg.accuracy.chemical_accuracy)
            .count() as f64
            / n
    });
    Ok(EnsembleReport {
        estimates,
        mean,
        variance,
        p_within_accuracy,
        failures,
    })
}

/// One replicate of the ensemble pipeline: draw (or subsample) a dataset,
/// train a network on it, and estimate the observable. The result is a
/// pure function of the seed, so two replicates handed the same seed
/// produce identical estimates.
pub fn single_replicate(
    obs: &Observable,
    data: &EnsembleData<'_>,
    seed: u64,
    cfg: &EnsembleConfig,
    train_cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<f64> {
    let basis_pool = observable_basis_pool(obs);
    run_replicate(obs, data, &basis_pool, seed, cfg, train_cfg, sampler_cfg)
}

fn run_replicate(
    obs: &Observable,
    data: &EnsembleData<'_>,
    basis_pool: &[BasisAssignment],
    seed: u64,
    cfg: &EnsembleConfig,
    train_cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<f64> {
    let dataset = match data {
        EnsembleData::Synthetic { state, total_shots } => {
            crate::exactsim::sample_uniform_basis_measurements(
                state,
                basis_pool,
                *total_shots,
                derive_seed(seed, "data"),
            )?
        }
        EnsembleData::Pool { dataset, subsample } => {
            dataset.subsample(*subsample, derive_seed(seed, "data"))?
        }
    };
    let mut t_cfg = train_cfg.clone();
    t_cfg.seed = derive_seed(seed, "train");
    let report = trainer::train(&dataset, obs, &t_cfg, sampler_cfg)?;
    let est_cfg = sampler_cfg.clone().with_seed(derive_seed(seed, "estimate"));
    let estimate = nn_estimate(&report.model, obs, cfg.n_mc, &est_cfg)?;
    Ok(estimate.mean)
}

/// Measurement bases of an observable's terms, in term order (the bases a
/// training dataset is drawn from).
pub fn observable_basis_pool(obs: &Observable) -> Vec<BasisAssignment> {
    obs.terms()
        .iter()
        .map(|t| BasisAssignment::for_pauli(&t.string))
        .collect()
}

/// One row of the method-comparison table emitted by budget sweeps.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub total_measurements: usize,
    pub nn_mean: f64,
    pub nn_var: f64,
    pub qc_mean: f64,
    pub qc_eps2: f64,
    pub eps2_max: f64,
    pub p_nn: f64,
    pub p_qc: f64,
}

/// Histogram CSV: one replicate estimate per row.
pub fn write_histogram_csv(writer: &mut impl Write, report: &EnsembleReport) -> Result<()> {
    writeln!(writer, "estimate")?;
    for estimate in &report.estimates {
        writeln!(writer, "{estimate}")?;
    }
    Ok(())
}

/// Comparison CSV with one row per measurement budget.
pub fn write_comparison_csv(writer: &mut impl Write, rows: &[ComparisonRow]) -> Result<()> {
    writeln!(writer, "M,nn_mean,nn_var,qc_mean,qc_eps2,eps2_max,p_nn,p_qc")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            row.total_measurements,
            row.nn_mean,
            row.nn_var,
            row.qc_mean,
            row.qc_eps2,
            row.eps2_max,
            row.p_nn,
            row.p_qc
        )?;
    }
    Ok(())
}
