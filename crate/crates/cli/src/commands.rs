//! Command implementations for the pipeline.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nnqe::dataset::Dataset;
use nnqe::estimator::{
    self, standard_estimate, standard_variance_exact, ComparisonRow, EnsembleConfig, EnsembleData,
};
use nnqe::exactsim::{ground_state, sample_measurements, BasisAssignment, StateVector};
use nnqe::pauli::Observable;
use nnqe::rbm::RbmWavefunction;
use nnqe::seeding::derive_seed;
use nnqe::trainer;

use crate::config::{CompareMode, RunConfig};
use crate::CliError;

fn load_observable(cfg: &RunConfig) -> Result<Observable, CliError> {
    let path = cfg.require_input("observable", &cfg.observable)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Observable::parse(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn prepare_output_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        CliError::usage(format!("cannot create {}: {e}", cfg.output_dir.display()))
    })
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), CliError> {
    let mut writer = BufWriter::new(
        File::create(path)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?,
    );
    writer
        .write_all(body)
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::runtime(format!("write {}: {e}", path.display())))
}

/// `gen-data`: sample a synthetic measurement dataset from the exact
/// ground state, bases drawn uniformly over the observable's Pauli terms.
pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    let obs = load_observable(cfg)?;
    let out = cfg.require_output("dataset", &cfg.dataset)?;
    let shots = cfg
        .shots
        .ok_or_else(|| CliError::usage("config key 'shots' is required"))?;
    if shots == 0 {
        return Err(CliError::usage("shots must be >= 1"));
    }

    let (energy, state) = ground_state(&obs).map_err(CliError::from_run)?;
    println!("ground energy {energy}");
    for (k, term) in obs.terms().iter().enumerate() {
        let variance =
            nnqe::exactsim::pauli_variance_exact(&state, &term.string).map_err(CliError::from_run)?;
        println!("term {k} {} coefficient {} variance {variance}", term.string, term.coefficient);
    }

    let pool = estimator::observable_basis_pool(&obs);
    let ds = nnqe::exactsim::sample_uniform_basis_measurements(
        &state,
        &pool,
        shots,
        derive_seed(cfg.seed, "gen-data"),
    )
    .map_err(CliError::from_run)?;
    ds.save(&out).map_err(CliError::from_run)?;
    println!("wrote {} records to {}", ds.len(), out.display());
    Ok(())
}

/// `train`: reconstruct the wavefunction from a dataset, write the
/// selected checkpoint and the per-epoch log.
pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let obs = load_observable(cfg)?;
    let ds_path = cfg.require_input("dataset", &cfg.dataset)?;
    let checkpoint = cfg.require_output("checkpoint", &cfg.checkpoint)?;
    prepare_output_dir(cfg)?;
    let ds = Dataset::load(&ds_path)
        .map_err(|e| CliError::usage(format!("{}: {e}", ds_path.display())))?;

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(cfg.seed, "train");
    let sampler_cfg = cfg.sampler_config(0)?; // per-update seeds derived inside
    let report =
        trainer::train(&ds, &obs, &train_cfg, &sampler_cfg).map_err(CliError::from_run)?;

    let mut log = String::new();
    for epoch in &report.epochs {
        log.push_str(&format!(
            "epoch {} nll_val {} nll_train {}\n",
            epoch.epoch, epoch.nll_validation, epoch.nll_train
        ));
    }
    write_file(&cfg.output_dir.join("train_epochs.log"), log.as_bytes())?;
    report.model.save_params(&checkpoint).map_err(CliError::from_run)?;

    println!(
        "selected checkpoint {} validation_nll {}",
        report.selected_epoch, report.selected_validation_nll
    );
    if let Some(energy) = report.selected_energy {
        println!("selected energy {energy}");
    }
    if report.skipped_records > 0 {
        println!("skipped degenerate records {}", report.skipped_records);
    }
    println!("wrote checkpoint to {}", checkpoint.display());
    Ok(())
}

/// `estimate`: neural-network estimate of the observable from a trained
/// checkpoint; prints the result and appends a CSV report.
pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let obs = load_observable(cfg)?;
    let ckpt_path = cfg.require_input("checkpoint", &cfg.checkpoint)?;
    prepare_output_dir(cfg)?;
    let rbm = RbmWavefunction::load_params(&ckpt_path)
        .map_err(|e| CliError::usage(format!("{}: {e}", ckpt_path.display())))?;

    let sampler_cfg = cfg.sampler_config(derive_seed(cfg.seed, "estimate"))?;
    let report = estimator::nn_estimate(&rbm, &obs, cfg.estimate_n_mc, &sampler_cfg)
        .map_err(CliError::from_run)?;
    println!("mean {} std_error {}", report.mean, report.std_error);
    println!(
        "variance {} n_samples {} imag_mean {}",
        report.variance, report.n_samples, report.imag_mean
    );

    let csv = format!(
        "method,mean,variance,std_error,n_samples\n{},{},{},{},{}\n",
        report.method.tag(),
        report.mean,
        report.variance,
        report.std_error,
        report.n_samples
    );
    write_file(&cfg.output_dir.join("estimate.csv"), csv.as_bytes())?;
    Ok(())
}

/// `compare`: sweep measurement budgets, run a replicate ensemble per
/// budget, and tabulate the two estimators.
pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let obs = load_observable(cfg)?;
    if cfg.budgets.is_empty() {
        return Err(CliError::usage("config key 'budgets' is required"));
    }
    if cfg.replicates < 2 {
        return Err(CliError::usage("compare needs replicates >= 2"));
    }
    prepare_output_dir(cfg)?;
    let accuracy = cfg.accuracy()?;

    // Pool mode ingests a measurement pool; synthetic mode prepares the
    // exact ground state once.
    let pool: Option<Dataset> = match cfg.mode {
        CompareMode::Pool => {
            let path = cfg.require_input("dataset", &cfg.dataset)?;
            Some(
                Dataset::load(&path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
            )
        }
        CompareMode::Synthetic => None,
    };
    let exact: Option<(f64, StateVector)> = match cfg.mode {
        CompareMode::Synthetic => Some(ground_state(&obs).map_err(CliError::from_run)?),
        CompareMode::Pool => None,
    };

    let mut rows = Vec::with_capacity(cfg.budgets.len());
    for &total in &cfg.budgets {
        let budget =
            estimator::ShotBudget::new(total, obs.n_terms()).map_err(CliError::from_run)?;
        let (qc_mean, sigma2_qc, nn_report) = match cfg.mode {
            CompareMode::Synthetic => {
                let (energy, state) = exact.as_ref().expect("synthetic state");
                // Standard arm: exact ground-state variances plus one
                // simulated per-term S-shot run for the mean.
                let sigma2 = standard_variance_exact(state, &obs).map_err(CliError::from_run)?;
                let groups: Vec<Vec<nnqe::dataset::MeasurementRecord>> = obs
                    .terms()
                    .iter()
                    .enumerate()
                    .map(|(k, term)| {
                        sample_measurements(
                            state,
                            &[BasisAssignment::for_pauli(&term.string)],
                            budget.shots_per_term,
                            derive_seed(cfg.seed, &format!("compare/qc/{total}/{k}")),
                        )
                        .map(|ds| ds.records().to_vec())
                    })
                    .collect::<Result<_, _>>()
                    .map_err(CliError::from_run)?;
                let qc = standard_estimate(&groups, &obs).map_err(CliError::from_run)?;

                let ens_cfg = EnsembleConfig {
                    replicates: cfg.replicates,
                    n_mc: cfg.estimate_n_mc,
                    seed: derive_seed(cfg.seed, &format!("compare/nn/{total}")),
                    exact_energy: Some(*energy),
                    accuracy,
                };
                let mut train_cfg = cfg.train.clone();
                train_cfg.seed = 0; // overridden per replicate by the ensemble
                let report = estimator::ensemble_run(
                    &obs,
                    EnsembleData::Synthetic {
                        state,
                        total_shots: budget.total,
                    },
                    &ens_cfg,
                    &train_cfg,
                    &cfg.sampler_config(0)?,
                )
                .map_err(CliError::from_run)?;
                (qc.mean, sigma2, report)
            }
            CompareMode::Pool => {
                let pool_ds = pool.as_ref().expect("pool dataset");
                let groups = pool_ds.group_by_pauli(&obs).map_err(CliError::from_run)?;
                let qc = standard_estimate(&groups, &obs).map_err(CliError::from_run)?;
                // Sample-variance route: sigma^2 = sum c_k^2 var_k.
                let sigma2 = qc.variance;
                let ens_cfg = EnsembleConfig {
                    replicates: cfg.replicates,
                    n_mc: cfg.estimate_n_mc,
                    seed: derive_seed(cfg.seed, &format!("compare/nn/{total}")),
                    exact_energy: None,
                    accuracy,
                };
                let mut train_cfg = cfg.train.clone();
                train_cfg.seed = 0;
                let report = estimator::ensemble_run(
                    &obs,
                    EnsembleData::Pool {
                        dataset: pool_ds,
                        subsample: total,
                    },
                    &ens_cfg,
                    &train_cfg,
                    &cfg.sampler_config(0)?,
                )
                .map_err(CliError::from_run)?;
                (qc.mean, sigma2, report)
            }
        };

        if nn_report.is_partial() {
            log::warn!(
                "budget {total}: {} replicate(s) failed; row covers the rest",
                nn_report.failures.len()
            );
        }
        let mut hist = Vec::new();
        estimator::write_histogram_csv(&mut hist, &nn_report).map_err(CliError::from_run)?;
        write_file(
            &cfg.output_dir.join(format!("histogram_M{total}.csv")),
            &hist,
        )?;

        rows.push(ComparisonRow {
            total_measurements: total,
            nn_mean: nn_report.mean,
            nn_var: nn_report.variance,
            qc_mean,
            qc_eps2: sigma2_qc / budget.shots_per_term as f64,
            eps2_max: estimator::error_upper_bound(&obs, budget.total)
                .map_err(CliError::from_run)?,
            p_nn: nn_report.p_within_accuracy.unwrap_or(f64::NAN),
            p_qc: estimator::p_chem_accuracy_standard(sigma2_qc, budget.shots_per_term, &accuracy),
        });
        println!(
            "M {total}: nn_mean {} nn_var {} qc_eps2 {}",
            nn_report.mean,
            nn_report.variance,
            sigma2_qc / budget.shots_per_term as f64
        );
    }

    let mut csv = Vec::new();
    estimator::write_comparison_csv(&mut csv, &rows).map_err(CliError::from_run)?;
    let path = cfg.output_dir.join("comparison.csv");
    write_file(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// `convert-counts`: expand a per-Pauli count table into a records file.
pub fn convert_counts(cfg: &RunConfig) -> Result<(), CliError> {
    let counts_path = cfg.require_input("counts", &cfg.counts)?;
    let out = cfg.require_output("dataset", &cfg.dataset)?;
    let ds = Dataset::load_counts(&counts_path)
        .map_err(|e| CliError::usage(format!("{}: {e}", counts_path.display())))?;
    ds.save(&out).map_err(CliError::from_run)?;
    println!("wrote {} records to {}", ds.len(), out.display());
    Ok(())
}
