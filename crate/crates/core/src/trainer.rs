//! Unsupervised reconstruction of the wavefunction from measurement data.
//!
//! The objective is the negative log-likelihood of the records under the
//! RBM's rotated-basis Born probabilities,
//!
//! ```text
//! C = log Z - (1/M) sum_records log |psi(sigma^b)|^2
//! ```
//!
//! whose gradient splits into a model-driven (negative) phase sampled by
//! Monte Carlo and a data-driven (positive) phase averaged over the
//! quasi-probability weights of each record. Updates use RMSprop applied
//! independently to the real and imaginary parts of every parameter.

use crate::dataset::{Dataset, MeasurementRecord};
use crate::error::{Error, Result};
use crate::estimator;
use crate::pauli::Observable;
use crate::rbm::{GradientVector, RbmWavefunction};
use crate::sampler::{self, SamplerConfig};
use crate::seeding::derive_seed;

/// Rule for picking the final parameters out of the checkpoint pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Re-estimate the observable on every pool member and keep the lowest
    /// energy (synthetic workflow).
    LowestEnergy,
    /// Keep the lowest validation NLL (experimental workflow, where no
    /// exact energy exists even in principle).
    LowestValidationNll,
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub batch_size: usize,
    /// Model samples per update for the negative phase; defaults to the
    /// batch size when `None`.
    pub negative_samples: Option<usize>,
    pub epochs: usize,
    /// Checkpoints retained, ranked by validation NLL.
    pub checkpoint_pool: usize,
    pub selection_rule: SelectionRule,
    /// Monte Carlo samples per pool member under lowest-energy selection.
    pub selection_n_mc: usize,
    /// Hidden units; defaults to the qubit count when `None`.
    pub n_hidden: Option<usize>,
    pub seed: u64,
}

pub const MAX_BATCH_SIZE: usize = 10_000;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            rms_decay: 0.9,
            rms_epsilon: 1e-7,
            batch_size: 100,
            negative_samples: None,
            epochs: 100,
            checkpoint_pool: 200,
            selection_rule: SelectionRule::LowestEnergy,
            selection_n_mc: 10_000,
            n_hidden: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return Err(Error::invalid("RMS decay must lie in (0, 1)"));
        }
        if !self.rms_epsilon.is_finite() || self.rms_epsilon <= 0.0 {
            return Err(Error::invalid("RMS epsilon must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > MAX_BATCH_SIZE {
            return Err(Error::invalid(format!(
                "batch size must lie in [1, {MAX_BATCH_SIZE}]"
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.checkpoint_pool == 0 {
            return Err(Error::invalid("checkpoint pool must be >= 1"));
        }
        if self.selection_n_mc == 0 {
            return Err(Error::invalid("selection_n_mc must be >= 1"));
        }
        Ok(())
    }

    fn negative_count(&self) -> usize {
        self.negative_samples.unwrap_or(self.batch_size)
    }
}

/// RMSprop state: running average of the squared gradient, kept separately
/// for the real and imaginary part of every parameter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    g_re: Vec<f64>,
    g_im: Vec<f64>,
}

impl OptimizerState {
    pub fn new(parameter_count: usize) -> Self {
        OptimizerState {
            g_re: vec![0.0; parameter_count],
            g_im: vec![0.0; parameter_count],
        }
    }

    pub fn g_re(&self) -> &[f64] {
        &self.g_re
    }

    pub fn g_im(&self) -> &[f64] {
        &self.g_im
    }
}

/// NLL of a dataset in nats per record.
#[derive(Debug, Clone, Copy)]
pub struct NllValue {
    pub nats: f64,
    /// Records whose rotated amplitude vanished and were left out of the
    /// average.
    pub skipped_records: usize,
}

/// Per-epoch progress.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub nll_validation: f64,
    pub nll_train: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Checkpoint id of the selected parameters (the epoch after which
    /// they were saved; 0 is the initialization).
    pub selected_epoch: usize,
    pub selected_validation_nll: f64,
    /// Energy of the selected member under lowest-energy selection.
    pub selected_energy: Option<f64>,
    pub initial_validation_nll: f64,
    pub skipped_records: usize,
    pub model: RbmWavefunction,
}

/// Exact NLL: log Z - mean over records of log |psi(sigma^b)|^2.
///
/// Degenerate records (vanishing rotated amplitude) are skipped with a
/// warning and reported in the count.
pub fn nll(rbm: &RbmWavefunction, ds: &Dataset) -> Result<NllValue> {
    let log_z = rbm.log_partition_exact()?;
    let mut acc = 0.0f64;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for record in ds.records() {
        let amp = rbm.rotated_amplitude(record)?;
        if amp.is_degenerate() {
            skipped += 1;
            continue;
        }
        acc += amp.log_abs2();
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid(
            "all records have degenerate rotated amplitudes",
        ));
    }
    if skipped > 0 {
        log::warn!("NLL evaluation skipped {skipped} degenerate records");
    }
    Ok(NllValue {
        nats: log_z - acc / used as f64,
        skipped_records: skipped,
    })
}

/// NLL gradient from a data batch (positive phase) and model samples
/// (negative phase):
///
/// ```text
/// G = 2 [ <conj Phi>_model - <quasi-probability average>_batch ]
/// ```
///
/// The returned vector is the ascent direction of the NLL; the optimizer
/// subtracts it. Degenerate records are skipped and counted.
pub fn gradient(
    rbm: &RbmWavefunction,
    batch: &[MeasurementRecord],
    negative: &[Vec<u8>],
) -> Result<(GradientVector, usize)> {
    if negative.is_empty() {
        return Err(Error::invalid("gradient needs negative samples"));
    }
    let mut model = GradientVector::zeros(rbm.n_visible(), rbm.n_hidden());
    for sample in negative {
        let phi = rbm.log_derivatives(sample)?;
        for (m, v) in model.values_mut().iter_mut().zip(phi.values()) {
            *m += v.conj();
        }
    }
    let inv = 1.0 / negative.len() as f64;
    for m in model.values_mut() {
        *m *= inv;
    }
    assemble_gradient(rbm, batch, model)
}

/// [`gradient`] with the model phase enumerated exactly over the full
/// Hilbert space instead of Monte Carlo samples. Subject to the same
/// capacity cap as the partition function.
pub fn gradient_exact(
    rbm: &RbmWavefunction,
    batch: &[MeasurementRecord],
) -> Result<(GradientVector, usize)> {
    let log_z = rbm.log_partition_exact()?;
    let n = rbm.n_visible();
    let mut model = GradientVector::zeros(n, rbm.n_hidden());
    let mut sigma = vec![0u8; n];
    for idx in 0..(1usize << n) {
        for (q, s) in sigma.iter_mut().enumerate() {
            *s = ((idx >> (n - 1 - q)) & 1) as u8;
        }
        let weight = (2.0 * rbm.log_psi(&sigma)?.re - log_z).exp();
        if weight == 0.0 {
            continue;
        }
        let phi = rbm.log_derivatives(&sigma)?;
        for (m, v) in model.values_mut().iter_mut().zip(phi.values()) {
            *m += weight * v.conj();
        }
    }
    assemble_gradient(rbm, batch, model)
}

/// Combine a (pre-averaged) model phase with the data phase of a batch.
fn assemble_gradient(
    rbm: &RbmWavefunction,
    batch: &[MeasurementRecord],
    model: GradientVector,
) -> Result<(GradientVector, usize)> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient needs a nonempty batch"));
    }
    let mut positive = GradientVector::zeros(rbm.n_visible(), rbm.n_hidden());
    let mut used = 0usize;
    let mut skipped = 0usize;
    for record in batch {
        match rbm.rotated_grad_average(record) {
            Ok(avg) => {
                for (p, v) in positive.values_mut().iter_mut().zip(avg.values()) {
                    *p += v;
                }
                used += 1;
            }
            Err(Error::DegenerateAmplitude { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::invalid("every record in the batch is degenerate"));
    }
    if skipped > 0 {
        log::warn!("gradient skipped {skipped} degenerate records");
    }
    let inv_used = 1.0 / used as f64;
    let mut grad = GradientVector::zeros(rbm.n_visible(), rbm.n_hidden());
    for ((g, m), p) in grad
        .values_mut()
        .iter_mut()
        .zip(model.values())
        .zip(positive.values())
    {
        *g = 2.0 * (m - p * inv_used);
    }
    Ok((grad, skipped))
}

/// One RMSprop update: g' = beta g + (1 - beta) G^2 and
/// lambda' = lambda - eta G / (sqrt(g') + eps), applied independently to
/// the real and imaginary parts.
pub fn rmsprop_step(
    rbm: &RbmWavefunction,
    opt: &OptimizerState,
    grad: &GradientVector,
    cfg: &TrainConfig,
) -> Result<(RbmWavefunction, OptimizerState)> {
    if grad.n_visible() != rbm.n_visible() || grad.n_hidden() != rbm.n_hidden() {
        return Err(Error::Dimension {
            expected: rbm.parameter_count(),
            got: grad.len(),
        });
    }
    if let Some(index) = grad
        .values()
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NonFiniteGradient { index });
    }

    let beta = cfg.rms_decay;
    let eta = cfg.learning_rate;
    let eps = cfg.rms_epsilon;
    let mut params = rbm.flatten();
    let mut next = OptimizerState {
        g_re: Vec::with_capacity(params.len()),
        g_im: Vec::with_capacity(params.len()),
    };
    for (k, value) in params.iter_mut().enumerate() {
        let g = grad.values()[k];
        let g_re = beta * opt.g_re[k] + (1.0 - beta) * g.re * g.re;
        let g_im = beta * opt.g_im[k] + (1.0 - beta) * g.im * g.im;
        value.re -= eta / (g_re.sqrt() + eps) * g.re;
        value.im -= eta / (g_im.sqrt() + eps) * g.im;
        next.g_re.push(g_re);
        next.g_im.push(g_im);
    }
    let updated = RbmWavefunction::from_flat(rbm.n_visible(), rbm.n_hidden(), &params)?;
    Ok((updated, next))
}

struct PoolEntry {
    validation_nll: f64,
    epoch: usize,
    params: RbmWavefunction,
}

/// Train an RBM on a measurement dataset.
///
/// Splits off 10% of the data for validation, iterates shuffled
/// mini-batches with freshly sampled negative phases, tracks validation
/// NLL per epoch, and keeps a pool of the best checkpoints. A checkpoint
/// enters the pool only if it does not fall behind the initial parameters,
/// so no selection rule can return something worse than the start.
///
/// Validation uses the exact partition function; above its qubit cap the
/// run is refused rather than silently approximated.
pub fn train(
    ds: &Dataset,
    obs: &Observable,
    cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    sampler_cfg.validate()?;
    if ds.n_qubits() != obs.n_qubits() {
        return Err(Error::Dimension {
            expected: obs.n_qubits(),
            got: ds.n_qubits(),
        });
    }

    let master = cfg.seed;
    let (train_ds, validation_ds) = ds.split(0.9, derive_seed(master, "split"))?;
    let n_visible = ds.n_qubits();
    let n_hidden = cfg.n_hidden.unwrap_or(n_visible);
    let mut rbm = RbmWavefunction::random(n_visible, n_hidden, derive_seed(master, "init"))?;
    let mut opt = OptimizerState::new(rbm.parameter_count());

    let initial_validation_nll = nll(&rbm, &validation_ds)?.nats;
    let mut pool: Vec<PoolEntry> = vec![PoolEntry {
        validation_nll: initial_validation_nll,
        epoch: 0,
        params: rbm.clone(),
    }];

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut skipped_total = 0usize;
    let n_train = train_ds.len();
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 1..=cfg.epochs {
        shuffle(&mut order, derive_seed(master, &format!("shuffle/{epoch}")));
        for (update, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<MeasurementRecord> = chunk
                .iter()
                .map(|&i| train_ds.records()[i].clone())
                .collect();
            let neg_cfg = sampler_cfg
                .clone()
                .with_seed(derive_seed(master, &format!("neg/{epoch}/{update}")));
            let negative = sampler::draw_samples(&rbm, &neg_cfg, cfg.negative_count())?;
            let (grad, skipped) = gradient(&rbm, &batch, &negative)?;
            skipped_total += skipped;
            let (next_rbm, next_opt) = rmsprop_step(&rbm, &opt, &grad, cfg)?;
            rbm = next_rbm;
            opt = next_opt;
        }

        let validation = nll(&rbm, &validation_ds)?;
        let training = nll(&rbm, &train_ds)?;
        skipped_total += validation.skipped_records + training.skipped_records;
        log::info!(
            "epoch {epoch} nll_val {} nll_train {}",
            validation.nats,
            training.nats
        );
        epochs.push(EpochStats {
            epoch,
            nll_validation: validation.nats,
            nll_train: training.nats,
        });

        if validation.nats <= initial_validation_nll {
            pool.push(PoolEntry {
                validation_nll: validation.nats,
                epoch,
                params: rbm.clone(),
            });
            pool.sort_by(|a, b| {
                a.validation_nll
                    .partial_cmp(&b.validation_nll)
                    .unwrap()
                    .then(a.epoch.cmp(&b.epoch))
            });
            pool.truncate(cfg.checkpoint_pool);
        }
    }

    let (selected_idx, selected_energy) = match cfg.selection_rule {
        SelectionRule::LowestValidationNll => (0, None),
        SelectionRule::LowestEnergy => {
            let mut best = (0usize, f64::INFINITY);
            for (idx, entry) in pool.iter().enumerate() {
                let est_cfg = sampler_cfg
                    .clone()
                    .with_seed(derive_seed(master, &format!("select/{}", entry.epoch)));
                let report =
                    estimator::nn_estimate(&entry.params, obs, cfg.selection_n_mc, &est_cfg)?;
                if report.mean < best.1 {
                    best = (idx, report.mean);
                }
            }
            (best.0, Some(best.1))
        }
    };
    let selected = &pool[selected_idx];
    Ok(TrainReport {
        epochs,
        selected_epoch: selected.epoch,
        selected_validation_nll: selected.validation_nll,
        selected_energy,
        initial_validation_nll,
        skipped_records: skipped_total,
        model: selected.params.clone(),
    })
}

fn shuffle(order: &mut [usize], seed: u64) {
    use rand::seq::SliceRandom;
    let mut rng = crate::seeding::derive_rng(seed, "shuffle");
    order.shuffle(&mut rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactsim::BasisAssignment;
    use num_complex::Complex64;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn all_z_dataset(n_qubits: usize, rows: &[&[u8]]) -> Dataset {
        let basis = BasisAssignment::all_z(n_qubits).unwrap();
        Dataset::new(
            n_qubits,
            rows.iter()
                .map(|bits| MeasurementRecord::new(basis.clone(), bits.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn nll_uniform_model() {
        // Zero parameters: p = 2^-N for every record, NLL = N log 2.
        let rbm = RbmWavefunction::zeros(3, 3).unwrap();
        let ds = all_z_dataset(3, &[&[0, 0, 0], &[1, 0, 1], &[1, 1, 1]]);
        let value = nll(&rbm, &ds).unwrap();
        assert_relative_eq!(value.nats, 3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(value.skipped_records, 0);
    }

    #[test]
    fn nll_decreases_toward_point_mass() {
        // Model matching a point-mass distribution on |00>: NLL falls
        // monotonically as the biases walk toward -infinity.
        let ds = all_z_dataset(2, &[&[0, 0], &[0, 0], &[0, 0]]);
        let mut previous = f64::INFINITY;
        for scale in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let rbm = RbmWavefunction::new(
                2,
                1,
                vec![c(-scale, 0.0); 2],
                vec![c(0.0, 0.0)],
                vec![c(0.0, 0.0); 2],
            )
            .unwrap();
            let value = nll(&rbm, &ds).unwrap().nats;
            assert!(value < previous, "scale {scale}: {value} !< {previous}");
            previous = value;
        }
        assert!(previous < 1e-6);
    }

    #[test]
    fn nll_matches_enumeration() {
        // Independent route: explicit rotated state per distinct basis.
        let rbm = RbmWavefunction::random(3, 2, 40).unwrap();
        let basis: BasisAssignment = "XZY".parse().unwrap();
        let records: Vec<MeasurementRecord> = [[0u8, 1, 0], [1, 1, 0], [0, 0, 1]]
            .iter()
            .map(|bits| MeasurementRecord::new(basis.clone(), bits.to_vec()).unwrap())
            .collect();
        let ds = Dataset::new(3, records.clone()).unwrap();

        let mut amps = Vec::new();
        for idx in 0..8usize {
            let sigma = crate::exactsim::bits_of_index(3, idx);
            amps.push(rbm.log_psi(&sigma).unwrap().exp());
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let state = crate::exactsim::StateVector::normalized(3, amps).unwrap();
        let rotated = crate::exactsim::rotate_to_basis(&state, &basis).unwrap();
        let expected = -records
            .iter()
            .map(|r| {
                // |<sigma^b|psi>|^2 = p_rotated * Z.
                (rotated.probabilities()[crate::exactsim::index_of_bits(r.bits())] * norm2).ln()
            })
            .sum::<f64>()
            / 3.0
            + norm2.ln();
        assert_relative_eq!(nll(&rbm, &ds).unwrap().nats, expected, epsilon = 1e-10);
    }

    #[test]
    fn gradient_zero_at_uniform_optimum() {
        // Uniform model, data = every z-string once (exactly p_lambda),
        // negative phase enumerated exactly: stationary point.
        let rbm = RbmWavefunction::zeros(2, 2).unwrap();
        let ds = all_z_dataset(2, &[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let negative: Vec<Vec<u8>> = (0..4)
            .map(|i| crate::exactsim::bits_of_index(2, i))
            .collect();
        let (grad, skipped) = gradient(&rbm, ds.records(), &negative).unwrap();
        assert_eq!(skipped, 0);
        for v in grad.values() {
            assert!(v.norm() < 1e-12, "{v}");
        }
    }

    #[test]
    fn rmsprop_zero_gradient_decays_state() {
        let rbm = RbmWavefunction::random(2, 2, 3).unwrap();
        let cfg = TrainConfig::default();
        let mut opt = OptimizerState::new(rbm.parameter_count());
        opt.g_re[0] = 1.0;
        let grad = GradientVector::zeros(2, 2);
        let (next_rbm, next_opt) = rmsprop_step(&rbm, &opt, &grad, &cfg).unwrap();
        assert_eq!(next_rbm, rbm);
        assert_relative_eq!(next_opt.g_re[0], cfg.rms_decay, epsilon = 1e-15);
    }

    #[test]
    fn rmsprop_fresh_state_formula() {
        let rbm = RbmWavefunction::zeros(1, 1).unwrap();
        let cfg = TrainConfig::default();
        let opt = OptimizerState::new(rbm.parameter_count());
        let mut grad = GradientVector::zeros(1, 1);
        grad.values_mut()[0] = c(0.5, 0.0);
        let (next_rbm, next_opt) = rmsprop_step(&rbm, &opt, &grad, &cfg).unwrap();
        let g_new = (1.0 - cfg.rms_decay) * 0.25;
        assert_relative_eq!(next_opt.g_re[0], g_new, epsilon = 1e-15);
        let expected_step = cfg.learning_rate / (g_new.sqrt() + cfg.rms_epsilon) * 0.5;
        assert_relative_eq!(
            next_rbm.visible_biases()[0].re,
            -expected_step,
            epsilon = 1e-15
        );
        assert_relative_eq!(next_rbm.visible_biases()[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rmsprop_constant_gradient_approaches_learning_rate() {
        // Repeating the same gradient: g -> G^2, step -> eta.
        let mut rbm = RbmWavefunction::zeros(1, 1).unwrap();
        let cfg = TrainConfig::default();
        let mut opt = OptimizerState::new(rbm.parameter_count());
        let mut grad = GradientVector::zeros(1, 1);
        grad.values_mut()[0] = c(2.0, 0.0);
        let mut last_step = 0.0;
        for _ in 0..100 {
            let before = rbm.visible_biases()[0].re;
            let (next_rbm, next_opt) = rmsprop_step(&rbm, &opt, &grad, &cfg).unwrap();
            last_step = (next_rbm.visible_biases()[0].re - before).abs();
            rbm = next_rbm;
            opt = next_opt;
        }
        assert_relative_eq!(opt.g_re[0], 4.0, epsilon = 1e-3);
        assert_relative_eq!(last_step, cfg.learning_rate, epsilon = 1e-5);
    }

    #[test]
    fn rmsprop_rejects_non_finite() {
        let rbm = RbmWavefunction::zeros(1, 1).unwrap();
        let cfg = TrainConfig::default();
        let opt = OptimizerState::new(rbm.parameter_count());
        let mut grad = GradientVector::zeros(1, 1);
        grad.values_mut()[1] = c(f64::NAN, 0.0);
        assert!(matches!(
            rmsprop_step(&rbm, &opt, &grad, &cfg),
            Err(Error::NonFiniteGradient { index: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.batch_size = MAX_BATCH_SIZE + 1;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 10;
        cfg.rms_decay = 1.0;
        assert!(cfg.validate().is_err());
    }
}
