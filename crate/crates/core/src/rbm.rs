//! Complex-valued restricted Boltzmann machine wavefunction.
//!
//! The RBM encodes an unnormalized amplitude over visible bitstrings
//! `sigma` (bits in {0, 1}):
//!
//! ```text
//! log psi(sigma) = sum_i a_i sigma_i + sum_j log cosh(sum_i W_ij sigma_i + d_j)
//! ```
//!
//! with complex parameters a (visible biases), d (hidden biases) and W
//! (weights). Hidden units are marginalized analytically into the
//! log-cosh factors. Everything downstream works with amplitude ratios or
//! log-amplitudes, so psi is never normalized; the exact partition
//! function is available at small qubit counts for the NLL.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::dataset::MeasurementRecord;
use crate::error::{Error, Result};
use crate::exactsim::{basis_bracket, Axis};
use crate::seeding::derive_rng;

/// Cap on the number of qubits measured off the reference basis in one
/// record (the rotated amplitude sums 2^{N_U} terms).
pub const ROTATION_QUBIT_CAP: usize = 16;

/// Cap on exact partition-function enumeration.
pub const LOG_Z_QUBIT_CAP: usize = 20;

/// Initialization scale for random parameters: i.i.d. Gaussian on real and
/// imaginary parts, small enough to start near the uniform state.
pub const PARAM_INIT_STD: f64 = 0.01;

/// A rotated amplitude vanishes for gradient purposes below this
/// log-magnitude (|psi| < 1e-300).
const LOG_DEGENERATE: f64 = -690.775527898214; // ln(1e-300)

const CHECKPOINT_MAGIC: &[u8; 8] = b"NNQERBM\n";
const CHECKPOINT_VERSION: u32 = 1;

/// Numerically stable complex log cosh: exact up to floating point for
/// small arguments, |Re z| - log 2 asymptotics for large ones.
fn ln_cosh(z: Complex64) -> Complex64 {
    let s = if z.re >= 0.0 { z } else { -z };
    s + (Complex64::new(1.0, 0.0) + (-2.0 * s).exp()).ln() - Complex64::new(std::f64::consts::LN_2, 0.0)
}

/// tanh without the overflow of sinh/cosh at large real parts.
fn stable_tanh(z: Complex64) -> Complex64 {
    if z.re.abs() > 20.0 {
        // tanh(z) = sign(Re z) up to O(e^-40).
        Complex64::new(z.re.signum(), 0.0)
    } else {
        z.tanh()
    }
}

/// Flat complex gradient of log psi with respect to all parameters,
/// ordered (a, d, W row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    n_visible: usize,
    n_hidden: usize,
    values: Vec<Complex64>,
}

impl GradientVector {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        GradientVector {
            n_visible,
            n_hidden,
            values: vec![Complex64::new(0.0, 0.0); n_visible + n_hidden + n_visible * n_hidden],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Component for visible bias i.
    pub fn a(&self, i: usize) -> Complex64 {
        self.values[i]
    }

    /// Component for hidden bias j.
    pub fn d(&self, j: usize) -> Complex64 {
        self.values[self.n_visible + j]
    }

    /// Component for weight (i, j).
    pub fn w(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.n_visible + self.n_hidden + i * self.n_hidden + j]
    }

}

/// The scaled form `exp(log_scale) * value` of a rotated amplitude; keeps
/// the log-domain bookkeeping explicit so consumers never overflow.
#[derive(Debug, Clone, Copy)]
pub struct ScaledAmplitude {
    pub log_scale: f64,
    pub value: Complex64,
}

impl ScaledAmplitude {
    /// Materialize the amplitude (may overflow for extreme parameters).
    pub fn amplitude(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    /// log |amplitude|; -inf for an exact zero.
    pub fn log_abs(&self) -> f64 {
        self.log_scale + self.value.norm().ln()
    }

    /// log |amplitude|^2, the quantity entering the NLL.
    pub fn log_abs2(&self) -> f64 {
        2.0 * self.log_abs()
    }

    pub fn is_degenerate(&self) -> bool {
        let log_abs = self.log_abs();
        log_abs.is_nan() || log_abs <= LOG_DEGENERATE
    }
}

/// Complex-valued RBM wavefunction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmWavefunction {
    n_visible: usize,
    n_hidden: usize,
    a: Vec<Complex64>,
    d: Vec<Complex64>,
    w: Vec<Complex64>, // row-major: w[i * n_hidden + j]
}

impl RbmWavefunction {
    pub fn new(
        n_visible: usize,
        n_hidden: usize,
        a: Vec<Complex64>,
        d: Vec<Complex64>,
        w: Vec<Complex64>,
    ) -> Result<Self> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::invalid("RBM needs at least one visible and one hidden unit"));
        }
        if a.len() != n_visible || d.len() != n_hidden || w.len() != n_visible * n_hidden {
            return Err(Error::invalid("RBM parameter shapes do not match unit counts"));
        }
        let rbm = RbmWavefunction {
            n_visible,
            n_hidden,
            a,
            d,
            w,
        };
        if !rbm.parameters_finite() {
            return Err(Error::invalid("RBM parameters must be finite"));
        }
        Ok(rbm)
    }

    /// All-zero parameters: psi = 1 on every configuration (the uniform
    /// state after normalization).
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Result<Self> {
        Self::new(
            n_visible,
            n_hidden,
            vec![Complex64::new(0.0, 0.0); n_visible],
            vec![Complex64::new(0.0, 0.0); n_hidden],
            vec![Complex64::new(0.0, 0.0); n_visible * n_hidden],
        )
    }

    /// Seeded Gaussian initialization near the uniform state.
    pub fn random(n_visible: usize, n_hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = derive_rng(seed, "rbm/init");
        let normal = Normal::new(0.0, PARAM_INIT_STD).expect("valid std");
        let mut draw = |count: usize| -> Vec<Complex64> {
            (0..count)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect()
        };
        let a = draw(n_visible);
        let d = draw(n_hidden);
        let w = draw(n_visible * n_hidden);
        Self::new(n_visible, n_hidden, a, d, w)
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn visible_biases(&self) -> &[Complex64] {
        &self.a
    }

    pub fn hidden_biases(&self) -> &[Complex64] {
        &self.d
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> Complex64 {
        self.w[i * self.n_hidden + j]
    }

    /// Total complex parameter count.
    pub fn parameter_count(&self) -> usize {
        self.n_visible + self.n_hidden + self.n_visible * self.n_hidden
    }

    fn parameters_finite(&self) -> bool {
        self.a
            .iter()
            .chain(&self.d)
            .chain(&self.w)
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Parameters in the fixed (a, d, W row-major) order shared with
    /// [`GradientVector`] and the checkpoint format.
    pub fn flatten(&self) -> Vec<Complex64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        flat.extend_from_slice(&self.a);
        flat.extend_from_slice(&self.d);
        flat.extend_from_slice(&self.w);
        flat
    }

    pub fn from_flat(n_visible: usize, n_hidden: usize, flat: &[Complex64]) -> Result<Self> {
        let expected = n_visible + n_hidden + n_visible * n_hidden;
        if flat.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: flat.len(),
            });
        }
        let a = flat[..n_visible].to_vec();
        let d = flat[n_visible..n_visible + n_hidden].to_vec();
        let w = flat[n_visible + n_hidden..].to_vec();
        Self::new(n_visible, n_hidden, a, d, w)
    }

    fn check_sigma(&self, sigma: &[u8]) -> Result<()> {
        if sigma.len() != self.n_visible {
            return Err(Error::Dimension {
                expected: self.n_visible,
                got: sigma.len(),
            });
        }
        Ok(())
    }

    /// Hidden-layer activations theta_j = d_j + sum_i W_ij sigma_i.
    pub fn theta(&self, sigma: &[u8]) -> Vec<Complex64> {
        let mut theta = self.d.clone();
        for (i, &bit) in sigma.iter().enumerate() {
            if bit == 1 {
                let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
                for (t, wij) in theta.iter_mut().zip(row) {
                    *t += wij;
                }
            }
        }
        theta
    }

    /// log psi(sigma) with a numerically stable log cosh.
    pub fn log_psi(&self, sigma: &[u8]) -> Result<Complex64> {
        self.check_sigma(sigma)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &bit) in sigma.iter().enumerate() {
            if bit == 1 {
                acc += self.a[i];
            }
        }
        for theta in self.theta(sigma) {
            acc += ln_cosh(theta);
        }
        Ok(acc)
    }

    /// Holomorphic log-derivatives: d/da_i = sigma_i, d/dd_j = tanh(theta_j),
    /// d/dW_ij = sigma_i tanh(theta_j).
    pub fn log_derivatives(&self, sigma: &[u8]) -> Result<GradientVector> {
        self.check_sigma(sigma)?;
        let tanh_theta: Vec<Complex64> =
            self.theta(sigma).into_iter().map(stable_tanh).collect();
        let mut grad = GradientVector::zeros(self.n_visible, self.n_hidden);
        let values = grad.values_mut();
        for (i, &bit) in sigma.iter().enumerate() {
            values[i] = Complex64::new(f64::from(bit), 0.0);
        }
        values[self.n_visible..self.n_visible + self.n_hidden].copy_from_slice(&tanh_theta);
        let w_base = self.n_visible + self.n_hidden;
        for (i, &bit) in sigma.iter().enumerate() {
            if bit == 1 {
                let row = &mut values[w_base + i * self.n_hidden..w_base + (i + 1) * self.n_hidden];
                row.copy_from_slice(&tanh_theta);
            }
        }
        Ok(grad)
    }

    fn off_z_positions(&self, record: &MeasurementRecord) -> Result<Vec<usize>> {
        if record.n_qubits() != self.n_visible {
            return Err(Error::Dimension {
                expected: self.n_visible,
                got: record.n_qubits(),
            });
        }
        let tau: Vec<usize> = (0..self.n_visible)
            .filter(|&q| record.basis().axis(q) != Axis::Z)
            .collect();
        if tau.len() > ROTATION_QUBIT_CAP {
            return Err(Error::Capacity {
                what: "rotated amplitude",
                required: tau.len(),
                cap: ROTATION_QUBIT_CAP,
            });
        }
        Ok(tau)
    }

    /// The amplitude of the state in a record's measurement basis,
    /// psi(sigma^b) = sum_sigma U_{sigma^b sigma} psi(sigma), reduced to a
    /// 2^{N_U} sum over the qubits measured off the reference basis.
    /// Returned in scaled form; the summation is carried out relative to
    /// the largest participating |psi| so it never overflows.
    pub fn rotated_amplitude(&self, record: &MeasurementRecord) -> Result<ScaledAmplitude> {
        let tau = self.off_z_positions(record)?;
        let bits = record.bits();
        let n_terms = 1usize << tau.len();
        let mut sigma = bits.to_vec();
        let mut max_log = f64::NEG_INFINITY;
        let mut entries = Vec::with_capacity(n_terms);
        for s in 0..n_terms {
            set_rotation_bits(&mut sigma, &tau, s);
            let mut coeff = Complex64::new(1.0, 0.0);
            for &q in &tau {
                coeff *= basis_bracket(record.basis().axis(q), bits[q], sigma[q]);
            }
            let log_psi = self.log_psi(&sigma)?;
            max_log = max_log.max(log_psi.re);
            entries.push((coeff, log_psi));
        }
        if !max_log.is_finite() {
            // Every participating amplitude is exactly zero.
            return Ok(ScaledAmplitude {
                log_scale: f64::NEG_INFINITY,
                value: Complex64::new(0.0, 0.0),
            });
        }
        let mut value = Complex64::new(0.0, 0.0);
        for (coeff, log_psi) in entries {
            value += coeff * (log_psi - Complex64::new(max_log, 0.0)).exp();
        }
        Ok(ScaledAmplitude {
            log_scale: max_log,
            value,
        })
    }

    /// Convenience form of [`Self::rotated_amplitude`] as a plain complex
    /// number. For an all-z record this equals exp(log_psi(bits)) exactly.
    pub fn rotated_psi(&self, record: &MeasurementRecord) -> Result<Complex64> {
        Ok(self.rotated_amplitude(record)?.amplitude())
    }

    /// Quasi-probability average of the conjugated log-derivatives for one
    /// record: conj( sum_sigma U psi(sigma) Phi(sigma) / sum_sigma U
    /// psi(sigma) ). This is the data-phase contribution of the NLL
    /// gradient; an all-z record reduces to conj(log_derivatives(bits)).
    pub fn rotated_grad_average(&self, record: &MeasurementRecord) -> Result<GradientVector> {
        let tau = self.off_z_positions(record)?;
        let bits = record.bits();

        // Shared max-log rescaling for numerator and denominator.
        let mut max_log = f64::NEG_INFINITY;
        let mut sigma = bits.to_vec();
        let n_terms = 1usize << tau.len();
        let mut logs = Vec::with_capacity(n_terms);
        let mut coeffs = Vec::with_capacity(n_terms);
        for s in 0..n_terms {
            set_rotation_bits(&mut sigma, &tau, s);
            let mut coeff = Complex64::new(1.0, 0.0);
            for &q in &tau {
                coeff *= basis_bracket(record.basis().axis(q), bits[q], sigma[q]);
            }
            let log_psi = self.log_psi(&sigma)?;
            max_log = max_log.max(log_psi.re);
            logs.push(log_psi);
            coeffs.push(coeff);
        }
        if !max_log.is_finite() {
            return Err(Error::DegenerateAmplitude {
                log_abs: f64::NEG_INFINITY,
            });
        }

        let mut denom = Complex64::new(0.0, 0.0);
        let mut numer = GradientVector::zeros(self.n_visible, self.n_hidden);
        for s in 0..n_terms {
            set_rotation_bits(&mut sigma, &tau, s);
            let weight = coeffs[s] * (logs[s] - Complex64::new(max_log, 0.0)).exp();
            if weight.norm_sqr() == 0.0 {
                continue;
            }
            denom += weight;
            let phi = self.log_derivatives(&sigma)?;
            for (n, p) in numer.values_mut().iter_mut().zip(phi.values()) {
                *n += weight * p;
            }
        }
        let log_abs = max_log + denom.norm().ln();
        if log_abs.is_nan() || log_abs <= LOG_DEGENERATE {
            return Err(Error::DegenerateAmplitude { log_abs });
        }
        for n in numer.values_mut() {
            *n = (*n / denom).conj();
        }
        Ok(numer)
    }

    /// log Z = log sum_sigma |psi(sigma)|^2 by streaming enumeration in the
    /// log domain.
    pub fn log_partition_exact(&self) -> Result<f64> {
        if self.n_visible > LOG_Z_QUBIT_CAP {
            return Err(Error::Capacity {
                what: "exact partition function",
                required: self.n_visible,
                cap: LOG_Z_QUBIT_CAP,
            });
        }
        let n = self.n_visible;
        let mut sigma = vec![0u8; n];
        let mut running_max = f64::NEG_INFINITY;
        let mut scaled_sum = 0.0f64;
        for idx in 0..(1usize << n) {
            for (q, s) in sigma.iter_mut().enumerate() {
                *s = ((idx >> (n - 1 - q)) & 1) as u8;
            }
            let log_weight = 2.0 * self.log_psi(&sigma)?.re;
            if log_weight <= running_max {
                scaled_sum += (log_weight - running_max).exp();
            } else {
                scaled_sum = scaled_sum * (running_max - log_weight).exp() + 1.0;
                running_max = log_weight;
            }
        }
        Ok(running_max + scaled_sum.ln())
    }

    /// Write all parameters losslessly (versioned binary format).
    pub fn save_params(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(CHECKPOINT_MAGIC)?;
        writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        writer.write_all(&(self.n_visible as u32).to_le_bytes())?;
        writer.write_all(&(self.n_hidden as u32).to_le_bytes())?;
        for value in self.flatten() {
            writer.write_all(&value.re.to_le_bytes())?;
            writer.write_all(&value.im.to_le_bytes())?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn load_params(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        read_exact(&mut reader, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not an RBM checkpoint file".into()));
        }
        let version = read_u32(&mut reader)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let n_visible = read_u32(&mut reader)? as usize;
        let n_hidden = read_u32(&mut reader)? as usize;
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::Checkpoint("invalid unit counts".into()));
        }
        let count = n_visible + n_hidden + n_visible * n_hidden;
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_f64(&mut reader)?;
            let im = read_f64(&mut reader)?;
            flat.push(Complex64::new(re, im));
        }
        let mut extra = [0u8; 1];
        if reader.read(&mut extra)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        Self::from_flat(n_visible, n_hidden, &flat)
            .map_err(|e| Error::Checkpoint(format!("corrupt parameters: {e}")))
    }
}

fn set_rotation_bits(sigma: &mut [u8], tau: &[usize], assignment: usize) {
    for (j, &q) in tau.iter().enumerate() {
        sigma[q] = ((assignment >> j) & 1) as u8;
    }
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| Error::Checkpoint("truncated checkpoint file".into()))
}

fn read_u32(reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(reader: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(reader, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
