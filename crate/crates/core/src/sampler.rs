//! Markov-chain sampling of visible configurations from |psi|^2.
//!
//! Single-bit-flip Metropolis sweeps over a ladder of tempered
//! distributions |psi|^{2 beta}, with adjacent-chain exchange attempts
//! after every sweep. Samples are read from the beta = 1 chain only.
//!
//! Each chain owns a derived RNG stream and the swap schedule is fixed, so
//! the sample stream is a pure function of (parameters, config) no matter
//! how chains are scheduled.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rbm::RbmWavefunction;
use crate::seeding::derive_rng;

/// Default chain count for parallel tempering.
pub const DEFAULT_CHAINS: usize = 20;
/// Default lowest inverse-temperature exponent of the linear ladder.
pub const DEFAULT_BETA_MIN: f64 = 0.2;
/// Default burn-in sweeps before the first sample.
pub const DEFAULT_BURN_IN: usize = 100;
/// Default sweeps between consecutive samples.
pub const DEFAULT_THINNING: usize = 1;

/// Parallel-tempering configuration.
///
/// Prefer at least 3 chains: with exactly 2, near-uniform targets make
/// every exchange accept and the sweep/swap composition develops a slow
/// circulation mode (integrated autocorrelation in the hundreds of
/// sweeps). Odd ladders rotate that mode away.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Ascending inverse-temperature exponents in (0, 1], ending at 1.0;
    /// one chain per entry.
    pub betas: Vec<f64>,
    pub sweeps_burn_in: usize,
    pub sweeps_between_samples: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Default ladder: `n_chains` betas linear from `beta_min` to 1.0.
    pub fn new(n_chains: usize, beta_min: f64, seed: u64) -> Result<Self> {
        if n_chains == 0 {
            return Err(Error::invalid("need at least one chain"));
        }
        let betas = if n_chains == 1 {
            vec![1.0]
        } else {
            (0..n_chains)
                .map(|k| beta_min + (1.0 - beta_min) * k as f64 / (n_chains - 1) as f64)
                .collect()
        };
        let cfg = SamplerConfig {
            betas,
            sweeps_burn_in: DEFAULT_BURN_IN,
            sweeps_between_samples: DEFAULT_THINNING,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn default_with_seed(seed: u64) -> Self {
        Self::new(DEFAULT_CHAINS, DEFAULT_BETA_MIN, seed).expect("default config is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_chains(&self) -> usize {
        self.betas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::invalid("need at least one chain"));
        }
        for pair in self.betas.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::invalid("betas must be strictly increasing"));
            }
        }
        let first = self.betas[0];
        let last = *self.betas.last().unwrap();
        if first <= 0.0 || last != 1.0 {
            return Err(Error::invalid("betas must lie in (0, 1] and end at 1.0"));
        }
        Ok(())
    }
}

/// One chain: configuration plus cached hidden activations and log |psi|.
struct Chain {
    sigma: Vec<u8>,
    theta: Vec<Complex64>,
    re_ln_cosh: Vec<f64>,
    /// 2 * Re log psi(sigma), the log-weight at beta = 1.
    log_weight: f64,
    rng: ChaCha8Rng,
}

fn re_ln_cosh(z: Complex64) -> f64 {
    // Stable real part of log cosh; mirrors the amplitude evaluation.
    let s = if z.re >= 0.0 { z } else { -z };
    s.re + (Complex64::new(1.0, 0.0) + (-2.0 * s).exp()).norm().ln() - std::f64::consts::LN_2
}

impl Chain {
    fn init(rbm: &RbmWavefunction, mut rng: ChaCha8Rng) -> Self {
        let sigma: Vec<u8> = (0..rbm.n_visible())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let theta = rbm.theta(&sigma);
        let re_ln_cosh_cache: Vec<f64> = theta.iter().map(|&t| re_ln_cosh(t)).collect();
        let mut chain = Chain {
            sigma,
            theta,
            re_ln_cosh: re_ln_cosh_cache,
            log_weight: 0.0,
            rng,
        };
        chain.log_weight = 2.0 * chain.re_log_psi(rbm);
        chain
    }

    fn re_log_psi(&self, rbm: &RbmWavefunction) -> f64 {
        let mut acc = 0.0;
        for (i, &bit) in self.sigma.iter().enumerate() {
            if bit == 1 {
                acc += rbm.visible_biases()[i].re;
            }
        }
        acc + self.re_ln_cosh.iter().sum::<f64>()
    }

    /// One sweep: N sequential single-bit-flip proposals at uniformly
    /// random sites, each accepted with min(1, |psi'/psi|^{2 beta}).
    ///
    /// Sites are drawn at random rather than scanned in order: at the
    /// uniform point (all ratios 1) an ordered scan accepts every flip and
    /// the chain degenerates into a deterministic toggle of all bits.
    fn sweep(&mut self, rbm: &RbmWavefunction, beta: f64) {
        let n_hidden = rbm.n_hidden();
        for _ in 0..rbm.n_visible() {
            let i = self.rng.random_range(0..rbm.n_visible());
            let flip_sign = if self.sigma[i] == 0 { 1.0 } else { -1.0 };
            let mut new_theta = Vec::with_capacity(n_hidden);
            let mut new_lncosh = Vec::with_capacity(n_hidden);
            let mut delta = flip_sign * rbm.visible_biases()[i].re;
            for j in 0..n_hidden {
                let t = self.theta[j] + rbm.weight(i, j) * flip_sign;
                let lc = re_ln_cosh(t);
                delta += lc - self.re_ln_cosh[j];
                new_theta.push(t);
                new_lncosh.push(lc);
            }
            // delta = Re log psi(sigma') - Re log psi(sigma).
            let accept = if beta == 0.0 {
                true
            } else {
                let u: f64 = self.rng.random();
                u.ln() < 2.0 * beta * delta
            };
            if accept {
                self.sigma[i] = 1 - self.sigma[i];
                self.theta.copy_from_slice(&new_theta);
                self.re_ln_cosh.copy_from_slice(&new_lncosh);
                self.log_weight += 2.0 * delta;
            }
        }
    }
}

/// One Metropolis sweep from an explicit configuration; returns the
/// configuration after N single-bit-flip proposals at inverse-temperature
/// exponent `beta`.
pub fn metropolis_sweep(
    rbm: &RbmWavefunction,
    sigma: &[u8],
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u8>> {
    if sigma.len() != rbm.n_visible() {
        return Err(Error::Dimension {
            expected: rbm.n_visible(),
            got: sigma.len(),
        });
    }
    let theta = rbm.theta(sigma);
    let cache: Vec<f64> = theta.iter().map(|&t| re_ln_cosh(t)).collect();
    let mut chain = Chain {
        sigma: sigma.to_vec(),
        theta,
        re_ln_cosh: cache,
        log_weight: 0.0,
        rng: rng.clone(),
    };
    chain.log_weight = 2.0 * chain.re_log_psi(rbm);
    chain.sweep(rbm, beta);
    *rng = chain.rng;
    Ok(chain.sigma)
}

/// Attempt a tempering exchange between two configurations at adjacent
/// betas; accepted with min(1, exp[(beta_i - beta_j) (log|psi(sigma_j)|^2 -
/// log|psi(sigma_i)|^2)]).
pub fn tempering_swap(
    rbm: &RbmWavefunction,
    sigma_i: &[u8],
    beta_i: f64,
    sigma_j: &[u8],
    beta_j: f64,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let li = 2.0 * rbm.log_psi(sigma_i)?.re;
    let lj = 2.0 * rbm.log_psi(sigma_j)?.re;
    Ok(swap_accepted(beta_i, li, beta_j, lj, rng))
}

fn swap_accepted(beta_i: f64, log_w_i: f64, beta_j: f64, log_w_j: f64, rng: &mut ChaCha8Rng) -> bool {
    let log_ratio = (beta_i - beta_j) * (log_w_j - log_w_i);
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Draw `n_samples` configurations from |psi|^2.
///
/// All chains advance one sweep, adjacent pairs attempt exchanges, and the
/// beta = 1 chain is read every `sweeps_between_samples` sweeps after
/// `sweeps_burn_in` warm-up sweeps.
pub fn draw_samples(
    rbm: &RbmWavefunction,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<Vec<Vec<u8>>> {
    cfg.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let mut chains: Vec<Chain> = (0..cfg.n_chains())
        .map(|k| Chain::init(rbm, derive_rng(cfg.seed, &format!("sampler/chain/{k}"))))
        .collect();
    let mut swap_rng = derive_rng(cfg.seed, "sampler/swaps");

    let sweep_all = |chains: &mut Vec<Chain>, swap_rng: &mut ChaCha8Rng| {
        for (chain, &beta) in chains.iter_mut().zip(&cfg.betas) {
            chain.sweep(rbm, beta);
        }
        for k in 0..chains.len().saturating_sub(1) {
            let accepted = swap_accepted(
                cfg.betas[k],
                chains[k].log_weight,
                cfg.betas[k + 1],
                chains[k + 1].log_weight,
                swap_rng,
            );
            if accepted {
                chains.swap(k, k + 1);
            }
        }
    };

    for _ in 0..cfg.sweeps_burn_in {
        sweep_all(&mut chains, &mut swap_rng);
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..cfg.sweeps_between_samples {
            sweep_all(&mut chains, &mut swap_rng);
        }
        samples.push(chains.last().expect("at least one chain").sigma.clone());
    }
    Ok(samples)
}
