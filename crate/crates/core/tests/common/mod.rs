//! Shared helpers for the oracle test suites.
#![allow(dead_code)]

use nnqe::exactsim::{bits_of_index, StateVector};
use nnqe::pauli::{Observable, PauliOp, PauliString};
use nnqe::rbm::RbmWavefunction;
use nnqe::seeding::derive_rng;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_pauli_string(n: usize, rng: &mut ChaCha8Rng) -> PauliString {
    let ops = (0..n)
        .map(|_| match rng.random_range(0..4u8) {
            0 => PauliOp::I,
            1 => PauliOp::X,
            2 => PauliOp::Y,
            _ => PauliOp::Z,
        })
        .collect();
    PauliString::new(ops).unwrap()
}

/// Random observable with up to `k` terms (duplicates merge).
pub fn random_observable(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Observable {
    let terms: Vec<(f64, PauliString)> = (0..k)
        .map(|_| {
            let coeff = rng.random::<f64>() * 2.0 - 1.0;
            (coeff, random_pauli_string(n, rng))
        })
        .collect();
    Observable::new(terms).unwrap()
}

pub fn rng(seed: u64, label: &str) -> ChaCha8Rng {
    derive_rng(seed, label)
}

/// Dense 2^N x 2^N matrix built by explicit per-entry products of
/// single-qubit matrix elements; an independent route from both the
/// Kronecker construction and the connected-elements row walk.
pub fn entrywise_dense(obs: &Observable) -> Vec<Vec<Complex64>> {
    let n = obs.n_qubits();
    let dim = 1usize << n;
    let mut matrix = vec![vec![c(0.0, 0.0); dim]; dim];
    for row in 0..dim {
        let row_bits = bits_of_index(n, row);
        for col in 0..dim {
            let col_bits = bits_of_index(n, col);
            for term in obs.terms() {
                let mut value = c(term.coefficient, 0.0);
                for q in 0..n {
                    value *= single_qubit_element(term.string.op(q), row_bits[q], col_bits[q]);
                }
                matrix[row][col] += value;
            }
        }
    }
    matrix
}

fn single_qubit_element(op: PauliOp, row: u8, col: u8) -> Complex64 {
    match op {
        PauliOp::I => {
            if row == col {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }
        PauliOp::X => {
            if row != col {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }
        PauliOp::Y => match (row, col) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => c(0.0, 0.0),
        },
        PauliOp::Z => match (row, col) {
            (0, 0) => c(1.0, 0.0),
            (1, 1) => c(-1.0, 0.0),
            _ => c(0.0, 0.0),
        },
    }
}

/// Random RBM with parameters of a chosen spread (uniform square in the
/// complex plane), for oracle tests that want nontrivial amplitudes.
pub fn random_rbm(n_visible: usize, n_hidden: usize, scale: f64, rng: &mut ChaCha8Rng) -> RbmWavefunction {
    let mut draw = |count: usize| -> Vec<Complex64> {
        (0..count)
            .map(|_| {
                c(
                    (rng.random::<f64>() - 0.5) * 2.0 * scale,
                    (rng.random::<f64>() - 0.5) * 2.0 * scale,
                )
            })
            .collect()
    };
    let a = draw(n_visible);
    let d = draw(n_hidden);
    let w = draw(n_visible * n_hidden);
    RbmWavefunction::new(n_visible, n_hidden, a, d, w).unwrap()
}

/// The full unnormalized amplitude vector of an RBM.
pub fn rbm_amplitudes(rbm: &RbmWavefunction) -> Vec<Complex64> {
    let n = rbm.n_visible();
    (0..(1usize << n))
        .map(|idx| rbm.log_psi(&bits_of_index(n, idx)).unwrap().exp())
        .collect()
}

/// The RBM state as a normalized vector plus its norm^2 (= Z).
pub fn rbm_state(rbm: &RbmWavefunction) -> (StateVector, f64) {
    let amps = rbm_amplitudes(rbm);
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    (
        StateVector::normalized(rbm.n_visible(), amps).unwrap(),
        norm2,
    )
}

/// Exact <O> on the RBM state through the dense-matrix route (independent
/// of the connected-elements local values).
pub fn exact_rbm_expectation(rbm: &RbmWavefunction, obs: &Observable) -> f64 {
    let (state, _) = rbm_state(rbm);
    let dense = entrywise_dense(obs);
    let amps = state.amplitudes();
    let mut acc = c(0.0, 0.0);
    for (row, row_vals) in dense.iter().enumerate() {
        for (col, val) in row_vals.iter().enumerate() {
            acc += amps[row].conj() * val * amps[col];
        }
    }
    assert!(acc.im.abs() < 1e-10);
    acc.re
}
