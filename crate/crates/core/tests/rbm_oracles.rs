//! Oracle checks for the RBM wavefunction: finite-difference derivatives,
//! dense rotation equivalence, full-enumeration quasi-probability
//! averages, and norm preservation under rotations.

mod common;

use common::{c, random_rbm, rbm_amplitudes, rng};
use nnqe::dataset::MeasurementRecord;
use nnqe::exactsim::{
    basis_bracket, bits_of_index, index_of_bits, rotate_to_basis, Axis, BasisAssignment,
    StateVector,
};
use nnqe::rbm::RbmWavefunction;
use num_complex::Complex64;
use rand::Rng;

fn random_basis(n: usize, r: &mut rand_chacha::ChaCha8Rng) -> BasisAssignment {
    let axes: Vec<Axis> = (0..n)
        .map(|_| match r.random_range(0..3u8) {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        })
        .collect();
    BasisAssignment::new(axes).unwrap()
}

fn random_bits(n: usize, r: &mut rand_chacha::ChaCha8Rng) -> Vec<u8> {
    (0..n).map(|_| u8::from(r.random::<bool>())).collect()
}

#[test]
fn log_derivatives_match_finite_differences() {
    let step = 1e-6;
    let mut r = rng(201, "fd");
    for (n_v, n_h) in [(2usize, 2usize), (3, 2), (3, 3), (4, 2)] {
        let rbm = random_rbm(n_v, n_h, 0.6, &mut r);
        let sigma = random_bits(n_v, &mut r);
        let grad = rbm.log_derivatives(&sigma).unwrap();
        let flat = rbm.flatten();
        for k in 0..flat.len() {
            let eval = |delta: Complex64| -> Complex64 {
                let mut params = flat.clone();
                params[k] += delta;
                RbmWavefunction::from_flat(n_v, n_h, &params)
                    .unwrap()
                    .log_psi(&sigma)
                    .unwrap()
            };
            let fd_re = (eval(c(step, 0.0)) - eval(c(-step, 0.0))) / (2.0 * step);
            let fd_im = (eval(c(0.0, step)) - eval(c(0.0, -step))) / (2.0 * step);
            let phi = grad.values()[k];
            let tol = 1e-6 * (1.0 + phi.norm());
            assert!((fd_re - phi).norm() < tol, "re perturbation, k = {k}");
            assert!(
                (fd_im - phi * c(0.0, 1.0)).norm() < tol,
                "im perturbation, k = {k}"
            );
        }
    }
}

#[test]
fn rotated_psi_matches_dense_pipeline() {
    // >= 100 random (rbm, basis, outcome) triples at N <= 4 at 1e-10
    // relative, mixed x/y/z sites included.
    let mut r = rng(202, "rotation-oracle");
    let mut checked = 0usize;
    for round in 0..30 {
        let n = 1 + (round % 4);
        let rbm = random_rbm(n, 1 + (round % 3), 0.5, &mut r);
        let amps = rbm_amplitudes(&rbm);
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let state = StateVector::normalized(n, amps).unwrap();
        for _ in 0..4 {
            let basis = random_basis(n, &mut r);
            let rotated = rotate_to_basis(&state, &basis).unwrap();
            let bits = random_bits(n, &mut r);
            let record = MeasurementRecord::new(basis.clone(), bits.clone()).unwrap();
            let got = rbm.rotated_psi(&record).unwrap();
            let oracle = rotated.amplitudes()[index_of_bits(&bits)] * norm2.sqrt();
            let diff = (got - oracle).norm();
            if oracle.norm() > 1e-8 {
                assert!(
                    diff / oracle.norm() < 1e-10,
                    "relative {} at n = {n}",
                    diff / oracle.norm()
                );
            } else {
                assert!(diff < 1e-12, "absolute {diff}");
            }
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn rotated_psi_mixed_xy_case() {
    // One x site and one y site, fixed rbm, direct comparison.
    let mut r = rng(203, "xy");
    let rbm = random_rbm(3, 2, 0.4, &mut r);
    let amps = rbm_amplitudes(&rbm);
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let state = StateVector::normalized(3, amps).unwrap();
    let basis: BasisAssignment = "XZY".parse().unwrap();
    let rotated = rotate_to_basis(&state, &basis).unwrap();
    for idx in 0..8usize {
        let bits = bits_of_index(3, idx);
        let record = MeasurementRecord::new(basis.clone(), bits).unwrap();
        let got = rbm.rotated_psi(&record).unwrap();
        let oracle = rotated.amplitudes()[idx] * norm2.sqrt();
        assert!((got - oracle).norm() < 1e-12 * (1.0 + oracle.norm() / 1e-2));
    }
}

#[test]
fn rotated_grad_average_matches_full_enumeration() {
    // Independent route: sum over the full Hilbert space with the complete
    // N-fold bracket product (no support reduction), then conjugate.
    let mut r = rng(204, "quasi");
    for _ in 0..8 {
        let rbm = random_rbm(3, 2, 0.5, &mut r);
        let basis = random_basis(3, &mut r);
        let bits = random_bits(3, &mut r);
        let record = MeasurementRecord::new(basis.clone(), bits.clone()).unwrap();

        let mut denom = c(0.0, 0.0);
        let mut numer = vec![c(0.0, 0.0); rbm.parameter_count()];
        for idx in 0..8usize {
            let sigma = bits_of_index(3, idx);
            let mut weight = rbm.log_psi(&sigma).unwrap().exp();
            for q in 0..3 {
                weight *= basis_bracket(basis.axis(q), bits[q], sigma[q]);
            }
            if weight.norm_sqr() == 0.0 {
                continue;
            }
            denom += weight;
            let phi = rbm.log_derivatives(&sigma).unwrap();
            for (acc, p) in numer.iter_mut().zip(phi.values()) {
                *acc += weight * p;
            }
        }
        assert!(denom.norm() > 1e-12, "degenerate test draw");
        let got = rbm.rotated_grad_average(&record).unwrap();
        for (g, num) in got.values().iter().zip(&numer) {
            let oracle = (num / denom).conj();
            assert!((g - oracle).norm() < 1e-12 * (1.0 + oracle.norm()));
        }
    }
}

#[test]
fn rotations_preserve_partition_function() {
    // For every basis assignment at N <= 4 (all 3^N of them at N = 2, 3
    // and a sample at N = 4): sum over outcomes of |rotated_psi|^2 = Z.
    let mut r = rng(205, "norm");
    for n in 2..=4usize {
        let rbm = random_rbm(n, n, 0.4, &mut r);
        let z = rbm.log_partition_exact().unwrap().exp();
        let bases: Vec<BasisAssignment> = if n <= 3 {
            (0..3usize.pow(n as u32))
                .map(|mut code| {
                    let axes = (0..n)
                        .map(|_| {
                            let axis = match code % 3 {
                                0 => Axis::X,
                                1 => Axis::Y,
                                _ => Axis::Z,
                            };
                            code /= 3;
                            axis
                        })
                        .collect();
                    BasisAssignment::new(axes).unwrap()
                })
                .collect()
        } else {
            (0..12).map(|_| random_basis(n, &mut r)).collect()
        };
        for basis in bases {
            let mut total = 0.0f64;
            for idx in 0..(1usize << n) {
                let record =
                    MeasurementRecord::new(basis.clone(), bits_of_index(n, idx)).unwrap();
                total += rbm.rotated_psi(&record).unwrap().norm_sqr();
            }
            assert!(
                (total - z).abs() / z < 1e-8,
                "basis {basis}: sum {total} vs Z {z}"
            );
        }
    }
}
