//! Dense exact simulation at small qubit counts: ground states, exact
//! expectations and variances, basis rotations and Born-rule sampling.
//!
//! This module is both the synthetic-data source and the verification
//! oracle for everything the neural-network estimator produces.
//!
//! Index convention: a basis index `i` encodes the bitstring `sigma` with
//! qubit 0 as the most significant bit, so bit `q` carries weight
//! `2^(N-1-q)`. Outcome bit 0 corresponds to eigenvalue +1.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::dataset::{Dataset, MeasurementRecord};
use crate::error::{Error, Result};
use crate::pauli::{Observable, PauliOp, PauliString};
use crate::seeding::derive_rng;

/// Hard cap on dense-matrix construction and diagonalization.
pub const DENSE_QUBIT_CAP: usize = 12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Measurement axis of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'X' => Some(Axis::X),
            'Y' => Some(Axis::Y),
            'Z' => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// Per-qubit measurement bases for one projective measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisAssignment {
    axes: Vec<Axis>,
}

impl BasisAssignment {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("basis assignment must have length >= 1"));
        }
        Ok(BasisAssignment { axes })
    }

    /// The reference (all-z) basis on `n` qubits.
    pub fn all_z(n: usize) -> Result<Self> {
        Self::new(vec![Axis::Z; n])
    }

    /// The measurement basis of a Pauli string: X/Y/Z sites keep their
    /// axis, identity sites are measured in the reference z basis.
    pub fn for_pauli(string: &PauliString) -> Self {
        BasisAssignment {
            axes: string
                .ops()
                .iter()
                .map(|op| match op {
                    PauliOp::X => Axis::X,
                    PauliOp::Y => Axis::Y,
                    PauliOp::I | PauliOp::Z => Axis::Z,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, qubit: usize) -> Axis {
        self.axes[qubit]
    }

    /// Whether every qubit is measured in the reference z basis.
    pub fn is_all_z(&self) -> bool {
        self.axes.iter().all(|a| *a == Axis::Z)
    }
}

impl FromStr for BasisAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .map(|c| {
                Axis::from_char(c)
                    .ok_or_else(|| Error::invalid(format!("invalid basis letter '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        BasisAssignment::new(axes)
    }
}

impl fmt::Display for BasisAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axis in &self.axes {
            write!(f, "{}", axis.to_char())?;
        }
        Ok(())
    }
}

/// Single-qubit change-of-basis bracket `<sigma^b | sigma>`: the amplitude
/// of reference-basis state `sigma` in the axis eigenstate labelled by
/// `outcome` (0 <-> eigenvalue +1).
///
/// Rows of the rotation matrices: K_z = identity,
/// K_x = (1/sqrt2) [[1, 1], [1, -1]], K_y = (1/sqrt2) [[1, -i], [1, i]].
pub fn basis_bracket(axis: Axis, outcome: u8, sigma: u8) -> Complex64 {
    debug_assert!(outcome < 2 && sigma < 2);
    match axis {
        Axis::Z => {
            if outcome == sigma {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Axis::X => {
            let sign = if outcome == 1 && sigma == 1 { -1.0 } else { 1.0 };
            Complex64::new(sign * FRAC_1_SQRT_2, 0.0)
        }
        Axis::Y => {
            if sigma == 0 {
                Complex64::new(FRAC_1_SQRT_2, 0.0)
            } else if outcome == 0 {
                Complex64::new(0.0, -FRAC_1_SQRT_2)
            } else {
                Complex64::new(0.0, FRAC_1_SQRT_2)
            }
        }
    }
}

/// Dense normalized state on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wrap amplitudes, validating the dimension and unit norm (1e-12).
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_qubits == 0 || amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Dimension {
                expected: 1usize << n_qubits,
                got: amplitudes.len(),
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "state vector is not normalized: |psi|^2 = {norm2}"
            )));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalize arbitrary amplitudes into a state.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        let scale = norm2.sqrt().recip();
        for a in &mut amplitudes {
            *a *= scale;
        }
        if n_qubits == 0 || amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Dimension {
                expected: 1usize << n_qubits,
                got: amplitudes.len(),
            });
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    /// The computational-basis state |bits>.
    pub fn basis_state(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("empty bitstring"));
        }
        let n = bits.len();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[index_of_bits(bits)] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, bits: &[u8]) -> Complex64 {
        self.amplitudes[index_of_bits(bits)]
    }

    /// Born probabilities of all outcomes.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Basis index of a bitstring, qubit 0 most significant.
pub fn index_of_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, b| (acc << 1) | (*b as usize))
}

/// Bitstring of a basis index, qubit 0 most significant.
pub fn bits_of_index(n_qubits: usize, index: usize) -> Vec<u8> {
    (0..n_qubits)
        .map(|q| ((index >> (n_qubits - 1 - q)) & 1) as u8)
        .collect()
}

fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits > DENSE_QUBIT_CAP {
        return Err(Error::Capacity {
            what: "dense matrix",
            required: n_qubits,
            cap: DENSE_QUBIT_CAP,
        });
    }
    Ok(())
}

fn pauli_matrix(op: PauliOp) -> DMatrix<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match op {
        PauliOp::I => [one, zero, zero, one],
        PauliOp::X => [zero, one, one, zero],
        PauliOp::Y => [zero, -i, i, zero],
        PauliOp::Z => [one, zero, zero, -one],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Dense Hermitian matrix of an observable: sum of coefficient-weighted
/// Kronecker products of single-qubit Pauli matrices.
pub fn dense_matrix(obs: &Observable) -> Result<DMatrix<Complex64>> {
    check_cap(obs.n_qubits())?;
    let dim = 1usize << obs.n_qubits();
    let mut total = DMatrix::<Complex64>::zeros(dim, dim);
    for term in obs.terms() {
        let mut factor = DMatrix::from_element(1, 1, Complex64::new(term.coefficient, 0.0));
        for op in term.string.ops() {
            factor = factor.kronecker(&pauli_matrix(*op));
        }
        total += factor;
    }
    Ok(total)
}

/// Ground state by dense Hermitian diagonalization.
///
/// The returned state carries a fixed global-phase convention: the first
/// amplitude of magnitude above 1e-12 is made real positive. Degenerate
/// ground spaces (gap below 1e-10) are flagged in the log.
pub fn ground_state(obs: &Observable) -> Result<(f64, StateVector)> {
    let matrix = dense_matrix(obs)?;
    let eigen = nalgebra::linalg::SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .partial_cmp(&eigen.eigenvalues[b])
            .unwrap()
    });
    let ground = order[0];
    let energy = eigen.eigenvalues[ground];
    if order.len() > 1 {
        let gap = eigen.eigenvalues[order[1]] - energy;
        if gap < 1e-10 {
            log::warn!("degenerate ground state: spectral gap {gap:e}");
        }
    }

    let mut amplitudes: Vec<Complex64> = eigen.eigenvectors.column(ground).iter().copied().collect();
    let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let scale = norm2.sqrt().recip();
    for a in &mut amplitudes {
        *a *= scale;
    }
    if let Some(first) = amplitudes.iter().find(|a| a.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        for a in &mut amplitudes {
            *a *= phase;
        }
    }

    let state = StateVector {
        n_qubits: obs.n_qubits(),
        amplitudes,
    };
    let residual = eigen_residual(&matrix, energy, &state);
    if residual > 1e-10 {
        return Err(Error::invalid(format!(
            "eigensolver residual {residual:e} exceeds 1e-10"
        )));
    }
    Ok((energy, state))
}

fn eigen_residual(matrix: &DMatrix<Complex64>, energy: f64, state: &StateVector) -> f64 {
    let v = nalgebra::DVector::from_column_slice(state.amplitudes());
    let hv = matrix * &v;
    (hv - v * Complex64::new(energy, 0.0)).norm()
}

fn check_state_obs(state: &StateVector, n_qubits: usize) -> Result<()> {
    if state.n_qubits() != n_qubits {
        return Err(Error::Dimension {
            expected: n_qubits,
            got: state.n_qubits(),
        });
    }
    Ok(())
}

/// Exact expectation value <psi|O|psi>. The imaginary residue (roundoff
/// only, O is Hermitian) is discarded.
pub fn expectation(state: &StateVector, obs: &Observable) -> Result<f64> {
    check_state_obs(state, obs.n_qubits())?;
    let n = state.n_qubits();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let sigma = bits_of_index(n, idx);
        for (sigma_prime, value) in obs.connected_elements(&sigma)? {
            acc += amp.conj() * value * state.amplitude(&sigma_prime);
        }
    }
    debug_assert!(acc.im.abs() <= 1e-10, "imaginary residue {:e}", acc.im);
    Ok(acc.re)
}

/// Exact expectation of a single Pauli string.
pub fn pauli_expectation(state: &StateVector, string: &PauliString) -> Result<f64> {
    check_state_obs(state, string.len())?;
    let n = state.n_qubits();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let sigma = bits_of_index(n, idx);
        let (sigma_prime, value) = string.bra_element(&sigma)?;
        acc += amp.conj() * value * state.amplitude(&sigma_prime);
    }
    Ok(acc.re)
}

/// Exact single-Pauli variance 1 - <P>^2, clamped to [0, 1].
pub fn pauli_variance_exact(state: &StateVector, string: &PauliString) -> Result<f64> {
    let mean = pauli_expectation(state, string)?;
    Ok((1.0 - mean * mean).clamp(0.0, 1.0))
}

/// Rotate a state into a measurement basis: amplitudes of the output give
/// Born probabilities for outcomes in the requested basis.
pub fn rotate_to_basis(state: &StateVector, basis: &BasisAssignment) -> Result<StateVector> {
    check_state_obs(state, basis.len())?;
    let n = state.n_qubits();
    let mut amps = state.amplitudes().to_vec();
    for q in 0..n {
        let axis = basis.axis(q);
        if axis == Axis::Z {
            continue;
        }
        let u = [
            [basis_bracket(axis, 0, 0), basis_bracket(axis, 0, 1)],
            [basis_bracket(axis, 1, 0), basis_bracket(axis, 1, 1)],
        ];
        let stride = 1usize << (n - 1 - q);
        let dim = amps.len();
        let mut base = 0usize;
        while base < dim {
            for offset in base..base + stride {
                let lo = amps[offset];
                let hi = amps[offset + stride];
                amps[offset] = u[0][0] * lo + u[0][1] * hi;
                amps[offset + stride] = u[1][0] * lo + u[1][1] * hi;
            }
            base += 2 * stride;
        }
    }
    Ok(StateVector {
        n_qubits: n,
        amplitudes: amps,
    })
}

fn cumulative_probabilities(state: &StateVector) -> Vec<f64> {
    let mut acc = 0.0;
    state
        .amplitudes()
        .iter()
        .map(|a| {
            acc += a.norm_sqr();
            acc
        })
        .collect()
}

fn draw_outcome(cumulative: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Draw `shots_per_basis` projective measurements in each listed basis.
///
/// Records are i.i.d. Born-rule samples of the rotated state; each basis
/// uses its own derived RNG stream so sampling is reproducible per seed
/// and parallelizable across bases.
pub fn sample_measurements(
    state: &StateVector,
    bases: &[BasisAssignment],
    shots_per_basis: usize,
    seed: u64,
) -> Result<Dataset> {
    if shots_per_basis == 0 {
        return Err(Error::invalid("shots_per_basis must be >= 1"));
    }
    let n = state.n_qubits();
    let mut records = Vec::with_capacity(bases.len() * shots_per_basis);
    for (bi, basis) in bases.iter().enumerate() {
        let rotated = rotate_to_basis(state, basis)?;
        let cumulative = cumulative_probabilities(&rotated);
        let mut rng = derive_rng(seed, &format!("measure/basis/{bi}"));
        for _ in 0..shots_per_basis {
            let outcome = draw_outcome(&cumulative, &mut rng);
            records.push(MeasurementRecord::new(
                basis.clone(),
                bits_of_index(n, outcome),
            )?);
        }
    }
    Dataset::new(n, records)
}

/// Draw `total_shots` measurements whose bases are sampled uniformly from
/// a pool (the training-data protocol: one basis per Pauli term of the
/// target observable, drawn uniformly per record).
pub fn sample_uniform_basis_measurements(
    state: &StateVector,
    basis_pool: &[BasisAssignment],
    total_shots: usize,
    seed: u64,
) -> Result<Dataset> {
    if basis_pool.is_empty() {
        return Err(Error::invalid("basis pool must be nonempty"));
    }
    if total_shots == 0 {
        return Err(Error::invalid("total_shots must be >= 1"));
    }
    let n = state.n_qubits();
    // One cumulative table per distinct basis; the pool is typically short.
    let mut table_of: Vec<usize> = Vec::with_capacity(basis_pool.len());
    let mut tables: Vec<Vec<f64>> = Vec::new();
    let mut distinct: Vec<&BasisAssignment> = Vec::new();
    for basis in basis_pool {
        match distinct.iter().position(|b| *b == basis) {
            Some(pos) => table_of.push(pos),
            None => {
                let rotated = rotate_to_basis(state, basis)?;
                tables.push(cumulative_probabilities(&rotated));
                distinct.push(basis);
                table_of.push(tables.len() - 1);
            }
        }
    }
    let mut rng = derive_rng(seed, "measure/uniform");
    let mut records = Vec::with_capacity(total_shots);
    for _ in 0..total_shots {
        let k = rng.random_range(0..basis_pool.len());
        let outcome = draw_outcome(&tables[table_of[k]], &mut rng);
        records.push(MeasurementRecord::new(
            basis_pool[k].clone(),
            bits_of_index(n, outcome),
        )?);
    }
    Dataset::new(n, records)
}
