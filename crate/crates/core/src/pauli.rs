//! Pauli-string algebra: parsing, basis-state action, outcome eigenvalues
//! and connected matrix elements of Pauli-sum observables.
//!
//! Bit convention: computational-basis states are bitstrings over {0, 1}
//! with bit value 0 corresponding to eigenvalue +1 of the single-qubit Z
//! operator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    /// Parse one Pauli letter.
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(PauliOp::I),
            'X' => Some(PauliOp::X),
            'Y' => Some(PauliOp::Y),
            'Z' => Some(PauliOp::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }

    /// Whether this operator flips the computational-basis bit it acts on.
    pub fn flips_bit(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::Y)
    }
}

/// Tensor product of single-qubit Pauli operators on N qubits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    ops: Vec<PauliOp>,
}

impl PauliString {
    /// Build from explicit operators. The string must act on at least one qubit.
    pub fn new(ops: Vec<PauliOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::invalid("Pauli string must have length >= 1"));
        }
        Ok(PauliString { ops })
    }

    /// The all-identity string on `n` qubits.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![PauliOp::I; n])
    }

    /// Number of qubits the string acts on.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[PauliOp] {
        &self.ops
    }

    pub fn op(&self, qubit: usize) -> PauliOp {
        self.ops[qubit]
    }

    /// Positions carrying a non-identity operator.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, op)| **op != PauliOp::I)
            .map(|(i, _)| i)
    }

    /// Whether every position is the identity.
    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|op| *op == PauliOp::I)
    }

    fn check_len(&self, sigma: &[u8]) -> Result<()> {
        if sigma.len() != self.ops.len() {
            return Err(Error::Dimension {
                expected: self.ops.len(),
                got: sigma.len(),
            });
        }
        Ok(())
    }

    /// Act on a basis state: returns the unique `sigma'` and phase with
    /// `<sigma'|P|sigma> = phase`. `sigma'` differs from `sigma` exactly on
    /// the X/Y positions; the phase is one of {+1, -1, +i, -i}.
    pub fn apply(&self, sigma: &[u8]) -> Result<(Vec<u8>, Complex64)> {
        self.check_len(sigma)?;
        let mut out = sigma.to_vec();
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, op) in self.ops.iter().enumerate() {
            let bit = sigma[q];
            match op {
                PauliOp::I => {}
                PauliOp::X => out[q] = 1 - bit,
                PauliOp::Y => {
                    // Y|0> = i|1>, Y|1> = -i|0>
                    out[q] = 1 - bit;
                    phase *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                PauliOp::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        Ok((out, phase))
    }

    /// Row extraction: returns the unique `sigma'` and value
    /// `<sigma|P|sigma'>`. This is the matrix element consumed by the
    /// ratio-form local estimator.
    pub fn bra_element(&self, sigma: &[u8]) -> Result<(Vec<u8>, Complex64)> {
        self.check_len(sigma)?;
        let mut out = sigma.to_vec();
        let mut value = Complex64::new(1.0, 0.0);
        for (q, op) in self.ops.iter().enumerate() {
            let bit = sigma[q];
            match op {
                PauliOp::I => {}
                PauliOp::X => out[q] = 1 - bit,
                PauliOp::Y => {
                    // <0|Y|1> = -i, <1|Y|0> = +i
                    out[q] = 1 - bit;
                    value *= if bit == 0 {
                        Complex64::new(0.0, -1.0)
                    } else {
                        Complex64::new(0.0, 1.0)
                    };
                }
                PauliOp::Z => {
                    if bit == 1 {
                        value = -value;
                    }
                }
            }
        }
        Ok((out, value))
    }

    /// Eigenvalue product for a measurement outcome recorded in this
    /// string's eigenbasis: product of (-1)^bit over the support. Identity
    /// positions contribute +1 regardless of the recorded bit.
    pub fn outcome_eigenvalue(&self, bits: &[u8]) -> Result<f64> {
        self.check_len(bits)?;
        let mut parity = 0u32;
        for q in self.support() {
            parity ^= u32::from(bits[q] & 1);
        }
        Ok(if parity == 0 { 1.0 } else { -1.0 })
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .map(|c| {
                PauliOp::from_char(c)
                    .ok_or_else(|| Error::invalid(format!("invalid Pauli letter '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(ops)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            write!(f, "{}", op.to_char())?;
        }
        Ok(())
    }
}

/// One weighted term of an observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub string: PauliString,
}

/// A real-weighted sum of Pauli strings on a fixed number of qubits.
///
/// Duplicate strings are merged at construction so the term count K is
/// well defined; term order is first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    terms: Vec<Term>,
    n_qubits: usize,
}

impl Observable {
    pub fn new(terms: Vec<(f64, PauliString)>) -> Result<Self> {
        Self::build(terms.into_iter().map(|t| (t, 0usize)))
    }

    /// Build with per-term source line numbers for error reporting.
    fn build(terms: impl Iterator<Item = ((f64, PauliString), usize)>) -> Result<Self> {
        let mut merged: Vec<Term> = Vec::new();
        let mut n_qubits = 0usize;
        for ((coefficient, string), line) in terms {
            if !coefficient.is_finite() {
                return Err(Error::parse(line, "coefficient is not finite"));
            }
            if merged.is_empty() {
                n_qubits = string.len();
            } else if string.len() != n_qubits {
                return Err(Error::parse(
                    line,
                    format!(
                        "inconsistent Pauli string length: expected {n_qubits}, got {}",
                        string.len()
                    ),
                ));
            }
            match merged.iter_mut().find(|t| t.string == string) {
                Some(term) => term.coefficient += coefficient,
                None => merged.push(Term {
                    coefficient,
                    string,
                }),
            }
        }
        if merged.is_empty() {
            return Err(Error::parse(0, "empty observable: no terms"));
        }
        Ok(Observable {
            terms: merged,
            n_qubits,
        })
    }

    /// Parse the observable file format: one `<coefficient> <pauli-word>`
    /// per line, `#` starts a comment, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let coeff_text = fields.next().unwrap();
            let word = fields
                .next()
                .ok_or_else(|| Error::parse(line_no, "expected `<coefficient> <pauli-word>`"))?;
            if let Some(extra) = fields.next() {
                return Err(Error::parse(
                    line_no,
                    format!("unexpected trailing field '{extra}'"),
                ));
            }
            let coefficient: f64 = coeff_text.parse().map_err(|_| {
                Error::parse(line_no, format!("malformed coefficient '{coeff_text}'"))
            })?;
            let string = word.parse::<PauliString>().map_err(|_| {
                Error::parse(line_no, format!("invalid Pauli letter in '{word}'"))
            })?;
            terms.push(((coefficient, string), line_no));
        }
        Self::build(terms.into_iter())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of terms K.
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Sum of |c_k| over all terms, identity included.
    pub fn coefficient_abs_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// All nonzero entries of row `sigma` of the dense matrix: pairs
    /// `(sigma', <sigma|O|sigma'>)` with each distinct `sigma'` appearing
    /// once (terms sharing a flip pattern are accumulated).
    pub fn connected_elements(&self, sigma: &[u8]) -> Result<Vec<(Vec<u8>, Complex64)>> {
        if sigma.len() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: sigma.len(),
            });
        }
        let mut entries: Vec<(Vec<u8>, Complex64)> = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let (sigma_prime, value) = term.string.bra_element(sigma)?;
            match entries.iter_mut().find(|(s, _)| *s == sigma_prime) {
                Some((_, acc)) => *acc += value * term.coefficient,
                None => entries.push((sigma_prime, value * term.coefficient)),
            }
        }
        Ok(entries)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{} {}", term.coefficient, term.string)?;
        }
        Ok(())
    }
}
