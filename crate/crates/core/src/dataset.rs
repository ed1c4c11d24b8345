//! Basis-tagged measurement records: file persistence, train/validation
//! splitting, sub-sampling and per-Pauli grouping.
//!
//! Dataset file format (UTF-8 text): a header line `qubits <N>` followed
//! by one record per line, `<basis-word> <bitstring>` with basis letters
//! over XYZ and bits over 01. The count-table variant replaces records by
//! `<pauli-word> <bitstring> <count>` lines after a `counts` marker line;
//! it is expanded to plain records on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::exactsim::BasisAssignment;
use crate::pauli::{Observable, PauliString, Term};
use crate::seeding::derive_rng;

/// One projective measurement: the per-qubit bases and the observed bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementRecord {
    basis: BasisAssignment,
    bits: Vec<u8>,
}

impl MeasurementRecord {
    pub fn new(basis: BasisAssignment, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                got: bits.len(),
            });
        }
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::invalid("outcome bits must be 0 or 1"));
        }
        Ok(MeasurementRecord { basis, bits })
    }

    pub fn basis(&self) -> &BasisAssignment {
        &self.basis
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn n_qubits(&self) -> usize {
        self.bits.len()
    }
}

/// An ordered collection of measurement records on a fixed qubit count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_qubits: usize,
    records: Vec<MeasurementRecord>,
}

impl Dataset {
    pub fn new(n_qubits: usize, records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        if let Some(bad) = records.iter().position(|r| r.n_qubits() != n_qubits) {
            return Err(Error::invalid(format!(
                "record {bad} has {} qubits, dataset has {n_qubits}",
                records[bad].n_qubits()
            )));
        }
        Ok(Dataset { n_qubits, records })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of records M.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.to_writer(&mut writer)
    }

    pub fn to_writer(&self, writer: &mut impl Write) -> Result<()> {
        writeln!(writer, "qubits {}", self.n_qubits)?;
        for record in &self.records {
            write!(writer, "{} ", record.basis())?;
            for bit in record.bits() {
                write!(writer, "{bit}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut lines = LineCursor::new(reader)?;
        let n_qubits = lines.expect_header()?;
        let mut records = Vec::new();
        while let Some((line_no, line)) = lines.next_content_line() {
            if line == "counts" {
                return Err(Error::parse(
                    line_no,
                    "count-table file: expand it to records first (convert-counts)",
                ));
            }
            records.push(parse_record_line(line_no, &line, n_qubits)?);
        }
        if records.is_empty() {
            return Err(Error::parse(lines.last_line, "empty dataset"));
        }
        Dataset::new(n_qubits, records)
    }

    /// Load a count-table file, expanding each `<pauli-word> <bitstring>
    /// <count>` line into `count` identical records measured in the Pauli
    /// word's basis (identity sites in z).
    pub fn load_counts(path: impl AsRef<Path>) -> Result<Self> {
        Self::counts_from_reader(BufReader::new(File::open(path)?))
    }

    pub fn counts_from_reader(reader: impl Read) -> Result<Self> {
        let mut lines = LineCursor::new(reader)?;
        let n_qubits = lines.expect_header()?;
        match lines.next_content_line() {
            Some((_, marker)) if marker == "counts" => {}
            Some((line_no, _)) => {
                return Err(Error::parse(line_no, "expected `counts` marker line"))
            }
            None => return Err(Error::parse(lines.last_line, "expected `counts` marker line")),
        }
        let mut records = Vec::new();
        while let Some((line_no, line)) = lines.next_content_line() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    line_no,
                    "expected `<pauli-word> <bitstring> <count>`",
                ));
            }
            let string: PauliString = fields[0]
                .parse()
                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
            if string.len() != n_qubits {
                return Err(Error::parse(
                    line_no,
                    format!("length mismatch: expected {n_qubits} qubits"),
                ));
            }
            let bits = parse_bits(line_no, fields[1], n_qubits)?;
            let count: usize = fields[2]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("malformed count '{}'", fields[2])))?;
            let basis = BasisAssignment::for_pauli(&string);
            for _ in 0..count {
                records.push(MeasurementRecord::new(basis.clone(), bits.clone())?);
            }
        }
        if records.is_empty() {
            return Err(Error::parse(lines.last_line, "empty dataset"));
        }
        Dataset::new(n_qubits, records)
    }

    /// Random disjoint partition into ceil(f * M) training records and the
    /// rest for validation; original record order is preserved within each
    /// part and the partition is reproducible per seed.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let m = self.len();
        // Guard the exact-ceiling intent against binary representation of
        // fractions like 0.9: 0.9 * 100 must give 90, not 91.
        let n_train = (train_fraction * m as f64 - 1e-9).ceil() as usize;
        let n_train = n_train.max(1);
        if n_train >= m {
            return Err(Error::invalid(format!(
                "dataset of {m} records is too small for a nonempty validation split"
            )));
        }
        let mut indices: Vec<usize> = (0..m).collect();
        let mut rng = derive_rng(seed, "dataset/split");
        indices.shuffle(&mut rng);
        let mut train_idx = indices[..n_train].to_vec();
        let mut val_idx = indices[n_train..].to_vec();
        train_idx.sort_unstable();
        val_idx.sort_unstable();
        let pick = |idx: &[usize]| {
            Dataset::new(
                self.n_qubits,
                idx.iter().map(|&i| self.records[i].clone()).collect(),
            )
        };
        Ok((pick(&train_idx)?, pick(&val_idx)?))
    }

    /// Draw `m` records uniformly without replacement, in draw order.
    pub fn subsample(&self, m: usize, seed: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::invalid("subsample size must be >= 1"));
        }
        if m > self.len() {
            return Err(Error::invalid(format!(
                "subsample size {m} exceeds dataset size {}",
                self.len()
            )));
        }
        let mut rng = derive_rng(seed, "dataset/subsample");
        let chosen = rand::seq::index::sample(&mut rng, self.len(), m);
        Dataset::new(
            self.n_qubits,
            chosen.iter().map(|i| self.records[i].clone()).collect(),
        )
    }

    /// Assign every record to exactly one term of the observable.
    ///
    /// A record matches term k when its basis agrees with the term's Pauli
    /// letters on the term's support (identity sites are unconstrained);
    /// an identity-only term takes all-z records. Ties break toward the
    /// lowest term index, so a measurement is never reused across terms.
    pub fn group_by_pauli(&self, obs: &Observable) -> Result<Vec<Vec<MeasurementRecord>>> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: obs.n_qubits(),
            });
        }
        let mut groups: Vec<Vec<MeasurementRecord>> = vec![Vec::new(); obs.n_terms()];
        for (ri, record) in self.records.iter().enumerate() {
            let k = obs
                .terms()
                .iter()
                .position(|term| record_matches_term(record, term))
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "record {ri} ({} {}) matches no observable term",
                        record.basis(),
                        record
                            .bits()
                            .iter()
                            .map(|b| char::from(b'0' + b))
                            .collect::<String>(),
                    ))
                })?;
            groups[k].push(record.clone());
        }
        Ok(groups)
    }
}

fn record_matches_term(record: &MeasurementRecord, term: &Term) -> bool {
    if term.string.is_identity() {
        return record.basis().is_all_z();
    }
    term.string.support().all(|q| {
        let axis = BasisAssignment::for_pauli(&term.string).axis(q);
        record.basis().axis(q) == axis
    })
}

fn parse_record_line(line_no: usize, line: &str, n_qubits: usize) -> Result<MeasurementRecord> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Error::parse(line_no, "expected `<basis-word> <bitstring>`"));
    }
    let basis: BasisAssignment = fields[0]
        .parse()
        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
    if basis.len() != n_qubits {
        return Err(Error::parse(
            line_no,
            format!("length mismatch: expected {n_qubits} qubits, got {}", basis.len()),
        ));
    }
    let bits = parse_bits(line_no, fields[1], n_qubits)?;
    MeasurementRecord::new(basis, bits).map_err(|e| Error::parse(line_no, e.to_string()))
}

fn parse_bits(line_no: usize, text: &str, n_qubits: usize) -> Result<Vec<u8>> {
    let bits = text
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            _ => Err(Error::parse(line_no, format!("bit '{c}' is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if bits.len() != n_qubits {
        return Err(Error::parse(
            line_no,
            format!("length mismatch: expected {n_qubits} bits, got {}", bits.len()),
        ));
    }
    Ok(bits)
}

/// Line iterator that skips blanks and tracks 1-based line numbers.
struct LineCursor {
    lines: std::vec::IntoIter<(usize, String)>,
    last_line: usize,
}

impl LineCursor {
    fn new(reader: impl Read) -> Result<Self> {
        let mut buf = String::new();
        let mut r = BufReader::new(reader);
        r.read_to_string(&mut buf)?;
        let mut collected = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in buf.lines().enumerate() {
            last_line = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            collected.push((idx + 1, line.to_string()));
        }
        Ok(LineCursor {
            lines: collected.into_iter(),
            last_line,
        })
    }

    fn next_content_line(&mut self) -> Option<(usize, String)> {
        self.lines.next()
    }

    fn expect_header(&mut self) -> Result<usize> {
        let (line_no, line) = self
            .next_content_line()
            .ok_or_else(|| Error::parse(0, "empty dataset"))?;
        let mut fields = line.split_whitespace();
        match (fields.next(), fields.next(), fields.next()) {
            (Some("qubits"), Some(n), None) => n
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| Error::parse(line_no, format!("invalid qubit count '{n}'"))),
            _ => Err(Error::parse(line_no, "expected header `qubits <N>`")),
        }
    }
}
