//! Board-level device fingerprinting from LCR(Z) measurements.
//!
//! A 4×N matrix of inductance, capacitance, resistance and impedance values
//! measured at N test points is log-compressed, compared against its
//! per-characteristic mean and turned into an N×4 bit signature. A
//! repetition-code fuzzy extractor turns that noisy signature into a stable
//! key, and [`sweep`] measures authentication accuracy under simulated
//! ageing noise.

mod fuzzy;
mod noise;
pub mod sweep;

use std::fmt;
use std::io::Read;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub use fuzzy::{authenticate, bits_to_string, fe_generate, fe_reproduce, parse_bits, AuthDecision, FuzzySketch};
pub use noise::{inject_noise, NoiseModel};
pub use sweep::{accuracy_sweep, SweepRow};

#[derive(Debug, Error, PartialEq)]
pub enum DevfingError {
    #[error("entry ({row}, {col}) = {value} is not strictly positive")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("characteristic rows have different lengths")]
    RaggedRows,
    #[error("need at least 2 test points, got {0}")]
    TooFewTestPoints(usize),
    #[error("signature of {bits} bits cannot hold one block of {block} bits")]
    SignatureTooShort { bits: usize, block: usize },
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("accuracy sweep needs at least one trial")]
    NoTrials,
    #[error("cannot select {wanted} of {available} test points")]
    BadSelection { wanted: usize, available: usize },
    #[error("invalid bit string")]
    InvalidBits,
    #[error("csv: {0}")]
    Csv(String),
}

/// Measured characteristics, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Characteristic {
    Inductance,
    Capacitance,
    Resistance,
    Impedance,
}

impl Characteristic {
    pub const ALL: [Characteristic; 4] = [
        Self::Inductance,
        Self::Capacitance,
        Self::Resistance,
        Self::Impedance,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Inductance => "L",
            Self::Capacitance => "C",
            Self::Resistance => "R",
            Self::Impedance => "Z",
        }
    }
}

/// 4×N matrix of strictly positive LCR(Z) readings; rows are L, C, R, Z.
#[derive(Debug, Clone, PartialEq)]
pub struct LcrFeatureMatrix {
    rows: [Vec<f64>; 4],
}

impl LcrFeatureMatrix {
    pub fn new(rows: [Vec<f64>; 4]) -> Result<Self, DevfingError> {
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(DevfingError::RaggedRows);
        }
        if n < 2 {
            return Err(DevfingError::TooFewTestPoints(n));
        }
        for (row, values) in rows.iter().enumerate() {
            for (col, &value) in values.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(DevfingError::NonPositiveEntry { row, col, value });
                }
            }
        }
        Ok(Self { rows })
    }

    /// Reads the transposed CSV layout: a `L,C,R,Z` header followed by one
    /// line per test point.
    pub fn from_csv(reader: impl Read) -> Result<Self, DevfingError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| DevfingError::Csv(e.to_string()))?;
        let expected = Characteristic::ALL.map(Characteristic::symbol);
        if header.len() != 4
            || !header
                .iter()
                .zip(expected)
                .all(|(h, e)| h.eq_ignore_ascii_case(e))
        {
            return Err(DevfingError::Csv(format!(
                "header must be L,C,R,Z, got {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: [Vec<f64>; 4] = Default::default();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| DevfingError::Csv(e.to_string()))?;
            if record.len() != 4 {
                return Err(DevfingError::Csv(format!("test point {line}: expected 4 fields")));
            }
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    DevfingError::Csv(format!("test point {line}: bad number {field:?}"))
                })?;
                rows[i].push(v);
            }
        }
        Self::new(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,C,R,Z\n");
        for i in 0..self.n_testpoints() {
            let line: Vec<String> = self.rows.iter().map(|r| format!("{:e}", r[i])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn n_testpoints(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, c: Characteristic) -> &[f64] {
        &self.rows[c as usize]
    }

    /// Element-wise base-10 logarithm.
    pub fn log_features(&self) -> LogMatrix {
        LogMatrix {
            rows: self.rows.clone().map(|r| r.into_iter().map(f64::log10).collect()),
        }
    }

    pub fn binarize(&self) -> BinarySignature {
        self.log_features().binarize()
    }

    /// Keeps `count` test points chosen uniformly without replacement,
    /// preserving their original order.
    pub fn select_test_points(
        &self,
        count: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, DevfingError> {
        let n = self.n_testpoints();
        if count < 2 || count > n {
            return Err(DevfingError::BadSelection {
                wanted: count,
                available: n,
            });
        }
        let mut picked = sample(rng, n, count).into_vec();
        picked.sort_unstable();
        let rows = self.rows.clone().map(|r| picked.iter().map(|&i| r[i]).collect());
        Self::new(rows)
    }
}

/// Log-domain feature matrix (possibly with injected noise).
#[derive(Debug, Clone, PartialEq)]
pub struct LogMatrix {
    rows: [Vec<f64>; 4],
}

impl LogMatrix {
    pub fn from_rows(rows: [Vec<f64>; 4]) -> Result<Self, DevfingError> {
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(DevfingError::RaggedRows);
        }
        if n < 2 {
            return Err(DevfingError::TooFewTestPoints(n));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>; 4] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>; 4] {
        &mut self.rows
    }

    pub fn n_testpoints(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row_means(&self) -> [f64; 4] {
        self.rows
            .each_ref()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
    }

    /// Bit `(i, k)` is set iff `log value ≥ mean` of characteristic `k`.
    pub fn binarize(&self) -> BinarySignature {
        let means = self.row_means();
        let points = (0..self.n_testpoints())
            .map(|i| std::array::from_fn(|k| self.rows[k][i] >= means[k]))
            .collect();
        BinarySignature { points }
    }
}

/// N×4 bit signature; row `i` is test point `i`, columns L, C, R, Z.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySignature {
    points: Vec<[bool; 4]>,
}

impl BinarySignature {
    pub fn from_points(points: Vec<[bool; 4]>) -> Self {
        Self { points }
    }

    /// Row-major flat bits (test point, then L, C, R, Z).
    pub fn from_bits(bits: &[bool]) -> Result<Self, DevfingError> {
        if bits.len() % 4 != 0 {
            return Err(DevfingError::InvalidBits);
        }
        Ok(Self {
            points: bits
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect(),
        })
    }

    pub fn points(&self) -> &[[bool; 4]] {
        &self.points
    }

    pub fn n_testpoints(&self) -> usize {
        self.points.len()
    }

    pub fn bits(&self) -> Vec<bool> {
        self.points.iter().flatten().copied().collect()
    }

    /// One nibble per test point, L as the most significant bit.
    pub fn nibbles(&self) -> Vec<u8> {
        self.points
            .iter()
            .map(|p| p.iter().fold(0u8, |acc, &b| (acc << 1) | u8::from(b)))
            .collect()
    }

    pub fn to_hex(&self) -> String {
        self.nibbles()
            .into_iter()
            .map(|n| char::from_digit(u32::from(n), 16).expect("nibble"))
            .collect()
    }

    pub fn hamming(&self, other: &BinarySignature) -> usize {
        self.bits()
            .iter()
            .zip(other.bits())
            .filter(|(a, b)| **a != *b)
            .count()
    }
}

impl fmt::Display for BinarySignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// JSON view used by the CLI.
#[derive(Debug, Serialize)]
pub struct SignatureSummary {
    pub n_testpoints: usize,
    pub nibbles: String,
    pub bits: String,
    pub row_means_log10: [f64; 4],
}

impl SignatureSummary {
    pub fn of(matrix: &LcrFeatureMatrix) -> Self {
        let logs = matrix.log_features();
        let sig = logs.binarize();
        Self {
            n_testpoints: sig.n_testpoints(),
            nibbles: sig.to_hex(),
            bits: bits_to_string(&sig.bits()),
            row_means_log10: logs.row_means(),
        }
    }
}

/// Readings from the evaluation board at six test points.
pub fn reference_board_matrix() -> LcrFeatureMatrix {
    LcrFeatureMatrix::new([
        vec![253.9e-3, 703.9e-6, 2.828e-3, 2.195e-3, 706.6e-6, 703.5e-6],
        vec![997.2e-12, 358.7e-9, 88.92e-9, 114.4e-9, 355.0e-9, 358.0e-9],
        vec![9.352e3, 0.546e3, 1.381e3, 1.174e3, 0.547e3, 0.546e3],
        vec![1e-6, 0.304e3, 32.69e3, 15.96e3, 0.305e3, 0.305e3],
    ])
    .expect("reference matrix is valid")
}
