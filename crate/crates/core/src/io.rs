//! Text and JSON formats: complex matrices, density matrices, superoperators,
//! MUB files, weight vectors and time lists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynmaps::{DensityMatrix, MapError, Superoperator};
use crate::linalg::{c, CMatrix};
use crate::mub::{MubError, MubSet, MubSetJson};

/// Weights whose sum is this close to 1 are accepted as given.
pub const WEIGHT_ACCEPT_TOL: f64 = 1e-9;
/// Weights whose sum is this close to 1 are renormalized with a warning.
pub const WEIGHT_RENORMALIZE_TOL: f64 = 1e-6;
/// Upper bound on matrix side length read from files.
pub const MAX_MATRIX_DIM: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("malformed number list: {0}")]
    Number(String),
    #[error("matrix is not square or is empty")]
    NotSquare,
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Mub(#[from] MubError),
}

/// A complex matrix as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexMatrixJson(pub Vec<Vec<[f64; 2]>>);

impl ComplexMatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        ComplexMatrixJson(
            (0..m.nrows())
                .map(|r| {
                    (0..m.ncols())
                        .map(|col| [m[(r, col)].re, m[(r, col)].im])
                        .collect()
                })
                .collect(),
        )
    }

    /// Square matrix with finite entries.
    pub fn to_matrix(&self) -> Result<CMatrix, ParseError> {
        let n = self.0.len();
        if n == 0 || n > MAX_MATRIX_DIM || self.0.iter().any(|row| row.len() != n) {
            return Err(ParseError::NotSquare);
        }
        if self.0.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(ParseError::NonFinite);
        }
        Ok(CMatrix::from_fn(n, n, |r, col| {
            let [re, im] = self.0[r][col];
            c(re, im)
        }))
    }
}

pub fn parse_complex_matrix(text: &str) -> Result<CMatrix, ParseError> {
    let json: ComplexMatrixJson =
        serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
    json.to_matrix()
}

/// Density matrix JSON, validated for Hermiticity, unit trace and positivity.
pub fn parse_density_matrix(text: &str) -> Result<DensityMatrix, ParseError> {
    Ok(DensityMatrix::new(parse_complex_matrix(text)?)?)
}

/// Superoperator JSON: a `d^2 x d^2` matrix acting on column-stacked operators.
pub fn parse_superoperator(text: &str) -> Result<Superoperator, ParseError> {
    let m = parse_complex_matrix(text)?;
    let n = m.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(ParseError::Invalid(format!(
            "superoperator side {n} is not a perfect square"
        )));
    }
    Ok(Superoperator::from_matrix(d, m)?)
}

pub fn parse_mub_set(text: &str) -> Result<MubSet, ParseError> {
    let json: MubSetJson =
        serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
    Ok(MubSet::from_json(&json)?)
}

/// Comma-separated finite floats.
pub fn parse_float_list(text: &str) -> Result<Vec<f64>, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ParseError::Number("empty list".into()));
    }
    trimmed
        .split(',')
        .map(|tok| {
            let tok = tok.trim();
            let x: f64 = tok
                .parse()
                .map_err(|_| ParseError::Number(format!("'{tok}' is not a number")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(ParseError::Number(format!("'{tok}' is not finite")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedWeights {
    pub weights: Vec<f64>,
    /// Set when the input sum was off by more than [`WEIGHT_ACCEPT_TOL`] and got rescaled.
    pub renormalized_from: Option<f64>,
}

/// Strictly positive weights summing to 1. Sums within [`WEIGHT_RENORMALIZE_TOL`]
/// of 1 are rescaled; anything further off is rejected.
pub fn parse_weights(text: &str, expected_len: Option<usize>) -> Result<ParsedWeights, ParseError> {
    let mut weights = parse_float_list(text)?;
    if let Some(len) = expected_len {
        if weights.len() != len {
            return Err(ParseError::Invalid(format!(
                "expected {len} weights, got {}",
                weights.len()
            )));
        }
    }
    if let Some(bad) = weights.iter().find(|&&w| w <= 0.0) {
        return Err(ParseError::Invalid(format!(
            "weights must be strictly positive, got {bad}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    let err = (sum - 1.0).abs();
    if err <= WEIGHT_ACCEPT_TOL {
        Ok(ParsedWeights {
            weights,
            renormalized_from: None,
        })
    } else if err <= WEIGHT_RENORMALIZE_TOL {
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(ParsedWeights {
            weights,
            renormalized_from: Some(sum),
        })
    } else {
        Err(ParseError::Invalid(format!("weights sum to {sum}, not 1")))
    }
}

/// Non-negative, non-decreasing times.
pub fn parse_times(text: &str) -> Result<Vec<f64>, ParseError> {
    let times = parse_float_list(text)?;
    if let Some(t) = times.iter().find(|&&t| t < 0.0) {
        return Err(ParseError::Invalid(format!(
            "times must be non-negative, got {t}"
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ParseError::Invalid("times must be non-decreasing".into()));
    }
    Ok(times)
}

/// JSON formatter that writes every float with 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedDigitsFormatter;

impl serde_json::ser::Formatter for FixedDigitsFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        // -0.0 prints as 0
        let value = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with fixed float formatting, so identical values give identical bytes.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String, ParseError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigitsFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| ParseError::Json(e.to_string()))?;
    String::from_utf8(out).map_err(|e| ParseError::Json(e.to_string()))
}
