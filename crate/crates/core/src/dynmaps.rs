//! Decoherence functions, generalized Pauli input maps and their convex
//! mixtures, in state, superoperator, Choi and Kraus form.
//!
//! Input map `i` acts as
//!
//! ```text
//! Phi_i(t)[rho] = (1 - p(t)) rho + p(t)/(d-1) * sum_{k=1}^{d-1} U_i^k rho U_i^{k dagger}
//! ```
//!
//! so that it is trace preserving for every `d` and reduces to the qubit
//! Pauli channel `(1-p) rho + p s_i rho s_i` at `d = 2`. The mixture
//! `sum_i x_i Phi_i(t)` acts on `U_i^k` with eigenvalue
//! `1 - d/(d-1) (1 - x_i) p(t)`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    eigenvalues, hermitian_eigenvalues, hermiticity_deviation, identity, max_abs, trace,
    unvectorize, vectorize, CMatrix, C64,
};
use crate::mub::WeylUnitaries;

/// Positivity tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Weights must sum to one within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("time {t} outside the domain [0, {limit}] of the decoherence function")]
    OutsideDomain { t: f64, limit: f64 },
    #[error("invalid decoherence parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid mixing weights: {0}")]
    InvalidWeights(String),
    #[error("map index {index} out of range (have {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("decay rate is singular at t = {t}")]
    RateSingular { t: f64 },
    #[error("operation not available for the {0} family")]
    UnsupportedFamily(&'static str),
    #[error("map is not invertible at t = {t}")]
    SingularAtT { t: f64 },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),
}

/// Monotone ramp `f` on `[0, t#]` with `f(0) = 0`, `f(t#) = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    /// `t / (2 t#)`
    #[default]
    Linear,
    /// `(t / t#)^2 / 2`
    Quadratic,
    /// `sin(pi t / (2 t#)) / 2`
    HalfSine,
}

impl Ramp {
    fn value(self, s: f64) -> f64 {
        // s = t / t# in [0, 1]
        match self {
            Ramp::Linear => 0.5 * s,
            Ramp::Quadratic => 0.5 * s * s,
            Ramp::HalfSine => 0.5 * (0.5 * PI * s).sin(),
        }
    }

    fn slope(self, s: f64) -> f64 {
        match self {
            Ramp::Linear => 0.5,
            Ramp::Quadratic => s,
            Ramp::HalfSine => 0.25 * PI * (0.5 * PI * s).cos(),
        }
    }

    fn inverse(self, y: f64) -> f64 {
        match self {
            Ramp::Linear => 2.0 * y,
            Ramp::Quadratic => (2.0 * y).sqrt(),
            Ramp::HalfSine => (2.0 * y).asin() * 2.0 / PI,
        }
    }
}

/// The decoherence function `p(t)` shared by all input maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DecoherenceFunction {
    /// `(1 - e^{-ct}) / n`
    Exponential { n: f64, c: f64 },
    /// `(1 - cos(wt)) / 2`
    Cosine { omega: f64 },
    /// `sin(wt)`, only a valid decoherence function on `[0, pi/w]`.
    Sine { omega: f64 },
    /// `f(t)` up to `t#`, then `1/2`.
    Plateau { ramp: Ramp, t_sharp: f64 },
}

impl DecoherenceFunction {
    pub fn exponential(n: f64, c: f64) -> Result<Self, MapError> {
        let f = DecoherenceFunction::Exponential { n, c };
        f.validate()?;
        Ok(f)
    }

    pub fn cosine(omega: f64) -> Result<Self, MapError> {
        let f = DecoherenceFunction::Cosine { omega };
        f.validate()?;
        Ok(f)
    }

    pub fn sine(omega: f64) -> Result<Self, MapError> {
        let f = DecoherenceFunction::Sine { omega };
        f.validate()?;
        Ok(f)
    }

    pub fn plateau(ramp: Ramp, t_sharp: f64) -> Result<Self, MapError> {
        let f = DecoherenceFunction::Plateau { ramp, t_sharp };
        f.validate()?;
        Ok(f)
    }

    pub fn family(&self) -> &'static str {
        match self {
            DecoherenceFunction::Exponential { .. } => "exponential",
            DecoherenceFunction::Cosine { .. } => "cosine",
            DecoherenceFunction::Sine { .. } => "sine",
            DecoherenceFunction::Plateau { .. } => "plateau",
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |msg: String| Err(MapError::InvalidParameter(msg));
        match *self {
            DecoherenceFunction::Exponential { n, c } => {
                if !(n.is_finite() && n >= 1.0) {
                    return bad(format!("n must be >= 1, got {n}"));
                }
                if !(c.is_finite() && c > 0.0) {
                    return bad(format!("c must be > 0, got {c}"));
                }
            }
            DecoherenceFunction::Cosine { omega } | DecoherenceFunction::Sine { omega } => {
                if !(omega.is_finite() && omega > 0.0) {
                    return bad(format!("omega must be > 0, got {omega}"));
                }
            }
            DecoherenceFunction::Plateau { t_sharp, .. } => {
                if !(t_sharp.is_finite() && t_sharp > 0.0) {
                    return bad(format!("t_sharp must be > 0, got {t_sharp}"));
                }
            }
        }
        Ok(())
    }

    /// Largest time at which the function is defined (infinite for most families).
    pub fn domain_end(&self) -> f64 {
        match *self {
            DecoherenceFunction::Sine { omega } => PI / omega,
            _ => f64::INFINITY,
        }
    }

    fn check_time(&self, t: f64) -> Result<(), MapError> {
        if t < 0.0 || t.is_nan() {
            return Err(MapError::NegativeTime(t));
        }
        let limit = self.domain_end();
        if t > limit * (1.0 + 1e-15) {
            return Err(MapError::OutsideDomain { t, limit });
        }
        Ok(())
    }

    /// `p(t)`.
    pub fn eval(&self, t: f64) -> Result<f64, MapError> {
        self.check_time(t)?;
        Ok(match *self {
            DecoherenceFunction::Exponential { n, c } => -(-c * t).exp_m1() / n,
            DecoherenceFunction::Cosine { omega } => 0.5 * (1.0 - (omega * t).cos()),
            DecoherenceFunction::Sine { omega } => (omega * t).sin().max(0.0),
            DecoherenceFunction::Plateau { ramp, t_sharp } => {
                if t >= t_sharp {
                    0.5
                } else {
                    ramp.value(t / t_sharp)
                }
            }
        })
    }

    /// `p'(t)`; one-sided at the plateau corner.
    pub fn derivative(&self, t: f64) -> Result<f64, MapError> {
        self.check_time(t)?;
        Ok(match *self {
            DecoherenceFunction::Exponential { n, c } => c * (-c * t).exp() / n,
            DecoherenceFunction::Cosine { omega } => 0.5 * omega * (omega * t).sin(),
            DecoherenceFunction::Sine { omega } => omega * (omega * t).cos(),
            DecoherenceFunction::Plateau { ramp, t_sharp } => {
                if t >= t_sharp {
                    0.0
                } else {
                    ramp.slope(t / t_sharp) / t_sharp
                }
            }
        })
    }

    /// Supremum of `p` over its domain.
    pub fn sup(&self) -> f64 {
        match *self {
            DecoherenceFunction::Exponential { n, .. } => 1.0 / n,
            DecoherenceFunction::Cosine { .. } | DecoherenceFunction::Sine { .. } => 1.0,
            DecoherenceFunction::Plateau { .. } => 0.5,
        }
    }

    /// Whether `sup p` is attained at a finite time.
    pub fn sup_attained(&self) -> bool {
        !matches!(self, DecoherenceFunction::Exponential { .. })
    }

    /// First time at which `p(t) = target`, if any.
    pub fn first_time_at(&self, target: f64) -> Option<f64> {
        if target.is_nan() || target < 0.0 {
            return None;
        }
        if target == 0.0 {
            return Some(0.0);
        }
        match *self {
            DecoherenceFunction::Exponential { n, c } => {
                let r = n * target;
                (r < 1.0).then(|| -(-r).ln_1p() / c)
            }
            DecoherenceFunction::Cosine { omega } => {
                (target <= 1.0).then(|| (1.0 - 2.0 * target).clamp(-1.0, 1.0).acos() / omega)
            }
            DecoherenceFunction::Sine { omega } => (target <= 1.0).then(|| target.asin() / omega),
            DecoherenceFunction::Plateau { ramp, t_sharp } => {
                (target <= 0.5).then(|| (ramp.inverse(target) * t_sharp).min(t_sharp))
            }
        }
    }

    /// Qubit decay rate `gamma(t)` of `L[rho] = gamma (s rho s - rho)`.
    pub fn decay_rate(&self, t: f64) -> Result<f64, MapError> {
        self.check_time(t)?;
        match *self {
            DecoherenceFunction::Exponential { n, c } => {
                let denom = (n - 2.0) * (c * t).exp() + 2.0;
                if denom.abs() <= SINGULAR_EPS * (c * t).exp().max(1.0) {
                    return Err(MapError::RateSingular { t });
                }
                Ok(c / denom)
            }
            DecoherenceFunction::Cosine { omega } => {
                let (s, co) = (omega * t).sin_cos();
                if co.abs() <= SINGULAR_EPS {
                    return Err(MapError::RateSingular { t });
                }
                Ok(0.5 * omega * s / co)
            }
            other => Err(MapError::UnsupportedFamily(other.family())),
        }
    }
}

/// A density matrix; construction through [`DensityMatrix::new`] validates it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, MapError> {
        let rho = DensityMatrix(m);
        rho.validate(DENSITY_TOL)?;
        Ok(rho)
    }

    /// Skips validation; used for map outputs, which are checked by tests instead.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(identity(d).unscale(d as f64))
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self, MapError> {
        let norm = psi.norm();
        if norm.is_nan() || norm <= 0.0 {
            return Err(MapError::InvalidState("zero state vector".into()));
        }
        let v = psi.unscale(norm);
        Ok(DensityMatrix(&v * v.adjoint()))
    }

    pub fn validate(&self, tol: f64) -> Result<(), MapError> {
        let m = &self.0;
        if !m.is_square() || m.nrows() == 0 {
            return Err(MapError::InvalidState(format!("shape {:?}", m.shape())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MapError::InvalidState("non-finite entries".into()));
        }
        let herm = hermiticity_deviation(m);
        if herm > tol {
            return Err(MapError::InvalidState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = trace(m);
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(MapError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(MapError::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)[0]
    }

    /// `(tr(rho s_x), tr(rho s_y), tr(rho s_z))` for a qubit.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let m = &self.0;
        Some([
            2.0 * m[(1, 0)].re,
            2.0 * m[(1, 0)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }
}

/// A linear map on `d x d` matrices as a `d^2 x d^2` matrix on column-stacked operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self, MapError> {
        if matrix.shape() != (dim * dim, dim * dim) {
            return Err(MapError::DimensionMismatch {
                expected: dim * dim,
                got: matrix.nrows(),
            });
        }
        Ok(Superoperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: identity(dim * dim),
        }
    }

    /// Conjugation by `u`: `X -> u X u^dagger`.
    pub fn conjugation(u: &CMatrix) -> Self {
        Superoperator {
            dim: u.nrows(),
            matrix: u.conjugate().kronecker(u),
        }
    }

    /// The transpose map `X -> X^T`.
    pub fn transpose_map(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim * dim, dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r * dim + c, c * dim + r)] = C64::new(1.0, 0.0);
            }
        }
        Superoperator { dim, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(x)), self.dim)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix * &first.matrix,
        }
    }

    pub fn try_inverse(&self) -> Option<Superoperator> {
        self.matrix
            .clone()
            .try_inverse()
            .map(|matrix| Superoperator {
                dim: self.dim,
                matrix,
            })
    }

    pub fn determinant(&self) -> C64 {
        self.matrix.determinant()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        eigenvalues(&self.matrix)
    }

    /// Max deviation of `vec(I)^dagger S` from `vec(I)^dagger`, zero for trace-preserving maps.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| {
                let s: C64 = (0..d).map(|a| self.matrix[(a * d + a, col)]).sum();
                let target = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
                (s - C64::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `C = sum_{ij} |i><j| (x) Phi(|i><j|)`; the identity map gives `d |Phi+><Phi+|`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let matrix = CMatrix::from_fn(d * d, d * d, |row, col| {
            let (i, a) = (row / d, row % d);
            let (j, b) = (col / d, col % d);
            self.matrix[(b * d + a, j * d + i)]
        });
        ChoiMatrix { dim: d, matrix }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpVerdict {
    pub completely_positive: bool,
    pub min_eigenvalue: f64,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// CP iff the smallest Choi eigenvalue is `>= -tol`.
    pub fn is_cp(&self, tol: f64) -> Result<CpVerdict, MapError> {
        let scale = max_abs(&self.matrix).max(1.0);
        let herm = hermiticity_deviation(&self.matrix);
        if herm > 1e-9 * scale {
            return Err(MapError::NonHermitian(herm));
        }
        let min_eigenvalue = self.eigenvalues()[0];
        Ok(CpVerdict {
            completely_positive: min_eigenvalue >= -tol,
            min_eigenvalue,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<CMatrix>,
}

/// Result of [`KrausSet::dagger_dual`] with the validity flags of both maps.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMap {
    pub dual: KrausSet,
    pub original_trace_preserving: bool,
    pub original_unital: bool,
    pub dual_trace_preserving: bool,
}

impl KrausSet {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self, MapError> {
        let d = ops
            .first()
            .map(|k| k.nrows())
            .ok_or_else(|| MapError::InvalidParameter("empty Kraus set".into()))?;
        if let Some(k) = ops.iter().find(|k| k.shape() != (d, d)) {
            return Err(MapError::DimensionMismatch {
                expected: d,
                got: k.nrows().max(k.ncols()),
            });
        }
        Ok(KrausSet { ops })
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    /// Max entry of `|sum K^dagger K - I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let sum: CMatrix = self.ops.iter().map(|k| k.adjoint() * k).sum();
        max_abs(&(sum - identity(self.dim())))
    }

    /// Max entry of `|sum K K^dagger - I|`.
    pub fn unitality_deviation(&self) -> f64 {
        let sum: CMatrix = self.ops.iter().map(|k| k * k.adjoint()).sum();
        max_abs(&(sum - identity(self.dim())))
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.ops.iter().map(|k| k * rho * k.adjoint()).sum()
    }

    pub fn to_superoperator(&self) -> Superoperator {
        let d = self.dim();
        let matrix = self
            .ops
            .iter()
            .map(|k| k.conjugate().kronecker(k))
            .fold(CMatrix::zeros(d * d, d * d), |acc, m| acc + m);
        Superoperator { dim: d, matrix }
    }

    /// The map `rho -> sum_j K_j^dagger rho K_j` realized by noisy teleportation.
    /// It is trace preserving iff the original map is unital.
    pub fn dagger_dual(&self, tol: f64) -> DualMap {
        let dual = KrausSet {
            ops: self.ops.iter().map(|k| k.adjoint()).collect(),
        };
        DualMap {
            original_trace_preserving: self.completeness_deviation() <= tol,
            original_unital: self.unitality_deviation() <= tol,
            dual_trace_preserving: dual.completeness_deviation() <= tol,
            dual,
        }
    }
}

/// Generalized Pauli input map `i` applied to `rho` at time `t`.
pub fn apply_input_map(
    unitaries: &WeylUnitaries,
    i: usize,
    pf: &DecoherenceFunction,
    t: f64,
    rho: &DensityMatrix,
) -> Result<DensityMatrix, MapError> {
    let d = unitaries.dim();
    check_index(i, unitaries.count())?;
    check_dim(d, rho.dim())?;
    let p = pf.eval(t)?;
    let x = rho.matrix();
    let twirl = conjugation_sum(unitaries, i, x);
    Ok(DensityMatrix(
        x.scale(1.0 - p) + twirl.scale(p / (d as f64 - 1.0)),
    ))
}

/// `sum_{k=1}^{d-1} U_i^k X U_i^{-k}`
fn conjugation_sum(unitaries: &WeylUnitaries, i: usize, x: &CMatrix) -> CMatrix {
    let d = unitaries.dim();
    (1..d as i64)
        .map(|k| {
            let u = unitaries.power(i, k);
            u * x * u.adjoint()
        })
        .fold(CMatrix::zeros(d, d), |acc, m| acc + m)
}

fn check_index(i: usize, count: usize) -> Result<(), MapError> {
    if i >= count {
        return Err(MapError::IndexOutOfRange { index: i, count });
    }
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> Result<(), MapError> {
    if expected != got {
        return Err(MapError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Checks strictly positive weights, one per map, summing to one.
pub fn validate_weights(weights: &[f64], count: usize) -> Result<(), MapError> {
    if weights.len() != count {
        return Err(MapError::InvalidWeights(format!(
            "expected {count} weights, got {}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(MapError::InvalidWeights(format!(
            "weight {w} is not strictly positive"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(MapError::InvalidWeights(format!(
            "weights sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// The output map `sum_i x_i Phi_i(t)`.
#[derive(Debug, Clone)]
pub struct MixtureMap {
    unitaries: Arc<WeylUnitaries>,
    weights: Vec<f64>,
    pf: DecoherenceFunction,
    // t-independent part: Phi(t) = (1 - p) id + p * twirl
    twirl: OnceLock<CMatrix>,
}

impl MixtureMap {
    pub fn new(
        unitaries: Arc<WeylUnitaries>,
        weights: Vec<f64>,
        pf: DecoherenceFunction,
    ) -> Result<Self, MapError> {
        validate_weights(&weights, unitaries.count())?;
        pf.validate()?;
        Ok(MixtureMap {
            unitaries,
            weights,
            pf,
            twirl: OnceLock::new(),
        })
    }

    /// A single input map `Phi_i`, i.e. the simplex vertex `x = e_i`.
    pub fn vertex(
        unitaries: Arc<WeylUnitaries>,
        i: usize,
        pf: DecoherenceFunction,
    ) -> Result<Self, MapError> {
        check_index(i, unitaries.count())?;
        pf.validate()?;
        let mut weights = vec![0.0; unitaries.count()];
        weights[i] = 1.0;
        Ok(MixtureMap {
            unitaries,
            weights,
            pf,
            twirl: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.unitaries.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decoherence(&self) -> &DecoherenceFunction {
        &self.pf
    }

    pub fn unitaries(&self) -> &WeylUnitaries {
        &self.unitaries
    }

    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, t: f64, rho: &DensityMatrix) -> Result<DensityMatrix, MapError> {
        let d = self.dim();
        check_dim(d, rho.dim())?;
        let p = self.pf.eval(t)?;
        let x = rho.matrix();
        let twirl = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| conjugation_sum(&self.unitaries, i, x).scale(w))
            .fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        Ok(DensityMatrix(
            x.scale(1.0 - p) + twirl.scale(p / (d as f64 - 1.0)),
        ))
    }

    /// `lambda_i(t) = 1 - d/(d-1) (1 - x_i) p(t)`.
    pub fn eigenvalue(&self, i: usize, t: f64) -> Result<f64, MapError> {
        check_index(i, self.count())?;
        let p = self.pf.eval(t)?;
        Ok(1.0 - self.contraction(i) * p)
    }

    /// `d/(d-1) (1 - x_i)`, the coefficient of `p(t)` in `lambda_i`.
    pub fn contraction(&self, i: usize) -> f64 {
        let d = self.dim() as f64;
        d / (d - 1.0) * (1.0 - self.weights[i])
    }

    /// `lambda_i'(t) / lambda_i(t)`.
    pub fn eigenvalue_rate(&self, i: usize, t: f64) -> Result<f64, MapError> {
        let lambda = self.eigenvalue(i, t)?;
        if lambda.abs() <= SINGULAR_EPS {
            return Err(MapError::SingularAtT { t });
        }
        Ok(-self.contraction(i) * self.pf.derivative(t)? / lambda)
    }

    fn twirl(&self) -> &CMatrix {
        self.twirl.get_or_init(|| {
            let d = self.dim();
            let mut acc = CMatrix::zeros(d * d, d * d);
            for (i, &w) in self.weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let scale = C64::new(w / (d as f64 - 1.0), 0.0);
                for k in 1..d as i64 {
                    let u = self.unitaries.power(i, k);
                    acc += u.conjugate().kronecker(u) * scale;
                }
            }
            acc
        })
    }

    /// `Re tr(U_i^dagger T(U_i)) / d` for the t-independent twirl `T`, computed
    /// from the matrices; `lambda_i(t) = 1 - p + p * response`.
    pub fn twirl_response(&self, i: usize) -> Result<f64, MapError> {
        check_index(i, self.count())?;
        let d = self.dim();
        let ui = self.unitaries.unitary(i);
        let mut acc = CMatrix::zeros(d, d);
        for (j, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                acc += conjugation_sum(&self.unitaries, j, ui).scale(w / (d as f64 - 1.0));
            }
        }
        Ok(crate::linalg::hs_inner(ui, &acc).re / d as f64)
    }

    pub fn superoperator(&self, t: f64) -> Result<Superoperator, MapError> {
        let p = self.pf.eval(t)?;
        let d = self.dim();
        let matrix = identity(d * d).scale(1.0 - p) + self.twirl().scale(p);
        Ok(Superoperator { dim: d, matrix })
    }

    /// Kraus operators `sqrt(1-p) I` and `sqrt(x_i p/(d-1)) U_i^k`.
    pub fn kraus(&self, t: f64) -> Result<KrausSet, MapError> {
        let p = self.pf.eval(t)?;
        let d = self.dim();
        let mut ops = vec![identity(d).scale((1.0 - p).sqrt())];
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let amp = (w * p / (d as f64 - 1.0)).sqrt();
            for k in 1..d as i64 {
                ops.push(self.unitaries.power(i, k).scale(amp));
            }
        }
        Ok(KrausSet { ops })
    }

    /// Finite-difference estimate of `L(t) = Phi'(t) Phi(t)^{-1}` and its rates
    /// on the eigenoperators `U_i^k`.
    ///
    /// Central differences when `t >= h`, otherwise the second-order forward
    /// stencil.
    pub fn numeric_generator(&self, t: f64, h: f64) -> Result<GeneratorEstimate, MapError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(MapError::InvalidParameter(format!("step {h} must be > 0")));
        }
        for i in 0..self.count() {
            if self.eigenvalue(i, t)?.abs() <= SINGULAR_EPS {
                return Err(MapError::SingularAtT { t });
            }
        }
        let s = self.superoperator(t)?;
        let deriv = if t >= h {
            (self.superoperator(t + h)?.matrix - self.superoperator(t - h)?.matrix).unscale(2.0 * h)
        } else {
            (self.superoperator(t + h)?.matrix.scale(4.0)
                - self.superoperator(t + 2.0 * h)?.matrix
                - s.matrix.scale(3.0))
            .unscale(2.0 * h)
        };
        let inv = s.try_inverse().ok_or(MapError::SingularAtT { t })?;
        let gen = deriv * inv.matrix;
        let d = self.dim();
        let rates = (0..self.count())
            .map(|i| {
                let total: f64 = (1..d as i64)
                    .map(|k| {
                        let v = vectorize(self.unitaries.power(i, k));
                        (v.adjoint() * &gen * &v)[(0, 0)].re / d as f64
                    })
                    .sum();
                total / (d as f64 - 1.0)
            })
            .collect();
        Ok(GeneratorEstimate {
            t,
            h,
            generator: Superoperator {
                dim: d,
                matrix: gen,
            },
            rates,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorEstimate {
    pub t: f64,
    pub h: f64,
    pub generator: Superoperator,
    /// Rate on the `U_i^k` eigenoperators, one per input map.
    pub rates: Vec<f64>,
}
