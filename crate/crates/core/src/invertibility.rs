//! Singular times of mixture maps, regime classification in the decoherence
//! parameter `n`, and CP-divisibility of the propagators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynmaps::{DecoherenceFunction, MapError, MixtureMap, Ramp};
use crate::finite_field::{factor_prime_power, FieldError};

/// Bisection stops when the bracket is this narrow relative to its position.
pub const BISECTION_REL_TOL: f64 = 1e-15;
/// `|lambda|` at or below this counts as a zero during scans.
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-12;
/// Sign flips of `lambda_i` between grid points that both lie below this are
/// treated as rounding noise, e.g. in the tail of `e^{-ct}`.
pub const LAMBDA_NOISE_FLOOR: f64 = 1e-13;
/// Consecutive grid values of `lambda_i` differing by more than this trigger a coarse-grid advisory.
pub const GRID_JUMP_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvertError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular time formula only holds for qubits, got d = {0}")]
    NotQubit(usize),
    #[error("no closed-form singular time for the {0} family")]
    AnalyticUnavailable(&'static str),
    #[error("propagator undefined: map is singular at grid point t = {t}")]
    SingularAtGridPoint { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Invertible,
    NoninvertibleAt { t_star: f64 },
    SemigroupEqualMixPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularTime {
    /// 1-based index of the input map, as in `x_1, ..., x_{d+1}`.
    pub i: usize,
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityReport {
    pub classification: Classification,
    pub singular_times: Vec<SingularTime>,
    pub method: Method,
    /// 1-based indices whose grid showed jumps above [`GRID_JUMP_THRESHOLD`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coarse_grid: Vec<usize>,
}

impl InvertibilityReport {
    fn from_times(m: &MixtureMap, times: Vec<Option<f64>>, method: Method) -> Self {
        let first = times
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |a| a.min(t)))
            });
        let classification = match first {
            Some(t_star) => Classification::NoninvertibleAt { t_star },
            None if is_equal_mix_semigroup(m) => Classification::SemigroupEqualMixPoint,
            None => Classification::Invertible,
        };
        InvertibilityReport {
            classification,
            singular_times: times
                .into_iter()
                .enumerate()
                .map(|(i, t_star)| SingularTime { i: i + 1, t_star })
                .collect(),
            method,
            coarse_grid: Vec::new(),
        }
    }

    pub fn is_invertible(&self) -> bool {
        !matches!(self.classification, Classification::NoninvertibleAt { .. })
    }
}

fn is_equal_mix_semigroup(m: &MixtureMap) -> bool {
    let d = m.dim() as f64;
    let equal = 1.0 / (d + 1.0);
    match *m.decoherence() {
        DecoherenceFunction::Exponential { n, .. } => {
            (n - d * d / (d * d - 1.0)).abs() <= 1e-12
                && m.weights().iter().all(|w| (w - equal).abs() <= 1e-12)
        }
        _ => false,
    }
}

fn check_weight(x: f64) -> Result<(), InvertError> {
    if !(0.0..1.0).contains(&x) {
        return Err(InvertError::InvalidArgument(format!(
            "weight {x} outside [0, 1)"
        )));
    }
    Ok(())
}

/// `t* = ln[d(1-x) / (d(1-x) - n(d-1))] / c` when the denominator is positive.
///
/// `x = 0` is accepted as the degenerate single-map case.
pub fn singular_time_exponential(
    d: usize,
    n: f64,
    c: f64,
    x: f64,
) -> Result<Option<f64>, InvertError> {
    if d < 2 {
        return Err(InvertError::InvalidArgument(format!("d = {d}")));
    }
    DecoherenceFunction::exponential(n, c)?;
    check_weight(x)?;
    let d = d as f64;
    let a = d * (1.0 - x);
    let b = n * (d - 1.0);
    if a - b <= 0.0 {
        return Ok(None);
    }
    Ok(Some((a / (a - b)).ln() / c))
}

/// Qubit cosine family: `t* = arccos(x / (x - 1)) / w` for `x <= 1/2`.
pub fn singular_time_cosine(omega: f64, x: f64) -> Result<Option<f64>, InvertError> {
    DecoherenceFunction::cosine(omega)?;
    check_weight(x)?;
    if x > 0.5 {
        return Ok(None);
    }
    Ok(Some((x / (x - 1.0)).clamp(-1.0, 1.0).acos() / omega))
}

/// Qubit plateau family: solves `p(t*) = 1 / (2(1-x))`, which needs `x = 0`.
pub fn singular_time_plateau(
    d: usize,
    ramp: Ramp,
    t_sharp: f64,
    x: f64,
) -> Result<Option<f64>, InvertError> {
    if d != 2 {
        return Err(InvertError::NotQubit(d));
    }
    let pf = DecoherenceFunction::plateau(ramp, t_sharp)?;
    check_weight(x)?;
    Ok(pf.first_time_at(0.5 / (1.0 - x)))
}

/// First finite singular time of eigenvalue `i` of a mixture, from the closed
/// forms above generalized to any `d` through `p(t*) = (d-1) / (d (1 - x_i))`.
pub fn singular_time(
    pf: &DecoherenceFunction,
    d: usize,
    x: f64,
) -> Result<Option<f64>, InvertError> {
    check_weight(x)?;
    let df = d as f64;
    let target = (df - 1.0) / (df * (1.0 - x));
    match *pf {
        DecoherenceFunction::Exponential { n, c } => singular_time_exponential(d, n, c, x),
        DecoherenceFunction::Cosine { omega } if d == 2 => singular_time_cosine(omega, x),
        DecoherenceFunction::Plateau { ramp, t_sharp } if d == 2 => {
            singular_time_plateau(d, ramp, t_sharp, x)
        }
        DecoherenceFunction::Cosine { .. } | DecoherenceFunction::Plateau { .. } => {
            Ok(pf.first_time_at(target))
        }
        DecoherenceFunction::Sine { .. } => Err(InvertError::AnalyticUnavailable("sine")),
    }
}

pub fn analytic_report(m: &MixtureMap) -> Result<InvertibilityReport, InvertError> {
    let times = m
        .weights()
        .iter()
        .map(|&x| singular_time(m.decoherence(), m.dim(), x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InvertibilityReport::from_times(m, times, Method::Analytic))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    InvertibleInputs,
    IntermediateNoninvertible,
    AlwaysNoninvertibleOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub d: usize,
    pub n: f64,
    pub kind: RegimeKind,
    /// `d^2 / (d^2 - 1)`
    pub lower: f64,
    /// `d / (d - 1)`
    pub upper: f64,
}

pub fn regime_bounds(d: usize) -> (f64, f64) {
    let df = d as f64;
    (df * df / (df * df - 1.0), df / (df - 1.0))
}

/// Places `n` relative to `[d^2/(d^2-1), d/(d-1))`; the lower end is intermediate
/// (measure-zero invertible set), the upper end has invertible inputs.
pub fn classify_regime(d: usize, n: f64) -> Result<Regime, InvertError> {
    factor_prime_power(d)?;
    if !(n.is_finite() && n >= 1.0) {
        return Err(InvertError::InvalidArgument(format!(
            "n must be >= 1, got {n}"
        )));
    }
    let (lower, upper) = regime_bounds(d);
    let kind = if n >= upper {
        RegimeKind::InvertibleInputs
    } else if n < lower {
        RegimeKind::AlwaysNoninvertibleOutput
    } else {
        RegimeKind::IntermediateNoninvertible
    };
    Ok(Regime {
        d,
        n,
        kind,
        lower,
        upper,
    })
}

/// `g(d, n) = 1 - n(d-1)/d`
pub fn threshold(d: usize, n: f64) -> f64 {
    let df = d as f64;
    1.0 - n * (df - 1.0) / df
}

/// True iff every `x_i >= g(d, n)`; the boundary counts as invertible.
pub fn output_invertible(d: usize, n: f64, weights: &[f64]) -> bool {
    let g = threshold(d, n);
    weights.iter().all(|&x| x >= g)
}

/// Options for [`numeric_singularity_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub t_max: f64,
    pub grid_points: usize,
    pub tol: f64,
}

impl ScanOptions {
    /// One period for cosine, the valid half period for sine, `50/c` for
    /// exponential and `100 t#` for plateau maps.
    pub fn default_for(pf: &DecoherenceFunction) -> Self {
        let t_max = match *pf {
            DecoherenceFunction::Exponential { c, .. } => 50.0 / c,
            DecoherenceFunction::Cosine { omega } => 2.0 * std::f64::consts::PI / omega,
            DecoherenceFunction::Sine { omega } => std::f64::consts::PI / omega,
            DecoherenceFunction::Plateau { t_sharp, .. } => 100.0 * t_sharp,
        };
        ScanOptions {
            t_max,
            grid_points: 4001,
            tol: DEFAULT_LAMBDA_TOL,
        }
    }
}

/// Locates the first zero of each `lambda_i(t)` on `[0, t_max]`.
///
/// `lambda_i` is evaluated as `1 - p(t) + p(t) * mu_i`, where `mu_i` is the
/// response of the map's twirl on `U_i` computed from the unitaries. Sign
/// changes are refined by bisection; grid local minima of `|lambda_i|` are
/// refined by golden-section search to catch tangential zeros.
pub fn numeric_singularity_scan(
    m: &MixtureMap,
    opts: ScanOptions,
) -> Result<InvertibilityReport, InvertError> {
    if !(opts.t_max > 0.0 && opts.t_max.is_finite()) {
        return Err(InvertError::InvalidArgument(format!(
            "t_max = {}",
            opts.t_max
        )));
    }
    if opts.grid_points < 2 {
        return Err(InvertError::InvalidArgument(
            "need at least 2 grid points".into(),
        ));
    }
    let pf = *m.decoherence();
    let t_max = opts.t_max.min(pf.domain_end());
    let step = t_max / (opts.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..opts.grid_points)
        .map(|j| (j as f64 * step).min(t_max))
        .collect();
    let p_grid = grid
        .iter()
        .map(|&t| pf.eval(t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut times = Vec::with_capacity(m.count());
    let mut coarse = Vec::new();
    for i in 0..m.count() {
        let mu = m.twirl_response(i)?;
        let lambda = |t: f64| -> f64 {
            let p = pf.eval(t).expect("t within scanned domain");
            1.0 - p + p * mu
        };
        let values: Vec<f64> = p_grid.iter().map(|&p| 1.0 - p + p * mu).collect();
        if values
            .windows(2)
            .any(|w| (w[1] - w[0]).abs() > GRID_JUMP_THRESHOLD)
        {
            coarse.push(i + 1);
        }
        times.push(first_root(&grid, &values, lambda, opts.tol));
    }
    let mut report = InvertibilityReport::from_times(m, times, Method::Numeric);
    report.coarse_grid = coarse;
    Ok(report)
}

fn first_root(grid: &[f64], values: &[f64], f: impl Fn(f64) -> f64, tol: f64) -> Option<f64> {
    for j in 0..grid.len() {
        // a small grid value only counts when |lambda| stops decreasing there,
        // so asymptotic decay towards zero is not reported as a root
        let prev = if j > 0 { values[j - 1].abs() } else { 0.0 };
        let next = values.get(j + 1).map_or(0.0, |v| v.abs());
        let above_noise = prev.max(next) > LAMBDA_NOISE_FLOOR;
        if values[j] == 0.0
            || (values[j].abs() <= tol
                && j + 1 < grid.len()
                && next >= values[j].abs()
                && above_noise)
        {
            return Some(grid[j]);
        }
        if j + 1 < grid.len()
            && values[j].signum() != values[j + 1].signum()
            && values[j + 1].abs() > tol
            && values[j].abs().max(values[j + 1].abs()) > LAMBDA_NOISE_FLOOR
        {
            return Some(bisect(&f, grid[j], grid[j + 1], values[j]));
        }
        if j >= 1 && j + 1 < grid.len() {
            let (a, b, c) = (values[j - 1].abs(), values[j].abs(), values[j + 1].abs());
            if b < a && b <= c && values[j - 1].signum() == values[j + 1].signum() && above_noise {
                let (t_min, v_min) = golden_min(|t| f(t).abs(), grid[j - 1], grid[j + 1]);
                if v_min <= tol {
                    return Some(t_min);
                }
            }
        }
    }
    None
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || (b - a) <= BISECTION_REL_TOL * b.abs().max(1e-300) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a) <= BISECTION_REL_TOL * b.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpStep {
    pub t_start: f64,
    pub t_end: f64,
    pub min_eigenvalue: f64,
    pub completely_positive: bool,
}

/// CP test of the propagators `K(t_{k+1}, t_k) = Phi(t_{k+1}) Phi(t_k)^{-1}` along a grid.
pub fn cp_divisibility_check(
    m: &MixtureMap,
    times: &[f64],
    tol: f64,
) -> Result<Vec<CpStep>, InvertError> {
    if times.len() < 2 {
        return Err(InvertError::InvalidArgument(
            "need at least two times".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(InvertError::InvalidArgument(
            "times must be nondecreasing".into(),
        ));
    }
    for &t in times {
        for i in 0..m.count() {
            if m.eigenvalue(i, t)?.abs() <= DEFAULT_LAMBDA_TOL {
                return Err(InvertError::SingularAtGridPoint { t });
            }
        }
    }
    let mut steps = Vec::with_capacity(times.len() - 1);
    let mut prev = m.superoperator(times[0])?;
    for w in times.windows(2) {
        let next = m.superoperator(w[1])?;
        let inv = prev
            .try_inverse()
            .ok_or(InvertError::SingularAtGridPoint { t: w[0] })?;
        let verdict = next.compose(&inv).to_choi().is_cp(tol)?;
        steps.push(CpStep {
            t_start: w[0],
            t_end: w[1],
            min_eigenvalue: verdict.min_eigenvalue,
            completely_positive: verdict.completely_positive,
        });
        prev = next;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::{build_mub, build_unitaries, WeylUnitaries};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unitaries(d: usize) -> Arc<WeylUnitaries> {
        Arc::new(build_unitaries(&build_mub(d).unwrap()))
    }

    // scalar oracle: dense scan plus bisection on an explicit closure
    fn oracle_root(f: impl Fn(f64) -> f64, t_max: f64) -> Option<f64> {
        let n = 100_000;
        let mut prev = f(0.0);
        for j in 1..=n {
            let t = t_max * j as f64 / n as f64;
            let v = f(t);
            if v == 0.0 {
                return Some(t);
            }
            if v.signum() != prev.signum() {
                let (mut a, mut b) = (t_max * (j - 1) as f64 / n as f64, t);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if f(m).signum() == f(a).signum() {
                        a = m
                    } else {
                        b = m
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = v;
        }
        None
    }

    #[test]
    fn exponential_singular_times() {
        let t = singular_time_exponential(2, 1.0, 1.0, 0.0)
            .unwrap()
            .unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-15);
        // qubit form ln[2(1-x)/(2(1-x)-n)]/c
        for (x, n, c) in [(0.1f64, 1.2f64, 0.5f64), (0.25, 1.4, 2.0), (0.05, 1.0, 1.0)] {
            let q = ((2.0 * (1.0 - x)) / (2.0 * (1.0 - x) - n)).ln() / c;
            let g = singular_time_exponential(2, n, c, x).unwrap().unwrap();
            assert!((q - g).abs() <= 1e-12 * q);
        }
        for d in [2usize, 3, 5, 7] {
            let n = 1.01;
            let g = threshold(d, n);
            assert_eq!(singular_time_exponential(d, n, 1.0, g).unwrap(), None);
            assert_eq!(
                singular_time_exponential(d, n, 1.0, (g + 0.01).min(0.99)).unwrap(),
                None
            );
            let below = singular_time_exponential(d, n, 1.0, g - 0.01).unwrap();
            assert!(below.is_some());
        }
        assert!(singular_time_exponential(2, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn cosine_singular_times() {
        let t0 = singular_time_cosine(1.0, 0.0).unwrap().unwrap();
        assert!((t0 - PI / 2.0).abs() < 1e-15);
        let oracle = oracle_root(|t| t.cos(), 4.0).unwrap();
        assert!((t0 - oracle).abs() < 1e-12);
        let t = singular_time_cosine(2.0, 1.0 / 3.0).unwrap().unwrap();
        assert!((t - PI / 3.0).abs() < 1e-14);
        assert_eq!(singular_time_cosine(1.0, 0.6).unwrap(), None);
    }

    #[test]
    fn plateau_singular_times() {
        for x in [0.01, 0.1, 0.5, 0.9] {
            assert_eq!(
                singular_time_plateau(2, Ramp::Linear, 1.0, x).unwrap(),
                None
            );
        }
        assert_eq!(
            singular_time_plateau(2, Ramp::Linear, 1.5, 0.0).unwrap(),
            Some(1.5)
        );
        assert!(matches!(
            singular_time_plateau(3, Ramp::Linear, 1.0, 0.1),
            Err(InvertError::NotQubit(3))
        ));
        // target value for x = 0.1
        assert!((0.5f64 / 0.9 - 0.5556).abs() < 1e-4);
    }

    #[test]
    fn regimes() {
        let r = classify_regime(2, 1.5).unwrap();
        assert_eq!(r.kind, RegimeKind::IntermediateNoninvertible);
        assert!((r.lower - 4.0 / 3.0).abs() < 1e-15 && r.upper == 2.0);
        assert_eq!(
            classify_regime(2, 4.0 / 3.0).unwrap().kind,
            RegimeKind::IntermediateNoninvertible
        );
        assert_eq!(
            classify_regime(2, 2.0).unwrap().kind,
            RegimeKind::InvertibleInputs
        );
        assert_eq!(
            classify_regime(2, 1.2).unwrap().kind,
            RegimeKind::AlwaysNoninvertibleOutput
        );
        assert_eq!(
            classify_regime(7, 1.03).unwrap().kind,
            RegimeKind::IntermediateNoninvertible
        );
        assert_eq!(
            classify_regime(3, 2.0).unwrap().kind,
            RegimeKind::InvertibleInputs
        );
        assert!(classify_regime(6, 1.1).is_err());
        for d in [2, 3, 4, 5, 7, 8, 9, 32] {
            let (lo, hi) = regime_bounds(d);
            assert!(lo < hi);
        }
    }

    #[test]
    fn output_invertibility() {
        let n = 1.5;
        assert!(output_invertible(2, n, &[0.3, 0.3, 0.4]));
        assert!(output_invertible(2, n, &[0.25, 0.25, 0.5]));
        assert!(!output_invertible(2, n, &[0.5, 0.3, 0.2]));
        for d in [2usize, 3, 5] {
            let (_, hi) = regime_bounds(d);
            let mut w = vec![1e-6; d + 1];
            w[0] = 1.0 - 1e-6 * d as f64;
            assert!(output_invertible(d, hi, &w));
            assert!(output_invertible(d, hi + 0.5, &w));
        }
    }

    #[test]
    fn scan_matches_analytic_and_oracle() {
        let u = unitaries(3);
        let pf = DecoherenceFunction::exponential(1.05, 0.7).unwrap();
        let m = MixtureMap::new(u, vec![0.05, 0.15, 0.35, 0.45], pf).unwrap();
        let num = numeric_singularity_scan(&m, ScanOptions::default_for(&pf)).unwrap();
        let ana = analytic_report(&m).unwrap();
        for (a, b) in num.singular_times.iter().zip(&ana.singular_times) {
            match (a.t_star, b.t_star) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-9 * y, "{x} vs {y}"),
                (None, None) => {}
                other => panic!("verdict mismatch {other:?}"),
            }
        }
        assert!(!num.is_invertible());

        // cosine family against the scalar oracle
        let u2 = unitaries(2);
        let pf = DecoherenceFunction::cosine(1.3).unwrap();
        let w = vec![0.2, 0.35, 0.45];
        let m = MixtureMap::new(u2, w.clone(), pf).unwrap();
        let rep = numeric_singularity_scan(&m, ScanOptions::default_for(&pf)).unwrap();
        for (i, &x) in w.iter().enumerate() {
            let oracle = oracle_root(|t| x + (1.0 - x) * (1.3 * t).cos(), 2.0 * PI / 1.3).unwrap();
            let got = rep.singular_times[i].t_star.unwrap();
            assert!((got - oracle).abs() <= 1e-9 * oracle);
        }
    }

    #[test]
    fn scan_detects_tangential_zero() {
        // x = 1/2 in the cosine family: lambda = (1 + cos wt)/2 touches 0 at pi/w
        let u = unitaries(2);
        let pf = DecoherenceFunction::cosine(1.0).unwrap();
        let m = MixtureMap::new(u, vec![0.5, 0.25, 0.25], pf).unwrap();
        let opts = ScanOptions {
            t_max: 2.0 * PI,
            grid_points: 1000,
            tol: 1e-12,
        };
        let rep = numeric_singularity_scan(&m, opts).unwrap();
        let t = rep.singular_times[0].t_star.expect("touching zero found");
        assert!((t - PI).abs() < 1e-5);
    }

    #[test]
    fn scan_invertible_and_semigroup() {
        let u = unitaries(2);
        let pf = DecoherenceFunction::exponential(1.5, 1.0).unwrap();
        let m = MixtureMap::new(u.clone(), vec![0.3, 0.3, 0.4], pf).unwrap();
        for grid in [2, 10, 1000] {
            let opts = ScanOptions {
                t_max: 50.0,
                grid_points: grid,
                tol: 1e-12,
            };
            let rep = numeric_singularity_scan(&m, opts).unwrap();
            assert_eq!(rep.classification, Classification::Invertible);
        }
        let pf = DecoherenceFunction::exponential(4.0 / 3.0, 1.0).unwrap();
        let m = MixtureMap::new(u, vec![1.0 / 3.0; 3], pf).unwrap();
        let rep = numeric_singularity_scan(&m, ScanOptions::default_for(&pf)).unwrap();
        assert_eq!(rep.classification, Classification::SemigroupEqualMixPoint);
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["classification"]["kind"], "semigroup_equal_mix_point");
        assert_eq!(json["method"], "numeric");
        assert!(json["singular_times"][0]["t_star"].is_null());
    }

    #[test]
    fn coarse_grid_advisory() {
        let u = unitaries(2);
        let pf = DecoherenceFunction::cosine(1.0).unwrap();
        let m = MixtureMap::new(u, vec![0.1, 0.1, 0.8], pf).unwrap();
        let rep = numeric_singularity_scan(
            &m,
            ScanOptions {
                t_max: 2.0 * PI,
                grid_points: 5,
                tol: 1e-12,
            },
        )
        .unwrap();
        assert!(rep.coarse_grid.contains(&1));
    }

    #[test]
    fn cp_divisibility() {
        let u = unitaries(2);
        let times: Vec<f64> = (0..=20).map(|j| j as f64 * 0.25).collect();
        let pf = DecoherenceFunction::exponential(4.0 / 3.0, 1.0).unwrap();
        let m = MixtureMap::new(u.clone(), vec![1.0 / 3.0; 3], pf).unwrap();
        let steps = cp_divisibility_check(&m, &times, 1e-10).unwrap();
        assert!(steps.iter().all(|s| s.completely_positive));

        let pf = DecoherenceFunction::exponential(2.0, 1.0).unwrap();
        let m = MixtureMap::vertex(u.clone(), 0, pf).unwrap();
        assert!(cp_divisibility_check(&m, &times, 1e-10)
            .unwrap()
            .iter()
            .all(|s| s.completely_positive));

        let same = cp_divisibility_check(&m, &[1.0, 1.0], 1e-10).unwrap();
        assert!(same[0].completely_positive);
        assert!(same[0].min_eigenvalue.abs() < 1e-12);

        // cosine inputs have negative rates past the quarter period
        let pf = DecoherenceFunction::cosine(1.0).unwrap();
        let m = MixtureMap::new(u.clone(), vec![0.6, 0.2, 0.2], pf).unwrap();
        let ts: Vec<f64> = (0..=10).map(|j| 2.0 + j as f64 * 0.05).collect();
        let steps = cp_divisibility_check(&m, &ts, 1e-10).unwrap();
        assert!(steps.iter().any(|s| !s.completely_positive));

        let pf = DecoherenceFunction::exponential(1.0, 1.0).unwrap();
        let m = MixtureMap::vertex(u, 0, pf).unwrap();
        assert!(matches!(
            cp_divisibility_check(&m, &[0.0, 2f64.ln()], 1e-10),
            Err(InvertError::SingularAtGridPoint { .. })
        ));
    }
}
