//! The fraction of the mixing simplex that yields invertible output maps in
//! the exponential family, by closed form, iterated quadrature and Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_field::{factor_prime_power, FieldError};
use crate::invertibility::{regime_bounds, threshold};

/// Monte Carlo draws per RNG stream.
pub const MC_CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("n = {n} is outside the intermediate interval for d in {dims:?}")]
    RegimeMismatch { n: f64, dims: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub d: usize,
    pub n: f64,
    pub delta: f64,
    pub method: MeasureMethod,
    pub samples: Option<u64>,
    pub stderr: Option<f64>,
    pub seed: Option<u64>,
}

impl MeasureResult {
    fn exact(d: usize, n: f64, delta: f64, method: MeasureMethod) -> Self {
        MeasureResult {
            d,
            n,
            delta,
            method,
            samples: None,
            stderr: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub d: usize,
    pub n: f64,
    pub g: f64,
}

fn check_inputs(d: usize, n: f64) -> Result<(), MeasureError> {
    factor_prime_power(d)?;
    if !(n.is_finite() && n >= 1.0) {
        return Err(MeasureError::InvalidArgument(format!(
            "n must be >= 1, got {n}"
        )));
    }
    Ok(())
}

pub fn g_threshold(d: usize, n: f64) -> Threshold {
    Threshold {
        d,
        n,
        g: threshold(d, n),
    }
}

/// `[(d^2(n-1) - n)/d]^d` inside the intermediate interval, 1 above it and 0 below.
pub fn delta_closed_form(d: usize, n: f64) -> Result<MeasureResult, MeasureError> {
    check_inputs(d, n)?;
    let (lower, upper) = regime_bounds(d);
    let df = d as f64;
    let delta = if n >= upper {
        1.0
    } else if n <= lower {
        0.0
    } else {
        ((df * df * (n - 1.0) - n) / df).powi(d as i32)
    };
    Ok(MeasureResult::exact(d, n, delta, MeasureMethod::ClosedForm))
}

/// Fraction of uniform simplex draws accepted by `accept`.
///
/// Draws are normalized i.i.d. standard exponentials. Each chunk of
/// [`MC_CHUNK`] draws uses its own ChaCha stream keyed by `(seed, chunk)`, so
/// the result does not depend on how chunks are spread over threads.
pub fn monte_carlo_fraction<F>(coords: usize, samples: u64, seed: u64, accept: F) -> (u64, u64)
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut x = vec![0.0; coords];
            let mut hits = 0u64;
            for _ in 0..count {
                let mut total = 0.0;
                for xi in x.iter_mut() {
                    let e: f64 = Exp1.sample(&mut rng);
                    *xi = e;
                    total += e;
                }
                x.iter_mut().for_each(|xi| *xi /= total);
                if accept(&x) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    (hits, samples)
}

/// Monte Carlo estimate of the invertible fraction with a binomial standard error.
///
/// The error uses `(hits + 1) / (samples + 2)` in place of the hit rate.
pub fn delta_monte_carlo(
    d: usize,
    n: f64,
    samples: u64,
    seed: u64,
) -> Result<MeasureResult, MeasureError> {
    let g = threshold(d, n);
    delta_monte_carlo_by(d, n, samples, seed, |x| x.iter().all(|&xi| xi >= g))
}

/// [`delta_monte_carlo`] with a caller-supplied invertibility predicate on the weights.
pub fn delta_monte_carlo_by<F>(
    d: usize,
    n: f64,
    samples: u64,
    seed: u64,
    accept: F,
) -> Result<MeasureResult, MeasureError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    check_inputs(d, n)?;
    if samples == 0 {
        return Err(MeasureError::InvalidArgument("samples must be >= 1".into()));
    }
    let (hits, total) = monte_carlo_fraction(d + 1, samples, seed, accept);
    let p = hits as f64 / total as f64;
    // variance from the add-one estimate so 0 or N hits still carry an error bar
    let p_var = (hits as f64 + 1.0) / (total as f64 + 2.0);
    Ok(MeasureResult {
        d,
        n,
        delta: p,
        method: MeasureMethod::MonteCarlo,
        samples: Some(total),
        stderr: Some((p_var * (1.0 - p_var) / total as f64).sqrt()),
        seed: Some(seed),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// A polynomial on `[a, b]` stored by its values at Chebyshev points of the
/// second kind, evaluated with the barycentric formula.
struct ChebPoly {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ChebPoly {
    fn sample(a: f64, b: f64, degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let nodes: Vec<f64> = if degree == 0 {
            vec![0.5 * (a + b)]
        } else {
            (0..=degree)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / degree as f64).cos();
                    0.5 * (a + b) + 0.5 * (b - a) * s
                })
                .collect()
        };
        let values = nodes.iter().map(|&x| f(x)).collect();
        ChebPoly {
            a,
            b,
            nodes,
            values,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let m = self.nodes.len();
        if m == 1 || self.b <= self.a {
            return self.values[0];
        }
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..m {
            let diff = x - self.nodes[k];
            if diff == 0.0 {
                return self.values[k];
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == m - 1 {
                w *= 0.5;
            }
            let term = w / diff;
            num += term * self.values[k];
            den += term;
        }
        num / den
    }
}

/// `int dx_1 ... dx_d` over `x_{j+1} in [g, f(j) - X_j]`, `f(j) = 1 - (d-j) g`,
/// `X_j = x_1 + ... + x_j` (unnormalized).
///
/// After the inner `d - j` integrations the integrand depends on the earlier
/// coordinates only through `X_j`, and is a polynomial of degree `d - j` in
/// it. Each level is therefore carried as a Chebyshev interpolant in `X_j`
/// and integrated with a Gauss-Legendre rule exact for that degree.
pub fn iterated_simplex_integral(d: usize, g: f64) -> f64 {
    let df = d as f64;
    let width = 1.0 - (df + 1.0) * g;
    if width <= 0.0 {
        return 0.0;
    }
    let (gl_x, gl_w) = gauss_legendre(d / 2 + 2);
    // level d: integrand 1 on X_d in [d g, 1 - g]
    let mut inner = ChebPoly::sample(df * g, 1.0 - g, 0, |_| 1.0);
    for j in (0..d).rev() {
        let upper = 1.0 - (d - j) as f64 * g;
        let level = |x: f64| -> f64 {
            let (lo, hi) = (x + g, upper);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            gl_x.iter()
                .zip(&gl_w)
                .map(|(&s, &w)| w * inner.eval(mid + half * s))
                .sum::<f64>()
                * half
        };
        if j == 0 {
            return level(0.0);
        }
        let next = ChebPoly::sample(j as f64 * g, 1.0 - (d - j + 1) as f64 * g, d - j, level);
        inner = next;
    }
    unreachable!("loop returns at j = 0")
}

/// `d!` as a float.
pub fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// Simplex volume by the same recursion with `g = 0`; equals `1/d!`.
pub fn normalization_check(d: usize) -> f64 {
    iterated_simplex_integral(d, 0.0)
}

/// Iterated-integral evaluation of the invertible fraction, normalized by `1/d!`.
pub fn delta_quadrature(d: usize, n: f64) -> Result<MeasureResult, MeasureError> {
    check_inputs(d, n)?;
    let (lower, upper) = regime_bounds(d);
    if n < lower || n > upper {
        return Err(MeasureError::RegimeMismatch { n, dims: vec![d] });
    }
    let g = threshold(d, n).max(0.0);
    let delta = iterated_simplex_integral(d, g) * factorial(d);
    Ok(MeasureResult::exact(
        d,
        n,
        delta.clamp(0.0, 1.0),
        MeasureMethod::Quadrature,
    ))
}

/// Every prime power in `[lo, hi]`, ascending.
pub fn prime_powers_in(lo: usize, hi: usize) -> Vec<usize> {
    (lo.max(2)..=hi)
        .filter(|&q| factor_prime_power(q).is_ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub delta: f64,
    /// `None` when `delta` is zero.
    pub log10_delta: Option<f64>,
}

/// Invertible fraction for each `d`, after checking that `n` lies in every
/// closed interval `[d^2/(d^2-1), d/(d-1)]`.
pub fn sweep(dims: &[usize], n: f64, method: SweepMethod) -> Result<Vec<SweepRow>, MeasureError> {
    for &d in dims {
        factor_prime_power(d)?;
    }
    let offending: Vec<usize> = dims
        .iter()
        .copied()
        .filter(|&d| {
            let (lo, hi) = regime_bounds(d);
            n < lo || n > hi
        })
        .collect();
    if !offending.is_empty() {
        return Err(MeasureError::RegimeMismatch { n, dims: offending });
    }
    dims.iter()
        .map(|&d| {
            let res = match method {
                SweepMethod::ClosedForm => delta_closed_form(d, n)?,
                SweepMethod::Quadrature => delta_quadrature(d, n)?,
                SweepMethod::MonteCarlo { samples, seed } => {
                    delta_monte_carlo(d, n, samples, seed)?
                }
            };
            Ok(SweepRow {
                d,
                delta: res.delta,
                log10_delta: (res.delta > 0.0).then(|| res.delta.log10()),
            })
        })
        .collect()
}

/// CSV with header `d,delta,log10_delta`; an empty log column means `delta = 0`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("d,delta,log10_delta\n");
    for r in rows {
        let log = r.log10_delta.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.d, fmt_f64(r.delta), log));
    }
    out
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
