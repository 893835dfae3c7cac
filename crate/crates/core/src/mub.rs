//! Complete sets of mutually unbiased bases in prime-power dimension and the
//! unitaries `U_a = sum_j w^j |xi_j^a><xi_j^a|` built from them.
//!
//! Basis 0 is always the computational basis. The remaining `d` bases are
//! indexed by field elements `a` of GF(d) (in [`GaloisField::element`] order)
//! and their vectors by `b`:
//!
//! * odd `p`: amplitudes `exp(2 pi i tr(a s^2 + b s) / p) / sqrt(d)`;
//! * `p = 2`: amplitudes `i^{Q_a(s)} (-1)^{tr(b s)} / sqrt(d)` where `Q_a` is
//!   the integer lift (mod 4) of the trace form `tr(a s s')` written in the
//!   polynomial basis.
//!
//! Correctness is not assumed: [`verify_mub`] checks every overlap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_field::{factor_prime_power, FieldError, GaloisField, PrimePowerDim};
use crate::linalg::{c, identity, max_abs, CMatrix, C64};

pub const DEFAULT_MUB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MubError {
    #[error("unsupported dimension {d}: {source}")]
    UnsupportedDimension {
        d: usize,
        #[source]
        source: FieldError,
    },
    #[error("malformed basis set: {0}")]
    Malformed(String),
}

/// `d + 1` ordered bases; column `j` of `bases[a]` is `|xi_j^a>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MubSet {
    d: usize,
    bases: Vec<CMatrix>,
}

impl MubSet {
    /// Wraps arbitrary bases without checking them; see [`verify_mub`].
    pub fn from_bases(d: usize, bases: Vec<CMatrix>) -> Result<Self, MubError> {
        if d == 0 {
            return Err(MubError::Malformed("dimension 0".into()));
        }
        if let Some(b) = bases.iter().find(|b| b.shape() != (d, d)) {
            return Err(MubError::Malformed(format!(
                "basis of shape {:?}, expected ({d}, {d})",
                b.shape()
            )));
        }
        Ok(MubSet { d, bases })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn basis(&self, alpha: usize) -> &CMatrix {
        &self.bases[alpha]
    }

    /// The JSON export `{d, bases}`; each basis is `d*d` `[re, im]` pairs
    /// listed vector by vector.
    pub fn to_json(&self) -> MubSetJson {
        MubSetJson {
            d: self.d,
            bases: self
                .bases
                .iter()
                .map(|b| b.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &MubSetJson) -> Result<Self, MubError> {
        let d = json.d;
        if d == 0 || d > 4096 {
            return Err(MubError::Malformed(format!("dimension {d} out of range")));
        }
        let mut bases = Vec::with_capacity(json.bases.len());
        for (a, flat) in json.bases.iter().enumerate() {
            if flat.len() != d * d {
                return Err(MubError::Malformed(format!(
                    "basis {a} has {} amplitudes, expected {}",
                    flat.len(),
                    d * d
                )));
            }
            if flat.iter().flatten().any(|v| !v.is_finite()) {
                return Err(MubError::Malformed(format!(
                    "basis {a} has non-finite entries"
                )));
            }
            bases.push(CMatrix::from_iterator(
                d,
                d,
                flat.iter().map(|&[re, im]| c(re, im)),
            ));
        }
        MubSet::from_bases(d, bases)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MubSetJson {
    pub d: usize,
    pub bases: Vec<Vec<[f64; 2]>>,
}

/// Builds the complete set of `d + 1` MUBs for a prime power `d`.
pub fn build_mub(d: usize) -> Result<MubSet, MubError> {
    let dim =
        factor_prime_power(d).map_err(|source| MubError::UnsupportedDimension { d, source })?;
    Ok(build_mub_for(dim))
}

pub fn build_mub_for(dim: PrimePowerDim) -> MubSet {
    let field = GaloisField::new(dim);
    let d = dim.q();
    let mut bases = Vec::with_capacity(d + 1);
    bases.push(identity(d));
    let amp = 1.0 / (d as f64).sqrt();
    let tr = field.trace_table();
    let elems: Vec<_> = field.elements().collect();
    let idx_mul = |a: usize, b: usize| field.index_of(&field.mul(&elems[a], &elems[b]).unwrap());
    let idx_add = |a: usize, b: usize| field.index_of(&field.add(&elems[a], &elems[b]).unwrap());

    if dim.p() == 2 {
        let k = dim.k() as usize;
        // basis monomials x^i have index 2^i
        let mono: Vec<usize> = (0..k).map(|i| 1usize << i).collect();
        for a in 0..d {
            let form: Vec<Vec<u32>> = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| tr[idx_mul(a, idx_mul(mono[i], mono[j]))])
                        .collect()
                })
                .collect();
            let quad = |s: usize| -> u32 {
                let bits: Vec<u32> = (0..k).map(|i| ((s >> i) & 1) as u32).collect();
                let mut acc = 0u32;
                for i in 0..k {
                    acc += form[i][i] * bits[i];
                    for j in (i + 1)..k {
                        acc += 2 * form[i][j] * bits[i] * bits[j];
                    }
                }
                acc % 4
            };
            let basis = CMatrix::from_fn(d, d, |s, b| {
                let phase = quad(s) + 2 * tr[idx_mul(b, s)];
                let unit = match phase % 4 {
                    0 => c(1.0, 0.0),
                    1 => c(0.0, 1.0),
                    2 => c(-1.0, 0.0),
                    _ => c(0.0, -1.0),
                };
                unit * amp
            });
            bases.push(fix_phases(basis));
        }
    } else {
        let p = dim.p();
        for a in 0..d {
            let basis = CMatrix::from_fn(d, d, |s, b| {
                let s2 = idx_mul(s, s);
                let arg = idx_add(idx_mul(a, s2), idx_mul(b, s));
                let theta = 2.0 * PI * tr[arg] as f64 / p as f64;
                C64::from_polar(amp, theta)
            });
            bases.push(fix_phases(basis));
        }
    }
    MubSet { d, bases }
}

/// Rotates each column so its first non-negligible amplitude is real positive.
fn fix_phases(mut basis: CMatrix) -> CMatrix {
    for mut col in basis.column_iter_mut() {
        if let Some(first) = col.iter().find(|z| z.norm() > 1e-12).copied() {
            let rot = first.conj() / first.norm();
            col.iter_mut().for_each(|z| *z *= rot);
        }
    }
    basis
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MubReport {
    pub d: usize,
    pub bases: usize,
    /// max entry of |G - I| over every basis Gram matrix
    pub orthonormality_deviation: f64,
    /// max | |<xi|eta>|^2 - 1/d | over cross-basis pairs
    pub unbiasedness_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn verify_mub(m: &MubSet, tol: f64) -> MubReport {
    let d = m.d;
    let eye = identity(d);
    let orth = m
        .bases
        .iter()
        .map(|b| max_abs(&(b.adjoint() * b - &eye)))
        .fold(0.0, f64::max);
    let mut unb = 0.0f64;
    for (i, bi) in m.bases.iter().enumerate() {
        let bi_adj = bi.adjoint();
        for bj in &m.bases[i + 1..] {
            let overlaps = &bi_adj * bj;
            for z in overlaps.iter() {
                unb = unb.max((z.norm_sqr() - 1.0 / d as f64).abs());
            }
        }
    }
    MubReport {
        d,
        bases: m.bases.len(),
        orthonormality_deviation: orth,
        unbiasedness_deviation: unb,
        tol,
        passed: orth <= tol && unb <= tol,
    }
}

/// The unitaries `U_a` together with their eigenbases and all powers `U_a^k`, `k < d`.
#[derive(Debug, Clone)]
pub struct WeylUnitaries {
    d: usize,
    omega: C64,
    eigvecs: Vec<CMatrix>,
    powers: Vec<Vec<CMatrix>>,
}

impl WeylUnitaries {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// `e^{2 pi i / d}`
    pub fn omega(&self) -> C64 {
        self.omega
    }

    pub fn count(&self) -> usize {
        self.eigvecs.len()
    }

    pub fn unitary(&self, alpha: usize) -> &CMatrix {
        &self.powers[alpha][1 % self.d]
    }

    /// `U_alpha^k` for any integer `k` (reduced mod `d`).
    pub fn power(&self, alpha: usize, k: i64) -> &CMatrix {
        let d = self.d as i64;
        &self.powers[alpha][k.rem_euclid(d) as usize]
    }

    pub fn eigenbasis(&self, alpha: usize) -> &CMatrix {
        &self.eigvecs[alpha]
    }
}

pub fn build_unitaries(m: &MubSet) -> WeylUnitaries {
    let d = m.d;
    let omega = C64::from_polar(1.0, 2.0 * PI / d as f64);
    let powers = m
        .bases
        .iter()
        .map(|v| {
            let v_adj = v.adjoint();
            (0..d)
                .map(|k| {
                    let mut scaled = v.clone();
                    for (j, mut col) in scaled.column_iter_mut().enumerate() {
                        let phase =
                            C64::from_polar(1.0, 2.0 * PI * ((j * k) % d) as f64 / d as f64);
                        col *= phase;
                    }
                    scaled * &v_adj
                })
                .collect()
        })
        .collect();
    WeylUnitaries {
        d,
        omega,
        eigvecs: m.bases.clone(),
        powers,
    }
}
