//! Arithmetic in GF(p^k) with a polynomial basis.
//!
//! Elements are stored as coefficient vectors `c_0 + c_1 x + ... + c_{k-1} x^{k-1}`
//! reduced modulo a fixed monic irreducible polynomial. The field is picked
//! deterministically (lexicographically smallest irreducible), so every
//! construction downstream of it is reproducible.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not a prime power")]
    NotPrimePower(usize),
    #[error("dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("element does not belong to GF({p}^{k})")]
    FieldMismatch { p: u32, k: u32 },
}

/// A dimension `q = p^k` with `p` prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimePowerDim {
    p: u32,
    k: u32,
    q: usize,
}

impl PrimePowerDim {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The field order, which is also the Hilbert-space dimension.
    pub fn q(&self) -> usize {
        self.q
    }
}

impl fmt::Display for PrimePowerDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{} = {}", self.p, self.k, self.q)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2u64;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// Splits `d` into `p^k`, failing unless `d` is a prime power.
pub fn factor_prime_power(d: usize) -> Result<PrimePowerDim, FieldError> {
    if d < 2 {
        return Err(FieldError::TooSmall(d));
    }
    let mut p = 2usize;
    while p * p <= d && !d.is_multiple_of(p) {
        p += 1;
    }
    if !d.is_multiple_of(p) {
        // no factor up to sqrt(d): d itself is prime
        p = d;
    }
    let mut rest = d;
    let mut k = 0u32;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    if rest != 1 {
        return Err(FieldError::NotPrimePower(d));
    }
    Ok(PrimePowerDim {
        p: p as u32,
        k,
        q: d,
    })
}

/// Monic polynomial over GF(p), coefficients stored lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrreduciblePoly {
    p: u32,
    coeffs: Vec<u32>,
}

impl IrreduciblePoly {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients `[c_0, ..., c_k]` with `c_k = 1`.
    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }
}

impl fmt::Display for IrreduciblePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mono = match i {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            };
            terms.push(match (c, i) {
                (_, 0) => c.to_string(),
                (1, _) => mono,
                _ => format!("{c}{mono}"),
            });
        }
        write!(f, "{}", terms.join(" + "))
    }
}

fn trim(mut v: Vec<u32>) -> Vec<u32> {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
    v
}

fn inv_mod(a: u32, p: u32) -> u32 {
    // p is prime, so a^(p-2) is the inverse
    let (mut base, mut exp, mut acc) = (a as u64 % p as u64, p as u64 - 2, 1u64);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        exp >>= 1;
    }
    acc as u32
}

/// Remainder of `a` modulo `m` over GF(p).
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = trim(a.to_vec());
    let m = trim(m.to_vec());
    let dm = m.len() - 1;
    let lead_inv = inv_mod(*m.last().unwrap(), p) as u64;
    while r.len() > dm && !(r.len() == 1 && r[0] == 0) {
        let shift = r.len() - 1 - dm;
        let factor = (*r.last().unwrap() as u64 * lead_inv) % p as u64;
        for (i, &mc) in m.iter().enumerate() {
            let sub = (factor * mc as u64) % p as u64;
            let cur = r[shift + i] as u64;
            r[shift + i] = ((cur + p as u64 - sub) % p as u64) as u32;
        }
        r = trim(r);
        if dm == 0 {
            return vec![0];
        }
    }
    r
}

fn digits(mut idx: usize, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((idx % p as usize) as u32);
        idx /= p as usize;
    }
    out
}

/// Trial division by every monic polynomial of degree `1..=deg/2`.
pub fn is_irreducible(p: u32, coeffs: &[u32]) -> bool {
    let f = trim(coeffs.to_vec());
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    for m in 1..=deg / 2 {
        let count = (p as usize).pow(m as u32);
        for idx in 0..count {
            let mut divisor = digits(idx, p, m);
            divisor.push(1);
            let r = poly_rem(&f, &divisor, p);
            if r.iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// Smallest monic irreducible polynomial of degree `k` over GF(p).
///
/// Candidates `x^k + c_{k-1} x^{k-1} + ... + c_0` are ordered by the integer
/// `sum_i c_i p^i`, i.e. lexicographically with `c_{k-1}` most significant.
pub fn find_irreducible(p: u32, k: u32) -> Result<IrreduciblePoly, FieldError> {
    if !is_prime(p as u64) {
        return Err(FieldError::NotPrime(p));
    }
    let k = k.max(1) as usize;
    let count = (p as usize).pow(k as u32);
    for idx in 0..count {
        let mut coeffs = digits(idx, p, k);
        coeffs.push(1);
        if is_irreducible(p, &coeffs) {
            return Ok(IrreduciblePoly { p, coeffs });
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// An element of GF(p^k) in polynomial coordinates over GF(p).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GfElement {
    coeffs: Vec<u32>,
}

impl GfElement {
    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }
}

/// The field GF(p^k) realized modulo [`find_irreducible`]`(p, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisField {
    dim: PrimePowerDim,
    modulus: IrreduciblePoly,
}

impl GaloisField {
    pub fn new(dim: PrimePowerDim) -> Self {
        let modulus = find_irreducible(dim.p, dim.k).expect("PrimePowerDim carries a prime");
        GaloisField { dim, modulus }
    }

    pub fn of_order(q: usize) -> Result<Self, FieldError> {
        Ok(Self::new(factor_prime_power(q)?))
    }

    pub fn dim(&self) -> PrimePowerDim {
        self.dim
    }

    pub fn modulus(&self) -> &IrreduciblePoly {
        &self.modulus
    }

    pub fn order(&self) -> usize {
        self.dim.q
    }

    fn k(&self) -> usize {
        self.dim.k as usize
    }

    fn check(&self, a: &GfElement) -> Result<(), FieldError> {
        if a.coeffs.len() != self.k() || a.coeffs.iter().any(|&c| c >= self.dim.p) {
            return Err(FieldError::FieldMismatch {
                p: self.dim.p,
                k: self.dim.k,
            });
        }
        Ok(())
    }

    /// Builds an element from raw coordinates, validating them.
    pub fn element_from_coeffs(&self, coeffs: Vec<u32>) -> Result<GfElement, FieldError> {
        let e = GfElement { coeffs };
        self.check(&e)?;
        Ok(e)
    }

    /// The element whose coordinates are the base-`p` digits of `index`
    /// (`c_0` least significant). Indices run over `0..q`.
    pub fn element(&self, index: usize) -> GfElement {
        debug_assert!(index < self.order());
        GfElement {
            coeffs: digits(index, self.dim.p, self.k()),
        }
    }

    pub fn index_of(&self, a: &GfElement) -> usize {
        a.coeffs
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.dim.p as usize + c as usize)
    }

    pub fn elements(&self) -> impl Iterator<Item = GfElement> + '_ {
        (0..self.order()).map(|i| self.element(i))
    }

    pub fn zero(&self) -> GfElement {
        self.element(0)
    }

    pub fn one(&self) -> GfElement {
        self.element(1)
    }

    pub fn add(&self, a: &GfElement, b: &GfElement) -> Result<GfElement, FieldError> {
        self.check(a)?;
        self.check(b)?;
        let p = self.dim.p;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| (x + y) % p)
            .collect();
        Ok(GfElement { coeffs })
    }

    pub fn neg(&self, a: &GfElement) -> Result<GfElement, FieldError> {
        self.check(a)?;
        let p = self.dim.p;
        let coeffs = a.coeffs.iter().map(|&x| (p - x) % p).collect();
        Ok(GfElement { coeffs })
    }

    pub fn mul(&self, a: &GfElement, b: &GfElement) -> Result<GfElement, FieldError> {
        self.check(a)?;
        self.check(b)?;
        let p = self.dim.p as u64;
        let k = self.k();
        let mut prod = vec![0u32; 2 * k - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            for (j, &y) in b.coeffs.iter().enumerate() {
                prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p) as u32;
            }
        }
        let mut r = poly_rem(&prod, &self.modulus.coeffs, self.dim.p);
        r.resize(k, 0);
        Ok(GfElement { coeffs: r })
    }

    pub fn pow(&self, a: &GfElement, mut exp: u64) -> Result<GfElement, FieldError> {
        self.check(a)?;
        let mut base = a.clone();
        let mut acc = self.one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            base = self.mul(&base, &base)?;
            exp >>= 1;
        }
        Ok(acc)
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self, a: &GfElement) -> Result<Option<GfElement>, FieldError> {
        self.check(a)?;
        if a.coeffs.iter().all(|&c| c == 0) {
            return Ok(None);
        }
        self.pow(a, self.order() as u64 - 2).map(Some)
    }

    /// Absolute trace `a + a^p + ... + a^{p^{k-1}}`, an element of GF(p).
    pub fn trace(&self, a: &GfElement) -> Result<u32, FieldError> {
        self.check(a)?;
        let mut acc = a.clone();
        let mut frob = a.clone();
        for _ in 1..self.k() {
            frob = self.pow(&frob, self.dim.p as u64)?;
            acc = self.add(&acc, &frob)?;
        }
        debug_assert!(acc.coeffs[1..].iter().all(|&c| c == 0));
        Ok(acc.coeffs[0])
    }

    /// Trace of every element, indexed like [`GaloisField::element`].
    pub fn trace_table(&self) -> Vec<u32> {
        self.elements()
            .map(|a| self.trace(&a).expect("own element"))
            .collect()
    }

    /// Full multiplication table over element indices.
    pub fn mul_table(&self) -> Vec<Vec<usize>> {
        let elems: Vec<_> = self.elements().collect();
        elems
            .iter()
            .map(|a| {
                elems
                    .iter()
                    .map(|b| self.index_of(&self.mul(a, b).expect("own element")))
                    .collect()
            })
            .collect()
    }
}
