//! Arithmetic in GF(q), q = p^e <= 2^16.
//!
//! Elements use a canonical integer encoding: `n` in `[0, q)` stands for the
//! polynomial over GF(p) whose coefficients (low to high) are the base-p
//! digits of `n`. For prime fields this is the usual residue. The same
//! integer order is the single total order used for every tie-break
//! downstream.
//!
//! Extension fields multiply through log/antilog tables over a fixed
//! primitive element; prime fields use plain modular reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported field order.
pub const MAX_ORDER: u64 = 1 << 16;

/// A field element under the canonical integer encoding.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElem(pub u16);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    #[inline]
    pub fn value(self) -> u32 {
        self.0 as u32
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Field description as written into file headers. Two contexts are
/// interchangeable iff these three fields match exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u32,
    pub e: u32,
    pub reduction_poly: Option<Vec<u32>>,
}

/// An immutable GF(p^e) context.
#[derive(Clone, Debug)]
pub struct FieldCtx {
    p: u32,
    e: u32,
    q: u32,
    reduction_poly: Option<Vec<u32>>,
    // Extension fields only: exp[i] = g^i for i in [0, 2(q-1)), log[a] for a != 0.
    exp: Vec<u16>,
    log: Vec<u32>,
    inv: Vec<u16>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e && self.reduction_poly == other.reduction_poly
    }
}

impl Eq for FieldCtx {}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2u32;
    while (i as u64) * (i as u64) <= n as u64 {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

// Dense polynomials over GF(p), coefficients low to high, used only while
// constructing extension fields.
fn poly_trim(mut a: Vec<u32>) -> Vec<u32> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let b = poly_trim(b.to_vec());
    let mut r = poly_trim(a.to_vec());
    let lead_inv = mod_inv(*b.last().expect("nonzero divisor"), p);
    while r.len() >= b.len() {
        let shift = r.len() - b.len();
        let factor = (*r.last().unwrap() as u64 * lead_inv as u64 % p as u64) as u32;
        for (i, &bc) in b.iter().enumerate() {
            let sub = (factor as u64 * bc as u64 % p as u64) as u32;
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        r = poly_trim(r);
    }
    r
}

fn mod_inv(a: u32, p: u32) -> u32 {
    mod_pow(a, p - 2, p)
}

fn mod_pow(a: u32, mut e: u32, p: u32) -> u32 {
    let mut r = 1u64;
    let mut b = a as u64 % p as u64;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

fn digits(mut n: u32, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(n % p);
        n /= p;
    }
    out
}

/// Irreducibility over GF(p) by trial division against every monic
/// polynomial of degree 1..=deg/2.
pub fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let poly = poly_trim(poly.to_vec());
    if poly.len() < 2 {
        return false;
    }
    let deg = poly.len() - 1;
    for dd in 1..=deg / 2 {
        let count = (p as u64).pow(dd as u32);
        for n in 0..count {
            let mut div = digits(n as u32, p, dd);
            div.push(1);
            if poly_rem(&poly, &div, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// The monic irreducible of degree `e` whose lower coefficients, read as
/// base-p digits, form the smallest integer.
pub fn default_reduction_poly(p: u32, e: u32) -> Vec<u32> {
    let count = (p as u64).pow(e);
    for n in 0..count {
        let mut cand = digits(n as u32, p, e as usize);
        cand.push(1);
        if is_irreducible(&cand, p) {
            return cand;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

impl FieldCtx {
    /// Builds GF(p^e). For `e > 1` without an explicit polynomial the
    /// smallest monic irreducible (see [`default_reduction_poly`]) is used.
    pub fn new(p: u32, e: u32, reduction_poly: Option<Vec<u32>>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if e == 0 {
            return Err(Error::Invalid("extension degree must be >= 1".into()));
        }
        let q = (p as u64).checked_pow(e).unwrap_or(u64::MAX);
        if q > MAX_ORDER {
            return Err(Error::TooLarge(q));
        }
        let q = q as u32;
        if e == 1 {
            let mut inv = vec![0u16; q as usize];
            for a in 1..q {
                inv[a as usize] = mod_inv(a, p) as u16;
            }
            return Ok(FieldCtx { p, e, q, reduction_poly: None, exp: vec![], log: vec![], inv });
        }
        let poly = match reduction_poly {
            Some(poly) => {
                let poly = poly_trim(poly);
                if poly.len() != e as usize + 1 || poly.iter().any(|&c| c >= p) || poly[e as usize] != 1 {
                    return Err(Error::Invalid(format!(
                        "reduction polynomial must be monic of degree {e} with coefficients < {p}"
                    )));
                }
                if !is_irreducible(&poly, p) {
                    return Err(Error::Reducible(poly));
                }
                poly
            }
            None => default_reduction_poly(p, e),
        };
        let mut ctx = FieldCtx { p, e, q, reduction_poly: Some(poly), exp: vec![], log: vec![], inv: vec![] };
        ctx.build_tables();
        Ok(ctx)
    }

    /// Prime field GF(p).
    pub fn prime(p: u32) -> Result<Self> {
        Self::new(p, 1, None)
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        Self::new(spec.p, spec.e, spec.reduction_poly.clone())
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec { p: self.p, e: self.e, reduction_poly: self.reduction_poly.clone() }
    }

    // Schoolbook product modulo the reduction polynomial, used only to find a
    // primitive element and fill the tables.
    fn slow_mul(&self, a: u32, b: u32) -> u32 {
        let (p, e) = (self.p, self.e as usize);
        let da = digits(a, p, e);
        let db = digits(b, p, e);
        let mut prod = vec![0u32; 2 * e];
        for i in 0..e {
            for j in 0..e {
                prod[i + j] = (prod[i + j] + da[i] * db[j]) % p;
            }
        }
        let r = poly_rem(&prod, self.reduction_poly.as_ref().unwrap(), p);
        r.iter().rev().fold(0, |acc, &c| acc * p + c)
    }

    fn build_tables(&mut self) {
        let q = self.q;
        let order = q - 1;
        let mut factors = vec![];
        let mut n = order;
        let mut f = 2;
        while f * f <= n {
            if n.is_multiple_of(f) {
                factors.push(f);
                while n.is_multiple_of(f) {
                    n /= f;
                }
            }
            f += 1;
        }
        if n > 1 {
            factors.push(n);
        }
        let pow = |ctx: &FieldCtx, mut b: u32, mut e: u32| {
            let mut r = 1u32;
            while e > 0 {
                if e & 1 == 1 {
                    r = ctx.slow_mul(r, b);
                }
                b = ctx.slow_mul(b, b);
                e >>= 1;
            }
            r
        };
        let gen = (2..q)
            .find(|&g| factors.iter().all(|&f| pow(self, g, order / f) != 1))
            .expect("multiplicative group is cyclic");
        let mut exp = vec![0u16; 2 * order as usize];
        let mut log = vec![0u32; q as usize];
        let mut cur = 1u32;
        for i in 0..order {
            exp[i as usize] = cur as u16;
            exp[(i + order) as usize] = cur as u16;
            log[cur as usize] = i;
            cur = self.slow_mul(cur, gen);
        }
        let mut inv = vec![0u16; q as usize];
        for a in 1..q {
            inv[a as usize] = exp[((order - log[a as usize]) % order) as usize];
        }
        self.exp = exp;
        self.log = log;
        self.inv = inv;
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn e(&self) -> u32 {
        self.e
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn reduction_poly(&self) -> Option<&[u32]> {
        self.reduction_poly.as_deref()
    }

    /// Element from its canonical integer; fails outside `[0, q)`.
    pub fn elem(&self, n: u32) -> Result<FieldElem> {
        if n < self.q {
            Ok(FieldElem(n as u16))
        } else {
            Err(Error::Invalid(format!("{n} is not an element of GF({})", self.q)))
        }
    }

    /// Image of the integer `n` under Z -> GF(q), i.e. `n * 1`.
    #[inline]
    pub fn from_int(&self, n: i64) -> FieldElem {
        FieldElem(n.rem_euclid(self.p as i64) as u16)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElem> {
        (0..self.q).map(|n| FieldElem(n as u16))
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if self.e == 1 {
            let s = a.0 as u32 + b.0 as u32;
            FieldElem(if s >= self.p { s - self.p } else { s } as u16)
        } else if self.p == 2 {
            FieldElem(a.0 ^ b.0)
        } else {
            let (p, mut x, mut y) = (self.p, a.0 as u32, b.0 as u32);
            let (mut r, mut w) = (0u32, 1u32);
            for _ in 0..self.e {
                r += ((x % p + y % p) % p) * w;
                x /= p;
                y /= p;
                w *= p;
            }
            FieldElem(r as u16)
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldElem) -> FieldElem {
        if self.e == 1 {
            FieldElem(if a.0 == 0 { 0 } else { (self.p - a.0 as u32) as u16 })
        } else if self.p == 2 {
            a
        } else {
            let (p, mut x) = (self.p, a.0 as u32);
            let (mut r, mut w) = (0u32, 1u32);
            for _ in 0..self.e {
                r += ((p - x % p) % p) * w;
                x /= p;
                w *= p;
            }
            FieldElem(r as u16)
        }
    }

    #[inline]
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a.0 == 0 || b.0 == 0 {
            return FieldElem::ZERO;
        }
        if self.e == 1 {
            FieldElem((a.0 as u32 * b.0 as u32 % self.p) as u16)
        } else {
            FieldElem(self.exp[(self.log[a.0 as usize] + self.log[b.0 as usize]) as usize])
        }
    }

    pub fn inv(&self, a: FieldElem) -> Result<FieldElem> {
        if a.is_zero() {
            Err(Error::DivisionByZero)
        } else {
            Ok(FieldElem(self.inv[a.0 as usize]))
        }
    }

    pub fn div(&self, a: FieldElem, b: FieldElem) -> Result<FieldElem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElem, mut e: u64) -> FieldElem {
        let mut r = FieldElem::ONE;
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }

    /// Discrete log w.r.t. the table generator (extension fields only).
    pub fn log_table(&self) -> Option<(&[u16], &[u32])> {
        if self.e == 1 {
            None
        } else {
            Some((&self.exp, &self.log))
        }
    }

    /// A uniformly random element.
    pub fn random<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> FieldElem {
        FieldElem(rng.gen_range(0..self.q) as u16)
    }
}
