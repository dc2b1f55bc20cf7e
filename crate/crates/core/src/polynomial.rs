//! Polynomials of total degree at most d in k local coordinates.
//!
//! Coefficients are indexed by monomials in graded-lex order: degree
//! ascending, and within a degree the exponent tuples in descending
//! lexicographic order. For k = 2, d = 2 this is `1, x1, x2, x1^2, x1 x2,
//! x2^2`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_cap, Error, Result};
use crate::field::{FieldCtx, FieldElem};
use crate::geometry::{all_points, AffineSubspace};

/// Monomial list and multiplication table for a fixed `(k, d)`.
#[derive(Debug)]
pub struct MonomialBasis {
    pub k: usize,
    pub d: usize,
    pub exps: Vec<Vec<u8>>,
    // For monomial j > 0: the monomial with one fewer power of `var[j]`.
    parent: Vec<usize>,
    var: Vec<usize>,
    mul: Vec<u32>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// `C(k + d, d)`, the number of monomials of degree at most d in k variables.
pub fn monomial_count(k: usize, d: usize) -> usize {
    binom(k + d, d)
}

fn exps_of_degree(k: usize, deg: usize) -> Vec<Vec<u8>> {
    if k == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = vec![];
    for first in (0..=deg).rev() {
        for mut rest in exps_of_degree(k - 1, deg - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

impl MonomialBasis {
    fn build(k: usize, d: usize) -> Self {
        let exps: Vec<Vec<u8>> = (0..=d).flat_map(|deg| exps_of_degree(k, deg)).collect();
        let lookup: HashMap<Vec<u8>, usize> = exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let n = exps.len();
        let mut parent = vec![0; n];
        let mut var = vec![0; n];
        for (j, e) in exps.iter().enumerate().skip(1) {
            let v = e.iter().position(|&x| x > 0).unwrap();
            let mut p = e.clone();
            p[v] -= 1;
            parent[j] = lookup[&p];
            var[j] = v;
        }
        let mut mul = vec![u32::MAX; n * n];
        for a in 0..n {
            for b in 0..n {
                let s: Vec<u8> = exps[a].iter().zip(&exps[b]).map(|(x, y)| x + y).collect();
                if let Some(&i) = lookup.get(&s) {
                    mul[a * n + b] = i as u32;
                }
            }
        }
        MonomialBasis { k, d, exps, parent, var, mul }
    }

    /// Cached basis for `(k, d)`.
    pub fn get(k: usize, d: usize) -> Arc<MonomialBasis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap();
        guard.entry((k, d)).or_insert_with(|| Arc::new(MonomialBasis::build(k, d))).clone()
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn degree_of(&self, j: usize) -> usize {
        self.exps[j].iter().map(|&e| e as usize).sum()
    }

    /// Values of every monomial at `t`, written into `out`.
    #[inline]
    pub fn monomial_values(&self, f: &FieldCtx, t: &[FieldElem], out: &mut [FieldElem]) {
        out[0] = FieldElem::ONE;
        for j in 1..self.exps.len() {
            out[j] = f.mul(out[self.parent[j]], t[self.var[j]]);
        }
    }
}

/// A degree-≤d polynomial in k variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalPoly {
    pub k: usize,
    pub d: usize,
    pub coeffs: Vec<FieldElem>,
}

/// A polynomial on the whole ambient space (k = m, identity chart).
pub type GlobalPoly = LocalPoly;

static RESTRICT_CALLS: AtomicU64 = AtomicU64::new(0);

impl LocalPoly {
    pub fn zero(k: usize, d: usize) -> Self {
        LocalPoly { k, d, coeffs: vec![FieldElem::ZERO; monomial_count(k, d)] }
    }

    pub fn constant(k: usize, d: usize, c: FieldElem) -> Self {
        let mut p = Self::zero(k, d);
        p.coeffs[0] = c;
        p
    }

    pub fn from_coeffs(k: usize, d: usize, coeffs: Vec<FieldElem>) -> Result<Self> {
        let p = LocalPoly { k, d, coeffs };
        p.validate()?;
        Ok(p)
    }

    /// Checks the coefficient count.
    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != monomial_count(self.k, self.d) {
            return Err(Error::Format(format!(
                "expected {} coefficients for k={}, d={}, found {}",
                monomial_count(self.k, self.d),
                self.k,
                self.d,
                self.coeffs.len()
            )));
        }
        Ok(())
    }

    /// Uniformly random coefficient vector.
    pub fn random<R: Rng + ?Sized>(f: &FieldCtx, k: usize, d: usize, rng: &mut R) -> Self {
        LocalPoly { k, d, coeffs: (0..monomial_count(k, d)).map(|_| f.random(rng)).collect() }
    }

    pub fn basis(&self) -> Arc<MonomialBasis> {
        MonomialBasis::get(self.k, self.d)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Actual total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let b = self.basis();
        (0..self.coeffs.len()).rev().find(|&j| !self.coeffs[j].is_zero()).map(|j| b.degree_of(j))
    }

    /// Re-expresses the polynomial with degree bound `d`; fails if a nonzero
    /// coefficient has degree above `d`.
    pub fn with_bound(&self, d: usize) -> Result<LocalPoly> {
        let n = monomial_count(self.k, d);
        if d >= self.d {
            let mut coeffs = self.coeffs.clone();
            coeffs.resize(n, FieldElem::ZERO);
            return Ok(LocalPoly { k: self.k, d, coeffs });
        }
        if self.coeffs[n..].iter().any(|c| !c.is_zero()) {
            return Err(Error::DegreeViolation(format!("degree {} > {d}", self.degree().unwrap_or(0))));
        }
        Ok(LocalPoly { k: self.k, d, coeffs: self.coeffs[..n].to_vec() })
    }

    pub fn evaluate(&self, f: &FieldCtx, t: &[FieldElem]) -> FieldElem {
        let b = self.basis();
        let mut mv = vec![FieldElem::ZERO; b.len()];
        self.evaluate_with(f, &b, t, &mut mv)
    }

    /// Evaluation reusing a caller-provided basis and scratch buffer.
    #[inline]
    pub fn evaluate_with(&self, f: &FieldCtx, b: &MonomialBasis, t: &[FieldElem], scratch: &mut [FieldElem]) -> FieldElem {
        eval_coeffs(f, b, &self.coeffs, t, scratch)
    }

    /// Values at all q^k points of the chart, in local code order.
    pub fn evaluate_all(&self, f: &FieldCtx) -> Vec<FieldElem> {
        let b = self.basis();
        let mut mv = vec![FieldElem::ZERO; b.len()];
        all_points(f.q(), self.k).map(|t| eval_coeffs(f, &b, &self.coeffs, &t, &mut mv)).collect()
    }

    pub fn add(&self, f: &FieldCtx, other: &LocalPoly) -> LocalPoly {
        assert_eq!((self.k, self.d), (other.k, other.d));
        LocalPoly {
            k: self.k,
            d: self.d,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f.add(a, b)).collect(),
        }
    }

    pub fn scale(&self, f: &FieldCtx, c: FieldElem) -> LocalPoly {
        LocalPoly { k: self.k, d: self.d, coeffs: self.coeffs.iter().map(|&a| f.mul(a, c)).collect() }
    }
}

/// Evaluates a coefficient vector in basis `b` at `t`.
#[inline]
pub fn eval_coeffs(f: &FieldCtx, b: &MonomialBasis, coeffs: &[FieldElem], t: &[FieldElem], scratch: &mut [FieldElem]) -> FieldElem {
    b.monomial_values(f, t, scratch);
    let mut acc = FieldElem::ZERO;
    for (&c, &v) in coeffs.iter().zip(scratch.iter()) {
        if !c.is_zero() {
            acc = f.add(acc, f.mul(c, v));
        }
    }
    acc
}

/// Monomial values at every point of F^k (points in code order), for
/// evaluating many polynomials on the whole chart.
#[derive(Clone, Debug)]
pub struct MonomialGrid {
    n_monos: usize,
    values: Vec<FieldElem>,
}

impl MonomialGrid {
    pub fn new(f: &FieldCtx, k: usize, d: usize) -> Self {
        let b = MonomialBasis::get(k, d);
        let n_monos = b.len();
        let pts: Vec<_> = crate::geometry::all_points(f.q(), k).collect();
        let mut values = vec![FieldElem::ZERO; pts.len() * n_monos];
        for (p, row) in pts.iter().zip(values.chunks_mut(n_monos)) {
            b.monomial_values(f, p, row);
        }
        MonomialGrid { n_monos, values }
    }

    pub fn points(&self) -> usize {
        self.values.len() / self.n_monos
    }

    /// Values of `coeffs` at every chart point.
    pub fn eval_all(&self, f: &FieldCtx, coeffs: &[FieldElem], out: &mut Vec<FieldElem>) {
        out.clear();
        out.extend(self.values.chunks(self.n_monos).map(|row| {
            let mut acc = FieldElem::ZERO;
            for (&c, &v) in coeffs.iter().zip(row) {
                if !c.is_zero() {
                    acc = f.add(acc, f.mul(c, v));
                }
            }
            acc
        }));
    }
}

/// Points with coordinates in {0..d} and coordinate sum at most d; a
/// unisolvent set for degree d whenever d < q.
pub fn unisolvent_points(k: usize, d: usize) -> Vec<Vec<FieldElem>> {
    (0..=d)
        .flat_map(|deg| exps_of_degree(k, deg))
        .map(|e| e.iter().map(|&x| FieldElem(x as u16)).collect())
        .collect()
}

/// Incremental exact solver for interpolation.
struct Interpolator<'a> {
    f: &'a FieldCtx,
    b: Arc<MonomialBasis>,
    // rows in echelon form: (pivot column, monomial coefficients, value)
    rows: Vec<(usize, Vec<FieldElem>, FieldElem)>,
    scratch: Vec<FieldElem>,
}

impl<'a> Interpolator<'a> {
    fn new(f: &'a FieldCtx, k: usize, d: usize) -> Self {
        let b = MonomialBasis::get(k, d);
        let n = b.len();
        Interpolator { f, b, rows: vec![], scratch: vec![FieldElem::ZERO; n] }
    }

    fn full(&self) -> bool {
        self.rows.len() == self.b.len()
    }

    // false iff the sample contradicts the rows so far
    fn push(&mut self, t: &[FieldElem], v: FieldElem) -> bool {
        let f = self.f;
        self.b.monomial_values(f, t, &mut self.scratch);
        let mut row = self.scratch.clone();
        let mut val = v;
        for (p, r, rv) in &self.rows {
            let c = row[*p];
            if c.is_zero() {
                continue;
            }
            for (x, &y) in row.iter_mut().zip(r) {
                *x = f.sub(*x, f.mul(c, y));
            }
            val = f.sub(val, f.mul(c, *rv));
        }
        match row.iter().position(|x| !x.is_zero()) {
            None => val.is_zero(),
            Some(p) => {
                let inv = f.inv(row[p]).unwrap();
                for x in row.iter_mut() {
                    *x = f.mul(*x, inv);
                }
                val = f.mul(val, inv);
                // keep rows fully reduced
                for (_, r, rv) in self.rows.iter_mut() {
                    let c = r[p];
                    if c.is_zero() {
                        continue;
                    }
                    for (x, &y) in r.iter_mut().zip(&row) {
                        *x = f.sub(*x, f.mul(c, y));
                    }
                    *rv = f.sub(*rv, f.mul(c, val));
                }
                self.rows.push((p, row, val));
                true
            }
        }
    }

    fn solution(&self) -> Vec<FieldElem> {
        let mut coeffs = vec![FieldElem::ZERO; self.b.len()];
        for (p, _, v) in &self.rows {
            coeffs[*p] = *v;
        }
        coeffs
    }
}

/// The unique degree-≤d polynomial through `samples`.
pub fn interpolate(f: &FieldCtx, samples: &[(Vec<FieldElem>, FieldElem)], k: usize, d: usize) -> Result<LocalPoly> {
    if d >= f.q() as usize {
        return Err(Error::OutOfRange(format!("interpolation needs d < q (d={d}, q={})", f.q())));
    }
    let mut it = Interpolator::new(f, k, d);
    let mut i = 0;
    while i < samples.len() && !it.full() {
        let (t, v) = &samples[i];
        if t.len() != k {
            return Err(Error::AmbientMismatch);
        }
        if !it.push(t, *v) {
            return Err(Error::Inconsistent(d));
        }
        i += 1;
    }
    let poly = LocalPoly { k, d, coeffs: it.solution() };
    let b = poly.basis();
    let mut scratch = vec![FieldElem::ZERO; b.len()];
    for (t, v) in &samples[i..] {
        if t.len() != k {
            return Err(Error::AmbientMismatch);
        }
        if poly.evaluate_with(f, &b, t, &mut scratch) != *v {
            return Err(Error::Inconsistent(d));
        }
    }
    if !it.full() {
        return Err(Error::Underdetermined);
    }
    Ok(poly)
}

/// Interpolates a function given by its values on all q^k points (local
/// code order), verifying every point.
pub fn interpolate_table(f: &FieldCtx, values: &[FieldElem], k: usize, d: usize) -> Result<LocalPoly> {
    let q = f.q() as u64;
    if values.len() as u64 != q.pow(k as u32) {
        return Err(Error::Invalid("value table has the wrong length".into()));
    }
    // exact solve on the unisolvent set, then check everything
    let code = |t: &[FieldElem]| t.iter().fold(0u64, |a, e| a * q + e.0 as u64) as usize;
    let samples: Vec<_> = unisolvent_points(k, d).into_iter().map(|t| {
        let v = values[code(&t)];
        (t, v)
    }).collect();
    let p = interpolate(f, &samples, k, d)?;
    let b = p.basis();
    let mut scratch = vec![FieldElem::ZERO; b.len()];
    for (t, &v) in all_points(f.q(), k).zip(values) {
        if p.evaluate_with(f, &b, &t, &mut scratch) != v {
            return Err(Error::Inconsistent(d));
        }
    }
    Ok(p)
}

/// The affine map from `r`'s chart into `chart`'s chart: `t = c + A u`.
/// Returns `(c, A)` with `A` stored row-major (`A[i][j]`).
fn chart_map(chart: &AffineSubspace, r: &AffineSubspace) -> (Vec<FieldElem>, Vec<Vec<FieldElem>>) {
    let piv = chart.pivots();
    let c = piv.iter().map(|&p| r.base()[p]).collect();
    let a = piv.iter().map(|&p| r.basis().iter().map(|row| row[p]).collect()).collect();
    (c, a)
}

fn poly_mul(f: &FieldCtx, b: &MonomialBasis, x: &[FieldElem], y: &[FieldElem], out: &mut [FieldElem]) {
    let n = b.len();
    out.iter_mut().for_each(|o| *o = FieldElem::ZERO);
    for (i, &xi) in x.iter().enumerate() {
        if xi.is_zero() {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj.is_zero() {
                continue;
            }
            let idx = b.mul[i * n + j];
            if idx != u32::MAX {
                out[idx as usize] = f.add(out[idx as usize], f.mul(xi, yj));
            }
        }
    }
}

/// Restriction of `p` (expressed in `chart`'s local coordinates) to the
/// subspace `r ⊆ chart`, expressed in `r`'s chart. Computed by substitution.
pub fn restrict(f: &FieldCtx, p: &LocalPoly, chart: &AffineSubspace, r: &AffineSubspace) -> Result<LocalPoly> {
    if p.k != chart.dim() {
        return Err(Error::Invalid(format!("polynomial has {} variables, chart has dimension {}", p.k, chart.dim())));
    }
    if !chart.contains(f, r) {
        return Err(Error::NotContained);
    }
    let out = restrict_unchecked(f, p, chart, r);
    if cfg!(debug_assertions) && RESTRICT_CALLS.fetch_add(1, Ordering::Relaxed).is_multiple_of(1024) {
        debug_assert_eq!(out, restrict_by_interpolation(f, p, chart, r)?);
    }
    Ok(out)
}

/// [`restrict`] without the containment check.
pub fn restrict_unchecked(f: &FieldCtx, p: &LocalPoly, chart: &AffineSubspace, r: &AffineSubspace) -> LocalPoly {
    let (c, a) = chart_map(chart, r);
    let kr = r.dim();
    let d = p.d;
    if kr == 0 {
        return LocalPoly::constant(0, d, p.evaluate(f, &c));
    }
    let b = MonomialBasis::get(kr, d);
    let n = b.len();
    // powers[i][e] = L_i(u)^e where L_i = c_i + sum_j a[i][j] u_j
    let mut powers: Vec<Vec<Vec<FieldElem>>> = Vec::with_capacity(p.k);
    for i in 0..p.k {
        let mut lin = vec![FieldElem::ZERO; n];
        lin[0] = c[i];
        for j in 0..kr {
            lin[1 + j] = a[i][j];
        }
        let mut pw = vec![LocalPoly::constant(kr, d, FieldElem::ONE).coeffs];
        for e in 1..=d {
            let mut next = vec![FieldElem::ZERO; n];
            poly_mul(f, &b, &pw[e - 1], &lin, &mut next);
            pw.push(next);
        }
        powers.push(pw);
    }
    let pb = p.basis();
    let mut out = vec![FieldElem::ZERO; n];
    let mut term = vec![FieldElem::ZERO; n];
    let mut tmp = vec![FieldElem::ZERO; n];
    for (j, &cj) in p.coeffs.iter().enumerate() {
        if cj.is_zero() {
            continue;
        }
        term.iter_mut().for_each(|x| *x = FieldElem::ZERO);
        term[0] = cj;
        for (i, &e) in pb.exps[j].iter().enumerate() {
            if e > 0 {
                poly_mul(f, &b, &term, &powers[i][e as usize], &mut tmp);
                std::mem::swap(&mut term, &mut tmp);
            }
        }
        for (o, &t) in out.iter_mut().zip(&term) {
            *o = f.add(*o, t);
        }
    }
    LocalPoly { k: kr, d, coeffs: out }
}

/// Restriction computed independently by interpolating from the unisolvent
/// set of `r`'s chart.
pub fn restrict_by_interpolation(f: &FieldCtx, p: &LocalPoly, chart: &AffineSubspace, r: &AffineSubspace) -> Result<LocalPoly> {
    if !chart.contains(f, r) {
        return Err(Error::NotContained);
    }
    let samples: Vec<_> = unisolvent_points(r.dim(), p.d)
        .into_iter()
        .map(|u| {
            let x = r.point_at(f, &u);
            let t = chart.local_coords_unchecked(&x);
            let v = p.evaluate(f, &t);
            (u, v)
        })
        .collect();
    interpolate(f, &samples, r.dim(), p.d)
}

/// Restriction of a global polynomial (identity chart on F^m).
pub fn restrict_global(f: &FieldCtx, g: &GlobalPoly, r: &AffineSubspace) -> LocalPoly {
    restrict_unchecked(f, g, &AffineSubspace::whole(g.k), r)
}

/// Exact fraction of chart points where `p1` and `p2` agree.
pub fn agreement_fraction(f: &FieldCtx, p1: &LocalPoly, p2: &LocalPoly, cap: u128) -> Result<Ratio<u64>> {
    if p1.k != p2.k {
        return Err(Error::AmbientMismatch);
    }
    let total = (f.q() as u128).pow(p1.k as u32);
    check_cap(total, cap)?;
    let b1 = p1.basis();
    let b2 = p2.basis();
    let mut s1 = vec![FieldElem::ZERO; b1.len()];
    let mut s2 = vec![FieldElem::ZERO; b2.len()];
    let agree = all_points(f.q(), p1.k)
        .filter(|t| p1.evaluate_with(f, &b1, t, &mut s1) == p2.evaluate_with(f, &b2, t, &mut s2))
        .count();
    Ok(Ratio::new(agree as u64, total as u64))
}
