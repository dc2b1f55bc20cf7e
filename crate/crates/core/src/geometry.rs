//! Points and affine subspaces of F_q^m.
//!
//! An [`AffineSubspace`] is stored canonically: the direction space as a
//! matrix in reduced row-echelon form, and an offset that vanishes on every
//! pivot column. Two descriptions of the same point set therefore compare
//! equal, hash equal and serialize identically.
//!
//! The pivot columns double as the subspace's local chart: the local
//! coordinates of a point `z` of `S` are `z[pivots]`, and
//! `S.point_at(t) = base + sum_i t_i * basis[i]`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{check_cap, Error, Result};
use crate::field::{FieldCtx, FieldElem};
use crate::linalg::{self, Row};

pub type Point = Vec<FieldElem>;

/// Canonical integer of a point: base-q digits, first coordinate most
/// significant.
pub fn point_code(q: u32, x: &[FieldElem]) -> u64 {
    x.iter().fold(0u64, |acc, e| acc * q as u64 + e.0 as u64)
}

pub fn point_from_code(q: u32, m: usize, mut code: u64) -> Point {
    let mut out = vec![FieldElem::ZERO; m];
    for i in (0..m).rev() {
        out[i] = FieldElem((code % q as u64) as u16);
        code /= q as u64;
    }
    out
}

/// Iterator over all points of F_q^m in code order.
pub fn all_points(q: u32, m: usize) -> impl Iterator<Item = Point> {
    let n = (q as u64).pow(m as u32);
    (0..n).map(move |c| point_from_code(q, m, c))
}

pub fn random_point<R: Rng + ?Sized>(f: &FieldCtx, m: usize, rng: &mut R) -> Point {
    (0..m).map(|_| f.random(rng)).collect()
}

/// A k-dimensional affine subspace of F_q^m in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineSubspace {
    m: usize,
    basis: Vec<Row>,
    base: Point,
    pivots: Vec<usize>,
}

impl AffineSubspace {
    /// Canonical form of `base + span(dirs)`; the directions must be
    /// linearly independent.
    pub fn canonicalize(f: &FieldCtx, base: &[FieldElem], dirs: &[Row]) -> Result<Self> {
        let s = Self::span(f, base, dirs)?;
        if s.dim() != dirs.len() {
            return Err(Error::DependentDirections);
        }
        Ok(s)
    }

    /// Like [`canonicalize`](Self::canonicalize) but tolerates dependent
    /// directions.
    pub fn span(f: &FieldCtx, base: &[FieldElem], dirs: &[Row]) -> Result<Self> {
        let m = base.len();
        if dirs.iter().any(|d| d.len() != m) {
            return Err(Error::AmbientMismatch);
        }
        if base.iter().any(|e| e.value() >= f.q()) || dirs.iter().flatten().any(|e| e.value() >= f.q()) {
            return Err(Error::Invalid("coordinate outside the field".into()));
        }
        let mut basis = dirs.to_vec();
        let pivots = linalg::rref(f, &mut basis);
        let mut base = base.to_vec();
        linalg::reduce(f, &mut base, &basis, &pivots);
        Ok(AffineSubspace { m, basis, base, pivots })
    }

    pub(crate) fn from_parts_unchecked(m: usize, basis: Vec<Row>, base: Point, pivots: Vec<usize>) -> Self {
        AffineSubspace { m, basis, base, pivots }
    }

    /// The single point `x`.
    pub fn point(x: &[FieldElem]) -> Self {
        AffineSubspace { m: x.len(), basis: vec![], base: x.to_vec(), pivots: vec![] }
    }

    /// The ambient space F^m; its chart is the identity.
    pub fn whole(m: usize) -> Self {
        AffineSubspace { m, basis: linalg::identity(m), base: vec![FieldElem::ZERO; m], pivots: (0..m).collect() }
    }

    /// `span(e_0, ..., e_{k-1})`.
    pub fn coordinate(m: usize, k: usize) -> Self {
        let basis = (0..k)
            .map(|i| {
                let mut r = vec![FieldElem::ZERO; m];
                r[i] = FieldElem::ONE;
                r
            })
            .collect();
        AffineSubspace { m, basis, base: vec![FieldElem::ZERO; m], pivots: (0..k).collect() }
    }

    pub fn ambient(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Row] {
        &self.basis
    }

    pub fn base(&self) -> &[FieldElem] {
        &self.base
    }

    /// Local chart columns.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_linear(&self) -> bool {
        self.base.iter().all(|e| e.is_zero())
    }

    /// Number of points, `q^dim`.
    pub fn size(&self, f: &FieldCtx) -> u128 {
        (f.q() as u128).pow(self.dim() as u32)
    }

    pub fn linear_part(&self) -> AffineSubspace {
        AffineSubspace {
            m: self.m,
            basis: self.basis.clone(),
            base: vec![FieldElem::ZERO; self.m],
            pivots: self.pivots.clone(),
        }
    }

    /// `base + sum_i t_i basis_i`.
    pub fn point_at(&self, f: &FieldCtx, t: &[FieldElem]) -> Point {
        let mut out = self.base.clone();
        for (&c, row) in t.iter().zip(&self.basis) {
            if c.is_zero() {
                continue;
            }
            for (o, &y) in out.iter_mut().zip(row) {
                *o = f.add(*o, f.mul(c, y));
            }
        }
        out
    }

    /// Local coordinates of `x`, or `None` when `x` is not in the subspace.
    pub fn local_coords(&self, f: &FieldCtx, x: &[FieldElem]) -> Option<Vec<FieldElem>> {
        if x.len() != self.m {
            return None;
        }
        let t: Vec<FieldElem> = self.pivots.iter().map(|&p| x[p]).collect();
        if self.point_at(f, &t) == x {
            Some(t)
        } else {
            None
        }
    }

    /// Local coordinates of a point known to lie in the subspace.
    #[inline]
    pub fn local_coords_unchecked(&self, x: &[FieldElem]) -> Vec<FieldElem> {
        self.pivots.iter().map(|&p| x[p]).collect()
    }

    pub fn contains_point(&self, f: &FieldCtx, x: &[FieldElem]) -> bool {
        self.local_coords(f, x).is_some()
    }

    fn contains_direction(&self, f: &FieldCtx, v: &[FieldElem]) -> bool {
        let mut w = v.to_vec();
        linalg::reduce(f, &mut w, &self.basis, &self.pivots);
        w.iter().all(|e| e.is_zero())
    }

    /// `other ⊆ self`.
    pub fn contains(&self, f: &FieldCtx, other: &AffineSubspace) -> bool {
        other.m == self.m
            && other.dim() <= self.dim()
            && self.contains_point(f, &other.base)
            && other.basis.iter().all(|r| self.contains_direction(f, r))
    }

    /// All points in local-coordinate order (first local coordinate most
    /// significant).
    pub fn points(&self, f: &FieldCtx) -> Vec<Point> {
        all_points(f.q(), self.dim()).map(|t| self.point_at(f, &t)).collect()
    }

    /// Exact intersection, `None` when empty.
    pub fn intersect(&self, f: &FieldCtx, other: &AffineSubspace) -> Result<Option<AffineSubspace>> {
        if self.m != other.m {
            return Err(Error::AmbientMismatch);
        }
        // base1 + t*B1 = base2 + u*B2  <=>  (t, -u) * [B1; B2] = base2 - base1
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        let rhs: Row = other.base.iter().zip(&self.base).map(|(&a, &b)| f.sub(a, b)).collect();
        let Some((sol, null)) = linalg::solve_left(f, &rows, &rhs) else {
            return Ok(None);
        };
        let k1 = self.dim();
        let p = self.point_at(f, &sol[..k1]);
        let dirs: Vec<Row> = null.iter().map(|v| linalg::combine(f, &v[..k1], &self.basis, self.m)).collect();
        Ok(Some(AffineSubspace::span(f, &p, &dirs)?))
    }

    /// Smallest affine subspace containing both.
    pub fn join(&self, f: &FieldCtx, other: &AffineSubspace) -> Result<AffineSubspace> {
        if self.m != other.m {
            return Err(Error::AmbientMismatch);
        }
        let mut dirs = self.basis.clone();
        dirs.extend(other.basis.iter().cloned());
        dirs.push(other.base.iter().zip(&self.base).map(|(&a, &b)| f.sub(a, b)).collect());
        AffineSubspace::span(f, &self.base, &dirs)
    }

    /// Image of a subspace given in this subspace's local chart.
    pub fn embed(&self, f: &FieldCtx, local: &AffineSubspace) -> AffineSubspace {
        debug_assert_eq!(local.ambient(), self.dim());
        let base = self.point_at(f, &local.base);
        let dirs: Vec<Row> = local.basis.iter().map(|r| linalg::combine(f, r, &self.basis, self.m)).collect();
        AffineSubspace::span(f, &base, &dirs).expect("embedding preserves ambient")
    }

    /// All affine `a`-dimensional subspaces contained in this one.
    pub fn subspaces(&self, f: &FieldCtx, a: usize, cap: u128) -> Result<Vec<AffineSubspace>> {
        let local = SubspaceFamily::all(self.dim(), a).enumerate(f, cap)?;
        Ok(local.iter().map(|l| self.embed(f, l)).collect())
    }

    /// Canonical textual form: base, then basis rows; comma-separated
    /// integers, rows separated by `;`.
    pub fn to_text(&self) -> String {
        let row = |r: &[FieldElem]| r.iter().map(|e| e.0.to_string()).collect::<Vec<_>>().join(",");
        let mut parts = vec![row(&self.base)];
        parts.extend(self.basis.iter().map(|r| row(r)));
        parts.join(";")
    }

    /// Parses the textual form; rejects non-canonical input.
    pub fn from_text(f: &FieldCtx, s: &str) -> Result<AffineSubspace> {
        let parse_row = |r: &str| -> Result<Row> {
            r.split(',')
                .map(|t| {
                    let n: u32 = t.trim().parse().map_err(|_| Error::Format(format!("bad coordinate {t:?}")))?;
                    f.elem(n).map_err(|_| Error::Format(format!("coordinate {n} outside GF({})", f.q())))
                })
                .collect()
        };
        let mut rows = s.split(';').map(parse_row);
        let base = rows.next().ok_or_else(|| Error::Format("empty subspace".into()))??;
        let dirs: Vec<Row> = rows.collect::<Result<_>>()?;
        let sub = AffineSubspace::canonicalize(f, &base, &dirs).map_err(|e| match e {
            Error::AmbientMismatch | Error::DependentDirections => Error::Format(format!("{s:?}: {e}")),
            other => other,
        })?;
        if sub.base != base || sub.basis != dirs {
            return Err(Error::Format(format!("{s:?} is not in canonical form")));
        }
        Ok(sub)
    }
}

impl fmt::Display for AffineSubspace {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.write_str(&self.to_text())
    }
}

/// `[m k]_q`, the number of k-dimensional linear subspaces of F_q^m.
pub fn gaussian_binomial(m: usize, k: usize, q: u32) -> BigUint {
    if k > m {
        return BigUint::zero();
    }
    let q = BigUint::from(q);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= q.pow(m as u32) - q.pow(i as u32);
        den *= q.pow(k as u32) - q.pow(i as u32);
    }
    num / den
}

/// `h(n, t, j)`: t-dimensional subspaces of F_q^n containing a fixed
/// j-dimensional one.
pub fn count_containing(n: usize, t: usize, j: usize, q: u32) -> BigUint {
    if j > t || t > n {
        return BigUint::zero();
    }
    gaussian_binomial(n - j, t - j, q)
}

pub(crate) fn to_u128(b: &BigUint) -> u128 {
    b.to_u128().unwrap_or(u128::MAX)
}

pub(crate) fn gauss(m: usize, k: usize, q: u32) -> u128 {
    to_u128(&gaussian_binomial(m, k, q))
}

pub(crate) fn qpow(q: u32, e: usize) -> u128 {
    (q as u128).checked_pow(e as u32).unwrap_or(u128::MAX)
}

/// All k×n RREF matrices over GF(q) (one per linear subspace), sorted.
pub fn linear_rrefs(f: &FieldCtx, n: usize, k: usize, cap: u128) -> Result<Vec<Vec<Row>>> {
    check_cap(gauss(n, k, f.q()), cap)?;
    let mut out = vec![];
    let mut piv: Vec<usize> = (0..k).collect();
    if k > n {
        return Ok(out);
    }
    loop {
        // free slots: (row, col) with col > piv[row], col not a pivot
        let slots: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| ((piv[i] + 1)..n).filter(|c| !piv.contains(c)).map(move |c| (i, c)))
            .collect();
        let total = (f.q() as u64).pow(slots.len() as u32);
        for code in 0..total {
            let mut rows = vec![vec![FieldElem::ZERO; n]; k];
            for (i, &p) in piv.iter().enumerate() {
                rows[i][p] = FieldElem::ONE;
            }
            let mut c = code;
            for &(i, col) in &slots {
                rows[i][col] = FieldElem((c % f.q() as u64) as u16);
                c /= f.q() as u64;
            }
            out.push(rows);
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                out.sort();
                return Ok(out);
            }
            i -= 1;
            if piv[i] < n - k + i {
                piv[i] += 1;
                for j in i + 1..k {
                    piv[j] = piv[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Which members of the k-dimensional affine subspaces a family keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    All,
    /// Subspaces containing `R`.
    Containing(AffineSubspace),
    /// Linear subspaces (those containing 0).
    Linear,
    /// Subspaces `S` with neither `S ⊇ R` nor `S ⊆ R`.
    Excluding(AffineSubspace),
}

/// A family of k-dimensional affine subspaces of F^m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceFamily {
    pub m: usize,
    pub k: usize,
    pub constraint: Constraint,
}

impl SubspaceFamily {
    pub fn all(m: usize, k: usize) -> Self {
        SubspaceFamily { m, k, constraint: Constraint::All }
    }

    pub fn linear(m: usize, k: usize) -> Self {
        SubspaceFamily { m, k, constraint: Constraint::Linear }
    }

    pub fn containing(k: usize, r: AffineSubspace) -> Self {
        SubspaceFamily { m: r.ambient(), k, constraint: Constraint::Containing(r) }
    }

    pub fn excluding(k: usize, r: AffineSubspace) -> Self {
        SubspaceFamily { m: r.ambient(), k, constraint: Constraint::Excluding(r) }
    }

    fn anchor(&self) -> Option<AffineSubspace> {
        match &self.constraint {
            Constraint::Containing(r) => Some(r.clone()),
            Constraint::Linear => Some(AffineSubspace::point(&vec![FieldElem::ZERO; self.m])),
            _ => None,
        }
    }

    /// Exact cardinality.
    pub fn count(&self, f: &FieldCtx) -> BigUint {
        let (m, k, q) = (self.m, self.k, f.q());
        let all = || gaussian_binomial(m, k, q) * BigUint::from(q).pow((m.saturating_sub(k)) as u32);
        if k > m {
            return BigUint::zero();
        }
        match &self.constraint {
            Constraint::All => all(),
            Constraint::Linear => gaussian_binomial(m, k, q),
            Constraint::Containing(r) => count_containing(m, k, r.dim(), q),
            Constraint::Excluding(r) => {
                let rd = r.dim();
                let sup = count_containing(m, k, rd, q);
                let sub = if k <= rd {
                    gaussian_binomial(rd, k, q) * BigUint::from(q).pow((rd - k) as u32)
                } else {
                    BigUint::zero()
                };
                let both = if k == rd { BigUint::one() } else { BigUint::zero() };
                all() + both - sup - sub
            }
        }
    }

    /// Membership test.
    pub fn admits(&self, f: &FieldCtx, s: &AffineSubspace) -> bool {
        if s.ambient() != self.m || s.dim() != self.k {
            return false;
        }
        match &self.constraint {
            Constraint::All => true,
            Constraint::Linear => s.is_linear(),
            Constraint::Containing(r) => s.contains(f, r),
            Constraint::Excluding(r) => !s.contains(f, r) && !r.contains(f, s),
        }
    }

    /// Every member exactly once, in canonical order.
    pub fn enumerate(&self, f: &FieldCtx, cap: u128) -> Result<Vec<AffineSubspace>> {
        let (m, k) = (self.m, self.k);
        if k > m {
            return Ok(vec![]);
        }
        if let Some(r) = self.anchor() {
            check_cap(to_u128(&self.count(f)), cap)?;
            return enumerate_containing(f, &r, k, cap);
        }
        let all_count = to_u128(&SubspaceFamily::all(m, k).count(f));
        check_cap(all_count, cap)?;
        let idx = SubspaceIndex::new(f, m, k, cap)?;
        let mut out = Vec::with_capacity(all_count as usize);
        for i in 0..idx.len() {
            let s = idx.get(i);
            if self.admits(f, &s) {
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Uniform sample. Panics on an empty family.
    pub fn sample<R: Rng + ?Sized>(&self, f: &FieldCtx, rng: &mut R) -> AffineSubspace {
        let m = self.m;
        match self.anchor() {
            Some(r) => extend_random(f, &r, self.k, rng),
            None => loop {
                let base = random_point(f, m, rng);
                let s = extend_random(f, &AffineSubspace::point(&base), self.k, rng);
                if self.admits(f, &s) {
                    return s;
                }
            },
        }
    }
}

/// Uniform k-dimensional subspace containing `r`: append random directions
/// until the span reaches dimension k.
pub(crate) fn extend_random<R: Rng + ?Sized>(f: &FieldCtx, r: &AffineSubspace, k: usize, rng: &mut R) -> AffineSubspace {
    assert!(r.dim() <= k && k <= r.ambient(), "empty family");
    let m = r.ambient();
    loop {
        let mut dirs = r.basis.clone();
        for _ in r.dim()..k {
            dirs.push(random_point(f, m, rng));
        }
        if let Ok(s) = AffineSubspace::canonicalize(f, &r.base, &dirs) {
            return s;
        }
    }
}

fn enumerate_containing(f: &FieldCtx, r: &AffineSubspace, k: usize, cap: u128) -> Result<Vec<AffineSubspace>> {
    let m = r.ambient();
    if k < r.dim() {
        return Ok(vec![]);
    }
    let free: Vec<usize> = (0..m).filter(|c| !r.pivots.contains(c)).collect();
    let quotients = linear_rrefs(f, free.len(), k - r.dim(), cap)?;
    let mut out: Vec<AffineSubspace> = quotients
        .iter()
        .map(|u| {
            let mut dirs = r.basis.clone();
            for row in u {
                let mut lifted = vec![FieldElem::ZERO; m];
                for (&c, &v) in free.iter().zip(row) {
                    lifted[c] = v;
                }
                dirs.push(lifted);
            }
            AffineSubspace::canonicalize(f, &r.base, &dirs).expect("lift is independent")
        })
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug)]
struct LinearPart {
    rows: Vec<Row>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

/// Dense numbering of all affine s-subspaces of F^m.
///
/// Index `i = linear_id * q^(m-s) + code`, where linear ids follow the sorted
/// RREF order and `code` reads the offset's non-pivot coordinates as base-q
/// digits (first most significant). Index order equals canonical order.
#[derive(Clone, Debug)]
pub struct SubspaceIndex {
    m: usize,
    s: usize,
    q: u32,
    cosets: u64,
    linear: Vec<LinearPart>,
    lookup: FxHashMap<Vec<u16>, u32>,
}

fn flat_key(rows: &[Row]) -> Vec<u16> {
    rows.iter().flatten().map(|e| e.0).collect()
}

impl SubspaceIndex {
    pub fn new(f: &FieldCtx, m: usize, s: usize, cap: u128) -> Result<Self> {
        if s > m {
            return Err(Error::OutOfRange(format!("dimension {s} exceeds ambient {m}")));
        }
        let total = gauss(m, s, f.q()).saturating_mul(qpow(f.q(), m - s));
        check_cap(total, cap)?;
        let rrefs = linear_rrefs(f, m, s, cap)?;
        let mut lookup = FxHashMap::default();
        let linear = rrefs
            .into_iter()
            .enumerate()
            .map(|(i, rows)| {
                lookup.insert(flat_key(&rows), i as u32);
                let pivots: Vec<usize> = rows.iter().map(|r| r.iter().position(|e| !e.is_zero()).unwrap()).collect();
                let free = (0..m).filter(|c| !pivots.contains(c)).collect();
                LinearPart { rows, pivots, free }
            })
            .collect();
        Ok(SubspaceIndex { m, s, q: f.q(), cosets: (f.q() as u64).pow((m - s) as u32), linear, lookup })
    }

    pub fn ambient(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn len(&self) -> usize {
        self.linear.len() * self.cosets as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear_count(&self) -> usize {
        self.linear.len()
    }

    pub fn cosets(&self) -> u64 {
        self.cosets
    }

    pub fn get(&self, i: usize) -> AffineSubspace {
        let lid = i / self.cosets as usize;
        let mut code = (i % self.cosets as usize) as u64;
        let lp = &self.linear[lid];
        let mut base = vec![FieldElem::ZERO; self.m];
        for &c in lp.free.iter().rev() {
            base[c] = FieldElem((code % self.q as u64) as u16);
            code /= self.q as u64;
        }
        AffineSubspace::from_parts_unchecked(self.m, lp.rows.clone(), base, lp.pivots.clone())
    }

    /// Linear id of a direction space given in RREF.
    pub fn linear_id(&self, rows: &[Row]) -> Option<usize> {
        self.lookup.get(&flat_key(rows)).map(|&i| i as usize)
    }

    pub fn linear_rows(&self, lid: usize) -> &[Row] {
        &self.linear[lid].rows
    }

    pub fn linear_pivots(&self, lid: usize) -> &[usize] {
        &self.linear[lid].pivots
    }

    /// Linear id of entry `i`.
    #[inline]
    pub fn linear_of(&self, i: usize) -> usize {
        i / self.cosets as usize
    }

    /// Canonical base point of entry `i`, written into `out`.
    pub fn base_into(&self, i: usize, out: &mut [FieldElem]) {
        let lp = &self.linear[i / self.cosets as usize];
        let mut code = (i % self.cosets as usize) as u64;
        out.iter_mut().for_each(|e| *e = FieldElem::ZERO);
        for &c in lp.free.iter().rev() {
            out[c] = FieldElem((code % self.q as u64) as u16);
            code /= self.q as u64;
        }
    }

    /// Point codes of all points of entry `i`, in the order of the local
    /// coordinates' codes.
    pub fn point_codes_into(&self, f: &FieldCtx, i: usize, base: &mut [FieldElem], out: &mut Vec<u64>) {
        self.base_into(i, base);
        let rows = &self.linear[i / self.cosets as usize].rows;
        let q = self.q as u64;
        out.clear();
        let n = q.pow(self.s as u32);
        let mut u = vec![0u64; self.s];
        let mut y = base.to_vec();
        for _ in 0..n {
            y.copy_from_slice(base);
            for (j, &uj) in u.iter().enumerate() {
                if uj != 0 {
                    let c = FieldElem(uj as u16);
                    for (yc, &rc) in y.iter_mut().zip(&rows[j]) {
                        *yc = f.add(*yc, f.mul(c, rc));
                    }
                }
            }
            out.push(point_code(self.q, &y));
            // increment u as a base-q counter, last coordinate fastest
            for j in (0..self.s).rev() {
                u[j] += 1;
                if u[j] < q {
                    break;
                }
                u[j] = 0;
            }
        }
    }

    /// Index of the coset of linear part `lid` through point `x`.
    pub fn index_through(&self, f: &FieldCtx, lid: usize, x: &[FieldElem]) -> usize {
        let lp = &self.linear[lid];
        let mut code = 0u64;
        for &c in &lp.free {
            // canonical offset coordinate: x[c] - sum_i x[p_i] rows[i][c]
            let mut v = x[c];
            for (row, &p) in lp.rows.iter().zip(&lp.pivots) {
                if !x[p].is_zero() && !row[c].is_zero() {
                    v = f.sub(v, f.mul(x[p], row[c]));
                }
            }
            code = code * self.q as u64 + v.0 as u64;
        }
        lid * self.cosets as usize + code as usize
    }

    pub fn index_of(&self, s: &AffineSubspace) -> Option<usize> {
        if s.ambient() != self.m || s.dim() != self.s {
            return None;
        }
        let lid = self.linear_id(s.basis())?;
        let lp = &self.linear[lid];
        let code = lp.free.iter().fold(0u64, |acc, &c| acc * self.q as u64 + s.base()[c].0 as u64);
        Some(lid * self.cosets as usize + code as usize)
    }

    /// For every linear k-subspace (in sorted RREF order) the linear ids of
    /// the s-dimensional linear subspaces containing it.
    pub fn supersets(&self, f: &FieldCtx, k: usize, cap: u128) -> Result<SupersetTable> {
        if k > self.s {
            return Err(Error::OutOfRange(format!("k={k} exceeds s={}", self.s)));
        }
        let small = SubspaceIndex::new(f, self.m, k, cap.max(1))?;
        let local = linear_rrefs(f, self.s, k, cap)?;
        let mut lists = vec![vec![]; small.linear.len()];
        for (wid, lp) in self.linear.iter().enumerate() {
            for rows in &local {
                let mut dirs: Vec<Row> = rows.iter().map(|r| linalg::combine(f, r, &lp.rows, self.m)).collect();
                linalg::rref(f, &mut dirs);
                let vid = small.linear_id(&dirs).expect("sub-space of a listed space");
                lists[vid].push(wid as u32);
            }
        }
        Ok(SupersetTable { small, lists })
    }
}

/// Output of [`SubspaceIndex::supersets`].
#[derive(Clone, Debug)]
pub struct SupersetTable {
    /// Index of all affine k-subspaces.
    pub small: SubspaceIndex,
    pub lists: Vec<Vec<u32>>,
}

impl SupersetTable {
    /// Indices (in the big index) of the s-subspaces containing `k`.
    pub fn containing(&self, f: &FieldCtx, big: &SubspaceIndex, k: &AffineSubspace, out: &mut Vec<usize>) {
        out.clear();
        let vid = self.small.linear_id(k.basis()).expect("k-dimensional subspace");
        for &w in &self.lists[vid] {
            out.push(big.index_through(f, w as usize, k.base()));
        }
    }
}
