//! Inclusion graphs between subspace families, their walk spectra and exact
//! checks of the edge-sampling lemmas.
//!
//! `λ(G)` uses expectation inner products and the row-stochastic incidence
//! operator, so the top singular pair is `(1, constants)`. It is computed as
//! the square root of the largest eigenvalue (in absolute value) of the
//! two-step walk on the smaller side after deflating the constant vector.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_cap, Error, Result};
use crate::field::{FieldCtx, FieldElem};
use crate::geometry::{
    all_points, count_containing, gauss, gaussian_binomial, linear_rrefs, point_code, qpow, AffineSubspace,
    SubspaceFamily, SubspaceIndex,
};
use crate::linalg::{self, Row};
use crate::rng;

/// Largest walk matrix handed to the dense eigensolver.
pub const DENSE_MAX: usize = 5000;
/// Graphs with more edges are not built explicitly when a co-incidence
/// route exists.
pub const EXPLICIT_EDGE_MAX: u128 = 5_000_000;
/// Residual target of the power iteration.
pub const POWER_TOL: f64 = 1e-9;
pub const POWER_MAX_ITERS: usize = 20_000;
/// Largest incidence matrix handed to the dense SVD.
pub const SVD_MAX_ENTRIES: u128 = 4_000_000;
/// Default slack for `(1 + o(1))` factors.
pub const DEFAULT_KAPPA: f64 = 2.0;
const POWER_SEED: u64 = 0x5eed_0f1a_4bda;

/// The six inclusion graphs of the spectral lemma. Anchors are canonical:
/// the point is the origin and the line is `span(e_1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphCase {
    /// Lines not through 0 vs linear cubes.
    G1,
    /// Lines through 0 vs cubes through 0.
    G2,
    /// Points off a line vs cubes containing it.
    G3,
    /// All points vs all cubes.
    G4,
    /// Nonzero points vs cubes through 0.
    G5,
    /// All points vs all lines.
    G6,
}

impl GraphCase {
    pub const ALL: [GraphCase; 6] = [GraphCase::G1, GraphCase::G2, GraphCase::G3, GraphCase::G4, GraphCase::G5, GraphCase::G6];

    pub fn name(self) -> &'static str {
        match self {
            GraphCase::G1 => "g1",
            GraphCase::G2 => "g2",
            GraphCase::G3 => "g3",
            GraphCase::G4 => "g4",
            GraphCase::G5 => "g5",
            GraphCase::G6 => "g6",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        GraphCase::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown graph case {s:?}")))
    }

    /// Parses `g1,g3` or ranges such as `g1..g6`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = vec![];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let (a, b) = (GraphCase::parse(a)?, GraphCase::parse(b)?);
                out.extend(GraphCase::ALL.into_iter().filter(|c| *c >= a && *c <= b));
            } else {
                out.push(GraphCase::parse(part)?);
            }
        }
        out.dedup();
        if out.is_empty() {
            return Err(Error::Invalid("empty case list".into()));
        }
        Ok(out)
    }

    /// Exponent `p` of the predicted `λ ≈ q^{-p/2}`.
    pub fn exponent(self) -> u32 {
        match self {
            GraphCase::G1 | GraphCase::G3 | GraphCase::G6 => 1,
            GraphCase::G2 | GraphCase::G5 => 2,
            GraphCase::G4 => 3,
        }
    }

    /// Smallest ambient dimension for which the asymptotic claim is made.
    pub fn min_m(self) -> usize {
        match self {
            GraphCase::G6 => 3,
            _ => 6,
        }
    }

    fn right_dim(self) -> usize {
        match self {
            GraphCase::G6 => 1,
            _ => 3,
        }
    }

    fn anchor(self, m: usize) -> Option<AffineSubspace> {
        match self {
            GraphCase::G1 | GraphCase::G2 | GraphCase::G5 => Some(AffineSubspace::point(&vec![FieldElem::ZERO; m])),
            GraphCase::G3 => Some(AffineSubspace::coordinate(m, 1)),
            GraphCase::G4 | GraphCase::G6 => None,
        }
    }
}

impl std::fmt::Display for GraphCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Vertex counts and degrees `(|A|, |B|, d_A, d_B)` from the counting
/// formulas, without building anything.
pub fn case_counts(case: GraphCase, m: usize, q: u32) -> (u128, u128, u128, u128) {
    let g = |n: usize, k: usize| if n >= k { gauss(n, k, q) } else { 0 };
    let qq = q as u128;
    match case {
        GraphCase::G1 => {
            let lines0 = g(m, 1);
            let cube_lines = g(3, 1) * qq * qq - g(3, 1);
            (lines0 * qpow(q, m.saturating_sub(1)) - lines0, g(m, 3), g(m.saturating_sub(2), 1), cube_lines)
        }
        GraphCase::G2 => (g(m, 1), g(m, 3), g(m.saturating_sub(1), 2), g(3, 1)),
        GraphCase::G3 => (qpow(q, m) - qq, g(m.saturating_sub(1), 2), g(m.saturating_sub(2), 1), qq.pow(3) - qq),
        GraphCase::G4 => (qpow(q, m), g(m, 3) * qpow(q, m.saturating_sub(3)), g(m, 3), qq.pow(3)),
        GraphCase::G5 => (qpow(q, m) - 1, g(m, 3), g(m.saturating_sub(1), 2), qq.pow(3) - 1),
        GraphCase::G6 => (qpow(q, m), g(m, 1) * qpow(q, m.saturating_sub(1)), g(m, 1), qq),
    }
}

#[derive(Clone, Debug)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_lists(lists: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            targets.extend(l);
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    fn transpose(&self, n: usize) -> Self {
        let mut lists = vec![vec![]; n];
        for i in 0..self.len() {
            for &j in self.row(i) {
                lists[j as usize].push(i as u32);
            }
        }
        Csr::from_lists(lists)
    }

    fn regular_degree(&self) -> Option<usize> {
        let d = self.row(0).len();
        (0..self.len()).all(|i| self.row(i).len() == d).then_some(d)
    }
}

/// Maps members of a family of equal-dimensional subspaces to their position.
enum Locator {
    Points(Vec<u32>),
    Indexed(SubspaceIndex, Vec<u32>),
}

impl Locator {
    fn new(f: &FieldCtx, m: usize, items: &[AffineSubspace], cap: u128) -> Result<Self> {
        let dim = items[0].dim();
        if dim == 0 {
            let n = qpow(f.q(), m);
            check_cap(n, cap)?;
            let mut map = vec![u32::MAX; n as usize];
            for (i, s) in items.iter().enumerate() {
                map[point_code(f.q(), s.base()) as usize] = i as u32;
            }
            return Ok(Locator::Points(map));
        }
        let idx = SubspaceIndex::new(f, m, dim, cap)?;
        let mut map = vec![u32::MAX; idx.len()];
        for (i, s) in items.iter().enumerate() {
            map[idx.index_of(s).expect("same ambient and dimension")] = i as u32;
        }
        Ok(Locator::Indexed(idx, map))
    }

    fn find(&self, f: &FieldCtx, s: &AffineSubspace) -> Option<u32> {
        let v = match self {
            Locator::Points(map) => map[point_code(f.q(), s.base()) as usize],
            Locator::Indexed(idx, map) => map[idx.index_of(s)?],
        };
        (v != u32::MAX).then_some(v)
    }
}

/// Which side of a bipartite graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Bi-regular bipartite containment graph: `a ~ b` iff `a ⊆ b`.
#[derive(Clone, Debug)]
pub struct InclusionGraph {
    label: String,
    q: u32,
    m: usize,
    left: Vec<AffineSubspace>,
    right: Vec<AffineSubspace>,
    left_adj: Csr,
    right_adj: Csr,
    left_degree: usize,
    right_degree: usize,
}

impl InclusionGraph {
    /// Containment graph between two explicit families. Each family must
    /// consist of subspaces of a single dimension.
    pub fn custom(f: &FieldCtx, label: &str, left: Vec<AffineSubspace>, right: Vec<AffineSubspace>, cap: u128) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::Invalid("inclusion graph needs two non-empty sides".into()));
        }
        let m = left[0].ambient();
        let (a, b) = (left[0].dim(), right[0].dim());
        if left.iter().chain(&right).any(|s| s.ambient() != m) {
            return Err(Error::AmbientMismatch);
        }
        if left.iter().any(|s| s.dim() != a) || right.iter().any(|s| s.dim() != b) {
            return Err(Error::Invalid("each side must have a single dimension".into()));
        }
        if a > b {
            return Err(Error::Invalid(format!("left dimension {a} exceeds right dimension {b}")));
        }
        let local = SubspaceFamily::all(b, a).enumerate(f, cap)?;
        check_cap(right.len() as u128 * local.len() as u128, cap)?;
        let loc = Locator::new(f, m, &left, cap)?;
        let lists: Vec<Vec<u32>> = right
            .par_iter()
            .map(|s| {
                let mut v: Vec<u32> = local.iter().filter_map(|l| loc.find(f, &s.embed(f, l))).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let right_adj = Csr::from_lists(lists);
        let left_adj = right_adj.transpose(left.len());
        let (Some(dl), Some(dr)) = (left_adj.regular_degree(), right_adj.regular_degree()) else {
            return Err(Error::NotBiRegular);
        };
        if dl == 0 {
            return Err(Error::Invalid("inclusion graph has no edges".into()));
        }
        Ok(InclusionGraph {
            label: label.to_string(),
            q: f.q(),
            m,
            left,
            right,
            left_adj,
            right_adj,
            left_degree: dl,
            right_degree: dr,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn left(&self) -> &[AffineSubspace] {
        &self.left
    }

    pub fn right(&self) -> &[AffineSubspace] {
        &self.right
    }

    pub fn left_len(&self) -> usize {
        self.left.len()
    }

    pub fn right_len(&self) -> usize {
        self.right.len()
    }

    /// Degree of every left vertex (`d_A`).
    pub fn left_degree(&self) -> usize {
        self.left_degree
    }

    /// Degree of every right vertex (`d_B`).
    pub fn right_degree(&self) -> usize {
        self.right_degree
    }

    pub fn edges(&self) -> usize {
        self.left_adj.targets.len()
    }

    pub fn left_neighbors(&self, a: usize) -> &[u32] {
        self.left_adj.row(a)
    }

    pub fn right_neighbors(&self, b: usize) -> &[u32] {
        self.right_adj.row(b)
    }

    /// The same graph with the sides exchanged (edges now mean `a ⊇ b`).
    pub fn swapped(&self) -> Self {
        InclusionGraph {
            label: format!("{}-swapped", self.label),
            q: self.q,
            m: self.m,
            left: self.right.clone(),
            right: self.left.clone(),
            left_adj: self.right_adj.clone(),
            right_adj: self.left_adj.clone(),
            left_degree: self.right_degree,
            right_degree: self.left_degree,
        }
    }

    fn side(&self, side: Side) -> (&Csr, &Csr, usize, usize) {
        match side {
            Side::Left => (&self.left_adj, &self.right_adj, self.left_degree, self.right_degree),
            Side::Right => (&self.right_adj, &self.left_adj, self.right_degree, self.left_degree),
        }
    }

    pub fn smaller_side(&self) -> Side {
        if self.left.len() <= self.right.len() {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// Dense two-step walk operator on one side, from explicit co-incidence
    /// counts.
    pub fn walk_matrix(&self, side: Side) -> Result<DMatrix<f64>> {
        let (adj, other, d, d_other) = self.side(side);
        let n = adj.len();
        check_cap(n as u128, DENSE_MAX as u128)?;
        let counts: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0u32; n];
                for &o in adj.row(i) {
                    for &j in other.row(o as usize) {
                        row[j as usize] += 1;
                    }
                }
                row
            })
            .collect();
        let w = 1.0 / (d as f64 * d_other as f64);
        Ok(DMatrix::from_fn(n, n, |i, j| counts[i][j] as f64 * w))
    }

    /// `out = T v` for the two-step walk on `side`.
    fn walk_apply(&self, side: Side, v: &[f64], out: &mut [f64], mid: &mut [f64]) {
        let (adj, other, d, d_other) = self.side(side);
        for (o, slot) in mid.iter_mut().enumerate() {
            *slot = other.row(o).iter().map(|&s| v[s as usize]).sum::<f64>() / d_other as f64;
        }
        for (s, slot) in out.iter_mut().enumerate() {
            *slot = adj.row(s).iter().map(|&o| mid[o as usize]).sum::<f64>() / d as f64;
        }
    }

    /// Common-neighbour count shared by every pair of distinct right
    /// vertices, or `CoDegreeViolated`.
    pub fn right_co_degree(&self, cap: u128) -> Result<usize> {
        let n = self.right.len();
        check_cap((n as u128) * (n as u128), cap)?;
        let mut counts = vec![0u32; n * n];
        for a in 0..self.left.len() {
            let nb = self.left_adj.row(a);
            for &b1 in nb {
                for &b2 in nb {
                    counts[b1 as usize * n + b2 as usize] += 1;
                }
            }
        }
        let mut common = None;
        for b1 in 0..n {
            for b2 in 0..n {
                if b1 == b2 {
                    continue;
                }
                let c = counts[b1 * n + b2];
                match common {
                    None => common = Some(c),
                    Some(x) if x != c => return Err(Error::CoDegreeViolated),
                    _ => {}
                }
            }
        }
        match common {
            Some(c) if c > 0 => Ok(c as usize),
            _ => Err(Error::CoDegreeViolated),
        }
    }
}

fn points_where(f: &FieldCtx, m: usize, keep: impl Fn(&[FieldElem]) -> bool) -> Vec<AffineSubspace> {
    all_points(f.q(), m).filter(|x| keep(x)).map(|x| AffineSubspace::point(&x)).collect()
}

fn case_left(f: &FieldCtx, case: GraphCase, m: usize, cap: u128) -> Result<Vec<AffineSubspace>> {
    let zero = vec![FieldElem::ZERO; m];
    Ok(match case {
        GraphCase::G1 => SubspaceFamily::all(m, 1)
            .enumerate(f, cap)?
            .into_iter()
            .filter(|l| !l.contains_point(f, &zero))
            .collect(),
        GraphCase::G2 => SubspaceFamily::linear(m, 1).enumerate(f, cap)?,
        GraphCase::G3 => {
            let line = AffineSubspace::coordinate(m, 1);
            points_where(f, m, |x| !line.contains_point(f, x))
        }
        GraphCase::G4 | GraphCase::G6 => points_where(f, m, |_| true),
        GraphCase::G5 => points_where(f, m, |x| x.iter().any(|e| !e.is_zero())),
    })
}

fn case_right(f: &FieldCtx, case: GraphCase, m: usize, cap: u128) -> Result<Vec<AffineSubspace>> {
    match case {
        GraphCase::G1 | GraphCase::G2 | GraphCase::G5 => SubspaceFamily::linear(m, 3).enumerate(f, cap),
        GraphCase::G3 => SubspaceFamily::containing(3, AffineSubspace::coordinate(m, 1)).enumerate(f, cap),
        GraphCase::G4 => SubspaceFamily::all(m, 3).enumerate(f, cap),
        GraphCase::G6 => SubspaceFamily::all(m, 1).enumerate(f, cap),
    }
}

/// Builds one of the six case graphs explicitly. Any `m` at least the right
/// side's dimension is accepted.
pub fn build_graph(f: &FieldCtx, case: GraphCase, m: usize, cap: u128) -> Result<InclusionGraph> {
    if m < case.right_dim() {
        return Err(Error::OutOfRange(format!("{case} needs m >= {}", case.right_dim())));
    }
    let (na, nb, _, db) = case_counts(case, m, f.q());
    check_cap(na.max(nb), cap)?;
    check_cap(nb.saturating_mul(db), cap)?;
    let left = case_left(f, case, m, cap)?;
    let right = case_right(f, case, m, cap)?;
    InclusionGraph::custom(f, case.name(), left, right, cap)
}

/// Two-step walk on the left side of a case graph, built from the number of
/// right vertices containing the join of two left vertices (and the anchor).
/// `None` when the case has no such route or the side is too large.
pub fn coincidence_walk(f: &FieldCtx, case: GraphCase, m: usize, cap: u128) -> Result<Option<DMatrix<f64>>> {
    if case == GraphCase::G1 || m < case.right_dim() {
        return Ok(None);
    }
    let (na, _, da, db) = case_counts(case, m, f.q());
    if na > DENSE_MAX as u128 {
        return Ok(None);
    }
    let left = case_left(f, case, m, cap)?;
    let k = case.right_dim();
    let starts: Vec<AffineSubspace> = match case.anchor(m) {
        Some(r) => left.iter().map(|a| r.join(f, a)).collect::<Result<_>>()?,
        None => left.clone(),
    };
    Ok(Some(join_walk(f, &starts, &left, m, k, da, db)?))
}

/// `T[i][j] = #{k-subspaces ⊇ join(starts[i], items[j])} / (d_A d_B)`.
fn join_walk(f: &FieldCtx, starts: &[AffineSubspace], items: &[AffineSubspace], m: usize, k: usize, da: u128, db: u128) -> Result<DMatrix<f64>> {
    let n = items.len();
    let counts: Vec<f64> = (0..=k).map(|j| count_containing(m, k, j, f.q()).to_f64().unwrap_or(f64::INFINITY)).collect();
    let w = 1.0 / (da as f64 * db as f64);
    let rows: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|s| {
            items
                .iter()
                .map(|b| {
                    let dim = s.join(f, b).map(|j| j.dim()).unwrap_or(usize::MAX);
                    if dim <= k {
                        counts[dim] * w
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// How `λ` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DenseSvd,
    TwoStepWalkEigen,
    PowerIteration,
}

/// Result of a `λ(G)` computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub case: String,
    pub m: usize,
    pub q: u32,
    pub lambda: f64,
    pub lambda_sq: f64,
    /// Closed form for `λ²`, when one is known.
    pub closed_form: Option<f64>,
    pub closed_form_exact: Option<String>,
    /// Predicted `λ ≈ q^{-p/2}`.
    pub target_exponent: Option<u32>,
    /// `λ · q^{p/2}`.
    pub ratio: Option<f64>,
    pub method: Method,
    /// `|λ² - closed_form|`.
    pub residual: Option<f64>,
    /// `‖T v - λ² v‖` for the returned unit eigenvector.
    pub solver_residual: f64,
    pub left_size: u128,
    pub right_size: u128,
    pub left_degree: u128,
    pub right_degree: u128,
}

/// Largest |eigenvalue| of `T - J/n` and its residual.
pub fn deflated_top(mut t: DMatrix<f64>) -> (f64, f64) {
    let n = t.nrows();
    if n <= 1 {
        return (0.0, 0.0);
    }
    t.add_scalar_mut(-1.0 / n as f64);
    let eig = SymmetricEigen::new(t.clone());
    let mut best = 0;
    for (i, ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > eig.eigenvalues[best].abs() {
            best = i;
        }
    }
    let ev = eig.eigenvalues[best];
    let v: DVector<f64> = eig.eigenvectors.column(best).into_owned();
    let res = (&t * &v - &v * ev).norm();
    (ev.abs().min(1.0), res)
}

fn power_top(g: &InclusionGraph, side: Side) -> Result<(f64, f64)> {
    let (adj, other, _, _) = g.side(side);
    let n = adj.len();
    if n <= 1 {
        return Ok((0.0, 0.0));
    }
    let mut rng = rng::seeded(POWER_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let deflate = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|e| *e -= mean);
    };
    let norm = |x: &[f64]| x.iter().map(|e| e * e).sum::<f64>().sqrt();
    deflate(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|e| *e /= nv);
    let mut w = vec![0.0; n];
    let mut mid = vec![0.0; other.len()];
    let mut res = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        g.walk_apply(side, &v, &mut w, &mut mid);
        deflate(&mut w);
        let rho: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        res = v.iter().zip(&w).map(|(a, b)| (b - rho * a).powi(2)).sum::<f64>().sqrt();
        if res <= POWER_TOL {
            return Ok((rho.clamp(0.0, 1.0), res));
        }
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok((0.0, 0.0));
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / nw;
        }
    }
    Err(Error::NoConvergence(res))
}

/// `λ(T)` of an explicit graph: dense walk eigen on the smaller side when it
/// fits, power iteration otherwise.
fn walk_top(g: &InclusionGraph) -> Result<(f64, f64, Method)> {
    let side = g.smaller_side();
    let n = g.left_len().min(g.right_len());
    if n <= DENSE_MAX {
        let (v, r) = deflated_top(g.walk_matrix(side)?);
        Ok((v, r, Method::TwoStepWalkEigen))
    } else {
        let (v, r) = power_top(g, side)?;
        Ok((v, r, Method::PowerIteration))
    }
}

fn assemble(
    case: &str,
    m: usize,
    q: u32,
    walk: (f64, f64, Method),
    closed: Option<BigRational>,
    exponent: Option<u32>,
    sizes: (u128, u128, u128, u128),
) -> SpectralReport {
    let (lambda_sq, solver_residual, method) = walk;
    let lambda = lambda_sq.max(0.0).sqrt();
    let closed_f = closed.as_ref().and_then(|c| c.to_f64());
    SpectralReport {
        case: case.to_string(),
        m,
        q,
        lambda,
        lambda_sq,
        closed_form: closed_f,
        closed_form_exact: closed.map(|c| c.to_string()),
        target_exponent: exponent,
        ratio: exponent.map(|p| lambda * (q as f64).powf(p as f64 / 2.0)),
        method,
        residual: closed_f.map(|c| (lambda_sq - c).abs()),
        solver_residual,
        left_size: sizes.0,
        right_size: sizes.1,
        left_degree: sizes.2,
        right_degree: sizes.3,
    }
}

/// `λ(G)` of an explicit graph.
pub fn lambda(g: &InclusionGraph) -> Result<SpectralReport> {
    let walk = walk_top(g)?;
    let sizes = (g.left_len() as u128, g.right_len() as u128, g.left_degree as u128, g.right_degree as u128);
    Ok(assemble(&g.label, g.m, g.q, walk, None, None, sizes))
}

/// `λ(G)` of a case graph with its closed form and predicted exponent.
/// Refuses `m` below the range the asymptotic claim covers.
pub fn case_report(f: &FieldCtx, case: GraphCase, m: usize, cap: u128) -> Result<SpectralReport> {
    if m < case.min_m() {
        return Err(Error::OutOfRange(format!("{case} requires m >= {}, got {m}", case.min_m())));
    }
    let sizes = case_counts(case, m, f.q());
    let edges = sizes.1.saturating_mul(sizes.3);
    let walk = if edges <= EXPLICIT_EDGE_MAX {
        walk_top(&build_graph(f, case, m, cap)?)?
    } else if let Some(t) = coincidence_walk(f, case, m, cap)? {
        let (v, r) = deflated_top(t);
        (v, r, Method::TwoStepWalkEigen)
    } else {
        walk_top(&build_graph(f, case, m, cap)?)?
    };
    Ok(assemble(case.name(), m, f.q(), walk, closed_form(case, m, f.q()), Some(case.exponent()), sizes))
}

fn gb(n: usize, k: usize, q: u32) -> BigInt {
    BigInt::from(gaussian_binomial(n, k, q))
}

fn ratio(n: BigInt, d: BigInt) -> BigRational {
    BigRational::new(n, d)
}

/// Exact `λ²` for each case graph.
///
/// G1 follows the decomposition of its walk into the identity and the
/// Grassmann walk on linear cubes; G6 the decomposition into the identity and
/// the complete graph. G2–G5 come from the co-incidence counts: the walk is
/// `aI + bJ` plus, for G3 and G5, a block term over the planes through the
/// line (resp. lines through the point), whose only non-trivial eigenvalue on
/// constants' complement is the one returned.
pub fn closed_form(case: GraphCase, m: usize, q: u32) -> Option<BigRational> {
    if m < case.right_dim() {
        return None;
    }
    let qq = BigInt::from(q);
    let one = BigInt::from(1);
    Some(match case {
        GraphCase::G1 => {
            if 2 * 3 > m {
                return None;
            }
            let dl = gb(m - 2, 1, q);
            let dr = gb(3, 1, q) * &qq * &qq - gb(3, 1, q);
            let beta = &qq * &qq - &one;
            let dprime = &qq * gb(3, 1, q) * gb(m - 3, 1, q);
            let (lam1, _) = grassmann_eigenvalue(1, 3, m, q).ok()?;
            ratio(one.clone(), dl.clone()) + ratio(beta * dprime, dr * dl) * lam1
        }
        GraphCase::G2 => ratio(gb(m - 1, 2, q) - gb(m - 2, 1, q), gb(m - 1, 2, q) * gb(3, 1, q)),
        GraphCase::G3 => {
            let t = gb(m - 2, 1, q);
            ratio((&qq * &qq - &qq) * (&t - &one), t * (qq.pow(3) - &qq))
        }
        GraphCase::G4 => ratio(gb(m, 3, q) - gb(m - 1, 2, q), gb(m, 3, q) * qq.pow(3)),
        GraphCase::G5 => ratio((&qq - &one) * (gb(m - 1, 2, q) - gb(m - 2, 1, q)), gb(m - 1, 2, q) * (qq.pow(3) - &one)),
        GraphCase::G6 => {
            let n = qq.pow(m as u32) - &one;
            (ratio(one.clone(), qq.clone()) - ratio(&qq - &one, &qq * n)).abs()
        }
    })
}

/// Second singular value of the incidence operator via a dense SVD, as
/// `(top, second)`; the top one is 1 for a bi-regular graph.
pub fn lambda_svd(g: &InclusionGraph) -> Result<(f64, f64)> {
    let (na, nb) = (g.left_len(), g.right_len());
    check_cap(na as u128 * nb as u128, SVD_MAX_ENTRIES)?;
    let w = 1.0 / ((g.left_degree * g.right_degree) as f64).sqrt();
    let mut a = DMatrix::<f64>::zeros(na, nb);
    for i in 0..na {
        for &j in g.left_neighbors(i) {
            a[(i, j as usize)] = w;
        }
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok((sv[0], sv.get(1).copied().unwrap_or(0.0)))
}

/// Eigenvalue `λ_j` of the Grassmann walk `T_{k,k-1}` on linear
/// k-subspaces of F_q^m, with its multiplicity `[m j] - [m j-1]`.
pub fn grassmann_eigenvalue(j: usize, k: usize, m: usize, q: u32) -> Result<(BigRational, BigUint)> {
    if k < 1 || 2 * k > m || j > k {
        return Err(Error::OutOfRange(format!("need 1 <= k <= m/2 and j <= k, got j={j}, k={k}, m={m}")));
    }
    let qq = BigInt::from(q);
    let num = qq.pow(j as u32 + 1) * gb(k - j, 1, q) * gb(m - k - j, 1, q) - gb(j, 1, q);
    let den = &qq * gb(k, 1, q) * gb(m - k, 1, q);
    let mult = if j == 0 { BigUint::from(1u32) } else { gaussian_binomial(m, j, q) - gaussian_binomial(m, j - 1, q) };
    Ok((ratio(num, den), mult))
}

fn rank(f: &FieldCtx, a: &[Row], b: &[Row]) -> usize {
    let mut rows: Vec<Row> = a.iter().chain(b).cloned().collect();
    linalg::rref(f, &mut rows);
    rows.len()
}

/// Dense walk on linear k-subspaces moving to a uniform neighbour meeting
/// the current one in dimension exactly `meet`.
pub fn grassmann_walk(f: &FieldCtx, k: usize, meet: usize, m: usize, cap: u128) -> Result<DMatrix<f64>> {
    if meet >= k || k > m {
        return Err(Error::OutOfRange(format!("need meet < k <= m, got meet={meet}, k={k}, m={m}")));
    }
    let spaces = linear_rrefs(f, m, k, cap)?;
    let n = spaces.len();
    check_cap(n as u128, DENSE_MAX as u128)?;
    let target = 2 * k - meet;
    let rows: Vec<Vec<bool>> = spaces
        .par_iter()
        .map(|u| spaces.iter().map(|w| rank(f, u, w) == target).collect())
        .collect();
    let deg = rows[0].iter().filter(|&&b| b).count();
    if deg == 0 || rows.iter().any(|r| r.iter().filter(|&&b| b).count() != deg) {
        return Err(Error::NotBiRegular);
    }
    Ok(DMatrix::from_fn(n, n, |i, j| if rows[i][j] { 1.0 / deg as f64 } else { 0.0 }))
}

/// Exact eigenvalue of the `meet`-walk on the non-trivial eigenspace
/// spanned by point-incidence vectors (the `j = 1` space), obtained from two
/// rows of the walk: `λ = T1_P(U) - T1_P(U')` with `P ⊆ U`, `P ⊄ U'`.
pub fn projected_eigenvalue(f: &FieldCtx, k: usize, meet: usize, m: usize, cap: u128) -> Result<BigRational> {
    if meet >= k || k + 1 > m {
        return Err(Error::OutOfRange(format!("need meet < k < m, got meet={meet}, k={k}, m={m}")));
    }
    let spaces = linear_rrefs(f, m, k, cap)?;
    let unit = |i: usize| {
        let mut r = vec![FieldElem::ZERO; m];
        r[i] = FieldElem::ONE;
        r
    };
    let inside: Vec<Row> = (0..k).map(unit).collect();
    let outside: Vec<Row> = (1..=k).map(unit).collect();
    let p = vec![unit(0)];
    let target = 2 * k - meet;
    let tally = |u: &[Row]| {
        let (hit, deg) = spaces
            .par_iter()
            .filter(|w| rank(f, u, w) == target)
            .map(|w| (usize::from(rank(f, w, &p) == k), 1usize))
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        ratio(BigInt::from(hit), BigInt::from(deg))
    };
    Ok(tally(&inside) - tally(&outside))
}

/// One eigenvalue level of `T_{k,k-1}` (levels with equal values merged).
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumLevel {
    pub js: Vec<usize>,
    pub value: String,
    pub value_f64: f64,
    pub expected: u128,
    pub observed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrassmannCheck {
    pub k: usize,
    pub m: usize,
    pub q: u32,
    pub levels: Vec<SpectrumLevel>,
    pub unmatched: usize,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Dense eigendecomposition of the explicit `T_{k,k-1}` compared with the
/// formula's eigenvalues and multiplicities.
pub fn check_grassmann_spectrum(f: &FieldCtx, k: usize, m: usize, cap: u128) -> Result<GrassmannCheck> {
    let q = f.q();
    let mut levels: BTreeMap<BigRational, (Vec<usize>, u128)> = BTreeMap::new();
    for j in 0..=k {
        let (v, mult) = grassmann_eigenvalue(j, k, m, q)?;
        let e = levels.entry(v).or_default();
        e.0.push(j);
        e.1 += mult.to_u128().unwrap_or(u128::MAX);
    }
    let t = grassmann_walk(f, k, k - 1, m, cap)?;
    let eig = SymmetricEigen::new(t).eigenvalues;
    let values: Vec<f64> = levels.keys().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let mut observed = vec![0usize; values.len()];
    let (mut unmatched, mut max_dev) = (0, 0.0f64);
    for &ev in eig.iter() {
        let (i, dev) = values
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - ev).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one level");
        if dev < 1e-8 {
            observed[i] += 1;
            max_dev = max_dev.max(dev);
        } else {
            unmatched += 1;
        }
    }
    let levels: Vec<SpectrumLevel> = levels
        .into_iter()
        .zip(observed)
        .zip(&values)
        .map(|(((v, (js, expected)), observed), &value_f64)| SpectrumLevel { js, value: v.to_string(), value_f64, expected, observed })
        .collect();
    let pass = unmatched == 0 && levels.iter().all(|l| l.expected == l.observed as u128);
    Ok(GrassmannCheck { k, m, q, levels, unmatched, max_deviation: max_dev, pass })
}

/// Comparison of the one-step eigenvalue squared with the eigenvalue of the
/// walk that skips a dimension.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceTwoReport {
    pub k: usize,
    pub m: usize,
    pub q: u32,
    /// `λ_1(T_{k,k-1})` from the formula.
    pub near: String,
    pub near_sq: f64,
    /// `λ_1(T_{k,k-2})`, exact.
    pub far: String,
    pub far_f64: f64,
    /// `λ_1(T_{k,k-2})` read off the dense eigendecomposition, when it fits.
    pub far_dense: Option<f64>,
    pub method: String,
    pub difference: f64,
    /// `|difference| · q^k`.
    pub ratio: f64,
    pub in_band: bool,
}

pub fn verify_distance_two(f: &FieldCtx, k: usize, m: usize, cap: u128) -> Result<DistanceTwoReport> {
    let q = f.q();
    if k < 2 || 2 * k > m {
        return Err(Error::OutOfRange(format!("need 2 <= k <= m/2, got k={k}, m={m}")));
    }
    let (near, _) = grassmann_eigenvalue(1, k, m, q)?;
    let far = projected_eigenvalue(f, k, k - 2, m, cap)?;
    let n = gauss(m, k, q);
    let far_dense = if n <= DENSE_MAX as u128 { Some(dense_level(f, k, m, cap)?) } else { None };
    let near_f = near.to_f64().unwrap_or(f64::NAN);
    let far_f = far.to_f64().unwrap_or(f64::NAN);
    let diff = far_f - near_f * near_f;
    let ratio = diff.abs() * (q as f64).powi(k as i32);
    Ok(DistanceTwoReport {
        k,
        m,
        q,
        near: near.to_string(),
        near_sq: near_f * near_f,
        far: far.to_string(),
        far_f64: far_f,
        far_dense,
        method: if far_dense.is_some() { "dense-eigen".into() } else { "row-projection".into() },
        difference: diff,
        ratio,
        in_band: (0.5..=2.0).contains(&ratio),
    })
}

/// Eigenvalue of the dense `T_{k,k-2}` on the `j = 1` space: the Rayleigh
/// quotient of a centred point-incidence vector, snapped to the nearest
/// eigenvalue of the full decomposition.
fn dense_level(f: &FieldCtx, k: usize, m: usize, cap: u128) -> Result<f64> {
    let t = grassmann_walk(f, k, k - 2, m, cap)?;
    let spaces = linear_rrefs(f, m, k, cap)?;
    let mut p = vec![FieldElem::ZERO; m];
    p[0] = FieldElem::ONE;
    let p = vec![p];
    let mut v = DVector::from_iterator(spaces.len(), spaces.iter().map(|w| if rank(f, w, &p) == k { 1.0 } else { 0.0 }));
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    let rq = v.dot(&(&t * &v)) / v.dot(&v);
    let eig = SymmetricEigen::new(t).eigenvalues;
    Ok(eig.iter().copied().min_by(|a, b| (a - rq).abs().total_cmp(&(b - rq).abs())).unwrap_or(rq))
}

/// Check of `λ(G(A^k_R, A^s_R))² · q^{s-2k+r+1} ≤ κ`.
#[derive(Clone, Debug, Serialize)]
pub struct SubspaceLemmaReport {
    pub r: usize,
    pub k: usize,
    pub s: usize,
    pub m: usize,
    pub q: u32,
    pub lambda: f64,
    pub lambda_sq: f64,
    pub exponent: usize,
    pub scaled: f64,
    pub kappa: f64,
    pub method: Method,
    pub pass: bool,
}

pub fn verify_subspace_lemma(f: &FieldCtx, r: usize, k: usize, s: usize, m: usize, kappa: f64, cap: u128) -> Result<SubspaceLemmaReport> {
    if !(r <= k && k < s && 2 * s <= m) {
        return Err(Error::OutOfRange(format!("need r <= k < s <= m/2, got r={r}, k={k}, s={s}, m={m}")));
    }
    let q = f.q();
    let anchor = AffineSubspace::coordinate(m, r);
    let left = SubspaceFamily::containing(k, anchor.clone()).enumerate(f, cap)?;
    let da = to_u128(count_containing(m, s, k, q));
    let db = to_u128(count_containing(s, k, r, q));
    let (lambda_sq, method) = if left.len() <= DENSE_MAX {
        (deflated_top(join_walk(f, &left, &left, m, s, da, db)?).0, Method::TwoStepWalkEigen)
    } else {
        let right = SubspaceFamily::containing(s, anchor).enumerate(f, cap)?;
        let g = InclusionGraph::custom(f, "subspace-lemma", left, right, cap)?;
        let (v, _, method) = walk_top(&g)?;
        (v, method)
    };
    let exponent = s + r + 1 - 2 * k;
    let scaled = lambda_sq * (q as f64).powi(exponent as i32);
    Ok(SubspaceLemmaReport {
        r,
        k,
        s,
        m,
        q,
        lambda: lambda_sq.sqrt(),
        lambda_sq,
        exponent,
        scaled,
        kappa,
        method,
        pass: scaled <= kappa,
    })
}

fn to_u128(b: BigUint) -> u128 {
    b.to_u128().unwrap_or(u128::MAX)
}

/// Exact distances between the edge distributions for one subset `B'` of
/// the right side.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingTrial {
    pub subset_size: usize,
    pub mu: f64,
    pub tv12: String,
    pub tv12_value: f64,
    pub bound12: f64,
    pub pass12: bool,
    pub tv34: Option<String>,
    pub tv34_value: Option<f64>,
    pub bound34: Option<f64>,
    pub pass34: Option<bool>,
}

impl SamplingTrial {
    pub fn pass(&self) -> bool {
        self.pass12 && self.pass34.unwrap_or(true)
    }
}

/// A graph with `λ` and (if it holds) the constant co-degree of its right
/// side precomputed.
pub struct SamplingContext<'g> {
    g: &'g InclusionGraph,
    pub lambda: f64,
    pub co_degree: Option<usize>,
}

fn pos(x: BigRational) -> BigRational {
    if x.is_positive() {
        x
    } else {
        BigRational::zero()
    }
}

fn frac(n: usize, d: u128) -> BigRational {
    ratio(BigInt::from(n), BigInt::from(d))
}

const TOL: f64 = 1e-12;

impl<'g> SamplingContext<'g> {
    pub fn new(g: &'g InclusionGraph, cap: u128) -> Result<Self> {
        let lambda = lambda(g)?.lambda;
        let co_degree = match g.right_co_degree(cap) {
            Ok(c) => Some(c),
            Err(Error::CoDegreeViolated) => None,
            Err(e) => return Err(e),
        };
        Ok(SamplingContext { g, lambda, co_degree })
    }

    /// Exact distances for the subset `b_prime` of the right side.
    ///
    /// `tv12`: an edge drawn as (b ∈ B' uniform, then a neighbour) against
    /// (a uniform, then a neighbour inside B', or ⊥). `tv34`, with `pairs`:
    /// (b1, b2 ∈ B' uniform, then a common neighbour) against (a uniform,
    /// then two neighbours inside B', or ⊥). Within each pair the non-⊥
    /// supports coincide, so the distance is the summed positive part of the
    /// first minus the second, aggregated by how many neighbours a has in B'.
    pub fn trial(&self, b_prime: &[usize], pairs: bool) -> Result<SamplingTrial> {
        let g = self.g;
        let nb = g.right_len();
        let mut inside = vec![false; nb];
        for &b in b_prime {
            if b >= nb {
                return Err(Error::Invalid(format!("subset index {b} out of range")));
            }
            inside[b] = true;
        }
        let size = inside.iter().filter(|&&x| x).count();
        if size == 0 {
            return Err(Error::Invalid("subset must be non-empty".into()));
        }
        let mu = size as f64 / nb as f64;
        let na = g.left_len() as u128;
        let (da, db) = (g.left_degree as u128, g.right_degree as u128);
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for a in 0..g.left_len() {
            let n = g.left_neighbors(a).iter().filter(|&&b| inside[b as usize]).count();
            if n > 0 {
                *hist.entry(n).or_default() += 1;
            }
        }
        let size_u = size as u128;
        let d1 = frac(1, size_u * db);
        let mut tv12 = BigRational::zero();
        for (&n, &cnt) in &hist {
            tv12 += pos(d1.clone() - frac(1, na * n as u128)) * BigInt::from(cnt * n);
        }
        let tv12_value = tv12.to_f64().unwrap_or(f64::NAN);
        let bound12 = self.lambda / mu.sqrt();
        let mut trial = SamplingTrial {
            subset_size: size,
            mu,
            tv12: tv12.to_string(),
            tv12_value,
            bound12,
            pass12: tv12_value <= bound12 + TOL,
            tv34: None,
            tv34_value: None,
            bound34: None,
            pass34: None,
        };
        if pairs {
            let c = self.co_degree.ok_or(Error::CoDegreeViolated)? as u128;
            let same = frac(1, size_u * size_u * db);
            let differ = frac(1, size_u * size_u * c);
            let mut tv34 = BigRational::zero();
            for (&n, &cnt) in &hist {
                let d4 = frac(1, na * (n * n) as u128);
                tv34 += pos(same.clone() - d4.clone()) * BigInt::from(cnt * n);
                tv34 += pos(differ.clone() - d4) * BigInt::from(cnt * n * (n - 1));
            }
            let v = tv34.to_f64().unwrap_or(f64::NAN);
            let bound = 2.0 * self.lambda / mu + 1.0 / (mu * mu * da as f64) + 1.0 / (mu * mu * nb as f64);
            trial.tv34 = Some(tv34.to_string());
            trial.tv34_value = Some(v);
            trial.bound34 = Some(bound);
            trial.pass34 = Some(v <= bound + TOL);
        }
        Ok(trial)
    }

    /// `(⟨Mf, Mf⟩, μ² + λ²μ)` for the indicator `f` of a right-side subset.
    pub fn inner_product_bound(&self, indicator: &[bool]) -> (f64, f64) {
        let g = self.g;
        let mu = indicator.iter().filter(|&&x| x).count() as f64 / indicator.len() as f64;
        let lhs = (0..g.left_len())
            .map(|a| {
                let hits = g.left_neighbors(a).iter().filter(|&&b| indicator[b as usize]).count();
                (hits as f64 / g.left_degree as f64).powi(2)
            })
            .sum::<f64>()
            / g.left_len() as f64;
        (lhs, mu * mu + self.lambda * self.lambda * mu)
    }
}

/// Many random subsets at several measures, plus random indicators for the
/// inner-product bound.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingSuite {
    pub graph: String,
    pub m: usize,
    pub q: u32,
    pub lambda: f64,
    pub co_degree: Option<usize>,
    pub seed: u64,
    pub trials: Vec<SamplingTrial>,
    pub trials_passed: usize,
    pub inner_checked: usize,
    pub inner_passed: usize,
    pub all_pass: bool,
}

pub fn sampling_suite(g: &InclusionGraph, mus: &[f64], trials: usize, pairs: bool, indicators: usize, seed: u64, cap: u128) -> Result<SamplingSuite> {
    if let Some(mu) = mus.iter().find(|&&mu| !(mu > 0.0 && mu <= 1.0)) {
        return Err(Error::Invalid(format!("measure {mu} outside (0, 1]")));
    }
    let ctx = SamplingContext::new(g, cap)?;
    let nb = g.right_len();
    let mut out = vec![];
    for (mi, &mu) in mus.iter().enumerate() {
        let size = ((mu * nb as f64).round() as usize).clamp(1, nb);
        for t in 0..trials {
            let mut r = rng::stream(seed, (mi * trials + t) as u64);
            let mut subset = rand::seq::index::sample(&mut r, nb, size).into_vec();
            subset.sort_unstable();
            out.push(ctx.trial(&subset, pairs)?);
        }
    }
    let mut inner_passed = 0;
    for i in 0..indicators {
        let mut r = rng::stream(seed, (1u64 << 32) + i as u64);
        let size = r.gen_range(1..=nb);
        let mut ind = vec![false; nb];
        for b in rand::seq::index::sample(&mut r, nb, size) {
            ind[b] = true;
        }
        let (lhs, rhs) = ctx.inner_product_bound(&ind);
        if lhs <= rhs + TOL {
            inner_passed += 1;
        }
    }
    let trials_passed = out.iter().filter(|t| t.pass()).count();
    Ok(SamplingSuite {
        graph: g.label.clone(),
        m: g.m,
        q: g.q,
        lambda: ctx.lambda,
        co_degree: ctx.co_degree,
        seed,
        all_pass: trials_passed == out.len() && inner_passed == indicators,
        trials: out,
        trials_passed,
        inner_checked: indicators,
        inner_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_CAP;
    use std::collections::BTreeMap;

    fn gf(p: u32) -> FieldCtx {
        FieldCtx::prime(p).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn g6_counts() {
        let f = gf(2);
        let g = build_graph(&f, GraphCase::G6, 3, DEFAULT_CAP).unwrap();
        assert_eq!((g.left_len(), g.right_len(), g.left_degree(), g.right_degree()), (8, 28, 7, 2));
        assert_eq!(case_counts(GraphCase::G4, 4, 3).3, 27);
        assert_eq!(case_counts(GraphCase::G1, 6, 2).1, 1395);
    }

    #[test]
    fn built_sizes_match_counts() {
        for (q, m) in [(2, 3), (2, 4), (3, 3), (3, 4)] {
            let f = gf(q);
            for case in GraphCase::ALL {
                let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap();
                let got = (g.left_len() as u128, g.right_len() as u128, g.left_degree() as u128, g.right_degree() as u128);
                assert_eq!(got, case_counts(case, m, q), "{case} q={q} m={m}");
            }
        }
    }

    #[test]
    fn complete_bipartite_has_zero_lambda() {
        let f = gf(3);
        let left: Vec<_> = all_points(3, 2).map(|x| AffineSubspace::point(&x)).collect();
        let g = InclusionGraph::custom(&f, "k", left, vec![AffineSubspace::whole(2)], DEFAULT_CAP).unwrap();
        assert_eq!(lambda(&g).unwrap().lambda, 0.0);
        assert!(lambda_svd(&g).unwrap().1 < 1e-12);
    }

    #[test]
    fn not_bi_regular_detected() {
        let f = gf(2);
        let left: Vec<_> = all_points(2, 2).map(|x| AffineSubspace::point(&x)).collect();
        let right = vec![SubspaceFamily::all(2, 1).enumerate(&f, DEFAULT_CAP).unwrap()[0].clone()];
        let err = InclusionGraph::custom(&f, "x", left, right, DEFAULT_CAP).unwrap_err();
        assert!(matches!(err, Error::NotBiRegular));
    }

    #[test]
    fn svd_and_walk_agree() {
        for (case, q, m) in [(GraphCase::G6, 2, 3), (GraphCase::G6, 3, 3), (GraphCase::G4, 2, 4), (GraphCase::G2, 2, 4), (GraphCase::G3, 2, 4), (GraphCase::G1, 2, 4), (GraphCase::G5, 3, 3)] {
            let f = gf(q);
            let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap();
            let (top, second) = lambda_svd(&g).unwrap();
            assert!(close(top, 1.0, 1e-12), "{case}: top {top}");
            let rep = lambda(&g).unwrap();
            assert!(close(rep.lambda, second, 1e-9), "{case}: {} vs {second}", rep.lambda);
            // walking from the other side gives the same value
            let other = deflated_top(g.walk_matrix(match g.smaller_side() {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            }).unwrap()).0;
            assert!(close(other, rep.lambda_sq, 1e-9));
        }
    }

    #[test]
    fn coincidence_matches_explicit() {
        for (case, q, m) in [(GraphCase::G2, 2, 4), (GraphCase::G3, 2, 4), (GraphCase::G4, 3, 4), (GraphCase::G5, 2, 5), (GraphCase::G6, 3, 3)] {
            let f = gf(q);
            let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap();
            let explicit = g.walk_matrix(Side::Left).unwrap();
            let counted = coincidence_walk(&f, case, m, DEFAULT_CAP).unwrap().unwrap();
            assert!((explicit - counted).amax() < 1e-12, "{case}");
        }
        assert!(coincidence_walk(&gf(2), GraphCase::G1, 6, DEFAULT_CAP).unwrap().is_none());
    }

    #[test]
    fn power_iteration_matches_dense() {
        for (case, q, m) in [(GraphCase::G6, 3, 3), (GraphCase::G1, 2, 4), (GraphCase::G3, 3, 4)] {
            let f = gf(q);
            let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap();
            let dense = deflated_top(g.walk_matrix(g.smaller_side()).unwrap()).0;
            let (pw, res) = power_top(&g, g.smaller_side()).unwrap();
            assert!(res <= POWER_TOL);
            assert!(close(pw, dense, 1e-8), "{case}: {pw} vs {dense}");
        }
    }

    #[test]
    fn closed_forms_match_small_graphs() {
        for (q, m) in [(2, 3), (2, 4), (3, 4), (2, 5)] {
            let f = gf(q);
            for case in [GraphCase::G2, GraphCase::G3, GraphCase::G4, GraphCase::G5, GraphCase::G6] {
                let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap();
                let emp = lambda(&g).unwrap().lambda_sq;
                let cf = closed_form(case, m, q).unwrap().to_f64().unwrap();
                assert!(close(emp, cf, 1e-9), "{case} q={q} m={m}: {emp} vs {cf}");
            }
        }
    }

    #[test]
    fn g1_closed_form_value() {
        assert_eq!(closed_form(GraphCase::G1, 6, 2).unwrap(), ratio(2.into(), 5.into()));
        assert_eq!(closed_form(GraphCase::G1, 6, 3).unwrap(), ratio(3.into(), 10.into()));
        assert!(closed_form(GraphCase::G1, 5, 2).is_none());
        let g6 = closed_form(GraphCase::G6, 3, 2).unwrap();
        assert_eq!(g6, ratio(3.into(), 7.into()));
    }

    #[test]
    fn g1_report_matches_closed_form() {
        let rep = case_report(&gf(2), GraphCase::G1, 6, DEFAULT_CAP).unwrap();
        assert_eq!(rep.method, Method::TwoStepWalkEigen);
        assert!(rep.residual.unwrap() <= 1e-6, "{rep:?}");
    }

    #[test]
    fn report_range_errors() {
        let f = gf(2);
        assert!(matches!(case_report(&f, GraphCase::G1, 4, DEFAULT_CAP), Err(Error::OutOfRange(_))));
        assert!(matches!(case_report(&f, GraphCase::G6, 2, DEFAULT_CAP), Err(Error::OutOfRange(_))));
        assert!(matches!(build_graph(&f, GraphCase::G4, 2, DEFAULT_CAP), Err(Error::OutOfRange(_))));
        assert!(matches!(build_graph(&f, GraphCase::G4, 6, 1000), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn case_list_parsing() {
        assert_eq!(GraphCase::parse_list("g1..g6").unwrap(), GraphCase::ALL.to_vec());
        assert_eq!(GraphCase::parse_list("G2, g5").unwrap(), vec![GraphCase::G2, GraphCase::G5]);
        assert!(GraphCase::parse_list("g7").is_err());
    }

    #[test]
    fn grassmann_values() {
        for (k, m, q) in [(1, 2, 2), (2, 5, 3), (3, 7, 2)] {
            let (v, mult) = grassmann_eigenvalue(0, k, m, q).unwrap();
            assert_eq!(v, ratio(1.into(), 1.into()));
            assert_eq!(mult, BigUint::from(1u32));
        }
        assert_eq!(grassmann_eigenvalue(1, 3, 6, 2).unwrap().0, ratio(35.into(), 98.into()));
        assert!(grassmann_eigenvalue(1, 3, 5, 2).is_err());
        assert!(grassmann_eigenvalue(3, 2, 6, 2).is_err());
        assert!(grassmann_eigenvalue(0, 0, 6, 2).is_err());
        for (k, m, q) in [(2, 4, 2), (2, 6, 3), (3, 7, 2)] {
            let total: BigUint = (0..=k).map(|j| grassmann_eigenvalue(j, k, m, q).unwrap().1).sum();
            assert_eq!(total, gaussian_binomial(m, k, q));
        }
    }

    #[test]
    fn grassmann_spectrum_small() {
        let c = check_grassmann_spectrum(&gf(2), 2, 4, DEFAULT_CAP).unwrap();
        assert!(c.pass, "{c:?}");
        let got: Vec<(String, u128)> = c.levels.iter().map(|l| (l.value.clone(), l.expected)).collect();
        assert_eq!(got, vec![("-1/6".into(), 20), ("1/6".into(), 14), ("1".into(), 1)]);
        assert!(check_grassmann_spectrum(&gf(3), 2, 4, DEFAULT_CAP).unwrap().pass);
        assert!(check_grassmann_spectrum(&gf(2), 1, 3, DEFAULT_CAP).unwrap().pass);
        assert!(check_grassmann_spectrum(&gf(2), 2, 3, DEFAULT_CAP).is_err());
    }

    #[test]
    fn projection_recovers_formula() {
        for (k, m, q) in [(2, 4, 2), (2, 5, 3), (3, 6, 2)] {
            let f = gf(q);
            let got = projected_eigenvalue(&f, k, k - 1, m, DEFAULT_CAP).unwrap();
            assert_eq!(got, grassmann_eigenvalue(1, k, m, q).unwrap().0, "k={k} m={m} q={q}");
        }
    }

    #[test]
    fn distance_two_reports() {
        let f = gf(2);
        assert!(matches!(verify_distance_two(&f, 1, 6, DEFAULT_CAP), Err(Error::OutOfRange(_))));
        let r = verify_distance_two(&f, 2, 4, DEFAULT_CAP).unwrap();
        let far: f64 = r.far_f64;
        assert!(close(r.far_dense.unwrap(), far, 1e-9), "{r:?}");
    }

    #[test]
    fn subspace_lemma_examples() {
        let r = verify_subspace_lemma(&gf(2), 0, 1, 3, 6, DEFAULT_KAPPA, DEFAULT_CAP).unwrap();
        assert!(r.pass);
        assert!(r.lambda * 2.0 >= 0.5 && r.lambda * 2.0 <= 2.0, "{r:?}");
        // same graph as case G2
        let g2 = closed_form(GraphCase::G2, 6, 2).unwrap().to_f64().unwrap();
        assert!(close(r.lambda_sq, g2, 1e-9));
        let d = verify_subspace_lemma(&gf(3), 1, 1, 2, 4, DEFAULT_KAPPA, DEFAULT_CAP).unwrap();
        assert_eq!(d.exponent, 2);
        assert_eq!(d.lambda, 0.0);
        assert!(verify_subspace_lemma(&gf(2), 0, 1, 3, 5, 2.0, DEFAULT_CAP).is_err());
    }

    type Dist = BTreeMap<Option<Vec<usize>>, BigRational>;

    fn add(d: &mut Dist, key: Option<Vec<usize>>, p: BigRational) {
        *d.entry(key).or_insert_with(BigRational::zero) += p;
    }

    /// The four distributions, sampled literally.
    fn literal(g: &InclusionGraph, bp: &[usize]) -> [Dist; 4] {
        let nbrs_r = |b: usize| g.right_neighbors(b).iter().map(|&a| a as usize).collect::<Vec<_>>();
        let nbrs_l = |a: usize| g.left_neighbors(a).iter().map(|&b| b as usize).filter(|b| bp.contains(b)).collect::<Vec<_>>();
        let one = |n: usize| ratio(1.into(), BigInt::from(n));
        let mut d = [Dist::new(), Dist::new(), Dist::new(), Dist::new()];
        for &b in bp {
            let n = nbrs_r(b);
            for &a in &n {
                add(&mut d[0], Some(vec![a, b]), one(bp.len()) * one(n.len()));
            }
        }
        for a in 0..g.left_len() {
            let n = nbrs_l(a);
            if n.is_empty() {
                add(&mut d[1], None, one(g.left_len()));
                add(&mut d[3], None, one(g.left_len()));
                continue;
            }
            for &b in &n {
                add(&mut d[1], Some(vec![a, b]), one(g.left_len()) * one(n.len()));
                for &b2 in &n {
                    add(&mut d[3], Some(vec![a, b, b2]), one(g.left_len()) * one(n.len() * n.len()));
                }
            }
        }
        for &b1 in bp {
            for &b2 in bp {
                let n1 = nbrs_r(b1);
                let common: Vec<usize> = nbrs_r(b2).into_iter().filter(|a| n1.contains(a)).collect();
                for &a in &common {
                    add(&mut d[2], Some(vec![a, b1, b2]), one(bp.len() * bp.len()) * one(common.len()));
                }
            }
        }
        d
    }

    fn tv(a: &Dist, b: &Dist) -> BigRational {
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
        let z = BigRational::zero();
        let s: BigRational = keys.into_iter().map(|k| (a.get(k).unwrap_or(&z) - b.get(k).unwrap_or(&z)).abs()).sum();
        s / BigRational::from_integer(2.into())
    }

    #[test]
    fn sampling_matches_literal_distributions() {
        let f = gf(2);
        for (case, m) in [(GraphCase::G6, 3), (GraphCase::G4, 3), (GraphCase::G4, 4)] {
            let g = build_graph(&f, case, m, DEFAULT_CAP).unwrap().swapped();
            let ctx = SamplingContext::new(&g, DEFAULT_CAP).unwrap();
            for seed in 0..5u64 {
                let mut r = rng::seeded(seed);
                let size = r.gen_range(1..=g.right_len());
                let mut bp = rand::seq::index::sample(&mut r, g.right_len(), size).into_vec();
                bp.sort_unstable();
                let d = literal(&g, &bp);
                for dist in &d {
                    let total: BigRational = dist.values().sum();
                    assert_eq!(total, BigRational::from_integer(1.into()));
                }
                let t = ctx.trial(&bp, true).unwrap();
                assert_eq!(t.tv12, tv(&d[0], &d[1]).to_string());
                assert_eq!(t.tv34.clone().unwrap(), tv(&d[2], &d[3]).to_string());
                assert!(t.pass(), "{t:?}");
            }
        }
    }

    #[test]
    fn full_subset_gives_equal_distributions() {
        let f = gf(2);
        let g = build_graph(&f, GraphCase::G6, 3, DEFAULT_CAP).unwrap().swapped();
        let ctx = SamplingContext::new(&g, DEFAULT_CAP).unwrap();
        let all: Vec<usize> = (0..g.right_len()).collect();
        assert_eq!(ctx.trial(&all, false).unwrap().tv12, "0");
    }

    #[test]
    fn co_degree_checks() {
        let f = gf(2);
        let g = build_graph(&f, GraphCase::G6, 3, DEFAULT_CAP).unwrap();
        assert!(matches!(g.right_co_degree(DEFAULT_CAP), Err(Error::CoDegreeViolated)));
        assert_eq!(g.swapped().right_co_degree(DEFAULT_CAP).unwrap(), 1);
        let ctx = SamplingContext::new(&g, DEFAULT_CAP).unwrap();
        assert!(matches!(ctx.trial(&[0, 1], true), Err(Error::CoDegreeViolated)));
        assert!(ctx.trial(&[0, 1], false).unwrap().pass12);
    }

    #[test]
    fn suite_is_deterministic() {
        let f = gf(2);
        let g = build_graph(&f, GraphCase::G6, 3, DEFAULT_CAP).unwrap().swapped();
        let a = sampling_suite(&g, &[0.25, 0.5], 5, true, 20, 9, DEFAULT_CAP).unwrap();
        let b = sampling_suite(&g, &[0.25, 0.5], 5, true, 20, 9, DEFAULT_CAP).unwrap();
        assert!(a.all_pass);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(sampling_suite(&g, &[0.0], 1, false, 0, 1, DEFAULT_CAP).is_err());
    }
}
