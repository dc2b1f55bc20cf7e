//! Decoding a subspace table into a global low-degree polynomial.
//!
//! For a point x and value σ let `C_{x,σ}` be the entries through x whose
//! value at x is σ. The conditional plurality `f_{x,σ}(y)` is the most common
//! value `T(C)(y)` over the members of `C_{x,σ}` through y. A pair is
//! excellent when `C_{x,σ}` carries at least ε/2 of the entries through x
//! and two of its members sharing a random line through x rarely disagree
//! on that line. The decoder ranks candidate points by how many entries
//! through x nearly agree with `f_{x,σ}`, self-corrects the best functions
//! into polynomials and scores each polynomial by its exact support.

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::{agreement_exact, TestSpec};
use crate::error::{check_cap, Error, Result};
use crate::field::{FieldCtx, FieldElem};
use crate::geometry::{all_points, gauss, point_code, point_from_code, qpow, Point, SubspaceIndex};
use crate::polynomial::{interpolate, unisolvent_points, GlobalPoly, MonomialGrid};
use crate::rng;
use crate::table::SubspaceTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderMode {
    /// Requires γ ≤ 1/(100(d+2)³) and gates candidates on both excellence
    /// conditions.
    Faithful,
    /// Gates on the mass condition only; the line-consistency rate is used
    /// for ranking and diagnostics.
    Practical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    /// Mass threshold; `None` means the table's exact point-check agreement.
    pub epsilon: Option<f64>,
    /// Consistency parameter; `None` picks the mode's default.
    pub gamma: Option<f64>,
    pub mode: DecoderMode,
    /// Number of candidate points (all points when at least q^m).
    pub n_candidates: usize,
    /// Number of top-ranked candidates passed to self-correction per round.
    pub n_correct: usize,
    /// Sampled directions per point in self-correction; 0 means all.
    pub rs_samples: u64,
    pub seed: u64,
    /// Iterate on the entries not yet explained (an extension).
    pub list: bool,
    /// Smallest support fraction accepted in list mode after the first round.
    pub min_support: f64,
    pub max_rounds: usize,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams {
            epsilon: None,
            gamma: None,
            mode: DecoderMode::Practical,
            n_candidates: 12,
            n_correct: 3,
            rs_samples: 48,
            seed: 0,
            list: false,
            min_support: 0.1,
            max_rounds: 4,
        }
    }
}

/// 1/(100(d+2)³).
pub fn faithful_gamma(d: usize) -> f64 {
    1.0 / (100.0 * ((d + 2) as f64).powi(3))
}

impl DecoderParams {
    pub fn resolved_gamma(&self, d: usize) -> Result<f64> {
        let g = self.gamma.unwrap_or(match self.mode {
            DecoderMode::Faithful => faithful_gamma(d),
            DecoderMode::Practical => 0.05,
        });
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Invalid(format!("gamma = {g} is not in (0, 1)")));
        }
        if self.mode == DecoderMode::Faithful && g > faithful_gamma(d) {
            return Err(Error::Invalid(format!("faithful mode needs gamma <= {}", faithful_gamma(d))));
        }
        Ok(g)
    }
}

/// Excellence statistics of a pair (x, σ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcellenceStats {
    /// Fraction of entries through x with value σ at x.
    pub mass: f64,
    /// Probability that two members of `C_{x,σ}` sharing a random line
    /// through x disagree on it.
    pub fail: f64,
    pub excellent: bool,
}

/// Conditional plurality function and its vote diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Plurality {
    /// Values indexed by point code.
    pub values: Vec<FieldElem>,
    /// Points with at least one vote.
    pub voted: usize,
    /// Whether the plurality frequency is at least the collision
    /// probability at every voted point (always true; checked from counts).
    pub beats_collision: bool,
    /// Fraction of (C, y ∈ C) pairs, C uniform in `C_{x,σ}`, with
    /// `f(y) = T(C)(y)`.
    pub self_consistency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub x: Vec<u16>,
    pub sigma: u16,
    pub mass: f64,
    pub fail: f64,
    pub excellent: bool,
    pub passes_gate: bool,
    /// Entries through x agreeing with `f_{x,σ}` on at least 1 − 2γ of
    /// their points.
    pub support: usize,
    pub through_x: usize,
    pub self_consistency: f64,
    pub beats_collision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedPoly {
    pub g: GlobalPoly,
    /// Exact count of entries equal to the restriction of g, over the
    /// number of entries (unreduced).
    pub support: String,
    pub support_value: f64,
    pub x: Vec<u16>,
    pub sigma: u16,
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub epsilon: f64,
    pub gamma: f64,
    pub excellent_candidates: usize,
    pub rounds: usize,
    pub list_extension: bool,
    pub candidates: Vec<Vec<CandidateSummary>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub table_hash: String,
    pub params: DecoderParams,
    pub candidates_examined: usize,
    pub results: Vec<DecodedPoly>,
    pub diagnostics: Diagnostics,
}

/// Precomputed structure shared by all candidates of one table.
struct Workspace<'a> {
    t: &'a SubspaceTable,
    grid: MonomialGrid,
    /// Per linear s-space: (line id, local direction) of each line through
    /// the origin, direction scaled so the global vector is in RREF.
    lines: Vec<Vec<(u32, Vec<FieldElem>)>>,
    ints: Vec<FieldElem>,
}

impl<'a> Workspace<'a> {
    fn new(t: &'a SubspaceTable) -> Result<Self> {
        let f = t.field();
        let (m, s) = (t.m(), t.s());
        if s < 1 {
            return Err(Error::Invalid("entries must have dimension at least 1".into()));
        }
        let line_index = SubspaceIndex::new(f, m, 1, u128::MAX)?;
        let local_dirs = crate::geometry::linear_rrefs(f, s, 1, u128::MAX)?;
        let idx = t.index();
        let lines = (0..idx.linear_count())
            .map(|lid| {
                let rows = idx.linear_rows(lid);
                local_dirs
                    .iter()
                    .map(|d| {
                        let u = &d[0];
                        let mut w = vec![FieldElem::ZERO; m];
                        for (j, &uj) in u.iter().enumerate() {
                            for (wc, &rc) in w.iter_mut().zip(&rows[j]) {
                                *wc = f.add(*wc, f.mul(uj, rc));
                            }
                        }
                        let lead = *w.iter().find(|e| !e.is_zero()).expect("nonzero direction");
                        let inv = f.inv(lead).unwrap();
                        let w: Vec<FieldElem> = w.iter().map(|&e| f.mul(e, inv)).collect();
                        let lid1 = line_index.linear_id(&[w]).expect("line direction") as u32;
                        (lid1, u.iter().map(|&e| f.mul(e, inv)).collect())
                    })
                    .collect()
            })
            .collect();
        let ints = (0..=t.d() as i64 + 1).map(|i| f.from_int(i)).collect();
        Ok(Workspace { t, grid: MonomialGrid::new(f, s, t.d()), lines, ints })
    }

    fn through(&self, x: &[FieldElem], mask: Option<&[bool]>) -> Vec<usize> {
        let idx = self.t.index();
        (0..idx.linear_count())
            .map(|lid| idx.index_through(self.t.field(), lid, x))
            .filter(|&i| mask.is_none_or(|m| !m[i]))
            .collect()
    }

    fn value_at(&self, ci: usize, x: &[FieldElem], scratch: &mut [FieldElem]) -> FieldElem {
        let piv = self.t.index().linear_pivots(self.t.index().linear_of(ci));
        let mut tx = [FieldElem::ZERO; 16];
        for (o, &p) in tx.iter_mut().zip(piv) {
            *o = x[p];
        }
        self.t.eval_local(ci, &tx[..piv.len()], scratch)
    }

    /// Mass of each σ among `cover`, argmax with ties to the smallest.
    fn best_sigma(&self, x: &[FieldElem], cover: &[usize]) -> (FieldElem, usize) {
        let mut scratch = vec![FieldElem::ZERO; self.t.basis().len()];
        let mut counts = vec![0usize; self.t.field().q() as usize];
        for &ci in cover {
            counts[self.value_at(ci, x, &mut scratch).0 as usize] += 1;
        }
        let (best, n) = counts.iter().enumerate().fold((0, 0), |acc, (v, &n)| if n > acc.1 { (v, n) } else { acc });
        (FieldElem(best as u16), n)
    }

    /// Point codes and entry values of every point of entry `ci`.
    fn entry_points(&self, ci: usize, base: &mut [FieldElem], codes: &mut Vec<u64>, vals: &mut Vec<FieldElem>) {
        let t = self.t;
        t.index().point_codes_into(t.field(), ci, base, codes);
        self.grid.eval_all(t.field(), t.entry_coeffs(ci), vals);
    }

    fn plurality(&self, cond: &[usize]) -> Plurality {
        let t = self.t;
        let f = t.field();
        let q = f.q() as usize;
        let n_points = qpow(f.q(), t.m()) as usize;
        let mut votes = vec![0u32; n_points * q];
        let mut base = vec![FieldElem::ZERO; t.m()];
        let mut codes = Vec::with_capacity(self.grid.points());
        let mut vals = Vec::with_capacity(self.grid.points());
        let mut pairs: Vec<(u32, FieldElem)> = Vec::with_capacity(cond.len() * self.grid.points());
        for &ci in cond {
            self.entry_points(ci, &mut base, &mut codes, &mut vals);
            for (&y, &v) in codes.iter().zip(&vals) {
                votes[y as usize * q + v.0 as usize] += 1;
                pairs.push((y as u32, v));
            }
        }
        let mut values = vec![FieldElem::ZERO; n_points];
        let mut voted = 0;
        let mut beats = true;
        for (y, row) in votes.chunks(q).enumerate() {
            let total: u64 = row.iter().map(|&c| c as u64).sum();
            if total == 0 {
                continue;
            }
            voted += 1;
            let (best, top) = row.iter().enumerate().fold((0, 0u32), |acc, (v, &n)| if n > acc.1 { (v, n) } else { acc });
            values[y] = FieldElem(best as u16);
            let sq: u64 = row.iter().map(|&c| (c as u64) * (c as u64)).sum();
            // top/total >= sq/total²
            beats &= (top as u128) * (total as u128) >= sq as u128;
        }
        let hits = pairs.iter().filter(|(y, v)| values[*y as usize] == *v).count();
        Plurality {
            values,
            voted,
            beats_collision: beats,
            self_consistency: if pairs.is_empty() { 0.0 } else { hits as f64 / pairs.len() as f64 },
        }
    }

    /// Exact line-consistency failure rate of `C_{x,σ}`.
    fn line_failure(&self, x: &[FieldElem], cond: &[usize]) -> Result<f64> {
        if cond.is_empty() {
            return Err(Error::EmptyConditional(1.0));
        }
        let t = self.t;
        let f = t.field();
        let d = t.d();
        let mut scratch = vec![FieldElem::ZERO; t.basis().len()];
        let mut keyed: Vec<(u32, u64)> = Vec::with_capacity(cond.len() * self.lines[0].len());
        let mut pt = vec![FieldElem::ZERO; t.s()];
        for &ci in cond {
            let lid = t.index().linear_of(ci);
            let tx: Vec<FieldElem> = t.index().linear_pivots(lid).iter().map(|&p| x[p]).collect();
            for (line, dir) in &self.lines[lid] {
                // the restriction to x + span(dir) is fixed by its values at
                // x + i·dir, i = 1..d (the value at x is σ for all members)
                let mut key = 0u64;
                for i in 1..=d {
                    for ((p, &a), &b) in pt.iter_mut().zip(&tx).zip(dir) {
                        *p = f.add(a, f.mul(self.ints[i], b));
                    }
                    key = key * f.q() as u64 + t.eval_local(ci, &pt, &mut scratch).0 as u64;
                }
                keyed.push((*line, key));
            }
        }
        keyed.sort_unstable();
        // Σ_ℓ (n_ℓ − Σ_key n²/n_ℓ) / (|C_{x,σ}| · lines per entry)
        let mut total = 0.0;
        let mut i = 0;
        while i < keyed.len() {
            let mut j = i;
            let mut sq = 0u64;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                let mut k = j;
                while k < keyed.len() && keyed[k] == keyed[j] {
                    k += 1;
                }
                sq += ((k - j) as u64).pow(2);
                j = k;
            }
            let n = (j - i) as f64;
            total += n - sq as f64 / n;
            i = j;
        }
        Ok(total / keyed.len() as f64)
    }

    fn support(&self, cover: &[usize], values: &[FieldElem], gamma: f64) -> usize {
        let n = self.grid.points();
        let need = ((1.0 - 2.0 * gamma) * n as f64 - 1e-9).ceil() as usize;
        let mut base = vec![FieldElem::ZERO; self.t.m()];
        let (mut codes, mut vals) = (Vec::with_capacity(n), Vec::with_capacity(n));
        cover
            .iter()
            .filter(|&&ci| {
                self.entry_points(ci, &mut base, &mut codes, &mut vals);
                codes.iter().zip(&vals).filter(|(&y, &v)| values[y as usize] == v).count() >= need
            })
            .count()
    }

    fn conditional(&self, x: &[FieldElem], sigma: FieldElem, cover: &[usize]) -> Vec<usize> {
        let mut scratch = vec![FieldElem::ZERO; self.t.basis().len()];
        cover.iter().copied().filter(|&ci| self.value_at(ci, x, &mut scratch) == sigma).collect()
    }
}

fn check_table(t: &SubspaceTable) -> Result<()> {
    if t.s() < 2 {
        return Err(Error::Invalid("decoding needs entries of dimension at least 2".into()));
    }
    check_rs_degree(t.field(), t.d())
}

fn check_point(t: &SubspaceTable, x: &[FieldElem]) -> Result<()> {
    if x.len() != t.m() || x.iter().any(|e| e.value() >= t.field().q()) {
        return Err(Error::AmbientMismatch);
    }
    Ok(())
}

/// `f_{x,σ}` over all of F^m (values indexed by point code); 0 where no
/// member of `C_{x,σ}` passes through y.
pub fn conditional_plurality(t: &SubspaceTable, x: &[FieldElem], sigma: FieldElem) -> Result<Plurality> {
    check_point(t, x)?;
    let ws = Workspace::new(t)?;
    let cover = ws.through(x, None);
    Ok(ws.plurality(&ws.conditional(x, sigma, &cover)))
}

/// Exact excellence statistics of (x, σ).
pub fn excellence_check(t: &SubspaceTable, x: &[FieldElem], sigma: FieldElem, epsilon: f64, gamma: f64) -> Result<ExcellenceStats> {
    check_point(t, x)?;
    let ws = Workspace::new(t)?;
    let cover = ws.through(x, None);
    let cond = ws.conditional(x, sigma, &cover);
    let fail = ws.line_failure(x, &cond)?;
    let mass = cond.len() as f64 / cover.len() as f64;
    Ok(ExcellenceStats { mass, fail, excellent: mass >= epsilon / 2.0 && fail <= gamma })
}

fn check_rs_degree(f: &FieldCtx, d: usize) -> Result<()> {
    if d + 2 > f.q() as usize || d + 1 >= f.p() as usize {
        return Err(Error::DegreeTooHigh { d, q: f.q() });
    }
    Ok(())
}

/// `α_i = C(d+1, i)(−1)^{i+1}` reduced into the field, i = 0..=d+1.
pub fn rs_coefficients(f: &FieldCtx, d: usize) -> Vec<FieldElem> {
    let mut binom = 1i64;
    let p = f.p() as i64;
    (0..=d + 1)
        .map(|i| {
            if i > 0 {
                binom = binom * (d + 2 - i) as i64 / i as i64;
            }
            let sign = if i % 2 == 1 { 1 } else { -1 };
            f.from_int((sign * (binom % p)) % p)
        })
        .collect()
}

/// How [`rs_correct`] visits directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Directions {
    All,
    Sampled { per_point: u64, seed: u64 },
}

fn add_scaled(f: &FieldCtx, y: &[FieldElem], c: FieldElem, h: &[FieldElem], out: &mut [FieldElem]) {
    for ((o, &a), &b) in out.iter_mut().zip(y).zip(h) {
        *o = f.add(a, f.mul(c, b));
    }
}

/// Self-corrects `f` (values by point code over F^m) to a degree-≤d
/// polynomial: `g(y)` is the strict plurality over directions h of
/// `Σ_{i=1}^{d+1} α_i f(y + i·h)`; the result is verified by interpolation.
pub fn rs_correct(field: &FieldCtx, values: &[FieldElem], m: usize, d: usize, dirs: Directions, cap: u128) -> Result<GlobalPoly> {
    check_rs_degree(field, d)?;
    let q = field.q();
    let n = qpow(q, m);
    if values.len() as u128 != n {
        return Err(Error::AmbientMismatch);
    }
    let alpha = rs_coefficients(field, d);
    let ints: Vec<FieldElem> = (0..=d as i64 + 1).map(|i| field.from_int(i)).collect();
    if let Directions::All = dirs {
        check_cap(n.saturating_mul(n), cap)?;
    }
    let corrected: Vec<Option<FieldElem>> = (0..n as u64)
        .into_par_iter()
        .map(|yc| {
            let y = point_from_code(q, m, yc);
            let mut counts = vec![0u64; q as usize];
            let mut pt = vec![FieldElem::ZERO; m];
            let mut vote = |h: &[FieldElem]| {
                let mut acc = FieldElem::ZERO;
                for i in 1..=d + 1 {
                    add_scaled(field, &y, ints[i], h, &mut pt);
                    acc = field.add(acc, field.mul(alpha[i], values[point_code(q, &pt) as usize]));
                }
                counts[acc.0 as usize] += 1;
            };
            match dirs {
                Directions::All => {
                    for hc in 0..n as u64 {
                        vote(&point_from_code(q, m, hc));
                    }
                }
                Directions::Sampled { per_point, seed } => {
                    let mut g = rng::stream(seed, yc);
                    let mut h = vec![FieldElem::ZERO; m];
                    for _ in 0..per_point {
                        h.iter_mut().for_each(|e| *e = field.random(&mut g));
                        vote(&h);
                    }
                }
            }
            let top = *counts.iter().max().unwrap();
            let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == top);
            let (v, _) = winners.next().unwrap();
            winners.next().is_none().then_some(FieldElem(v as u16))
        })
        .collect();
    let g: Vec<FieldElem> = corrected
        .into_iter()
        .enumerate()
        .map(|(yc, v)| v.ok_or_else(|| Error::NotCorrectable(format!("no strict plurality at point {yc}"))))
        .collect::<Result<_>>()?;
    let samples: Vec<(Vec<FieldElem>, FieldElem)> = unisolvent_points(m, d)
        .into_iter()
        .map(|u| {
            let v = g[point_code(q, &u) as usize];
            (u, v)
        })
        .collect();
    let poly = interpolate(field, &samples, m, d)?;
    if poly.evaluate_all(field) != g {
        return Err(Error::NotCorrectable(format!("corrected function is not of degree {d}")));
    }
    Ok(poly)
}

/// Exact probability over uniform (y, h) that f restricted to
/// `{y + i(h − y) : i = 0..d+1}` fits a univariate polynomial of degree ≤ d.
pub fn rs_neighborhood_rate(field: &FieldCtx, values: &[FieldElem], m: usize, d: usize, cap: u128) -> Result<Ratio<u128>> {
    check_rs_degree(field, d)?;
    let q = field.q();
    let n = qpow(q, m);
    if values.len() as u128 != n {
        return Err(Error::AmbientMismatch);
    }
    check_cap(n.saturating_mul(n), cap)?;
    let mut alpha = rs_coefficients(field, d);
    alpha[0] = field.neg(FieldElem::ONE);
    let ints: Vec<FieldElem> = (0..=d as i64 + 1).map(|i| field.from_int(i)).collect();
    let hits: u128 = (0..n as u64)
        .into_par_iter()
        .map(|yc| {
            let y = point_from_code(q, m, yc);
            let mut step = vec![FieldElem::ZERO; m];
            let mut pt = vec![FieldElem::ZERO; m];
            let mut hits = 0u128;
            for hc in 0..n as u64 {
                let h = point_from_code(q, m, hc);
                for ((s, &a), &b) in step.iter_mut().zip(&h).zip(&y) {
                    *s = field.sub(a, b);
                }
                let mut acc = FieldElem::ZERO;
                for i in 0..=d + 1 {
                    add_scaled(field, &y, ints[i], &step, &mut pt);
                    acc = field.add(acc, field.mul(alpha[i], values[point_code(q, &pt) as usize]));
                }
                hits += acc.is_zero() as u128;
            }
            hits
        })
        .sum();
    Ok(Ratio::new(hits, n * n))
}

/// Fraction of points where two value vectors differ.
pub fn disagreement(a: &[FieldElem], b: &[FieldElem]) -> f64 {
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    diff as f64 / a.len().max(1) as f64
}

struct Scored {
    x: Point,
    sigma: FieldElem,
    values: Vec<FieldElem>,
    summary: CandidateSummary,
}

fn candidate_points(t: &SubspaceTable, n: usize, seed: u64) -> Vec<Point> {
    let q = t.field().q();
    let total = qpow(q, t.m());
    if n as u128 >= total {
        return all_points(q, t.m()).collect();
    }
    let mut g = rng::stream(seed, 0);
    let mut codes = std::collections::BTreeSet::new();
    let mut order = vec![];
    while order.len() < n {
        let c = g.gen_range(0..total as u64);
        if codes.insert(c) {
            order.push(c);
        }
    }
    order.into_iter().map(|c| point_from_code(q, t.m(), c)).collect()
}

/// Exact support of `g`: the fraction of all entries equal to its restriction.
pub fn exact_support(t: &SubspaceTable, g: &GlobalPoly) -> Ratio<u128> {
    let hits = t.support_mask(g).iter().filter(|&&b| b).count();
    Ratio::new(hits as u128, t.len() as u128)
}

/// Runs the decoding pipeline.
pub fn decode(t: &SubspaceTable, params: &DecoderParams, cap: u128) -> Result<DecodeReport> {
    check_table(t)?;
    let gamma = params.resolved_gamma(t.d())?;
    if params.n_candidates == 0 || params.n_correct == 0 {
        return Err(Error::Invalid("need at least one candidate".into()));
    }
    let epsilon = match params.epsilon {
        Some(e) => e,
        None => agreement_exact(t, TestSpec { s: t.s(), k: 0, r: 0 }, cap)?.value,
    };
    let ws = Workspace::new(t)?;
    let q = t.field().q();
    let points = candidate_points(t, params.n_candidates, params.seed);
    let through_total = gauss(t.m(), t.s(), q) as usize;
    let mut mask = vec![false; t.len()];
    let mut results: Vec<DecodedPoly> = vec![];
    let mut all_candidates = vec![];
    let mut excellent_first = 0;
    let rounds = if params.list { params.max_rounds.max(1) } else { 1 };

    for round in 0..rounds {
        let masked = round > 0;
        let mut scored: Vec<Scored> = points
            .par_iter()
            .map(|x| -> Result<Option<Scored>> {
                let cover = ws.through(x, masked.then_some(&mask[..]));
                if cover.is_empty() {
                    return Ok(None);
                }
                let (sigma, hits) = ws.best_sigma(x, &cover);
                let cond = ws.conditional(x, sigma, &cover);
                debug_assert_eq!(cond.len(), hits);
                let mass = hits as f64 / cover.len() as f64;
                let fail = ws.line_failure(x, &cond)?;
                let excellent = mass >= epsilon / 2.0 && fail <= gamma;
                let passes_gate = match params.mode {
                    DecoderMode::Faithful => excellent,
                    DecoderMode::Practical => mass >= epsilon / 2.0,
                };
                let pl = ws.plurality(&cond);
                let support = ws.support(&cover, &pl.values, gamma);
                let summary = CandidateSummary {
                    x: x.iter().map(|e| e.0).collect(),
                    sigma: sigma.0,
                    mass,
                    fail,
                    excellent,
                    passes_gate,
                    support,
                    through_x: cover.len(),
                    self_consistency: pl.self_consistency,
                    beats_collision: pl.beats_collision,
                };
                Ok(Some(Scored { x: x.clone(), sigma, values: pl.values, summary }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        debug_assert!(scored.iter().all(|s| s.summary.through_x <= through_total));
        if round == 0 {
            excellent_first = scored.iter().filter(|s| s.summary.excellent).count();
        }
        all_candidates.push(scored.iter().map(|s| s.summary.clone()).collect::<Vec<_>>());
        scored.retain(|s| s.summary.passes_gate);
        scored.sort_by(|a, b| {
            b.summary
                .support
                .cmp(&a.summary.support)
                .then(a.summary.fail.total_cmp(&b.summary.fail))
                .then(point_code(q, &a.x).cmp(&point_code(q, &b.x)))
        });
        let mut best: Option<(usize, usize, GlobalPoly, &Scored)> = None;
        for cand in scored.iter().take(params.n_correct) {
            let dirs = if params.rs_samples == 0 {
                Directions::All
            } else {
                Directions::Sampled { per_point: params.rs_samples, seed: params.seed.wrapping_add(1 + round as u64) }
            };
            let Ok(g) = rs_correct(t.field(), &cand.values, t.m(), t.d(), dirs, cap) else {
                continue;
            };
            if results.iter().any(|r| r.g == g) {
                continue;
            }
            let mask_g = t.support_mask(&g);
            let fresh = mask_g.iter().zip(&mask).filter(|(&a, &b)| a && !b).count();
            if best.as_ref().is_none_or(|b| fresh > b.1) {
                let hits = mask_g.iter().filter(|&&b| b).count();
                best = Some((hits, fresh, g, cand));
            }
        }
        let Some((hits, fresh, g, cand)) = best else {
            break;
        };
        if round > 0 && (fresh as f64) < params.min_support * t.len() as f64 {
            break;
        }
        for (m, hit) in mask.iter_mut().zip(t.support_mask(&g)) {
            *m |= hit;
        }
        results.push(DecodedPoly {
            support: format!("{hits}/{}", t.len()),
            support_value: hits as f64 / t.len() as f64,
            x: cand.x.iter().map(|e| e.0).collect(),
            sigma: cand.sigma.0,
            g,
            round,
        });
    }
    if results.is_empty() {
        return Err(Error::NoCandidate);
    }
    results.sort_by(|a, b| {
        b.support_value
            .total_cmp(&a.support_value)
            .then_with(|| serde_json::to_string(&a.g).unwrap().cmp(&serde_json::to_string(&b.g).unwrap()))
    });
    Ok(DecodeReport {
        table_hash: t.content_hash(),
        params: params.clone(),
        candidates_examined: points.len(),
        diagnostics: Diagnostics {
            epsilon,
            gamma,
            excellent_candidates: excellent_first,
            rounds: all_candidates.len(),
            list_extension: params.list,
            candidates: all_candidates,
        },
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::TableShape;
    use crate::polynomial::LocalPoly;

    fn shape(q: u32, m: usize, s: usize, d: usize) -> TableShape {
        TableShape::new(FieldCtx::prime(q).unwrap(), m, s, d).unwrap()
    }

    #[test]
    fn coefficients_match_binomials() {
        let f = FieldCtx::prime(7).unwrap();
        assert_eq!(rs_coefficients(&f, 1), vec![f.from_int(-1), f.from_int(2), f.from_int(-1)]);
        assert_eq!(rs_coefficients(&f, 2), vec![f.from_int(-1), f.from_int(3), f.from_int(-3), f.from_int(1)]);
    }

    #[test]
    fn honest_plurality_is_the_plant() {
        let sh = shape(5, 3, 2, 2);
        let g = sh.random_global(&mut rng::seeded(1));
        let t = SubspaceTable::gen_honest(&sh, &g, 0).unwrap();
        let f = t.field();
        let x = vec![FieldElem(1), FieldElem(2), FieldElem(0)];
        let pl = conditional_plurality(&t, &x, g.evaluate(f, &x)).unwrap();
        assert_eq!(pl.values, g.evaluate_all(f));
        assert_eq!(pl.self_consistency, 1.0);
        let ex = excellence_check(&t, &x, g.evaluate(f, &x), 1.0, 0.01).unwrap();
        assert_eq!((ex.mass, ex.fail, ex.excellent), (1.0, 0.0, true));
    }

    #[test]
    fn halfhalf_plurality_is_constant() {
        let sh = shape(5, 3, 2, 1);
        let t = SubspaceTable::gen_halfhalf(&sh, 3).unwrap();
        let x = vec![FieldElem(0); 3];
        let zero = conditional_plurality(&t, &x, FieldElem(0)).unwrap();
        assert!(zero.values.iter().all(|v| v.is_zero()));
        let one = conditional_plurality(&t, &x, FieldElem(1)).unwrap();
        assert!(one.values.iter().all(|&v| v == FieldElem(1)));
        assert!(zero.beats_collision && one.beats_collision);
    }

    #[test]
    fn empty_conditional_is_reported() {
        let sh = shape(5, 3, 2, 1);
        let t = SubspaceTable::gen_halfhalf(&sh, 3).unwrap();
        let x = vec![FieldElem(0); 3];
        assert!(matches!(excellence_check(&t, &x, FieldElem(3), 0.5, 0.1), Err(Error::EmptyConditional(_))));
    }

    /// Line-consistency failure by literal enumeration of (C1, ℓ, C2).
    fn brute_fail(t: &SubspaceTable, x: &[FieldElem], sigma: FieldElem) -> f64 {
        let f = t.field();
        let cond: Vec<usize> = (0..t.len())
            .filter(|&i| {
                let c = t.subspace(i);
                c.contains_point(f, x) && t.entry(i).evaluate(f, &c.local_coords_unchecked(x)) == sigma
            })
            .collect();
        let mut total = 0.0;
        for &c1 in &cond {
            let s1 = t.subspace(c1);
            let lines: Vec<_> = s1.subspaces(f, 1, u128::MAX).unwrap().into_iter().filter(|l| l.contains_point(f, x)).collect();
            for l in &lines {
                let partners: Vec<usize> = cond.iter().copied().filter(|&c2| t.subspace(c2).contains(f, l)).collect();
                let pts = l.points(f);
                let bad = partners
                    .iter()
                    .filter(|&&c2| {
                        let s2 = t.subspace(c2);
                        pts.iter().any(|p| {
                            t.entry(c1).evaluate(f, &s1.local_coords_unchecked(p)) != t.entry(c2).evaluate(f, &s2.local_coords_unchecked(p))
                        })
                    })
                    .count();
                total += bad as f64 / partners.len() as f64 / lines.len() as f64;
            }
        }
        total / cond.len() as f64
    }

    #[test]
    fn line_failure_matches_enumeration() {
        let sh = shape(5, 3, 2, 2);
        let g = sh.random_global(&mut rng::seeded(2));
        let t = SubspaceTable::gen_planted(&sh, &g, 0.6, 2).unwrap();
        let f = t.field();
        for x in [vec![FieldElem(0); 3], vec![FieldElem(4), FieldElem(1), FieldElem(3)]] {
            for sigma in [g.evaluate(f, &x), f.add(g.evaluate(f, &x), FieldElem::ONE)] {
                let ex = excellence_check(&t, &x, sigma, 0.1, 0.1).unwrap();
                assert!((ex.fail - brute_fail(&t, &x, sigma)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rs_correct_fixes_degree_d_input_and_rejects_bad_degree() {
        let f = FieldCtx::prime(7).unwrap();
        let g = LocalPoly::random(&f, 2, 2, &mut rng::seeded(3));
        let vals = g.evaluate_all(&f);
        assert_eq!(rs_correct(&f, &vals, 2, 2, Directions::All, u128::MAX).unwrap(), g);
        assert_eq!(rs_correct(&f, &vals, 2, 2, Directions::Sampled { per_point: 5, seed: 1 }, u128::MAX).unwrap(), g);
        let f5 = FieldCtx::prime(5).unwrap();
        let z = vec![FieldElem::ZERO; 25];
        assert!(matches!(rs_correct(&f5, &z, 2, 4, Directions::All, u128::MAX), Err(Error::DegreeTooHigh { .. })));
        let f8 = FieldCtx::new(2, 3, None).unwrap();
        assert!(matches!(rs_correct(&f8, &[FieldElem::ZERO; 64], 2, 1, Directions::All, u128::MAX), Err(Error::DegreeTooHigh { .. })));
    }

    #[test]
    fn rs_correct_recovers_from_sparse_corruption() {
        let f = FieldCtx::prime(11).unwrap();
        let g = LocalPoly::random(&f, 2, 2, &mut rng::seeded(4));
        let mut vals = g.evaluate_all(&f);
        for c in [3usize, 40, 77] {
            vals[c] = f.add(vals[c], FieldElem::ONE);
        }
        assert_eq!(rs_correct(&f, &vals, 2, 2, Directions::All, u128::MAX).unwrap(), g);
    }

    /// Brute force: does some univariate polynomial of degree ≤ d match f
    /// on y + i(h − y), i = 0..d+1?
    fn neighborhood_oracle(f: &FieldCtx, vals: &[FieldElem], m: usize, d: usize) -> Ratio<u128> {
        let q = f.q();
        let polys: Vec<LocalPoly> = all_points(q, d + 1).map(|c| LocalPoly::from_coeffs(1, d, c).unwrap()).collect();
        let mut hits = 0u128;
        for y in all_points(q, m) {
            for h in all_points(q, m) {
                let nb: Vec<FieldElem> = (0..=d as i64 + 1)
                    .map(|i| {
                        let c = f.from_int(i);
                        let p: Vec<FieldElem> = y.iter().zip(&h).map(|(&a, &b)| f.add(a, f.mul(c, f.sub(b, a)))).collect();
                        vals[point_code(q, &p) as usize]
                    })
                    .collect();
                let fits = polys.iter().any(|p| (0..=d as i64 + 1).all(|i| p.evaluate(f, &[f.from_int(i)]) == nb[i as usize]));
                hits += fits as u128;
            }
        }
        Ratio::new(hits, qpow(q, 2 * m))
    }

    #[test]
    fn neighborhood_rate_matches_brute_force() {
        let f = FieldCtx::prime(5).unwrap();
        let g = LocalPoly::random(&f, 2, 1, &mut rng::seeded(5));
        let clean = g.evaluate_all(&f);
        assert_eq!(rs_neighborhood_rate(&f, &clean, 2, 1, u128::MAX).unwrap(), Ratio::from_integer(1));
        let mut one = clean.clone();
        one[7] = f.add(one[7], FieldElem::ONE);
        assert_eq!(rs_neighborhood_rate(&f, &one, 2, 1, u128::MAX).unwrap(), neighborhood_oracle(&f, &one, 2, 1));
        let mut r = rng::seeded(6);
        let random: Vec<FieldElem> = (0..25).map(|_| f.random(&mut r)).collect();
        let rate = rs_neighborhood_rate(&f, &random, 2, 1, u128::MAX).unwrap();
        assert_eq!(rate, neighborhood_oracle(&f, &random, 2, 1));
        let v = *rate.numer() as f64 / *rate.denom() as f64;
        assert!(v > 0.15 && v < 0.45, "{v}");
    }

    #[test]
    fn decode_small_honest_and_random() {
        let sh = shape(7, 3, 2, 1);
        let g = sh.random_global(&mut rng::seeded(7));
        let t = SubspaceTable::gen_honest(&sh, &g, 0).unwrap();
        let rep = decode(&t, &DecoderParams::default(), u128::MAX).unwrap();
        assert_eq!(rep.results.len(), 1);
        assert_eq!(rep.results[0].g, g);
        assert_eq!(rep.results[0].support, format!("{}/{}", t.len(), t.len()));
        let r = SubspaceTable::gen_random(&sh, 7).unwrap();
        let p = DecoderParams { epsilon: Some(0.5), ..DecoderParams::default() };
        assert!(matches!(decode(&r, &p, u128::MAX), Err(Error::NoCandidate)));
    }

    #[test]
    fn params_validation() {
        let p = DecoderParams { mode: DecoderMode::Faithful, gamma: Some(0.05), ..DecoderParams::default() };
        assert!(matches!(p.resolved_gamma(2), Err(Error::Invalid(_))));
        assert_eq!(DecoderParams { mode: DecoderMode::Faithful, ..DecoderParams::default() }.resolved_gamma(2).unwrap(), 1.0 / 6400.0);
        assert!(matches!(DecoderParams { gamma: Some(1.5), ..DecoderParams::default() }.resolved_gamma(1), Err(Error::Invalid(_))));
    }
}
