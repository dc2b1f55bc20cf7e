//! Agreement tests on subspace tables.
//!
//! A test `(s, k, r)` picks a uniform affine k-subspace K, two independent
//! uniform s-subspaces S1, S2 containing K and a uniform r-subspace R of K,
//! and accepts iff `T(S1)|_R = T(S2)|_R`. The named tests are
//! cube-vs-cube `(3,0,0)`, plane-vs-plane on a line `(2,1,1)`, plane-vs-plane
//! at a point `(2,0,0)` and cube-vs-cube on a line `(3,1,1)`.
//!
//! The exact estimator is a collision sum: for each (K, R) the acceptance
//! probability is `Σ_σ n_σ² / N²` over the histogram of restrictions of the
//! N entries containing K. Diagonal pairs `S1 = S2` are included, as in the
//! sampling procedure.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_cap, Error, Result};
use crate::field::FieldElem;
use crate::geometry::{gauss, qpow, AffineSubspace, SubspaceFamily};
use crate::polynomial::{restrict_unchecked, MonomialGrid};
use crate::rng;
use crate::table::SubspaceTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestSpec {
    pub s: usize,
    pub k: usize,
    pub r: usize,
}

impl TestSpec {
    pub const CXC: TestSpec = TestSpec { s: 3, k: 0, r: 0 };
    pub const PLP: TestSpec = TestSpec { s: 2, k: 1, r: 1 };
    pub const PXP: TestSpec = TestSpec { s: 2, k: 0, r: 0 };
    pub const CLC: TestSpec = TestSpec { s: 3, k: 1, r: 1 };

    pub fn new(s: usize, k: usize, r: usize) -> Result<Self> {
        if !(r <= k && k < s) {
            return Err(Error::SpecInvalid(format!("need r <= k < s, got ({s},{k},{r})")));
        }
        Ok(TestSpec { s, k, r })
    }

    /// Accepts `cxc`, `plp`, `pxp`, `clc` or `s,k,r`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "cxc" => Ok(Self::CXC),
            "plp" => Ok(Self::PLP),
            "pxp" => Ok(Self::PXP),
            "clc" => Ok(Self::CLC),
            other => {
                let parts: Vec<usize> = other
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::SpecInvalid(format!("cannot parse test spec {text:?}")))?;
                match parts[..] {
                    [s, k, r] => Self::new(s, k, r),
                    _ => Err(Error::SpecInvalid(format!("cannot parse test spec {text:?}"))),
                }
            }
        }
    }

    fn check(&self, t: &SubspaceTable) -> Result<()> {
        Self::new(self.s, self.k, self.r)?;
        if self.s != t.s() {
            return Err(Error::SpecInvalid(format!("spec needs s={} but the table has s={}", self.s, t.s())));
        }
        if self.s > t.m() {
            return Err(Error::SpecInvalid(format!("s={} exceeds m={}", self.s, t.m())));
        }
        Ok(())
    }
}

impl std::fmt::Display for TestSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.s, self.k, self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgreementEstimate {
    pub spec: TestSpec,
    pub mode: Mode,
    /// Reduced exact value (exact mode only).
    pub exact: Option<Ratio<u128>>,
    pub value: f64,
    pub stderr: f64,
    /// Exact mode: the common denominator (number of equally likely
    /// outcomes). Monte-Carlo mode: number of simulated runs.
    pub samples: u128,
    pub seed: Option<u64>,
}

/// `"num/den"`, always with an explicit denominator.
pub fn ratio_string(r: &Ratio<u128>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn to_big(r: &Ratio<u128>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn big_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

impl AgreementEstimate {
    fn exact(spec: TestSpec, num: u128, den: u128) -> Self {
        let r = Ratio::new(num, den);
        AgreementEstimate {
            spec,
            mode: Mode::Exact,
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some(r),
            stderr: 0.0,
            samples: den,
            seed: None,
        }
    }

    pub fn value_string(&self) -> String {
        match &self.exact {
            Some(r) => ratio_string(r),
            None => format!("{}", self.value),
        }
    }

    pub fn report(&self, table_hash: &str, inequalities: Vec<Inequality>) -> AgreementReport {
        AgreementReport {
            table_hash: table_hash.to_string(),
            spec: self.spec,
            mode: self.mode,
            value: match &self.exact {
                Some(r) => ReportValue::Exact(ratio_string(r)),
                None => ReportValue::Approx(self.value),
            },
            stderr: self.stderr,
            samples: self.samples,
            seed: self.seed,
            inequalities,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportValue {
    Exact(String),
    Approx(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub table_hash: String,
    pub spec: TestSpec,
    pub mode: Mode,
    pub value: ReportValue,
    pub stderr: f64,
    pub samples: u128,
    pub seed: Option<u64>,
    pub inequalities: Vec<Inequality>,
}

/// Number of affine s-subspaces containing a fixed affine k-subspace.
fn supersets_per_k(m: usize, k: usize, s: usize, q: u32) -> u128 {
    gauss(m - k, s - k, q)
}

/// Number of affine r-subspaces inside a k-dimensional affine space.
fn subspaces_per_k(k: usize, r: usize, q: u32) -> u128 {
    gauss(k, r, q) * qpow(q, k - r)
}

fn collisions(counts: impl Iterator<Item = u64>) -> u128 {
    counts.map(|c| (c as u128) * (c as u128)).sum()
}

/// Exact acceptance probability.
pub fn agreement_exact(t: &SubspaceTable, spec: TestSpec, cap: u128) -> Result<AgreementEstimate> {
    spec.check(t)?;
    let f = t.field();
    let q = f.q();
    let (m, s, k, r) = (t.m(), spec.s, spec.k, spec.r);
    let n_k = gauss(m, k, q).saturating_mul(qpow(q, m - k));
    let n_s = supersets_per_k(m, k, s, q);
    let n_r = subspaces_per_k(k, r, q);
    check_cap(n_k.saturating_mul(n_r).saturating_mul(n_s), cap.saturating_mul(100))?;
    let sup = t.index().supersets(f, k, cap)?;
    let local_r: Vec<AffineSubspace> =
        if r < k { SubspaceFamily::all(k, r).enumerate(f, cap)? } else { vec![] };

    let total: u128 = (0..sup.small.len())
        .into_par_iter()
        .map_init(
            || (Vec::new(), vec![FieldElem::ZERO; t.basis().len()], vec![0u64; q as usize], Vec::new()),
            |(cover, scratch, hist, keys), ki| {
                let kk = sup.small.get(ki);
                sup.containing(f, t.index(), &kk, cover);
                debug_assert_eq!(cover.len() as u128, n_s);
                let rs: Vec<AffineSubspace> =
                    if r == k { vec![kk.clone()] } else { local_r.iter().map(|l| kk.embed(f, l)).collect() };
                let mut acc = 0u128;
                for rr in &rs {
                    if r == 0 {
                        hist.iter_mut().for_each(|h| *h = 0);
                        let x = rr.base();
                        let mut tx = [FieldElem::ZERO; 16];
                        for &ci in cover.iter() {
                            let piv = t.index().linear_pivots(t.index().linear_of(ci));
                            for (o, &p) in tx.iter_mut().zip(piv) {
                                *o = x[p];
                            }
                            let v = t.eval_local(ci, &tx[..piv.len()], scratch);
                            hist[v.0 as usize] += 1;
                        }
                        acc += collisions(hist.iter().copied());
                    } else {
                        keys.clear();
                        for &ci in cover.iter() {
                            let c = t.index().get(ci);
                            keys.push(restrict_unchecked(f, &t.entry(ci), &c, rr).coeffs);
                        }
                        acc += run_collisions(keys);
                    }
                }
                acc
            },
        )
        .sum();
    Ok(AgreementEstimate::exact(spec, total, n_k * n_r * n_s * n_s))
}

fn run_collisions(keys: &mut [Vec<FieldElem>]) -> u128 {
    keys.sort_unstable();
    let mut acc = 0u128;
    let mut i = 0;
    while i < keys.len() {
        let mut j = i + 1;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        acc += ((j - i) as u128).pow(2);
        i = j;
    }
    acc
}

/// Point-check agreement `(s, 0, 0)` computed by the per-point histogram
/// route: every entry votes its value at each of its points.
pub fn agreement_pointwise(t: &SubspaceTable, cap: u128) -> Result<AgreementEstimate> {
    let f = t.field();
    let q = f.q();
    let (m, s) = (t.m(), t.s());
    let points = qpow(q, m);
    check_cap((t.len() as u128).saturating_mul(qpow(q, s)), cap.saturating_mul(100))?;
    let mut hist = vec![0u64; points as usize * q as usize];
    let grid = MonomialGrid::new(f, s, t.d());
    let (mut base, mut codes, mut vals) = (vec![FieldElem::ZERO; m], vec![], vec![]);
    for i in 0..t.len() {
        t.index().point_codes_into(f, i, &mut base, &mut codes);
        grid.eval_all(f, t.entry_coeffs(i), &mut vals);
        for (&y, &v) in codes.iter().zip(&vals) {
            hist[y as usize * q as usize + v.0 as usize] += 1;
        }
    }
    let n = supersets_per_k(m, 0, s, q);
    let total = collisions(hist.into_iter());
    Ok(AgreementEstimate::exact(TestSpec { s, k: 0, r: 0 }, total, points * n * n))
}

/// Monte-Carlo estimate by direct simulation of the test.
pub fn agreement_mc(t: &SubspaceTable, spec: TestSpec, n: u64, seed: u64) -> Result<AgreementEstimate> {
    spec.check(t)?;
    if n == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let f = t.field();
    let (m, s, k, r) = (t.m(), spec.s, spec.k, spec.r);
    let accepted: u64 = rng::blocks(n)
        .into_par_iter()
        .map(|(block, len)| {
            let mut g = rng::stream(seed, block);
            let mut scratch = vec![FieldElem::ZERO; t.basis().len()];
            let mut hits = 0u64;
            for _ in 0..len {
                let kk = SubspaceFamily::all(m, k).sample(f, &mut g);
                let s1 = SubspaceFamily::containing(s, kk.clone()).sample(f, &mut g);
                let s2 = SubspaceFamily::containing(s, kk.clone()).sample(f, &mut g);
                let rr = if r == k { kk.clone() } else { kk.embed(f, &SubspaceFamily::all(k, r).sample(f, &mut g)) };
                let i1 = t.index().index_of(&s1).expect("indexed dimension");
                let i2 = t.index().index_of(&s2).expect("indexed dimension");
                let ok = if r == 0 {
                    let x = rr.base();
                    t.eval_local(i1, &s1.local_coords_unchecked(x), &mut scratch)
                        == t.eval_local(i2, &s2.local_coords_unchecked(x), &mut scratch)
                } else {
                    restrict_unchecked(f, &t.entry(i1), &s1, &rr) == restrict_unchecked(f, &t.entry(i2), &s2, &rr)
                };
                hits += ok as u64;
            }
            hits
        })
        .sum();
    let p = accepted as f64 / n as f64;
    Ok(AgreementEstimate {
        spec,
        mode: Mode::MonteCarlo,
        exact: None,
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        samples: n as u128,
        seed: Some(seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub s: usize,
    pub k: usize,
    pub r: usize,
    pub kappa: f64,
    /// Whether `s <= m/2`, the range where the upper bound is proved.
    pub s_le_half_m: bool,
    pub alpha_srs: String,
    pub alpha_sks: String,
    pub alpha_sks_r: String,
    pub inequalities: Vec<Inequality>,
}

impl EquivalenceReport {
    pub fn all_pass(&self) -> bool {
        self.inequalities.iter().all(|i| i.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|i| i.name == name)
    }
}

/// Computes `α(s,r,r)`, `α(s,k,k)` and `α(s,k,r)` exactly and evaluates,
/// with `δ = (d/q)^{r+1}`:
///
/// * `lower_bound`: `α(s,r,r)(1 − δ) ≤ α(s,k,k)`;
/// * `lower_bound_disagreement_form`: `(1 − α(s,k,k))(1 − δ) ≤ 1 − α(s,r,r)`;
/// * `upper_bound`: `α(s,k,k) ≤ α(s,r,r) + κ q^{−(s−2k+r+1)}` (floating point);
/// * `full_check_below_partial`: `α(s,k,k) ≤ α(s,k,r)`;
/// * `point_check_below_partial`: `α(s,r,r) ≤ α(s,k,r)`;
/// * `partial_disagreement_bound`: `(1 − α(s,k,k))(1 − δ) ≤ 1 − α(s,k,r)`.
///
/// The multiplicative `lower_bound` is not implied by the other relations
/// and fails on tables whose agreement is well below 1/2 (see the tests);
/// the disagreement form is what the chain actually yields.
pub fn check_equivalence(t: &SubspaceTable, s: usize, k: usize, r: usize, kappa: f64, cap: u128) -> Result<EquivalenceReport> {
    if !(r < k && k < s) {
        return Err(Error::SpecInvalid(format!("need r < k < s, got ({s},{k},{r})")));
    }
    let q = t.field().q();
    let d = t.d();
    let srs = agreement_exact(t, TestSpec::new(s, r, r)?, cap)?;
    let sks = agreement_exact(t, TestSpec::new(s, k, k)?, cap)?;
    let sksr = agreement_exact(t, TestSpec::new(s, k, r)?, cap)?;
    let (a_srs, a_sks, a_sksr) = (to_big(srs.exact.as_ref().unwrap()), to_big(sks.exact.as_ref().unwrap()), to_big(sksr.exact.as_ref().unwrap()));

    let ratio = BigRational::new(BigInt::from(d), BigInt::from(q));
    let mut pow = BigRational::one();
    for _ in 0..=r {
        pow *= &ratio;
    }
    let lower_lhs = &a_srs * (BigRational::one() - &pow);
    let exponent = s as i32 - 2 * k as i32 + r as i32 + 1;
    let upper_rhs = big_to_f64(&a_srs) + kappa * (q as f64).powi(-exponent);
    let upper_lhs = big_to_f64(&a_sks);
    let slack = (upper_rhs.abs() + 1.0) * 1e-12;

    let ineq = |name: &str, lhs: &BigRational, rhs: &BigRational| Inequality {
        name: name.into(),
        lhs: big_to_f64(lhs),
        rhs: big_to_f64(rhs),
        pass: lhs <= rhs,
    };
    let one = BigRational::one();
    let keep = &one - &pow;
    let inequalities = vec![
        ineq("lower_bound", &lower_lhs, &a_sks),
        ineq("lower_bound_disagreement_form", &((&one - &a_sks) * &keep), &(&one - &a_srs)),
        Inequality { name: "upper_bound".into(), lhs: upper_lhs, rhs: upper_rhs, pass: upper_lhs <= upper_rhs + slack },
        ineq("full_check_below_partial", &a_sks, &a_sksr),
        ineq("point_check_below_partial", &a_srs, &a_sksr),
        ineq("partial_disagreement_bound", &((&one - &a_sks) * &keep), &(&one - &a_sksr)),
    ];
    Ok(EquivalenceReport {
        s,
        k,
        r,
        kappa,
        s_le_half_m: 2 * s <= t.m(),
        alpha_srs: srs.value_string(),
        alpha_sks: sks.value_string(),
        alpha_sks_r: sksr.value_string(),
        inequalities,
    })
}
