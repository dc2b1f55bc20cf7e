//! Subspace tables: one low-degree polynomial per affine s-subspace.
//!
//! Entries are held in [`SubspaceIndex`] order as a flat coefficient array.
//! The JSON interchange form lists entries sorted by the subspace's textual
//! form; the content hash is the SHA-256 of the canonical JSON bytes, which
//! are exactly what [`SubspaceTable::save`] writes.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_cap, Error, Result};
use crate::field::{FieldCtx, FieldElem, FieldSpec};
use crate::geometry::{AffineSubspace, SubspaceIndex};
use crate::polynomial::{eval_coeffs, monomial_count, restrict_global, GlobalPoly, LocalPoly, MonomialBasis};
use crate::rng;

/// Largest table the generators and loader accept.
pub const MAX_ENTRIES: u128 = 1_000_000;

/// How a table was produced. `sources` strings are aligned with the file's
/// entry list: for planted tables `'1'` marks a planted entry and `'.'` a
/// random one; for mixtures and half/half tables each character is the
/// index of the component (or constant) the entry came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Generator {
    Honest { g: GlobalPoly },
    Planted { g: GlobalPoly, rho: f64, sources: String },
    Halfhalf { sources: String },
    Mixture { gs: Vec<GlobalPoly>, weights: Vec<f64>, sources: String },
    Random,
    External,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Honest { .. } => "honest",
            Generator::Planted { .. } => "planted",
            Generator::Halfhalf { .. } => "halfhalf",
            Generator::Mixture { .. } => "mixture",
            Generator::Random => "random",
            Generator::External => "external",
        }
    }

    fn sources(&self) -> Option<&str> {
        match self {
            Generator::Planted { sources, .. } | Generator::Halfhalf { sources } | Generator::Mixture { sources, .. } => {
                Some(sources)
            }
            _ => None,
        }
    }

    /// Plant polynomials carried by the descriptor.
    pub fn plants(&self) -> Vec<&GlobalPoly> {
        match self {
            Generator::Honest { g } | Generator::Planted { g, .. } => vec![g],
            Generator::Mixture { gs, .. } => gs.iter().collect(),
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub p: u32,
    pub e: u32,
    pub reduction_poly: Option<Vec<u32>>,
    pub m: usize,
    pub s: usize,
    pub d: usize,
    pub generator: Generator,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    subspace: String,
    poly: LocalPoly,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    header: TableHeader,
    entries: Vec<EntryJson>,
}

/// A total assignment of degree-≤d polynomials to the affine s-subspaces.
#[derive(Clone, Debug)]
pub struct SubspaceTable {
    header: TableHeader,
    field: FieldCtx,
    index: Arc<SubspaceIndex>,
    basis: Arc<MonomialBasis>,
    coeffs: Vec<FieldElem>,
}

/// Ambient parameters shared by the generators.
#[derive(Clone, Debug)]
pub struct TableShape {
    pub field: FieldCtx,
    pub m: usize,
    pub s: usize,
    pub d: usize,
}

impl TableShape {
    pub fn new(field: FieldCtx, m: usize, s: usize, d: usize) -> Result<Self> {
        if s == 0 || s > m {
            return Err(Error::HeaderMismatch(format!("need 0 < s <= m (s={s}, m={m})")));
        }
        if d >= field.q() as usize {
            return Err(Error::HeaderMismatch(format!("need d < q (d={d}, q={})", field.q())));
        }
        Ok(TableShape { field, m, s, d })
    }

    fn header(&self, generator: Generator, seed: u64) -> TableHeader {
        let spec = self.field.spec();
        TableHeader { p: spec.p, e: spec.e, reduction_poly: spec.reduction_poly, m: self.m, s: self.s, d: self.d, generator, seed }
    }

    fn index(&self) -> Result<SubspaceIndex> {
        SubspaceIndex::new(&self.field, self.m, self.s, MAX_ENTRIES)
    }

    fn check_global(&self, g: &GlobalPoly) -> Result<GlobalPoly> {
        if g.k != self.m {
            return Err(Error::AmbientMismatch);
        }
        g.validate()?;
        g.with_bound(self.d)
    }

    /// A uniformly random degree-≤d polynomial on F^m.
    pub fn random_global<R: Rng + ?Sized>(&self, rng: &mut R) -> GlobalPoly {
        LocalPoly::random(&self.field, self.m, self.d, rng)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SubspaceTable {
    fn assemble(shape: &TableShape, index: SubspaceIndex, header: TableHeader, coeffs: Vec<FieldElem>) -> Self {
        SubspaceTable {
            header,
            field: shape.field.clone(),
            index: Arc::new(index),
            basis: MonomialBasis::get(shape.s, shape.d),
            coeffs,
        }
    }

    /// Builds a table entry by entry; `label` returns the source character
    /// (index order) and the entry.
    fn build<F>(shape: &TableShape, mut entry: F) -> Result<(SubspaceIndex, Vec<FieldElem>, Vec<u8>)>
    where
        F: FnMut(&AffineSubspace) -> (u8, LocalPoly),
    {
        let index = shape.index()?;
        let n = monomial_count(shape.s, shape.d);
        let mut coeffs = Vec::with_capacity(index.len() * n);
        let mut labels = Vec::with_capacity(index.len());
        for i in 0..index.len() {
            let (label, p) = entry(&index.get(i));
            debug_assert_eq!(p.coeffs.len(), n);
            coeffs.extend_from_slice(&p.coeffs);
            labels.push(label);
        }
        Ok((index, coeffs, labels))
    }

    /// Permutation listing index positions in textual order.
    pub fn text_order(&self) -> Vec<usize> {
        text_order(&self.index)
    }

    fn labels_to_sources(index: &SubspaceIndex, labels: &[u8]) -> String {
        text_order(index).iter().map(|&i| labels[i] as char).collect()
    }

    /// `T(S) = g|_S` for every S.
    pub fn gen_honest(shape: &TableShape, g: &GlobalPoly, seed: u64) -> Result<Self> {
        let g = shape.check_global(g)?;
        let f = &shape.field;
        let (index, coeffs, _) = Self::build(shape, |s| (b'1', restrict_global(f, &g, s)))?;
        let header = shape.header(Generator::Honest { g }, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    /// Each entry independently `g|_S` with probability `rho`, else a
    /// uniformly random polynomial.
    pub fn gen_planted(shape: &TableShape, g: &GlobalPoly, rho: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Invalid(format!("rho = {rho} is not in [0, 1]")));
        }
        let g = shape.check_global(g)?;
        let f = &shape.field;
        let mut r = rng::stream(seed, 0);
        let (index, coeffs, labels) = Self::build(shape, |s| {
            if r.gen::<f64>() < rho {
                (b'1', restrict_global(f, &g, s))
            } else {
                (b'.', LocalPoly::random(f, shape.s, shape.d, &mut r))
            }
        })?;
        let sources = Self::labels_to_sources(&index, &labels);
        let header = shape.header(Generator::Planted { g, rho, sources }, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    /// Each entry the constant 0 or the constant 1 with probability 1/2.
    pub fn gen_halfhalf(shape: &TableShape, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, 0);
        let (index, coeffs, labels) = Self::build(shape, |_| {
            let bit = r.gen::<bool>() as u16;
            (b'0' + bit as u8, LocalPoly::constant(shape.s, shape.d, FieldElem(bit)))
        })?;
        let sources = Self::labels_to_sources(&index, &labels);
        let header = shape.header(Generator::Halfhalf { sources }, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    /// Each entry `g_i|_S` with probability `weights[i]`.
    pub fn gen_mixture(shape: &TableShape, gs: &[GlobalPoly], weights: &[f64], seed: u64) -> Result<Self> {
        if gs.is_empty() || gs.len() != weights.len() || gs.len() > 10 {
            return Err(Error::WeightMismatch(format!("{} polynomials, {} weights (1..=10 required)", gs.len(), weights.len())));
        }
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::WeightMismatch(format!("weights {weights:?} must be non-negative and sum to 1")));
        }
        let gs: Vec<GlobalPoly> = gs.iter().map(|g| shape.check_global(g)).collect::<Result<_>>()?;
        let f = &shape.field;
        let mut r = rng::stream(seed, 0);
        let (index, coeffs, labels) = Self::build(shape, |s| {
            let u: f64 = r.gen();
            let mut acc = 0.0;
            let mut pick = gs.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            (b'0' + pick as u8, restrict_global(f, &gs[pick], s))
        })?;
        let sources = Self::labels_to_sources(&index, &labels);
        let header = shape.header(Generator::Mixture { gs, weights: weights.to_vec(), sources }, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    /// Uniformly random entries.
    pub fn gen_random(shape: &TableShape, seed: u64) -> Result<Self> {
        let f = &shape.field;
        let mut r = rng::stream(seed, 0);
        let (index, coeffs, _) = Self::build(shape, |_| (b'.', LocalPoly::random(f, shape.s, shape.d, &mut r)))?;
        let header = shape.header(Generator::Random, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    /// Table from explicit entries in index order.
    pub fn from_entries(shape: &TableShape, entries: Vec<LocalPoly>, seed: u64) -> Result<Self> {
        let index = shape.index()?;
        if entries.len() != index.len() {
            return Err(Error::MissingEntry(format!("{} of {} entries given", entries.len(), index.len())));
        }
        let mut coeffs = Vec::with_capacity(entries.len() * monomial_count(shape.s, shape.d));
        for (i, p) in entries.into_iter().enumerate() {
            if p.k != shape.s {
                return Err(Error::HeaderMismatch(format!("entry {i} has {} variables", p.k)));
            }
            let p = p.with_bound(shape.d).map_err(|_| Error::DegreeViolation(index.get(i).to_text()))?;
            coeffs.extend_from_slice(&p.coeffs);
        }
        let header = shape.header(Generator::External, seed);
        Ok(Self::assemble(shape, index, header, coeffs))
    }

    pub fn header(&self) -> &TableHeader {
        &self.header
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn index(&self) -> &SubspaceIndex {
        &self.index
    }

    pub fn shape(&self) -> TableShape {
        TableShape { field: self.field.clone(), m: self.header.m, s: self.header.s, d: self.header.d }
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn m(&self) -> usize {
        self.header.m
    }

    pub fn s(&self) -> usize {
        self.header.s
    }

    pub fn d(&self) -> usize {
        self.header.d
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subspace(&self, i: usize) -> AffineSubspace {
        self.index.get(i)
    }

    #[inline]
    pub fn entry_coeffs(&self, i: usize) -> &[FieldElem] {
        let n = self.basis.len();
        &self.coeffs[i * n..(i + 1) * n]
    }

    pub fn entry(&self, i: usize) -> LocalPoly {
        LocalPoly { k: self.header.s, d: self.header.d, coeffs: self.entry_coeffs(i).to_vec() }
    }

    /// `T(S_i)` at local coordinates `t`.
    #[inline]
    pub fn eval_local(&self, i: usize, t: &[FieldElem], scratch: &mut [FieldElem]) -> FieldElem {
        eval_coeffs(&self.field, &self.basis, self.entry_coeffs(i), t, scratch)
    }

    /// Source labels in index order, if the generator recorded them.
    pub fn labels(&self) -> Option<Vec<u8>> {
        let src = self.header.generator.sources()?.as_bytes();
        let order = self.text_order();
        let mut out = vec![0u8; src.len()];
        for (pos, &i) in order.iter().enumerate() {
            out[i] = src[pos];
        }
        Some(out)
    }

    /// Canonical JSON bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let entries = self
            .text_order()
            .into_iter()
            .map(|i| EntryJson { subspace: self.index.get(i).to_text(), poly: self.entry(i) })
            .collect();
        let doc = TableJson { header: self.header.clone(), entries };
        serde_json::to_vec(&doc).expect("table serializes")
    }

    /// SHA-256 of the canonical JSON bytes, hex encoded.
    pub fn content_hash(&self) -> String {
        sha256_hex(&self.to_json_bytes())
    }

    /// Writes the canonical JSON and returns its hash.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let bytes = self.to_json_bytes();
        std::fs::write(path, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_json_bytes(&bytes)
    }

    /// Parses and validates a table file.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let doc: TableJson = serde_json::from_slice(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let h = doc.header;
        let field = FieldCtx::from_spec(&FieldSpec { p: h.p, e: h.e, reduction_poly: h.reduction_poly.clone() })?;
        if field.spec().reduction_poly != h.reduction_poly {
            return Err(Error::HeaderMismatch("reduction polynomial must be given exactly when e > 1".into()));
        }
        let shape = TableShape::new(field, h.m, h.s, h.d)?;
        let total = SubspaceTable::entry_count(&shape);
        check_cap(total, MAX_ENTRIES)?;
        let index = shape.index()?;
        let f = &shape.field;
        let n = monomial_count(h.s, h.d);
        let mut coeffs = vec![FieldElem::ZERO; index.len() * n];
        let mut seen = vec![false; index.len()];
        for e in &doc.entries {
            let sub = AffineSubspace::from_text(f, &e.subspace)?;
            if sub.ambient() != h.m || sub.dim() != h.s {
                return Err(Error::HeaderMismatch(format!("entry {} is not an {}-subspace of F^{}", e.subspace, h.s, h.m)));
            }
            if e.poly.k != h.s {
                return Err(Error::HeaderMismatch(format!("entry {} has {} variables", e.subspace, e.poly.k)));
            }
            e.poly.validate()?;
            if e.poly.coeffs.iter().any(|c| c.value() >= f.q()) {
                return Err(Error::Format(format!("entry {} has a coefficient outside the field", e.subspace)));
            }
            let p = e.poly.with_bound(h.d).map_err(|_| Error::DegreeViolation(e.subspace.clone()))?;
            let i = index.index_of(&sub).expect("subspace of the indexed dimension");
            if seen[i] {
                return Err(Error::Format(format!("duplicate entry {}", e.subspace)));
            }
            seen[i] = true;
            coeffs[i * n..(i + 1) * n].copy_from_slice(&p.coeffs);
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::MissingEntry(index.get(i).to_text()));
        }
        if let Some(src) = h.generator.sources() {
            if src.len() != index.len() {
                return Err(Error::Format(format!("sources has {} labels for {} entries", src.len(), index.len())));
            }
        }
        for g in h.generator.plants() {
            if g.k != h.m || g.validate().is_err() || g.with_bound(h.d).is_err() {
                return Err(Error::HeaderMismatch("generator polynomial does not match the header".into()));
            }
        }
        Ok(Self::assemble(&shape, index, h, coeffs))
    }

    /// Number of affine s-subspaces for the shape.
    pub fn entry_count(shape: &TableShape) -> u128 {
        crate::geometry::gauss(shape.m, shape.s, shape.field.q())
            .saturating_mul(crate::geometry::qpow(shape.field.q(), shape.m - shape.s))
    }

    /// Indices whose entry equals `g|_S` identically.
    pub fn support_mask(&self, g: &GlobalPoly) -> Vec<bool> {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|i| restrict_global(&self.field, g, &self.index.get(i)).coeffs == self.entry_coeffs(i))
            .collect()
    }
}

fn text_order(index: &SubspaceIndex) -> Vec<usize> {
    let mut keyed: Vec<(String, usize)> = (0..index.len()).map(|i| (index.get(i).to_text(), i)).collect();
    keyed.sort();
    keyed.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::all_points;
    use crate::polynomial::interpolate_table;

    fn shape(q: u32, m: usize, s: usize, d: usize) -> TableShape {
        TableShape::new(FieldCtx::prime(q).unwrap(), m, s, d).unwrap()
    }

    #[test]
    fn honest_entries_match_pointwise() {
        let sh = shape(5, 4, 3, 2);
        let g = sh.random_global(&mut rng::seeded(1));
        let t = SubspaceTable::gen_honest(&sh, &g, 1).unwrap();
        assert_eq!(t.len(), 780);
        let f = t.field();
        let mut scratch = vec![FieldElem::ZERO; 10];
        for i in (0..t.len()).step_by(7) {
            let s = t.subspace(i);
            for u in all_points(5, 3) {
                assert_eq!(t.eval_local(i, &u, &mut scratch), g.evaluate(f, &s.point_at(f, &u)));
            }
        }
        let zero = SubspaceTable::gen_honest(&sh, &LocalPoly::zero(4, 2), 0).unwrap();
        assert!((0..zero.len()).all(|i| zero.entry(i).is_zero()));
    }

    #[test]
    fn planted_extremes_and_metadata() {
        let sh = shape(5, 3, 2, 1);
        let g = sh.random_global(&mut rng::seeded(2));
        let honest = SubspaceTable::gen_honest(&sh, &g, 9).unwrap();
        let full = SubspaceTable::gen_planted(&sh, &g, 1.0, 9).unwrap();
        assert_eq!(full.coeffs, honest.coeffs);
        let half = SubspaceTable::gen_planted(&sh, &g, 0.5, 9).unwrap();
        let labels = half.labels().unwrap();
        let mask = half.support_mask(&g);
        for (l, m) in labels.iter().zip(&mask) {
            if *l == b'1' {
                assert!(*m);
            }
        }
        assert!(matches!(SubspaceTable::gen_planted(&sh, &g, 1.5, 0), Err(Error::Invalid(_))));
    }

    #[test]
    fn planted_fraction_concentrates() {
        let sh = shape(11, 4, 3, 2);
        let g = sh.random_global(&mut rng::seeded(3));
        let t = SubspaceTable::gen_planted(&sh, &g, 0.5, 3).unwrap();
        let n = t.len() as f64;
        let planted = t.labels().unwrap().iter().filter(|&&c| c == b'1').count() as f64;
        assert!((planted / n - 0.5).abs() <= 3.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn halfhalf_constant_entries() {
        let sh = shape(5, 4, 3, 2);
        let t = SubspaceTable::gen_halfhalf(&sh, 4).unwrap();
        for i in 0..t.len() {
            let p = t.entry(i);
            assert!(p.coeffs[1..].iter().all(|c| c.is_zero()));
            assert!(p.coeffs[0].value() <= 1);
        }
    }

    #[test]
    fn mixture_weight_errors_and_single() {
        let sh = shape(5, 3, 2, 1);
        let g = sh.random_global(&mut rng::seeded(5));
        let one = SubspaceTable::gen_mixture(&sh, &[g.clone()], &[1.0], 0).unwrap();
        assert_eq!(one.coeffs, SubspaceTable::gen_honest(&sh, &g, 0).unwrap().coeffs);
        assert!(matches!(SubspaceTable::gen_mixture(&sh, &[g.clone()], &[0.5], 0), Err(Error::WeightMismatch(_))));
        assert!(matches!(SubspaceTable::gen_mixture(&sh, &[g.clone()], &[0.5, 0.5], 0), Err(Error::WeightMismatch(_))));
    }

    #[test]
    fn deterministic_generation() {
        let sh = shape(5, 3, 2, 1);
        let a = SubspaceTable::gen_random(&sh, 77).unwrap();
        let b = SubspaceTable::gen_random(&sh, 77).unwrap();
        assert_eq!(a.to_json_bytes(), b.to_json_bytes());
        assert_ne!(a.content_hash(), SubspaceTable::gen_random(&sh, 78).unwrap().content_hash());
    }

    #[test]
    fn roundtrip_and_validation() {
        let dir = tempdir();
        let sh = shape(5, 3, 2, 1);
        let g = sh.random_global(&mut rng::seeded(6));
        let t = SubspaceTable::gen_planted(&sh, &g, 0.5, 6).unwrap();
        let path = dir.join("t.json");
        let h = t.save(&path).unwrap();
        let back = SubspaceTable::load(&path).unwrap();
        assert_eq!(back.content_hash(), h);
        assert_eq!(back.coeffs, t.coeffs);
        assert_eq!(back.header, t.header);

        let mut doc: serde_json::Value = serde_json::from_slice(&t.to_json_bytes()).unwrap();
        let removed = doc["entries"].as_array_mut().unwrap().remove(3);
        let bytes = serde_json::to_vec(&doc).unwrap();
        match SubspaceTable::from_json_bytes(&bytes) {
            Err(Error::MissingEntry(s)) => assert_eq!(s, removed["subspace"].as_str().unwrap()),
            other => panic!("{other:?}"),
        }

        // degree-(d+1) entry crafted by interpolation of a quadratic
        let f = t.field();
        let vals: Vec<FieldElem> = all_points(5, 2).map(|u| f.mul(u[0], u[0])).collect();
        let quad = interpolate_table(f, &vals, 2, 2).unwrap();
        let mut doc: serde_json::Value = serde_json::from_slice(&t.to_json_bytes()).unwrap();
        doc["entries"][0]["poly"] = serde_json::to_value(&quad).unwrap();
        let bytes = serde_json::to_vec(&doc).unwrap();
        assert!(matches!(SubspaceTable::from_json_bytes(&bytes), Err(Error::DegreeViolation(_))));

        let mut doc: serde_json::Value = serde_json::from_slice(&t.to_json_bytes()).unwrap();
        doc["header"]["s"] = serde_json::json!(1);
        let bytes = serde_json::to_vec(&doc).unwrap();
        assert!(matches!(SubspaceTable::from_json_bytes(&bytes), Err(Error::HeaderMismatch(_))));

        assert!(matches!(SubspaceTable::from_json_bytes(b"{\"header\": 3}"), Err(Error::Format(_))));
    }

    #[test]
    fn shape_errors() {
        let f = FieldCtx::prime(3).unwrap();
        assert!(matches!(TableShape::new(f.clone(), 3, 2, 3), Err(Error::HeaderMismatch(_))));
        assert!(matches!(TableShape::new(f, 3, 0, 1), Err(Error::HeaderMismatch(_))));
    }

    fn tempdir() -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("lowdeg-table-{}-{:?}", std::process::id(), std::thread::current().id()));
        std::fs::create_dir_all(&p).unwrap();
        p
    }
}
