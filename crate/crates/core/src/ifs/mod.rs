//! Similitude iterated function systems: symbolic words, compositions, the
//! Moran equation, attractor and inhomogeneous-attractor point clouds, and
//! the condensation open set condition.

mod condensation;
mod cosc;
pub(crate) mod linalg;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_space::FiniteMetricSpace;

pub use condensation::Condensation;
pub use cosc::{check_cosc, ConvexPolytope, CoscReport, DisjointnessMethod, OpenSet};

/// Relative slack when comparing composed contraction ratios against a
/// threshold, so that exact powers like 3⁻⁸ land on the intended side.
pub const LIP_REL_TOL: f64 = 1e-9;

/// Default cap on generated words and points.
pub const DEFAULT_WORD_BUDGET: usize = 1_000_000;

const ORTHO_TOL: f64 = 1e-9;

/// `x ↦ ratio · O x + translation` with `O` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similitude {
    pub ratio: f64,
    /// Row-major `d × d` orthogonal matrix.
    #[serde(with = "rows")]
    pub orthogonal: Vec<f64>,
    pub translation: Vec<f64>,
}

mod rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let d = (m.len() as f64).sqrt().round() as usize;
        let rows: Vec<&[f64]> = if d == 0 { Vec::new() } else { m.chunks(d).collect() };
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(serde::de::Error::custom("orthogonal matrix must be square"));
        }
        Ok(rows.concat())
    }
}

impl Similitude {
    pub fn identity(d: usize) -> Self {
        Similitude { ratio: 1.0, orthogonal: linalg::identity(d), translation: vec![0.0; d] }
    }

    /// Scaling by `ratio` followed by a translation (no rotation).
    pub fn scaling(ratio: f64, translation: Vec<f64>) -> Self {
        let d = translation.len();
        Similitude { ratio, orthogonal: linalg::identity(d), translation }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Checks `0 < ratio < 1` and orthogonality of the linear part.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::arg("similitude needs a positive dimension"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::arg(format!("contraction ratio {} not in (0, 1)", self.ratio)));
        }
        if self.orthogonal.len() != d * d {
            return Err(Error::arg("orthogonal matrix does not match translation dimension"));
        }
        let prod = linalg::mat_mul(d, &self.orthogonal, &linalg::transpose(d, &self.orthogonal));
        let id = linalg::identity(d);
        if prod.iter().zip(&id).any(|(a, b)| (a - b).abs() > ORTHO_TOL) {
            return Err(Error::arg("linear part is not orthogonal within 1e-9"));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = linalg::mat_vec(d, &self.orthogonal, x);
        for (yi, ti) in y.iter_mut().zip(&self.translation) {
            *yi = self.ratio * *yi + ti;
        }
        y
    }

    /// `self ∘ other`, i.e. `x ↦ self(other(x))`.
    pub fn then_inner(&self, other: &Similitude) -> Similitude {
        let d = self.dim();
        let orthogonal = linalg::mat_mul(d, &self.orthogonal, &other.orthogonal);
        let rotated = linalg::mat_vec(d, &self.orthogonal, &other.translation);
        let translation =
            rotated.iter().zip(&self.translation).map(|(r, t)| self.ratio * r + t).collect();
        Similitude { ratio: self.ratio * other.ratio, orthogonal, translation }
    }

    /// The unique fixed point of a contraction.
    pub fn fixed_point(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut a = linalg::identity(d);
        for (ai, oi) in a.iter_mut().zip(&self.orthogonal) {
            *ai -= self.ratio * oi;
        }
        linalg::solve(d, &a, &self.translation)
            .ok_or_else(|| Error::Degenerate("similitude has no unique fixed point".into()))
    }
}

/// Finite word over `{1, …, κ}`; stored zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// From one-based letters as written in the literature (`[1, 2]` is "12").
    pub fn from_letters(letters: &[usize]) -> Result<Self> {
        letters
            .iter()
            .map(|&l| {
                if l == 0 {
                    Err(Error::arg("letters are one-based"))
                } else {
                    Ok((l - 1) as u32)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// Parses a digit string such as `"12"` (only for κ ≤ 9).
    pub fn parse(s: &str) -> Result<Self> {
        let letters: Vec<usize> = s
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::arg(format!("bad letter {c:?}")))
            })
            .collect::<Result<_>>()?;
        Self::from_letters(&letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Zero-based letters.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&l| l as usize)
    }

    pub fn push(&mut self, letter0: usize) {
        self.0.push(letter0 as u32);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The word with its last letter removed (`ι⁻`); `None` for the empty word.
    pub fn parent(&self) -> Option<Word> {
        if self.0.is_empty() {
            None
        } else {
            Some(Word(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Prefix of length `n` (`ι|ₙ`).
    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        if self.0.iter().all(|&l| l < 9) {
            for l in &self.0 {
                write!(f, "{}", l + 1)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|l| (l + 1).to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// A similitude IFS with optional condensation set and open set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsSystem {
    pub dim: usize,
    pub maps: Vec<Similitude>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condensation: Option<Condensation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_set: Option<OpenSet>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapJson {
    ratio: f64,
    #[serde(default)]
    orthogonal: Option<Vec<Vec<f64>>>,
    translation: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IfsJson {
    dim: usize,
    maps: Vec<MapJson>,
    #[serde(default)]
    condensation: Option<Condensation>,
    #[serde(default)]
    open_set: Option<OpenSet>,
}

impl IfsSystem {
    pub fn new(maps: Vec<Similitude>) -> Result<Self> {
        let dim = maps.first().map(Similitude::dim).unwrap_or(0);
        let ifs = IfsSystem { dim, maps, condensation: None, open_set: None };
        ifs.validate()?;
        Ok(ifs)
    }

    pub fn with_condensation(mut self, c: Condensation) -> Result<Self> {
        self.condensation = Some(c);
        self.validate()?;
        Ok(self)
    }

    pub fn with_open_set(mut self, u: OpenSet) -> Result<Self> {
        self.open_set = Some(u);
        self.validate()?;
        Ok(self)
    }

    /// The middle-thirds Cantor system `x/3`, `x/3 + 2/3`.
    pub fn cantor() -> Self {
        Self::new(vec![
            Similitude::scaling(1.0 / 3.0, vec![0.0]),
            Similitude::scaling(1.0 / 3.0, vec![2.0 / 3.0]),
        ])
        .expect("cantor system is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.len() < 2 {
            return Err(Error::arg(format!("an IFS needs at least two maps, got {}", self.maps.len())));
        }
        for (i, m) in self.maps.iter().enumerate() {
            if m.dim() != self.dim {
                return Err(Error::arg(format!("map {} lives in dimension {}", i + 1, m.dim())));
            }
            m.validate().map_err(|e| Error::arg(format!("map {}: {e}", i + 1)))?;
        }
        if let Some(c) = &self.condensation {
            c.validate(self.dim)?;
        }
        if let Some(u) = &self.open_set {
            u.validate(self.dim)?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: IfsJson = serde_json::from_str(s)?;
        let maps = raw
            .maps
            .into_iter()
            .map(|m| {
                let d = m.translation.len();
                let orthogonal = match m.orthogonal {
                    Some(rows) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(Error::Format("orthogonal must be d × d".into()));
                        }
                        rows.concat()
                    }
                    None => linalg::identity(d),
                };
                Ok(Similitude { ratio: m.ratio, orthogonal, translation: m.translation })
            })
            .collect::<Result<Vec<_>>>()?;
        let ifs = IfsSystem { dim: raw.dim, maps, condensation: raw.condensation, open_set: raw.open_set };
        ifs.validate()?;
        Ok(ifs)
    }

    pub fn kappa(&self) -> usize {
        self.maps.len()
    }

    /// ᾱ, the largest contraction ratio.
    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(0.0, f64::max)
    }

    /// α̲, the smallest contraction ratio.
    pub fn min_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(1.0, f64::min)
    }

    fn check_word(&self, word: &Word) -> Result<()> {
        if let Some(l) = word.indices().find(|&l| l >= self.kappa()) {
            return Err(Error::arg(format!("letter {} out of range 1..={}", l + 1, self.kappa())));
        }
        Ok(())
    }

    /// Contraction ratio of `φ_ι`.
    pub fn lip(&self, word: &Word) -> Result<f64> {
        self.check_word(word)?;
        Ok(word.indices().map(|l| self.maps[l].ratio).product())
    }

    /// `φ_ι = φ_{i₁} ∘ ⋯ ∘ φ_{iₙ}`; the empty word gives the identity.
    pub fn compose(&self, word: &Word) -> Result<Similitude> {
        self.check_word(word)?;
        Ok(word
            .indices()
            .fold(Similitude::identity(self.dim), |acc, l| acc.then_inner(&self.maps[l])))
    }

    /// Stopping set `N(ρ)`: words with `Lip(φ_ι) ≤ ρ < Lip(φ_{ι⁻})`, in
    /// lexicographic order.
    pub fn stopping_words(&self, rho: f64) -> Result<Vec<Word>> {
        self.stopping_words_capped(rho, DEFAULT_WORD_BUDGET)
    }

    pub fn stopping_words_capped(&self, rho: f64, cap: usize) -> Result<Vec<Word>> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::arg("stopping scale must lie in (0, 1)"));
        }
        let mut out = Vec::new();
        let mut stack = vec![(Word::empty(), 1.0f64)];
        while let Some((w, lip)) = stack.pop() {
            if stops(lip, rho) {
                if out.len() >= cap {
                    return Err(Error::Budget { what: "stopping words", needed: out.len() + 1, cap });
                }
                out.push(w);
                continue;
            }
            for l in (0..self.kappa()).rev() {
                let mut child = w.clone();
                child.push(l);
                stack.push((child, lip * self.maps[l].ratio));
            }
        }
        Ok(out)
    }

    /// Similarity dimension: the unique `s > 0` with `Σ ratioᵢˢ = 1`,
    /// found by bracketed bisection.
    pub fn similarity_dimension(&self) -> f64 {
        moran_root(&self.maps.iter().map(|m| m.ratio).collect::<Vec<_>>())
    }

    /// Visits every word with `Lip(φ_ι) ≥ threshold` (including `∅`) in
    /// depth-first lexicographic order, carrying the composed map.
    fn for_each_word_above(
        &self,
        threshold: f64,
        cap: usize,
        mut visit: impl FnMut(&Word, &Similitude),
    ) -> Result<usize> {
        let mut count = 0usize;
        let mut stack = vec![(Word::empty(), Similitude::identity(self.dim))];
        while let Some((w, map)) = stack.pop() {
            count += 1;
            if count > cap {
                return Err(Error::Budget { what: "condensation copies", needed: count, cap });
            }
            visit(&w, &map);
            for l in (0..self.kappa()).rev() {
                let next = map.then_inner(&self.maps[l]);
                if next.ratio >= threshold * (1.0 - LIP_REL_TOL) {
                    let mut child = w.clone();
                    child.push(l);
                    stack.push((child, next));
                }
            }
        }
        Ok(count)
    }

    /// Points `φ_ι(z₀)` for `ι ∈ N(δ)`, where `z₀` is the fixed point of
    /// `φ₁`. The returned cloud is sorted lexicographically and its
    /// resolution floor is `δ · diam`.
    pub fn attractor_points(&self, delta: f64) -> Result<FiniteMetricSpace> {
        self.attractor_points_capped(delta, DEFAULT_WORD_BUDGET)
    }

    pub fn attractor_points_capped(&self, delta: f64, cap: usize) -> Result<FiniteMetricSpace> {
        let pts = self.attractor_raw(delta, cap)?;
        finish_cloud(self.dim, pts, delta)
    }

    fn attractor_raw(&self, delta: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::arg("delta must lie in (0, 1)"));
        }
        let seed = self.maps[0].fixed_point()?;
        let mut pts = Vec::new();
        let mut stack = vec![Similitude::identity(self.dim)];
        while let Some(map) = stack.pop() {
            if stops(map.ratio, delta) {
                if pts.len() >= cap {
                    return Err(Error::Budget { what: "attractor points", needed: pts.len() + 1, cap });
                }
                pts.push(map.apply(&seed));
                continue;
            }
            for l in (0..self.kappa()).rev() {
                stack.push(map.then_inner(&self.maps[l]));
            }
        }
        Ok(pts)
    }

    /// Finite model of `E_C = E ∪ ⋃_ι φ_ι(C)`: the attractor points at `δ`
    /// together with `φ_ι(C)` for every word with `Lip(φ_ι) ≥ δ`, where each
    /// copy of `C` is sampled finely enough that its image has spacing at
    /// most `δ`. Points closer than `δ/2` to an earlier point are dropped.
    pub fn inhomogeneous_points(&self, delta: f64) -> Result<FiniteMetricSpace> {
        self.inhomogeneous_points_capped(delta, DEFAULT_WORD_BUDGET)
    }

    pub fn inhomogeneous_points_capped(&self, delta: f64, cap: usize) -> Result<FiniteMetricSpace> {
        let cond = self
            .condensation
            .as_ref()
            .ok_or_else(|| Error::arg("inhomogeneous points need a condensation set"))?;
        let mut pts = self.attractor_raw(delta, cap)?;
        pts.sort_by(|a, b| lex_cmp(a, b));
        let mut overflow = None;
        self.for_each_word_above(delta, cap, |_, map| {
            if overflow.is_some() {
                return;
            }
            let sample = cond.sample(delta / map.ratio);
            if pts.len() + sample.len() > cap {
                overflow = Some(pts.len() + sample.len());
                return;
            }
            pts.extend(sample.iter().map(|c| map.apply(c)));
        })?;
        if let Some(needed) = overflow {
            return Err(Error::Budget { what: "inhomogeneous points", needed, cap });
        }
        let kept = dedup(self.dim, pts, delta / 2.0)?;
        finish_cloud(self.dim, kept, delta)
    }

    /// Number of words with `Lip(φ_ι) ≥ threshold`, including `∅`.
    pub fn count_words_above(&self, threshold: f64) -> Result<usize> {
        self.for_each_word_above(threshold, DEFAULT_WORD_BUDGET, |_, _| {})
    }

    /// Every word with `Lip(φ_ι) ≥ threshold` together with `φ_ι`.
    pub fn words_above(&self, threshold: f64) -> Result<Vec<(Word, Similitude)>> {
        let mut out = Vec::new();
        self.for_each_word_above(threshold, DEFAULT_WORD_BUDGET, |w, m| out.push((w.clone(), m.clone())))?;
        Ok(out)
    }

    /// Sample of the condensation set at spacing `resolution`.
    pub fn condensation_points(&self, resolution: f64) -> Result<FiniteMetricSpace> {
        let cond = self
            .condensation
            .as_ref()
            .ok_or_else(|| Error::arg("system has no condensation set"))?;
        let pts = dedup(self.dim, cond.sample(resolution), resolution / 2.0)?;
        if pts.len() < 2 {
            return Err(Error::Degenerate(
                "condensation sample has a single point; a metric space needs two".into(),
            ));
        }
        finish_cloud_with_floor(self.dim, pts, resolution)
    }

    pub fn check_cosc(&self) -> Result<CoscReport> {
        check_cosc(self)
    }
}

fn stops(lip: f64, rho: f64) -> bool {
    lip <= rho * (1.0 + LIP_REL_TOL)
}

/// Root of `Σ rᵢˢ = 1` for ratios in (0, 1), κ ≥ 2.
pub fn moran_root(ratios: &[f64]) -> f64 {
    let f = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    if flo <= fhi {
        lo
    } else {
        hi
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Drops points strictly closer than `radius` to an earlier kept point.
/// Distances equal to `radius` up to rounding count as separated.
fn dedup(dim: usize, pts: Vec<Vec<f64>>, radius: f64) -> Result<Vec<Vec<f64>>> {
    if pts.len() < 2 {
        return Ok(pts);
    }
    let radius = radius * (1.0 - LIP_REL_TOL);
    let coords: Vec<f64> = pts.concat();
    let space = FiniteMetricSpace::from_flat(dim, coords, radius)?;
    let members: Vec<usize> = (0..pts.len()).collect();
    let mut keep = Vec::new();
    space.pack(&members, radius, Some(&mut keep));
    let mut pts = pts;
    Ok(keep.into_iter().map(|i| std::mem::take(&mut pts[i])).collect())
}

fn finish_cloud(dim: usize, pts: Vec<Vec<f64>>, delta: f64) -> Result<FiniteMetricSpace> {
    let mut pts = pts;
    pts.sort_by(|a, b| lex_cmp(a, b));
    let provisional = FiniteMetricSpace::from_flat(dim, pts.concat(), 1.0)?;
    let diam = provisional.diam();
    let floor = if diam > 0.0 { delta * diam } else { delta };
    if provisional.min_gap() == 0.0 {
        log::warn!("generated cloud has coincident points (min gap 0)");
    }
    provisional.with_resolution_floor(floor)
}

fn finish_cloud_with_floor(dim: usize, pts: Vec<Vec<f64>>, floor: f64) -> Result<FiniteMetricSpace> {
    let mut pts = pts;
    pts.sort_by(|a, b| lex_cmp(a, b));
    FiniteMetricSpace::from_flat(dim, pts.concat(), floor)
}
