//! Open set and condensation open set conditions for convex polytopes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, norm, normal_of};
use super::{IfsSystem, Similitude};
use crate::error::{Error, Result};

const GEOM_TOL: f64 = 1e-10;
const HIGH_DIM_SAMPLES: usize = 10_000;

/// Open convex polytope given as the interior of the hull of `vertices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSet {
    pub vertices: Vec<Vec<f64>>,
}

impl OpenSet {
    pub fn interval(a: f64, b: f64) -> Self {
        OpenSet { vertices: vec![vec![a], vec![b]] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.vertices.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::arg("open set vertices do not match the IFS dimension"));
        }
        ConvexPolytope::from_vertices(self.vertices.clone()).map(|_| ())
    }
}

/// Convex polytope with both representations: vertices and facets
/// `normal · x ≤ offset` (unit normals).
#[derive(Debug, Clone)]
pub struct ConvexPolytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    facets: Vec<(Vec<f64>, f64)>,
}

impl ConvexPolytope {
    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || vertices.len() < dim + 1 {
            return Err(Error::arg("a full-dimensional polytope needs at least d + 1 vertices"));
        }
        let scale = vertices
            .iter()
            .flat_map(|v| vertices.iter().map(move |w| super::super::metric_space::euclid(v, w)))
            .fold(0.0, f64::max);
        let tol = GEOM_TOL * scale.max(1.0);
        let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut subset: Vec<usize> = (0..dim).collect();
        loop {
            let base = &vertices[subset[0]];
            let dirs: Vec<Vec<f64>> = subset[1..]
                .iter()
                .map(|&i| vertices[i].iter().zip(base).map(|(a, b)| a - b).collect())
                .collect();
            let n = normal_of(dim, &dirs);
            let len = norm(&n);
            if len > 1e-12 * scale.powi(dim as i32 - 1).max(1e-300) {
                let n: Vec<f64> = n.iter().map(|x| x / len).collect();
                let b = dot(&n, base);
                let side: Vec<f64> = vertices.iter().map(|v| dot(&n, v) - b).collect();
                let above = side.iter().any(|&s| s > tol);
                let below = side.iter().any(|&s| s < -tol);
                let candidate = match (above, below) {
                    (false, true) => Some((n, b)),
                    (true, false) => Some((n.iter().map(|x| -x).collect(), -b)),
                    _ => None,
                };
                if let Some((n, b)) = candidate {
                    let dup = facets
                        .iter()
                        .any(|(m, c)| (c - b).abs() <= tol && m.iter().zip(&n).all(|(x, y)| (x - y).abs() < 1e-9));
                    if !dup {
                        facets.push((n, b));
                    }
                }
            }
            if !next_subset(&mut subset, vertices.len()) {
                break;
            }
        }
        if facets.len() < dim + 1 {
            return Err(Error::Degenerate("open set polytope has empty interior".into()));
        }
        Ok(ConvexPolytope { dim, vertices, facets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn map(&self, f: &Similitude) -> ConvexPolytope {
        let vertices: Vec<Vec<f64>> = self.vertices.iter().map(|v| f.apply(v)).collect();
        let facets = self
            .facets
            .iter()
            .map(|(n, b)| {
                // f(x) = r O x + t maps the halfspace n·x ≤ b to (O n)·y ≤ r b + (O n)·t
                let on = super::linalg::mat_vec(self.dim, &f.orthogonal, n);
                let off = f.ratio * b + dot(&on, &f.translation);
                (on, off)
            })
            .collect();
        ConvexPolytope { dim: self.dim, vertices, facets }
    }

    /// Signed depth: `min_facets (offset − normal·x)`; positive inside, equal
    /// to the distance to the complement for interior points.
    pub fn depth(&self, x: &[f64]) -> f64 {
        self.facets.iter().map(|(n, b)| b - dot(n, x)).fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance from `x` to the closed polytope.
    pub fn distance(&self, x: &[f64]) -> f64 {
        if self.depth(x) >= 0.0 {
            return 0.0;
        }
        if self.dim == 1 {
            let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            return (lo - x[0]).max(x[0] - hi).max(0.0);
        }
        hull_distance(&self.vertices, x)
    }

    fn project(&self, axis: &[f64]) -> (f64, f64) {
        self.vertices.iter().map(|v| dot(axis, v)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        })
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let w: Vec<f64> = self.vertices.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut p = vec![0.0; self.dim];
        for (wi, v) in w.iter().zip(&self.vertices) {
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += wi / total * vk;
            }
        }
        p
    }
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Distance from `x` to the convex hull of `vertices` by accelerated
/// projected gradient on barycentric weights.
fn hull_distance(vertices: &[Vec<f64>], x: &[f64]) -> f64 {
    let m = vertices.len();
    let lip: f64 = vertices.iter().map(|v| dot(v, v)).sum::<f64>().max(1e-300);
    let point = |w: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; x.len()];
        for (wi, v) in w.iter().zip(vertices) {
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += wi * vk;
            }
        }
        p
    };
    let mut w = vec![1.0 / m as f64; m];
    let mut y = w.clone();
    let mut t = 1.0f64;
    for _ in 0..5000 {
        let p = point(&y);
        let resid: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        let step: Vec<f64> = y
            .iter()
            .zip(vertices)
            .map(|(yi, v)| yi - dot(v, &resid) / lip)
            .collect();
        let next = project_simplex(&step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next.iter().zip(&w).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        w = next;
        t = t_next;
    }
    let p = point(&w);
    super::super::metric_space::euclid(&p, x)
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let th = (cum - 1.0) / (i as f64 + 1.0);
        if ui - th > 0.0 {
            theta = th;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisjointnessMethod {
    SeparatingAxis,
    Probabilistic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoscReport {
    /// (a) every `φᵢ(U) ⊂ U`.
    pub containment: bool,
    /// Smallest depth of a mapped vertex inside `U` (0 when images touch ∂U).
    pub containment_margin: f64,
    /// (b) the open images `φᵢ(U)` are pairwise disjoint.
    pub disjoint: bool,
    pub disjoint_method: DisjointnessMethod,
    /// Largest separating gap of the worst pair; 0 means the closures touch.
    pub closure_margin: f64,
    pub closures_touch: bool,
    /// (c) `C` keeps a positive distance from `⋃ cl φᵢ(U) ∪ (ℝᵈ ∖ U)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condensation_separated: Option<bool>,
    /// The distance `d̂` in (c), over a sample of `C`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condensation_margin: Option<f64>,
    /// Open set condition: (a) and (b).
    pub osc: bool,
    /// All three; `None` when the system has no condensation set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cosc: Option<bool>,
}

pub fn check_cosc(ifs: &IfsSystem) -> Result<CoscReport> {
    let open = ifs.open_set.as_ref().ok_or_else(|| Error::arg("COSC check needs an open set U"))?;
    let u = ConvexPolytope::from_vertices(open.vertices.clone())?;
    let scale = u
        .vertices
        .iter()
        .flat_map(|v| u.vertices.iter().map(move |w| crate::metric_space::euclid(v, w)))
        .fold(0.0, f64::max);
    let tol = GEOM_TOL * scale.max(1.0);
    let images: Vec<ConvexPolytope> = ifs.maps.iter().map(|f| u.map(f)).collect();

    let containment_margin = images
        .iter()
        .flat_map(|img| img.vertices.iter().map(|v| u.depth(v)))
        .fold(f64::INFINITY, f64::min);
    let containment = containment_margin >= -tol;

    let (disjoint_method, closure_margin, disjoint) = if u.dim <= 3 {
        let mut worst = f64::INFINITY;
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                worst = worst.min(separation(&images[i], &images[j]));
            }
        }
        (DisjointnessMethod::SeparatingAxis, worst, worst >= -tol)
    } else {
        let (overlap, gap) = sampled_overlap(&images, tol);
        (DisjointnessMethod::Probabilistic, gap, !overlap)
    };
    let closures_touch = disjoint && closure_margin.abs() <= tol;

    let (condensation_separated, condensation_margin) = match &ifs.condensation {
        Some(c) => {
            let sample = c.sample((scale * 1e-3).max(1e-12));
            let margin = sample
                .iter()
                .map(|x| {
                    images.iter().map(|img| img.distance(x)).fold(u.depth(x), f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            (Some(margin > tol), Some(margin))
        }
        None => (None, None),
    };
    let osc = containment && disjoint;
    Ok(CoscReport {
        containment,
        containment_margin,
        disjoint,
        disjoint_method,
        closure_margin,
        closures_touch,
        condensation_separated,
        condensation_margin,
        osc,
        cosc: condensation_separated.map(|c| c && osc),
    })
}

/// Best separating gap along candidate axes (positive: strictly separated,
/// zero: touching, negative: overlapping).
fn separation(a: &ConvexPolytope, b: &ConvexPolytope) -> f64 {
    let d = a.dim;
    let mut axes: Vec<Vec<f64>> = a.facets.iter().chain(&b.facets).map(|(n, _)| n.clone()).collect();
    if d == 3 {
        let dirs = |p: &ConvexPolytope| -> Vec<Vec<f64>> {
            let mut out = Vec::new();
            for i in 0..p.vertices.len() {
                for j in i + 1..p.vertices.len() {
                    out.push(p.vertices[j].iter().zip(&p.vertices[i]).map(|(x, y)| x - y).collect());
                }
            }
            out
        };
        let (da, db) = (dirs(a), dirs(b));
        for ea in &da {
            for eb in &db {
                let c = vec![
                    ea[1] * eb[2] - ea[2] * eb[1],
                    ea[2] * eb[0] - ea[0] * eb[2],
                    ea[0] * eb[1] - ea[1] * eb[0],
                ];
                let l = norm(&c);
                if l > 1e-12 * norm(ea) * norm(eb) {
                    axes.push(c.iter().map(|x| x / l).collect());
                }
            }
        }
    }
    axes.iter()
        .map(|axis| {
            let (alo, ahi) = a.project(axis);
            let (blo, bhi) = b.project(axis);
            (blo - ahi).max(alo - bhi)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rejection test in high dimension: sample points of each image and look
/// for one strictly inside another image.
fn sampled_overlap(images: &[ConvexPolytope], tol: f64) -> (bool, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut min_gap = f64::INFINITY;
    for (i, img) in images.iter().enumerate() {
        for _ in 0..HIGH_DIM_SAMPLES / images.len().max(1) {
            let p = img.random_point(&mut rng);
            for (j, other) in images.iter().enumerate() {
                if i == j {
                    continue;
                }
                let depth = other.depth(&p);
                if depth > tol {
                    return (true, -depth);
                }
                min_gap = min_gap.min(-depth);
            }
        }
    }
    (false, min_gap.max(0.0))
}
