//! Measures built by distributing mass down a cube tree: each cube hands
//! most of its mass to `K` children near its center and a small uniform
//! share to the rest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cube_tree::{outer_constant, CubeTree};
use crate::dim_est::{BallMeasure, Scratch};
use crate::error::{Error, Result};
use crate::metric_space::FiniteMetricSpace;

/// The fixed `λ` of the construction.
pub const LAMBDA: f64 = 0.125;

const CONSERVATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassParams {
    /// Target lower regularity exponent.
    pub t: f64,
    /// Auxiliary exponent, `t < s`.
    pub s: f64,
    /// Packing constant for `s`.
    pub c0: f64,
    pub lambda: f64,
    /// `K = ⌈ρ⁻ᵗ⌉`.
    pub k: usize,
    /// Uniform bound on the number of children (doubling variant).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl MassParams {
    pub fn new(t: f64, s: f64, c0: f64, rho: f64) -> Result<Self> {
        if !(t > 0.0 && t < s && s.is_finite()) {
            return Err(Error::arg(format!("need 0 < t < s, got t = {t}, s = {s}")));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::arg("c0 must be positive"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::arg("rho must lie in (0, 1)"));
        }
        Ok(MassParams { t, s, c0, lambda: LAMBDA, k: k_for(rho, t), m: None })
    }

    pub fn with_child_bound(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }
}

/// `⌈ρ⁻ᵗ⌉`, ignoring round-off just above an integer.
pub fn k_for(rho: f64, t: f64) -> usize {
    let v = rho.powf(-t);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r {
        r as usize
    } else {
        v.ceil() as usize
    }
}

/// Largest `ρ = 2⁻ᵐ` strictly below `1/64`, `√2 − 5/4` and
/// `(c0·2⁻ˢ·λˢ)^{1/(s−t)}`.
pub fn choose_rho(s: f64, t: f64, c0: f64) -> Result<f64> {
    if !(t > 0.0 && t < s && s.is_finite()) {
        return Err(Error::arg(format!("need 0 < t < s, got t = {t}, s = {s}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::arg("c0 must be positive"));
    }
    // log2 of each bound; the third one can be far below f64 range
    let b1 = -6.0f64;
    let b2 = (2f64.sqrt() - 1.25).log2();
    let b3 = (c0.log2() - s + s * LAMBDA.log2()) / (s - t);
    let bound = b1.min(b2).min(b3);
    let m = (-bound).floor() + 1.0;
    if m > 1074.0 {
        return Err(Error::arg(format!("required rho = 2^-{m} underflows f64")));
    }
    Ok(2f64.powf(-m))
}

/// The three estimates that the proof asks of `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoConstraints {
    pub rho: f64,
    /// `ρ² + 2Cρ < 1`.
    pub covering: bool,
    /// `(2C+4)ρ + λ < 8ρ + 1/8 < 1/4 < c`.
    pub annulus: bool,
    /// `c₀ C⁻ˢ λˢ ρ⁻ˢ > ρ⁻ᵗ`.
    pub capacity_bound: bool,
}

pub fn rho_constraints(rho: f64, p: &MassParams) -> RhoConstraints {
    let big_c = outer_constant(rho);
    let c = crate::cube_tree::inner_constant(rho);
    let covering = rho * rho + 2.0 * big_c * rho < 1.0;
    // first inequality rearranged so tiny ρ is not absorbed by the constants
    let first = (2.0 * big_c - 4.0) * rho < 0.125 - p.lambda;
    let annulus = first && 8.0 * rho + 0.125 < 0.25 && 0.25 < c;
    let capacity_bound = p.c0.ln() - p.s * big_c.ln() + p.s * p.lambda.ln() - p.s * rho.ln() > -p.t * rho.ln();
    RhoConstraints { rho, covering, annulus, capacity_bound }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Doubling,
}

#[derive(Debug, Clone)]
pub struct MassDistribution {
    tree: Arc<CubeTree>,
    weights: Vec<Vec<f64>>,
    variant: Variant,
    params: MassParams,
    constraints: RhoConstraints,
    // for sorted lines whose finest cubes are index intervals: prefix sums
    // of finest weights in cube order
    line_prefix: Option<Vec<f64>>,
}

pub fn build_mass(tree: Arc<CubeTree>, params: MassParams) -> Result<MassDistribution> {
    distribute(tree, params, Variant::Plain)
}

pub fn build_mass_doubling(tree: Arc<CubeTree>, params: MassParams) -> Result<MassDistribution> {
    distribute(tree, params, Variant::Doubling)
}

fn distribute(tree: Arc<CubeTree>, params: MassParams, variant: Variant) -> Result<MassDistribution> {
    let k = params.k;
    if k == 0 {
        return Err(Error::arg("K must be at least 1"));
    }
    let m_bound = match variant {
        Variant::Plain => None,
        Variant::Doubling => {
            let m = params.m.ok_or_else(|| Error::arg("doubling variant needs the child bound M"))?;
            let most = tree.levels().iter().flatten().map(|c| c.children.len()).max().unwrap_or(0);
            if m < most {
                return Err(Error::arg(format!("M = {m} is below the largest child count {most}")));
            }
            Some(m as f64)
        }
    };
    let space = tree.space().clone();
    let mut weights: Vec<Vec<f64>> = tree.levels().iter().map(|l| vec![0.0; l.len()]).collect();
    weights[0][0] = 1.0;
    let mut ball = Vec::new();
    let kf = k as f64;
    for level in 0..tree.depth() {
        let radius = params.lambda * tree.level_radius(level);
        let (upper, lower) = tree.levels().split_at(level + 1);
        let (parents, children) = (&upper[level], &lower[0]);
        for (j, parent) in parents.iter().enumerate() {
            let x = parent.center;
            space.ball_into(x, radius, &mut ball);
            let mut near: Vec<usize> = ball.iter().filter_map(|&i| tree.cube_of(level + 1, i)).collect();
            near.sort_unstable();
            near.dedup();
            near.retain(|c| parent.children.contains(c));
            if near.len() < k {
                return Err(Error::Capacity { level, index: j, found: near.len(), needed: k });
            }
            near.sort_by(|&a, &b| {
                space
                    .dist(x, children[a].center)
                    .total_cmp(&space.dist(x, children[b].center))
                    .then(a.cmp(&b))
            });
            near.truncate(k);
            let n_children = parent.children.len() as f64;
            let (eps, center_share) = match m_bound {
                None => {
                    let eps = 1.0 / ((kf + 1.0) * n_children);
                    (eps, 1.0 / (kf + 1.0) + eps)
                }
                Some(m) => {
                    let eps = 1.0 / ((kf + 1.0) * m);
                    let eps_tilde = (1.0 / (kf + 1.0) - (n_children - kf) * eps) / kf;
                    if !(eps_tilde > 0.0) {
                        return Err(Error::Internal(format!(
                            "non-positive center increment at cube ({level}, {j})"
                        )));
                    }
                    (eps, 1.0 / (kf + 1.0) + eps_tilde)
                }
            };
            let w = weights[level][j];
            for &ch in &parent.children {
                let share = if near.contains(&ch) { center_share } else { eps };
                weights[level + 1][ch] = share * w;
            }
        }
    }
    let constraints = rho_constraints(tree.rho(), &params);
    let line_prefix = line_prefix(&tree, &weights[tree.depth()]);
    let mass = MassDistribution { tree, weights, variant, params, constraints, line_prefix };
    let check = mass.check();
    if check.max_conservation_error > CONSERVATION_TOL {
        return Err(Error::Internal(format!(
            "mass conservation error {:.3e}",
            check.max_conservation_error
        )));
    }
    Ok(mass)
}

fn line_prefix(tree: &CubeTree, finest: &[f64]) -> Option<Vec<f64>> {
    let space = tree.space();
    space.ball_range(0, 0.0)?;
    let owners = tree.owners(tree.depth());
    if owners.windows(2).any(|w| w[1] < w[0]) {
        return None;
    }
    let mut prefix = Vec::with_capacity(finest.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for w in finest {
        acc += w;
        prefix.push(acc);
    }
    Some(prefix)
}

/// Exact checks of the construction's invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCheck {
    /// Largest `|parent − Σ children| / parent`.
    pub max_conservation_error: f64,
    pub all_positive: bool,
    /// Largest `child / parent`; the decay bound asks for at most `ρᵗ`.
    pub max_child_ratio: f64,
    pub decay_holds: bool,
    /// Smallest `child / parent`; the doubling variant asks for at least `ε`.
    pub min_child_ratio: f64,
    /// `Some` for the doubling variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_sided_holds: Option<bool>,
    pub edges: usize,
}

impl MassDistribution {
    pub fn tree(&self) -> &Arc<CubeTree> {
        &self.tree
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &MassParams {
        &self.params
    }

    pub fn constraints(&self) -> &RhoConstraints {
        &self.constraints
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, level: usize, index: usize) -> f64 {
        self.weights[level][index]
    }

    /// The uniform annulus share `ε = 1/((K+1)M)` of the doubling variant.
    pub fn epsilon(&self) -> Option<f64> {
        self.params.m.filter(|_| self.variant == Variant::Doubling).map(|m| {
            1.0 / ((self.params.k as f64 + 1.0) * m as f64)
        })
    }

    pub fn check(&self) -> MassCheck {
        let rho_t = self.tree.rho().powf(self.params.t);
        let eps = self.epsilon();
        let mut worst_cons = 0.0f64;
        let mut max_ratio = 0.0f64;
        let mut min_ratio = f64::INFINITY;
        let mut positive = true;
        let mut edges = 0;
        for level in 0..self.tree.depth() {
            for (j, parent) in self.tree.level(level).iter().enumerate() {
                let w = self.weights[level][j];
                positive &= w > 0.0;
                let sum: f64 = parent.children.iter().map(|&c| self.weights[level + 1][c]).sum();
                worst_cons = worst_cons.max((w - sum).abs() / w);
                for &c in &parent.children {
                    let ratio = self.weights[level + 1][c] / w;
                    max_ratio = max_ratio.max(ratio);
                    min_ratio = min_ratio.min(ratio);
                    edges += 1;
                }
            }
        }
        positive &= self.weights[self.tree.depth()].iter().all(|&w| w > 0.0);
        let slack = 1.0 + 1e-12;
        MassCheck {
            max_conservation_error: worst_cons,
            all_positive: positive,
            max_child_ratio: max_ratio,
            decay_holds: max_ratio <= rho_t * slack,
            min_child_ratio: min_ratio,
            two_sided_holds: eps.map(|e| min_ratio * slack >= e && max_ratio <= rho_t * slack),
            edges,
        }
    }

    /// `μ(B(center, r))`: total weight of the finest cubes meeting the ball.
    pub fn measure_of_ball(&self, center: usize, r: f64) -> f64 {
        let finest = self.tree.level_radius(self.tree.depth());
        if r < finest * 1e-9 {
            log::warn!("ball radius {r:.3e} is below the finest cube scale {finest:.3e}");
        }
        self.ball_mass(center, r, &mut Scratch::default())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": self.variant,
            "params": self.params,
            "rho": self.tree.rho(),
            "constraints": self.constraints,
            "check": self.check(),
            "weights": self.weights,
        })
    }
}

impl BallMeasure for MassDistribution {
    fn space(&self) -> &FiniteMetricSpace {
        self.tree.space()
    }

    fn ball_mass(&self, center: usize, r: f64, scratch: &mut Scratch) -> f64 {
        let depth = self.tree.depth();
        let finest = &self.weights[depth];
        let owners = self.tree.owners(depth);
        if let (Some(prefix), Some((lo, hi))) = (&self.line_prefix, self.tree.space().ball_range(center, r)) {
            let (a, b) = (owners[lo] as usize, owners[hi - 1] as usize + 1);
            if b - a <= 64 {
                return finest[a..b].iter().sum();
            }
            return prefix[b] - prefix[a];
        }
        self.tree.space().ball_into(center, r, &mut scratch.ball);
        if scratch.mark.len() != finest.len() {
            scratch.mark = vec![0; finest.len()];
            scratch.epoch = 0;
        }
        scratch.epoch = scratch.epoch.wrapping_add(1);
        if scratch.epoch == 0 {
            scratch.mark.fill(0);
            scratch.epoch = 1;
        }
        let mut total = 0.0;
        for &i in &scratch.ball {
            let c = owners[i] as usize;
            if scratch.mark[c] != scratch.epoch {
                scratch.mark[c] = scratch.epoch;
                total += finest[c];
            }
        }
        total
    }
}
