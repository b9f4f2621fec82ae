//! Nested cube systems built from nested nets.
//!
//! Level `k` uses a maximal `ρᵏ·diam`-separated net that extends the net of
//! level `k − 1`. Each level-`k+1` net point hangs off its nearest level-`k`
//! net point (ties to the smaller index); every point of the space hangs off
//! its nearest finest-level net point. A cube is the set of points below a
//! net point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_space::{FiniteMetricSpace, IndexSet};

/// Reference to the cube `Q_{level,index}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeRef {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    /// Point index of `x_{k,j}`.
    pub center: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub members: IndexSet,
}

#[derive(Debug, Clone)]
pub struct CubeTree {
    space: Arc<FiniteMetricSpace>,
    rho: f64,
    scale: f64,
    levels: Vec<Vec<Cube>>,
    // cube_of[k][i]: level-k cube holding point i (u32::MAX when unassigned).
    cube_of: Vec<Vec<u32>>,
}

/// `c = ½ − ρ/(1−ρ)`.
pub fn inner_constant(rho: f64) -> f64 {
    0.5 - rho / (1.0 - rho)
}

/// `C = 1/(1−ρ)`.
pub fn outer_constant(rho: f64) -> f64 {
    1.0 / (1.0 - rho)
}

pub fn build_cube_tree(space: Arc<FiniteMetricSpace>, rho: f64, depth: usize) -> Result<CubeTree> {
    if !(rho > 0.0 && rho < 1.0 / 3.0) {
        return Err(Error::arg(format!("rho = {rho} must lie in (0, 1/3)")));
    }
    let scale = space.diam();
    let finest = rho.powi(depth as i32) * scale;
    if finest < space.resolution_floor() * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!(
            "level {depth} separation {finest:.6e} is below the resolution floor {:.6e}",
            space.resolution_floor()
        )));
    }
    let n = space.len();
    // nets[k] lists net points in the order they were chosen
    let mut nets: Vec<Vec<usize>> = vec![vec![0]];
    let mut in_net = vec![false; n];
    in_net[0] = true;
    for k in 1..=depth {
        let sep = rho.powi(k as i32) * scale;
        let prev = &nets[k - 1];
        let order: Vec<usize> = prev.iter().copied().chain((0..n).filter(|&i| !in_net[i])).collect();
        let mut chosen = Vec::new();
        space.pack(&order, sep, Some(&mut chosen));
        debug_assert!(prev.iter().all(|p| chosen.contains(p)));
        for &i in &chosen {
            in_net[i] = true;
        }
        nets.push(chosen);
    }

    // parent of each level-(k+1) net point among level-k net points
    let mut levels: Vec<Vec<Cube>> = Vec::with_capacity(depth + 1);
    let mut slot_of = vec![u32::MAX; n];
    for net in &nets {
        let mut sorted = net.clone();
        sorted.sort_unstable();
        let cubes: Vec<Cube> = sorted
            .iter()
            .map(|&c| Cube { center: c, parent: None, children: Vec::new(), members: IndexSet::default() })
            .collect();
        levels.push(cubes);
    }
    let mut cube_of: Vec<Vec<u32>> = vec![vec![u32::MAX; n]; depth + 1];
    // finest level: every point to its nearest finest net point
    {
        let centers: Vec<usize> = levels[depth].iter().map(|c| c.center).collect();
        for (j, &c) in centers.iter().enumerate() {
            slot_of[c] = j as u32;
        }
        let radius = rho.powi(depth as i32) * scale;
        let owner = nearest_owner(&space, &slot_of, radius, 0..n);
        cube_of[depth] = owner;
    }
    for k in (0..depth).rev() {
        let centers: Vec<usize> = levels[k].iter().map(|c| c.center).collect();
        for s in slot_of.iter_mut() {
            *s = u32::MAX;
        }
        for (j, &c) in centers.iter().enumerate() {
            slot_of[c] = j as u32;
        }
        let radius = rho.powi(k as i32) * scale;
        let child_centers: Vec<usize> = levels[k + 1].iter().map(|c| c.center).collect();
        let parent_of = nearest_owner(&space, &slot_of, radius, child_centers.iter().copied());
        for (ci, &cc) in child_centers.iter().enumerate() {
            let p = parent_of[cc];
            levels[k + 1][ci].parent = Some(p as usize);
            levels[k][p as usize].children.push(ci);
        }
        let finer = std::mem::take(&mut cube_of[k + 1]);
        cube_of[k] = finer
            .iter()
            .map(|&f| levels[k + 1][f as usize].parent.expect("assigned") as u32)
            .collect();
        cube_of[k + 1] = finer;
    }
    for (k, owner) in cube_of.iter().enumerate() {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); levels[k].len()];
        for (i, &j) in owner.iter().enumerate() {
            lists[j as usize].push(i);
        }
        for (cube, list) in levels[k].iter_mut().zip(lists) {
            cube.members = IndexSet::from_sorted(list);
        }
    }
    Ok(CubeTree { space, rho, scale, levels, cube_of })
}

/// For each query point, the slot of its nearest center (ties to the smaller
/// point index). Every query lies within `radius` of some center because the
/// centers form a maximal `radius`-separated net.
fn nearest_owner(
    space: &FiniteMetricSpace,
    slot_of: &[u32],
    radius: f64,
    queries: impl Iterator<Item = usize>,
) -> Vec<u32> {
    let mut owner = vec![u32::MAX; space.len()];
    let mut ball = Vec::new();
    for q in queries {
        if slot_of[q] != u32::MAX {
            owner[q] = slot_of[q];
            continue;
        }
        let mut r = radius;
        loop {
            space.ball_into(q, r, &mut ball);
            let best = ball
                .iter()
                .filter(|&&i| slot_of[i] != u32::MAX)
                .map(|&i| (space.dist(q, i), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, i)) = best {
                owner[q] = slot_of[i];
                break;
            }
            r *= 2.0;
        }
    }
    owner
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub levels: usize,
    pub cubes: usize,
    pub rho: f64,
    pub c_const: f64,
    pub big_c_const: f64,
    pub scale: f64,
    /// (1) each level partitions the space.
    pub partition: bool,
    /// (2) cubes nest: each non-root cube sits inside its parent and every
    /// cube is the union of its children.
    pub nesting: bool,
    /// (3) `B(x, cρᵏ) ⊆ Q ⊆ B(x, Cρᵏ)` for every cube.
    pub sandwich: bool,
    pub sandwich_failures: usize,
    /// Smallest `dist(x_{k,j}, X ∖ Q_{k,j}) / (ρᵏ·scale)`; must exceed `c`.
    pub worst_inner_ratio: f64,
    /// Largest `max_{y∈Q} dist(x_{k,j}, y) / (ρᵏ·scale)`; must be at most `C`.
    pub worst_outer_ratio: f64,
    /// (4) `B(x₀, cρᵏ)` lies in a single level-`k` cube for every level.
    pub anchor: bool,
    pub anchor_point: Option<usize>,
}

impl CubeTree {
    /// Assembles a tree from explicit levels without any checks, for
    /// feeding hand-made inputs to [`CubeTree::verify`].
    pub fn from_levels(space: Arc<FiniteMetricSpace>, rho: f64, levels: Vec<Vec<Cube>>) -> Result<Self> {
        let n = space.len();
        let mut cube_of = Vec::with_capacity(levels.len());
        for level in &levels {
            let mut owner = vec![u32::MAX; n];
            for (j, cube) in level.iter().enumerate() {
                if cube.center >= n || cube.members.iter().any(|i| i >= n) {
                    return Err(Error::arg("cube refers to a point outside the space"));
                }
                for i in cube.members.iter() {
                    owner[i] = j as u32;
                }
            }
            cube_of.push(owner);
        }
        let scale = space.diam();
        Ok(CubeTree { space, rho, scale, levels, cube_of })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Length unit of the levels: level `k` works at `ρᵏ·scale`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn c_const(&self) -> f64 {
        inner_constant(self.rho)
    }

    pub fn big_c_const(&self) -> f64 {
        outer_constant(self.rho)
    }

    /// Number of the deepest level (root is level 0).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[Cube] {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<Cube>] {
        &self.levels
    }

    pub fn cube(&self, r: CubeRef) -> &Cube {
        &self.levels[r.level][r.index]
    }

    pub fn level_radius(&self, k: usize) -> f64 {
        self.rho.powi(k as i32) * self.scale
    }

    /// Level-`k` cube containing point `i`.
    pub fn cube_of(&self, k: usize, i: usize) -> Option<usize> {
        match self.cube_of[k][i] {
            u32::MAX => None,
            j => Some(j as usize),
        }
    }

    pub(crate) fn owners(&self, k: usize) -> &[u32] {
        &self.cube_of[k]
    }

    /// Level-`k` cubes with at least one member in the closed ball.
    pub fn cubes_meeting_ball(&self, level: usize, center: usize, r: f64) -> Result<Vec<CubeRef>> {
        if level >= self.levels.len() {
            return Err(Error::arg(format!("level {level} not in tree (depth {})", self.depth())));
        }
        let ball = self.space.ball_members(center, r)?;
        let mut idx: Vec<usize> = ball.iter().filter_map(|i| self.cube_of(level, i)).collect();
        idx.sort_unstable();
        idx.dedup();
        Ok(idx.into_iter().map(|index| CubeRef { level, index }).collect())
    }

    pub fn verify(&self) -> TreeReport {
        verify_tree(self)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rho": self.rho,
            "scale": self.scale,
            "c_const": self.c_const(),
            "big_c_const": self.big_c_const(),
            "levels": self.levels,
        })
    }
}

pub fn verify_tree(tree: &CubeTree) -> TreeReport {
    let space = &tree.space;
    let n = space.len();
    let c = tree.c_const();
    let big_c = tree.big_c_const();

    let mut partition = true;
    for level in &tree.levels {
        let mut seen = vec![0u32; n];
        for cube in level {
            for i in cube.members.iter() {
                seen[i] += 1;
            }
        }
        partition &= seen.iter().all(|&s| s == 1);
    }

    let mut nesting = tree.levels.first().map(|l| l.len() == 1).unwrap_or(false);
    for k in 1..tree.levels.len() {
        for (j, cube) in tree.levels[k].iter().enumerate() {
            let ok = match cube.parent {
                Some(p) if p < tree.levels[k - 1].len() => {
                    let parent = &tree.levels[k - 1][p];
                    parent.children.contains(&j) && cube.members.is_subset_of(&parent.members)
                }
                _ => false,
            };
            nesting &= ok;
        }
        for parent in &tree.levels[k - 1] {
            let mut union: Vec<usize> = Vec::new();
            for &ch in &parent.children {
                match tree.levels[k].get(ch) {
                    Some(child) => union.extend(child.members.iter()),
                    None => nesting = false,
                }
            }
            union.sort_unstable();
            nesting &= union.as_slice() == parent.members.as_slice();
        }
    }

    let mut failures = 0usize;
    let mut worst_inner = f64::INFINITY;
    let mut worst_outer = 0.0f64;
    let mut ball = Vec::new();
    for (k, level) in tree.levels.iter().enumerate() {
        let unit = tree.level_radius(k);
        for cube in level {
            let x = cube.center;
            let outer = cube.members.iter().map(|y| space.dist(x, y)).fold(0.0, f64::max) / unit;
            // nearest non-member, searched out to the outer radius
            space.ball_into(x, big_c * unit, &mut ball);
            let inner = ball
                .iter()
                .filter(|&&y| !cube.members.contains(y))
                .map(|&y| space.dist(x, y))
                .fold(f64::INFINITY, f64::min)
                / unit;
            let inner = inner.min(big_c.max(c) + 1.0);
            let fits_outer = outer <= big_c * (1.0 + 1e-12);
            let fits_inner = inner > c;
            if !(fits_outer && fits_inner && cube.members.contains(x)) {
                failures += 1;
            }
            worst_inner = worst_inner.min(inner);
            worst_outer = worst_outer.max(outer);
        }
    }

    let anchor_point = tree.levels.first().and_then(|l| l.first()).map(|c| c.center);
    let anchor = anchor_point.is_some_and(|x0| {
        tree.levels.iter().enumerate().all(|(k, _)| {
            let inside = space.ball_members(x0, c * tree.level_radius(k)).unwrap_or_default();
            let mut owners = inside.iter().map(|i| tree.cube_of[k][i]);
            match owners.next() {
                Some(first) => first != u32::MAX && owners.all(|o| o == first),
                None => false,
            }
        })
    });

    TreeReport {
        levels: tree.levels.len(),
        cubes: tree.levels.iter().map(Vec::len).sum(),
        rho: tree.rho,
        c_const: c,
        big_c_const: big_c,
        scale: tree.scale,
        partition,
        nesting,
        sandwich: failures == 0,
        sandwich_failures: failures,
        worst_inner_ratio: worst_inner,
        worst_outer_ratio: worst_outer,
        anchor,
        anchor_point,
    }
}
