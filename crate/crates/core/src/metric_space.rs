//! Finite metric spaces: point clouds in ℝᵈ or explicit distance matrices,
//! with closed balls, greedy packings and greedy nets.
//!
//! An *r-packing* here is a set whose points are pairwise at distance
//! strictly greater than `r`. Greedy constructions always sweep candidates in
//! ascending point index, so every routine is deterministic.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating distance matrices.
pub const MATRIX_TOLERANCE: f64 = 1e-9;

/// Sorted, duplicate-free list of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Builds an index set, checking that `indices` is strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("index set must be strictly increasing"));
        }
        Ok(IndexSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        IndexSet(indices)
    }

    /// `{0, 1, …, n-1}`.
    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        let mut it = other.0.iter();
        'outer: for &x in &self.0 {
            for &y in it.by_ref() {
                if y == x {
                    continue 'outer;
                }
                if y > x {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Points { dim: usize, coords: Vec<f64> },
    Matrix { n: usize, dist: Vec<f64> },
}

/// A finite metric space with a discretization floor.
///
/// `resolution_floor` is the scale below which the finite sample no longer
/// represents the underlying set; estimators keep their radii well above it.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    geometry: Geometry,
    resolution_floor: f64,
    diam: f64,
    // Point indices sorted by first coordinate (point clouds only).
    axis_order: Vec<u32>,
    axis_keys: Vec<f64>,
    // One-dimensional cloud whose index order is coordinate order.
    sorted_line: bool,
}

impl FiniteMetricSpace {
    /// Point cloud with Euclidean distance.
    pub fn from_points(points: &[Vec<f64>], resolution_floor: f64) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::arg("point cloud is empty"))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::arg(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, resolution_floor)
    }

    /// Point cloud from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, resolution_floor: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::arg("coordinate buffer is not a multiple of dim"));
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(Error::arg(format!("a metric space needs at least two points, got {n}")));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::arg(format!("non-finite coordinate in point {}", i / dim)));
        }
        check_floor(resolution_floor)?;
        let mut axis_order: Vec<u32> = (0..n as u32).collect();
        axis_order.sort_by(|&a, &b| {
            coords[a as usize * dim]
                .total_cmp(&coords[b as usize * dim])
                .then(a.cmp(&b))
        });
        let axis_keys = axis_order.iter().map(|&i| coords[i as usize * dim]).collect();
        let diam = if dim == 1 {
            let lo = coords.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        } else {
            cloud_diameter(dim, &coords)
        };
        let sorted_line = dim == 1 && axis_order.iter().enumerate().all(|(k, &i)| k == i as usize);
        Ok(FiniteMetricSpace {
            geometry: Geometry::Points { dim, coords },
            resolution_floor,
            diam,
            axis_order,
            axis_keys,
            sorted_line,
        })
    }

    /// Explicit distance matrix, validated for symmetry, zero diagonal,
    /// non-negativity and the triangle inequality (tolerance 1e-9).
    pub fn from_matrix(rows: &[Vec<f64>], resolution_floor: f64) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::arg(format!("a metric space needs at least two points, got {n}")));
        }
        check_floor(resolution_floor)?;
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::arg(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            dist.extend_from_slice(row);
        }
        let tol = MATRIX_TOLERANCE;
        for i in 0..n {
            if dist[i * n + i].abs() > tol {
                return Err(Error::arg(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < -tol {
                    return Err(Error::arg(format!("invalid distance at ({i}, {j})")));
                }
                if (d - dist[j * n + i]).abs() > tol {
                    return Err(Error::arg(format!("asymmetric distance at ({i}, {j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = dist[i * n + j];
                for k in 0..n {
                    if dij > dist[i * n + k] + dist[k * n + j] + tol {
                        return Err(Error::arg(format!(
                            "triangle inequality fails for ({i}, {j}) via {k}"
                        )));
                    }
                }
            }
        }
        let diam = dist.iter().copied().fold(0.0, f64::max);
        Ok(FiniteMetricSpace {
            geometry: Geometry::Matrix { n, dist },
            resolution_floor,
            diam,
            axis_order: Vec::new(),
            sorted_line: false,
            axis_keys: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        match &self.geometry {
            Geometry::Points { dim, coords } => coords.len() / dim,
            Geometry::Matrix { n, .. } => *n,
        }
    }

    /// Always false: construction rejects spaces with fewer than two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ambient dimension for point clouds, `None` for matrix input.
    pub fn dim(&self) -> Option<usize> {
        match &self.geometry {
            Geometry::Points { dim, .. } => Some(*dim),
            Geometry::Matrix { .. } => None,
        }
    }

    pub fn point(&self, i: usize) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Points { dim, coords } => coords.get(i * dim..(i + 1) * dim),
            Geometry::Matrix { .. } => None,
        }
    }

    pub fn resolution_floor(&self) -> f64 {
        self.resolution_floor
    }

    pub fn with_resolution_floor(mut self, floor: f64) -> Result<Self> {
        check_floor(floor)?;
        self.resolution_floor = floor;
        Ok(self)
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Distance between points `i` and `j`. Panics on out-of-range indices.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Points { dim, coords } => {
                euclid(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim])
            }
            Geometry::Matrix { n, dist } => dist[i * n + j],
        }
    }

    /// Copy of the space with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::arg("scale factor must be positive"));
        }
        match &self.geometry {
            Geometry::Points { dim, coords } => Self::from_flat(
                *dim,
                coords.iter().map(|c| c * factor).collect(),
                self.resolution_floor * factor,
            ),
            Geometry::Matrix { n, dist } => {
                let rows: Vec<Vec<f64>> =
                    dist.chunks(*n).map(|r| r.iter().map(|d| d * factor).collect()).collect();
                Self::from_matrix(&rows, self.resolution_floor * factor)
            }
        }
    }

    /// Smallest distance between two distinct indices (zero for clouds with
    /// repeated points).
    pub fn min_gap(&self) -> f64 {
        match &self.geometry {
            Geometry::Points { dim: 1, .. } => self
                .axis_keys
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
            _ => {
                let n = self.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    for j in i + 1..n {
                        best = best.min(self.dist(i, j));
                    }
                }
                best
            }
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::arg(format!("point index {i} out of range (n = {})", self.len())));
        }
        Ok(())
    }

    fn check_subset(&self, subset: &IndexSet) -> Result<()> {
        match subset.0.last() {
            Some(&last) => self.check_index(last),
            None => Ok(()),
        }
    }

    /// Closed ball `B(center, r) = {y : d(center, y) ≤ r}`.
    pub fn ball_members(&self, center: usize, r: f64) -> Result<IndexSet> {
        self.check_index(center)?;
        if !(r >= 0.0) {
            return Err(Error::arg("ball radius must be non-negative"));
        }
        let mut out = Vec::new();
        self.ball_into(center, r, &mut out);
        Ok(IndexSet::from_sorted(out))
    }

    /// Fills `out` with the sorted members of the closed ball. No validation.
    pub(crate) fn ball_into(&self, center: usize, r: f64, out: &mut Vec<usize>) {
        out.clear();
        match &self.geometry {
            Geometry::Points { dim, coords } => {
                let c = &coords[center * dim..(center + 1) * dim];
                let lo = self.axis_keys.partition_point(|&k| k < c[0] - r);
                let hi = self.axis_keys.partition_point(|&k| k <= c[0] + r);
                if *dim == 1 {
                    out.extend(
                        self.axis_order[lo..hi]
                            .iter()
                            .map(|&i| i as usize)
                            .filter(|&i| (coords[i] - c[0]).abs() <= r),
                    );
                } else {
                    out.extend(self.axis_order[lo..hi].iter().map(|&i| i as usize).filter(|&i| {
                        euclid(c, &coords[i * dim..(i + 1) * dim]) <= r
                    }));
                }
                out.sort_unstable();
            }
            Geometry::Matrix { n, dist } => {
                let row = &dist[center * n..(center + 1) * n];
                out.extend(row.iter().enumerate().filter(|(_, &d)| d <= r).map(|(i, _)| i));
            }
        }
    }

    /// Maximal subset of `subset` with pairwise distances strictly greater
    /// than `r`, chosen greedily in ascending index order.
    pub fn greedy_packing(&self, subset: &IndexSet, r: f64) -> Result<IndexSet> {
        check_radius(r)?;
        self.check_subset(subset)?;
        let mut chosen = Vec::new();
        self.pack(subset.as_slice(), r, Some(&mut chosen));
        Ok(IndexSet::from_sorted(chosen))
    }

    /// Size of the greedy r-net of `subset`. A maximal r-packing is an
    /// r-cover, so this is an upper bound on the covering number by closed
    /// r-balls; `greedy_packing(2r)` gives a matching lower bound.
    pub fn covering_count(&self, subset: &IndexSet, r: f64) -> Result<usize> {
        check_radius(r)?;
        self.check_subset(subset)?;
        Ok(self.pack(subset.as_slice(), r, None))
    }

    /// Maximal `sep`-separated subset of the whole space.
    pub fn build_net(&self, sep: f64) -> Result<IndexSet> {
        self.greedy_packing(&IndexSet::full(self.len()), sep)
    }

    /// For a line whose indices follow coordinate order, the closed ball is
    /// the index range `lo..hi`.
    pub(crate) fn ball_range(&self, center: usize, r: f64) -> Option<(usize, usize)> {
        if !self.sorted_line {
            return None;
        }
        let c = self.axis_keys[center];
        let lo = self.axis_keys.partition_point(|&k| k < c - r);
        let hi = self.axis_keys.partition_point(|&k| k <= c + r);
        Some((lo, hi))
    }

    /// Greedy packing size of the index range `lo..hi` on a sorted line.
    /// Ascending index order is ascending coordinate order there, so the
    /// greedy sweep only compares against the last chosen point and can jump
    /// ahead by binary search.
    pub(crate) fn pack_range(&self, lo: usize, hi: usize, r: f64) -> usize {
        debug_assert!(self.sorted_line);
        let xs = &self.axis_keys;
        let mut count = 0;
        let mut i = lo;
        while i < hi {
            count += 1;
            let t = xs[i] + r;
            i += 1 + xs[i + 1..hi].partition_point(|&x| x <= t);
        }
        count
    }

    /// Greedy packing kernel over sorted `members`; returns the packing size
    /// and optionally the chosen indices.
    pub(crate) fn pack(&self, members: &[usize], r: f64, chosen: Option<&mut Vec<usize>>) -> usize {
        if chosen.is_none() && self.sorted_line {
            if let (Some(&first), Some(&last)) = (members.first(), members.last()) {
                if last - first + 1 == members.len() {
                    return self.pack_range(first, last + 1, r);
                }
            }
        }
        match &self.geometry {
            Geometry::Points { dim: 1, coords } => pack_line(coords, members, r, chosen),
            Geometry::Points { dim, coords } if *dim <= 3 => {
                pack_grid(*dim, coords, members, r, chosen)
            }
            _ => self.pack_brute(members, r, chosen),
        }
    }

    fn pack_brute(&self, members: &[usize], r: f64, chosen: Option<&mut Vec<usize>>) -> usize {
        let mut picked: Vec<usize> = Vec::new();
        for &i in members {
            if picked.iter().all(|&j| self.dist(i, j) > r) {
                picked.push(i);
            }
        }
        let count = picked.len();
        if let Some(out) = chosen {
            *out = picked;
        }
        count
    }

    /// JSON form: `{"dim", "points", "resolution_floor"}` or
    /// `{"n", "dist", "resolution_floor"}`.
    pub fn to_json(&self) -> SpaceJson {
        match &self.geometry {
            Geometry::Points { dim, coords } => SpaceJson::Points(PointCloudJson {
                dim: *dim,
                points: coords.chunks(*dim).map(<[f64]>::to_vec).collect(),
                resolution_floor: self.resolution_floor,
            }),
            Geometry::Matrix { n, dist } => SpaceJson::Matrix(DistanceMatrixJson {
                n: *n,
                dist: dist.chunks(*n).map(<[f64]>::to_vec).collect(),
                resolution_floor: Some(self.resolution_floor),
            }),
        }
    }

    pub fn from_json(json: &SpaceJson) -> Result<Self> {
        match json {
            SpaceJson::Points(p) => {
                if let Some((i, _)) = p.points.iter().enumerate().find(|(_, q)| q.len() != p.dim) {
                    return Err(Error::Format(format!("points[{i}] does not have {} coordinates", p.dim)));
                }
                Self::from_points(&p.points, p.resolution_floor)
            }
            SpaceJson::Matrix(m) => {
                if m.dist.len() != m.n {
                    return Err(Error::Format(format!("dist has {} rows, n = {}", m.dist.len(), m.n)));
                }
                let floor = match m.resolution_floor {
                    Some(f) => f,
                    None => default_matrix_floor(&m.dist)?,
                };
                Self::from_matrix(&m.dist, floor)
            }
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: SpaceJson = serde_json::from_str(s)?;
        Self::from_json(&json)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCloudJson {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub resolution_floor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceMatrixJson {
    pub n: usize,
    pub dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceJson {
    Points(PointCloudJson),
    Matrix(DistanceMatrixJson),
}

// Matrix files may omit the floor; the smallest positive distance is used.
fn default_matrix_floor(rows: &[Vec<f64>]) -> Result<f64> {
    rows.iter()
        .flatten()
        .copied()
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::arg("distance matrix has no positive entries"))
}

fn check_floor(floor: f64) -> Result<()> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::arg("resolution_floor must be positive"));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::arg("packing radius must be positive"));
    }
    Ok(())
}

#[inline]
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cloud_diameter(dim: usize, coords: &[f64]) -> f64 {
    let n = coords.len() / dim;
    let mut best = 0.0f64;
    for i in 0..n {
        let a = &coords[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let d = euclid(a, &coords[j * dim..(j + 1) * dim]);
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// FNV-style hasher for small integer cell keys.
#[derive(Default)]
struct CellHasher(u64);

impl Hasher for CellHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
    }
    fn write_i64(&mut self, v: i64) {
        self.0 = (self.0.rotate_left(5) ^ v as u64).wrapping_mul(0x517c_c1b7_2722_0a95);
    }
}

type CellMap<V> = HashMap<[i64; 3], V, BuildHasherDefault<CellHasher>>;

const NONE: u32 = u32::MAX;

// In one dimension two chosen points can never share a cell of width r, so a
// flat array of cells with at most one occupant suffices.
fn pack_line(coords: &[f64], members: &[usize], r: f64, chosen: Option<&mut Vec<usize>>) -> usize {
    if members.is_empty() {
        return 0;
    }
    let (lo, hi) = members
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(coords[i]), hi.max(coords[i])));
    let span = ((hi - lo) / r).floor();
    let mut picked: Vec<usize> = Vec::new();
    if span < (4 * members.len() + 64) as f64 {
        let cells = span as usize + 1;
        let mut slot = vec![NONE; cells + 2];
        for &i in members {
            let x = coords[i];
            let c = (((x - lo) / r).floor() as usize).min(cells - 1) + 1;
            let free = [c - 1, c, c + 1]
                .iter()
                .all(|&k| slot[k] == NONE || (coords[slot[k] as usize] - x).abs() > r);
            if free {
                slot[c] = i as u32;
                picked.push(i);
            }
        }
    } else {
        let mut slot: CellMap<u32> = CellMap::default();
        for &i in members {
            let x = coords[i];
            let c = ((x - lo) / r).floor() as i64;
            let free = (c - 1..=c + 1).all(|k| match slot.get(&[k, 0, 0]) {
                Some(&j) => (coords[j as usize] - x).abs() > r,
                None => true,
            });
            if free {
                slot.insert([c, 0, 0], i as u32);
                picked.push(i);
            }
        }
    }
    let count = picked.len();
    if let Some(out) = chosen {
        *out = picked;
    }
    count
}

fn pack_grid(
    dim: usize,
    coords: &[f64],
    members: &[usize],
    r: f64,
    chosen: Option<&mut Vec<usize>>,
) -> usize {
    let mut cells: CellMap<Vec<u32>> = CellMap::default();
    let mut picked: Vec<usize> = Vec::new();
    let key_of = |p: &[f64]| {
        let mut k = [0i64; 3];
        for (a, x) in k.iter_mut().zip(p) {
            *a = (x / r).floor() as i64;
        }
        k
    };
    for &i in members {
        let p = &coords[i * dim..(i + 1) * dim];
        let key = key_of(p);
        let mut free = true;
        'scan: for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if dim < 2 && dy != 0 {
                    continue;
                }
                for dz in -1..=1i64 {
                    if dim < 3 && dz != 0 {
                        continue;
                    }
                    let k = [key[0] + dx, key[1] + dy, key[2] + dz];
                    if let Some(v) = cells.get(&k) {
                        if v.iter().any(|&j| {
                            euclid(p, &coords[j as usize * dim..(j as usize + 1) * dim]) <= r
                        }) {
                            free = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if free {
            cells.entry(key).or_default().push(i as u32);
            picked.push(i);
        }
    }
    let count = picked.len();
    if let Some(out) = chosen {
        *out = picked;
    }
    count
}
