//! Multiscale estimators for the Assouad, lower and regularity dimensions.
//!
//! A sweep evaluates a count (packing numbers of balls) or a mass ratio
//! (measures of concentric balls) at every sampled center and every pair
//! `(r, R)` of a geometric grid `R = diam·b⁻ⁱ`, `r = R·b⁻ᴸ`, keeping
//! `r ≥ guard·resolution_floor`.
//!
//! Two aggregates are reported:
//!
//! * `raw_exponent`, the sup (or inf) over the whole sweep of
//!   `log N / log(R/r)`. This is the quantity in the definitions, but at
//!   finite resolution it carries a bias of `log C / log(R/r)` from the
//!   multiplicative constant.
//! * `exponent`, the least-squares slope of the envelope
//!   `L ↦ sup_{x,R} log N(x, R, R·b⁻ᴸ)` against `log(R/r) = L log b`, with
//!   the same set of radii `R` at every `L`. A bounded constant shifts the
//!   envelope without changing its slope.

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_space::FiniteMetricSpace;

pub const DEFAULT_GUARD: f64 = 10.0;
pub const DEFAULT_MAX_CENTERS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Assouad,
    Lower,
    UpperReg,
    LowerReg,
}

impl Mode {
    fn takes_sup(self) -> bool {
        matches!(self, Mode::Assouad | Mode::UpperReg)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "assouad" => Ok(Mode::Assouad),
            "lower" => Ok(Mode::Lower),
            "uppereg" | "upper_reg" | "upperreg" => Ok(Mode::UpperReg),
            "lowreg" | "lower_reg" | "lowerreg" => Ok(Mode::LowerReg),
            other => Err(Error::arg(format!("unknown estimator mode {other:?}"))),
        }
    }
}

/// Which points serve as ball centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centers {
    /// Every point when `n ≤ 2000`, otherwise `Net(2000)`.
    Auto,
    All,
    /// Seeded uniform sample of this many points.
    Sample(usize),
    /// Greedy net at the finest dyadic fraction of the diameter that keeps at
    /// most this many points. Unlike a uniform sample it always keeps
    /// isolated points.
    Net(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub centers: Centers,
    /// Grid ratio `b > 1` between consecutive radii.
    pub base: f64,
    /// Smallest admissible `r` is `guard · resolution_floor`.
    pub guard: f64,
    /// Cap on `L`, the number of grid steps between `r` and `R`.
    pub max_levels: Option<usize>,
    /// Number of radii `R` shared by every level in the slope window.
    pub window_radii: usize,
    /// Smallest `L` entering the slope fit (when the window is deep enough).
    pub min_level: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            centers: Centers::Auto,
            base: 2.0,
            guard: DEFAULT_GUARD,
            max_levels: None,
            window_radii: 3,
            min_level: 2,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn with_base(mut self, base: f64) -> Self {
        self.base = base;
        self
    }

    pub fn with_centers(mut self, centers: Centers) -> Self {
        self.centers = centers;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 1.0 && self.base.is_finite()) {
            return Err(Error::arg("grid base must exceed 1"));
        }
        if !(self.guard >= 1.0) {
            return Err(Error::arg("guard must be at least 1"));
        }
        if self.window_radii == 0 {
            return Err(Error::arg("window_radii must be positive"));
        }
        if let Centers::Sample(0) | Centers::Net(0) = self.centers {
            return Err(Error::arg("need at least one center"));
        }
        if self.min_level == 0 {
            return Err(Error::arg("min_level starts at 1"));
        }
        Ok(())
    }

    /// Center indices, sorted.
    pub fn pick_centers(&self, space: &FiniteMetricSpace) -> Vec<usize> {
        let n = space.len();
        match self.centers {
            Centers::All => (0..n).collect(),
            Centers::Auto if n <= DEFAULT_MAX_CENTERS => (0..n).collect(),
            Centers::Auto => net_centers(space, DEFAULT_MAX_CENTERS),
            Centers::Net(k) if k >= n => (0..n).collect(),
            Centers::Net(k) => net_centers(space, k),
            Centers::Sample(k) if k >= n => (0..n).collect(),
            Centers::Sample(k) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut v = sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
        }
    }
}

fn net_centers(space: &FiniteMetricSpace, k: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..space.len()).collect();
    let mut best = vec![0];
    let mut sep = space.diam();
    for _ in 0..64 {
        let mut net = Vec::new();
        space.pack(&all, sep, Some(&mut net));
        if net.len() > k {
            break;
        }
        best = net;
        sep /= 2.0;
    }
    best.sort_unstable();
    best
}

/// The admissible scale pairs of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub base: f64,
    /// `radii[i] = diam · base⁻ⁱ`.
    pub radii: Vec<f64>,
    /// `levels[i]`: admissible `L = 1..=levels[i]` for `radii[i]`.
    pub levels: Vec<usize>,
    /// Slope window: the first `window_radii` radii and
    /// `window_first ≤ L ≤ window_levels`.
    pub window_radii: usize,
    pub window_first: usize,
    pub window_levels: usize,
}

impl ScaleGrid {
    pub fn new(diam: f64, floor: f64, cfg: &SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let r_min = cfg.guard * floor;
        let cap = cfg.max_levels.unwrap_or(usize::MAX);
        let mut radii = Vec::new();
        let mut levels = Vec::new();
        for i in 0.. {
            let big = diam * cfg.base.powi(-i);
            let l = admissible_levels(big, r_min, cfg.base).min(cap);
            if l == 0 {
                break;
            }
            radii.push(big);
            levels.push(l);
        }
        if radii.is_empty() {
            return Err(Error::Resolution(format!(
                "no scale pair with guard·floor = {r_min:.4e} ≤ r < R ≤ diam = {diam:.4e}"
            )));
        }
        let window_radii = cfg.window_radii.min(radii.len());
        let window_levels = levels[window_radii - 1];
        let window_first = if window_levels > cfg.min_level { cfg.min_level } else { 1 };
        Ok(ScaleGrid { base: cfg.base, radii, levels, window_radii, window_first, window_levels })
    }

    pub fn pair_count(&self) -> usize {
        self.levels.iter().sum()
    }

    pub fn in_window(&self, i: usize, level: usize) -> bool {
        i < self.window_radii && (self.window_first..=self.window_levels).contains(&level)
    }

    fn small_radius(&self, i: usize, level: usize) -> f64 {
        self.radii[i] * self.base.powi(-(level as i32))
    }
}

fn admissible_levels(big: f64, r_min: f64, base: f64) -> usize {
    let mut l = 0;
    // small relative slack so that exact grid coincidences count
    while big * base.powi(-(l as i32 + 1)) >= r_min * (1.0 - 1e-9) {
        l += 1;
        if l > 4096 {
            break;
        }
    }
    l
}

/// One evaluation of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub center: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Count or mass at the small radius.
    pub at_r: f64,
    /// Count (always 1 for packing sweeps) or mass at the large radius.
    pub at_big_r: f64,
    pub log_ratio_exponent: f64,
    #[serde(skip)]
    radius_index: usize,
    #[serde(skip)]
    level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub mode: Mode,
    /// Envelope slope over the fixed window.
    pub exponent: f64,
    /// Extremal `log ratio / log(R/r)` over the whole sweep.
    pub raw_exponent: f64,
    /// Empirical constant for `exponent`: the `C` in `N ≤ C (R/r)^s` for
    /// upper modes, the `c` in `N ≥ c (R/r)^s` for lower modes (mass ratios
    /// play the role of `N` for regularity modes).
    pub constant: f64,
    /// Triple attaining `raw_exponent`.
    pub witness: Witness,
    pub centers: usize,
    pub pairs: usize,
    pub window_radii: usize,
    pub window_levels: usize,
}

/// Estimate together with the rows it was computed from.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub estimate: DimEstimate,
    pub rows: Vec<SweepRow>,
    pub grid: ScaleGrid,
}

/// A measure on a finite space that can weigh closed balls.
pub trait BallMeasure: Sync {
    fn space(&self) -> &FiniteMetricSpace;

    /// `μ(B(center, r))`; `ball` is scratch space.
    fn ball_mass(&self, center: usize, r: f64, scratch: &mut Scratch) -> f64;
}

/// Reusable buffers for ball queries.
#[derive(Debug, Default)]
pub struct Scratch {
    pub(crate) ball: Vec<usize>,
    pub(crate) mark: Vec<u32>,
    pub(crate) epoch: u32,
}

/// Point masses on the points of a space.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    space: FiniteMetricSpace,
    weights: Vec<f64>,
    // prefix sums over index order, for sorted lines
    prefix: Option<Vec<f64>>,
}

impl WeightedSpace {
    pub fn new(space: FiniteMetricSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::arg("one weight per point is required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::arg("weights must be finite and nonnegative"));
        }
        let prefix = space.ball_range(0, 0.0).map(|_| {
            std::iter::once(0.0)
                .chain(weights.iter().scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                }))
                .collect()
        });
        Ok(WeightedSpace { space, weights, prefix })
    }

    pub fn uniform(space: FiniteMetricSpace) -> Self {
        let n = space.len();
        WeightedSpace::new(space, vec![1.0 / n as f64; n]).expect("uniform weights are valid")
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled_weights(&self, factor: f64) -> Result<Self> {
        WeightedSpace::new(self.space.clone(), self.weights.iter().map(|w| w * factor).collect())
    }
}

impl BallMeasure for WeightedSpace {
    fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    fn ball_mass(&self, center: usize, r: f64, scratch: &mut Scratch) -> f64 {
        if let (Some(prefix), Some((lo, hi))) = (&self.prefix, self.space.ball_range(center, r)) {
            // weights summed directly when the range is short, to keep tiny balls exact
            if hi - lo <= 64 {
                return self.weights[lo..hi].iter().sum();
            }
            return prefix[hi] - prefix[lo];
        }
        self.space.ball_into(center, r, &mut scratch.ball);
        scratch.ball.iter().map(|&i| self.weights[i]).sum()
    }
}

pub fn assouad_estimate(space: &FiniteMetricSpace, cfg: &SweepConfig) -> Result<DimEstimate> {
    Ok(count_sweep(space, Mode::Assouad, cfg)?.estimate)
}

pub fn lower_estimate(space: &FiniteMetricSpace, cfg: &SweepConfig) -> Result<DimEstimate> {
    Ok(count_sweep(space, Mode::Lower, cfg)?.estimate)
}

pub fn upper_reg_estimate<M: BallMeasure + ?Sized>(mu: &M, cfg: &SweepConfig) -> Result<DimEstimate> {
    Ok(mass_sweep(mu, Mode::UpperReg, cfg)?.estimate)
}

pub fn lower_reg_estimate<M: BallMeasure + ?Sized>(mu: &M, cfg: &SweepConfig) -> Result<DimEstimate> {
    Ok(mass_sweep(mu, Mode::LowerReg, cfg)?.estimate)
}

/// Packing-count sweep. Assouad mode packs `B(x, R)` at `r`, lower mode at
/// `2r`, so each is a conservative proxy for the covering number.
pub fn count_sweep(space: &FiniteMetricSpace, mode: Mode, cfg: &SweepConfig) -> Result<Sweep> {
    if !matches!(mode, Mode::Assouad | Mode::Lower) {
        return Err(Error::arg("count sweeps run in assouad or lower mode"));
    }
    let grid = ScaleGrid::new(space.diam(), space.resolution_floor(), cfg)?;
    let centers = cfg.pick_centers(space);
    let factor = if mode == Mode::Lower { 2.0 } else { 1.0 };
    let ln_b = grid.base.ln();
    let per_center: Vec<Vec<SweepRow>> = centers
        .par_iter()
        .map_init(Vec::new, |ball, &x| {
            let mut rows = Vec::with_capacity(grid.pair_count());
            for (i, &big) in grid.radii.iter().enumerate() {
                let range = space.ball_range(x, big);
                if range.is_none() {
                    space.ball_into(x, big, ball);
                }
                for level in 1..=grid.levels[i] {
                    let r = grid.small_radius(i, level);
                    let n = match range {
                        Some((lo, hi)) => space.pack_range(lo, hi, factor * r),
                        None => space.pack(ball, factor * r, None),
                    } as f64;
                    rows.push(SweepRow {
                        center: x,
                        r,
                        big_r: big,
                        at_r: n,
                        at_big_r: 1.0,
                        log_ratio_exponent: n.ln() / (level as f64 * ln_b),
                        radius_index: i,
                        level,
                    });
                }
            }
            rows
        })
        .collect();
    let rows: Vec<SweepRow> = per_center.into_iter().flatten().collect();
    let estimate = aggregate(mode, &rows, &grid, centers.len(), |row| row.at_r.ln());
    Ok(Sweep { estimate, rows, grid })
}

/// Mass-ratio sweep of `log(μ(B(x,R))/μ(B(x,r))) / log(R/r)`.
pub fn mass_sweep<M: BallMeasure + ?Sized>(mu: &M, mode: Mode, cfg: &SweepConfig) -> Result<Sweep> {
    if !matches!(mode, Mode::UpperReg | Mode::LowerReg) {
        return Err(Error::arg("mass sweeps run in upper_reg or lower_reg mode"));
    }
    let space = mu.space();
    let grid = ScaleGrid::new(space.diam(), space.resolution_floor(), cfg)?;
    let centers = cfg.pick_centers(space);
    let ln_b = grid.base.ln();
    let per_center: Vec<Result<Vec<SweepRow>>> = centers
        .par_iter()
        .map_init(Scratch::default, |scratch, &x| {
            let mut rows = Vec::with_capacity(grid.pair_count());
            for (i, &big) in grid.radii.iter().enumerate() {
                let m_big = mu.ball_mass(x, big, scratch);
                for level in 1..=grid.levels[i] {
                    let r = grid.small_radius(i, level);
                    let m_small = mu.ball_mass(x, r, scratch);
                    if !(m_small > 0.0) {
                        return Err(Error::Degenerate(format!(
                            "ball B(x{x}, {r:.6e}) has zero mass"
                        )));
                    }
                    rows.push(SweepRow {
                        center: x,
                        r,
                        big_r: big,
                        at_r: m_small,
                        at_big_r: m_big,
                        log_ratio_exponent: (m_big / m_small).ln() / (level as f64 * ln_b),
                        radius_index: i,
                        level,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for chunk in per_center {
        rows.extend(chunk?);
    }
    let estimate = aggregate(mode, &rows, &grid, centers.len(), |row| (row.at_big_r / row.at_r).ln());
    Ok(Sweep { estimate, rows, grid })
}

fn aggregate(
    mode: Mode,
    rows: &[SweepRow],
    grid: &ScaleGrid,
    centers: usize,
    log_value: impl Fn(&SweepRow) -> f64,
) -> DimEstimate {
    let sup = mode.takes_sup();
    let better = |a: f64, b: f64| if sup { a > b } else { a < b };

    let mut best = &rows[0];
    for row in &rows[1..] {
        if better(row.log_ratio_exponent, best.log_ratio_exponent) {
            best = row;
        }
    }

    let ln_b = grid.base.ln();
    let mut envelope: Vec<Option<f64>> = vec![None; grid.window_levels + 1];
    for row in rows.iter().filter(|r| grid.in_window(r.radius_index, r.level)) {
        let v = log_value(row);
        let slot = &mut envelope[row.level];
        *slot = Some(match *slot {
            Some(e) if !better(v, e) => e,
            _ => v,
        });
    }
    let pts: Vec<(f64, f64)> = envelope
        .iter()
        .enumerate()
        .filter_map(|(l, e)| e.map(|v| (l as f64 * ln_b, v)))
        .collect();
    let exponent = slope(&pts).max(0.0);

    // constant realizing the bound at `exponent` over the whole sweep
    let mut constant = if sup { f64::NEG_INFINITY } else { f64::INFINITY };
    for row in rows {
        let c = (log_value(row) - exponent * row.level as f64 * ln_b).exp();
        constant = if sup { constant.max(c) } else { constant.min(c) };
    }
    if matches!(mode, Mode::UpperReg | Mode::LowerReg) {
        // stated for μ(B(x,r))/μ(B(x,R)), the reciprocal of the swept ratio
        constant = 1.0 / constant;
    }

    DimEstimate {
        mode,
        exponent,
        raw_exponent: best.log_ratio_exponent,
        constant,
        witness: Witness { center: best.center, r: best.r, big_r: best.big_r },
        centers,
        pairs: grid.pair_count(),
        window_radii: grid.window_radii,
        window_levels: grid.window_levels,
    }
}

/// Least-squares slope; a single point is read as a line through the origin.
fn slope(pts: &[(f64, f64)]) -> f64 {
    match pts {
        [] => 0.0,
        [(x, y)] => y / x,
        _ => {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            sxy / sxx
        }
    }
}

/// `sup μ(B(x,2r))/μ(B(x,r))` overall and per dyadic band of `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub sup_ratio: f64,
    /// `(top radius, sup)` for each dyadic band of radii, largest first.
    pub bands: Vec<(f64, f64)>,
    /// Largest band sup divided by the smallest.
    pub band_variation: f64,
}

const BAND_SAMPLES: usize = 8;

pub fn doubling_profile<M: BallMeasure + ?Sized>(mu: &M, cfg: &SweepConfig) -> Result<DoublingReport> {
    let space = mu.space();
    let doubled = SweepConfig { base: 2.0, ..cfg.clone() };
    let grid = ScaleGrid::new(space.diam(), space.resolution_floor(), &doubled)?;
    // band j holds r in (diam·2⁻ʲ⁻¹, diam·2⁻ʲ], sampled geometrically
    let tops: Vec<f64> = (1..=grid.levels[0]).map(|j| grid.radii[0] * 2f64.powi(-(j as i32))).collect();
    let radii: Vec<f64> = tops
        .iter()
        .flat_map(|&top| (0..BAND_SAMPLES).map(move |i| top * 2f64.powf(-(i as f64) / BAND_SAMPLES as f64)))
        .collect();
    let centers = cfg.pick_centers(space);
    let per_center: Vec<Vec<f64>> = centers
        .par_iter()
        .map_init(Scratch::default, |scratch, &x| {
            radii
                .iter()
                .map(|&r| mu.ball_mass(x, 2.0 * r, scratch) / mu.ball_mass(x, r, scratch))
                .collect()
        })
        .collect();
    let bands: Vec<(f64, f64)> = tops
        .iter()
        .enumerate()
        .map(|(j, &top)| {
            let band = j * BAND_SAMPLES..(j + 1) * BAND_SAMPLES;
            let sup = per_center.iter().flat_map(|v| v[band.clone()].iter().copied()).fold(0.0, f64::max);
            (top, sup)
        })
        .collect();
    let sup_ratio = bands.iter().map(|b| b.1).fold(0.0, f64::max);
    let min_band = bands.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    if !sup_ratio.is_finite() {
        return Err(Error::Degenerate("a sampled ball has zero mass".into()));
    }
    Ok(DoublingReport { sup_ratio, bands, band_variation: sup_ratio / min_band })
}

/// `inf μ(B(x,τr))/μ(B(x,r))` over centers and grid radii with `τr ≤ diam`.
pub fn reverse_doubling_min<M: BallMeasure + ?Sized>(mu: &M, tau: f64, cfg: &SweepConfig) -> Result<f64> {
    if !(tau > 1.0) {
        return Err(Error::arg("tau must exceed 1"));
    }
    let space = mu.space();
    let grid = ScaleGrid::new(space.diam(), space.resolution_floor(), cfg)?;
    let diam = space.diam();
    let radii: Vec<f64> = (1..=grid.levels[0])
        .map(|l| grid.small_radius(0, l))
        .filter(|r| tau * r < diam)
        .collect();
    if radii.is_empty() {
        return Err(Error::Resolution("no radius with τr below the diameter".into()));
    }
    let centers = cfg.pick_centers(space);
    let mins: Vec<f64> = centers
        .par_iter()
        .map_init(Scratch::default, |scratch, &x| {
            radii
                .iter()
                .map(|&r| mu.ball_mass(x, tau * r, scratch) / mu.ball_mass(x, r, scratch))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Spread of `μ(B(x,r)) / rˢ` over the sweep, the `C/c` of s-regularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularitySpread {
    pub s: f64,
    pub lower: f64,
    pub upper: f64,
    pub spread: f64,
}

pub fn regularity_spread<M: BallMeasure + ?Sized>(mu: &M, s: f64, cfg: &SweepConfig) -> Result<RegularitySpread> {
    let space = mu.space();
    let grid = ScaleGrid::new(space.diam(), space.resolution_floor(), cfg)?;
    let radii: Vec<f64> = std::iter::once(grid.radii[0])
        .chain((1..=grid.levels[0]).map(|l| grid.small_radius(0, l)))
        .collect();
    let centers = cfg.pick_centers(space);
    let per_center: Vec<(f64, f64)> = centers
        .par_iter()
        .map_init(Scratch::default, |scratch, &x| {
            radii.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| {
                let v = mu.ball_mass(x, r, scratch) / r.powf(s);
                (lo.min(v), hi.max(v))
            })
        })
        .collect();
    let lower = per_center.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let upper = per_center.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(lower > 0.0) {
        return Err(Error::Degenerate("a sampled ball has zero mass".into()));
    }
    Ok(RegularitySpread { s, lower, upper, spread: upper / lower })
}
