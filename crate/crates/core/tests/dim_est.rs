use fraclab_core::dim_est::*;
use fraclab_core::{FiniteMetricSpace, IfsSystem};
use proptest::prelude::*;

const LOG2_LOG3: f64 = 0.630_929_753_571_457_4;

fn grid_line(n: usize) -> FiniteMetricSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
    FiniteMetricSpace::from_points(&pts, 1.0 / (n - 1) as f64).unwrap()
}

fn cantor3() -> SweepConfig {
    SweepConfig { base: 3.0, min_level: 3, ..Default::default() }
}

#[test]
fn grid_respects_guard() {
    let g = ScaleGrid::new(1.0, 1e-3, &SweepConfig::default()).unwrap();
    for (i, &big) in g.radii.iter().enumerate() {
        let smallest = big * 2f64.powi(-(g.levels[i] as i32));
        assert!(smallest >= 1e-2 * (1.0 - 1e-9));
        assert!(smallest / 2.0 < 1e-2);
    }
    assert_eq!(ScaleGrid::new(1.0, 0.2, &SweepConfig::default()).unwrap_err().kind(), "resolution");
}

#[test]
fn config_validation() {
    assert!(SweepConfig { base: 1.0, ..Default::default() }.validate().is_err());
    assert!(SweepConfig { guard: 0.5, ..Default::default() }.validate().is_err());
    assert!(SweepConfig::default().with_centers(Centers::Sample(0)).validate().is_err());
    assert!("bogus".parse::<Mode>().is_err());
    assert_eq!("uppereg".parse::<Mode>().unwrap(), Mode::UpperReg);
    assert_eq!("lowreg".parse::<Mode>().unwrap(), Mode::LowerReg);
}

#[test]
fn uniform_line_is_one_dimensional() {
    let space = grid_line(1000);
    let cfg = SweepConfig::default();
    let a = assouad_estimate(&space, &cfg).unwrap();
    let l = lower_estimate(&space, &cfg).unwrap();
    assert!((0.9..=1.1).contains(&a.exponent), "{a:?}");
    assert!(l.exponent >= 0.9, "{l:?}");
    assert!(l.exponent <= a.exponent && l.raw_exponent <= a.raw_exponent);
}

#[test]
fn two_points_have_dimension_zero() {
    let space = FiniteMetricSpace::from_points(&[vec![0.0], vec![1.0]], 1e-4).unwrap();
    // R/r ≥ 16 on every pair, so log 2 / log(R/r) ≤ 1/4
    let cfg = SweepConfig::default().with_base(16.0);
    let a = assouad_estimate(&space, &cfg).unwrap();
    assert!(a.raw_exponent <= 0.25 + 1e-12, "{a:?}");
    assert!(a.exponent <= 0.25, "{a:?}");
}

#[test]
fn cantor_net_matches_similarity_dimension() {
    let space = IfsSystem::cantor().attractor_points(3f64.powi(-8)).unwrap();
    let a = assouad_estimate(&space, &cantor3()).unwrap();
    let l = lower_estimate(&space, &cantor3()).unwrap();
    assert!((a.exponent - LOG2_LOG3).abs() <= 0.05, "{a:?}");
    assert!((l.exponent - LOG2_LOG3).abs() <= 0.07, "{l:?}");
    assert!(l.exponent <= a.exponent);
}

#[test]
fn geometric_sequence_has_lower_dimension_zero() {
    let mut pts: Vec<Vec<f64>> = (0..=20).map(|j| vec![3f64.powi(-j)]).collect();
    pts.push(vec![0.0]);
    let space = FiniteMetricSpace::from_points(&pts, 3f64.powi(-20)).unwrap();
    let l = lower_estimate(&space, &cantor3()).unwrap();
    assert!(l.exponent <= 0.15, "{l:?}");
    assert!(l.raw_exponent <= 0.15, "{l:?}");
}

#[test]
fn uniform_weights_are_one_regular() {
    let mu = WeightedSpace::uniform(grid_line(1000));
    let cfg = SweepConfig::default();
    let up = upper_reg_estimate(&mu, &cfg).unwrap();
    let lo = lower_reg_estimate(&mu, &cfg).unwrap();
    assert!((up.exponent - 1.0).abs() <= 0.1, "{up:?}");
    assert!((lo.exponent - 1.0).abs() <= 0.1, "{lo:?}");
    assert!(lo.raw_exponent <= up.raw_exponent);
    let spread = regularity_spread(&mu, 1.0, &cfg).unwrap();
    assert!(spread.spread < 10.0, "{spread:?}");
}

#[test]
fn point_mass_has_no_lower_regularity() {
    let n = 1000;
    let mut w = vec![1e-12; n];
    w[n / 2] = 1.0;
    let mu = WeightedSpace::new(grid_line(n), w).unwrap();
    let lo = lower_reg_estimate(&mu, &SweepConfig::default()).unwrap();
    assert!(lo.exponent.abs() <= 0.05, "{lo:?}");
}

#[test]
fn zero_mass_ball_is_reported() {
    let mut w = vec![1.0; 100];
    w[..5].fill(0.0);
    let mu = WeightedSpace::new(grid_line(100), w).unwrap();
    let err = lower_reg_estimate(&mu, &SweepConfig { guard: 1.0, ..Default::default() }).unwrap_err();
    assert_eq!(err.kind(), "degenerate");
    assert!(err.to_string().contains("ball"));
}

#[test]
fn sweep_rows_match_the_estimate() {
    let space = grid_line(300);
    let sweep = count_sweep(&space, Mode::Assouad, &SweepConfig::default()).unwrap();
    assert_eq!(sweep.rows.len(), sweep.estimate.centers * sweep.grid.pair_count());
    let best = sweep.rows.iter().map(|r| r.log_ratio_exponent).fold(f64::MIN, f64::max);
    assert_eq!(best, sweep.estimate.raw_exponent);
    let w = &sweep.estimate.witness;
    assert!(sweep.rows.iter().any(|r| r.center == w.center && r.r == w.r && r.big_r == w.big_r));
    for r in &sweep.rows {
        assert!(r.r < r.big_r);
        let direct = ((r.at_r / r.at_big_r).ln() / (r.big_r / r.r).ln()).max(0.0);
        assert!((direct - r.log_ratio_exponent).abs() < 1e-12);
    }
}

#[test]
fn exact_rescaling_leaves_estimates_unchanged() {
    let space = IfsSystem::cantor().attractor_points(3f64.powi(-8)).unwrap();
    let mu = WeightedSpace::uniform(space.clone());
    for factor in [0.25, 8.0] {
        let scaled = space.scaled(factor).unwrap();
        for mode in [Mode::Assouad, Mode::Lower] {
            let a = count_sweep(&space, mode, &cantor3()).unwrap().estimate;
            let b = count_sweep(&scaled, mode, &cantor3()).unwrap().estimate;
            assert_eq!((a.exponent, a.raw_exponent, a.constant, a.pairs), (b.exponent, b.raw_exponent, b.constant, b.pairs));
            assert_eq!((a.witness.center, a.witness.r * factor), (b.witness.center, b.witness.r));
        }
        let smu = WeightedSpace::new(scaled, mu.weights().to_vec()).unwrap();
        for mode in [Mode::UpperReg, Mode::LowerReg] {
            let a = mass_sweep(&mu, mode, &cantor3()).unwrap().estimate;
            let b = mass_sweep(&smu, mode, &cantor3()).unwrap().estimate;
            assert_eq!((a.exponent, a.raw_exponent), (b.exponent, b.raw_exponent));
        }
    }
}

#[test]
fn doubling_profile_of_uniform_line() {
    let mu = WeightedSpace::uniform(grid_line(1000));
    let d = doubling_profile(&mu, &SweepConfig::default()).unwrap();
    // spacing h and r ≥ 10h give at most (4r/h + 1)/(2r/h − 1) = 41/19
    assert!(d.sup_ratio <= 41.0 / 19.0 && d.sup_ratio >= 1.0, "{d:?}");
    assert!(d.band_variation < 2.0, "{d:?}");
    assert!(reverse_doubling_min(&mu, 4.0, &SweepConfig::default()).unwrap() > 1.5);
}

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 30..300)
}

fn sweep_cfg() -> impl Strategy<Value = SweepConfig> {
    (prop_oneof![Just(2.0), Just(3.0), 1.5..4.0f64], 1usize..5, 1usize..4, 2.0..20.0f64).prop_map(
        |(base, window_radii, min_level, guard)| SweepConfig { base, window_radii, min_level, guard, ..Default::default() },
    )
}

fn floor_of(pts: &[Vec<f64>]) -> f64 {
    let s = FiniteMetricSpace::from_points(pts, 1.0).unwrap();
    s.diam() * 1e-3
}

// count sweeps pack inside every ball, so they get smaller clouds
fn small_cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 20..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lower_never_exceeds_assouad(pts in small_cloud(), cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let a = assouad_estimate(&space, &cfg).unwrap();
        let l = lower_estimate(&space, &cfg).unwrap();
        prop_assert!(l.raw_exponent <= a.raw_exponent, "{} > {}", l.raw_exponent, a.raw_exponent);
        prop_assert!(l.exponent >= 0.0 && a.exponent >= 0.0);
    }

    #[test]
    fn lower_reg_never_exceeds_upper_reg(pts in cloud(), w in prop::collection::vec(0.1..10.0f64, 300), cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let mu = WeightedSpace::new(space, w[..pts.len()].to_vec()).unwrap();
        let up = upper_reg_estimate(&mu, &cfg).unwrap();
        let lo = lower_reg_estimate(&mu, &cfg).unwrap();
        prop_assert!(lo.raw_exponent <= up.raw_exponent);
    }

    #[test]
    fn rescaling_distances(pts in small_cloud(), factor in 0.01..100.0f64, cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let scaled = space.scaled(factor).unwrap();
        for mode in [Mode::Assouad, Mode::Lower] {
            let a = count_sweep(&space, mode, &cfg).unwrap().estimate;
            let b = count_sweep(&scaled, mode, &cfg).unwrap().estimate;
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9 && (a.raw_exponent - b.raw_exponent).abs() < 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn rescaling_weights(pts in cloud(), w in prop::collection::vec(0.1..10.0f64, 300), factor in 1e-3..1e3f64, cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let mu = WeightedSpace::new(space, w[..pts.len()].to_vec()).unwrap();
        let heavy = mu.scaled_weights(factor).unwrap();
        for mode in [Mode::UpperReg, Mode::LowerReg] {
            let a = mass_sweep(&mu, mode, &cfg).unwrap().estimate;
            let b = mass_sweep(&heavy, mode, &cfg).unwrap().estimate;
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9 && (a.raw_exponent - b.raw_exponent).abs() < 1e-9);
        }
    }

    #[test]
    fn more_centers_widen_the_extremes(pts in small_cloud(), k in 1usize..30, seed in any::<u64>(), cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let few = cfg.clone().with_centers(Centers::Sample(k)).with_seed(seed);
        let all = cfg.with_centers(Centers::All);
        prop_assert!(assouad_estimate(&space, &all).unwrap().raw_exponent >= assouad_estimate(&space, &few).unwrap().raw_exponent);
        prop_assert!(lower_estimate(&space, &all).unwrap().raw_exponent <= lower_estimate(&space, &few).unwrap().raw_exponent);
    }

    #[test]
    fn estimates_are_deterministic(pts in small_cloud(), seed in any::<u64>(), cfg in sweep_cfg()) {
        let space = FiniteMetricSpace::from_points(&pts, floor_of(&pts)).unwrap();
        let cfg = cfg.with_centers(Centers::Sample(10)).with_seed(seed);
        prop_assert_eq!(assouad_estimate(&space, &cfg).unwrap(), assouad_estimate(&space, &cfg).unwrap());
    }
}
