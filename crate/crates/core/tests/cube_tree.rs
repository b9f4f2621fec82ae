use std::sync::Arc;

use fraclab_core::cube_tree::{build_cube_tree, inner_constant, outer_constant, verify_tree, Cube, CubeRef, CubeTree};
use fraclab_core::{FiniteMetricSpace, IfsSystem, IndexSet};
use proptest::prelude::*;

fn line(xs: &[f64], floor: f64) -> Arc<FiniteMetricSpace> {
    let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    Arc::new(FiniteMetricSpace::from_points(&pts, floor).unwrap())
}

fn cantor_net(depth: i32) -> Arc<FiniteMetricSpace> {
    Arc::new(IfsSystem::cantor().attractor_points(3f64.powi(-depth)).unwrap())
}

fn cube_diam(space: &FiniteMetricSpace, c: &Cube) -> f64 {
    let m = c.members.as_slice();
    let mut d: f64 = 0.0;
    for &i in m {
        for &j in m {
            d = d.max(space.dist(i, j));
        }
    }
    d
}

#[test]
fn two_points() {
    let tree = build_cube_tree(line(&[0.0, 1.0], 0.01), 0.1, 1).unwrap();
    assert_eq!(tree.level(0).len(), 1);
    assert_eq!(tree.level(0)[0].members.as_slice(), &[0, 1]);
    let leaves: Vec<&[usize]> = tree.level(1).iter().map(|c| c.members.as_slice()).collect();
    assert_eq!(leaves, vec![&[0][..], &[1][..]]);
    let rep = tree.verify();
    assert!(rep.partition && rep.nesting && rep.sandwich && rep.anchor);
}

#[test]
fn depth_zero_is_root_only() {
    let tree = build_cube_tree(line(&[0.0, 0.3, 1.0], 0.01), 0.2, 0).unwrap();
    assert_eq!(tree.levels().len(), 1);
    assert_eq!(tree.level(0)[0].members.len(), 3);
    let rep = verify_tree(&tree);
    assert!(rep.partition && rep.nesting);
    assert_eq!(rep.cubes, 1);
}

#[test]
fn refuses_below_floor_and_bad_rho() {
    let err = build_cube_tree(line(&[0.0, 1.0], 0.01), 0.1, 3).unwrap_err();
    assert_eq!(err.kind(), "resolution");
    assert_eq!(build_cube_tree(line(&[0.0, 1.0], 0.01), 0.4, 1).unwrap_err().kind(), "argument");
    assert_eq!(build_cube_tree(line(&[0.0, 1.0], 0.01), 0.0, 1).unwrap_err().kind(), "argument");
}

#[test]
fn constants_follow_rho() {
    for rho in [0.05, 0.1, 0.2, 0.3] {
        assert!((inner_constant(rho) - (0.5 - rho / (1.0 - rho))).abs() < 1e-15);
        assert!((outer_constant(rho) - 1.0 / (1.0 - rho)).abs() < 1e-15);
    }
    let tree = build_cube_tree(line(&[0.0, 0.5, 1.0], 0.01), 0.1, 1).unwrap();
    let rep = tree.verify();
    assert_eq!(rep.c_const, inner_constant(0.1));
    assert_eq!(rep.big_c_const, outer_constant(0.1));
}

#[test]
fn cantor_net_cube_diameters() {
    let space = cantor_net(8);
    assert_eq!(space.len(), 256);
    let tree = build_cube_tree(space.clone(), 0.1, 3).unwrap();
    let rep = tree.verify();
    assert!(rep.partition && rep.nesting && rep.sandwich && rep.anchor, "{rep:?}");
    for k in 0..=tree.depth() {
        let bound = 2.0 * tree.big_c_const() * tree.level_radius(k);
        for c in tree.level(k) {
            assert!(cube_diam(&space, c) <= bound * (1.0 + 1e-12));
        }
    }
    // 10⁻⁴ lies below the 3⁻⁸ floor
    assert_eq!(build_cube_tree(space, 0.1, 4).unwrap_err().kind(), "resolution");
}

#[test]
fn uniform_grid_passes_all_four() {
    let pts: Vec<Vec<f64>> = (0..30).flat_map(|i| (0..30).map(move |j| vec![i as f64 / 29.0, j as f64 / 29.0])).collect();
    let space = Arc::new(FiniteMetricSpace::from_points(&pts, 1.0 / 29.0).unwrap());
    let tree = build_cube_tree(space, 0.2, 2).unwrap();
    let rep = tree.verify();
    assert!(rep.partition && rep.nesting && rep.sandwich && rep.anchor, "{rep:?}");
    assert_eq!(rep.sandwich_failures, 0);
}

#[test]
fn broken_tree_detected() {
    let space = line(&[0.0, 0.5, 1.0], 0.01);
    let root = Cube { center: 0, parent: None, children: vec![0, 1], members: IndexSet::full(3) };
    let a = Cube { center: 0, parent: Some(0), children: vec![], members: IndexSet::new(vec![0, 1]).unwrap() };
    let b = Cube { center: 2, parent: Some(0), children: vec![], members: IndexSet::new(vec![1, 2]).unwrap() };
    let tree = CubeTree::from_levels(space, 0.1, vec![vec![root], vec![a, b]]).unwrap();
    let rep = tree.verify();
    assert!(!rep.partition || !rep.nesting);
}

#[test]
fn meeting_ball() {
    let tree = build_cube_tree(line(&[0.0, 0.1, 0.9, 1.0], 0.01), 0.2, 1).unwrap();
    let all = tree.cubes_meeting_ball(1, 0, 2.0).unwrap();
    assert_eq!(all.len(), tree.level(1).len());
    let one = tree.cubes_meeting_ball(1, 0, 0.05).unwrap();
    assert_eq!(one, vec![CubeRef { level: 1, index: tree.cube_of(1, 0).unwrap() }]);
    assert!(tree.cubes_meeting_ball(2, 0, 0.1).is_err());
}

#[test]
fn meeting_ball_on_cantor_thirds() {
    let space = cantor_net(6);
    let tree = build_cube_tree(space.clone(), 1.0 / 3.0 - 0.05, 1).unwrap();
    let r = 1.0 / 3.0 + 0.01;
    let got = tree.cubes_meeting_ball(1, 0, r).unwrap();
    let brute: Vec<CubeRef> = (0..tree.level(1).len())
        .filter(|&j| tree.level(1)[j].members.iter().any(|i| space.dist(0, i) <= r))
        .map(|index| CubeRef { level: 1, index })
        .collect();
    assert_eq!(got, brute);
}

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 2..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_and_nesting_are_exact(pts in cloud(), rho in 0.05..0.3f64) {
        let space = FiniteMetricSpace::from_points(&pts, 1e-3).unwrap();
        let depth = ((space.resolution_floor() / space.diam()).ln() / rho.ln()).floor().max(0.0) as usize;
        let tree = build_cube_tree(Arc::new(space), rho, depth).unwrap();
        let n = tree.space().len();
        for k in 0..=tree.depth() {
            let mut seen = vec![0u8; n];
            for c in tree.level(k) {
                for i in c.members.iter() {
                    seen[i] += 1;
                }
                if k > 0 {
                    let parent = &tree.level(k - 1)[c.parent.unwrap()];
                    prop_assert!(c.members.is_subset_of(&parent.members));
                }
                if k < tree.depth() {
                    let mut union: Vec<usize> = c.children.iter().flat_map(|&j| tree.level(k + 1)[j].members.iter()).collect();
                    union.sort_unstable();
                    prop_assert_eq!(union.as_slice(), c.members.as_slice());
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
        let rep = tree.verify();
        prop_assert!(rep.partition && rep.nesting);
    }

    #[test]
    fn meeting_ball_grows_with_r(pts in cloud(), r in 0.0..1.0f64, dr in 0.0..0.5f64, c in any::<prop::sample::Index>()) {
        let space = Arc::new(FiniteMetricSpace::from_points(&pts, 1e-3).unwrap());
        let tree = build_cube_tree(space.clone(), 0.2, 1).unwrap();
        let x = c.index(space.len());
        let small = tree.cubes_meeting_ball(1, x, r).unwrap();
        let big = tree.cubes_meeting_ball(1, x, r + dr).unwrap();
        prop_assert!(small.iter().all(|q| big.contains(q)));
        let brute: Vec<CubeRef> = (0..tree.level(1).len())
            .filter(|&j| tree.level(1)[j].members.iter().any(|i| space.dist(x, i) <= r))
            .map(|index| CubeRef { level: 1, index })
            .collect();
        prop_assert_eq!(small, brute);
    }
}
