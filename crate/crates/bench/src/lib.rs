//! Shared inputs for the kernel benchmarks.

use fraclab_core::{FiniteMetricSpace, IfsSystem};

/// Middle-thirds Cantor net at `3^-depth`.
pub fn cantor_net(depth: i32) -> FiniteMetricSpace {
    IfsSystem::cantor().attractor_points(3f64.powi(-depth)).expect("cantor net")
}

/// Regular `side × side` grid in the unit square.
pub fn unit_grid(side: usize) -> FiniteMetricSpace {
    let step = 1.0 / (side - 1) as f64;
    let pts: Vec<Vec<f64>> = (0..side * side)
        .map(|k| vec![(k / side) as f64 * step, (k % side) as f64 * step])
        .collect();
    FiniteMetricSpace::from_points(&pts, step).expect("grid")
}
