//! Finite-resolution fractal geometry: nets and packings on finite metric
//! spaces, nested cube systems, measures built by mass distribution,
//! similitude IFS with condensation, and dimension estimators.

pub mod cube_tree;
pub mod dim_est;
pub mod error;
pub mod experiments;
pub mod ifs;
pub mod mass;
pub mod metric_space;
pub mod report;

pub use error::{Error, Result};
pub use ifs::{Condensation, IfsSystem, OpenSet, Similitude, Word};
pub use metric_space::{FiniteMetricSpace, IndexSet};
