use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of terms for the `sequence34` generator.
pub const DEFAULT_SEQUENCE_TERMS: usize = 24;

/// A condensation set, stored by its generator so it can be resampled at
/// any resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condensation {
    /// Closed segment `[from, to]` (any dimension). 1-regular.
    Interval { from: Vec<f64>, to: Vec<f64> },
    /// Finite list of points; `regular_dim` tags the set as s-regular.
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regular_dim: Option<f64>,
    },
    /// `{(1 + 1/(j+1))·3⁻ʲ : 1 ≤ j ≤ terms} ∪ {0}` on the line.
    #[serde(rename = "sequence34")]
    Sequence34 {
        #[serde(default = "default_terms")]
        terms: usize,
    },
    Union { parts: Vec<Condensation> },
}

fn default_terms() -> usize {
    DEFAULT_SEQUENCE_TERMS
}

impl Condensation {
    /// One-dimensional segment `[a, b]`.
    pub fn segment(a: f64, b: f64) -> Self {
        Condensation::Interval { from: vec![a], to: vec![b] }
    }

    pub fn point(x: Vec<f64>) -> Self {
        Condensation::Points { points: vec![x], regular_dim: None }
    }

    pub fn sequence34(terms: usize) -> Self {
        Condensation::Sequence34 { terms }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Condensation::Interval { from, to } => {
                if from.len() != dim || to.len() != dim {
                    return Err(Error::arg("interval endpoints do not match the IFS dimension"));
                }
                if from == to {
                    return Err(Error::arg("interval endpoints coincide; use kind \"points\""));
                }
            }
            Condensation::Points { points, regular_dim } => {
                if points.is_empty() {
                    return Err(Error::arg("condensation set must be nonempty"));
                }
                if points.iter().any(|p| p.len() != dim) {
                    return Err(Error::arg("condensation point has the wrong dimension"));
                }
                if let Some(s) = regular_dim {
                    if !(*s >= 0.0) {
                        return Err(Error::arg("regular_dim must be nonnegative"));
                    }
                }
            }
            Condensation::Sequence34 { terms } => {
                if dim != 1 {
                    return Err(Error::arg("sequence34 lives on the line"));
                }
                if *terms == 0 {
                    return Err(Error::arg("sequence34 needs at least one term"));
                }
            }
            Condensation::Union { parts } => {
                if parts.is_empty() {
                    return Err(Error::arg("empty union"));
                }
                for p in parts {
                    p.validate(dim)?;
                }
            }
        }
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::arg("condensation coordinates must be finite"))
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Condensation::Interval { from, to } => from.iter().chain(to).all(|x| x.is_finite()),
            Condensation::Points { points, .. } => points.iter().flatten().all(|x| x.is_finite()),
            Condensation::Sequence34 { .. } => true,
            Condensation::Union { parts } => parts.iter().all(Condensation::all_finite),
        }
    }

    /// The `s` for which the set is s-regular, when known.
    pub fn regular_dim(&self) -> Option<f64> {
        match self {
            Condensation::Interval { .. } => Some(1.0),
            Condensation::Points { regular_dim, .. } => *regular_dim,
            Condensation::Sequence34 { .. } => None,
            Condensation::Union { .. } => None,
        }
    }

    /// Sample whose consecutive spacing is at most `resolution` along
    /// segments; discrete parts are returned in full.
    pub fn sample(&self, resolution: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.sample_into(resolution, &mut out);
        out
    }

    fn sample_into(&self, resolution: f64, out: &mut Vec<Vec<f64>>) {
        match self {
            Condensation::Interval { from, to } => {
                let len = crate::metric_space::euclid(from, to);
                let steps = (len / resolution).ceil().max(1.0) as usize;
                for i in 0..=steps {
                    let t = i as f64 / steps as f64;
                    out.push(from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect());
                }
            }
            Condensation::Points { points, .. } => out.extend(points.iter().cloned()),
            Condensation::Sequence34 { terms } => {
                out.push(vec![0.0]);
                for j in 1..=*terms {
                    let j = j as i32;
                    out.push(vec![(1.0 + 1.0 / (j as f64 + 1.0)) * 3f64.powi(-j)]);
                }
            }
            Condensation::Union { parts } => {
                for p in parts {
                    p.sample_into(resolution, out);
                }
            }
        }
    }
}
