use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{standard_normal, Seed};
use crate::vector::RealVector;

/// Which randomness produced a projection matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedProvenance {
    /// Drawn from verifier 0's private stream; privacy relies on verifier 0
    /// being honest.
    Verifier0Private,
    /// Drawn from a stream every verifier can recompute.
    SharedRandomness,
}

/// A `k × d` Gaussian ensemble with i.i.d. `N(0, 1/k)` entries, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    provenance: SeedProvenance,
}

impl ProjectionMatrix {
    pub fn sample(k: usize, d: usize, seed: Seed, provenance: SeedProvenance) -> Result<Self> {
        if k < 1 || d < 1 {
            return Err(invalid(format!("projection shape must be >= 1x1, got {k}x{d}")));
        }
        let scale = 1.0 / (k as f64).sqrt();
        let mut rng = seed.rng();
        let entries = (0..k * d).map(|_| scale * standard_normal(&mut rng)).collect();
        Ok(ProjectionMatrix {
            rows: k,
            cols: d,
            entries,
            provenance,
        })
    }

    /// Rebuilds a matrix received over the wire.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        provenance: SeedProvenance,
    ) -> Result<Self> {
        if rows < 1 || cols < 1 {
            return Err(invalid("projection shape must be >= 1x1"));
        }
        if rows.checked_mul(cols) != Some(entries.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("projection entries must be finite"));
        }
        Ok(ProjectionMatrix {
            rows,
            cols,
            entries,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn provenance(&self) -> SeedProvenance {
        self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `W·x`.
    pub fn apply(&self, x: &RealVector) -> Result<RealVector> {
        if x.dim() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: x.dim(),
            });
        }
        let xs = x.as_slice();
        let out = self
            .entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(xs).map(|(w, v)| w * v).sum())
            .collect();
        Ok(RealVector::from_vec_unchecked(out))
    }
}

/// Samples the verification matrix from shared randomness.
pub fn sample_projection(k: usize, d: usize, seed: Seed) -> Result<ProjectionMatrix> {
    ProjectionMatrix::sample(k, d, seed, SeedProvenance::SharedRandomness)
}
