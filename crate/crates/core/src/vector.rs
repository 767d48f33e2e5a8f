use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::gaussian_vec;

/// A finite, non-empty real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("vector must have dimension >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("vector entry {i} is not finite")));
        }
        Ok(RealVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector must have dimension >= 1");
        RealVector(vec![0.0; dim])
    }

    /// Uniformly random direction scaled to the given Euclidean norm.
    pub fn random_with_norm<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: f64) -> Self {
        assert!(dim >= 1);
        loop {
            let g = gaussian_vec(rng, dim, 1.0);
            let n = l2(&g);
            if n > 0.0 {
                return RealVector(g.into_iter().map(|v| v * norm / n).collect());
            }
        }
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        RealVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2(&self.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    fn check_dim(&self, other: &RealVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &RealVector) -> Result<RealVector> {
        self.check_dim(other)?;
        Ok(RealVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &RealVector) -> Result<RealVector> {
        self.check_dim(other)?;
        Ok(RealVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add_assign(&mut self, other: &RealVector) -> Result<()> {
        self.check_dim(other)?;
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &RealVector) -> Result<()> {
        self.check_dim(other)?;
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a -= b);
        Ok(())
    }

    pub fn scale(&self, factor: f64) -> RealVector {
        RealVector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn distance(&self, other: &RealVector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

impl Index<usize> for RealVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        RealVector::new(values)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Vec<f64> {
        v.0
    }
}

pub(crate) fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}
