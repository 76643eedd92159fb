use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;

use super::{PadicContext, PadicError, PadicScalar, Valuation};

/// A point of `Z_p^N` with the sup-norm.
#[derive(Clone, PartialEq, Eq)]
pub struct PadicVector {
    coords: Vec<PadicScalar>,
}

impl PadicVector {
    pub fn new(coords: Vec<PadicScalar>) -> Result<Self, PadicError> {
        if let Some(first) = coords.first() {
            for c in &coords[1..] {
                if !c.context().same_ring(first.context()) {
                    return Err(PadicError::ContextMismatch {
                        left: (first.context().prime(), first.context().precision()),
                        right: (c.context().prime(), c.context().precision()),
                    });
                }
            }
        }
        Ok(PadicVector { coords })
    }

    pub fn zeros(ctx: &Arc<PadicContext>, n: usize) -> Self {
        PadicVector {
            coords: vec![PadicScalar::zero(ctx); n],
        }
    }

    pub fn from_residues(ctx: &Arc<PadicContext>, residues: Vec<BigUint>) -> Self {
        PadicVector {
            coords: residues
                .into_iter()
                .map(|r| PadicScalar::from_residue(ctx, r))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[PadicScalar] {
        &self.coords
    }

    pub fn get(&self, i: usize) -> &PadicScalar {
        &self.coords[i]
    }

    pub fn residues(&self) -> Vec<BigUint> {
        self.coords.iter().map(|c| c.residue().clone()).collect()
    }

    /// Minimum coordinate valuation, i.e. `-log_p` of the sup-norm.
    pub fn valuation(&self) -> Valuation {
        self.coords
            .iter()
            .map(|c| c.valuation())
            .min()
            .unwrap_or(Valuation::Infinite)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PadicError> {
        self.zip(other, |a, b| a.try_add(b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PadicError> {
        self.zip(other, |a, b| a.try_sub(b))
    }

    pub fn scale(&self, s: &PadicScalar) -> Result<Self, PadicError> {
        let coords = self
            .coords
            .iter()
            .map(|c| c.try_mul(s))
            .collect::<Result<_, _>>()?;
        Ok(PadicVector { coords })
    }

    fn zip(
        &self,
        other: &Self,
        op: impl Fn(&PadicScalar, &PadicScalar) -> Result<PadicScalar, PadicError>,
    ) -> Result<Self, PadicError> {
        if self.len() != other.len() {
            return Err(PadicError::DimensionMismatch(self.len(), other.len()));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| op(a, b))
            .collect::<Result<_, _>>()?;
        Ok(PadicVector { coords })
    }

    pub fn to_context(&self, ctx: &Arc<PadicContext>) -> Self {
        PadicVector {
            coords: self.coords.iter().map(|c| c.to_context(ctx)).collect(),
        }
    }
}

impl fmt::Debug for PadicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords.iter().map(|c| c.residue())).finish()
    }
}
