//! Flat parameter vectors: the unit of global models and update deltas.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("shape product {product} does not match value count {len}")]
    ShapeMismatch { product: usize, len: usize },
}

/// A flat vector of real-valued model parameters.
///
/// The shape is a descriptor of how the values are laid out (layer sizes);
/// it is carried for bookkeeping but does not enter digests or the on-chain
/// encoding, which are defined over the values alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shape: Vec<usize>,
}

impl ParamVector {
    /// Builds a vector, checking that all values are finite and that the
    /// shape product equals the value count.
    pub fn new(values: Vec<f64>, shape: Vec<usize>) -> Result<Self, ParamError> {
        let product: usize = shape.iter().product();
        if product != values.len() {
            return Err(ParamError::ShapeMismatch {
                product,
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParamError::NonFinite { index });
        }
        Ok(Self { values, shape })
    }

    /// Builds a vector with the trivial shape `[len]`.
    pub fn flat(values: Vec<f64>) -> Result<Self, ParamError> {
        let shape = vec![values.len()];
        Self::new(values, shape)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Elementwise sum; the result keeps `self`'s shape descriptor.
    pub fn add(&self, other: &Self) -> Result<Self, ParamError> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Elementwise difference (`self` − `other`).
    pub fn sub(&self, other: &Self) -> Result<Self, ParamError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, ParamError> {
        if self.len() != other.len() {
            return Err(ParamError::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(values, self.shape.clone())
    }

    /// Canonical binary form: u64 LE value count, then each value as its
    /// IEEE-754 bits in little-endian order. Digests are computed over this.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.values.len());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_must_match() {
        assert!(ParamVector::new(vec![1.0, 2.0], vec![2]).is_ok());
        assert!(matches!(
            ParamVector::new(vec![1.0, 2.0], vec![3]),
            Err(ParamError::ShapeMismatch { product: 3, len: 2 })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            ParamVector::flat(vec![0.0, f64::NAN]),
            Err(ParamError::NonFinite { index: 1 })
        ));
        assert!(ParamVector::flat(vec![0.0, 1.0e300]).is_ok());
    }

    #[test]
    fn add_sub_roundtrip() {
        let a = ParamVector::flat(vec![1.0, 2.0, 3.0]).unwrap();
        let b = ParamVector::flat(vec![0.5, -1.0, 4.0]).unwrap();
        let sum = a.add(&b).unwrap();
        assert_eq!(sum.values(), &[1.5, 1.0, 7.0]);
        assert_eq!(sum.sub(&b).unwrap(), a);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let a = ParamVector::flat(vec![1.0]).unwrap();
        let b = ParamVector::flat(vec![1.0, 2.0]).unwrap();
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn canonical_bytes_are_stable() {
        let a = ParamVector::flat(vec![0.0, -1.5]).unwrap();
        let bytes = a.canonical_bytes();
        assert_eq!(bytes.len(), 8 + 16);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(bytes, a.canonical_bytes());
        // shape does not affect the canonical form
        let b = ParamVector::new(vec![0.0, -1.5], vec![2, 1]).unwrap();
        assert_eq!(bytes, b.canonical_bytes());
    }
}
