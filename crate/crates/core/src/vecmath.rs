//! Dense real vectors and the similarity primitives every metric is built on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VecError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
}

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self, VecError> {
        if values.is_empty() {
            return Err(VecError::EmptyInput);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VecError::NonFinite(i));
        }
        Ok(Self(values))
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

    pub fn dot(&self, other: &Vector) -> Result<f64, VecError> {
        if self.dim() != other.dim() {
            return Err(VecError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = VecError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Vector::new(values)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn l2_norm(u: &Vector) -> f64 {
    u.0.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
///
/// The dot product is accumulated in a fixed order that does not depend on
/// argument order, so `cosine(u, v) == cosine(v, u)` holds bit-for-bit.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, VecError> {
    let dot = u.dot(v)?;
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(VecError::ZeroVector);
    }
    // nu * nv commutes exactly in IEEE arithmetic
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn mean_vector<'a, I>(vs: I) -> Result<Vector, VecError>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut iter = vs.into_iter();
    let first = iter.next().ok_or(VecError::EmptyInput)?;
    let mut acc = first.0.clone();
    let mut count = 1usize;
    for v in iter {
        if v.dim() != acc.len() {
            return Err(VecError::DimensionMismatch(acc.len(), v.dim()));
        }
        for (a, b) in acc.iter_mut().zip(&v.0) {
            *a += b;
        }
        count += 1;
    }
    let n = count as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Vector::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let u = v(&[3.0, 4.0]);
        assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine(&v(&[1.0, 2.0, 2.0]), &v(&[-1.0, -2.0, -2.0])).unwrap(), -1.0);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])),
            Err(VecError::DimensionMismatch(2, 3))
        );
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(VecError::ZeroVector));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(l2_norm(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(l2_norm(&v(&[0.0; 8])), 0.0);
        assert_eq!(l2_norm(&v(&[1.0, 1.0, 1.0, 1.0])), 2.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_vector([&v(&[1.0, 0.0])]).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(mean_vector([&v(&[1.0, 0.0]), &v(&[0.0, 1.0])]).unwrap(), v(&[0.5, 0.5]));
        assert_eq!(
            mean_vector([&v(&[2.0, 2.0]), &v(&[-2.0, -2.0])]).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(mean_vector(std::iter::empty()), Err(VecError::EmptyInput));
        assert_eq!(
            mean_vector([&v(&[1.0]), &v(&[1.0, 2.0])]),
            Err(VecError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(Vector::new(vec![1.0, f64::NAN]), Err(VecError::NonFinite(1)));
        assert_eq!(Vector::new(vec![]), Err(VecError::EmptyInput));
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..16).prop_flat_map(|d| {
            (
                prop::collection::vec(-100.0f64..100.0, d),
                prop::collection::vec(-100.0f64..100.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded((a, b) in pair()) {
            let (a, b) = (v(&a), v(&b));
            if let (Ok(x), Ok(y)) = (cosine(&a, &b), cosine(&b, &a)) {
                prop_assert_eq!(x, y);
                prop_assert!(x.abs() <= 1.0);
            }
        }

        #[test]
        fn cosine_scale_invariant((a, b) in pair(), alpha in 1e-3f64..1e3, beta in 1e-3f64..1e3) {
            prop_assume!(l2_norm(&v(&a)) > 1e-6 && l2_norm(&v(&b)) > 1e-6);
            let base = cosine(&v(&a), &v(&b)).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
            let scaled = cosine(&v(&sa), &v(&sb)).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12);
        }
    }
}
