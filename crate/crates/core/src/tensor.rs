//! Dense row-major f64 tensors and named trainable parameters.

use crate::error::{Error, Result};

/// Row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; n],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::shape(format!(
                "shape {:?} expects {} values, got {}",
                shape,
                n,
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            values: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of rows and columns of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::shape(format!("expected rank 2, got {:?}", self.shape)));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.shape[1] + c]
    }

    #[inline]
    pub fn at2_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.values[r * self.shape[1] + c]
    }

    /// Errors if any value is NaN or infinite.
    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite value {} at flat index {} in {}",
                    v, i, context
                )));
            }
        }
        Ok(())
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}

/// A trainable tensor: value plus an accumulated gradient of the same shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(&value.shape);
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Scale the accumulated gradient (for minibatch averaging).
    pub fn scale_grad(&mut self, factor: f64) {
        self.grad.values.iter_mut().for_each(|g| *g *= factor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_values_checks_length() {
        assert!(Tensor::from_values(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_values(&[2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn at2_row_major() {
        let t = Tensor::from_values(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.at2(0, 2), 3.0);
        assert_eq!(t.at2(1, 0), 4.0);
    }

    #[test]
    fn ensure_finite_flags_nan() {
        let t = Tensor::from_values(&[2], vec![1.0, f64::NAN]).unwrap();
        assert!(t.ensure_finite("test").is_err());
        let ok = Tensor::from_values(&[2], vec![1.0, 2.0]).unwrap();
        assert!(ok.ensure_finite("test").is_ok());
    }

    #[test]
    fn parameter_grad_matches_shape() {
        let p = Parameter::new("w", Tensor::zeros(&[3, 4]));
        assert_eq!(p.value.shape, p.grad.shape);
    }
}
