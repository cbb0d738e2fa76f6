use crate::{LearnError, Real};

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Real>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<Real>) -> Result<Self, LearnError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(LearnError::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn filled(shape: &[usize], v: Real) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Real> {
        self.data
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    /// Dimension `i`, or 1 past the rank.
    pub fn dim(&self, i: usize) -> usize {
        self.shape.get(i).copied().unwrap_or(1)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, s: Real) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with `context` when any element is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<(), LearnError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(LearnError::NonFinite(context.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(Tensor::from_vec(&[2, 3], vec![0.0; 5]), Err(LearnError::ShapeMismatch(_))));
    }

    #[test]
    fn finiteness() {
        let mut t = Tensor::zeros(&[3]);
        assert!(t.check_finite("x").is_ok());
        t.data_mut()[1] = Real::NAN;
        assert!(matches!(t.check_finite("x"), Err(LearnError::NonFinite(c)) if c == "x"));
    }

    #[test]
    fn arithmetic() {
        let mut a = Tensor::filled(&[2, 2], 1.0);
        let b = Tensor::filled(&[2, 2], 2.0);
        a.add_assign(&b);
        a.scale(0.5);
        assert_eq!(a.data(), &[1.5; 4]);
        assert_eq!(a.dim(0), 2);
        assert_eq!(a.dim(5), 1);
    }
}
