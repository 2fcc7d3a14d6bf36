use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A named, shaped, row-major block of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    name: String,
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let name = name.into();
        if shape.is_empty() {
            return Err(Error::Validation(format!("tensor `{name}` has no dimensions")));
        }
        if shape.contains(&0) {
            return Err(Error::Validation(format!(
                "tensor `{name}` has a zero dimension in {shape:?}"
            )));
        }
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Validation(format!("tensor `{name}` shape overflows")))?;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "tensor `{name}` has {} values but shape {shape:?} needs {expected}",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(name, shape, vec![T::zero(); n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same name and shape, new values. Panics if the length differs.
    pub fn with_data(&self, data: Vec<T>) -> Self {
        assert_eq!(data.len(), self.data.len(), "with_data: length mismatch");
        Self {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                tensor: self.name.clone(),
                index,
            }),
            None => Ok(()),
        }
    }

    /// `(rows, cols)` of a 2-D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::Validation(format!(
                "tensor `{}` must be 2-D, has shape {other:?}",
                self.name
            ))),
        }
    }

    /// Matrix product `self · rhs`, accumulated in f64 and rounded once per entry.
    pub fn matmul(&self, rhs: &Tensor<T>, name: impl Into<String>) -> Result<Tensor<T>> {
        let (m, k) = self.dims2()?;
        let (k2, n) = rhs.dims2()?;
        if k != k2 {
            return Err(Error::Validation(format!(
                "cannot multiply `{}` {:?} by `{}` {:?}",
                self.name, self.shape, rhs.name, rhs.shape
            )));
        }
        let lhs: Vec<f64> = self.data.iter().map(|v| v.to_f64_lossless()).collect();
        let rhs_data: Vec<f64> = rhs.data.iter().map(|v| v.to_f64_lossless()).collect();
        let mut out = Vec::with_capacity(m * n);
        let mut row = vec![0.0f64; n];
        for i in 0..m {
            row.iter_mut().for_each(|x| *x = 0.0);
            for p in 0..k {
                let a = lhs[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let r = &rhs_data[p * n..(p + 1) * n];
                for (acc, &b) in row.iter_mut().zip(r) {
                    *acc += a * b;
                }
            }
            out.extend(row.iter().map(|&x| T::from_f64_rounded(x)));
        }
        Tensor::new(name, vec![m, n], out)
    }

    pub fn transpose(&self) -> Result<Tensor<T>> {
        let (r, c) = self.dims2()?;
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Tensor::new(self.name.clone(), vec![c, r], out)
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64_lossless() - b.to_f64_lossless()).abs())
            .fold(0.0, f64::max)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_rounded(v.to_f64_lossless()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::<f32>::new("t", vec![], vec![]).is_err());
        assert!(Tensor::<f32>::new("t", vec![2, 0], vec![]).is_err());
        assert!(Tensor::<f32>::new("t", vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::<f32>::new("t", vec![2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn matmul_by_hand() {
        let a = Tensor::<f32>::new("a", vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f32>::new("b", vec![2, 1], vec![5.0, 6.0]).unwrap();
        let c = a.matmul(&b, "c").unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[17.0, 39.0]);
        assert!(b.matmul(&a, "x").is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let a = Tensor::<f64>::new("a", vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        let t = a.transpose().unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert_eq!(t.transpose().unwrap(), a);
    }

    #[test]
    fn finite_check_reports_index() {
        let t = Tensor::<f32>::new("w", vec![3], vec![1.0, f32::INFINITY, f32::NAN]).unwrap();
        match t.check_finite() {
            Err(Error::NonFinite { tensor, index }) => {
                assert_eq!(tensor, "w");
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
