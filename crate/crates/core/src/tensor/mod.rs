//! Dense n-dimensional arrays with analytic gradients.
//!
//! Just enough tensor machinery for the classifiers in this crate: row-major
//! storage, explicit forward and backward functions per operation, finite-
//! difference gradient checking, and plain SGD with a step-decay schedule.
//! Training runs in f32; gradient checks instantiate the same generic code
//! in f64.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod sgd;

use rand::distributions::uniform::SampleUniform;
use rand::Rng;

use crate::error::{Error, Result};

/// Element type for tensors: f32 for storage/training, f64 for checks.
pub trait Scalar:
    num_traits::Float
    + SampleUniform
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major array with an optional gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} wants {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            grad: None,
        }
    }

    /// Seeded uniform init in [-r, r] with r = 1/sqrt(fan_in).
    pub fn uniform_init(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        Self::uniform_init_gain(shape, fan_in, 1.0, rng)
    }

    /// Seeded uniform init in [-r, r] with r = gain/sqrt(fan_in). ReLU
    /// stacks need gain sqrt(6) to keep activation variance from collapsing
    /// through deep chains.
    pub fn uniform_init_gain(shape: &[usize], fan_in: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let r = T::from_f64(gain / (fan_in.max(1) as f64).sqrt());
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Errors if any element is NaN or infinite. `context` names the producer.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context.to_string()));
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        match self.grad.as_mut() {
            Some(g) => g.iter_mut().for_each(|v| *v = T::zero()),
            None => self.grad = Some(vec![T::zero(); self.data.len()]),
        }
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Adds `delta` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, delta: &Tensor<T>) -> Result<()> {
        if delta.shape != self.shape {
            return Err(Error::Shape(format!(
                "grad shape {:?} vs tensor {:?}",
                delta.shape, self.shape
            )));
        }
        let g = self
            .grad
            .get_or_insert_with(|| vec![T::zero(); self.data.len()]);
        for (gi, di) in g.iter_mut().zip(delta.data.iter()) {
            *gi = *gi + *di;
        }
        Ok(())
    }

    /// Same-shape zero tensor (no grad buffer), used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    /// Elementwise self += other. Shapes must match.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add_assign {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for v in self.data.iter_mut() {
            *v = *v * s;
        }
    }

    /// Lossy precision cast (f32 <-> f64) carrying data only, not grads.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            grad: None,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
