//! Plain SGD with a step-decay learning-rate schedule.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Learning rate decayed by a constant factor every `decay_every` iterations
/// (0 disables decay). The defaults are lr 0.001 reduced by 0.95 every 5000.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base_lr: 0.001,
            decay_factor: 0.95,
            decay_every: 5000,
        }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, iteration: usize) -> f64 {
        if self.decay_every == 0 {
            return self.base_lr;
        }
        self.base_lr * self.decay_factor.powi((iteration / self.decay_every) as i32)
    }
}

/// Optimizer state: just the iteration counter driving the schedule.
#[derive(Debug, Clone)]
pub struct Sgd {
    schedule: LrSchedule,
    iteration: usize,
}

impl Sgd {
    pub fn new(schedule: LrSchedule) -> Result<Self> {
        if schedule.base_lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(Sgd {
            schedule,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn effective_lr(&self) -> f64 {
        self.schedule.lr_at(self.iteration)
    }

    /// p <- p - lr * g for every (param, grad) pair, then advances the
    /// iteration counter. Rejects non-finite gradients.
    pub fn step<T: Scalar>(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "sgd_step: {} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        let lr = T::from_f64(self.effective_lr());
        for (p, g) in params.iter_mut().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "sgd_step: param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            g.check_finite("sgd_step gradient")?;
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv = *pv - lr * *gv;
            }
        }
        self.iteration += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(&[2], vec![1.0f32, -2.0]).unwrap();
        let g = Tensor::zeros(&[2]);
        let mut sgd = Sgd::new(LrSchedule::default()).unwrap();
        sgd.step(&mut [&mut p], &[g]).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn scalar_update_arithmetic() {
        let mut p = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let g = Tensor::from_vec(&[1], vec![2.0]).unwrap();
        let mut sgd = Sgd::new(LrSchedule {
            base_lr: 0.1,
            decay_factor: 1.0,
            decay_every: 0,
        })
        .unwrap();
        sgd.step(&mut [&mut p], &[g]).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn schedule_decays_at_boundary() {
        let s = LrSchedule::default();
        assert!((s.lr_at(0) - 0.001).abs() < 1e-12);
        assert!((s.lr_at(4999) - 0.001).abs() < 1e-12);
        assert!((s.lr_at(5000) - 0.00095).abs() < 1e-12);
        assert!((s.lr_at(10000) - 0.001 * 0.95 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = Tensor::from_vec(&[1], vec![1.0f32]).unwrap();
        let g = Tensor::from_vec(&[1], vec![f32::INFINITY]).unwrap();
        let mut sgd = Sgd::new(LrSchedule::default()).unwrap();
        assert!(sgd.step(&mut [&mut p], &[g]).is_err());
    }
}
