//! Finite-difference gradient checking.
//!
//! Runs in f64: central differences at step `eps` against the analytic
//! gradients produced by the backward passes.

use super::Tensor;
use crate::error::{Error, Result};

/// Largest relative disagreement between analytic and numeric gradients.
///
/// `loss` evaluates the scalar objective at a given parameter setting;
/// `analytic` holds one gradient tensor per parameter tensor, same order and
/// shapes. The relative error for one element is |a - f| / max(|a|, |f|, 1e-8).
pub fn grad_check<F>(
    loss: F,
    params: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    eps: f64,
) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "grad_check: {} params vs {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut max_rel = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[pi].shape() {
            return Err(Error::Shape(format!(
                "grad_check: param {} shape {:?} vs grad {:?}",
                pi,
                params[pi].shape(),
                grad.shape()
            )));
        }
        for e in 0..params[pi].numel() {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + eps;
            let up = loss(&work)?;
            work[pi].data_mut()[e] = orig - eps;
            let down = loss(&work)?;
            work[pi].data_mut()[e] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite("grad_check loss evaluation".into()));
            }
            let fd = (up - down) / (2.0 * eps);
            let a = grad.data()[e];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::tensor::ops::{classify_scores, classify_scores_backward, LinearHead};
    use rand::Rng;

    #[test]
    fn affine_map_is_exact() {
        // linear op: central differences are exact up to rounding
        let mut rng = substream(5, Stream::Init);
        let h = Tensor::from_vec(&[4], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let head = LinearHead::<f64>::new(4, 3, &mut rng).unwrap();
        // loss = sum of scores; dscores = ones
        let ones = Tensor::filled(&[3], 1.0);
        let (dh, dw, db) = classify_scores_backward(&h, &head, &ones).unwrap();

        let params = vec![h.clone(), head.w.clone(), head.b.clone()];
        let analytic = vec![dh, dw, db];
        let err = grad_check(
            |p| {
                let head = LinearHead {
                    w: p[1].clone(),
                    b: p[2].clone(),
                };
                Ok(classify_scores(&p[0], &head)?.data().iter().sum())
            },
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-9, "affine grad check err {err}");
    }
}
