//! Forward and backward passes for the layers the classifiers are built from.
//!
//! Every forward here has a matching `*_backward` that returns analytic
//! gradients; `gradcheck` verifies each pair against central finite
//! differences. All functions are pure and deterministic.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn dims3<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        s => Err(Error::Shape(format!("{what}: expected 3-d, got {s:?}"))),
    }
}

fn dims4<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [a, b, c, d] => Ok((*a, *b, *c, *d)),
        s => Err(Error::Shape(format!("{what}: expected 4-d, got {s:?}"))),
    }
}

/// Output extent of a convolution axis; the division must be exact.
fn conv_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let span = input + 2 * pad;
    if kernel > span {
        return Err(Error::Shape(format!(
            "kernel {kernel} exceeds padded input {span}"
        )));
    }
    let num = span - kernel;
    if num % stride != 0 {
        return Err(Error::Shape(format!(
            "non-integral output extent: ({input}+2*{pad}-{kernel}) not divisible by stride {stride}"
        )));
    }
    Ok(num / stride + 1)
}

/// 2-d cross-correlation. `input` is [C,H,W], `kernels` [K,C,kh,kw];
/// output is [K,H',W'] with H' = (H+2*pad-kh)/stride + 1.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    if stride == 0 {
        return Err(Error::Config("conv2d stride must be positive".into()));
    }
    let (c_in, h, w) = dims3(input, "conv2d input")?;
    let (k, kc, kh, kw) = dims4(kernels, "conv2d kernels")?;
    if kc != c_in {
        return Err(Error::Shape(format!(
            "conv2d: input has {c_in} channels, kernels expect {kc}"
        )));
    }
    let ho = conv_extent(h, kh, stride, pad)?;
    let wo = conv_extent(w, kw, stride, pad)?;

    let mut out = Tensor::zeros(&[k, ho, wo]);
    let x = input.data();
    let ker = kernels.data();
    let o = out.data_mut();
    for ki in 0..k {
        for c in 0..c_in {
            for r in 0..kh {
                // rows of the output for which y = i*stride + r - pad is in range
                let i_lo = pad.saturating_sub(r).div_ceil(stride).min(ho);
                let i_hi = if h + pad > r {
                    (((h - 1 + pad - r) / stride) + 1).min(ho)
                } else {
                    0
                };
                for s in 0..kw {
                    let wgt = ker[((ki * c_in + c) * kh + r) * kw + s];
                    if wgt == T::zero() {
                        continue;
                    }
                    let j_lo = pad.saturating_sub(s).div_ceil(stride).min(wo);
                    let j_hi = if w + pad > s {
                        (((w - 1 + pad - s) / stride) + 1).min(wo)
                    } else {
                        0
                    };
                    for i in i_lo..i_hi {
                        let y = i * stride + r - pad;
                        let in_row = (c * h + y) * w;
                        let out_row = (ki * ho + i) * wo;
                        for j in j_lo..j_hi {
                            let xcol = j * stride + s - pad;
                            o[out_row + j] = o[out_row + j] + wgt * x[in_row + xcol];
                        }
                    }
                }
            }
        }
    }
    out.check_finite("conv2d")?;
    Ok(out)
}

/// Gradients of `conv2d` w.r.t. input and kernels.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    pad: usize,
    dout: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (c_in, h, w) = dims3(input, "conv2d input")?;
    let (k, _, kh, kw) = dims4(kernels, "conv2d kernels")?;
    let (ko, ho, wo) = dims3(dout, "conv2d dout")?;
    if ko != k {
        return Err(Error::Shape("conv2d_backward: dout channels".into()));
    }

    let mut dinput = Tensor::zeros(input.shape());
    let mut dkernels = Tensor::zeros(kernels.shape());
    let x = input.data();
    let ker = kernels.data();
    let g = dout.data();
    let dx = dinput.data_mut();
    let dk = dkernels.data_mut();
    for ki in 0..k {
        for c in 0..c_in {
            for r in 0..kh {
                let i_lo = pad.saturating_sub(r).div_ceil(stride).min(ho);
                let i_hi = if h + pad > r {
                    (((h - 1 + pad - r) / stride) + 1).min(ho)
                } else {
                    0
                };
                for s in 0..kw {
                    let widx = ((ki * c_in + c) * kh + r) * kw + s;
                    let wgt = ker[widx];
                    let j_lo = pad.saturating_sub(s).div_ceil(stride).min(wo);
                    let j_hi = if w + pad > s {
                        (((w - 1 + pad - s) / stride) + 1).min(wo)
                    } else {
                        0
                    };
                    let mut wacc = T::zero();
                    for i in i_lo..i_hi {
                        let y = i * stride + r - pad;
                        let in_row = (c * h + y) * w;
                        let out_row = (ki * ho + i) * wo;
                        for j in j_lo..j_hi {
                            let xcol = j * stride + s - pad;
                            let go = g[out_row + j];
                            wacc = wacc + go * x[in_row + xcol];
                            dx[in_row + xcol] = dx[in_row + xcol] + go * wgt;
                        }
                    }
                    dk[widx] = dk[widx] + wacc;
                }
            }
        }
    }
    dinput.check_finite("conv2d_backward dinput")?;
    dkernels.check_finite("conv2d_backward dkernels")?;
    Ok((dinput, dkernels))
}

/// Adds a per-channel bias to a [C,H,W] map.
pub fn bias_add_channel<T: Scalar>(input: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = dims3(input, "bias input")?;
    if bias.shape() != [c] {
        return Err(Error::Shape(format!(
            "bias shape {:?}, input has {c} channels",
            bias.shape()
        )));
    }
    let mut out = input.clone();
    let b = bias.data();
    let o = out.data_mut();
    for ci in 0..c {
        let bv = b[ci];
        for v in &mut o[ci * h * w..(ci + 1) * h * w] {
            *v = *v + bv;
        }
    }
    out.check_finite("bias_add_channel")?;
    Ok(out)
}

/// Gradient of `bias_add_channel` w.r.t. the bias; d_input is `dout` itself.
pub fn bias_add_channel_backward<T: Scalar>(
    channels: usize,
    dout: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c, h, w) = dims3(dout, "bias dout")?;
    if c != channels {
        return Err(Error::Shape("bias_backward channel count".into()));
    }
    let mut db = Tensor::zeros(&[c]);
    let g = dout.data();
    let d = db.data_mut();
    for ci in 0..c {
        d[ci] = g[ci * h * w..(ci + 1) * h * w].iter().copied().sum();
    }
    Ok(db)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

pub fn relu_backward<T: Scalar>(input: &Tensor<T>, dout: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != dout.shape() {
        return Err(Error::Shape("relu_backward shapes".into()));
    }
    let mut dx = dout.clone();
    for (d, x) in dx.data_mut().iter_mut().zip(input.data()) {
        if *x <= T::zero() {
            *d = T::zero();
        }
    }
    Ok(dx)
}

/// 2x2 max pooling with stride 2 on a [C,H,W] map (H and W must be even).
/// Returns the pooled map and the flat input index of each selected maximum
/// (first maximum wins on ties).
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, h, w) = dims3(input, "maxpool input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool2 needs even H,W, got {h}x{w}")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, ho, wo]);
    let mut idx = vec![0usize; c * ho * wo];
    let x = input.data();
    let o = out.data_mut();
    for ci in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let base = (ci * h + 2 * i) * w + 2 * j;
                let cand = [base, base + 1, base + w, base + w + 1];
                let mut best = cand[0];
                for &p in &cand[1..] {
                    if x[p] > x[best] {
                        best = p;
                    }
                }
                let oi = (ci * ho + i) * wo + j;
                o[oi] = x[best];
                idx[oi] = best;
            }
        }
    }
    Ok((out, idx))
}

pub fn maxpool2_backward<T: Scalar>(
    input_shape: &[usize],
    indices: &[usize],
    dout: &Tensor<T>,
) -> Result<Tensor<T>> {
    if indices.len() != dout.numel() {
        return Err(Error::Shape("maxpool2_backward index count".into()));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&src, &g) in indices.iter().zip(dout.data()) {
        d[src] = d[src] + g;
    }
    Ok(dx)
}

/// Fully connected head: N output neurons over a hidden vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<T: Scalar> {
    /// [hidden_dim, n] row-major: w[i*n + j] connects hidden unit i to class j.
    pub w: Tensor<T>,
    /// [n]
    pub b: Tensor<T>,
}

impl<T: Scalar> LinearHead<T> {
    pub fn new(hidden_dim: usize, n: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("linear head needs >= 2 classes, got {n}")));
        }
        Ok(LinearHead {
            w: Tensor::uniform_init(&[hidden_dim, n], hidden_dim, rng),
            b: Tensor::zeros(&[n]),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn class_count(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        LinearHead {
            w: self.w.zeros_like(),
            b: self.b.zeros_like(),
        }
    }
}

/// Response value of each output neuron: s_n = sum_i h_i * w_in + b_n.
pub fn classify_scores<T: Scalar>(h: &Tensor<T>, head: &LinearHead<T>) -> Result<Tensor<T>> {
    let hd = head.hidden_dim();
    let n = head.class_count();
    if h.shape() != [hd] {
        return Err(Error::Shape(format!(
            "classify_scores: hidden {:?} vs head {hd}",
            h.shape()
        )));
    }
    let mut scores = head.b.clone();
    let hv = h.data();
    let w = head.w.data();
    let s = scores.data_mut();
    for (i, &hi) in hv.iter().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        for (sj, &wij) in s.iter_mut().zip(row) {
            *sj = *sj + hi * wij;
        }
    }
    scores.check_finite("classify_scores")?;
    Ok(scores)
}

/// Gradients of `classify_scores`: returns (dh, dw, db).
pub fn classify_scores_backward<T: Scalar>(
    h: &Tensor<T>,
    head: &LinearHead<T>,
    dscores: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let hd = head.hidden_dim();
    let n = head.class_count();
    if dscores.shape() != [n] {
        return Err(Error::Shape("classify_scores_backward dscores".into()));
    }
    let mut dh = Tensor::zeros(&[hd]);
    let mut dw = Tensor::zeros(&[hd, n]);
    let ds = dscores.data();
    let w = head.w.data();
    let hv = h.data();
    {
        let dhm = dh.data_mut();
        let dwm = dw.data_mut();
        for i in 0..hd {
            let mut acc = T::zero();
            for j in 0..n {
                acc = acc + w[i * n + j] * ds[j];
                dwm[i * n + j] = hv[i] * ds[j];
            }
            dhm[i] = acc;
        }
    }
    Ok((dh, dw, dscores.clone()))
}

/// Numerically stable softmax (max subtraction). Output sums to 1.
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy on raw scores with a fused log-softmax.
/// Returns the loss and its gradient w.r.t. the scores (softmax - one-hot).
pub fn cross_entropy_logits<T: Scalar>(scores: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= scores.len() {
        return Err(Error::Input(format!(
            "cross-entropy target {target} out of {} classes",
            scores.len()
        )));
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = scores.iter().map(|&s| (s - max).exp()).sum();
    let loss = max + sum.ln() - scores[target];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross_entropy_logits".into()));
    }
    let mut dscores = softmax(scores);
    dscores[target] = dscores[target] - T::one();
    Ok((loss, dscores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::tensor::argmax;
    use rand::Rng;

    fn randt(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = substream(seed, Stream::Init);
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let input = randt(&[1, 4, 4], 1);
        let kernel = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let out = conv2d(&input, &kernel, 1, 0).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_zero_kernels_annihilate() {
        let input = randt(&[2, 6, 5], 2);
        let kernels = Tensor::zeros(&[3, 2, 3, 3]);
        let out = conv2d(&input, &kernels, 1, 1).unwrap();
        assert_eq!(out.shape(), &[3, 6, 5]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    // Brute-force oracle: four nested loops, no index tricks.
    fn conv_oracle(input: &Tensor<f64>, kernels: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (k, kh, kw) = (kernels.shape()[0], kernels.shape()[2], kernels.shape()[3]);
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        let mut out = Tensor::zeros(&[k, ho, wo]);
        for ki in 0..k {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = 0.0;
                    for c in 0..c_in {
                        for r in 0..kh {
                            for s in 0..kw {
                                let y = (i * stride + r) as isize - pad as isize;
                                let x = (j * stride + s) as isize - pad as isize;
                                if y >= 0 && (y as usize) < h && x >= 0 && (x as usize) < w {
                                    acc += input.data()[(c * h + y as usize) * w + x as usize]
                                        * kernels.data()[((ki * c_in + c) * kh + r) * kw + s];
                                }
                            }
                        }
                    }
                    out.data_mut()[(ki * ho + i) * wo + j] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        // the 1x1x4x4 / 3x3 case named in the operation contract
        let input = randt(&[1, 4, 4], 3);
        let kernels = randt(&[1, 1, 3, 3], 4);
        let out = conv2d(&input, &kernels, 1, 0).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        let want = conv_oracle(&input, &kernels, 1, 0);
        for (a, b) in out.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // and a strided padded case
        let input = randt(&[3, 8, 6], 5);
        let kernels = randt(&[4, 3, 3, 3], 6);
        let out = conv2d(&input, &kernels, 1, 1).unwrap();
        let want = conv_oracle(&input, &kernels, 1, 1);
        assert_eq!(out.shape(), want.shape());
        for (a, b) in out.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_rejects_non_integral_extent() {
        let input = randt(&[1, 5, 5], 7);
        let kernels = randt(&[1, 1, 2, 2], 8);
        // (5 - 2) % 2 != 0
        assert!(conv2d(&input, &kernels, 2, 0).is_err());
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let input = randt(&[2, 4, 4], 9);
        let kernels = randt(&[1, 3, 3, 3], 10);
        assert!(conv2d(&input, &kernels, 1, 0).is_err());
    }

    #[test]
    fn maxpool_picks_maxima_and_routes_gradient() {
        let input = Tensor::from_vec(
            &[1, 2, 4],
            vec![1.0, 5.0, 2.0, 2.0, 3.0, 4.0, 2.0, 1.0],
        )
        .unwrap();
        let (out, idx) = maxpool2(&input).unwrap();
        assert_eq!(out.data(), &[5.0, 2.0]);
        let dout = Tensor::from_vec(&[1, 1, 2], vec![10.0, 20.0]).unwrap();
        let dx = maxpool2_backward(input.shape(), &idx, &dout).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 20.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_rejects_odd_extent() {
        assert!(maxpool2(&randt(&[1, 3, 4], 11)).is_err());
    }

    #[test]
    fn scores_zero_head_gives_zeros_and_bias_passthrough() {
        let mut rng = substream(1, Stream::Init);
        let h = randt(&[5], 12);
        let mut head = LinearHead::<f64>::new(5, 2, &mut rng).unwrap();
        head.w = Tensor::zeros(&[5, 2]);
        let s = classify_scores(&h, &head).unwrap();
        assert_eq!(s.data(), &[0.0, 0.0]);
        head.b = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let s = classify_scores(&h, &head).unwrap();
        assert_eq!(s.data(), &[1.0, 2.0]);
    }

    #[test]
    fn scores_match_dot_product_oracle() {
        let mut rng = substream(2, Stream::Init);
        let h = randt(&[5], 13);
        let head = LinearHead::<f64>::new(5, 3, &mut rng).unwrap();
        let s = classify_scores(&h, &head).unwrap();
        for n in 0..3 {
            let mut want = head.b.data()[n];
            for i in 0..5 {
                want += h.data()[i] * head.w.data()[i * 3 + n];
            }
            assert!((s.data()[n] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_uniform_and_shift_invariant() {
        let p = softmax(&[0.0f64; 5]);
        for v in &p {
            assert!((v - 0.2).abs() < 1e-12);
        }
        let s = [0.3f64, -1.2, 2.5, 0.0];
        let a = softmax(&s);
        let b = softmax(&s.map(|v| v + 17.0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(argmax(&a), argmax(&b));
    }

    #[test]
    fn softmax_matches_high_precision_oracle() {
        // exp/sum evaluated directly in f64 for the [1,2,3] case
        let p = softmax(&[1.0f64, 2.0, 3.0]);
        let e = [1.0f64.exp(), 2.0f64.exp(), 3.0f64.exp()];
        let z = e[0] + e[1] + e[2];
        for (a, b) in p.iter().zip(e.iter().map(|v| v / z)) {
            assert!((a - b).abs() < 1e-15);
        }
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let s = [0.5f64, -0.25, 1.5];
        let (loss, ds) = cross_entropy_logits(&s, 2).unwrap();
        let p = softmax(&s);
        assert!((loss + p[2].ln()).abs() < 1e-12);
        for (j, d) in ds.iter().enumerate() {
            let want = p[j] - if j == 2 { 1.0 } else { 0.0 };
            assert!((d - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_add_and_backward() {
        let x = randt(&[2, 3, 3], 14);
        let b = Tensor::from_vec(&[2], vec![0.5, -1.5]).unwrap();
        let y = bias_add_channel(&x, &b).unwrap();
        assert!((y.data()[0] - (x.data()[0] + 0.5)).abs() < 1e-12);
        assert!((y.data()[9] - (x.data()[9] - 1.5)).abs() < 1e-12);
        let dout = Tensor::filled(&[2, 3, 3], 1.0);
        let db = bias_add_channel_backward(2, &dout).unwrap();
        assert_eq!(db.data(), &[9.0, 9.0]);
    }
}
