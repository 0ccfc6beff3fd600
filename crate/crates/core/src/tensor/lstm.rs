//! Single-cell LSTM with backpropagation through time.
//!
//! Canonical gate formulation: input/forget/output gates plus a tanh
//! candidate. The hidden state starts at zero, so the first step computes
//! h_1 from (x_1, 0).

use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Weights of one LSTM cell. W maps the input, U the previous hidden state;
/// gate order everywhere is input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T: Scalar> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_i: Tensor<T>,
    pub u_i: Tensor<T>,
    pub b_i: Tensor<T>,
    pub w_f: Tensor<T>,
    pub u_f: Tensor<T>,
    pub b_f: Tensor<T>,
    pub w_o: Tensor<T>,
    pub u_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub w_g: Tensor<T>,
    pub u_g: Tensor<T>,
    pub b_g: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if hidden_dim == 0 || input_dim == 0 {
            return Err(Error::Config("lstm dims must be positive".into()));
        }
        let fan_in = input_dim + hidden_dim;
        let w = |rng: &mut _| Tensor::uniform_init(&[hidden_dim, input_dim], fan_in, rng);
        let u = |rng: &mut _| Tensor::uniform_init(&[hidden_dim, hidden_dim], fan_in, rng);
        let b = || Tensor::zeros(&[hidden_dim]);
        Ok(LstmParams {
            input_dim,
            hidden_dim,
            w_i: w(rng),
            u_i: u(rng),
            b_i: b(),
            w_f: w(rng),
            u_f: u(rng),
            // forget gate starts open so early training can carry state
            b_f: Tensor::filled(&[hidden_dim], T::one()),
            w_o: w(rng),
            u_o: u(rng),
            b_o: b(),
            w_g: w(rng),
            u_g: u(rng),
            b_g: b(),
        })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(&[hidden_dim, input_dim]);
        let u = || Tensor::zeros(&[hidden_dim, hidden_dim]);
        let b = || Tensor::zeros(&[hidden_dim]);
        LstmParams {
            input_dim,
            hidden_dim,
            w_i: w(),
            u_i: u(),
            b_i: b(),
            w_f: w(),
            u_f: u(),
            b_f: b(),
            w_o: w(),
            u_o: u(),
            b_o: b(),
            w_g: w(),
            u_g: u(),
            b_g: b(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }

    /// Tensors in canonical order, paired with their names.
    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("w_i", &self.w_i),
            ("u_i", &self.u_i),
            ("b_i", &self.b_i),
            ("w_f", &self.w_f),
            ("u_f", &self.u_f),
            ("b_f", &self.b_f),
            ("w_o", &self.w_o),
            ("u_o", &self.u_o),
            ("b_o", &self.b_o),
            ("w_g", &self.w_g),
            ("u_g", &self.u_g),
            ("b_g", &self.b_g),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_i,
            &mut self.u_i,
            &mut self.b_i,
            &mut self.w_f,
            &mut self.u_f,
            &mut self.b_f,
            &mut self.w_o,
            &mut self.u_o,
            &mut self.b_o,
            &mut self.w_g,
            &mut self.u_g,
            &mut self.b_g,
        ]
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// gate = act(W x + U h_prev + b)
fn gate<T: Scalar>(
    w: &Tensor<T>,
    u: &Tensor<T>,
    b: &Tensor<T>,
    x: &[T],
    h_prev: &[T],
    act: fn(T) -> T,
) -> Vec<T> {
    let hidden = b.numel();
    let input = x.len();
    let wd = w.data();
    let ud = u.data();
    let bd = b.data();
    (0..hidden)
        .map(|r| {
            let mut acc = bd[r];
            let wrow = &wd[r * input..(r + 1) * input];
            for (wv, xv) in wrow.iter().zip(x) {
                acc = acc + *wv * *xv;
            }
            let urow = &ud[r * hidden..(r + 1) * hidden];
            for (uv, hv) in urow.iter().zip(h_prev) {
                acc = acc + *uv * *hv;
            }
            act(acc)
        })
        .collect()
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T: Scalar> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

/// One LSTM cell update: (h_t, c_t) from (x_t, h_{t-1}, c_{t-1}).
pub fn lstm_step<T: Scalar>(
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
    p: &LstmParams<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (h, c, _) = lstm_step_cached(x, h_prev, c_prev, p)?;
    Ok((h, c))
}

/// Like `lstm_step` but also returns the cache needed by the backward pass.
pub fn lstm_step_cached<T: Scalar>(
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
    p: &LstmParams<T>,
) -> Result<(Tensor<T>, Tensor<T>, LstmStepCache<T>)> {
    if x.shape() != [p.input_dim] {
        return Err(Error::Shape(format!(
            "lstm_step: x {:?} vs input_dim {}",
            x.shape(),
            p.input_dim
        )));
    }
    if h_prev.shape() != [p.hidden_dim] || c_prev.shape() != [p.hidden_dim] {
        return Err(Error::Shape(format!(
            "lstm_step: state {:?}/{:?} vs hidden_dim {}",
            h_prev.shape(),
            c_prev.shape(),
            p.hidden_dim
        )));
    }
    let xs = x.data();
    let hs = h_prev.data();
    let i = gate(&p.w_i, &p.u_i, &p.b_i, xs, hs, sigmoid);
    let f = gate(&p.w_f, &p.u_f, &p.b_f, xs, hs, sigmoid);
    let o = gate(&p.w_o, &p.u_o, &p.b_o, xs, hs, sigmoid);
    let g = gate(&p.w_g, &p.u_g, &p.b_g, xs, hs, T::tanh);

    let cp = c_prev.data();
    let c: Vec<T> = (0..p.hidden_dim)
        .map(|k| f[k] * cp[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<T> = c.iter().map(|&v| v.tanh()).collect();
    let h: Vec<T> = (0..p.hidden_dim).map(|k| o[k] * tanh_c[k]).collect();

    let h_t = Tensor::from_vec(&[p.hidden_dim], h)?;
    let c_t = Tensor::from_vec(&[p.hidden_dim], c.clone())?;
    h_t.check_finite("lstm_step h")?;
    c_t.check_finite("lstm_step c")?;
    let cache = LstmStepCache {
        x: xs.to_vec(),
        h_prev: hs.to_vec(),
        c_prev: cp.to_vec(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
    };
    Ok((h_t, c_t, cache))
}

/// Backward through one step. `dh` and `dc` are the gradients flowing into
/// h_t and c_t; returns (dx, dh_prev, dc_prev) and accumulates parameter
/// gradients into `grads`.
pub fn lstm_step_backward<T: Scalar>(
    p: &LstmParams<T>,
    cache: &LstmStepCache<T>,
    dh: &[T],
    dc: &[T],
    grads: &mut LstmParams<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let hd = p.hidden_dim;
    let id = p.input_dim;
    if dh.len() != hd || dc.len() != hd {
        return Err(Error::Shape("lstm_step_backward state grads".into()));
    }
    let one = T::one();

    // total gradient at the cell state
    let mut dct = vec![T::zero(); hd];
    for k in 0..hd {
        let sech2 = one - cache.tanh_c[k] * cache.tanh_c[k];
        dct[k] = dc[k] + dh[k] * cache.o[k] * sech2;
    }

    // pre-activation gradients per gate
    let mut a_i = vec![T::zero(); hd];
    let mut a_f = vec![T::zero(); hd];
    let mut a_o = vec![T::zero(); hd];
    let mut a_g = vec![T::zero(); hd];
    let mut dc_prev = vec![T::zero(); hd];
    for k in 0..hd {
        let (i, f, o, g) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k]);
        a_o[k] = dh[k] * cache.tanh_c[k] * o * (one - o);
        a_f[k] = dct[k] * cache.c_prev[k] * f * (one - f);
        a_i[k] = dct[k] * g * i * (one - i);
        a_g[k] = dct[k] * i * (one - g * g);
        dc_prev[k] = dct[k] * f;
    }

    let mut dx = vec![T::zero(); id];
    let mut dh_prev = vec![T::zero(); hd];
    let scatter = |w: &Tensor<T>,
                       u: &Tensor<T>,
                       gw: &mut Tensor<T>,
                       gu: &mut Tensor<T>,
                       gb: &mut Tensor<T>,
                       a: &[T],
                       dx: &mut [T],
                       dh_prev: &mut [T]| {
        let wd = w.data();
        let ud = u.data();
        let gwd = gw.data_mut();
        let gud = gu.data_mut();
        let gbd = gb.data_mut();
        for r in 0..hd {
            let ar = a[r];
            gbd[r] = gbd[r] + ar;
            for col in 0..id {
                gwd[r * id + col] = gwd[r * id + col] + ar * cache.x[col];
                dx[col] = dx[col] + ar * wd[r * id + col];
            }
            for col in 0..hd {
                gud[r * hd + col] = gud[r * hd + col] + ar * cache.h_prev[col];
                dh_prev[col] = dh_prev[col] + ar * ud[r * hd + col];
            }
        }
    };
    scatter(&p.w_i, &p.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i, &a_i, &mut dx, &mut dh_prev);
    scatter(&p.w_f, &p.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f, &a_f, &mut dx, &mut dh_prev);
    scatter(&p.w_o, &p.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o, &a_o, &mut dx, &mut dh_prev);
    scatter(&p.w_g, &p.u_g, &mut grads.w_g, &mut grads.u_g, &mut grads.b_g, &a_g, &mut dx, &mut dh_prev);
    Ok((dx, dh_prev, dc_prev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    #[test]
    fn zero_params_zero_state_give_zero_output() {
        // gates sit at 0.5, candidate at 0: c = 0.5*0 + 0.5*0 = 0, h = 0.5*tanh(0) = 0
        let p = LstmParams::<f64>::zeros(4, 3);
        let x = Tensor::filled(&[4], 0.7);
        let h0 = Tensor::zeros(&[3]);
        let c0 = Tensor::zeros(&[3]);
        let (h, c) = lstm_step(&x, &h0, &c0, &p).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_dim_256_yields_256_entries() {
        let mut rng = substream(0, Stream::Init);
        let p = LstmParams::<f32>::new(8, 256, &mut rng).unwrap();
        let x = Tensor::filled(&[8], 0.1);
        let (h, c) = lstm_step(&x, &Tensor::zeros(&[256]), &Tensor::zeros(&[256]), &p).unwrap();
        assert_eq!(h.numel(), 256);
        assert_eq!(c.numel(), 256);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = LstmParams::<f64>::zeros(4, 3);
        let x = Tensor::zeros(&[5]);
        assert!(lstm_step(&x, &Tensor::zeros(&[3]), &Tensor::zeros(&[3]), &p).is_err());
    }

    // Scalar-equation oracle: every gate written out element by element with
    // plain indexing arithmetic, no shared code with the implementation.
    #[test]
    fn matches_scalar_gate_oracle() {
        let mut rng = substream(11, Stream::Init);
        let (id, hd) = (4, 3);
        let p = LstmParams::<f64>::new(id, hd, &mut rng).unwrap();
        let x: Vec<f64> = (0..id).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h_prev: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c_prev: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |w: &Tensor<f64>, u: &Tensor<f64>, b: &Tensor<f64>, r: usize| {
            let mut acc = b.data()[r];
            for col in 0..id {
                acc += w.data()[r * id + col] * x[col];
            }
            for col in 0..hd {
                acc += u.data()[r * hd + col] * h_prev[col];
            }
            acc
        };

        let (h, c) = lstm_step(
            &Tensor::from_vec(&[id], x.clone()).unwrap(),
            &Tensor::from_vec(&[hd], h_prev.clone()).unwrap(),
            &Tensor::from_vec(&[hd], c_prev.clone()).unwrap(),
            &p,
        )
        .unwrap();

        for r in 0..hd {
            let i = sig(pre(&p.w_i, &p.u_i, &p.b_i, r));
            let f = sig(pre(&p.w_f, &p.u_f, &p.b_f, r));
            let o = sig(pre(&p.w_o, &p.u_o, &p.b_o, r));
            let g = pre(&p.w_g, &p.u_g, &p.b_g, r).tanh();
            let c_want = f * c_prev[r] + i * g;
            let h_want = o * c_want.tanh();
            assert!((c.data()[r] - c_want).abs() < 1e-12);
            assert!((h.data()[r] - h_want).abs() < 1e-12);
        }
    }
}
