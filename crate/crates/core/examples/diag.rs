use gcmp_core::models::{BackboneConfig, SequenceClassifier};
use gcmp_core::rng::{substream, Stream};
use gcmp_core::tensor::Tensor;
use rand::Rng;

fn eval(proto: &SequenceClassifier<f64>, vals: &[Tensor<f64>], inputs: &[Tensor<f64>], target: usize) -> f64 {
    let mut m = proto.clone();
    for (slot, v) in m.tensors_mut().into_iter().zip(vals) {
        *slot = v.clone();
    }
    m.forward_train(inputs, target).unwrap().0
}

fn main() {
    let cfg = BackboneConfig { input_size: 8, channels: [2, 3, 4], feature_dim: 5 };
    let mut worst_min = 0.0f64;
    for seed in 0..30u64 {
        let mut rng = substream(1000 + seed, Stream::Init);
        let (model, inputs, target) = loop {
            let model = SequenceClassifier::<f64>::new(cfg, 4, 3, &mut rng).unwrap();
            let inputs: Vec<Tensor<f64>> = (0..3)
                .map(|_| {
                    let n = 3 * 8 * 8;
                    Tensor::from_vec(&[3, 8, 8], (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap()
                })
                .collect();
            let target = rng.gen_range(0..3);
            let (_, cache) = model.forward_train(&inputs, target).unwrap();
            if cache.min_kink_margin() > 1e-4 {
                break (model, inputs, target);
            }
        };
        let (_, cache) = model.forward_train(&inputs, target).unwrap();
        let grads = model.backward(&cache).unwrap();
        let params: Vec<Tensor<f64>> = model.named().iter().map(|(_, t)| (*t).clone()).collect();
        let analytic: Vec<Tensor<f64>> = grads.tensors().into_iter().cloned().collect();

        // per-coordinate min error over two probe scales, max over coords
        let mut work = params.clone();
        let mut max_err = 0.0f64;
        for pi in 0..params.len() {
            for e in 0..params[pi].numel() {
                let a = analytic[pi].data()[e];
                let mut best = f64::INFINITY;
                let mut detail = String::new();
                for eps in [3e-5, 2e-4, 1e-3, 4e-3] {
                    let orig = work[pi].data()[e];
                    work[pi].data_mut()[e] = orig + eps;
                    let up = eval(&model, &work, &inputs, target);
                    work[pi].data_mut()[e] = orig - eps;
                    let down = eval(&model, &work, &inputs, target);
                    work[pi].data_mut()[e] = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                    detail.push_str(&format!(" eps {eps:.0e}: fd {fd:.4e} rel {rel:.2e};"));
                    best = best.min(rel);
                }
                if best > 1e-5 {
                    println!("  BAD coord p{pi} e{e}: a {a:.4e};{detail}");
                }
                max_err = max_err.max(best);
            }
        }
        println!("seed {seed} max-over-coords(min-over-eps) {max_err:.3e}");
        worst_min = worst_min.max(max_err);
    }
    println!("WORST {worst_min:.3e}");
}
