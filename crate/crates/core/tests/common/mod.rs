#![allow(dead_code)]

use painformer::kernel::{relative_error, Tensor, Var};
use painformer::nn::{Graph, ParamStore};
use painformer::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

/// Replaces every tensor in the store with uniform noise so no parameter
/// sits at a symmetric initial value (unit gammas, zero biases).
pub fn jitter(store: &ParamStore<f64>, seed: u64, scale: f64) -> ParamStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = store.clone();
    for (_, t) in out.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-scale..scale);
        }
    }
    out
}

/// Fixed pseudo-random weights that turn any output into a scalar with a
/// distinct slope per coordinate.
pub fn probe_weights(shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |i| ((i * 7 % 13) as f64 - 6.0) / 6.0 + 0.25)
}

/// Compares graph adjoints of every parameter against central differences
/// of `f`, returning the worst relative error and its parameter name.
pub fn param_gradient_error<F>(store: &ParamStore<f64>, eps: f64, f: F) -> (f64, String)
where
    F: for<'a> Fn(&mut Graph<'a, f64>) -> Result<Var>,
{
    let eval = |s: &ParamStore<f64>| -> f64 {
        let mut g = Graph::eval(s);
        let out = f(&mut g).unwrap();
        g.value(out).data()[0]
    };
    let mut g = Graph::trainable(store);
    let out = f(&mut g).unwrap();
    let grads = g.gradients(out).unwrap();
    let mut worst = (0.0, String::new());
    for (name, value) in store.iter() {
        let mut probe = store.clone();
        let mut fd = Tensor::zeros(value.shape());
        for i in 0..value.numel() {
            let orig = value.data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = orig + eps;
            let up = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig - eps;
            let down = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig;
            fd.data_mut()[i] = (up - down) / (2.0 * eps);
        }
        let got = if grads.contains(name) { grads.get(name).unwrap().clone() } else { Tensor::zeros(value.shape()) };
        let err = relative_error(&got, &fd);
        if err > worst.0 {
            worst = (err, name.to_string());
        }
    }
    worst
}
