use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor};
use crate::nn::ParamStore;

/// AdamW hyperparameters. Weight decay is decoupled from the gradient and
/// skipped for the parameters named in `no_decay`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub no_decay: Vec<String>,
}

impl Default for AdamW {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.1, no_decay: vec!["mtl.w".into()] }
    }
}

/// Moment estimates, created on a parameter's first update.
#[derive(Clone, Debug)]
pub struct AdamWState<T: Scalar> {
    pub step: u64,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
}

impl<T: Scalar> Default for AdamWState<T> {
    fn default() -> Self {
        Self { step: 0, m: ParamStore::new(), v: ParamStore::new() }
    }
}

/// One AdamW update of every parameter that has a gradient in `grads`.
/// Parameters without a gradient are left untouched, decay included.
pub fn adamw_step<T: Scalar>(
    params: &mut ParamStore<T>,
    grads: &ParamStore<T>,
    state: &mut AdamWState<T>,
    opt: &AdamW,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads.iter() {
        let p = params.get(name)?;
        ensure(p.shape() == g.shape(), || {
            format!("gradient for {name} has shape {:?}, parameter {:?}", g.shape(), p.shape())
        })?;
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    for (name, g) in grads.iter() {
        if !state.m.contains(name) {
            state.m.insert(name, Tensor::zeros(g.shape()))?;
            state.v.insert(name, Tensor::zeros(g.shape()))?;
        }
        let decay = if opt.no_decay.iter().any(|n| n == name) { 0.0 } else { opt.weight_decay };
        let m = state.m.get_mut(name)?.data_mut();
        let v = state.v.get_mut(name)?.data_mut();
        let p = params.get_mut(name)?.data_mut();
        for i in 0..p.len() {
            let gi = g.data()[i].to_f64().unwrap_or(f64::NAN);
            let mi = opt.beta1 * m[i].to_f64().unwrap_or(f64::NAN) + (1.0 - opt.beta1) * gi;
            let vi = opt.beta2 * v[i].to_f64().unwrap_or(f64::NAN) + (1.0 - opt.beta2) * gi * gi;
            m[i] = T::lit(mi);
            v[i] = T::lit(vi);
            let pi = p[i].to_f64().unwrap_or(f64::NAN);
            let update = (mi / c1) / ((vi / c2).sqrt() + opt.eps);
            p[i] = T::lit(pi - lr * decay * pi - lr * update);
        }
    }
    Ok(())
}
