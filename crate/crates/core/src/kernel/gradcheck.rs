//! Central finite differences, the reference every tape gradient is checked
//! against.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every coordinate `i`.
pub fn finite_diff_grad(f: impl Fn(&Tensor<f64>) -> f64, x: &Tensor<f64>, eps: f64) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    out
}

/// `max |a - b| / max(max |b|, floor)`; the floor keeps near-zero gradients
/// from turning rounding noise into large ratios.
pub fn relative_error(got: &Tensor<f64>, want: &Tensor<f64>) -> f64 {
    const FLOOR: f64 = 1e-6;
    got.max_abs_diff(want) / want.max_abs().max(FLOOR)
}

/// Outcome of comparing tape adjoints against finite differences.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Worst relative error per input, in input order.
    pub errors: Vec<f64>,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Builds `build(tape, inputs) -> scalar` once on a tape and compares the
/// reverse-mode adjoint of every input with [`finite_diff_grad`], where the
/// latter re-evaluates only the forward values with one input perturbed.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], eps: f64, build: F) -> Result<GradCheck>
where
    F: for<'t> Fn(&mut Tape<'t, f64>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut errors = Vec::with_capacity(inputs.len());
    for (i, var) in vars.iter().enumerate() {
        let fd = finite_diff_grad(
            |xi| {
                let mut xs = inputs.to_vec();
                xs[i] = xi.clone();
                eval(&xs).expect("forward succeeded on unperturbed inputs")
            },
            &inputs[i],
            eps,
        );
        errors.push(relative_error(&grads.get(*var), &fd));
    }
    Ok(GradCheck { errors })
}
