//! Small reverse-mode networks and Adam-family optimizers.

mod activation;
mod dense;
mod optim;
mod perm;
mod poly;

pub use activation::Activation;
pub use dense::{dense_param_count, DenseCache, DenseNet};
pub use optim::{Optimizer, OptimizerKind, Schedule};
pub use perm::{perm_param_count, PermCache, PermEquivariantNet};
pub use poly::PolynomialNet;

/// Largest per-component relative error between `grads` and central
/// differences of `f` at `params` with step `h`.
///
/// Components where both values are below `1e-5 · max(1, |f(params)|)` in
/// magnitude are compared against that floor instead of their own size, since
/// central differences of `f` carry rounding noise proportional to `|f|`.
pub fn gradient_check<F: Fn(&[f64]) -> f64>(f: F, params: &[f64], grads: &[f64], h: f64) -> f64 {
    let floor = 1e-5 * f(params).abs().max(1.0);
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let denom = fd.abs().max(grads[i].abs()).max(floor);
        worst = worst.max((fd - grads[i]).abs() / denom);
    }
    worst
}
