use crate::error::{Error, Result};
use crate::scalar::Real;

use super::model::Block;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize, lr: T) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

/// Bias-corrected Adam update. Gradients are checked block by block before
/// anything is modified.
pub fn adam_step<T: Real>(state: &mut AdamState<T>, params: &mut [T], grads: &[T], blocks: &[Block]) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for b in blocks {
        if grads[b.offset..b.offset + b.len].iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(b.name.clone()));
        }
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!("index {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = T::one() - state.beta1.powi(t);
    let c2 = T::one() - state.beta2.powi(t);
    let step = state.lr / c1;
    let c2s = c2.sqrt();
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (T::one() - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (T::one() - state.beta2) * g * g;
        params[i] -= step * state.m[i] / (state.v[i].sqrt() / c2s + state.eps);
    }
    Ok(())
}
