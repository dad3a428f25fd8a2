use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// First and second moment buffers, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let zeros = || {
            store
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place. With `decay`, the
/// gradient gains an additive `weight_decay·θ` term.
pub fn adam_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    hp: &AdamParams,
    decay: bool,
) -> Result<()> {
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} parameters, {} gradients, {}/{} moments",
                theta.len(),
                grad.len(),
                m.len(),
                v.len()
            ),
        ));
    }
    if step == 0 {
        return Err(Error::InvalidArgument(
            "adam step counter starts at 1".into(),
        ));
    }
    let (b1, b2) = (T::from_f64(hp.beta1), T::from_f64(hp.beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let bc1 = T::from_f64(1.0 - hp.beta1.powi(step as i32));
    let bc2 = T::from_f64(1.0 - hp.beta2.powi(step as i32));
    let lr = T::from_f64(hp.lr);
    let eps = T::from_f64(hp.eps);
    let wd = T::from_f64(if decay { hp.weight_decay } else { 0.0 });
    for i in 0..theta.len() {
        let g = grad[i] + wd * theta[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Applies the accumulated gradients of `store`, then clears them.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    state: &mut AdamState<T>,
    hp: &AdamParams,
) -> Result<()> {
    if hp.lr <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} is not positive",
            hp.lr
        )));
    }
    if state.m.len() != store.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "optimizer tracks {} tensors, store has {}",
                state.m.len(),
                store.len()
            ),
        ));
    }
    state.step += 1;
    for (i, p) in store.params_mut().iter_mut().enumerate() {
        if state.m[i].shape() != p.value.shape() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "`{}` is {:?}, moments are {:?}",
                    p.name,
                    p.value.shape(),
                    state.m[i].shape()
                ),
            ));
        }
        let decay = p.decay;
        adam_update(
            p.value.data_mut(),
            p.grad.data(),
            state.m[i].data_mut(),
            state.v[i].data_mut(),
            state.step,
            hp,
            decay,
        )?;
    }
    store.zero_grad();
    Ok(())
}
