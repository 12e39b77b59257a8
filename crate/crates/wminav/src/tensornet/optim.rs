//! SGD and Adam parameter updates.

use crate::error::{Error, Result};

use super::tensor::Tensor;

fn check_shapes(params: &[Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameter tensors vs {} gradient tensors",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "parameter shape {:?} vs gradient shape {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    Ok(())
}

/// θ ← θ − η·∇J, elementwise.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], eta: f64) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= eta * gv;
        }
    }
    Ok(())
}

/// Adam first/second-moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed state with the standard coefficients β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    eta: f64,
) -> Result<()> {
    check_shapes(params, grads)?;
    check_shapes(params, &state.m)?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let (pd, gd) = (p.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            md[i] = state.beta1 * md[i] + (1.0 - state.beta1) * gd[i];
            vd[i] = state.beta2 * vd[i] + (1.0 - state.beta2) * gd[i] * gd[i];
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            pd[i] -= eta * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
