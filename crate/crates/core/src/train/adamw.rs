use super::{TrainConfig, TrainError};
use crate::autodiff::Parameter;

/// First and second moment buffers, one per parameter, plus the step count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Parameter]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
        }
    }
}

/// One AdamW update from the gradients accumulated on `params`, with
/// decoupled weight decay:
/// `θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ`.
/// Every gradient is checked before anything is modified.
pub fn adamw_step(params: &[Parameter], state: &mut AdamState, config: &TrainConfig) -> Result<(), TrainError> {
    if state.m.len() != params.len() || params.iter().zip(&state.m).any(|(p, m)| p.tensor.numel() != m.len()) {
        return Err(TrainError::Config("optimizer state does not match the parameters".into()));
    }
    let grads: Vec<Vec<f64>> = params.iter().map(|p| p.tensor.grad()).collect();
    for (p, g) in params.iter().zip(&grads) {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGrad { param: p.name.clone(), step: state.step + 1 });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
    let (lr, wd, eps) = (config.lr, config.weight_decay, config.adam_eps);
    for (((p, g), m), v) in params.iter().zip(&grads).zip(&mut state.m).zip(&mut state.v) {
        p.tensor.update_data(|theta| {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let (mh, vh) = (m[i] / c1, v[i] / c2);
                theta[i] = theta[i] - lr * (mh / (vh.sqrt() + eps)) - lr * wd * theta[i];
            }
        });
    }
    Ok(())
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
pub(crate) fn clip_grad_norm(params: &[Parameter], max_norm: f64) {
    let norm = params.iter().flat_map(|p| p.tensor.grad()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params {
            p.tensor.scale_grad(scale);
        }
    }
}
