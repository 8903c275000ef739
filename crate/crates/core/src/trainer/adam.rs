use super::{TrainConfig, TrainError};
use crate::nnkernel::{ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn from_config(cfg: &TrainConfig, lr: f64) -> Self {
        Self {
            lr,
            weight_decay: cfg.weight_decay,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
    pub step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(store: &ParamStore<S>) -> Self {
        let zeros = || store.iter().map(|p| vec![S::zero(); p.value.len()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn matches(&self, store: &ParamStore<S>) -> bool {
        self.m.len() == store.len()
            && self.v.len() == store.len()
            && store
                .iter()
                .zip(self.m.iter().zip(&self.v))
                .all(|(p, (m, v))| m.len() == p.value.len() && v.len() == p.value.len())
    }
}

/// One bias-corrected Adam update using the gradients held in `store`,
/// with decoupled weight decay `θ ← θ − lr·m̂/(√v̂+ε) − lr·wd·θ`.
/// Nothing is modified when any gradient is non-finite.
pub fn adam_step<S: Scalar>(store: &mut ParamStore<S>, state: &mut AdamState<S>, hp: AdamHyper) -> Result<(), TrainError> {
    if !state.matches(store) {
        return Err(TrainError::State("Adam moments do not match the parameters".into()));
    }
    for p in store.iter() {
        if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient {
                param: p.name.clone(),
                index: i,
            });
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (S::lit(hp.beta1), S::lit(hp.beta2));
    let c1 = S::lit(1.0 - hp.beta1.powf(t));
    let c2 = S::lit(1.0 - hp.beta2.powf(t));
    let (lr, decay, eps) = (S::lit(hp.lr), S::lit(hp.lr * hp.weight_decay), S::lit(hp.eps));
    let one = S::one();
    for (p, (m, v)) in store.iter_mut().zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let grad = p.grad.data().to_vec();
        for (i, theta) in p.value.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps) - decay * *theta;
        }
    }
    Ok(())
}

/// Piecewise-constant schedule: `lr0 · factor^k` where `k` counts the drop
/// epochs at or below `epoch`.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> Result<f64, TrainError> {
    if epoch >= cfg.epochs {
        return Err(TrainError::Epoch {
            epoch,
            epochs: cfg.epochs,
        });
    }
    let drops = cfg.lr_drop_epochs.iter().filter(|&&e| e <= epoch).count();
    Ok(cfg.lr0 * cfg.lr_drop_factor.powi(drops as i32))
}
