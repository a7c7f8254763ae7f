use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LR: f64 = 1e-4;

/// Moments and hyperparameters of the ADAM optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(DEFAULT_LR)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.v.get(name)
    }
}

/// One bias-corrected ADAM update of every parameter that has a gradient.
///
/// All shapes are validated before any parameter is touched.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
) -> Result<()> {
    for (name, g) in grads {
        let p = params.get(name)?;
        if !params.is_trainable(name) {
            return Err(Error::Config(format!("`{name}` is not trainable")));
        }
        for (what, other) in [("parameter", Some(p)), ("first moment", state.m.get(name)), ("second moment", state.v.get(name))] {
            if let Some(other) = other {
                if other.shape() != g.shape() {
                    return Err(Error::shape(
                        "adam_step",
                        format!(
                            "`{name}`: gradient {:?} vs {what} {:?}",
                            g.shape(),
                            other.shape()
                        ),
                    ));
                }
            }
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let correction1 = 1.0 - state.beta1.powi(t);
    let correction2 = 1.0 - state.beta2.powi(t);
    for (name, g) in grads {
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape()));
        let p = params.get_mut(name)?;
        for (((pv, mv), vv), gv) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *mv = state.beta1 * *mv + (1.0 - state.beta1) * gv;
            *vv = state.beta2 * *vv + (1.0 - state.beta2) * gv * gv;
            let m_hat = *mv / correction1;
            let v_hat = *vv / correction2;
            *pv -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(vec![value]));
        s
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = single(0.75);
        let before = params.clone();
        let mut state = AdamState::default();
        let grads = BTreeMap::from([("w".to_string(), Tensor::zeros(&[1]))]);
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = single(1.0);
        let mut state = AdamState::default();
        assert_eq!(state.lr, 1e-4);
        let grads = BTreeMap::from([("w".to_string(), Tensor::from_vec(vec![0.5]))]);
        adam_step(&mut params, &grads, &mut state).unwrap();
        // bias correction makes m_hat = g and v_hat = g^2
        let expected = 1e-4 * 0.5 / (0.5 + 1e-8);
        let moved = 1.0 - params.get("w").unwrap().item();
        assert!((moved - expected).abs() < 1e-15, "{moved}");
    }

    #[test]
    fn shape_mismatch_rejected_without_side_effects() {
        let mut params = single(1.0);
        let mut state = AdamState::default();
        let grads = BTreeMap::from([("w".to_string(), Tensor::zeros(&[2]))]);
        assert!(adam_step(&mut params, &grads, &mut state).is_err());
        assert_eq!(state.steps(), 0);
    }
}
