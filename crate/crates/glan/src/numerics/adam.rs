//! Adam optimizer with bias-corrected first and second moments.

use super::real::Real;
use super::tensor::Tensor;
use super::{NumericsError, NumericsResult, ParamVisit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct Moments<T: Real> {
    m: Tensor<T>,
    v: Tensor<T>,
}

/// Per-parameter moment estimates, keyed by parameter name. Moment tensors
/// are always shape-identical to their parameter.
pub struct AdamState<T: Real> {
    config: AdamConfig,
    step: u64,
    slots: BTreeMap<String, Moments<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            slots: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every parameter that has a gradient in `grads`.
    /// Parameters without a gradient entry are left untouched. A gradient
    /// whose shape differs from its parameter is a domain error.
    pub fn apply<P: ParamVisit<T>>(
        &mut self,
        params: &mut P,
        grads: &BTreeMap<String, Tensor<T>>,
        lr: f64,
    ) -> NumericsResult<()> {
        let mut shape_err = None;
        for (name, g) in grads {
            let mut found = false;
            params.visit_params(&mut |n, p| {
                if n == name {
                    found = true;
                    if p.shape() != g.shape() {
                        shape_err = Some(NumericsError::ShapeMismatch {
                            context: format!("adam gradient for {name}"),
                            expected: p.shape().to_vec(),
                            got: g.shape().to_vec(),
                        });
                    }
                }
            });
            if !found {
                return Err(NumericsError::ShapeMismatch {
                    context: format!("adam gradient for unknown parameter {name}"),
                    expected: vec![],
                    got: g.shape().to_vec(),
                });
            }
        }
        if let Some(e) = shape_err {
            return Err(e);
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(self.config.beta1);
        let b2 = T::from_f64(self.config.beta2);
        let one_m_b1 = T::ONE - b1;
        let one_m_b2 = T::ONE - b2;
        let corr1 = T::from_f64(1.0 - self.config.beta1.powi(t));
        let corr2 = T::from_f64(1.0 - self.config.beta2.powi(t));
        let eps = T::from_f64(self.config.epsilon);
        let lr = T::from_f64(lr);

        let slots = &mut self.slots;
        params.visit_params_mut(&mut |name, p| {
            let Some(g) = grads.get(name) else { return };
            let slot = slots.entry(name.to_string()).or_insert_with(|| Moments {
                m: Tensor::zeros(p.shape().to_vec()),
                v: Tensor::zeros(p.shape().to_vec()),
            });
            let md = slot.m.data_mut();
            let vd = slot.v.data_mut();
            let pd = p.data_mut();
            let gd = g.data();
            for i in 0..pd.len() {
                md[i] = b1 * md[i] + one_m_b1 * gd[i];
                vd[i] = b2 * vd[i] + one_m_b2 * gd[i] * gd[i];
                let m_hat = md[i] / corr1;
                let v_hat = vd[i] / corr2;
                pd[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        Ok(())
    }
}
