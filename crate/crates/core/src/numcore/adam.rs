use super::{DenseGradients, NumError, ParameterStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub(crate) first: Vec<Tensor>,
    pub(crate) second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParameterStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    pub(crate) fn from_parts(
        config: AdamConfig,
        step: u64,
        first: Vec<Tensor>,
        second: Vec<Tensor>,
    ) -> Self {
        Self {
            config,
            step,
            first,
            second,
        }
    }
}

/// One bias-corrected Adam update over every parameter.
pub fn adam_step(
    store: &mut ParameterStore,
    grads: &DenseGradients,
    state: &mut AdamState,
) -> Result<(), NumError> {
    if grads.len() != store.len() || state.first.len() != store.len() {
        return Err(NumError::LayoutMismatch);
    }
    for (idx, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            let (name, _) = store.by_index(idx);
            return Err(NumError::NonFiniteGradient {
                param: name.to_string(),
            });
        }
        if g.shape() != store.by_index(idx).1.shape() {
            return Err(NumError::LayoutMismatch);
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    for (idx, g) in grads.iter().enumerate() {
        let param = store.by_index_mut(idx);
        let m = state.first[idx].data_mut();
        let v = state.second[idx].data_mut();
        for (((p, &gv), mv), vv) in param.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
