use super::{ParamGrads, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        AdamState::with_betas(store, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        store: &ParamStore,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, e)| Tensor::zeros(e.value.shape().to_vec()))
            .collect();
        AdamState {
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moment(&self, index: usize) -> &Tensor {
        &self.first[index]
    }

    pub fn second_moment(&self, index: usize) -> &Tensor {
        &self.second[index]
    }

    /// One update of every trainable parameter; increments the step count.
    pub fn update(&mut self, store: &mut ParamStore, grads: &ParamGrads) -> Result<()> {
        if grads.len() != store.len() || self.first.len() != store.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "{} gradients and {} moment slots for {} parameters",
                    grads.len(),
                    self.first.len(),
                    store.len()
                ),
            ));
        }
        for id in store.ids() {
            let p = store.get(id);
            if p.shape() != grads.get(id).shape() || p.shape() != self.first[id.0].shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!(
                        "parameter `{}` {:?} vs gradient {:?}",
                        store.entry(id).name,
                        p.shape(),
                        grads.get(id).shape()
                    ),
                ));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.trainable_ids().collect();
        for id in ids {
            let g = grads.get(id).data();
            let m = self.first[id.0].data_mut();
            let v = self.second[id.0].data_mut();
            let p = store.get_mut(id).data_mut();
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ParamId;

    fn single(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(value), true);
        s
    }

    fn grad(store: &ParamStore, g: f64) -> ParamGrads {
        let mut grads = ParamGrads::zeros_like(store);
        grads.set(store.find("w").unwrap(), &Tensor::scalar(g));
        grads
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = single(0.5);
        let mut adam = AdamState::new(&store, 1e-3);
        let g = grad(&store, 1.0);
        adam.update(&mut store, &g).unwrap();
        // m_hat = 1, v_hat = 1 => delta = lr / (1 + eps)
        let expected = 0.5 - 1e-3 / (1.0 + 1e-8);
        assert!((store.get(ParamId(0)).data()[0] - expected).abs() < 1e-15);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut store = single(0.5);
        let mut adam = AdamState::new(&store, 1e-3);
        {
            let g = grad(&store, 1.0);
            adam.update(&mut store, &g).unwrap();
        }
        let m1 = adam.first_moment(0).data()[0];
        let v1 = adam.second_moment(0).data()[0];
        // Momentum keeps moving the parameter; only the moments are checked.
        {
            let g = grad(&store, 0.0);
            adam.update(&mut store, &g).unwrap();
        }
        assert!(adam.first_moment(0).data()[0].abs() < m1.abs());
        assert!(adam.second_moment(0).data()[0] < v1);
        assert!(adam.second_moment(0).data()[0] >= 0.0);

        let mut fresh = single(0.5);
        let mut adam = AdamState::new(&fresh, 1e-3);
        for _ in 0..3 {
            {
                let g = grad(&fresh, 0.0);
                adam.update(&mut fresh, &g).unwrap();
            }
        }
        assert_eq!(fresh.get(ParamId(0)).data()[0], 0.5);
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut store = single(0.0);
        let mut adam = AdamState::new(&store, 1e-2);
        let mut prev = 0.0;
        for _ in 0..2 {
            {
                let g = grad(&store, 0.3);
                adam.update(&mut store, &g).unwrap();
            }
            let now = store.get(ParamId(0)).data()[0];
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut store = single(0.0);
        let mut adam = AdamState::new(&store, 1e-3);
        let mut other = ParamStore::new();
        other.add("w", Tensor::zeros(vec![2]), true);
        let g = ParamGrads::zeros_like(&other);
        assert!(matches!(
            adam.update(&mut store, &g),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn frozen_entries_are_untouched() {
        let mut store = single(1.0);
        store.add("running", Tensor::scalar(2.0), false);
        let mut adam = AdamState::new(&store, 1e-3);
        let mut g = ParamGrads::zeros_like(&store);
        g.set(ParamId(1), &Tensor::scalar(5.0));
        adam.update(&mut store, &g).unwrap();
        assert_eq!(store.get(ParamId(1)).data()[0], 2.0);
    }
}
