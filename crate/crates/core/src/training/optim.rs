use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::nn::ParamStore;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamMoments {
    fn default() -> Self {
        AdamMoments {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Plain SGD or bias-corrected Adam over every parameter of a store.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    moments: AdamMoments,
    steps: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, moments: AdamMoments) -> Self {
        Optimizer {
            kind,
            lr,
            moments,
            steps: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Parameters without a gradient see a zero
    /// gradient, so Adam still decays their moments.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) {
        self.steps += 1;
        let ids: Vec<_> = store.ids().collect();
        match self.kind {
            OptimizerKind::Sgd => {
                for (id, g) in ids.into_iter().zip(grads) {
                    if let Some(g) = g {
                        let lr = self.lr;
                        for (p, d) in store.get_mut(id).data_mut().iter_mut().zip(g.data()) {
                            *p -= lr * d;
                        }
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = ids.iter().map(|&id| vec![0.0; store.get(id).numel()]).collect();
                    self.v = self.m.clone();
                }
                let AdamMoments { beta1, beta2, eps } = self.moments;
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (k, id) in ids.into_iter().enumerate() {
                    let g = grads.get(k).and_then(|g| g.as_ref());
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    if g.is_none() && m.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let p = store.get_mut(id).data_mut();
                    for i in 0..p.len() {
                        let gi = g.map_or(0.0, |g| g.data()[i]);
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        let mhat = m[i] / c1;
                        let vhat = v[i] / c2;
                        p[i] -= self.lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("g", "w", Tensor::vector(vec![1.0, -2.0]).unwrap());
        s
    }

    #[test]
    fn sgd_moves_by_lr_times_grad() {
        let mut s = store();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, AdamMoments::default());
        opt.step(&mut s, &[Some(Tensor::vector(vec![0.5, 1.0]).unwrap())]);
        let id = s.ids().next().unwrap();
        assert_eq!(s.get(id).data(), &[1.0 - 0.1 * 0.5, -2.0 - 0.1 * 1.0]);
    }

    #[test]
    fn first_adam_step_is_lr_times_sign() {
        let mut s = store();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, AdamMoments::default());
        opt.step(&mut s, &[Some(Tensor::vector(vec![3.0, -0.2]).unwrap())]);
        let id = s.ids().next().unwrap();
        let d = s.get(id).data();
        assert!((d[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((d[1] - (-2.0 + 0.01)).abs() < 1e-9);
    }

    #[test]
    fn missing_gradient_leaves_fresh_params_alone() {
        let mut s = store();
        let before = s.clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, AdamMoments::default());
        opt.step(&mut s, &[None]);
        let id = s.ids().next().unwrap();
        assert_eq!(s.get(id), before.get(id));
    }
}
