//! Adam with inverse-time learning-rate decay.

use ndarray::{ArrayD, ArrayViewMutD, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::network::Network;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    /// `lr / (1 + decay·iterations)` with `iterations` updates already applied.
    pub fn effective_lr(&self, iterations: u64) -> f64 {
        self.learning_rate / (1.0 + self.decay * iterations as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub config: AdamConfig,
    /// Updates applied so far.
    pub step: u64,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update of `params` in place. Moments start at zero on first use.
    pub fn update(&mut self, mut params: Vec<ArrayViewMutD<'_, F>>, grads: &[ArrayD<F>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| ArrayD::zeros(g.raw_dim())).collect();
            self.v = self.m.clone();
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(NnError::Shape(format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
        }
        let c = self.config;
        let lr = c.effective_lr(self.step);
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let f = |x: f64| F::from_f64(x).unwrap();
        let (b1, b2, nb1, nb2) = (f(c.beta1), f(c.beta2), f(1.0 - c.beta1), f(1.0 - c.beta2));
        let (step_size, eps, sqrt_bc2) = (f(lr / bc1), f(c.epsilon), f(bc2.sqrt()));
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + nb1 * g;
                *v = b2 * *v + nb2 * g * g;
                *p -= step_size * *m / ((*v).sqrt() / sqrt_bc2 + eps);
            });
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut Network<F>, grads: &[ArrayD<F>]) -> Result<()> {
        self.update(net.params_mut(), grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = arr1(&[1.0f64, -2.0]).into_dyn();
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..3 {
            let g = ArrayD::zeros(p.raw_dim());
            adam.update(vec![p.view_mut()], &[g]).unwrap();
        }
        assert_eq!(p, arr1(&[1.0, -2.0]).into_dyn());
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Array1::from_elem(1, 0.0f64).into_dyn();
        let mut adam = Adam::new(AdamConfig::default());
        adam.update(vec![p.view_mut()], &[Array1::from_elem(1, 1.0).into_dyn()]).unwrap();
        assert!((p[[0]] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn decay_shrinks_lr() {
        let c = AdamConfig::default();
        assert_eq!(c.effective_lr(0), 1e-3);
        assert!((c.effective_lr(1_000_000) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_match() {
        let run = || {
            let mut p = arr1(&[0.3f64, 0.1]).into_dyn();
            let mut adam = Adam::new(AdamConfig::default());
            for k in 0..20 {
                let g = p.mapv(|x| 2.0 * x + k as f64 * 0.01);
                adam.update(vec![p.view_mut()], &[g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
