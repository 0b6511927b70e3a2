use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descend `grad` with learning rate `lr`.
    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector, lr: f64) -> Result<()> {
        params.check_layout(grad)?;
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grad.values())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::LayerShape;

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let layout = vec![LayerShape { inputs: 1, outputs: 1 }];
        let mut p = ParamVector::from_parts(layout.clone(), vec![1.0, -1.0]).unwrap();
        let g = ParamVector::from_parts(layout, vec![0.5, -2.0]).unwrap();
        let mut opt = Adam::new(2, AdamConfig::default());
        opt.step(&mut p, &g, 0.1).unwrap();
        assert!((p.values()[0] - 0.9).abs() < 1e-7);
        assert!((p.values()[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_quadratic() {
        let layout = vec![LayerShape { inputs: 1, outputs: 1 }];
        let mut p = ParamVector::from_parts(layout.clone(), vec![3.0, -2.0]).unwrap();
        let mut opt = Adam::new(2, AdamConfig::default());
        for _ in 0..2000 {
            let g = ParamVector::from_parts(layout.clone(), p.values().iter().map(|x| 2.0 * x).collect()).unwrap();
            opt.step(&mut p, &g, 0.05).unwrap();
        }
        assert!(p.norm() < 1e-3);
    }
}
