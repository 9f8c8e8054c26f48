//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::tensor::ParamSet;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter, in the
/// parameter set's insertion order.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
        AdamState {
            cfg,
            m,
            v,
            step_count: 0,
        }
    }

    /// Applies one update from the gradients stored on `params`, then clears
    /// them. Every parameter must carry a gradient.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::contract(format!(
                "optimizer built for {} parameters, given {}",
                self.m.len(),
                params.len()
            )));
        }
        for p in params.iter() {
            if p.value.grad.is_none() {
                return Err(Error::contract(format!(
                    "step: parameter {:?} has no gradient",
                    p.name
                )));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (idx, p) in params.iter_mut().enumerate() {
            let grad = p.value.grad.take().expect("checked above");
            if grad.len() != self.m[idx].len() {
                return Err(Error::contract(format!(
                    "step: parameter {:?} changed size under the optimizer",
                    p.name
                )));
            }
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            let data = p.value.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn one_param(value: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(value)).unwrap();
        ps
    }

    #[test]
    fn first_step_moves_by_lr_over_one_plus_eps() {
        // With m_hat = g and v_hat = g^2 after bias correction, the first
        // update is exactly lr * g / (|g| + eps).
        let mut ps = one_param(0.0);
        ps.get_mut("w").unwrap().grad = Some(vec![1.0]);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut opt = AdamState::new(cfg, &ps);
        opt.step(&mut ps).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((ps.get("w").unwrap().data()[0] - expected).abs() < 1e-15);
        assert_eq!(opt.step_count, 1);
        assert!(ps.get("w").unwrap().grad.is_none());
    }

    #[test]
    fn first_step_is_sign_scaled_for_any_gradient() {
        for &g in &[0.5, -3.0, 120.0, -1e-3] {
            let mut ps = one_param(2.0);
            ps.get_mut("w").unwrap().grad = Some(vec![g]);
            let mut opt = AdamState::new(AdamConfig::default(), &ps);
            opt.step(&mut ps).unwrap();
            let moved = ps.get("w").unwrap().data()[0] - 2.0;
            assert!((moved + 1e-3 * g.signum()).abs() < 1e-8, "g={g} moved={moved}");
        }
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut ps = one_param(0.0);
        let mut opt = AdamState::new(AdamConfig::default(), &ps);
        let err = opt.step(&mut ps).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert_eq!(opt.step_count, 0);
    }

    #[test]
    fn repeated_steps_descend_a_quadratic() {
        // Minimize (w - 3)^2 from 0; two hundred steps should close most of
        // the gap and every step must keep the iterate finite.
        let mut ps = one_param(0.0);
        let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
        let mut opt = AdamState::new(cfg, &ps);
        for _ in 0..200 {
            let w = ps.get("w").unwrap().data()[0];
            ps.get_mut("w").unwrap().grad = Some(vec![2.0 * (w - 3.0)]);
            opt.step(&mut ps).unwrap();
            assert!(ps.get("w").unwrap().data()[0].is_finite());
        }
        let w = ps.get("w").unwrap().data()[0];
        assert!((w - 3.0).abs() < 0.2, "w={w}");
        assert_eq!(opt.step_count, 200);
    }
}
