use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
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

/// Adam moments and step counter for one parameter set.
///
/// Uses the folded bias correction
/// `θ -= lr·sqrt(1-β2ᵗ)/(1-β1ᵗ) · m / (sqrt(v) + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: ParamSet,
    v: ParamSet,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        AdamState {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(Error::Shape("Adam parameter/gradient shapes disagree".into()));
        }
        for (name, g) in grads.iter() {
            if !g.is_finite() {
                return Err(Error::NonFinite { param: name.to_owned() });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let step_size = lr * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
        for i in 0..params.len() {
            let g = grads.tensor(i).data();
            let m = self.m.tensor_mut(i).data_mut();
            let v = self.v.tensor_mut(i).data_mut();
            let p = params.tensor_mut(i).data_mut();
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                p[j] -= step_size * m[j] / (v[j].sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2D;

    fn scalar(x: f64) -> ParamSet {
        ParamSet::new(vec![("theta".into(), Tensor2D::new(1, 1, vec![x]).unwrap())])
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = scalar(1.5);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        s.step(&mut p, &scalar(0.0)).unwrap();
        assert_eq!(p, scalar(1.5));
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn single_scalar_step() {
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut p = scalar(1.0);
        let mut s = AdamState::new(cfg, &p);
        s.step(&mut p, &scalar(1.0)).unwrap();
        // m = 0.1, v = 0.001, step size = 0.1·sqrt(0.001)/0.1
        let theta = p.tensor(0).data()[0];
        assert!((theta - 0.900_000_031_622_766_6).abs() < 1e-15, "{theta}");
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = scalar(0.3);
            let mut s = AdamState::new(AdamConfig::default(), &p);
            for g in [0.5, -0.2, 1e-3] {
                s.step(&mut p, &scalar(g)).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        match s.step(&mut p, &scalar(f64::NAN)) {
            Err(Error::NonFinite { param }) => assert_eq!(param, "theta"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.step_count(), 0);
    }
}
