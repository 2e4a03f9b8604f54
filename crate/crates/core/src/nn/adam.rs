use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam optimizer with bias-corrected moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            t: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[&[T]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension("optimizer tensor count mismatch".into()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension("optimizer tensor shape mismatch".into()));
            }
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (ob1, ob2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let step = T::of(lr / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let eps = T::of(c.eps);
        for (((p, &g), m), v) in params.into_iter().zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + ob1 * g[k];
                v[k] = b2 * v[k] + ob2 * g[k] * g[k];
                p[k] -= step * m[k] / ((v[k] * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Adam<U> {
        let conv = |t: &Vec<Vec<T>>| t.iter().map(|v| v.iter().map(|x| U::of(x.as_f64())).collect()).collect();
        Adam { config: self.config, t: self.t, m: conv(&self.m), v: conv(&self.v) }
    }
}

/// Exponential learning-rate decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub decay: f64,
    pub interval: u64,
    pub staircase: bool,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { base_lr: 1e-4, decay: 0.98, interval: 2000, staircase: true }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) || self.interval == 0 || !(self.base_lr >= 0.0) {
            return Err(Error::InvalidInput(format!("bad learning-rate schedule {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        if self.staircase {
            self.base_lr * self.decay.powi((step / self.interval) as i32)
        } else {
            self.base_lr * self.decay.powf(step as f64 / self.interval as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_values() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 1e-4);
        assert_eq!(s.lr_at(1999), 1e-4);
        assert_eq!(s.lr_at(2000), 9.8e-5);
        assert_eq!(s.lr_at(4000), 9.604e-5);
        let smooth = LrSchedule { staircase: false, ..s };
        assert!(smooth.lr_at(1000) < 1e-4 && smooth.lr_at(1000) > 9.8e-5);
        assert!(LrSchedule { decay: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn zero_gradient_first_step() {
        let mut p = vec![1.5f64, -2.0];
        let mut adam = Adam::new(AdamConfig::default(), &[2]);
        adam.step(vec![&mut p], &[&[0.0, 0.0]], 0.1).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = vec![0.3f64, 0.7, -1.1];
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        for _ in 0..10 {
            adam.step(vec![&mut p], &[&[1.0, -3.0, 0.2]], 0.0).unwrap();
        }
        assert_eq!(p, vec![0.3, 0.7, -1.1]);
    }

    #[test]
    fn single_step_unit_gradient() {
        // m̂ = 1, v̂ = 1, so the update is lr / (1 + eps)
        let lr = 1e-3;
        let mut p = vec![0.0f64];
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        adam.step(vec![&mut p], &[&[1.0]], lr).unwrap();
        let expect = -lr / (1.0 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-12 * lr, "{}", p[0]);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let lr = 1e-2;
        let mut p = vec![0.0f64];
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam.step(vec![&mut p], &[&[0.37]], lr).unwrap();
            last = before - p[0];
        }
        assert!((last - lr).abs() < 1e-6 * lr.max(1.0), "{last}");
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0f32; 2];
        let mut adam = Adam::<f32>::new(AdamConfig::default(), &[3]);
        assert!(adam.step(vec![&mut p], &[&[0.0, 0.0]], 0.1).is_err());
    }
}
