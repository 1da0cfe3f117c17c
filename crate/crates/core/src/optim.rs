//! Adam with L2 weight decay, and the step-decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ConvParams, Network};
use crate::tensor::{Scalar, Tensor};

/// `lr(i) = base_lr * gamma^floor(i / step_every)` for `0 <= i < total_iters`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub step_every: usize,
    pub total_iters: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, gamma: f64, step_every: usize, total_iters: usize) -> Result<Self> {
        if !(base_lr.is_finite() && base_lr > 0.0)
            || !(gamma.is_finite() && gamma > 0.0)
            || step_every == 0
            || total_iters == 0
        {
            return Err(Error::Config(format!(
                "schedule needs base_lr > 0, gamma > 0, step_every >= 1, total_iters >= 1 \
                 (got {base_lr}, {gamma}, {step_every}, {total_iters})"
            )));
        }
        Ok(LrSchedule {
            base_lr,
            gamma,
            step_every,
            total_iters,
        })
    }

    pub fn lr_at(&self, iter: usize) -> Result<f64> {
        if iter >= self.total_iters {
            return Err(Error::Range(format!(
                "iteration {iter} outside schedule of {} iterations",
                self.total_iters
            )));
        }
        let steps = (iter / self.step_every) as i32;
        Ok(self.base_lr * self.gamma.powi(steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// A parameter tensor paired with its gradient, addressed by name for error
/// reporting.
pub struct ParamSlot<'a, T> {
    pub name: String,
    pub value: &'a mut Tensor<T>,
    pub grad: &'a Tensor<T>,
}

/// Moment estimates for one parameter list. Moments are allocated on the
/// first step and must keep matching parameter shapes afterwards.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    /// One Adam update. Gradients are checked for finiteness before any
    /// parameter is touched.
    pub fn step(&mut self, params: &mut [ParamSlot<'_, T>], lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Range(format!("learning rate {lr} must be > 0")));
        }
        if let Some(bad) = params.iter().find(|p| !p.grad.all_finite()) {
            return Err(Error::NonFiniteGradient {
                param: bad.name.clone(),
            });
        }
        for p in params.iter() {
            if p.value.shape() != p.grad.shape() {
                return Err(Error::shape(
                    format!("adam `{}`", p.name),
                    format!("value {:?} vs grad {:?}", p.value.shape(), p.grad.shape()),
                ));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len()
            || self
                .m
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.shape() != p.value.shape())
        {
            return Err(Error::shape("adam", "parameter list changed between steps"));
        }

        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one = T::one();
        let wd = T::from_f64(c.weight_decay);
        let eps = T::from_f64(c.epsilon);
        let bc1 = T::from_f64(1.0 - c.beta1.powf(self.t as f64));
        let bc2 = T::from_f64(1.0 - c.beta2.powf(self.t as f64));
        let lr = T::from_f64(lr);

        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let values = p.value.data_mut();
            for (((x, &g), m), v) in values.iter_mut().zip(p.grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
                let g = g + wd * *x;
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Update every parameter of `net` from per-layer gradients.
    pub fn step_network(&mut self, net: &mut Network<T>, grads: &[Option<ConvParams<T>>], lr: f64) -> Result<()> {
        let names: Vec<String> = net.spec().layers.iter().map(|l| l.name.clone()).collect();
        let mut slots = Vec::new();
        for ((p, g), name) in net.params_mut().iter_mut().zip(grads).zip(&names) {
            match (p.as_mut(), g.as_ref()) {
                (Some(p), Some(g)) => {
                    slots.push(ParamSlot {
                        name: format!("{name}.weights"),
                        value: &mut p.weights,
                        grad: &g.weights,
                    });
                    slots.push(ParamSlot {
                        name: format!("{name}.bias"),
                        value: &mut p.bias,
                        grad: &g.bias,
                    });
                }
                (None, None) => {}
                _ => {
                    return Err(Error::shape(
                        format!("adam `{name}`"),
                        "gradient slots do not match parameters",
                    ))
                }
            }
        }
        self.step(&mut slots, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = LrSchedule::new(1e-4, 0.3, 40_000, 100_000).unwrap();
        assert_eq!(s.lr_at(0).unwrap(), 1e-4);
        assert!((s.lr_at(50_000).unwrap() - 3e-5).abs() < 1e-18);
        assert!(s.lr_at(100_000).is_err());
        let flat = LrSchedule::new(0.5, 1.0, 3, 10).unwrap();
        assert!((0..10).all(|i| flat.lr_at(i).unwrap() == 0.5));
    }

    fn scalar_step(x: f64, g: f64, lr: f64, state: &mut AdamState<f64>) -> f64 {
        let mut value = Tensor::new([1], vec![x]).unwrap();
        let grad = Tensor::new([1], vec![g]).unwrap();
        let mut slots = [ParamSlot {
            name: "x".into(),
            value: &mut value,
            grad: &grad,
        }];
        state.step(&mut slots, lr).unwrap();
        value.data()[0]
    }

    #[test]
    fn first_step_has_unit_ratio() {
        let mut state = AdamState::new(AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let x = scalar_step(1.0, 1.0, 0.1, &mut state);
        assert!((x - 0.9).abs() < 1e-6);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut state = AdamState::new(AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let x = scalar_step(2.5, 0.0, 0.1, &mut state);
        assert_eq!(x, 2.5);
        assert_eq!(state.t, 1);
        let x = scalar_step(x, 0.0, 0.1, &mut state);
        assert_eq!(x, 2.5);
        assert_eq!(state.t, 2);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut state = AdamState::<f64>::new(AdamConfig::default());
        let mut a = Tensor::new([1], vec![1.0]).unwrap();
        let mut b = Tensor::new([1], vec![1.0]).unwrap();
        let ga = Tensor::new([1], vec![0.5]).unwrap();
        let gb = Tensor::new([1], vec![f64::NAN]).unwrap();
        let mut slots = [
            ParamSlot {
                name: "fc1.weights".into(),
                value: &mut a,
                grad: &ga,
            },
            ParamSlot {
                name: "fc2.weights".into(),
                value: &mut b,
                grad: &gb,
            },
        ];
        let err = state.step(&mut slots, 0.1).unwrap_err();
        assert!(err.to_string().contains("fc2.weights"));
        assert_eq!(a.data()[0], 1.0);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn minimises_a_quadratic() {
        // reference: plain scalar Adam written out longhand
        let (mut x_ref, mut m, mut v) = (5.0f64, 0.0f64, 0.0f64);
        let mut state = AdamState::new(AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let mut x = 5.0;
        for t in 1..=100 {
            let g = 2.0 * x_ref;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x_ref -= 0.1 * mh / (vh.sqrt() + 1e-8);
            x = scalar_step(x, 2.0 * x, 0.1, &mut state);
            assert!((x - x_ref).abs() < 1e-12);
        }
        assert!(x.abs() < 5.0);
        assert!(x.abs() < x_ref.abs() + 1e-9);
    }
}
