//! Parameter updates: Adam (default) or plain SGD, with a step learning-rate
//! schedule (base rate until `step_epoch`, one tenth of it afterwards).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    /// Epoch index from which the reduced rate applies.
    pub step_epoch: usize,
    pub factor: f64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, step_epoch: usize) -> Self {
        LrSchedule {
            base_lr,
            step_epoch,
            factor: 0.1,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.step_epoch {
            self.base_lr
        } else {
            self.base_lr * self.factor
        }
    }
}

struct Moments<T: Scalar> {
    m: Vec<T>,
    v: Vec<T>,
}

/// Optimizer state: per-parameter moment buffers plus a step counter that
/// increases by exactly one per successful update.
pub struct Optimizer<T: Scalar> {
    kind: OptimizerKind,
    schedule: LrSchedule,
    moments: Vec<Moments<T>>,
    step_count: u64,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, schedule: LrSchedule) -> Self {
        assert!(schedule.base_lr > 0.0, "learning rate must be positive");
        Optimizer {
            kind,
            schedule,
            moments: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.schedule.lr_at(epoch)
    }

    /// Apply one update to `params` using each tensor's accumulated grad slot
    /// (a missing slot counts as a zero gradient). If any gradient is
    /// non-finite the whole update is rejected and no parameter changes.
    pub fn step(&mut self, params: &mut [(String, &mut Tensor<T>)], epoch: usize) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|(_, p)| Moments {
                    m: vec![T::zero(); p.len()],
                    v: vec![T::zero(); p.len()],
                })
                .collect();
        }
        assert_eq!(
            self.moments.len(),
            params.len(),
            "optimizer state does not match parameter list"
        );
        for (moments, (name, p)) in self.moments.iter().zip(params.iter()) {
            assert_eq!(moments.m.len(), p.len(), "moment buffer shape mismatch for {name}");
            if let Some(g) = p.grad() {
                if !g.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("gradient of {name}; update rejected"),
                    });
                }
            }
        }

        self.step_count += 1;
        let lr = T::c(self.schedule.lr_at(epoch));
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, p) in params.iter_mut() {
                    if !p.has_grad() {
                        continue;
                    }
                    let g: Vec<T> = p.grad().unwrap().to_vec();
                    for (x, gv) in p.data_mut().iter_mut().zip(g) {
                        *x = *x - lr * gv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let b1 = T::c(beta1);
                let b2 = T::c(beta2);
                let eps = T::c(eps);
                let t = self.step_count as i32;
                let bc1 = T::one() - b1.powi(t);
                let bc2 = T::one() - b2.powi(t);
                for (moments, (_, p)) in self.moments.iter_mut().zip(params.iter_mut()) {
                    let g: Vec<T> = match p.grad() {
                        Some(g) => g.to_vec(),
                        None => vec![T::zero(); p.len()],
                    };
                    for (((x, m), v), gv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(moments.m.iter_mut())
                        .zip(moments.v.iter_mut())
                        .zip(g)
                    {
                        *m = b1 * *m + (T::one() - b1) * gv;
                        *v = b2 * *v + (T::one() - b2) * gv * gv;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *x = *x - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        // lr=0.1, param=1.0, grad=2.0 -> 0.8
        let mut p = Tensor::<f64>::new(vec![1], vec![1.0]);
        p.grad_mut()[0] = 2.0;
        let mut opt = Optimizer::new(OptimizerKind::Sgd, LrSchedule::new(0.1, 100));
        opt.step(&mut [("p".to_string(), &mut p)], 0).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Tensor::<f64>::new(vec![2], vec![0.5, -0.25]);
        p.grad_mut(); // zero-filled
        let before = p.data().to_vec();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, LrSchedule::new(0.1, 100));
        opt.step(&mut [("p".to_string(), &mut p)], 0).unwrap();
        assert_eq!(p.data(), before.as_slice());
    }

    #[test]
    fn schedule_steps_down_to_a_tenth() {
        let s = LrSchedule::new(1e-4, 15);
        assert_eq!(s.lr_at(0), 1e-4);
        assert_eq!(s.lr_at(14), 1e-4);
        assert!((s.lr_at(15) - 1e-5).abs() < 1e-20);
        assert!((s.lr_at(19) - 1e-5).abs() < 1e-20);
    }

    #[test]
    fn non_finite_gradient_rejects_update() {
        let mut p = Tensor::<f64>::new(vec![1], vec![1.0]);
        p.grad_mut()[0] = f64::NAN;
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), LrSchedule::new(0.1, 100));
        let err = opt.step(&mut [("p".to_string(), &mut p)], 0);
        assert!(err.is_err());
        assert_eq!(p.data()[0], 1.0);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = Tensor::<f64>::new(vec![1], vec![1.0]);
        p.grad_mut()[0] = 2.0;
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), LrSchedule::new(0.01, 100));
        opt.step(&mut [("p".to_string(), &mut p)], 0).unwrap();
        // First Adam step moves by ~lr regardless of gradient magnitude.
        assert!(p.data()[0] < 1.0 && p.data()[0] > 1.0 - 0.02);
    }
}
