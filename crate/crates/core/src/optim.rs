//! SGD and Adam over a named parameter list.
//!
//! The optimizer owns per-tensor moment state aligned by position with the
//! parameter list it was built from; callers pass parameters and gradients
//! in that same order on every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Moments {
    m: Tensor,
    v: Tensor,
}

/// Optimizer state: kind, learning rate, step counter, and (for Adam)
/// first/second moments per parameter tensor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    moments: Vec<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: &[Vec<usize>]) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let moments = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adam => shapes
                .iter()
                .map(|s| Moments {
                    m: Tensor::zeros(s.clone()),
                    v: Tensor::zeros(s.clone()),
                })
                .collect(),
        };
        Ok(Self {
            kind,
            learning_rate,
            step: 0,
            moments,
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, &[])
    }

    pub fn adam(learning_rate: f64, shapes: &[Vec<usize>]) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate, shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters. `params`, `grads` and `names` are
    /// parallel; a non-finite gradient aborts before touching anything,
    /// naming the offending tensor.
    pub fn step(
        &mut self,
        params: &mut [(&str, &mut Tensor)],
        grads: &[Tensor],
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!(
                "{} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        if self.kind == OptimizerKind::Adam && self.moments.len() != params.len() {
            return Err(Error::State(
                "optimizer was built for a different parameter list".into(),
            ));
        }
        for ((name, p), g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Dimension(format!(
                    "gradient shape {:?} vs parameter `{}` {:?}",
                    g.shape(),
                    name,
                    p.shape()
                )));
            }
            g.check_finite(name)?;
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for ((_, p), g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= self.learning_rate * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as f64;
                let bc1 = 1.0 - ADAM_BETA1.powf(t);
                let bc2 = 1.0 - ADAM_BETA2.powf(t);
                for (((_, p), g), mom) in params.iter_mut().zip(grads).zip(&mut self.moments) {
                    for ((pv, gv), (mv, vv)) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(mom.m.data_mut().iter_mut().zip(mom.v.data_mut()))
                    {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                        let mhat = *mv / bc1;
                        let vhat = *vv / bc2;
                        *pv -= self.learning_rate * mhat / (vhat.sqrt() + ADAM_EPS);
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

    fn single(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    #[test]
    fn sgd_update_is_lr_times_gradient() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = single(1.0);
        opt.step(&mut [("p", &mut p)], &[single(2.0)]).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        // Bias correction makes the first update ≈ −lr·sign(g) for any c>0.
        for &c in &[0.01, 1.0, 250.0] {
            let mut opt = Optimizer::adam(0.05, &[vec![1]]).unwrap();
            let mut p = single(1.0);
            opt.step(&mut [("p", &mut p)], &[single(c)]).unwrap();
            let update = p.data()[0] - 1.0;
            assert!(
                (update + 0.05).abs() < 1e-6,
                "c = {c}: update {update}"
            );
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(p) = p², ∇f = 2p; the update rule itself is the oracle here,
        // checked for monotone loss decrease over windows.
        let mut opt = Optimizer::adam(0.1, &[vec![1]]).unwrap();
        let mut p = single(1.0);
        let mut window_losses = Vec::new();
        for w in 0..5 {
            let mut sum = 0.0;
            for _ in 0..10 {
                let g = single(2.0 * p.data()[0]);
                sum += p.data()[0] * p.data()[0];
                opt.step(&mut [("p", &mut p)], &[g]).unwrap();
            }
            window_losses.push(sum / 10.0);
            if w > 0 {
                assert!(
                    window_losses[w] < window_losses[w - 1],
                    "loss windows {window_losses:?}"
                );
            }
        }
        assert!(p.data()[0].abs() < 0.5, "p after 50 steps: {:?}", p.data());
    }

    #[test]
    fn non_finite_gradient_is_rejected_with_identifier() {
        let mut opt = Optimizer::adam(0.1, &[vec![1]]).unwrap();
        let mut p = single(1.0);
        let before = p.clone();
        let err = opt
            .step(&mut [("head.weight", &mut p)], &[single(f64::NAN)])
            .unwrap_err();
        assert!(err.to_string().contains("head.weight"));
        assert_eq!(p, before);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn zero_gradient_leaves_adam_parameters_unchanged() {
        let mut opt = Optimizer::adam(0.1, &[vec![2]]).unwrap();
        let mut p = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
        let before = p.clone();
        opt.step(&mut [("p", &mut p)], &[Tensor::zeros(vec![2])])
            .unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn step_counter_is_monotone() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = single(0.0);
        for want in 1..=5 {
            opt.step(&mut [("p", &mut p)], &[single(0.0)]).unwrap();
            assert_eq!(opt.step_count(), want);
        }
    }
}
