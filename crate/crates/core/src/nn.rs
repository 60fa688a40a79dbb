//! Dense layers and layer stacks with hand-derived gradients.
//!
//! The forward pass returns a cache of per-layer inputs and preactivations;
//! the backward pass consumes that cache, so gradients can only be computed
//! for inputs that were actually run forward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor, // [in_dim × out_dim]
    pub bias: Tensor,    // [out_dim]
    pub activation: Activation,
}

/// Cache from one dense-layer forward: the input batch and the
/// preactivation (needed for the ReLU mask).
#[derive(Clone, Debug)]
pub struct DenseCache {
    input: Tensor,
    preact: Tensor,
}

/// Gradients shaped like the layer's parameters.
#[derive(Clone, Debug)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    /// He-style scaled uniform init, `U(±sqrt(6/fan_in))`; biases zero.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            weights: Tensor::new(vec![in_dim, out_dim], data).expect("sized by construction"),
            bias: Tensor::zeros(vec![out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        if input.shape().len() != 2 || input.cols() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "layer expects [batch × {}], got {:?}",
                self.in_dim(),
                input.shape()
            )));
        }
        let mut preact = input.matmul(&self.weights)?;
        preact.add_row(&self.bias)?;
        let output = match self.activation {
            Activation::ReLU => preact.map(|v| v.max(0.0)),
            Activation::Identity => preact.clone(),
        };
        Ok((
            output,
            DenseCache {
                input: input.clone(),
                preact,
            },
        ))
    }

    /// Given d(loss)/d(output), returns parameter gradients and
    /// d(loss)/d(input). No batch normalization happens here: upstream
    /// gradients are expected to already carry any 1/batch factor.
    pub fn backward(&self, cache: &DenseCache, grad_out: &Tensor) -> Result<(DenseGrads, Tensor)> {
        if grad_out.shape() != [cache.input.rows(), self.out_dim()] {
            return Err(Error::Dimension(format!(
                "grad shape {:?} vs output [{} × {}]",
                grad_out.shape(),
                cache.input.rows(),
                self.out_dim()
            )));
        }
        let delta = match self.activation {
            Activation::ReLU => {
                let mut d = grad_out.clone();
                for (dv, z) in d.data_mut().iter_mut().zip(cache.preact.data()) {
                    if *z <= 0.0 {
                        *dv = 0.0;
                    }
                }
                d
            }
            Activation::Identity => grad_out.clone(),
        };
        let grads = DenseGrads {
            weights: cache.input.t_matmul(&delta)?,
            bias: delta.col_sum(),
        };
        let grad_in = delta.matmul_t(&self.weights)?;
        Ok((grads, grad_in))
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            weights: Tensor::zeros(self.weights.shape().to_vec()),
            bias: Tensor::zeros(self.bias.shape().to_vec()),
        }
    }
}

impl DenseGrads {
    pub fn add_assign(&mut self, other: &DenseGrads) -> Result<()> {
        self.weights.add_assign(&other.weights)?;
        self.bias.add_assign(&other.bias)
    }

    pub fn scale(&self, s: f64) -> DenseGrads {
        DenseGrads {
            weights: self.weights.scale(s),
            bias: self.bias.scale(s),
        }
    }
}

/// A feed-forward stack of dense layers sharing one parameter store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<DenseLayer>,
}

#[derive(Clone, Debug)]
pub struct StackCache {
    caches: Vec<DenseCache>,
}

pub type StackGrads = Vec<DenseGrads>;

impl LayerStack {
    /// Builds `dims[0] -> dims[1] -> ... -> dims.last()` with the given
    /// activation on every layer.
    pub fn init(dims: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "layer stack needs at least input and output dims".into(),
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], activation, rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, StackCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&x)?;
            caches.push(cache);
            x = out;
        }
        Ok((x, StackCache { caches }))
    }

    /// Backpropagates through the stack; returns per-layer gradients (in
    /// layer order) and d(loss)/d(input).
    pub fn backward(&self, cache: &StackCache, grad_out: &Tensor) -> Result<(StackGrads, Tensor)> {
        if cache.caches.len() != self.layers.len() {
            return Err(Error::State(
                "backward called with a cache from a different stack".into(),
            ));
        }
        let mut grads = vec![None; self.layers.len()];
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (lg, gin) = layer.backward(&cache.caches[i], &g)?;
            grads[i] = Some(lg);
            g = gin;
        }
        Ok((grads.into_iter().map(|g| g.expect("filled")).collect(), g))
    }

    pub fn zero_grads(&self) -> StackGrads {
        self.layers.iter().map(DenseLayer::zero_grads).collect()
    }
}

pub fn accumulate_stack_grads(into: &mut StackGrads, from: &StackGrads) -> Result<()> {
    if into.len() != from.len() {
        return Err(Error::Dimension("stack gradient arity mismatch".into()));
    }
    for (a, b) in into.iter_mut().zip(from) {
        a.add_assign(b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(dim: usize) -> DenseLayer {
        let mut w = Tensor::zeros(vec![dim, dim]);
        for i in 0..dim {
            w.data_mut()[i * dim + i] = 1.0;
        }
        DenseLayer {
            weights: w,
            bias: Tensor::zeros(vec![dim]),
            activation: Activation::Identity,
        }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = identity_layer(3);
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.5]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_layer_clamps_negatives() {
        let mut layer = identity_layer(2);
        layer.activation = Activation::ReLU;
        let x = Tensor::new(vec![1, 2], vec![-1.0, 2.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let layer = identity_layer(3);
        let x = Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap();
        assert!(matches!(layer.forward(&x), Err(Error::Dimension(_))));
    }

    /// Independent oracle: plain nested-loop affine chain, written without
    /// reusing any Tensor ops.
    fn oracle_two_layer(
        x: &[Vec<f64>],
        w1: &[Vec<f64>],
        b1: &[f64],
        w2: &[Vec<f64>],
        b2: &[f64],
    ) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for row in x {
            let mut h = vec![0.0; b1.len()];
            for (j, hj) in h.iter_mut().enumerate() {
                let mut s = b1[j];
                for (i, xi) in row.iter().enumerate() {
                    s += xi * w1[i][j];
                }
                *hj = s.max(0.0);
            }
            let mut o = vec![0.0; b2.len()];
            for (j, oj) in o.iter_mut().enumerate() {
                let mut s = b2[j];
                for (i, hi) in h.iter().enumerate() {
                    s += hi * w2[i][j];
                }
                *oj = s;
            }
            out.push(o);
        }
        out
    }

    #[test]
    fn two_layer_stack_matches_independent_oracle() {
        let w1 = vec![vec![0.2, -0.5, 0.1], vec![0.7, 0.3, -0.2]];
        let b1 = vec![0.05, -0.1, 0.0];
        let w2 = vec![vec![1.0, -1.0], vec![0.5, 0.25], vec![-0.75, 0.4]];
        let b2 = vec![0.2, -0.3];
        let stack = LayerStack {
            layers: vec![
                DenseLayer {
                    weights: Tensor::new(vec![2, 3], w1.iter().flatten().copied().collect())
                        .unwrap(),
                    bias: Tensor::new(vec![3], b1.clone()).unwrap(),
                    activation: Activation::ReLU,
                },
                DenseLayer {
                    weights: Tensor::new(vec![3, 2], w2.iter().flatten().copied().collect())
                        .unwrap(),
                    bias: Tensor::new(vec![2], b2.clone()).unwrap(),
                    activation: Activation::Identity,
                },
            ],
        };
        let x = vec![vec![0.3, -1.2], vec![-0.8, 0.9], vec![2.0, 0.1]];
        let xt = Tensor::new(vec![3, 2], x.iter().flatten().copied().collect()).unwrap();
        let (y, _) = stack.forward(&xt).unwrap();
        let expect = oracle_two_layer(&x, &w1, &b1, &w2, &b2);
        for r in 0..3 {
            for c in 0..2 {
                assert!((y.row(r)[c] - expect[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stack = LayerStack::init(&[4, 3, 2], Activation::ReLU, &mut rng).unwrap();
        let x = Tensor::new(vec![2, 4], (0..8).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (y, cache) = stack.forward(&x).unwrap();
        let (grads, gin) = stack
            .backward(&cache, &Tensor::zeros(y.shape().to_vec()))
            .unwrap();
        for g in &grads {
            assert!(g.weights.data().iter().all(|&v| v == 0.0));
            assert!(g.bias.data().iter().all(|&v| v == 0.0));
        }
        assert!(gin.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_gradient_is_input_transpose_times_delta() {
        // Squared-error proxy: loss = ½‖y − t‖², dloss/dy = y − t, so
        // dloss/dW = xᵀ(y − t) in closed form.
        let layer = DenseLayer {
            weights: Tensor::new(vec![2, 2], vec![0.5, -0.25, 1.5, 0.75]).unwrap(),
            bias: Tensor::new(vec![2], vec![0.1, -0.2]).unwrap(),
            activation: Activation::Identity,
        };
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -0.5, 0.25]).unwrap();
        let t = Tensor::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (y, cache) = layer.forward(&x).unwrap();
        let mut delta = y.clone();
        for (d, tv) in delta.data_mut().iter_mut().zip(t.data()) {
            *d -= tv;
        }
        let (grads, _) = layer.backward(&cache, &delta).unwrap();
        let expect = x.t_matmul(&delta).unwrap();
        assert_eq!(grads.weights, expect);
        assert_eq!(grads.bias, delta.col_sum());
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = LayerStack::init(&[2, 2], Activation::ReLU, &mut rng).unwrap();
        let b = LayerStack::init(&[2, 3, 2], Activation::ReLU, &mut rng).unwrap();
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let (_, cache_a) = a.forward(&x).unwrap();
        let g = Tensor::zeros(vec![1, 2]);
        assert!(matches!(b.backward(&cache_a, &g), Err(Error::State(_))));
    }

    /// Central finite differences on a scalar loss of the stack output.
    #[test]
    fn stack_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut stack = LayerStack::init(&[3, 4, 2], Activation::ReLU, &mut rng).unwrap();
        let x = Tensor::new(
            vec![4, 3],
            (0..12).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.21).collect(),
        )
        .unwrap();
        // loss = Σ y²/2 so dloss/dy = y
        let loss = |s: &LayerStack| {
            let (y, _) = s.forward(&x).unwrap();
            y.data().iter().map(|v| v * v * 0.5).sum::<f64>()
        };
        let (y, cache) = stack.forward(&x).unwrap();
        let (grads, _) = stack.backward(&cache, &y).unwrap();

        let h = 1e-5;
        for li in 0..stack.layers.len() {
            for pi in [0usize, 1, 2] {
                let n = stack.layers[li].weights.len();
                let idx = (pi * 5) % n;
                let orig = stack.layers[li].weights.data()[idx];
                stack.layers[li].weights.data_mut()[idx] = orig + h;
                let up = loss(&stack);
                stack.layers[li].weights.data_mut()[idx] = orig - h;
                let down = loss(&stack);
                stack.layers[li].weights.data_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads[li].weights.data()[idx];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    ((an - fd) / denom).abs() < 1e-4,
                    "layer {li} idx {idx}: analytic {an} vs fd {fd}"
                );
            }
        }
    }
}
