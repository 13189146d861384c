//! Fully connected network with SiLU hidden activations and a linear output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn forward(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for r in 0..self.outputs {
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            let mut acc = self.bias[r];
            for (w, v) in row.iter().zip(x) {
                acc += *w * *v;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MlpParams<T> {
    pub layers: Vec<Layer<T>>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn silu<T: Scalar>(x: T) -> T {
    x * sigmoid(x)
}

fn silu_grad<T: Scalar>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() + x * (T::one() - s))
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    /// Input to each layer.
    inputs: Vec<Vec<T>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> MlpParams<T> {
    /// `sizes = [input, hidden.., output]`, all zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(sizes);
        for l in &mut p.layers {
            let a = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut l.weights {
                *w = T::lit(rng.random_range(-a..=a));
            }
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    /// Layer sizes `[input, hidden.., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes())
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.iter().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.num_params());
        for (p, v) in self.iter_mut().zip(values) {
            *p = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x, &mut ForwardCache::default())
    }

    pub fn forward_cached(&self, x: &[T], cache: &mut ForwardCache<T>) -> Vec<T> {
        assert_eq!(x.len(), self.input_dim(), "input width");
        let last = self.layers.len() - 1;
        cache.inputs.clear();
        cache.pre.clear();
        let mut h = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.outputs);
            l.forward(&h, &mut z);
            cache.inputs.push(std::mem::take(&mut h));
            if i == last {
                return z;
            }
            h = z.iter().map(|&v| silu(v)).collect();
            cache.pre.push(z);
        }
        unreachable!("loop returns at the output layer")
    }

    /// Accumulate `d(out . upstream)/d(params)` into `grad` for the cached pass.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &[T], grad: &mut MlpParams<T>) {
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let g = &mut grad.layers[i];
            let input = &cache.inputs[i];
            for r in 0..l.outputs {
                let d = delta[r];
                g.bias[r] += d;
                let row = &mut g.weights[r * l.inputs..(r + 1) * l.inputs];
                for (gw, &v) in row.iter_mut().zip(input) {
                    *gw += d * v;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![T::zero(); l.inputs];
            for r in 0..l.outputs {
                let d = delta[r];
                let row = &l.weights[r * l.inputs..(r + 1) * l.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, &z) in prev.iter_mut().zip(&cache.pre[i - 1]) {
                *p *= silu_grad(z);
            }
            delta = prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let p = MlpParams::<f64>::init(&[5, 7, 3], 1);
        assert_eq!(p.sizes(), vec![5, 7, 3]);
        assert_eq!(p.num_params(), 5 * 7 + 7 + 7 * 3 + 3);
        assert_eq!(p.forward(&[0.0; 5]).len(), 3);
    }

    #[test]
    fn flat_roundtrip() {
        let p = MlpParams::<f64>::init(&[3, 4, 2], 9);
        let mut q = p.zeros_like();
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
    }

    #[test]
    fn silu_derivative_matches_difference() {
        for &x in &[-3.0f64, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((fd - silu_grad(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn bias_only_network_outputs_bias() {
        let mut p = MlpParams::<f64>::zeros(&[2, 3, 2]);
        p.layers[1].bias = vec![0.25, -4.0];
        assert_eq!(p.forward(&[1.0, 2.0]), vec![0.25, -4.0]);
    }
}
