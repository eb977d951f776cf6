//! Per-view evidence network: input -> hidden (ReLU) -> non-negative
//! evidence through softplus (or ReLU behind config).

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Output activation producing non-negative evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Softplus,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            // ln(1 + e^z), written to avoid overflow on either tail.
            Activation::Softplus => {
                if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                }
            }
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let ez = z.exp();
                    ez / (1.0 + ez)
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One view's MLP. Weight matrices are row-major: w1 is hidden x input,
/// w2 is classes x hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNet {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
    pub activation: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z1: Vec<f64>,
    pub h: Vec<f64>,
    pub z2: Vec<f64>,
    pub e: Vec<f64>,
}

/// Gradient buffers with the same shapes as the weights.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl NetGrads {
    pub fn zeros(net: &ViewNet) -> NetGrads {
        NetGrads {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *g *= f;
        }
    }

    pub fn add(&mut self, other: &NetGrads) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += b;
        }
        for (a, b) in self.b2.iter_mut().zip(&other.b2) {
            *a += b;
        }
    }
}

impl ViewNet {
    /// Fan-in scaled uniform init, zero biases. The rng consumption order is
    /// fixed (w1 row-major, then w2), which keeps runs reproducible.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        activation: Activation,
        rng: &mut R,
    ) -> ViewNet {
        let mut sample = |n: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n)
                .map(|_| rng.random_range(-bound..bound))
                .collect::<Vec<f64>>()
        };
        let w1 = sample(hidden_dim * input_dim, input_dim);
        let w2 = sample(classes * hidden_dim, hidden_dim);
        ViewNet {
            input_dim,
            hidden_dim,
            classes,
            activation,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; classes],
        }
    }

    pub fn forward(&self, x: &[f64]) -> ForwardCache {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut z1 = self.b1.clone();
        for (z, row) in z1.iter_mut().zip(self.w1.chunks_exact(self.input_dim)) {
            let mut acc = 0.0;
            for (w, &xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *z += acc;
        }
        let h: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let mut z2 = self.b2.clone();
        for (z, row) in z2.iter_mut().zip(self.w2.chunks_exact(self.hidden_dim)) {
            let mut acc = 0.0;
            for (w, &hj) in row.iter().zip(&h) {
                acc += w * hj;
            }
            *z += acc;
        }
        let e: Vec<f64> = z2.iter().map(|&z| self.activation.apply(z)).collect();
        ForwardCache { z1, h, z2, e }
    }

    /// Accumulates gradients for d(loss)/d(evidence) into `grads`.
    pub fn backward(&self, x: &[f64], cache: &ForwardCache, de: &[f64], grads: &mut NetGrads) {
        debug_assert_eq!(de.len(), self.classes);
        let dz2: Vec<f64> = de
            .iter()
            .zip(&cache.z2)
            .map(|(&g, &z)| g * self.activation.derivative(z))
            .collect();
        let w2_rows = grads.w2.chunks_exact_mut(self.hidden_dim);
        for ((&g, row), b) in dz2.iter().zip(w2_rows).zip(grads.b2.iter_mut()) {
            if g != 0.0 {
                for (w, &hj) in row.iter_mut().zip(&cache.h) {
                    *w += g * hj;
                }
            }
            *b += g;
        }
        let mut dz1 = vec![0.0; self.hidden_dim];
        for (&g, row) in dz2.iter().zip(self.w2.chunks_exact(self.hidden_dim)) {
            if g == 0.0 {
                continue;
            }
            for (d, &w) in dz1.iter_mut().zip(row) {
                *d += g * w;
            }
        }
        for (d, &z) in dz1.iter_mut().zip(&cache.z1) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let w1_rows = grads.w1.chunks_exact_mut(self.input_dim);
        for ((&g, row), b) in dz1.iter().zip(w1_rows).zip(grads.b1.iter_mut()) {
            if g != 0.0 {
                for (w, &xi) in row.iter_mut().zip(x) {
                    *w += g * xi;
                }
            }
            *b += g;
        }
    }
}

/// Default hidden width: max(64, 2 * classes).
pub fn default_hidden_dim(classes: usize) -> usize {
    64.max(2 * classes)
}
