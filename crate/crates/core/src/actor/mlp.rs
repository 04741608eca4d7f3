//! Fully connected network with ReLU hidden layers and a sigmoid output,
//! trained on binary cross-entropy with Adam.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::config::InitScheme;
use crate::error::{OffloadError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] × sizes[l]`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs; `inputs[0]` is the feature vector.
    pub inputs: Vec<Vec<f64>>,
    /// Output-layer pre-activations.
    pub logits: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against target `y`, computed from
/// the logit for stability.
pub fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

impl MlpParameters {
    pub fn zeros(sizes: &[usize]) -> Self {
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn init<R: Rng + ?Sized>(sizes: &[usize], scheme: InitScheme, rng: &mut R) -> Self {
        let mut p = Self::zeros(sizes);
        for (l, w) in p.weights.iter_mut().enumerate() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            match scheme {
                InitScheme::XavierUniform => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                    w.iter_mut().for_each(|v| *v = dist.sample(rng));
                }
                InitScheme::StandardNormal => {
                    w.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                }
            }
        }
        p
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("at least one layer")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features)?.logits.into_iter().map(sigmoid).collect())
    }

    pub fn forward_cached(&self, features: &[f64]) -> Result<ForwardCache> {
        if features.len() != self.input_len() {
            return Err(OffloadError::ShapeMismatch {
                expected: self.input_len(),
                got: features.len(),
            });
        }
        let mut inputs = vec![features.to_vec()];
        let last = self.num_layers() - 1;
        let mut logits = Vec::new();
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let x = &inputs[l];
            let w = &self.weights[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.biases[l][o]
                })
                .collect();
            if l == last {
                logits = z;
            } else {
                inputs.push(z.into_iter().map(|v| v.max(0.0)).collect());
            }
        }
        Ok(ForwardCache { inputs, logits })
    }

    /// Accumulate into `grads` the parameter gradient for upstream
    /// derivative `d_logits` with respect to the output pre-activations.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], grads: &mut MlpParameters) {
        let mut delta = d_logits.to_vec();
        for l in (0..self.num_layers()).rev() {
            let n_in = self.sizes[l];
            let x = &cache.inputs[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                row.iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
                grads.biases[l][o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            // back through the ReLU feeding this layer
            delta = (0..n_in)
                .map(|k| {
                    if x[k] <= 0.0 {
                        return 0.0;
                    }
                    delta.iter().enumerate().map(|(o, d)| d * w[o * n_in + k]).sum()
                })
                .collect();
        }
    }

    /// Batch loss (cross-entropy summed over outputs, averaged over the
    /// batch) and its gradient.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, MlpParameters)> {
        let mut grads = MlpParameters::zeros(&self.sizes);
        let scale = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            if y.len() != self.output_len() {
                return Err(OffloadError::ShapeMismatch {
                    expected: self.output_len(),
                    got: y.len(),
                });
            }
            let cache = self.forward_cached(x)?;
            let d: Vec<f64> = cache
                .logits
                .iter()
                .zip(y.iter())
                .map(|(z, t)| {
                    loss += bce_from_logit(*z, *t) * scale;
                    (sigmoid(*z) - t) * scale
                })
                .collect();
            self.backward(&cache, &d, &mut grads);
        }
        Ok((loss, grads))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases).flatten()
    }

    /// Text checkpoint: a magic line, the layer sizes, then per layer one
    /// line per weight row followed by one bias line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("mlp-checkpoint 1\n");
        let sizes: Vec<String> = self.sizes.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        for l in 0..self.num_layers() {
            let n_in = self.sizes[l];
            for row in self.weights[l].chunks(n_in) {
                let _ = writeln!(s, "{}", join(row));
            }
            let _ = writeln!(s, "{}", join(&self.biases[l]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| OffloadError::InvalidConfig(format!("checkpoint: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("mlp-checkpoint 1") {
            return Err(bad("missing header"));
        }
        let sizes: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing layer sizes"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad layer size")))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad("need at least two non-empty layers"));
        }
        let mut p = MlpParameters::zeros(&sizes);
        let mut parse_row = |want: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad number")))
                .collect::<Result<_>>()?;
            if row.len() != want {
                return Err(bad("row length mismatch"));
            }
            Ok(row)
        };
        for l in 0..sizes.len() - 1 {
            let mut w = Vec::with_capacity(sizes[l] * sizes[l + 1]);
            for _ in 0..sizes[l + 1] {
                w.extend(parse_row(sizes[l])?);
            }
            p.weights[l] = w;
            p.biases[l] = parse_row(sizes[l + 1])?;
        }
        Ok(p)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: MlpParameters,
    v: MlpParameters,
}

impl Adam {
    pub fn new(sizes: &[usize], learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: MlpParameters::zeros(sizes),
            v: MlpParameters::zeros(sizes),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn apply(&mut self, params: &mut MlpParameters, grads: &MlpParameters) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((p, g), m), v) in params
            .params_mut()
            .zip(grads.params())
            .zip(self.m.params_mut())
            .zip(self.v.params_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}
