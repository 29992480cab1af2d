use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalize::Normalization;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    HyperbolicTangent,
    Linear,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::HyperbolicTangent => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn slope_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::HyperbolicTangent => T::one() - a * a,
            Activation::Linear => T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetTopologySpec {
    /// Input, hidden…, output.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetTopologySpec {
    /// Tanh hidden layers and a single linear output.
    pub fn new(input: usize, hidden: &[usize]) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        Self {
            layer_sizes,
            hidden_activation: Activation::HyperbolicTangent,
            output_activation: Activation::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::Config(format!(
                "network needs at least 3 layers, got {}",
                self.layer_sizes.len()
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.output_size() != 1 {
            return Err(Error::Config(format!(
                "output layer must have one neuron, got {}",
                self.output_size()
            )));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self
            .layer_sizes
            .last()
            .expect("validated topology is nonempty")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    /// `out × in`
    pub weights: Matrix<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

/// Feedforward net: each neuron computes `K(Σ ω_i g_i)` over the previous
/// layer's outputs. Carries the affine input/output scaling it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet<T> {
    spec: NetTopologySpec,
    layers: Vec<Layer<T>>,
    normalization: Normalization<T>,
}

impl<T: Scalar> NeuralNet<T> {
    /// All parameters zero, identity normalization.
    pub fn zeros(spec: NetTopologySpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.layer_sizes.len();
        let layers = spec
            .layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weights: Matrix::zeros(w[1], w[0]),
                biases: vec![T::zero(); w[1]],
                activation: if i + 2 == n {
                    spec.output_activation
                } else {
                    spec.hidden_activation
                },
            })
            .collect();
        let normalization = Normalization::identity(spec.input_size());
        Ok(Self {
            spec,
            layers,
            normalization,
        })
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn random(spec: NetTopologySpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.weights.cols() as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = T::of(rng.random_range(-bound..=bound));
            }
            for b in &mut layer.biases {
                *b = T::of(rng.random_range(-bound..=bound));
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetTopologySpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn normalization(&self) -> &Normalization<T> {
        &self.normalization
    }

    pub fn set_normalization(&mut self, normalization: Normalization<T>) -> Result<()> {
        if normalization.input_len() != self.spec.input_size() {
            return Err(Error::dim(
                "normalization width",
                self.spec.input_size(),
                normalization.input_len(),
            ));
        }
        self.normalization = normalization;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Flattened parameters: per layer, row-major weights then biases.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim(
                "parameter vector",
                self.param_count(),
                params.len(),
            ));
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.as_slice().len());
            layer.weights.as_mut_slice().copy_from_slice(w);
            let (b, tail) = tail.split_at(layer.biases.len());
            layer.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.as_slice().iter().all(|v| v.is_finite())
                && l.biases.iter().all(|v| v.is_finite())
        })
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.spec.input_size() {
            return Err(Error::dim("net input", self.spec.input_size(), input.len()));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("net input"));
        }
        Ok(())
    }

    /// Evaluates the layer composition on an already-normalized input.
    pub fn forward(&self, input: &[T]) -> Result<T> {
        self.check_input(input)?;
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[T]) -> T {
        let mut a = input.to_vec();
        for layer in &self.layers {
            a = layer_output(layer, &a);
        }
        a[0]
    }

    /// Normalizes a raw input, runs the net and maps the output back to
    /// physical units.
    pub fn predict_raw(&self, raw: &[T]) -> Result<T> {
        self.check_input(raw)?;
        let x = self.normalization.normalize_input(raw);
        Ok(self
            .normalization
            .denormalize_output(self.forward_unchecked(&x)))
    }

    /// Output and its gradient with respect to every parameter (same layout
    /// as [`NeuralNet::params`]), by reverse-mode propagation.
    pub fn output_with_gradient(&self, input: &[T], grad: &mut [T]) -> Result<T> {
        self.check_input(input)?;
        if grad.len() != self.param_count() {
            return Err(Error::dim(
                "gradient buffer",
                self.param_count(),
                grad.len(),
            ));
        }
        Ok(self.gradient_unchecked(input, grad))
    }

    pub(crate) fn gradient_unchecked(&self, input: &[T], grad: &mut [T]) -> T {
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let next = layer_output(layer, acts.last().expect("nonempty"));
            acts.push(next);
        }
        let output = acts.last().expect("nonempty")[0];

        // Offsets of each layer's block inside the flat parameter vector.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.weights.as_slice().len() + layer.biases.len();
        }

        let mut delta: Vec<T> = {
            let last = self.layers.last().expect("nonempty");
            acts.last()
                .expect("nonempty")
                .iter()
                .map(|&a| last.activation.slope_from_output(a))
                .collect()
        };
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let prev = &acts[l];
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            let block = &mut grad[offsets[l]..offsets[l] + rows * cols + rows];
            let (gw, gb) = block.split_at_mut(rows * cols);
            for r in 0..rows {
                let d = delta[r];
                let row = &mut gw[r * cols..(r + 1) * cols];
                for (g, &p) in row.iter_mut().zip(prev) {
                    *g = d * p;
                }
                gb[r] = d;
            }
            if l > 0 {
                let act = self.layers[l - 1].activation;
                let mut back = layer.weights.tr_mul_vec(&delta);
                for (b, &a) in back.iter_mut().zip(prev) {
                    *b *= act.slope_from_output(a);
                }
                delta = back;
            }
        }
        output
    }
}

fn layer_output<T: Scalar>(layer: &Layer<T>, input: &[T]) -> Vec<T> {
    (0..layer.weights.rows())
        .map(|r| {
            let z = dot(layer.weights.row(r), input) + layer.biases[r];
            layer.activation.apply(z)
        })
        .collect()
}
