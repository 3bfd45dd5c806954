//! Feed-forward networks with batched reverse-mode gradients and Adam.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::envs::SimRng;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
    Softmax,
}

impl OutputActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Tanh => "tanh",
            OutputActivation::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "tanh" => Ok(Self::Tanh),
            "softmax" => Ok(Self::Softmax),
            other => Err(Error::InvalidSpec(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden: HiddenActivation,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output: OutputActivation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec("need at least input and output layers".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidSpec("layer sizes must be >= 1".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden: HiddenActivation::Relu,
            output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }
}

/// Weights `out × in` and bias `out` of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AdamState {
    first: Vec<Layer>,
    second: Vec<Layer>,
    step: u64,
}

/// Network parameters plus Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
    adam: AdamState,
}

/// Activations recorded by a forward pass: the network input followed by the
/// output of every layer (post-activation).
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("non-empty tape")
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.activations[0]
    }
}

/// Gradients shaped like the network's layers, plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub layers: Vec<Layer>,
    pub input: Array2<f64>,
}

impl GradBundle {
    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weight *= k;
            l.bias *= k;
        }
        self.input *= k;
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|&g| g == 0.0))
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

fn check_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl Mlp {
    /// Weights uniform in `±1/√fan_in`, zero biases, zero Adam state.
    pub fn init(spec: MlpSpec, rng: &mut SimRng) -> Self {
        let layers: Vec<Layer> = spec
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..=bound));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self::from_layers(spec, layers).expect("shapes follow the spec")
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() != spec.layer_sizes.len() - 1 {
            return Err(Error::InvalidSpec("layer count does not match spec".into()));
        }
        for (l, w) in layers.iter().zip(spec.layer_sizes.windows(2)) {
            if l.weight.dim() != (w[1], w[0]) || l.bias.len() != w[1] {
                return Err(Error::InvalidSpec(format!(
                    "layer shape {:?} does not match {}→{}",
                    l.weight.dim(),
                    w[0],
                    w[1]
                )));
            }
        }
        let zeros: Vec<Layer> = spec
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            spec,
            layers,
            adam: AdamState {
                first: zeros.clone(),
                second: zeros,
                step: 0,
            },
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Batched forward pass; `input` is `batch × input_dim`.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Tape> {
        if input.ncols() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                got: input.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = activations.last().expect("input pushed");
            let mut z = prev.dot(&layer.weight.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                match self.spec.output {
                    OutputActivation::Identity => {}
                    OutputActivation::Tanh => z.mapv_inplace(f64::tanh),
                    OutputActivation::Softmax => softmax_rows(&mut z),
                }
            }
            activations.push(z);
        }
        let tape = Tape { activations };
        check_finite(tape.output(), "forward activations")?;
        Ok(tape)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let tape = self.forward_batch(x)?;
        let out = tape.output().row(0).to_vec();
        Ok((out, tape))
    }

    fn output_delta(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        let y = tape.output();
        if output_grad.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: y.ncols(),
                got: output_grad.ncols(),
            });
        }
        let delta = match self.spec.output {
            OutputActivation::Identity => output_grad.to_owned(),
            OutputActivation::Tanh => {
                let mut d = output_grad.to_owned();
                Zip::from(&mut d).and(y).for_each(|d, &y| *d *= 1.0 - y * y);
                d
            }
            OutputActivation::Softmax => {
                let mut d = output_grad.to_owned();
                for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                    let inner = drow.dot(&yrow);
                    Zip::from(&mut drow)
                        .and(&yrow)
                        .for_each(|d, &s| *d = s * (*d - inner));
                }
                d
            }
        };
        Ok(delta)
    }

    /// Gradients of `Σ_b output_grad[b] · output[b]` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<GradBundle> {
        let mut delta = self.output_delta(tape, output_grad)?;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let a_in = &tape.activations[i];
            let weight = delta.t().dot(a_in);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Layer { weight, bias });
            delta = self.propagate(i, layer, delta, a_in);
        }
        grads.reverse();
        let bundle = GradBundle {
            layers: grads,
            input: delta,
        };
        if !bundle.layers.iter().all(Layer::is_finite) {
            return Err(Error::NonFinite("parameter gradients".into()));
        }
        check_finite(&bundle.input, "input gradient")?;
        Ok(bundle)
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn input_gradient(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut delta = self.output_delta(tape, output_grad)?;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            delta = self.propagate(i, layer, delta, &tape.activations[i]);
        }
        check_finite(&delta, "input gradient")?;
        Ok(delta)
    }

    fn propagate(&self, i: usize, layer: &Layer, delta: Array2<f64>, a_in: &Array2<f64>) -> Array2<f64> {
        let mut prev = delta.dot(&layer.weight);
        if i > 0 {
            // a_in is a ReLU output: the derivative is its positivity mask.
            Zip::from(&mut prev)
                .and(a_in)
                .for_each(|d, &a| if a <= 0.0 { *d = 0.0 });
        }
        prev
    }

    /// One Adam descent step: `param -= lr · m̂ / (√v̂ + ε)`.
    pub fn adam_step(&mut self, grads: &GradBundle, lr: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidSpec("gradient layer count mismatch".into()));
        }
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        };
        for (((layer, m), v), g) in self
            .layers
            .iter_mut()
            .zip(&mut self.adam.first)
            .zip(&mut self.adam.second)
            .zip(&grads.layers)
        {
            if g.weight.dim() != layer.weight.dim() || g.bias.len() != layer.bias.len() {
                return Err(Error::InvalidSpec("gradient shape mismatch".into()));
            }
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
        Ok(())
    }

    /// `self ← τ·online + (1-τ)·self` on weights and biases.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.weight)
                .and(&o.weight)
                .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
            Zip::from(&mut t.bias)
                .and(&o.bias)
                .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
    }

    /// Largest absolute parameter difference to `other`.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weight
                    .iter()
                    .zip(b.weight.iter())
                    .chain(a.bias.iter().zip(b.bias.iter()))
                    .map(|(x, y)| (x - y).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Text checkpoint: a header with layer sizes and output activation, then
    /// one line per weight matrix (row-major) and per bias vector. Values use
    /// shortest round-trip formatting, so reading back is bit-exact.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        let sizes: Vec<String> = self.spec.layer_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(w, "mlp {} {}", self.spec.output.as_str(), sizes.join(" "))?;
        for l in &self.layers {
            write_values(w, l.weight.iter())?;
            write_values(w, l.bias.iter())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(lines: &mut std::io::Lines<R>) -> Result<Self> {
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Checkpoint("unexpected end of network block".into()))?
                .map_err(Error::from)
        };
        let header = next()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("mlp") {
            return Err(Error::Checkpoint(format!("expected `mlp` header, got `{header}`")));
        }
        let output = OutputActivation::parse(parts.next().unwrap_or(""))?;
        let sizes = parts
            .map(|p| p.parse::<usize>().map_err(|e| Error::Checkpoint(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let spec = MlpSpec::new(sizes, output)?;
        let mut layers = Vec::new();
        for w in spec.layer_sizes.windows(2) {
            let weight = parse_values(&next()?, w[0] * w[1])?;
            let bias = parse_values(&next()?, w[1])?;
            layers.push(Layer {
                weight: Array2::from_shape_vec((w[1], w[0]), weight)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
                bias: Array1::from(bias),
            });
        }
        Self::from_layers(spec, layers)
    }
}

fn write_values<'a, W: Write>(w: &mut W, vals: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut first = true;
    for v in vals {
        if !first {
            w.write_all(b" ")?;
        }
        write!(w, "{v:e}")?;
        first = false;
    }
    writeln!(w)?;
    Ok(())
}

fn parse_values(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Checkpoint(format!("`{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}
