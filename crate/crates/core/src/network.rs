//! Fully connected tanh network `(x, t) ↦ channels` and the physical
//! parameters trained alongside it.
//!
//! Parameters are stored flat. For each layer, in order from input to output,
//! the weight matrix is laid out row-major (`n_out × n_in`) followed by the
//! bias vector. This is the order used by gradients, the optimizer and the
//! checkpoint format.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{self, DerivativeBundle};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("tanh")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    /// Three hidden layers of 64 units.
    pub fn new(output_dim: usize, seed: u64) -> Self {
        Self {
            input_dim: 2,
            hidden_layers: 3,
            hidden_width: 64,
            output_dim,
            activation: Activation::Tanh,
            seed,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers + 2);
        sizes.push(self.input_dim);
        sizes.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        sizes.push(self.output_dim);
        sizes
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim != 2 {
            return Err(Error::Config(format!(
                "input_dim must be 2 (x, t), got {}",
                self.input_dim
            )));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 || self.output_dim == 0 {
            return Err(Error::Config(
                "network needs at least one hidden layer and non-empty widths".into(),
            ));
        }
        Ok(())
    }
}

/// Weights and biases of every layer, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl NetworkParams {
    /// All-zero parameters for the given layer sizes.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += w[1] * w[0] + w[1];
        }
        offsets.push(total);
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            data: vec![0.0; total],
        })
    }

    pub fn from_flat(sizes: &[usize], flat: Vec<f64>) -> Result<Self> {
        let mut params = Self::zeros(sizes)?;
        if flat.len() != params.data.len() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected: params.data.len(),
                found: flat.len(),
            });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        params.data = flat;
        Ok(params)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(n_in, n_out)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.sizes[l], self.sizes[l + 1])
    }

    /// Offset of layer `l` in the flat vector; weights first, then bias.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (n_in, n_out) = self.layer_shape(l);
        let start = self.offsets[l];
        &self.data[start..start + n_in * n_out]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (n_in, n_out) = self.layer_shape(l);
        let start = self.offsets[l];
        &mut self.data[start..start + n_in * n_out]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (n_in, n_out) = self.layer_shape(l);
        let start = self.offsets[l] + n_in * n_out;
        &self.data[start..start + n_out]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (n_in, n_out) = self.layer_shape(l);
        let start = self.offsets[l] + n_in * n_out;
        &mut self.data[start..start + n_out]
    }
}

/// Glorot-uniform weights, zero biases; deterministic in `config.seed`.
pub fn init_params(config: &NetworkConfig) -> Result<NetworkParams> {
    config.validate()?;
    let mut params = NetworkParams::zeros(&config.layer_sizes())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for l in 0..params.num_layers() {
        let (n_in, n_out) = params.layer_shape(l);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for w in params.weights_mut(l) {
            *w = rng.gen_range(-limit..=limit);
        }
    }
    Ok(params)
}

/// Network output at a single point.
pub fn forward(params: &NetworkParams, x: f64, t: f64) -> Result<Vec<f64>> {
    if !(x.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite(format!("network input ({x}, {t})")));
    }
    let out = autodiff::evaluate_values(params, &[(x, t)])?;
    Ok(out.into_iter().next().unwrap())
}

/// Values and input derivatives at a single point.
pub fn eval_with_input_jets(
    params: &NetworkParams,
    x: f64,
    t: f64,
    order_x: usize,
    order_t: usize,
) -> Result<DerivativeBundle> {
    autodiff::eval_with_input_jets(params, x, t, order_x, order_t)
}

/// Scalar physical coefficients of a test case.
///
/// Only `nu` is learnable; the rest are fixed by the problem definition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub alpha_t: f64,
}

impl ModelParams {
    pub const LEARNABLE: [&'static str; 1] = ["nu"];

    pub fn learnable(&self) -> Vec<f64> {
        vec![self.nu]
    }

    pub fn set_learnable(&mut self, xi: &[f64]) -> Result<()> {
        if xi.len() != Self::LEARNABLE.len() {
            return Err(Error::DimensionMismatch {
                what: "learnable parameters",
                expected: Self::LEARNABLE.len(),
                found: xi.len(),
            });
        }
        self.nu = xi[0];
        Ok(())
    }
}

/// Header of a saved network state.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub problem: String,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
    pub epoch: usize,
    pub nu: f64,
}

const CHECKPOINT_MAGIC: &str = "ocp-pinn-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a text checkpoint.
///
/// ```text
/// ocp-pinn-checkpoint 1
/// problem test1a
/// layers 2 64 64 64 3
/// activation tanh
/// seed 7
/// epoch 1000
/// nu 0.51
/// params 8707
/// <one parameter per line, flat order>
/// ```
///
/// Floats use the shortest representation that round-trips exactly.
pub fn write_checkpoint<W: Write>(
    mut out: W,
    header: &CheckpointHeader,
    params: &NetworkParams,
) -> Result<()> {
    if header.layer_sizes != params.layer_sizes() {
        return Err(Error::Config("checkpoint header does not match parameters".into()));
    }
    writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(out, "problem {}", header.problem)?;
    let layers: Vec<String> = header.layer_sizes.iter().map(|n| n.to_string()).collect();
    writeln!(out, "layers {}", layers.join(" "))?;
    writeln!(out, "activation {}", header.activation)?;
    writeln!(out, "seed {}", header.seed)?;
    writeln!(out, "epoch {}", header.epoch)?;
    writeln!(out, "nu {:?}", header.nu)?;
    writeln!(out, "params {}", params.len())?;
    for v in params.as_slice() {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<(CheckpointHeader, NetworkParams)> {
    let mut lines = input.lines();
    let mut next = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("checkpoint truncated before `{key}`")))??;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_string()),
            _ => Err(Error::Parse(format!("expected `{key}`, found `{line}`"))),
        }
    };
    let version: u32 = parse(&next(CHECKPOINT_MAGIC)?)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let problem = next("problem")?;
    let layer_sizes = next("layers")?
        .split_whitespace()
        .map(parse)
        .collect::<Result<Vec<usize>>>()?;
    let activation = match next("activation")?.as_str() {
        "tanh" => Activation::Tanh,
        other => return Err(Error::Parse(format!("unknown activation `{other}`"))),
    };
    let seed = parse(&next("seed")?)?;
    let epoch = parse(&next("epoch")?)?;
    let nu = parse(&next("nu")?)?;
    let count: usize = parse(&next("params")?)?;
    let mut flat = Vec::with_capacity(count);
    for line in lines.by_ref().take(count) {
        flat.push(parse(line?.trim())?);
    }
    let params = NetworkParams::from_flat(&layer_sizes, flat)?;
    Ok((
        CheckpointHeader {
            problem,
            layer_sizes,
            activation,
            seed,
            epoch,
            nu,
        },
        params,
    ))
}

fn parse<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
}
