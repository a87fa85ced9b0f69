//! Input derivatives of the network (forward Taylor jets) and parameter
//! gradients of losses built from them (reverse-mode tape).

mod batch;
mod jet;
mod tape;

use std::ops::{Add, Mul, Neg, Sub};

pub use batch::{forward_batch, BatchForward, ColumnLayout, PointBatch, Stream};
pub use jet::{Jet, MAX_ORDER};
pub use tape::{RecordedNetwork, Tape, Var};

use crate::error::{Error, Result};
use crate::network::NetworkParams;

/// Arithmetic shared by plain floats and tape variables, so residuals can be
/// written once.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn primal(&self) -> f64;
}

impl Scalar for f64 {
    fn primal(&self) -> f64 {
        *self
    }
}

impl Scalar for Var<'_> {
    fn primal(&self) -> f64 {
        self.value()
    }
}

/// One output channel and its input derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelDerivatives<S = f64> {
    pub value: S,
    pub dt: S,
    pub dx: S,
    pub dxx: Option<S>,
    pub dxxx: Option<S>,
}

impl<S: Scalar> ChannelDerivatives<S> {
    /// `dxx`, or an error when only first order was propagated.
    pub fn dxx(&self) -> Result<S> {
        self.dxx.ok_or(Error::MissingDerivative {
            needed: 2,
            available: 1,
        })
    }

    pub fn dxxx(&self) -> Result<S> {
        self.dxxx.ok_or(Error::MissingDerivative {
            needed: 3,
            available: if self.dxx.is_some() { 2 } else { 1 },
        })
    }

    /// Every entry multiplied by `factor` (derivatives commute with scaling).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            dt: self.dt * factor,
            dx: self.dx * factor,
            dxx: self.dxx.map(|v| v * factor),
            dxxx: self.dxxx.map(|v| v * factor),
        }
    }
}

impl ChannelDerivatives<f64> {
    /// Derivatives of a field known in closed form (mostly for tests).
    pub fn new(value: f64, dt: f64, dx: f64, dxx: f64, dxxx: f64) -> Self {
        Self {
            value,
            dt,
            dx,
            dxx: Some(dxx),
            dxxx: Some(dxxx),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    fn is_finite(&self) -> bool {
        [self.value, self.dt, self.dx]
            .into_iter()
            .chain(self.dxx)
            .chain(self.dxxx)
            .all(f64::is_finite)
    }
}

/// Per-channel values and input derivatives at one space-time point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle<S = f64> {
    pub channels: Vec<ChannelDerivatives<S>>,
    pub order_x: usize,
}

impl<S> DerivativeBundle<S> {
    pub fn channel(&self, c: usize) -> &ChannelDerivatives<S> {
        &self.channels[c]
    }
}

/// Gradients with respect to the network parameters (flat layout) and the
/// learnable physical parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub d_theta: Vec<f64>,
    pub d_xi: Vec<f64>,
}

/// Values and input derivatives of all output channels at `(x, t)`.
///
/// `order_x` selects how many `x` derivatives are propagated (1 to 3);
/// `order_t` must be 1.
pub fn eval_with_input_jets(
    params: &NetworkParams,
    x: f64,
    t: f64,
    order_x: usize,
    order_t: usize,
) -> Result<DerivativeBundle> {
    if !(1..=MAX_ORDER).contains(&order_x) {
        return Err(Error::InvalidOrder(format!("order_x must be in 1..=3, got {order_x}")));
    }
    if order_t != 1 {
        return Err(Error::InvalidOrder(format!("order_t must be 1, got {order_t}")));
    }
    let batch = PointBatch {
        with_derivatives: vec![(x, t)],
        values_only: Vec::new(),
        order_x,
    };
    let bundle = forward_batch(params, &batch)?.derivatives(0);
    if !bundle.channels.iter().all(ChannelDerivatives::is_finite) {
        return Err(Error::NonFinite("input derivatives".into()));
    }
    Ok(bundle)
}

/// Network outputs at many points, evaluated in chunks.
pub fn evaluate_values(params: &NetworkParams, points: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    const CHUNK: usize = 4096;
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(CHUNK) {
        let batch = PointBatch {
            with_derivatives: Vec::new(),
            values_only: chunk.to_vec(),
            order_x: 0,
        };
        let fwd = forward_batch(params, &batch)?;
        out.extend((0..chunk.len()).map(|p| fwd.values(p)));
    }
    Ok(out)
}

/// Gradient of a recorded scalar.
pub fn grad_scalar(tape: &Tape, loss: Var<'_>) -> Result<GradientSet> {
    tape.gradient(loss)
}
