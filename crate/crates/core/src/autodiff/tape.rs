//! Reverse-mode tape over scalar arithmetic, with network evaluations
//! recorded as opaque blocks.
//!
//! A recorded network block exposes every output Taylor coefficient as a
//! tape variable. After the scalar sweep, the adjoints of those variables
//! are handed to [`BatchForward::backward`], which finishes the chain rule
//! down to the network parameters. Sweeps are sequential, so gradients are
//! bit-reproducible.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};

use super::batch::{forward_batch, BatchForward, ColumnLayout, PointBatch, Stream};
use super::GradientSet;
use crate::error::{Error, Result};
use crate::network::NetworkParams;

#[derive(Default)]
struct Inner {
    values: Vec<f64>,
    /// Edges of node `i` are `edges[edge_start[i]..edge_start[i + 1]]`.
    edge_start: Vec<u32>,
    edges: Vec<(u32, f64)>,
    xi_nodes: Vec<u32>,
    theta_nodes: Vec<(u32, usize)>,
    theta_len: Option<usize>,
    blocks: Vec<Block>,
}

struct Block {
    start: usize,
    forward: BatchForward,
    params: NetworkParams,
}

impl Inner {
    fn push(&mut self, value: f64, edges: &[(u32, f64)]) -> u32 {
        let idx = self.values.len() as u32;
        self.values.push(value);
        self.edge_start.push(self.edges.len() as u32);
        self.edges.extend_from_slice(edges);
        idx
    }

    fn set_theta_len(&mut self, n: usize) -> Result<()> {
        match self.theta_len {
            Some(m) if m != n => Err(Error::DimensionMismatch {
                what: "network parameters on one tape",
                expected: m,
                found: n,
            }),
            _ => {
                self.theta_len = Some(n);
                Ok(())
            }
        }
    }
}

#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: f64, edges: &[(u32, f64)]) -> Var<'_> {
        let idx = self.inner.borrow_mut().push(value, edges);
        Var { tape: self, idx }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(value, &[])
    }

    /// A learnable physical parameter; its gradient lands in `d_xi`, in
    /// registration order.
    pub fn parameter(&self, value: f64) -> Var<'_> {
        let var = self.push(value, &[]);
        self.inner.borrow_mut().xi_nodes.push(var.idx);
        var
    }

    /// Records every network parameter as an individual leaf.
    ///
    /// Only useful for small checks; network evaluations should go through
    /// [`record_network`](Self::record_network).
    pub fn theta_leaves(&self, params: &NetworkParams) -> Result<Vec<Var<'_>>> {
        self.inner.borrow_mut().set_theta_len(params.len())?;
        Ok(params
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let var = self.push(v, &[]);
                self.inner.borrow_mut().theta_nodes.push((var.idx, i));
                var
            })
            .collect())
    }

    /// Evaluates the network on `batch` and records the pass.
    pub fn record_network(
        &self,
        params: &NetworkParams,
        batch: &PointBatch,
    ) -> Result<RecordedNetwork<'_>> {
        let forward = forward_batch(params, batch)?;
        let mut inner = self.inner.borrow_mut();
        inner.set_theta_len(params.len())?;
        let start = inner.values.len();
        for &v in forward.outputs() {
            inner.push(v, &[]);
        }
        let layout = forward.layout();
        inner.blocks.push(Block {
            start,
            forward,
            params: params.clone(),
        });
        Ok(RecordedNetwork {
            tape: self,
            layout,
            start,
        })
    }

    pub fn add(&self, a: Var<'_>, b: Var<'_>) -> Var<'_> {
        self.push(a.value() + b.value(), &[(a.idx, 1.0), (b.idx, 1.0)])
    }

    pub fn sub(&self, a: Var<'_>, b: Var<'_>) -> Var<'_> {
        self.push(a.value() - b.value(), &[(a.idx, 1.0), (b.idx, -1.0)])
    }

    pub fn mul(&self, a: Var<'_>, b: Var<'_>) -> Var<'_> {
        let (va, vb) = (a.value(), b.value());
        self.push(va * vb, &[(a.idx, vb), (b.idx, va)])
    }

    /// `c·a + d`.
    pub fn affine(&self, a: Var<'_>, c: f64, d: f64) -> Var<'_> {
        self.push(c * a.value() + d, &[(a.idx, c)])
    }

    /// Sum of all terms as a single node.
    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Var<'t> {
        let value = terms.iter().map(|v| v.value()).sum();
        let edges: Vec<_> = terms.iter().map(|v| (v.idx, 1.0)).collect();
        self.push(value, &edges)
    }

    /// `scale · Σ tᵢ²` as a single node.
    pub fn scaled_sum_of_squares<'t>(&'t self, terms: &[Var<'t>], scale: f64) -> Var<'t> {
        let value = scale * terms.iter().map(|v| v.value() * v.value()).sum::<f64>();
        let edges: Vec<_> = terms
            .iter()
            .map(|v| (v.idx, 2.0 * scale * v.value()))
            .collect();
        self.push(value, &edges)
    }

    /// Reverse sweep from `loss`.
    pub fn gradient(&self, loss: Var<'_>) -> Result<GradientSet> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::UnrecordedScalar);
        }
        let inner = self.inner.borrow();
        let n = inner.values.len();
        let mut adj = vec![0.0; n];
        adj[loss.idx as usize] = 1.0;
        for i in (0..=loss.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let lo = inner.edge_start[i] as usize;
            let hi = inner
                .edge_start
                .get(i + 1)
                .map_or(inner.edges.len(), |&e| e as usize);
            for &(parent, partial) in &inner.edges[lo..hi] {
                adj[parent as usize] += a * partial;
            }
        }

        let mut d_theta = vec![0.0; inner.theta_len.unwrap_or(0)];
        for block in &inner.blocks {
            let len = block.forward.outputs().len();
            let d_out = &adj[block.start..block.start + len];
            if d_out.iter().any(|&g| g != 0.0) {
                block.forward.backward(&block.params, d_out, &mut d_theta)?;
            }
        }
        for &(node, i) in &inner.theta_nodes {
            d_theta[i] += adj[node as usize];
        }
        let d_xi = inner.xi_nodes.iter().map(|&i| adj[i as usize]).collect();
        if d_theta.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("parameter gradient".into()));
        }
        Ok(GradientSet { d_theta, d_xi })
    }
}

/// Output coefficients of a recorded network block.
#[derive(Clone, Copy)]
pub struct RecordedNetwork<'t> {
    tape: &'t Tape,
    layout: ColumnLayout,
    start: usize,
}

impl<'t> RecordedNetwork<'t> {
    pub fn layout(&self) -> ColumnLayout {
        self.layout
    }

    pub fn order_x(&self) -> usize {
        self.layout.order_x
    }

    pub fn output_dim(&self) -> usize {
        self.layout.output_dim
    }

    /// Tape variable holding the Taylor coefficient of `channel` in `stream`.
    pub fn coeff(&self, channel: usize, stream: Stream, point: usize) -> Var<'t> {
        Var {
            tape: self.tape,
            idx: (self.start + self.layout.index(channel, stream, point)) as u32,
        }
    }

    pub fn value(&self, channel: usize, point: usize) -> Var<'t> {
        self.coeff(channel, Stream::Value, point)
    }

    /// Derivatives of every channel at a point carrying derivatives.
    pub fn derivatives(&self, point: usize) -> super::DerivativeBundle<Var<'t>> {
        let order_x = self.layout.order_x;
        let channels = (0..self.layout.output_dim)
            .map(|c| {
                let x = |k| self.coeff(c, Stream::X(k), point);
                super::ChannelDerivatives {
                    value: self.coeff(c, Stream::Value, point),
                    dt: self.coeff(c, Stream::T, point),
                    dx: x(1),
                    dxx: (order_x >= 2).then(|| x(2) * 2.0),
                    dxxx: (order_x >= 3).then(|| x(3) * 6.0),
                }
            })
            .collect();
        super::DerivativeBundle { channels, order_x }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().values[self.idx as usize]
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn square(self) -> Var<'t> {
        self.tape.mul(self, self)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.add(self, rhs)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.sub(self, rhs)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.mul(self, rhs)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.affine(self, -1.0, 0.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.affine(self, 1.0, rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.affine(self, 1.0, -rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.affine(self, rhs, 0.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}
