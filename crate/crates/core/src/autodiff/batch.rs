//! Batched Taylor-jet propagation through a [`NetworkParams`] network.
//!
//! Every point contributes one *value* column. Points that need input
//! derivatives additionally contribute `order_x` columns for the Taylor
//! coefficients along `x` and one column for the first coefficient along `t`.
//! Affine layers act on each coefficient column independently (the bias only
//! touches value columns), so a layer is a single matrix product over all
//! columns; the `tanh` layers mix the columns of one point through the jet
//! recurrence. [`BatchForward::backward`] is the exact vector-Jacobian
//! product of the whole pass with respect to the flat parameter vector.

use matrixmultiply::dgemm;

use super::{ChannelDerivatives, DerivativeBundle};
use crate::error::{Error, Result};
use crate::network::NetworkParams;

/// Which Taylor coefficient a column holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Value,
    /// `k`-th scaled coefficient along `x`, `1 ≤ k ≤ order_x`.
    X(usize),
    /// First coefficient along `t` (equal to `∂/∂t`).
    T,
}

/// Points to evaluate: `with_derivatives` first, then value-only points.
#[derive(Clone, Debug, Default)]
pub struct PointBatch {
    pub with_derivatives: Vec<(f64, f64)>,
    pub values_only: Vec<(f64, f64)>,
    pub order_x: usize,
}

impl PointBatch {
    pub fn len(&self) -> usize {
        self.with_derivatives.len() + self.values_only.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, p: usize) -> (f64, f64) {
        let n = self.with_derivatives.len();
        if p < n {
            self.with_derivatives[p]
        } else {
            self.values_only[p - n]
        }
    }
}

/// Column bookkeeping of a batch: which column holds which coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnLayout {
    pub n_points: usize,
    pub n_full: usize,
    pub order_x: usize,
    pub output_dim: usize,
}

impl ColumnLayout {
    pub fn cols(&self) -> usize {
        self.n_points + self.n_full * (self.order_x + 1)
    }

    pub fn column(&self, stream: Stream, point: usize) -> usize {
        match stream {
            Stream::Value => {
                debug_assert!(point < self.n_points);
                point
            }
            Stream::X(k) => {
                debug_assert!(k >= 1 && k <= self.order_x && point < self.n_full);
                self.n_points + (k - 1) * self.n_full + point
            }
            Stream::T => {
                debug_assert!(point < self.n_full);
                self.n_points + self.order_x * self.n_full + point
            }
        }
    }

    /// Index into the flat `output_dim × cols` output matrix.
    pub fn index(&self, channel: usize, stream: Stream, point: usize) -> usize {
        channel * self.cols() + self.column(stream, point)
    }
}

/// Cached forward pass over a [`PointBatch`].
#[derive(Clone, Debug)]
pub struct BatchForward {
    order_x: usize,
    n_points: usize,
    n_full: usize,
    cols: usize,
    inputs: Vec<f64>,
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    output: Vec<f64>,
    output_dim: usize,
}

pub fn forward_batch(params: &NetworkParams, batch: &PointBatch) -> Result<BatchForward> {
    let order_x = batch.order_x;
    if order_x > super::MAX_ORDER {
        return Err(Error::InvalidOrder(format!(
            "order_x must be at most {}, got {order_x}",
            super::MAX_ORDER
        )));
    }
    if !batch.with_derivatives.is_empty() && order_x == 0 {
        return Err(Error::InvalidOrder("order_x must be at least 1".into()));
    }
    if params.input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            what: "network input dimension",
            expected: 2,
            found: params.input_dim(),
        });
    }
    let n_points = batch.len();
    let n_full = batch.with_derivatives.len();
    let cols = n_points + n_full * (order_x + 1);
    let mut fwd = BatchForward {
        order_x,
        n_points,
        n_full,
        cols,
        inputs: vec![0.0; 2 * cols],
        pre: Vec::new(),
        acts: Vec::new(),
        output: Vec::new(),
        output_dim: params.output_dim(),
    };

    for p in 0..n_points {
        let (x, t) = batch.point(p);
        if !(x.is_finite() && t.is_finite()) {
            return Err(Error::NonFinite(format!("network input ({x}, {t})")));
        }
        fwd.inputs[p] = x;
        fwd.inputs[cols + p] = t;
    }
    if n_full > 0 {
        let x1 = fwd.column(Stream::X(1), 0);
        let tc = fwd.column(Stream::T, 0);
        fwd.inputs[x1..x1 + n_full].fill(1.0);
        fwd.inputs[cols + tc..cols + tc + n_full].fill(1.0);
    }

    let n_layers = params.num_layers();
    for l in 0..n_layers {
        let (n_in, n_out) = params.layer_shape(l);
        let input = if l == 0 {
            &fwd.inputs
        } else {
            &fwd.acts[l - 1]
        };
        let mut z = vec![0.0; n_out * cols];
        gemm(
            n_out,
            n_in,
            cols,
            params.weights(l),
            (n_in as isize, 1),
            input,
            (cols as isize, 1),
            0.0,
            &mut z,
            (cols as isize, 1),
        );
        for (row, b) in z.chunks_exact_mut(cols).zip(params.bias(l)) {
            for v in &mut row[..n_points] {
                *v += b;
            }
        }
        if l + 1 == n_layers {
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network output".into()));
            }
            fwd.output = z;
        } else {
            let u = fwd.tanh_forward(&z, n_out);
            fwd.pre.push(z);
            fwd.acts.push(u);
        }
    }
    Ok(fwd)
}

impl BatchForward {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_with_derivatives(&self) -> usize {
        self.n_full
    }

    pub fn order_x(&self) -> usize {
        self.order_x
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Number of columns per output row.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Output matrix, `output_dim × cols`, row-major.
    pub fn outputs(&self) -> &[f64] {
        &self.output
    }

    pub fn layout(&self) -> ColumnLayout {
        ColumnLayout {
            n_points: self.n_points,
            n_full: self.n_full,
            order_x: self.order_x,
            output_dim: self.output_dim,
        }
    }

    pub fn column(&self, stream: Stream, point: usize) -> usize {
        self.layout().column(stream, point)
    }

    /// Taylor coefficient of `channel` in `stream` at `point`.
    pub fn coeff(&self, channel: usize, stream: Stream, point: usize) -> f64 {
        self.output[channel * self.cols + self.column(stream, point)]
    }

    pub fn values(&self, point: usize) -> Vec<f64> {
        (0..self.output_dim)
            .map(|c| self.coeff(c, Stream::Value, point))
            .collect()
    }

    /// Derivatives (not scaled coefficients) at a point with derivatives.
    pub fn derivatives(&self, point: usize) -> DerivativeBundle {
        assert!(point < self.n_full, "point {point} carries no derivatives");
        let channels = (0..self.output_dim)
            .map(|c| {
                let x = |k| self.coeff(c, Stream::X(k), point);
                ChannelDerivatives {
                    value: self.coeff(c, Stream::Value, point),
                    dt: self.coeff(c, Stream::T, point),
                    dx: x(1),
                    dxx: (self.order_x >= 2).then(|| 2.0 * x(2)),
                    dxxx: (self.order_x >= 3).then(|| 6.0 * x(3)),
                }
            })
            .collect();
        DerivativeBundle {
            channels,
            order_x: self.order_x,
        }
    }

    fn tanh_forward(&self, z: &[f64], width: usize) -> Vec<f64> {
        let cols = self.cols;
        let np = self.n_points;
        let nf = self.n_full;
        let kx = self.order_x;
        let mut u = vec![0.0; width * cols];
        for r in 0..width {
            let zr = &z[r * cols..(r + 1) * cols];
            let ur = &mut u[r * cols..(r + 1) * cols];
            tanh_slice(&zr[..np], &mut ur[..np]);
            let t_off = np + kx * nf;
            for j in 0..nf {
                let u0 = ur[j];
                let w0 = 1.0 - u0 * u0;
                let z1 = zr[np + j];
                let u1 = w0 * z1;
                ur[np + j] = u1;
                ur[t_off + j] = w0 * zr[t_off + j];
                if kx >= 2 {
                    let z2 = zr[np + nf + j];
                    let w1 = -2.0 * u0 * u1;
                    let u2 = 0.5 * z1 * w1 + z2 * w0;
                    ur[np + nf + j] = u2;
                    if kx >= 3 {
                        let z3 = zr[np + 2 * nf + j];
                        let w2 = -(2.0 * u0 * u2 + u1 * u1);
                        ur[np + 2 * nf + j] = (z1 * w2 + 2.0 * z2 * w1) / 3.0 + z3 * w0;
                    }
                }
            }
        }
        u
    }

    /// Turns the adjoint of a layer's jet outputs (`du`) into the adjoint of
    /// its pre-activation jets, in place.
    fn tanh_backward(&self, z: &[f64], u: &[f64], du: &mut [f64], width: usize) {
        let cols = self.cols;
        let np = self.n_points;
        let nf = self.n_full;
        let kx = self.order_x;
        let t_off = np + kx * nf;
        for r in 0..width {
            let zr = &z[r * cols..(r + 1) * cols];
            let ur = &u[r * cols..(r + 1) * cols];
            let g = &mut du[r * cols..(r + 1) * cols];
            for j in nf..np {
                let u0 = ur[j];
                g[j] *= 1.0 - u0 * u0;
            }
            for j in 0..nf {
                let u0 = ur[j];
                let u1 = ur[np + j];
                let w0 = 1.0 - u0 * u0;
                let z1 = zr[np + j];
                let zt = zr[t_off + j];

                let mut bu0 = g[j];
                let mut bu1 = g[np + j];
                let but = g[t_off + j];
                let mut bw0 = 0.0;
                let mut bz1 = 0.0;
                let mut bz2 = 0.0;
                let mut bz3 = 0.0;

                if kx >= 2 {
                    let z2 = zr[np + nf + j];
                    let u2 = ur[np + nf + j];
                    let w1 = -2.0 * u0 * u1;
                    let mut bu2 = g[np + nf + j];
                    let mut bw1 = 0.0;
                    if kx >= 3 {
                        let z3 = zr[np + 2 * nf + j];
                        let w2 = -(2.0 * u0 * u2 + u1 * u1);
                        let bu3 = g[np + 2 * nf + j];
                        bz1 += bu3 * w2 / 3.0;
                        let bw2 = bu3 * z1 / 3.0;
                        bz2 += bu3 * 2.0 * w1 / 3.0;
                        bw1 += bu3 * 2.0 * z2 / 3.0;
                        bz3 += bu3 * w0;
                        bw0 += bu3 * z3;
                        bu0 -= 2.0 * u2 * bw2;
                        bu2 -= 2.0 * u0 * bw2;
                        bu1 -= 2.0 * u1 * bw2;
                    }
                    bz1 += 0.5 * w1 * bu2;
                    bw1 += 0.5 * z1 * bu2;
                    bz2 += w0 * bu2;
                    bw0 += z2 * bu2;
                    bu0 -= 2.0 * u1 * bw1;
                    bu1 -= 2.0 * u0 * bw1;
                }
                bw0 += z1 * bu1;
                bz1 += w0 * bu1;
                bw0 += zt * but;
                let bzt = w0 * but;
                bu0 -= 2.0 * u0 * bw0;

                g[j] = w0 * bu0;
                g[np + j] = bz1;
                if kx >= 2 {
                    g[np + nf + j] = bz2;
                }
                if kx >= 3 {
                    g[np + 2 * nf + j] = bz3;
                }
                g[t_off + j] = bzt;
            }
        }
    }

    /// Accumulates `(∂outputs/∂θ)ᵀ · d_out` into `grad`.
    ///
    /// `d_out` has the layout of [`outputs`](Self::outputs); `grad` is the
    /// flat parameter layout of `params`.
    pub fn backward(&self, params: &NetworkParams, d_out: &[f64], grad: &mut [f64]) -> Result<()> {
        let cols = self.cols;
        if d_out.len() != self.output.len() {
            return Err(Error::DimensionMismatch {
                what: "output adjoint",
                expected: self.output.len(),
                found: d_out.len(),
            });
        }
        if grad.len() != params.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter gradient",
                expected: params.len(),
                found: grad.len(),
            });
        }
        let mut dz = d_out.to_vec();
        for l in (0..params.num_layers()).rev() {
            let (n_in, n_out) = params.layer_shape(l);
            let input = if l == 0 { &self.inputs } else { &self.acts[l - 1] };
            let off = params.layer_offset(l);
            let (dw, rest) = grad[off..].split_at_mut(n_in * n_out);
            // dW += dZ · Aᵀ
            gemm(
                n_out,
                cols,
                n_in,
                &dz,
                (cols as isize, 1),
                input,
                (1, cols as isize),
                1.0,
                dw,
                (n_in as isize, 1),
            );
            for (db, row) in rest[..n_out].iter_mut().zip(dz.chunks_exact(cols)) {
                *db += row[..self.n_points].iter().sum::<f64>();
            }
            if l == 0 {
                break;
            }
            // dA = Wᵀ · dZ
            let mut da = vec![0.0; n_in * cols];
            gemm(
                n_in,
                n_out,
                cols,
                params.weights(l),
                (1, n_in as isize),
                &dz,
                (cols as isize, 1),
                0.0,
                &mut da,
                (cols as isize, 1),
            );
            self.tanh_backward(&self.pre[l - 1], &self.acts[l - 1], &mut da, n_in);
            dz = da;
        }
        Ok(())
    }
}

/// Elementwise `tanh`, written without branches or libm calls so the loop
/// vectorizes. Accurate to a few ulps; saturates to `±1` for `|z| > 20`.
pub(crate) fn tanh_slice(z: &[f64], out: &mut [f64]) {
    // Round-to-nearest shifter: adding it leaves n in the low mantissa bits.
    const SHIFTER: f64 = 6755399441055744.0;
    #[allow(clippy::excessive_precision)]
    const LN2_HI: f64 = 6.93147180369123816490e-01;
    #[allow(clippy::excessive_precision)]
    const LN2_LO: f64 = 1.90821492927058770002e-10;
    // 1/k! for k = 13 down to 2
    const C: [f64; 12] = [
        1.0 / 6227020800.0,
        1.0 / 479001600.0,
        1.0 / 39916800.0,
        1.0 / 3628800.0,
        1.0 / 362880.0,
        1.0 / 40320.0,
        1.0 / 5040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
    ];
    for (o, &zi) in out.iter_mut().zip(z) {
        // tanh(z) = sign(z) · expm1(a) / (expm1(a) + 2) with a = 2|z|
        let a = (2.0 * zi.abs()).min(40.0);
        let shifted = a * std::f64::consts::LOG2_E + SHIFTER;
        let n = shifted - SHIFTER;
        let r = (a - n * LN2_HI) - n * LN2_LO;
        let mut p = C[0];
        for c in &C[1..] {
            p = p * r + c;
        }
        // e^r − 1 = r + r²·p
        let pm1 = r + r * r * p;
        let bits = shifted.to_bits().wrapping_sub(SHIFTER.to_bits());
        let scale = f64::from_bits(bits.wrapping_add(1023) << 52);
        let em1 = scale * pm1 + (scale - 1.0);
        let t = em1 / (em1 + 2.0);
        *o = t.copysign(zi);
    }
}

/// `C = A·B + beta·C` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
    c_strides: (isize, isize),
) {
    let span = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) as usize * rs as usize + (cols as isize - 1) as usize * cs as usize + 1
        }
    };
    assert!(a.len() >= span(m, k, a_strides));
    assert!(b.len() >= span(k, n, b_strides));
    assert!(c.len() >= span(m, n, c_strides));
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every strided access inside the slices.
    unsafe {
        dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            c_strides.0,
            c_strides.1,
        );
    }
}
