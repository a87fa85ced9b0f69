//! The training objective: data misfit, PDE residuals (state, adjoint,
//! optimality and, for test 2, the uncontrolled state) and boundary terms.

use log::warn;

use crate::autodiff::{GradientSet, PointBatch, Tape, Var};
use crate::error::{Error, Result};
use crate::network::{ModelParams, NetworkParams};
use crate::problems::{
    adjoint_residual, boundary_residuals, optimality_residual, state_residual, uncontrolled_residual,
    BoundaryClass, BoundaryLocation, ProblemSpec,
};
use crate::sampling::{BoundaryPoint, DataChannel, DataPoint, TrainingDataset};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub w_d: f64,
    pub w_r: f64,
    pub w_b: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_d: 10.0,
            w_r: 1.0,
            w_b: 10.0,
        }
    }
}

/// Values of every loss term and their weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_d: f64,
    pub l_rf: f64,
    pub l_ra: f64,
    pub l_ro: f64,
    pub l_r_unc: f64,
    pub l_bf: f64,
    pub l_ba: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const TERM_NAMES: [&'static str; 7] = ["L_d", "L_rF", "L_rA", "L_rO", "L_r_unc", "L_bF", "L_bA"];

    /// Builds a breakdown from its terms, filling in the weighted total.
    pub fn from_terms(terms: [f64; 7], weights: &LossWeights) -> Self {
        let [l_d, l_rf, l_ra, l_ro, l_r_unc, l_bf, l_ba] = terms;
        let mut b = LossBreakdown {
            l_d,
            l_rf,
            l_ra,
            l_ro,
            l_r_unc,
            l_bf,
            l_ba,
            total: 0.0,
        };
        b.total = b.weighted_total(weights);
        b
    }

    pub fn terms(&self) -> [f64; 7] {
        [self.l_d, self.l_rf, self.l_ra, self.l_ro, self.l_r_unc, self.l_bf, self.l_ba]
    }

    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.w_d * self.l_d
            + w.w_r * (self.l_rf + self.l_ra + self.l_ro + self.l_r_unc)
            + w.w_b * (self.l_bf + self.l_ba)
    }

    pub fn is_finite(&self) -> bool {
        self.terms().iter().all(|v| v.is_finite()) && self.total.is_finite()
    }
}

/// Mean squared error, flagged when there is nothing to average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataLoss {
    pub value: f64,
    pub empty: bool,
}

pub fn data_loss(predictions: &[f64], targets: &[f64]) -> Result<DataLoss> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "data predictions",
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    if targets.is_empty() {
        warn!("data loss over an empty dataset");
        return Ok(DataLoss {
            value: 0.0,
            empty: true,
        });
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(DataLoss {
        value: sse / targets.len() as f64,
        empty: false,
    })
}

fn mean_of_squares<'t>(tape: &'t Tape, terms: &[Var<'t>], count: usize) -> Var<'t> {
    if terms.is_empty() {
        tape.constant(0.0)
    } else {
        tape.scaled_sum_of_squares(terms, 1.0 / count as f64)
    }
}

/// Recorded data misfit over all observed state channels.
pub fn recorded_data_loss<'t>(
    tape: &'t Tape,
    spec: &ProblemSpec,
    params: &NetworkParams,
    points: &[DataPoint],
) -> Result<Var<'t>> {
    if points.is_empty() {
        warn!("{}: no data points, data loss is 0", spec.id);
        return Ok(tape.constant(0.0));
    }
    let batch = PointBatch {
        with_derivatives: Vec::new(),
        values_only: points.iter().map(|p| (p.x, p.t)).collect(),
        order_x: 0,
    };
    let net = tape.record_network(params, &batch)?;
    let mut misfits = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let channel = match p.channel {
            DataChannel::Controlled => spec.state_channel(),
            DataChannel::Uncontrolled => spec.uncontrolled_channel().ok_or_else(|| {
                Error::Config(format!("{} has no uncontrolled state channel", spec.id))
            })?,
        };
        misfits.push(net.value(channel, k) - p.target);
    }
    Ok(mean_of_squares(tape, &misfits, points.len()))
}

/// Recorded residual terms `(L_rF, L_rA, L_rO, L_r_unc)`.
#[derive(Clone, Copy, Debug)]
pub struct ResidualTerms<'t> {
    pub state: Var<'t>,
    pub adjoint: Var<'t>,
    pub optimality: Var<'t>,
    pub uncontrolled: Var<'t>,
}

pub fn residual_loss<'t>(
    tape: &'t Tape,
    spec: &ProblemSpec,
    params: &NetworkParams,
    nu: Var<'t>,
    points: &[(f64, f64)],
) -> Result<ResidualTerms<'t>> {
    if let Some(&(x, t)) = points.iter().find(|&&(x, t)| !spec.domain.contains(x, t)) {
        return Err(Error::Config(format!("residual point ({x}, {t}) lies outside the domain")));
    }
    let zero = || tape.constant(0.0);
    if points.is_empty() {
        return Ok(ResidualTerms {
            state: zero(),
            adjoint: zero(),
            optimality: zero(),
            uncontrolled: zero(),
        });
    }
    let batch = PointBatch {
        with_derivatives: points.to_vec(),
        values_only: Vec::new(),
        order_x: spec.order_x(),
    };
    let net = tape.record_network(params, &batch)?;
    let n = points.len();
    let mut rf = Vec::with_capacity(n);
    let mut ra = Vec::with_capacity(n);
    let mut ro = Vec::new();
    let mut runc = Vec::new();
    for k in 0..n {
        let f = spec.fields(&net.derivatives(k))?;
        rf.push(state_residual(spec, &f.y, f.u.value, nu)?);
        ra.push(adjoint_residual(spec, f.y.value, &f.p, nu)?);
        if spec.has_optimality_residual() {
            ro.push(optimality_residual(spec, f.p.value, f.u.value));
        }
        if let Some(y_unc) = &f.y_unc {
            runc.push(uncontrolled_residual(spec, y_unc, nu)?);
        }
    }
    Ok(ResidualTerms {
        state: mean_of_squares(tape, &rf, n),
        adjoint: mean_of_squares(tape, &ra, n),
        optimality: mean_of_squares(tape, &ro, n),
        uncontrolled: mean_of_squares(tape, &runc, n),
    })
}

/// Recorded boundary terms `(L_bF, L_bA)`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryTerms<'t> {
    pub state: Var<'t>,
    pub adjoint: Var<'t>,
}

fn check_on_boundary(spec: &ProblemSpec, p: &BoundaryPoint) -> Result<()> {
    let d = spec.domain;
    let tol = 1e-9 * (d.b - d.a).max(d.t_final);
    let on = match p.location {
        BoundaryLocation::Left => (p.x - d.a).abs() <= tol,
        BoundaryLocation::Right => (p.x - d.b).abs() <= tol,
        BoundaryLocation::Terminal => (p.t - d.t_final).abs() <= tol,
    };
    if on && d.contains(p.x, p.t) {
        Ok(())
    } else {
        Err(Error::OffBoundary { x: p.x, t: p.t })
    }
}

/// Boundary terms: every squared condition residual at a point is summed
/// and the result is averaged over the boundary points, separately for the
/// state/control conditions and the adjoint conditions.
pub fn boundary_loss<'t>(
    tape: &'t Tape,
    spec: &ProblemSpec,
    params: &NetworkParams,
    points: &[BoundaryPoint],
) -> Result<BoundaryTerms<'t>> {
    for p in points {
        check_on_boundary(spec, p)?;
    }
    if points.is_empty() {
        return Ok(BoundaryTerms {
            state: tape.constant(0.0),
            adjoint: tape.constant(0.0),
        });
    }
    let batch = PointBatch {
        with_derivatives: Vec::new(),
        values_only: points.iter().map(|p| (p.x, p.t)).collect(),
        order_x: 0,
    };
    let net = tape.record_network(params, &batch)?;
    let mut state = Vec::new();
    let mut adjoint = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let outputs: Vec<Var<'t>> = (0..spec.output_dim()).map(|c| net.value(c, k)).collect();
        let values = spec.field_values(&outputs)?;
        for (class, r) in boundary_residuals(spec, p.location, &values)? {
            match class {
                BoundaryClass::State => state.push(r),
                BoundaryClass::Adjoint => adjoint.push(r),
            }
        }
    }
    Ok(BoundaryTerms {
        state: mean_of_squares(tape, &state, points.len()),
        adjoint: mean_of_squares(tape, &adjoint, points.len()),
    })
}

/// The full loss recorded on a tape, with its term values.
#[derive(Clone, Copy, Debug)]
pub struct RecordedLoss<'t> {
    pub total: Var<'t>,
    pub breakdown: LossBreakdown,
}

pub fn total_loss<'t>(
    tape: &'t Tape,
    spec: &ProblemSpec,
    params: &NetworkParams,
    nu: Var<'t>,
    dataset: &TrainingDataset,
    weights: &LossWeights,
) -> Result<RecordedLoss<'t>> {
    if params.output_dim() != spec.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "network output channels",
            expected: spec.output_dim(),
            found: params.output_dim(),
        });
    }
    let l_d = recorded_data_loss(tape, spec, params, &dataset.data_points)?;
    let r = residual_loss(tape, spec, params, nu, &dataset.residual_points)?;
    let b = boundary_loss(tape, spec, params, &dataset.boundary_points)?;
    let residual_sum = tape.sum(&[r.state, r.adjoint, r.optimality, r.uncontrolled]);
    let boundary_sum = b.state + b.adjoint;
    let total = tape.sum(&[
        l_d * weights.w_d,
        residual_sum * weights.w_r,
        boundary_sum * weights.w_b,
    ]);
    let breakdown = LossBreakdown {
        l_d: l_d.value(),
        l_rf: r.state.value(),
        l_ra: r.adjoint.value(),
        l_ro: r.optimality.value(),
        l_r_unc: r.uncontrolled.value(),
        l_bf: b.state.value(),
        l_ba: b.adjoint.value(),
        total: total.value(),
    };
    Ok(RecordedLoss { total, breakdown })
}

/// Loss terms and the gradient of the total with respect to `θ` and `ν`.
pub fn loss_and_gradient(
    spec: &ProblemSpec,
    params: &NetworkParams,
    model: &ModelParams,
    dataset: &TrainingDataset,
    weights: &LossWeights,
) -> Result<(LossBreakdown, GradientSet)> {
    let tape = Tape::new();
    let nu = tape.parameter(model.nu);
    let loss = total_loss(&tape, spec, params, nu, dataset, weights)?;
    let grad = tape.gradient(loss.total)?;
    Ok((loss.breakdown, grad))
}

/// Loss terms without the gradient.
pub fn evaluate_loss(
    spec: &ProblemSpec,
    params: &NetworkParams,
    model: &ModelParams,
    dataset: &TrainingDataset,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let tape = Tape::new();
    let nu = tape.parameter(model.nu);
    Ok(total_loss(&tape, spec, params, nu, dataset, weights)?.breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_loss_examples() {
        assert_eq!(data_loss(&[0.3, -1.0], &[0.3, -1.0]).unwrap().value, 0.0);
        assert_eq!(data_loss(&[1.0, 1.0], &[0.0, 2.0]).unwrap().value, 1.0);
        assert!((data_loss(&[0.5], &[0.2]).unwrap().value - 0.09).abs() < 1e-15);
        let empty = data_loss(&[], &[]).unwrap();
        assert!(empty.empty && empty.value == 0.0);
        assert!(data_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn weighted_totals() {
        let w = LossWeights::default();
        assert_eq!(LossBreakdown::from_terms([0.0; 7], &w).total, 0.0);
        assert_eq!(LossBreakdown::from_terms([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &w).total, 10.0);
        assert_eq!(LossBreakdown::from_terms([0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0], &w).total, 3.0);
    }
}
