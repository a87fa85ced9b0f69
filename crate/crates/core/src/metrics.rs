//! Relative `L²` errors between PINN and reference fields.

use crate::autodiff::evaluate_values;
use crate::error::{Error, Result};
use crate::network::{ModelParams, NetworkParams};
use crate::problems::ProblemSpec;
use crate::reference::{solve_state, FieldChannel, Grid, GridField, ReferenceSolution};

/// `‖reference − candidate‖ / ‖reference‖` with trapezoidal quadrature.
pub fn relative_l2(reference: &GridField, candidate: &GridField) -> Result<f64> {
    if reference.grid != candidate.grid {
        return Err(Error::Config("relative_l2 needs fields on one grid".into()));
    }
    let denom = reference.l2_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff: Vec<f64> = reference
        .values()
        .iter()
        .zip(candidate.values())
        .map(|(a, b)| a - b)
        .collect();
    let diff = GridField::new(reference.grid, reference.channel, diff)?;
    Ok(diff.l2_norm() / denom)
}

/// Network fields sampled on every grid node.
#[derive(Clone, Debug)]
pub struct PinnFields {
    pub y: GridField,
    pub u: GridField,
    pub p: GridField,
    pub y_unc: Option<GridField>,
}

pub fn evaluate_on_grid(spec: &ProblemSpec, params: &NetworkParams, grid: &Grid) -> Result<PinnFields> {
    let mut points = Vec::with_capacity(grid.len());
    for n in 0..grid.nt {
        let t = grid.t(n);
        points.extend((0..grid.nx).map(|i| (grid.x(i), t)));
    }
    let outputs = evaluate_values(params, &points)?;
    let mut y = Vec::with_capacity(points.len());
    let mut u = Vec::with_capacity(points.len());
    let mut p = Vec::with_capacity(points.len());
    let mut y_unc = Vec::new();
    for out in &outputs {
        let f = spec.field_values(out)?;
        y.push(f.y);
        u.push(f.u);
        p.push(f.p);
        if let Some(v) = f.y_unc {
            y_unc.push(v);
        }
    }
    Ok(PinnFields {
        y: GridField::new(*grid, FieldChannel::State, y)?,
        u: GridField::new(*grid, FieldChannel::Control, u)?,
        p: GridField::new(*grid, FieldChannel::Adjoint, p)?,
        y_unc: if spec.uses_uncontrolled {
            Some(GridField::new(*grid, FieldChannel::State, y_unc)?)
        } else {
            None
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// `rel(y(u*), y_PINN)`
    pub e1: f64,
    /// `rel(y(u*), y(u_PINN))`
    pub e2: f64,
    /// `rel(u*, u_PINN)`
    pub e3: f64,
    /// `rel(y(u_PINN), y_PINN)`
    pub e4: f64,
    pub nu_learned: f64,
    pub nu_true: f64,
    pub epochs: usize,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "test,seed,E1,E2,E3,E4,nu_learned,nu_true,epochs";

    pub fn csv_row(&self, test: &str, seed: u64) -> String {
        format!(
            "{test},{seed},{},{},{},{},{},{},{}",
            self.e1, self.e2, self.e3, self.e4, self.nu_learned, self.nu_true, self.epochs
        )
    }
}

/// Everything computed while scoring a trained network.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: ErrorReport,
    pub pinn: PinnFields,
    /// State obtained by plugging the PINN control into the solver.
    pub y_plugin: GridField,
}

/// Scores a trained network against the reference, solving the state
/// equation (with the true `ν`) under the PINN control.
pub fn error_report(
    spec: &ProblemSpec,
    reference: &ReferenceSolution,
    params: &NetworkParams,
    model: &ModelParams,
    epochs: usize,
) -> Result<Evaluation> {
    let grid = reference.grid;
    let pinn = evaluate_on_grid(spec, params, &grid)?;
    let y_plugin = solve_state(spec, &grid, &pinn.u, spec.nu_true, true)?;
    let report = ErrorReport {
        e1: relative_l2(&reference.y_star, &pinn.y)?,
        e2: relative_l2(&reference.y_star, &y_plugin)?,
        e3: relative_l2(&reference.u_star, &pinn.u)?,
        e4: relative_l2(&y_plugin, &pinn.y)?,
        nu_learned: model.nu,
        nu_true: spec.nu_true,
        epochs,
    };
    Ok(Evaluation {
        report,
        pinn,
        y_plugin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Domain;

    fn grid() -> Grid {
        Grid::new(
            Domain {
                a: -1.0,
                b: 2.0,
                t_final: 0.7,
            },
            13,
            9,
        )
        .unwrap()
    }

    #[test]
    fn examples() {
        let g = grid();
        let f = GridField::from_fn(g, FieldChannel::State, |x, t| x * x - t).unwrap();
        assert_eq!(relative_l2(&f, &f).unwrap(), 0.0);
        let zero = GridField::zeros(g, FieldChannel::State);
        assert!((relative_l2(&f, &zero).unwrap() - 1.0).abs() < 1e-15);
        let two = GridField::from_fn(g, FieldChannel::State, |_, _| 2.0).unwrap();
        let one = GridField::from_fn(g, FieldChannel::State, |_, _| 1.0).unwrap();
        assert!((relative_l2(&two, &one).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(relative_l2(&zero, &f), Err(Error::ZeroNorm)));
    }
}
