//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: optimal-control reference profiles, a
//! state explorer for trying different viscosities, and an incremental
//! training session that the page steps a few epochs per animation frame.

use ocp_pinn::loss::LossBreakdown;
use ocp_pinn::metrics::evaluate_on_grid;
use ocp_pinn::network::NetworkConfig;
use ocp_pinn::problems::{make_problem_by_name, ProblemSpec};
use ocp_pinn::reference::{
    gradient_method, initial_state, FdSolver, Grid, ReferenceSolution, SolverConfig,
};
use ocp_pinn::sampling::sample_dataset;
use ocp_pinn::train::{TrainConfig, Trainer};
use wasm_bindgen::prelude::*;

fn js(e: ocp_pinn::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn coarse_reference(spec: &ProblemSpec, nx: usize) -> ocp_pinn::Result<ReferenceSolution> {
    let config = SolverConfig {
        nx,
        tolerance: 1e-3,
        max_iterations: 2000,
        ..SolverConfig::default()
    };
    gradient_method(spec, &config)
}

/// Final-time profiles of the optimal and uncontrolled states.
#[wasm_bindgen]
pub struct ReferenceProfiles {
    x: Vec<f64>,
    controlled: Vec<f64>,
    uncontrolled: Vec<f64>,
    control: Vec<f64>,
    costs: Vec<f64>,
}

#[wasm_bindgen]
impl ReferenceProfiles {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn controlled(&self) -> Vec<f64> {
        self.controlled.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn uncontrolled(&self) -> Vec<f64> {
        self.uncontrolled.clone()
    }

    /// Optimal control at the final time.
    #[wasm_bindgen(getter)]
    pub fn control(&self) -> Vec<f64> {
        self.control.clone()
    }

    /// Cost after every accepted gradient step.
    #[wasm_bindgen(getter)]
    pub fn costs(&self) -> Vec<f64> {
        self.costs.clone()
    }
}

pub fn compute_reference_profiles(test: &str, nx: usize) -> ocp_pinn::Result<ReferenceProfiles> {
    let spec = make_problem_by_name(test)?;
    let r = coarse_reference(&spec, nx)?;
    Ok(ReferenceProfiles {
        x: r.grid.xs(),
        controlled: r.y_star.final_row().to_vec(),
        uncontrolled: r.y_uncontrolled.final_row().to_vec(),
        control: r.u_star.final_row().to_vec(),
        costs: r.j_history,
    })
}

/// Solves the optimal control problem of `test` on `nx` nodes.
#[wasm_bindgen]
pub fn reference_profiles(test: &str, nx: usize) -> Result<ReferenceProfiles, JsError> {
    compute_reference_profiles(test, nx).map_err(js)
}

pub fn compute_state_snapshots(
    test: &str,
    nu: f64,
    nx: usize,
    snapshots: usize,
) -> ocp_pinn::Result<Vec<f64>> {
    let spec = make_problem_by_name(test)?;
    let grid = Grid::for_problem(&spec, nx)?;
    let solver = FdSolver::for_problem(&spec, grid, nu)?;
    let y = solver.solve_state(&initial_state(&spec, &grid), None)?;
    let k = snapshots.max(2);
    let mut out = Vec::with_capacity(k * nx);
    for s in 0..k {
        let n = s * (grid.nt - 1) / (k - 1);
        out.extend_from_slice(y.row(n));
    }
    Ok(out)
}

/// Uncontrolled state of `test` with viscosity `nu`, sampled at `snapshots`
/// equally spaced times from 0 to T; rows of `nx` values, concatenated.
#[wasm_bindgen]
pub fn state_snapshots(test: &str, nu: f64, nx: usize, snapshots: usize) -> Result<Vec<f64>, JsError> {
    compute_state_snapshots(test, nu, nx, snapshots).map_err(js)
}

/// Live training run on a coarse reference solution.
#[wasm_bindgen]
pub struct PinnSession {
    trainer: Trainer,
    reference: ReferenceSolution,
    nu_trace: Vec<f64>,
    loss_trace: Vec<f64>,
}

impl PinnSession {
    pub fn create(test: &str, seed: u64, nx: usize) -> ocp_pinn::Result<PinnSession> {
        let spec = make_problem_by_name(test)?;
        let reference = coarse_reference(&spec, nx)?;
        let dataset = sample_dataset(&reference, &spec, seed)?;
        let net = NetworkConfig::new(spec.output_dim(), seed);
        let config = TrainConfig {
            max_epochs: usize::MAX,
            log_every: 50,
            seed,
            ..TrainConfig::for_problem(&spec)
        };
        Ok(PinnSession {
            trainer: Trainer::new(&spec, &dataset, &net, &config)?,
            reference,
            nu_trace: vec![spec.nu_init],
            loss_trace: Vec::new(),
        })
    }

    pub fn advance(&mut self, epochs: usize) -> ocp_pinn::Result<f64> {
        for _ in 0..epochs {
            let stop = self.trainer.step()?;
            if let Some(loss) = self.trainer.last_loss() {
                self.loss_trace.push(loss.total);
            }
            self.nu_trace.push(self.trainer.model().nu);
            if stop.is_some() {
                break;
            }
        }
        Ok(self.trainer.last_loss().map_or(f64::NAN, |l| l.total))
    }

    pub fn pinn_final_state(&self) -> ocp_pinn::Result<Vec<f64>> {
        let fields = evaluate_on_grid(self.trainer.spec(), self.trainer.params(), &self.final_time_grid()?)?;
        Ok(fields.y.final_row().to_vec())
    }

    fn final_time_grid(&self) -> ocp_pinn::Result<Grid> {
        // Two time levels, so the last row is t = T.
        let g = self.reference.grid;
        Grid::new(g.domain, g.nx, 2)
    }
}

#[wasm_bindgen]
impl PinnSession {
    /// Solves the reference problem of `test` on `nx` nodes, samples the
    /// training set with `seed` and initializes the network.
    #[wasm_bindgen(constructor)]
    pub fn new(test: &str, seed: u64, nx: usize) -> Result<PinnSession, JsError> {
        Self::create(test, seed, nx).map_err(js)
    }

    /// Runs up to `epochs` Adam steps; returns the latest total loss.
    pub fn step(&mut self, epochs: usize) -> Result<f64, JsError> {
        self.advance(epochs).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn epoch(&self) -> usize {
        self.trainer.epoch()
    }

    #[wasm_bindgen(getter)]
    pub fn nu(&self) -> f64 {
        self.trainer.model().nu
    }

    #[wasm_bindgen(getter)]
    pub fn nu_true(&self) -> f64 {
        self.trainer.spec().nu_true
    }

    #[wasm_bindgen(getter)]
    pub fn finished(&self) -> bool {
        self.trainer.stop_reason().is_some()
    }

    /// Names and values of the loss terms, as `name=value` strings.
    pub fn loss_terms(&self) -> Vec<String> {
        let terms = self.trainer.last_loss().map_or([f64::NAN; 7], |l| l.terms());
        LossBreakdown::TERM_NAMES
            .iter()
            .zip(terms)
            .map(|(n, v)| format!("{n}={v:e}"))
            .collect()
    }

    /// `ν` after every epoch so far, starting from the initial guess.
    #[wasm_bindgen(getter)]
    pub fn nu_trace(&self) -> Vec<f64> {
        self.nu_trace.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn loss_trace(&self) -> Vec<f64> {
        self.loss_trace.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.reference.grid.xs()
    }

    /// Reference optimal state at the final time.
    #[wasm_bindgen(getter)]
    pub fn reference_final_state(&self) -> Vec<f64> {
        self.reference.y_star.final_row().to_vec()
    }

    /// Network state at the final time on the reference nodes.
    pub fn final_state(&self) -> Result<Vec<f64>, JsError> {
        self.pinn_final_state().map_err(js)
    }
}
