//! Semi-implicit finite-difference solver for the three PDE families, its
//! exact discrete adjoint, and the gradient method for the control problem.
//!
//! One time step reads
//!
//! ```text
//! M yⁿ⁺¹ = yⁿ + dt R(yⁿ) + dt/2 (uⁿ + uⁿ⁺¹),   M = I − dt ν D₂ + dt λ D₃
//! ```
//!
//! on interior nodes, with homogeneous Dirichlet values at both ends. `R`
//! holds the explicit nonlinear drift; `D₂` and `D₃` are central
//! differences. The adjoint is the transpose of this
//! recursion, so the reduced gradient is exact for the discrete cost.

use log::{debug, info};

use super::banded::{fd_weights, BandedLu};
use super::grid::{FieldChannel, Grid, GridField};
use crate::error::{Error, Result};
use crate::problems::{Family, ProblemSpec};

/// Magnitude beyond which a state solve is declared unstable.
const BLOW_UP: f64 = 1e6;

/// Coefficients of one PDE instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dynamics {
    /// `None` drops every nonlinear term, leaving `y_t = ν y_xx − λ y_xxx + u`.
    pub family: Option<Family>,
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Dynamics {
    pub fn of(spec: &ProblemSpec, nu: f64) -> Self {
        Dynamics {
            family: Some(spec.family),
            nu,
            mu: spec.mu,
            lambda: spec.lambda,
        }
    }

    /// Pure diffusion `y_t = ν y_xx`.
    pub fn heat(nu: f64) -> Self {
        Dynamics {
            family: None,
            nu,
            mu: 0.0,
            lambda: 0.0,
        }
    }
}

/// Time stepper with its factored implicit operator.
#[derive(Clone, Debug)]
pub struct FdSolver {
    grid: Grid,
    dynamics: Dynamics,
    m: BandedLu,
    mt: BandedLu,
}

/// Third-derivative stencil at interior node `i` as `(node, weight)` pairs
/// over interior nodes, scaled by `dx³`.
///
/// The central five-point stencil reaches one node past the boundary at
/// `i = 1` and `i = nx − 2`. That ghost value reflects the nearest interior
/// node, oddly at one end and evenly at the other, with the parity picked
/// by the sign of `λ` so both end rows gain `+½` on the diagonal. Then
/// `λ D₃` has a nonnegative symmetric part and the implicit step cannot
/// amplify.
fn d3_row(i: usize, nx: usize, lambda_sign: f64) -> Vec<(usize, f64)> {
    let w = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 3);
    let (left_ghost, right_ghost) = if lambda_sign >= 0.0 { (-1.0, 1.0) } else { (1.0, -1.0) };
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut add = |node: usize, v: f64| match row.iter_mut().find(|(n, _)| *n == node) {
        Some(e) => e.1 += v,
        None => row.push((node, v)),
    };
    for (k, &wk) in w.iter().enumerate() {
        let node = i as isize + k as isize - 2;
        if node < 0 {
            add(1, left_ghost * wk);
        } else if node as usize >= nx {
            add(nx - 2, right_ghost * wk);
        } else if node > 0 && (node as usize) < nx - 1 && wk != 0.0 {
            add(node as usize, wk);
        }
    }
    row
}

impl FdSolver {
    pub fn new(grid: Grid, dynamics: Dynamics) -> Result<Self> {
        let nx = grid.nx;
        if dynamics.lambda != 0.0 && nx < 6 {
            return Err(Error::Config("third-order dispersion needs nx >= 6".into()));
        }
        let m_int = nx - 2;
        let (dx, dt) = (grid.dx, grid.dt);
        let c2 = dt * dynamics.nu / (dx * dx);
        let c3 = dt * dynamics.lambda / (dx * dx * dx);
        let stencils: Vec<_> = (1..nx - 1)
            .map(|i| d3_row(i, nx, dynamics.lambda.signum()))
            .collect();
        // Entry (r, c) of M on interior indices (node = index + 1).
        let entry = |r: usize, c: usize| -> f64 {
            let mut v = 0.0;
            if r == c {
                v += 1.0 + 2.0 * c2;
            } else if r.abs_diff(c) == 1 {
                v -= c2;
            }
            if c3 != 0.0 {
                if let Some((_, w)) = stencils[r].iter().find(|(node, _)| *node == c + 1) {
                    v += c3 * w;
                }
            }
            v
        };
        let (kl, ku) = if c3 != 0.0 { (2, 2) } else { (1, 1) };
        let m = BandedLu::factor(m_int, kl, ku, entry)?;
        let mt = BandedLu::factor(m_int, ku, kl, |r, c| entry(c, r))?;
        Ok(FdSolver {
            grid,
            dynamics,
            m,
            mt,
        })
    }

    pub fn for_problem(spec: &ProblemSpec, grid: Grid, nu: f64) -> Result<Self> {
        FdSolver::new(grid, Dynamics::of(spec, nu))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Explicit drift `R(y)` on all nodes (zero at the boundary).
    fn drift(&self, y: &[f64], out: &mut [f64]) {
        let nx = y.len();
        let d = &self.dynamics;
        out.fill(0.0);
        match d.family {
            None => {}
            Some(Family::Burgers) | Some(Family::Kdv) => {
                let coef = if d.family == Some(Family::Kdv) { d.mu } else { 1.0 };
                let s = -coef / (4.0 * self.grid.dx);
                for i in 1..nx - 1 {
                    out[i] = s * (y[i + 1] * y[i + 1] - y[i - 1] * y[i - 1]);
                }
            }
            Some(Family::AllenCahn) => {
                for i in 1..nx - 1 {
                    out[i] = d.mu * (y[i] - y[i] * y[i] * y[i]);
                }
            }
        }
    }

    /// Adds `dt J_R(y)ᵀ lam` to `out` (all arrays on full nodes, `lam` zero at the ends).
    fn add_drift_transpose(&self, y: &[f64], lam: &[f64], out: &mut [f64]) {
        let nx = y.len();
        let d = &self.dynamics;
        let dt = self.grid.dt;
        match d.family {
            None => {}
            Some(Family::Burgers) | Some(Family::Kdv) => {
                let coef = if d.family == Some(Family::Kdv) { d.mu } else { 1.0 };
                let s = dt * coef / (2.0 * self.grid.dx);
                for j in 1..nx - 1 {
                    out[j] += s * y[j] * (lam[j + 1] - lam[j - 1]);
                }
            }
            Some(Family::AllenCahn) => {
                for j in 1..nx - 1 {
                    out[j] += dt * d.mu * (1.0 - 3.0 * y[j] * y[j]) * lam[j];
                }
            }
        }
    }

    /// Forward solve from `y0`; `control = None` means `u ≡ 0`.
    pub fn solve_state(&self, y0: &[f64], control: Option<&GridField>) -> Result<GridField> {
        let g = self.grid;
        let nx = g.nx;
        if y0.len() != nx {
            return Err(Error::DimensionMismatch {
                what: "initial condition",
                expected: nx,
                found: y0.len(),
            });
        }
        if let Some(u) = control {
            if u.grid != g {
                return Err(Error::Config("control lives on a different grid".into()));
            }
        }
        let mut values = Vec::with_capacity(g.len());
        values.extend_from_slice(y0);
        let mut r = vec![0.0; nx];
        let mut rhs = vec![0.0; nx - 2];
        for n in 0..g.nt - 1 {
            let y = &values[n * nx..(n + 1) * nx];
            self.drift(y, &mut r);
            for k in 0..nx - 2 {
                rhs[k] = y[k + 1] + g.dt * r[k + 1];
            }
            if let Some(u) = control {
                let (a, b) = (u.row(n), u.row(n + 1));
                for k in 0..nx - 2 {
                    rhs[k] += 0.5 * g.dt * (a[k + 1] + b[k + 1]);
                }
            }
            self.m.solve(&mut rhs);
            let magnitude = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if magnitude > BLOW_UP || rhs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Unstable {
                    step: n + 1,
                    magnitude,
                    dt: g.dt,
                    dx: g.dx,
                    suggested_dt: 0.5 * g.dt,
                });
            }
            values.push(0.0);
            values.extend_from_slice(&rhs);
            values.push(0.0);
        }
        GridField::new(g, FieldChannel::State, values)
    }

    /// Exact discrete adjoint of [`solve_state`](Self::solve_state) for the
    /// cost with terminal weight `alpha_t`, scaled so that the reduced
    /// gradient is `α u − p` in the trapezoidal inner product.
    pub fn solve_adjoint(&self, y: &GridField, alpha_t: f64) -> Result<GridField> {
        let g = self.grid;
        let (nx, nt) = (g.nx, g.nt);
        if y.grid != g {
            return Err(Error::Config("state lives on a different grid".into()));
        }
        let last = nt - 1;
        // lam[n] multiplies the step that produces level n.
        let mut lam = vec![vec![0.0; nx]; nt + 1];
        let mut rhs = vec![0.0; nx - 2];
        for n in (1..=last).rev() {
            let yn = y.row(n);
            let w = if n == last { g.wt(n) + alpha_t } else { g.wt(n) };
            let mut acc = vec![0.0; nx];
            if n < last {
                let next = &lam[n + 1];
                acc.copy_from_slice(next);
                self.add_drift_transpose(yn, next, &mut acc);
            }
            for k in 0..nx - 2 {
                rhs[k] = acc[k + 1] - w * g.wx(k + 1) * yn[k + 1];
            }
            self.mt.solve(&mut rhs);
            if let Some(k) = rhs.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("adjoint at level {n}, node {}", k + 1)));
            }
            lam[n][1..nx - 1].copy_from_slice(&rhs);
        }
        let mut values = vec![0.0; g.len()];
        for n in 0..nt {
            for i in 1..nx - 1 {
                let before = if n == 0 { 0.0 } else { lam[n][i] };
                values[n * nx + i] = 0.5 * g.dt * (before + lam[n + 1][i]) / (g.wt(n) * g.wx(i));
            }
        }
        GridField::new(g, FieldChannel::Adjoint, values)
    }
}

/// Initial condition of `spec` sampled on the grid.
pub fn initial_state(spec: &ProblemSpec, grid: &Grid) -> Vec<f64> {
    grid.xs().into_iter().map(|x| spec.initial.eval(x)).collect()
}

/// Forward state solve of `spec` from its initial condition.
///
/// `controlled = false` ignores `control` and solves with `u ≡ 0`.
pub fn solve_state(
    spec: &ProblemSpec,
    grid: &Grid,
    control: &GridField,
    nu: f64,
    controlled: bool,
) -> Result<GridField> {
    let solver = FdSolver::for_problem(spec, *grid, nu)?;
    solver.solve_state(&initial_state(spec, grid), controlled.then_some(control))
}

/// Adjoint of `spec` along the state `y`.
pub fn solve_adjoint(spec: &ProblemSpec, grid: &Grid, y: &GridField, nu: f64) -> Result<GridField> {
    FdSolver::for_problem(spec, *grid, nu)?.solve_adjoint(y, spec.alpha_t)
}

/// Pure diffusion solve `y_t = ν y_xx` with zero boundary values.
pub fn solve_heat(grid: &Grid, y0: &[f64], nu: f64) -> Result<GridField> {
    FdSolver::new(*grid, Dynamics::heat(nu))?.solve_state(y0, None)
}

/// `½ ∬ (y² + α u²) + ½ α_T ∫ y(·, T)²` by trapezoidal quadrature.
pub fn evaluate_cost(spec: &ProblemSpec, y: &GridField, u: &GridField) -> f64 {
    cost_with(spec.alpha, spec.alpha_t, y, u)
}

fn cost_with(alpha: f64, alpha_t: f64, y: &GridField, u: &GridField) -> f64 {
    let g = &y.grid;
    let running = 0.5 * (y.weighted_dot(y) + alpha * u.weighted_dot(u));
    let yt = y.final_row();
    let terminal: f64 = (0..g.nx).map(|i| g.wx(i) * yt[i] * yt[i]).sum();
    running + 0.5 * alpha_t * terminal
}

/// Settings of the reference gradient method.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub nx: usize,
    /// Time levels; `None` picks the default for the horizon.
    pub nt: Option<usize>,
    /// Stop once `‖αu − p‖ / ‖u‖` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub contraction: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nx: 201,
            nt: None,
            tolerance: 1e-4,
            max_iterations: 5000,
            initial_step: 1.0,
            contraction: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self, spec: &ProblemSpec) -> Result<Grid> {
        match self.nt {
            Some(nt) => Grid::new(spec.domain, self.nx, nt),
            None => Grid::for_problem(spec, self.nx),
        }
    }
}

/// Output of [`gradient_method`].
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub grid: Grid,
    pub y_star: GridField,
    pub u_star: GridField,
    pub p_star: GridField,
    pub y_uncontrolled: GridField,
    /// Cost at the initial guess and after every accepted step.
    pub j_history: Vec<f64>,
    /// Final `‖αu − p‖ / ‖u‖`.
    pub optimality_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Steepest descent on the reduced cost, `u ← u − s (αu − p)`, with Armijo
/// backtracking, starting from `u = 0` and using the true `ν`.
pub fn gradient_method(spec: &ProblemSpec, config: &SolverConfig) -> Result<ReferenceSolution> {
    let grid = config.grid(spec)?;
    let solver = FdSolver::for_problem(spec, grid, spec.nu_true)?;
    let y0 = initial_state(spec, &grid);
    let alpha = spec.alpha;

    let y_uncontrolled = solver.solve_state(&y0, None)?;
    let mut u = GridField::zeros(grid, FieldChannel::Control);
    let mut y = y_uncontrolled.clone();
    let mut j = evaluate_cost(spec, &y, &u);
    let mut j_history = vec![j];
    let mut converged = false;
    let mut residual;
    let mut iterations = 0;

    loop {
        let p = solver.solve_adjoint(&y, spec.alpha_t)?;
        let g = axpby(alpha, &u, -1.0, &p);
        let g2 = g.weighted_dot(&g);
        let u_norm = u.l2_norm();
        residual = if u_norm > 0.0 {
            g2.sqrt() / u_norm
        } else {
            f64::INFINITY
        };
        debug!("{}: iteration {iterations}, J = {j:.10e}, residual = {residual:.3e}", spec.id);
        if residual < config.tolerance || g2 == 0.0 {
            converged = true;
            break;
        }
        if iterations == config.max_iterations {
            break;
        }

        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let u_try = axpby(1.0, &u, -step, &g);
            // A blown-up trial step counts as a rejection.
            if let Ok(y_try) = solver.solve_state(&y0, Some(&u_try)) {
                let j_try = evaluate_cost(spec, &y_try, &u_try);
                if j_try < j && j_try <= j - config.armijo * step * g2 {
                    accepted = Some((u_try, y_try, j_try));
                    break;
                }
            }
            step *= config.contraction;
        }
        let Some((u_new, y_new, j_new)) = accepted else {
            return Err(Error::LineSearchFailed {
                iteration: iterations,
                backtracks: config.max_backtracks,
            });
        };
        u = u_new;
        y = y_new;
        j = j_new;
        j_history.push(j);
        iterations += 1;
    }

    let p_star = solver.solve_adjoint(&y, spec.alpha_t)?;
    info!(
        "{}: gradient method stopped after {iterations} iterations, J = {j:.6e}, residual = {residual:.2e}",
        spec.id
    );
    Ok(ReferenceSolution {
        grid,
        y_star: y,
        u_star: u,
        p_star,
        y_uncontrolled,
        j_history,
        optimality_residual: residual,
        iterations,
        converged,
    })
}

/// `a·x + b·y` on a common grid, tagged with `x`'s channel.
fn axpby(a: f64, x: &GridField, b: f64, y: &GridField) -> GridField {
    let values = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(p, q)| a * p + b * q)
        .collect();
    GridField::new(x.grid, x.channel, values).expect("combination of finite fields")
}

/// Reduced gradient `αu − p` of the discrete cost at `u`.
pub fn reduced_gradient(spec: &ProblemSpec, grid: &Grid, u: &GridField, nu: f64) -> Result<GridField> {
    let solver = FdSolver::for_problem(spec, *grid, nu)?;
    let y = solver.solve_state(&initial_state(spec, grid), Some(u))?;
    let p = solver.solve_adjoint(&y, spec.alpha_t)?;
    let mut g = axpby(spec.alpha, u, -1.0, &p);
    g.channel = FieldChannel::Control;
    Ok(g)
}
