//! Checks shared by the focused integration tests and the acceptance report.
#![allow(dead_code)]

use ocp_pinn::autodiff::Jet;
use ocp_pinn::loss::{evaluate_loss, loss_and_gradient, LossBreakdown, LossWeights};
use ocp_pinn::network::{eval_with_input_jets, init_params, ModelParams, NetworkConfig, NetworkParams};
use ocp_pinn::problems::{make_problem, BoundaryLocation, Domain, ProblemId, ProblemSpec};
use ocp_pinn::reference::{
    evaluate_cost, initial_state, solve_heat, FdSolver, FieldChannel, Grid, GridField,
};
use ocp_pinn::sampling::{BoundaryPoint, DataChannel, DataPoint, TrainingDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Error measured against the oracle band: `|a − b| / (rel·|b| + abs)`.
/// Values ≤ 1 are within tolerance.
pub fn band(a: f64, b: f64, rel: f64, abs: f64) -> f64 {
    (a - b).abs() / (rel * b.abs() + abs)
}

/// Fourth-order central difference of `f` at `s`.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, s: f64, h: f64) -> f64 {
    (f(s - 2.0 * h) - 8.0 * f(s - h) + 8.0 * f(s + h) - f(s + 2.0 * h)) / (12.0 * h)
}

/// A small network with random depth, width, weights and biases.
pub fn random_network(output_dim: usize, rng: &mut ChaCha8Rng) -> NetworkParams {
    let config = NetworkConfig {
        hidden_layers: rng.gen_range(1..=3),
        hidden_width: rng.gen_range(3..=8),
        ..NetworkConfig::new(output_dim, rng.gen())
    };
    let mut params = init_params(&config).unwrap();
    for w in params.as_mut_slice() {
        *w += 0.3 * rng.gen_range(-1.0..1.0);
    }
    params
}

pub fn random_point(domain: &Domain, rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        rng.gen_range(domain.a..domain.b),
        rng.gen_range(0.0..domain.t_final),
    )
}

/// A handful of random points of every kind the loss of `spec` uses.
pub fn random_dataset(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> TrainingDataset {
    let d = spec.domain;
    let mut data_points = Vec::new();
    for _ in 0..4 {
        let (x, t) = random_point(&d, rng);
        data_points.push(DataPoint {
            x,
            t,
            channel: DataChannel::Controlled,
            target: rng.gen_range(-1.0..1.0),
        });
        if spec.uses_uncontrolled {
            let (x, t) = random_point(&d, rng);
            data_points.push(DataPoint {
                x,
                t,
                channel: DataChannel::Uncontrolled,
                target: rng.gen_range(-1.0..1.0),
            });
        }
    }
    let mut boundary_points = Vec::new();
    for (location, x) in [(BoundaryLocation::Left, d.a), (BoundaryLocation::Right, d.b)] {
        for _ in 0..2 {
            boundary_points.push(BoundaryPoint {
                x,
                t: rng.gen_range(0.0..d.t_final),
                location,
            });
        }
    }
    for _ in 0..spec.n_terminal.min(2) {
        boundary_points.push(BoundaryPoint {
            x: rng.gen_range(d.a..d.b),
            t: d.t_final,
            location: BoundaryLocation::Terminal,
        });
    }
    let residual_points = (0..6).map(|_| random_point(&d, rng)).collect();
    TrainingDataset {
        data_points,
        boundary_points,
        residual_points,
        seed: 0,
    }
}

pub fn random_model(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        nu: rng.gen_range(0.05..1.5),
        ..spec.true_model()
    }
}

/// Worst band violation of the jet input derivatives (orders 1–3 in `x`,
/// order 1 in `t`) against differences of the next-lower order.
pub fn input_derivative_violation(params: &NetworkParams, x: f64, t: f64) -> f64 {
    let h = 1e-3;
    let at = |x: f64, t: f64| eval_with_input_jets(params, x, t, 3, 1).unwrap();
    let exact = at(x, t);
    let mut worst: f64 = 0.0;
    for (c, ch) in exact.channels.iter().enumerate() {
        let fd_x = |k: usize| {
            central_diff(
                |s| {
                    let d = &at(s, t).channels[c];
                    [d.value, d.dx, d.dxx.unwrap()][k]
                },
                x,
                h,
            )
        };
        let fd_t = central_diff(|s| at(x, s).channels[c].value, t, h);
        for (jet, fd) in [
            (ch.dx, fd_x(0)),
            (ch.dxx.unwrap(), fd_x(1)),
            (ch.dxxx.unwrap(), fd_x(2)),
            (ch.dt, fd_t),
        ] {
            worst = worst.max(band(jet, fd, 1e-5, 1e-8));
        }
    }
    worst
}

/// Worst band violation of the `θ` and `ν` gradients of the total loss.
pub fn loss_gradient_violation(
    spec: &ProblemSpec,
    params: &NetworkParams,
    model: &ModelParams,
    dataset: &TrainingDataset,
) -> f64 {
    let w = LossWeights::default();
    let (_, grad) = loss_and_gradient(spec, params, model, dataset, &w).unwrap();
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for k in 0..params.len() {
        let base = params.as_slice()[k];
        let fd = central_diff(
            |s| {
                p.as_mut_slice()[k] = s;
                evaluate_loss(spec, &p, model, dataset, &w).unwrap().total
            },
            base,
            h,
        );
        p.as_mut_slice()[k] = base;
        worst = worst.max(band(grad.d_theta[k], fd, 1e-5, 1e-8));
    }
    let fd_nu = central_diff(
        |s| {
            let m = ModelParams { nu: s, ..*model };
            evaluate_loss(spec, params, &m, dataset, &w).unwrap().total
        },
        model.nu,
        h,
    );
    worst.max(band(grad.d_xi[0], fd_nu, 1e-5, 1e-8))
}

/// Runs both oracles on `cases` random networks for the layout of `id`.
/// Returns the worst input-derivative and gradient violations.
pub fn autodiff_oracle(id: ProblemId, cases: usize, seed: u64) -> (f64, f64) {
    let spec = make_problem(id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inputs, mut grads): (f64, f64) = (0.0, 0.0);
    for _ in 0..cases {
        let params = random_network(spec.output_dim(), &mut rng);
        let (x, t) = random_point(&spec.domain, &mut rng);
        inputs = inputs.max(input_derivative_violation(&params, x, t));
        let model = random_model(&spec, &mut rng);
        let dataset = random_dataset(&spec, &mut rng);
        grads = grads.max(loss_gradient_violation(&spec, &params, &model, &dataset));
    }
    (inputs, grads)
}

fn jet(c: [f64; 4]) -> Jet {
    Jet::new(&c).unwrap()
}

/// Worst relative deviation of the product and `tanh` chain rules, written
/// in derivative (not coefficient) form, for jets with coefficients `f`, `g`.
pub fn jet_identity_error(f: [f64; 4], g: [f64; 4]) -> f64 {
    let (jf, jg) = (jet(f), jet(g));
    let d = |j: &Jet| [0, 1, 2, 3].map(|k| j.derivative(k));
    let (df, dg) = (d(&jf), d(&jg));
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64, scale: f64| {
        worst = worst.max((got - want).abs() / scale.max(1.0));
    };

    let prod = d(&(jf * jg));
    let sum = d(&(jf + jg));
    let diff = d(&(jf - jg));
    for k in 0..4 {
        let terms: Vec<f64> = (0..=k).map(|j| binom[k][j] * df[j] * dg[k - j]).collect();
        let scale = terms.iter().map(|v| v.abs()).sum();
        check(prod[k], terms.iter().sum(), scale);
        check(sum[k], df[k] + dg[k], df[k].abs() + dg[k].abs());
        check(diff[k], df[k] - dg[k], df[k].abs() + dg[k].abs());
    }

    // Faà di Bruno with s' = 1 − u², s'' = −2u s', s''' = (6u² − 2) s'.
    let th = d(&jf.tanh());
    let u = f[0].tanh();
    let s1 = 1.0 - u * u;
    let s2 = -2.0 * u * s1;
    let s3 = (6.0 * u * u - 2.0) * s1;
    check(th[0], u, 1.0);
    check(th[1], s1 * df[1], (s1 * df[1]).abs());
    let t2 = [s2 * df[1] * df[1], s1 * df[2]];
    check(th[2], t2.iter().sum(), t2.iter().map(|v| v.abs()).sum());
    let t3 = [
        s3 * df[1].powi(3),
        3.0 * s2 * df[1] * df[2],
        s1 * df[3],
    ];
    check(th[3], t3.iter().sum(), t3.iter().map(|v| v.abs()).sum());
    worst
}

/// Relative gap between the reported total and the weighted sum of its terms.
pub fn loss_identity_gap(b: &LossBreakdown, w: &LossWeights) -> f64 {
    let terms = b.terms();
    let magnitude = w.w_d * terms[0].abs()
        + w.w_r * terms[1..5].iter().map(|v| v.abs()).sum::<f64>()
        + w.w_b * terms[5..].iter().map(|v| v.abs()).sum::<f64>();
    (b.total - b.weighted_total(w)).abs() / magnitude.max(f64::MIN_POSITIVE)
}

pub fn coarse_grid(spec: &ProblemSpec) -> Grid {
    let nt = if spec.domain.t_final > 1.0 { 401 } else { 201 };
    Grid::new(spec.domain, 101, nt).unwrap()
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, scale: f64) -> GridField {
    GridField::from_fn(grid, FieldChannel::Control, |_, _| scale * rng.gen_range(-1.0..1.0)).unwrap()
}

/// Relative gap between the adjoint-based directional derivative of the
/// discrete cost and a central difference, on a coarse grid.
pub fn adjoint_consistency_gap(id: ProblemId) -> f64 {
    let h = 1e-4;
    let spec = make_problem(id);
    let grid = coarse_grid(&spec);
    let solver = FdSolver::for_problem(&spec, grid, spec.nu_true).unwrap();
    let y0 = initial_state(&spec, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = random_field(grid, &mut rng, 0.05);
    let du = random_field(grid, &mut rng, 1.0);

    let y = solver.solve_state(&y0, Some(&u)).unwrap();
    let p = solver.solve_adjoint(&y, spec.alpha_t).unwrap();
    let g: Vec<f64> = u
        .values()
        .iter()
        .zip(p.values())
        .map(|(u, p)| spec.alpha * u - p)
        .collect();
    let g = GridField::new(grid, FieldChannel::Control, g).unwrap();
    let predicted = g.weighted_dot(&du);

    let cost = |s: f64| {
        let v = u.values().iter().zip(du.values()).map(|(a, b)| a + s * b).collect();
        let us = GridField::new(grid, FieldChannel::Control, v).unwrap();
        let ys = solver.solve_state(&y0, Some(&us)).unwrap();
        evaluate_cost(&spec, &ys, &us)
    };
    let fd = (cost(h) - cost(-h)) / (2.0 * h);
    (fd - predicted).abs() / predicted.abs()
}

/// Observed spatial order of the state solver at `T = 0.25` from grids of
/// 81 and 161 nodes against 641 nodes, with `dt ∝ dx²`.
pub fn observed_spatial_order(id: ProblemId) -> f64 {
    let spec = make_problem(id);
    let domain = Domain {
        t_final: 0.25,
        ..spec.domain
    };
    let solve = |nx: usize| {
        let dx = (domain.b - domain.a) / (nx - 1) as f64;
        let nt = (domain.t_final / (0.5 * dx * dx)).round() as usize + 1;
        let grid = Grid::new(domain, nx, nt).unwrap();
        let u = GridField::from_fn(grid, FieldChannel::Control, |x, t| {
            0.3 * (x - domain.a).sin() * (domain.b - x).sin() * (1.0 + t)
        })
        .unwrap();
        FdSolver::for_problem(&spec, grid, spec.nu_true)
            .unwrap()
            .solve_state(&initial_state(&spec, &grid), Some(&u))
            .unwrap()
    };
    let error = |coarse: &GridField, fine: &GridField| {
        let stride = (fine.grid.nx - 1) / (coarse.grid.nx - 1);
        let (c, f) = (coarse.final_row(), fine.final_row());
        let s: f64 = (0..coarse.grid.nx).map(|i| (c[i] - f[i * stride]).powi(2)).sum();
        (s * coarse.grid.dx).sqrt()
    };
    let reference = solve(641);
    (error(&solve(81), &reference) / error(&solve(161), &reference)).log2()
}

/// Largest relative deviation of the decay of `sin(πx/4)` under the heat
/// equation (`ν = 0.5`, `T = 1`, 201 × 2001 grid) from `exp(−ν k² T)`,
/// over nodes away from the zero of the mode.
pub fn heat_decay_deviation() -> f64 {
    let domain = Domain {
        a: -4.0,
        b: 4.0,
        t_final: 1.0,
    };
    let grid = Grid::new(domain, 201, 2001).unwrap();
    let k = std::f64::consts::PI / 4.0;
    let y0: Vec<f64> = grid.xs().iter().map(|x| (k * x).sin()).collect();
    let y = solve_heat(&grid, &y0, 0.5).unwrap();
    let decay = (-0.5 * k * k).exp();
    (10..191)
        .step_by(10)
        .filter(|&i| i != 100)
        .map(|i| (y.final_row()[i] / y0[i] / decay - 1.0).abs())
        .fold(0.0, f64::max)
}
