//! The five control test cases: viscous Burgers (1a, 1b), Allen-Cahn
//! (2a, 2b) and KdV with extra diffusion (3).
//!
//! Residuals are written generically over [`Scalar`] so the same code
//! evaluates plain floats and recorded tape variables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::autodiff::{ChannelDerivatives, DerivativeBundle, Scalar};
use crate::error::{Error, Result};
use crate::network::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    Test1a,
    Test1b,
    Test2a,
    Test2b,
    Test3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::Test1a,
        ProblemId::Test1b,
        ProblemId::Test2a,
        ProblemId::Test2b,
        ProblemId::Test3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Test1a => "test1a",
            ProblemId::Test1b => "test1b",
            ProblemId::Test2a => "test2a",
            ProblemId::Test2b => "test2b",
            ProblemId::Test3 => "test3",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// PDE family of a test case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `y_t + y y_x = ν y_xx + u`
    Burgers,
    /// `y_t = ν y_xx + μ (y − y³) + u`
    AllenCahn,
    /// `y_t + μ y y_x = ν y_xx − λ y_xxx + u`
    Kdv,
}

/// What each network output channel means.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelLayout {
    /// `(y, u, p)`.
    StateControlAdjoint,
    /// `(y, u, y_unc)`, with `p = α u`.
    StateControlUncontrolled,
    /// `(y, p)`, with `u = p / α`.
    StateAdjoint,
}

impl ChannelLayout {
    pub fn output_dim(&self) -> usize {
        match self {
            ChannelLayout::StateControlAdjoint | ChannelLayout::StateControlUncontrolled => 3,
            ChannelLayout::StateAdjoint => 2,
        }
    }
}

/// Space-time rectangle `[a, b] × [0, t_final]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
}

impl Domain {
    pub fn contains(&self, x: f64, t: f64) -> bool {
        let tol = 1e-12 * (self.b - self.a).max(self.t_final);
        x >= self.a - tol && x <= self.b + tol && t >= -tol && t <= self.t_final + tol
    }
}

/// Where a boundary condition is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryLocation {
    Left,
    Right,
    Terminal,
}

impl BoundaryLocation {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryLocation::Left => "left",
            BoundaryLocation::Right => "right",
            BoundaryLocation::Terminal => "terminal",
        }
    }
}

impl FromStr for BoundaryLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(BoundaryLocation::Left),
            "right" => Ok(BoundaryLocation::Right),
            "terminal" => Ok(BoundaryLocation::Terminal),
            other => Err(Error::Parse(format!("unknown boundary location `{other}`"))),
        }
    }
}

/// Which loss a boundary residual feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryClass {
    /// State, control and uncontrolled state conditions.
    State,
    /// Adjoint conditions.
    Adjoint,
}

/// Initial profile of the state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    /// `e^{−x²/2} / √(2π)`
    Gaussian,
    /// `0.2 sin(π x)`
    Sine,
    /// `1 / (1 + 10 x²)`
    Rational,
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            InitialCondition::Sine => 0.2 * (PI * x).sin(),
            InitialCondition::Rational => 1.0 / (1.0 + 10.0 * x * x),
        }
    }
}

/// Full definition of one test case.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub family: Family,
    pub domain: Domain,
    /// Control cost weight α.
    pub alpha: f64,
    /// Terminal cost weight α_T.
    pub alpha_t: f64,
    pub mu: f64,
    pub lambda: f64,
    pub nu_true: f64,
    pub nu_init: f64,
    pub initial: InitialCondition,
    pub layout: ChannelLayout,
    /// Data points per observed state channel.
    pub n_data: usize,
    pub n_boundary: usize,
    pub n_residual: usize,
    /// `(n_t, n_x)` of the residual lattice; the product is `n_residual`.
    pub residual_lattice: (usize, usize),
    /// Terminal boundary points among `n_boundary` (adjoint condition `p(x, T) = 0`).
    pub n_terminal: usize,
    pub tolerance: f64,
    pub uses_uncontrolled: bool,
}

pub fn make_problem(id: ProblemId) -> ProblemSpec {
    match id {
        ProblemId::Test1a | ProblemId::Test1b => ProblemSpec {
            id,
            family: Family::Burgers,
            domain: Domain {
                a: -4.0,
                b: 4.0,
                t_final: 4.0,
            },
            alpha: 10.0,
            alpha_t: 0.1,
            mu: 1.0,
            lambda: 0.0,
            nu_true: if id == ProblemId::Test1a { 0.5 } else { 0.05 },
            nu_init: 1.0,
            initial: InitialCondition::Gaussian,
            layout: ChannelLayout::StateControlAdjoint,
            n_data: 10,
            n_boundary: 18,
            n_residual: 336,
            residual_lattice: (16, 21),
            n_terminal: 0,
            tolerance: 1e-7,
            uses_uncontrolled: false,
        },
        ProblemId::Test2a | ProblemId::Test2b => {
            let a_case = id == ProblemId::Test2a;
            ProblemSpec {
                id,
                family: Family::AllenCahn,
                domain: Domain {
                    a: 0.0,
                    b: if a_case { 1.0 } else { 2.0 },
                    t_final: 0.5,
                },
                alpha: 0.1,
                alpha_t: 0.1,
                mu: if a_case { 1.0 } else { 11.0 },
                lambda: 0.0,
                nu_true: if a_case { 0.1 } else { 1.0 },
                nu_init: if a_case { 1.0 } else { 0.5 },
                initial: InitialCondition::Sine,
                layout: ChannelLayout::StateControlUncontrolled,
                n_data: if a_case { 9 } else { 15 },
                n_boundary: 12,
                n_residual: 663,
                residual_lattice: (17, 39),
                n_terminal: 0,
                tolerance: 1e-5,
                uses_uncontrolled: true,
            }
        }
        ProblemId::Test3 => ProblemSpec {
            id,
            family: Family::Kdv,
            domain: Domain {
                a: -4.0,
                b: 4.0,
                t_final: 0.5,
            },
            alpha: 0.1,
            alpha_t: 0.0,
            mu: -5.0,
            lambda: 1.0,
            nu_true: 1.0,
            nu_init: 0.2,
            initial: InitialCondition::Rational,
            layout: ChannelLayout::StateAdjoint,
            n_data: 45,
            n_boundary: 12,
            n_residual: 1020,
            residual_lattice: (20, 51),
            n_terminal: 4,
            tolerance: 1e-7,
            uses_uncontrolled: false,
        },
    }
}

/// Parses a problem id and builds its spec.
pub fn make_problem_by_name(name: &str) -> Result<ProblemSpec> {
    Ok(make_problem(name.parse()?))
}

impl ProblemSpec {
    pub fn output_dim(&self) -> usize {
        self.layout.output_dim()
    }

    /// Order of `x` derivatives the residuals need.
    pub fn order_x(&self) -> usize {
        match self.family {
            Family::Kdv => 3,
            _ => 2,
        }
    }

    pub fn has_optimality_residual(&self) -> bool {
        self.layout == ChannelLayout::StateControlAdjoint
    }

    /// Model parameters with `nu` at its initial guess.
    pub fn initial_model(&self) -> ModelParams {
        ModelParams {
            nu: self.nu_init,
            ..self.true_model()
        }
    }

    pub fn true_model(&self) -> ModelParams {
        ModelParams {
            nu: self.nu_true,
            mu: self.mu,
            lambda: self.lambda,
            alpha: self.alpha,
            alpha_t: self.alpha_t,
        }
    }

    /// Number of data points over all observed channels.
    pub fn total_data_points(&self) -> usize {
        if self.uses_uncontrolled {
            2 * self.n_data
        } else {
            self.n_data
        }
    }

    /// Interprets network output channels as `(y, u, p, y_unc)`.
    pub fn fields<S: Scalar>(&self, bundle: &DerivativeBundle<S>) -> Result<Fields<S>> {
        check_channels(self, bundle.channels.len())?;
        let ch = &bundle.channels;
        Ok(match self.layout {
            ChannelLayout::StateControlAdjoint => Fields {
                y: ch[0],
                u: ch[1],
                p: ch[2],
                y_unc: None,
            },
            ChannelLayout::StateControlUncontrolled => Fields {
                y: ch[0],
                u: ch[1],
                p: ch[1].scaled(self.alpha),
                y_unc: Some(ch[2]),
            },
            ChannelLayout::StateAdjoint => Fields {
                y: ch[0],
                u: ch[1].scaled(1.0 / self.alpha),
                p: ch[1],
                y_unc: None,
            },
        })
    }

    /// `(y, u, p, y_unc)` values from raw network outputs.
    pub fn field_values<S: Scalar>(&self, outputs: &[S]) -> Result<FieldValues<S>> {
        check_channels(self, outputs.len())?;
        Ok(match self.layout {
            ChannelLayout::StateControlAdjoint => FieldValues {
                y: outputs[0],
                u: outputs[1],
                p: outputs[2],
                y_unc: None,
            },
            ChannelLayout::StateControlUncontrolled => FieldValues {
                y: outputs[0],
                u: outputs[1],
                p: outputs[1] * self.alpha,
                y_unc: Some(outputs[2]),
            },
            ChannelLayout::StateAdjoint => FieldValues {
                y: outputs[0],
                u: outputs[1] * (1.0 / self.alpha),
                p: outputs[1],
                y_unc: None,
            },
        })
    }

    /// Network channel carrying the controlled state.
    pub fn state_channel(&self) -> usize {
        0
    }

    /// Network channel carrying the uncontrolled state, when there is one.
    pub fn uncontrolled_channel(&self) -> Option<usize> {
        self.uses_uncontrolled.then_some(2)
    }
}

fn check_channels(spec: &ProblemSpec, found: usize) -> Result<()> {
    if found != spec.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "network output channels",
            expected: spec.output_dim(),
            found,
        });
    }
    Ok(())
}

/// Physical fields recovered from the network channels.
#[derive(Clone, Copy, Debug)]
pub struct Fields<S> {
    pub y: ChannelDerivatives<S>,
    pub u: ChannelDerivatives<S>,
    pub p: ChannelDerivatives<S>,
    pub y_unc: Option<ChannelDerivatives<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValues<S> {
    pub y: S,
    pub u: S,
    pub p: S,
    pub y_unc: Option<S>,
}

/// Signed state-equation residual; zero iff the PDE holds at the point.
pub fn state_residual<S: Scalar>(
    spec: &ProblemSpec,
    y: &ChannelDerivatives<S>,
    u: S,
    nu: S,
) -> Result<S> {
    let yxx = y.dxx()?;
    Ok(match spec.family {
        Family::Burgers => y.dt + y.value * y.dx - nu * yxx - u,
        Family::AllenCahn => {
            let cube = y.value * y.value * y.value;
            y.dt - nu * yxx - (y.value - cube) * spec.mu - u
        }
        Family::Kdv => {
            let yxxx = y.dxxx()?;
            y.dt + y.value * y.dx * spec.mu - nu * yxx + yxxx * spec.lambda - u
        }
    })
}

/// Signed adjoint-equation residual.
pub fn adjoint_residual<S: Scalar>(
    spec: &ProblemSpec,
    y: S,
    p: &ChannelDerivatives<S>,
    nu: S,
) -> Result<S> {
    let pxx = p.dxx()?;
    Ok(match spec.family {
        Family::Burgers => y - p.dt - y * p.dx - nu * pxx,
        Family::AllenCahn => {
            let y2 = y * y;
            y - p.dt - nu * pxx - p.value * (y2 * -3.0 + 1.0) * spec.mu
        }
        Family::Kdv => {
            let pxxx = p.dxxx()?;
            y - p.dt - y * p.dx * spec.mu - nu * pxx - pxxx * spec.lambda
        }
    })
}

/// `α u − p`; identically zero when one of `u`, `p` is derived from the other.
pub fn optimality_residual<S: Scalar>(spec: &ProblemSpec, p: S, u: S) -> S {
    if spec.has_optimality_residual() {
        u * spec.alpha - p
    } else {
        u * 0.0
    }
}

/// Boundary residuals imposed at `location`, tagged with the loss they feed.
///
/// Spatial boundaries carry homogeneous Dirichlet conditions on `(y, u)`,
/// `(y, u, y_unc)` or `(y, p)` depending on the test; the terminal
/// condition `p(x, T) = 0` exists only for test 3.
pub fn boundary_residuals<S: Scalar>(
    spec: &ProblemSpec,
    location: BoundaryLocation,
    values: &FieldValues<S>,
) -> Result<Vec<(BoundaryClass, S)>> {
    use BoundaryClass::{Adjoint, State};
    match (location, spec.layout) {
        (BoundaryLocation::Terminal, ChannelLayout::StateAdjoint) => Ok(vec![(Adjoint, values.p)]),
        (BoundaryLocation::Terminal, _) => Err(Error::LocationNotInPlan {
            location: location.as_str(),
            problem: spec.id.as_str(),
        }),
        (_, ChannelLayout::StateControlAdjoint) => Ok(vec![(State, values.y), (State, values.u)]),
        (_, ChannelLayout::StateControlUncontrolled) => {
            let y_unc = values.y_unc.expect("layout carries the uncontrolled state");
            Ok(vec![(State, values.y), (State, values.u), (State, y_unc)])
        }
        (_, ChannelLayout::StateAdjoint) => Ok(vec![(State, values.y), (Adjoint, values.p)]),
    }
}

/// Uncontrolled state residual (state equation with `u ≡ 0`).
pub fn uncontrolled_residual<S: Scalar>(
    spec: &ProblemSpec,
    y_unc: &ChannelDerivatives<S>,
    nu: S,
) -> Result<S> {
    state_residual(spec, y_unc, y_unc.value * 0.0, nu)
}
