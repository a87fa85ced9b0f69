//! Run configuration: a flat `key = value` file.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! tests = test1a, test3
//! out_dir = results
//! seed = 0
//! max_epochs = 100000
//! test3.max_epochs = 50000     # applies to test3 only
//! ```
//!
//! Global keys: `tests`, `out_dir`, `seed`, `emit_fields`, `emit_checkpoints`.
//! Every other key is a per-test setting and may be prefixed with a test id.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use ocp_pinn::loss::LossWeights;
use ocp_pinn::network::NetworkConfig;
use ocp_pinn::problems::{make_problem, ProblemId, ProblemSpec};
use ocp_pinn::reference::SolverConfig;
use ocp_pinn::train::TrainConfig;

use crate::CliError;

/// Settings that can differ between tests.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSettings {
    pub max_epochs: usize,
    pub log_every: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Falls back to the tolerance of the test when unset.
    pub epsilon_tol: Option<f64>,
    pub w_d: f64,
    pub w_r: f64,
    pub w_b: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub nx: usize,
    pub nt: Option<usize>,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TestSettings {
    fn default() -> Self {
        let train = TrainConfig::default();
        let net = NetworkConfig::new(1, 0);
        let solver = SolverConfig::default();
        TestSettings {
            max_epochs: train.max_epochs,
            log_every: train.log_every,
            learning_rate: train.learning_rate,
            beta1: train.beta1,
            beta2: train.beta2,
            eps_adam: train.eps_adam,
            epsilon_tol: None,
            w_d: train.weights.w_d,
            w_r: train.weights.w_r,
            w_b: train.weights.w_b,
            hidden_layers: net.hidden_layers,
            hidden_width: net.hidden_width,
            nx: solver.nx,
            nt: solver.nt,
            solver_tolerance: solver.tolerance,
            solver_max_iterations: solver.max_iterations,
            checkpoint_every: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl TestSettings {
    pub const KEYS: [&'static str; 17] = [
        "max_epochs",
        "log_every",
        "learning_rate",
        "beta1",
        "beta2",
        "eps_adam",
        "epsilon_tol",
        "w_d",
        "w_r",
        "w_b",
        "hidden_layers",
        "hidden_width",
        "nx",
        "nt",
        "solver_tolerance",
        "solver_max_iterations",
        "checkpoint_every",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "log_every" => self.log_every = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "eps_adam" => self.eps_adam = parse(key, value)?,
            "epsilon_tol" => self.epsilon_tol = Some(parse(key, value)?),
            "w_d" => self.w_d = parse(key, value)?,
            "w_r" => self.w_r = parse(key, value)?,
            "w_b" => self.w_b = parse(key, value)?,
            "hidden_layers" => self.hidden_layers = parse(key, value)?,
            "hidden_width" => self.hidden_width = parse(key, value)?,
            "nx" => self.nx = parse(key, value)?,
            "nt" => self.nt = Some(parse(key, value)?),
            "solver_tolerance" => self.solver_tolerance = parse(key, value)?,
            "solver_max_iterations" => self.solver_max_iterations = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn train_config(&self, spec: &ProblemSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            epsilon_tol: self.epsilon_tol.unwrap_or(spec.tolerance),
            max_epochs: self.max_epochs,
            log_every: self.log_every,
            seed,
            weights: LossWeights {
                w_d: self.w_d,
                w_r: self.w_r,
                w_b: self.w_b,
            },
        }
    }

    pub fn network_config(&self, spec: &ProblemSpec, seed: u64) -> NetworkConfig {
        NetworkConfig {
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            ..NetworkConfig::new(spec.output_dim(), seed)
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            nx: self.nx,
            nt: self.nt,
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub tests: Vec<ProblemId>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub emit_fields: bool,
    pub emit_checkpoints: bool,
    pub base: TestSettings,
    /// `(key, value)` overrides per test, in file order.
    pub overrides: BTreeMap<ProblemId, Vec<(String, String)>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tests: ProblemId::ALL.to_vec(),
            out_dir: PathBuf::from("results"),
            seed: 0,
            emit_fields: true,
            emit_checkpoints: true,
            base: TestSettings::default(),
            overrides: BTreeMap::new(),
        }
    }
}

pub fn parse_test_list(value: &str) -> Result<Vec<ProblemId>, CliError> {
    let mut tests = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: ProblemId = name.parse()?;
        if !tests.contains(&id) {
            tests.push(id);
        }
    }
    if tests.is_empty() {
        return Err(CliError::Config("no tests selected".into()));
    }
    Ok(tests)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "tests" => self.tests = parse_test_list(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "emit_fields" => self.emit_fields = parse(key, value)?,
            "emit_checkpoints" => self.emit_checkpoints = parse(key, value)?,
            _ => match key.split_once('.') {
                Some((test, sub)) => {
                    let id: ProblemId = test.parse()?;
                    // Validate now so errors point at the right line.
                    TestSettings::default().set(sub, value)?;
                    self.overrides
                        .entry(id)
                        .or_default()
                        .push((sub.to_string(), value.to_string()));
                }
                None => self.base.set(key, value)?,
            },
        }
        Ok(())
    }

    /// Base settings with the overrides for `id` applied.
    pub fn settings(&self, id: ProblemId) -> Result<TestSettings, CliError> {
        let mut s = self.base.clone();
        for (k, v) in self.overrides.get(&id).into_iter().flatten() {
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn spec(&self, id: ProblemId) -> ProblemSpec {
        make_problem(id)
    }

    /// The configuration as `key = value` lines that parse back to `self`.
    pub fn render(&self) -> String {
        let names: Vec<&str> = self.tests.iter().map(|t| t.as_str()).collect();
        let mut out = format!(
            "tests = {}\nout_dir = {}\nseed = {}\nemit_fields = {}\nemit_checkpoints = {}\n",
            names.join(", "),
            self.out_dir.display(),
            self.seed,
            self.emit_fields,
            self.emit_checkpoints
        );
        let b = &self.base;
        let opt = |v: Option<String>| v.unwrap_or_default();
        let values = [
            b.max_epochs.to_string(),
            b.log_every.to_string(),
            format!("{:?}", b.learning_rate),
            format!("{:?}", b.beta1),
            format!("{:?}", b.beta2),
            format!("{:?}", b.eps_adam),
            opt(b.epsilon_tol.map(|v| format!("{v:?}"))),
            format!("{:?}", b.w_d),
            format!("{:?}", b.w_r),
            format!("{:?}", b.w_b),
            b.hidden_layers.to_string(),
            b.hidden_width.to_string(),
            b.nx.to_string(),
            opt(b.nt.map(|v| v.to_string())),
            format!("{:?}", b.solver_tolerance),
            b.solver_max_iterations.to_string(),
            b.checkpoint_every.to_string(),
        ];
        for (k, v) in TestSettings::KEYS.iter().zip(values) {
            if v.is_empty() {
                out.push_str(&format!("# {k} unset\n"));
            } else {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        for (id, entries) in &self.overrides {
            for (k, v) in entries {
                out.push_str(&format!("{id}.{k} = {v}\n"));
            }
        }
        out
    }
}
