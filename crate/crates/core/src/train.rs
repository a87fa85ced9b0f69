//! Full-batch Adam on the network weights and `ν` together.

use std::io::Write;

use log::{debug, info};

use crate::error::{Error, Result};
use crate::loss::{loss_and_gradient, LossBreakdown, LossWeights};
use crate::network::{init_params, ModelParams, NetworkConfig, NetworkParams};
use crate::problems::ProblemSpec;
use crate::sampling::TrainingDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Training stops once the total loss drops below this.
    pub epsilon_tol: f64,
    pub max_epochs: usize,
    pub log_every: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

impl TrainConfig {
    /// Defaults with the tolerance of `spec`.
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        TrainConfig {
            epsilon_tol: spec.tolerance,
            ..TrainConfig::default()
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            epsilon_tol: 1e-7,
            max_epochs: 300_000,
            log_every: 100,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

/// First and second moment estimates of Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], config: &TrainConfig) -> Result<()> {
    let n = params.len();
    for (what, len) in [("Adam gradient", grads.len()), ("Adam moments", state.m.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps_adam);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    Cap,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::Cap => "cap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub nu: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub entries: Vec<HistoryEntry>,
    /// Number of parameter updates performed.
    pub epochs: usize,
    pub stop_reason: Option<StopReason>,
}

impl TrainHistory {
    pub fn nu_trajectory(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.nu).collect()
    }

    /// CSV with one row per logged epoch: the loss terms, total and `ν`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,{},total,nu", LossBreakdown::TERM_NAMES.join(","))?;
        for e in &self.entries {
            let terms: Vec<String> = e.loss.terms().iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{},{}", e.epoch, terms.join(","), e.loss.total, e.nu)?;
        }
        Ok(())
    }
}

/// Incremental trainer; [`train`] drives it to completion.
#[derive(Clone, Debug)]
pub struct Trainer {
    spec: ProblemSpec,
    dataset: TrainingDataset,
    config: TrainConfig,
    params: NetworkParams,
    model: ModelParams,
    adam: AdamState,
    history: TrainHistory,
    last_loss: Option<LossBreakdown>,
}

impl Trainer {
    /// Fresh network from `net_config` and `ν` at the problem's initial guess.
    pub fn new(
        spec: &ProblemSpec,
        dataset: &TrainingDataset,
        net_config: &NetworkConfig,
        config: &TrainConfig,
    ) -> Result<Self> {
        if net_config.output_dim != spec.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "network output channels",
                expected: spec.output_dim(),
                found: net_config.output_dim,
            });
        }
        let params = init_params(net_config)?;
        Ok(Trainer::from_state(spec, dataset, params, spec.initial_model(), config))
    }

    pub fn from_state(
        spec: &ProblemSpec,
        dataset: &TrainingDataset,
        params: NetworkParams,
        model: ModelParams,
        config: &TrainConfig,
    ) -> Self {
        let n = params.len() + ModelParams::LEARNABLE.len();
        Trainer {
            spec: spec.clone(),
            dataset: dataset.clone(),
            config: config.clone(),
            params,
            model,
            adam: AdamState::new(n),
            history: TrainHistory::default(),
            last_loss: None,
        }
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn epoch(&self) -> usize {
        self.history.epochs
    }

    /// Loss at the start of the most recent step.
    pub fn last_loss(&self) -> Option<LossBreakdown> {
        self.last_loss
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.history.stop_reason
    }

    fn diverged(&self, detail: String) -> Error {
        Error::Diverged {
            epoch: self.history.epochs,
            nu: self.model.nu,
            detail,
        }
    }

    /// Evaluates the loss at the current parameters, logs it when due, and
    /// either stops or takes one Adam step. Returns the stop reason once
    /// training is over; further calls are no-ops.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        if let Some(reason) = self.history.stop_reason {
            return Ok(Some(reason));
        }
        let epoch = self.history.epochs;
        let (loss, grad) = loss_and_gradient(
            &self.spec,
            &self.params,
            &self.model,
            &self.dataset,
            &self.config.weights,
        )
        .map_err(|e| match e {
            Error::NonFinite(what) => self.diverged(format!("non-finite {what}")),
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(self.diverged(format!("non-finite loss terms {loss:?}")));
        }
        self.last_loss = Some(loss);

        let stop = if loss.total < self.config.epsilon_tol {
            Some(StopReason::Tolerance)
        } else if epoch >= self.config.max_epochs {
            Some(StopReason::Cap)
        } else {
            None
        };
        if stop.is_some() || epoch.is_multiple_of(self.config.log_every.max(1)) {
            self.history.entries.push(HistoryEntry {
                epoch,
                loss,
                nu: self.model.nu,
            });
            debug!(
                "{} epoch {epoch}: total = {:.4e}, nu = {:.6}",
                self.spec.id, loss.total, self.model.nu
            );
        }
        if let Some(reason) = stop {
            self.history.stop_reason = Some(reason);
            info!(
                "{}: stopped by {} at epoch {epoch}, loss = {:.3e}, nu = {:.6}",
                self.spec.id,
                reason.as_str(),
                loss.total,
                self.model.nu
            );
            return Ok(Some(reason));
        }

        let mut flat = Vec::with_capacity(self.adam.m.len());
        flat.extend_from_slice(self.params.as_slice());
        flat.extend(self.model.learnable());
        let mut grads = grad.d_theta;
        grads.extend_from_slice(&grad.d_xi);
        adam_step(&mut self.adam, &mut flat, &grads, &self.config)?;
        let n = self.params.len();
        self.params.as_mut_slice().copy_from_slice(&flat[..n]);
        self.model.set_learnable(&flat[n..])?;
        if !self.model.nu.is_finite() {
            return Err(self.diverged("nu became non-finite".into()));
        }
        self.history.epochs += 1;
        Ok(None)
    }

    /// Runs until a stop condition, calling `observer` after every logged epoch.
    pub fn run(
        mut self,
        observer: &mut dyn FnMut(&HistoryEntry, &NetworkParams, &ModelParams) -> Result<()>,
    ) -> Result<TrainOutcome> {
        loop {
            let logged = self.history.entries.len();
            let stop = self.step()?;
            if self.history.entries.len() > logged {
                let entry = *self.history.entries.last().expect("entry just pushed");
                observer(&entry, &self.params, &self.model)?;
            }
            if stop.is_some() {
                break;
            }
        }
        Ok(TrainOutcome {
            params: self.params,
            model: self.model,
            history: self.history,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub model: ModelParams,
    pub history: TrainHistory,
}

pub fn train(
    spec: &ProblemSpec,
    dataset: &TrainingDataset,
    net_config: &NetworkConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    Trainer::new(spec, dataset, net_config, config)?.run(&mut |_, _, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut st, &mut p, &[0.0; 3], &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(1);
        let mut p = vec![0.0];
        adam_step(&mut st, &mut p, &[1.0], &cfg).unwrap();
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_scalar_quadratic() {
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(1);
        let mut p = vec![0.0];
        for step in 1..=6000 {
            let g = 2.0 * (p[0] - 3.0);
            adam_step(&mut st, &mut p, &[g], &cfg).unwrap();
            if step == 5000 {
                // Value from an independent scalar Adam run.
                assert!((p[0] - 2.9377290647153163).abs() < 1e-9, "{}", p[0]);
            }
        }
        assert!((p[0] - 3.0).abs() < 1e-2, "{}", p[0]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut st = AdamState::new(2);
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut st, &mut p, &[1.0], &TrainConfig::default()).is_err());
    }
}
