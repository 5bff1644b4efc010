//! Adam and the two training drivers: VQE energy minimization and
//! full-batch MSE training with validation-minimum model selection.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::RestrictedUnitary;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_tfim, TfimSpec};
use crate::partition::{PartitionLayout, PartitionedModel};
use crate::simulator::SubsystemCircuit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    0.1
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(lr: f64) -> Self {
        AdamConfig {
            learning_rate: lr,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::SlotMismatch {
                kind: "optimizer parameter",
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        if let Some(slot) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { slot });
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Pure form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    params: &[f64],
    grads: &[f64],
) -> Result<(Vec<f64>, AdamState)> {
    let mut next = state.clone();
    let mut p = params.to_vec();
    next.step(&mut p, grads)?;
    Ok((p, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Energy (VQE) or training MSE (supervised) at the step's parameters.
    pub loss: f64,
    pub val_loss: Option<f64>,
    pub grad_norm: f64,
    pub wall_time_s: f64,
    pub snapshot: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn push(&mut self, record: StepRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.step < record.step));
        self.records.push(record);
    }

    /// Deterministic CSV: `step,loss[,val_loss],grad_norm`. Wall time lives in
    /// [`timing_csv`](Self::timing_csv) so repeated runs compare byte for byte.
    pub fn to_csv(&self, loss_name: &str) -> String {
        let with_val = self.records.iter().any(|r| r.val_loss.is_some());
        let mut out = String::new();
        if with_val {
            let _ = writeln!(out, "step,{loss_name},val_{loss_name},grad_norm");
        } else {
            let _ = writeln!(out, "step,{loss_name},grad_norm");
        }
        for r in &self.records {
            if with_val {
                let val = r.val_loss.map_or(String::new(), |v| format!("{v:.17e}"));
                let _ = writeln!(
                    out,
                    "{},{:.17e},{},{:.17e}",
                    r.step, r.loss, val, r.grad_norm
                );
            } else {
                let _ = writeln!(out, "{},{:.17e},{:.17e}", r.step, r.loss, r.grad_norm);
            }
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("step,wall_time_s\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.6}", r.step, r.wall_time_s);
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Preset configuration: subsystem count and restricted-unitary
/// generators for a TFIM chain of `n` spins.
pub fn tfim_preset(n: usize) -> Option<(usize, Vec<&'static str>)> {
    let (s, gens): (usize, &[&str]) = match n {
        4 => (2, &["Z2 Y3", "Y1 Z4"]),
        6 => (2, &["Z3 Y4", "Y1 Z6"]),
        8 => (2, &["Z3 Y4", "Z4 Y5", "Z5 Y6", "Z7 Y8", "Y1 Z8", "Z1 Y2"]),
        10 => (2, &["Z4 Y5", "Z5 Y6", "Z6 Y7", "Z9 Y10", "Y1 Z10", "Z1 Y2"]),
        12 => (
            3,
            &[
                "Z3 Y4", "Z4 Y5", "Z5 Y6", "Z7 Y8", "Z8 Y9", "Z9 Y10", "Z11 Y12", "Y1 Z12", "Z1 Y2",
            ],
        ),
        16 => (
            4,
            &[
                "Z3 Y4", "Z4 Y5", "Z5 Y6", "Z7 Y8", "Z8 Y9", "Z9 Y10", "Z11 Y12", "Z12 Y13",
                "Z13 Y14", "Z15 Y16", "Y1 Z16", "Z1 Y2",
            ],
        ),
        _ => return None,
    };
    Some((s, gens.to_vec()))
}

/// VQE model for a TFIM chain: equal subsystems running the two-round
/// RY/CNOT-ladder ansatz, and `V` built from `generators`.
pub fn build_vqe_model<S: AsRef<str>>(
    spec: &TfimSpec,
    subsystems: usize,
    generators: &[S],
    ansatz_layers: usize,
) -> Result<PartitionedModel> {
    let h = build_tfim(spec)?;
    let layout = PartitionLayout::equal(spec.n, subsystems)?;
    let v = RestrictedUnitary::from_labels(spec.n, generators, vec![0.0; generators.len()])?;
    let observable = v.conjugate(&h, &layout)?;
    let circuits = (0..subsystems)
        .map(|s| SubsystemCircuit::hardware_efficient(layout.size(s), ansatz_layers))
        .collect::<Result<Vec<_>>>()?;
    let n_theta = circuits.iter().map(SubsystemCircuit::param_count).sum();
    PartitionedModel::new(
        circuits,
        observable,
        vec![0.0; n_theta],
        vec![0.0; generators.len()],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            steps: 200,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeOutcome {
    pub log: TrainLog,
    pub best_energy: f64,
    pub best_step: usize,
    pub best_params: Vec<f64>,
    pub final_energy: f64,
}

/// Uniform `[0, 2π)` initialization of every circuit angle and `V` angle.
pub fn init_uniform_angles(model: &mut PartitionedModel, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = (0..model.num_params())
        .map(|_| rng.random::<f64>() * TAU)
        .collect();
    model.set_params(&p)
}

/// Minimizes the model output over `(θ, c)` jointly with Adam, starting
/// from a seeded uniform initialization. Records `steps + 1` energies (the
/// last after the final update) and returns the best one seen.
pub fn run_vqe(model: &mut PartitionedModel, cfg: &VqeConfig) -> Result<VqeOutcome> {
    init_uniform_angles(model, cfg.seed)?;
    let mut params = model.params();
    let mut adam = AdamState::new(params.len(), cfg.adam);
    let mut log = TrainLog::default();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let start = Instant::now();
    for step in 0..=cfg.steps {
        let eval = model.evaluate(&[])?;
        let mut grads = eval.grad_theta;
        grads.extend(eval.grad_coeffs);
        if eval.value < best.0 {
            best = (eval.value, step, params.clone());
        }
        log.push(StepRecord {
            step,
            loss: eval.value,
            val_loss: None,
            grad_norm: norm(&grads),
            wall_time_s: start.elapsed().as_secs_f64(),
            snapshot: best.1,
        });
        if step == cfg.steps {
            break;
        }
        adam.step(&mut params, &grads)?;
        model.set_params(&params)?;
    }
    let final_energy = log.records.last().map_or(f64::NAN, |r| r.loss);
    model.set_params(&best.2)?;
    Ok(VqeOutcome {
        log,
        best_energy: best.0,
        best_step: best.1,
        best_params: best.2,
        final_energy,
    })
}

/// One supervised example: per-subsystem features and a regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<Vec<f64>>,
    pub target: f64,
}

/// Classical post-processing `g[f]` applied to the model output before the loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMap {
    #[default]
    Identity,
}

impl OutputMap {
    /// `(g(f), g'(f))`
    pub fn apply(self, f: f64) -> (f64, f64) {
        match self {
            OutputMap::Identity => (f, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisedConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Standard deviation of the zero-mean normal used for the coefficients.
    pub coeff_init_std: f64,
    #[serde(default)]
    pub output_map: OutputMap,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        SupervisedConfig {
            epochs: 400,
            adam: AdamConfig::default(),
            seed: 0,
            coeff_init_std: 0.1,
            output_map: OutputMap::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedOutcome {
    pub log: TrainLog,
    /// Epoch whose end-of-epoch parameters minimized validation MSE (0 = initial).
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub best_params: Vec<f64>,
    pub final_params: Vec<f64>,
}

/// θ uniform on `[0, 2π)`, coefficients normal with the configured spread.
pub fn init_supervised(model: &mut PartitionedModel, seed: u64, coeff_std: f64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..model.theta().len())
        .map(|_| rng.random::<f64>() * TAU)
        .collect();
    let normal = Normal::new(0.0, coeff_std)
        .map_err(|e| Error::InvalidArgument(format!("coefficient spread: {e}")))?;
    let coeffs: Vec<f64> = (0..model.coeffs().len())
        .map(|_| normal.sample(&mut rng))
        .collect();
    model.set_theta(&theta)?;
    model.set_coeffs(&coeffs)
}

/// Model outputs for a batch, in sample order.
pub fn predict(model: &PartitionedModel, samples: &[Sample], map: OutputMap) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| Ok(map.apply(model.forward(&s.features)?).0))
        .collect()
}

pub fn mse(outputs: &[f64], samples: &[Sample]) -> f64 {
    outputs
        .iter()
        .zip(samples)
        .map(|(f, s)| (f - s.target).powi(2))
        .sum::<f64>()
        / samples.len().max(1) as f64
}

/// Full-batch MSE and its gradient over `[θ, coefficients]`.
pub fn mse_and_gradient(
    model: &PartitionedModel,
    samples: &[Sample],
    map: OutputMap,
) -> Result<(f64, Vec<f64>)> {
    let n = samples.len().max(1) as f64;
    let per_sample: Vec<(f64, Vec<f64>)> = samples
        .par_iter()
        .map(|s| {
            let e = model.evaluate(&s.features)?;
            let (g, dg) = map.apply(e.value);
            let r = g - s.target;
            let scale = 2.0 * r * dg / n;
            let grad: Vec<f64> = e
                .grad_theta
                .iter()
                .chain(&e.grad_coeffs)
                .map(|d| scale * d)
                .collect();
            Ok((r * r / n, grad))
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for (l, g) in per_sample {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

/// Trains with full-batch Adam for `epochs` passes over `train` and returns
/// the parameters with minimum validation MSE. Record `e` holds the
/// training MSE of the pass (pre-update) and the validation MSE after it.
pub fn run_supervised(
    model: &mut PartitionedModel,
    train: &[Sample],
    validation: &[Sample],
    cfg: &SupervisedConfig,
) -> Result<SupervisedOutcome> {
    init_supervised(model, cfg.seed, cfg.coeff_init_std)?;
    let mut params = model.params();
    let mut adam = AdamState::new(params.len(), cfg.adam);
    let mut log = TrainLog::default();
    let start = Instant::now();

    let initial_val = mse(&predict(model, validation, cfg.output_map)?, validation);
    let mut best = (initial_val, 0usize, params.clone());
    let initial_train = mse(&predict(model, train, cfg.output_map)?, train);
    log.push(StepRecord {
        step: 0,
        loss: initial_train,
        val_loss: Some(initial_val),
        grad_norm: 0.0,
        wall_time_s: 0.0,
        snapshot: 0,
    });
    for epoch in 1..=cfg.epochs {
        let (train_loss, grads) = mse_and_gradient(model, train, cfg.output_map)?;
        adam.step(&mut params, &grads)?;
        model.set_params(&params)?;
        let val = mse(&predict(model, validation, cfg.output_map)?, validation);
        if val < best.0 {
            best = (val, epoch, params.clone());
        }
        log.push(StepRecord {
            step: epoch,
            loss: train_loss,
            val_loss: Some(val),
            grad_norm: norm(&grads),
            wall_time_s: start.elapsed().as_secs_f64(),
            snapshot: best.1,
        });
    }
    let final_params = params;
    model.set_params(&best.2)?;
    Ok(SupervisedOutcome {
        log,
        best_epoch: best.1,
        best_val_mse: best.0,
        best_params: best.2,
        final_params,
    })
}
