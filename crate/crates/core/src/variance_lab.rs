//! Gradient-variance scans over growing numbers of fixed-size subsystems,
//! and Monte Carlo checks of second moments of random-circuit expectations.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{FactoredObservable, TermCoefficient, TermSpec};
use crate::error::{Error, Result};
use crate::partition::{EvalStats, PartitionLayout, PartitionedModel};
use crate::pauli::{Pauli, PauliString};
use crate::simulator::{Angle, Gate, SubsystemCircuit};

/// How the `d_{ijss'}` coefficients of the scan observable are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientModel {
    Ones,
    /// Fresh zero-mean normal draws per trial.
    Normal {
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScanSpec {
    pub subsystem_qubits: usize,
    pub subsystem_counts: Vec<usize>,
    pub trials: usize,
    /// Rounds of the RY + CNOT-ladder ansatz per subsystem.
    pub layers: usize,
    pub coefficients: CoefficientModel,
    pub seed: u64,
}

impl Default for VarianceScanSpec {
    fn default() -> Self {
        VarianceScanSpec {
            subsystem_qubits: 8,
            subsystem_counts: (2..=8).collect(),
            trials: 20,
            layers: 2,
            coefficients: CoefficientModel::Ones,
            seed: 0,
        }
    }
}

impl VarianceScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::InvalidArgument(
                "variance needs at least 2 trials".into(),
            ));
        }
        if self.subsystem_qubits == 0 || self.subsystem_counts.iter().any(|&s| s < 2) {
            return Err(Error::InvalidArgument(
                "scan needs non-empty subsystems and at least 2 of them".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n_qubits: usize,
    pub subsystems: usize,
    pub mean: f64,
    pub variance: f64,
    pub trials: usize,
    pub seed: u64,
    /// Subsystem circuit executions per trial.
    pub circuit_runs: usize,
    /// Subsystem expectation values per trial.
    pub expectations: usize,
}

/// Unbiased sample mean and variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// `Σ_{s<s'} Σ_{i,j} d_{ijss'} X_i^{(s)} X_j^{(s')}` with one coefficient slot per term.
pub fn scan_observable(subsystems: usize, qubits: usize) -> Result<FactoredObservable> {
    let layout = PartitionLayout::equal(subsystems * qubits, subsystems)?;
    let mut specs = Vec::new();
    for s1 in 0..subsystems {
        for s2 in s1 + 1..subsystems {
            for i in 0..qubits {
                for j in 0..qubits {
                    let mut factors = vec![PauliString::identity(qubits); subsystems];
                    factors[s1] = PauliString::single(qubits, i, Pauli::X)?;
                    factors[s2] = PauliString::single(qubits, j, Pauli::X)?;
                    specs.push(TermSpec {
                        factors,
                        measured_sites: None,
                        coefficient: TermCoefficient::Param { slot: specs.len() },
                    });
                }
            }
        }
    }
    let len = specs.len();
    FactoredObservable::new(layout, specs, len)
}

fn trial_rng(seed: u64, subsystems: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((subsystems as u64) << 32) | trial as u64);
    rng
}

fn draw_coefficients(
    model: CoefficientModel,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    match model {
        CoefficientModel::Ones => Ok(vec![1.0; len]),
        CoefficientModel::Normal { std } => {
            let normal = Normal::new(0.0, std)
                .map_err(|e| Error::InvalidArgument(format!("coefficient spread: {e}")))?;
            Ok((0..len).map(|_| normal.sample(rng)).collect())
        }
    }
}

/// Gradient of the scan observable with respect to parameter 0 of
/// subsystem 0, for one random draw of `θ` (and `d`).
pub fn sample_gradient(
    spec: &VarianceScanSpec,
    obs: &FactoredObservable,
    trial: usize,
) -> Result<(f64, EvalStats)> {
    let subsystems = obs.layout().num_subsystems();
    let mut rng = trial_rng(spec.seed, subsystems, trial);
    let circuit = SubsystemCircuit::hardware_efficient(spec.subsystem_qubits, spec.layers)?;
    let n_theta = circuit.param_count() * subsystems;
    let theta: Vec<f64> = (0..n_theta).map(|_| rng.random::<f64>() * TAU).collect();
    let d = draw_coefficients(spec.coefficients, obs.coefficient_len(), &mut rng)?;
    let model = PartitionedModel::new(vec![circuit; subsystems], obs.clone(), theta, d)?;
    model.grad_theta_single(&[], 0, 0)
}

pub fn run_variance_point(spec: &VarianceScanSpec, subsystems: usize) -> Result<VariancePoint> {
    let obs = scan_observable(subsystems, spec.subsystem_qubits)?;
    let samples: Vec<(f64, EvalStats)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| sample_gradient(spec, &obs, t))
        .collect::<Result<_>>()?;
    let grads: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let (mean, variance) = mean_and_variance(&grads);
    let stats = samples[0].1;
    Ok(VariancePoint {
        n_qubits: subsystems * spec.subsystem_qubits,
        subsystems,
        mean,
        variance,
        trials: spec.trials,
        seed: spec.seed,
        circuit_runs: stats.circuit_runs,
        expectations: stats.expectations,
    })
}

pub fn run_variance_scan(spec: &VarianceScanSpec) -> Result<Vec<VariancePoint>> {
    spec.validate()?;
    spec.subsystem_counts
        .iter()
        .map(|&s| run_variance_point(spec, s))
        .collect()
}

pub fn variance_csv(points: &[VariancePoint]) -> String {
    let mut out =
        String::from("n_qubits,subsystems,variance,mean,trials,seed,circuit_runs,expectations\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.17e},{:.17e},{},{},{},{}",
            p.n_qubits,
            p.subsystems,
            p.variance,
            p.mean,
            p.trials,
            p.seed,
            p.circuit_runs,
            p.expectations
        );
    }
    out
}

/// Least-squares slope of `log₂(variance)` against subsystem count.
pub fn log2_slope(points: &[VariancePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.subsystems as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.variance.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Monte Carlo moments of one scan subsystem: `Σᵢ E[Rᵢ²]` for the
/// derivatives of `⟨Xᵢ⟩` with respect to parameter 0, and `Σⱼ E[Bⱼ²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemMoments {
    pub sum_r2: f64,
    pub sum_b2: f64,
    pub samples: usize,
}

pub fn subsystem_moments(
    qubits: usize,
    layers: usize,
    samples: usize,
    seed: u64,
) -> Result<SubsystemMoments> {
    let circuit = SubsystemCircuit::hardware_efficient(qubits, layers)?;
    let ops: Vec<PauliString> = (0..qubits)
        .map(|i| PauliString::single(qubits, i, Pauli::X))
        .collect::<Result<_>>()?;
    let per: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let theta: Vec<f64> = (0..circuit.param_count())
                .map(|_| rng.random::<f64>() * TAU)
                .collect();
            let state = circuit.run(&theta, &[])?;
            let mut b2 = 0.0;
            let mut r2 = 0.0;
            for w in &ops {
                b2 += state.expectation(w)?.powi(2);
                r2 += circuit.param_shift_grad(&theta, &[], w, 0)?.powi(2);
            }
            Ok((r2, b2))
        })
        .collect::<Result<_>>()?;
    let n = samples as f64;
    Ok(SubsystemMoments {
        sum_r2: per.iter().map(|p| p.0).sum::<f64>() / n,
        sum_b2: per.iter().map(|p| p.1).sum::<f64>() / n,
        samples,
    })
}

/// `σ_d² (S−1) Σᵢ E[Rᵢ²] Σⱼ E[Bⱼ²]`: the gradient variance for independent
/// zero-mean coefficients, built from measured single-subsystem moments.
pub fn predicted_variance(moments: &SubsystemMoments, subsystems: usize, std: f64) -> f64 {
    std * std * (subsystems as f64 - 1.0) * moments.sum_r2 * moments.sum_b2
}

/// `depth` layers of (RY, RZ on every qubit; open CNOT ladder) with one
/// trainable slot per rotation.
pub fn random_circuit(qubits: usize, depth: usize) -> Result<SubsystemCircuit> {
    let mut c = SubsystemCircuit::new(qubits);
    let mut slot = 0;
    for _ in 0..depth {
        for q in 0..qubits {
            c.push(Gate::Ry {
                target: q,
                angle: Angle::Param(slot),
            })?;
            c.push(Gate::Rz {
                target: q,
                angle: Angle::Param(slot + 1),
            })?;
            slot += 2;
        }
        c = c.cnot_ladder(false)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarReport {
    pub qubits: usize,
    pub depth: usize,
    pub samples: usize,
    pub dim: usize,
    /// `1/(d+1)`
    pub expected_b2: f64,
    pub mean_b2: f64,
    pub stderr_b2: f64,
    pub mean_bibj: f64,
    pub stderr_bibj: f64,
    pub identity_mean: f64,
    pub identity_variance: f64,
}

impl HaarReport {
    pub fn b2_within(&self, sigmas: f64) -> bool {
        (self.mean_b2 - self.expected_b2).abs() <= sigmas * self.stderr_b2
    }

    pub fn bibj_within(&self, sigmas: f64) -> bool {
        self.mean_bibj.abs() <= sigmas * self.stderr_bibj
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,operator,value,stderr,expected\n");
        let _ = writeln!(
            out,
            "mean_b2,Z1,{:.17e},{:.17e},{:.17e}",
            self.mean_b2, self.stderr_b2, self.expected_b2
        );
        let _ = writeln!(
            out,
            "mean_bibj,X1*Z1,{:.17e},{:.17e},0",
            self.mean_bibj, self.stderr_bibj
        );
        let _ = writeln!(out, "mean_b,I,{:.17e},0,1", self.identity_mean);
        let _ = writeln!(out, "variance_b,I,{:.17e},0,0", self.identity_variance);
        out
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_and_variance(xs);
    (m, (v / xs.len() as f64).sqrt())
}

/// Samples `B_W = ⟨0|U†WU|0⟩` over random circuits for `W = Z₁`, the pair
/// `(X₁, Z₁)` and the identity.
pub fn haar_moment_check(
    qubits: usize,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<HaarReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "moment check needs at least 2 samples".into(),
        ));
    }
    let circuit = random_circuit(qubits, depth)?;
    let z = PauliString::single(qubits, 0, Pauli::Z)?;
    let x = PauliString::single(qubits, 0, Pauli::X)?;
    let id = PauliString::identity(qubits);
    let draws: Vec<(f64, f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let theta: Vec<f64> = (0..circuit.param_count())
                .map(|_| rng.random::<f64>() * TAU)
                .collect();
            let state = circuit.run(&theta, &[])?;
            let bz = state.expectation(&z)?;
            let bx = state.expectation(&x)?;
            Ok((bz * bz, bx * bz, state.expectation(&id)?))
        })
        .collect::<Result<_>>()?;
    let b2: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let bibj: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let ident: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let (mean_b2, stderr_b2) = mean_stderr(&b2);
    let (mean_bibj, stderr_bibj) = mean_stderr(&bibj);
    let (identity_mean, identity_variance) = mean_and_variance(&ident);
    let dim = 1usize << qubits;
    Ok(HaarReport {
        qubits,
        depth,
        samples,
        dim,
        expected_b2: 1.0 / (dim as f64 + 1.0),
        mean_b2,
        stderr_b2,
        mean_bibj,
        stderr_bibj,
        identity_mean,
        identity_variance,
    })
}
