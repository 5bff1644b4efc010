//! Partitioned model evaluation: `f = Σₚ dₚ Πₛ ⟨0|Uₛ† Wₛᵖ Uₛ|0⟩` and its
//! gradients with respect to circuit parameters and coefficients.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{FactoredObservable, TermCoefficient};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::simulator::SubsystemCircuit;

/// Largest imaginary residue tolerated in a model output.
pub const OUTPUT_IMAG_TOLERANCE: f64 = 1e-8;

/// Assignment of global qubits to disjoint subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionLayout {
    blocks: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    locate: Vec<(usize, usize)>,
}

impl PartitionLayout {
    /// Arbitrary blocks of global qubit indices (0-based); within a block the
    /// listed order defines local qubit numbering.
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        if n == 0 || blocks.iter().any(Vec::is_empty) {
            return Err(Error::InvalidLayout("empty subsystem".into()));
        }
        let mut locate = vec![(usize::MAX, usize::MAX); n];
        for (s, block) in blocks.iter().enumerate() {
            for (local, &q) in block.iter().enumerate() {
                if q >= n {
                    return Err(Error::InvalidLayout(format!("qubit {q} outside 0..{n}")));
                }
                if locate[q].0 != usize::MAX {
                    return Err(Error::InvalidLayout(format!("qubit {q} assigned twice")));
                }
                locate[q] = (s, local);
            }
        }
        let sizes = blocks.iter().map(Vec::len).collect();
        Ok(PartitionLayout {
            blocks,
            sizes,
            locate,
        })
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&len| {
                let b: Vec<usize> = (start..start + len).collect();
                start += len;
                b
            })
            .collect();
        Self::from_blocks(blocks)
    }

    /// `subsystems` equal consecutive blocks of `n / subsystems` qubits.
    pub fn equal(n: usize, subsystems: usize) -> Result<Self> {
        if subsystems == 0 || !n.is_multiple_of(subsystems) {
            return Err(Error::InvalidLayout(format!(
                "{n} qubits do not split into {subsystems} equal subsystems"
            )));
        }
        Self::contiguous(&vec![n / subsystems; subsystems])
    }

    pub fn n_qubits(&self) -> usize {
        self.locate.len()
    }

    pub fn num_subsystems(&self) -> usize {
        self.blocks.len()
    }

    pub fn size(&self, s: usize) -> usize {
        self.sizes[s]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `(subsystem, local qubit)` of a global qubit.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        self.locate[global]
    }

    pub fn global(&self, s: usize, local: usize) -> usize {
        self.blocks[s][local]
    }
}

/// Cache of subsystem expectation values keyed by (subsystem, operator,
/// hash of the subsystem's parameter and data values).
#[derive(Debug, Default, Clone)]
pub struct EvaluationCache {
    values: HashMap<(usize, PauliString, u64), f64>,
    hits: usize,
    misses: usize,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }
}

fn input_hash(params: &[f64], data: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    params.len().hash(&mut h);
    for v in params.iter().chain(data) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Counts of what an evaluation actually simulated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    pub circuit_runs: usize,
    pub expectations: usize,
}

impl std::ops::AddAssign for EvalStats {
    fn add_assign(&mut self, rhs: Self) {
        self.circuit_runs += rhs.circuit_runs;
        self.expectations += rhs.expectations;
    }
}

/// Output and (optionally) full gradient of one model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Derivatives over the concatenated circuit parameters.
    pub grad_theta: Vec<f64>,
    /// Derivatives over the coefficient vector (angles or `d`).
    pub grad_coeffs: Vec<f64>,
    pub stats: EvalStats,
}

/// Measurement accounting for one model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementBudget {
    /// Distinct `(subsystem, measured sites, operator)` measurements. An
    /// identity factor counts when its term names a measurement site.
    pub unique_expectations: usize,
    /// Distinct non-identity `(subsystem, operator)` pairs actually simulated.
    pub simulated_expectations: usize,
    pub terms: usize,
    /// Terms after tree expansion (equals `terms` for numeric coefficients).
    pub expanded_terms: usize,
    pub coefficients: usize,
}

/// Layout, per-subsystem circuits, a factored observable and the trainable
/// parameters `θ` (all subsystems, concatenated) and coefficients.
#[derive(Debug, Clone)]
pub struct PartitionedModel {
    circuits: Vec<SubsystemCircuit>,
    observable: FactoredObservable,
    theta: Vec<f64>,
    coeffs: Vec<f64>,
    offsets: Vec<usize>,
}

impl PartitionedModel {
    pub fn new(
        circuits: Vec<SubsystemCircuit>,
        observable: FactoredObservable,
        theta: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let layout = observable.layout();
        if circuits.len() != layout.num_subsystems() {
            return Err(Error::InvalidLayout(format!(
                "{} circuits for {} subsystems",
                circuits.len(),
                layout.num_subsystems()
            )));
        }
        let mut offsets = Vec::with_capacity(circuits.len() + 1);
        offsets.push(0);
        for (s, c) in circuits.iter().enumerate() {
            if c.n_qubits() != layout.size(s) {
                return Err(Error::DimensionMismatch {
                    left: c.n_qubits(),
                    right: layout.size(s),
                });
            }
            offsets.push(offsets[s] + c.param_count());
        }
        if theta.len() != offsets[circuits.len()] {
            return Err(Error::SlotMismatch {
                kind: "circuit parameter",
                expected: offsets[circuits.len()],
                got: theta.len(),
            });
        }
        if coeffs.len() != observable.coefficient_len() {
            return Err(Error::SlotMismatch {
                kind: "coefficient",
                expected: observable.coefficient_len(),
                got: coeffs.len(),
            });
        }
        Ok(PartitionedModel {
            circuits,
            observable,
            theta,
            coeffs,
            offsets,
        })
    }

    pub fn layout(&self) -> &crate::partition::PartitionLayout {
        self.observable.layout()
    }

    pub fn circuits(&self) -> &[SubsystemCircuit] {
        &self.circuits
    }

    pub fn observable(&self) -> &FactoredObservable {
        &self.observable
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Slice of `θ` belonging to subsystem `s`.
    pub fn subsystem_theta(&self, s: usize) -> &[f64] {
        &self.theta[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Offset of subsystem `s`'s first parameter in `θ`.
    pub fn theta_offset(&self, s: usize) -> usize {
        self.offsets[s]
    }

    pub fn num_params(&self) -> usize {
        self.theta.len() + self.coeffs.len()
    }

    /// `[θ, coefficients]` concatenated.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.theta.clone();
        p.extend_from_slice(&self.coeffs);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::SlotMismatch {
                kind: "model parameter",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let (t, c) = params.split_at(self.theta.len());
        self.theta.copy_from_slice(t);
        self.coeffs.copy_from_slice(c);
        Ok(())
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::SlotMismatch {
                kind: "circuit parameter",
                expected: self.theta.len(),
                got: theta.len(),
            });
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn set_coeffs(&mut self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::SlotMismatch {
                kind: "coefficient",
                expected: self.coeffs.len(),
                got: coeffs.len(),
            });
        }
        self.coeffs.copy_from_slice(coeffs);
        Ok(())
    }

    fn subsystem_data<'a>(&self, data: &'a [Vec<f64>], s: usize) -> Result<&'a [f64]> {
        if data.is_empty() {
            return Ok(&[]);
        }
        if data.len() != self.circuits.len() {
            return Err(Error::SlotMismatch {
                kind: "subsystem feature vector",
                expected: self.circuits.len(),
                got: data.len(),
            });
        }
        Ok(&data[s])
    }

    /// Pool expectations `B[s][k]` for every subsystem.
    fn pool_values(
        &self,
        data: &[Vec<f64>],
        cache: Option<&mut EvaluationCache>,
    ) -> Result<(Vec<Vec<f64>>, EvalStats)> {
        let s_count = self.circuits.len();
        let inputs: Vec<(&[f64], &[f64])> = (0..s_count)
            .map(|s| Ok((self.subsystem_theta(s), self.subsystem_data(data, s)?)))
            .collect::<Result<_>>()?;
        let hashes: Vec<u64> = inputs.iter().map(|(p, d)| input_hash(p, d)).collect();

        let mut values: Vec<Option<Vec<f64>>> = vec![None; s_count];
        if let Some(cache) = cache.as_deref() {
            for s in 0..s_count {
                let pool = self.observable.pool(s);
                let hit: Option<Vec<f64>> = pool
                    .iter()
                    .map(|w| cache.values.get(&(s, w.clone(), hashes[s])).copied())
                    .collect();
                values[s] = hit;
            }
        }
        let computed: Vec<(usize, Vec<f64>, EvalStats)> = (0..s_count)
            .into_par_iter()
            .filter(|&s| values[s].is_none())
            .map(|s| {
                let pool = self.observable.pool(s);
                if pool.is_empty() {
                    return Ok((s, Vec::new(), EvalStats::default()));
                }
                let (p, d) = inputs[s];
                let state = self.circuits[s].run(p, d)?;
                let vals = pool
                    .iter()
                    .map(|w| state.expectation(w))
                    .collect::<Result<Vec<_>>>()?;
                let stats = EvalStats {
                    circuit_runs: 1,
                    expectations: pool.len(),
                };
                Ok((s, vals, stats))
            })
            .collect::<Result<_>>()?;

        let mut stats = EvalStats::default();
        let mut cache = cache;
        if let Some(c) = cache.as_deref_mut() {
            c.hits += values.iter().filter(|v| v.is_some()).count();
            c.misses += computed.len();
        }
        for (s, vals, st) in computed {
            stats += st;
            if let Some(c) = cache.as_deref_mut() {
                for (w, &v) in self.observable.pool(s).iter().zip(&vals) {
                    c.values.insert((s, w.clone(), hashes[s]), v);
                }
            }
            values[s] = Some(vals);
        }
        Ok((values.into_iter().map(Option::unwrap).collect(), stats))
    }

    fn term_product(
        &self,
        b: &[Vec<f64>],
        pool_index: &[Option<usize>],
        skip: Option<usize>,
    ) -> f64 {
        let mut prod = 1.0;
        for (s, idx) in pool_index.iter().enumerate() {
            if Some(s) == skip {
                continue;
            }
            if let Some(k) = idx {
                prod *= b[s][*k];
            }
        }
        prod
    }

    fn output_from(&self, b: &[Vec<f64>]) -> Result<f64> {
        let mut total = Complex64::new(0.0, 0.0);
        for t in self.observable.terms() {
            total += t.coefficient.eval(&self.coeffs) * self.term_product(b, &t.pool_index, None);
        }
        if total.im.abs() > OUTPUT_IMAG_TOLERANCE {
            return Err(Error::ComplexOutput {
                residue: total.im.abs(),
            });
        }
        Ok(total.re)
    }

    /// Model output for one data sample (`data` empty when the circuits take none).
    pub fn forward(&self, data: &[Vec<f64>]) -> Result<f64> {
        let (b, _) = self.pool_values(data, None)?;
        self.output_from(&b)
    }

    pub fn forward_cached(&self, data: &[Vec<f64>], cache: &mut EvaluationCache) -> Result<f64> {
        let (b, _) = self.pool_values(data, Some(cache))?;
        self.output_from(&b)
    }

    pub fn grad_theta(&self, data: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.evaluate(data)?.grad_theta)
    }

    pub fn grad_coeffs(&self, data: &[Vec<f64>]) -> Result<Vec<f64>> {
        let (b, _) = self.pool_values(data, None)?;
        self.coeff_gradient(&b)
    }

    /// Per-operator weights `Σ_{p: Wq = op} dₚ Π_{s≠q} B` for subsystem `q`.
    fn effective_weights(
        &self,
        b: &[Vec<f64>],
        q: usize,
        coeff_values: &[Complex64],
    ) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.observable.pool(q).len()];
        for (t, &d) in self.observable.terms().iter().zip(coeff_values) {
            if let Some(k) = t.pool_index[q] {
                w[k] += d * self.term_product(b, &t.pool_index, Some(q));
            }
        }
        w
    }

    /// Parameter-shift derivatives of every pool expectation of subsystem `q`
    /// with respect to its local parameter `slot`.
    fn shifted_pool_derivatives(
        &self,
        data: &[Vec<f64>],
        q: usize,
        slot: usize,
    ) -> Result<(Vec<f64>, EvalStats)> {
        let pool = self.observable.pool(q);
        let circuit = &self.circuits[q];
        let states =
            circuit.shifted_states(self.subsystem_theta(q), self.subsystem_data(data, q)?, slot)?;
        let mut d = vec![0.0; pool.len()];
        let mut stats = EvalStats::default();
        for (plus, minus) in &states {
            stats.circuit_runs += 2;
            stats.expectations += 2 * pool.len();
            for (k, w) in pool.iter().enumerate() {
                d[k] += 0.5 * (plus.expectation(w)? - minus.expectation(w)?);
            }
        }
        Ok((d, stats))
    }

    fn theta_gradient(
        &self,
        data: &[Vec<f64>],
        b: &[Vec<f64>],
        coeff_values: &[Complex64],
    ) -> Result<(Vec<f64>, EvalStats)> {
        let per_subsystem: Vec<(Vec<f64>, EvalStats)> = (0..self.circuits.len())
            .into_par_iter()
            .map(|q| {
                let n_params = self.circuits[q].param_count();
                let mut grads = vec![0.0; n_params];
                let mut stats = EvalStats::default();
                if self.observable.pool(q).is_empty() {
                    return Ok((grads, stats));
                }
                let weights = self.effective_weights(b, q, coeff_values);
                let pool = self.observable.pool(q);
                let mut acc = vec![Complex64::new(0.0, 0.0); n_params];
                self.circuits[q].for_each_shift(
                    self.subsystem_theta(q),
                    self.subsystem_data(data, q)?,
                    |slot, plus, minus| {
                        stats.circuit_runs += 2;
                        stats.expectations += 2 * pool.len();
                        for (w, op) in weights.iter().zip(pool) {
                            acc[slot] +=
                                w * (0.5 * (plus.expectation(op)? - minus.expectation(op)?));
                        }
                        Ok(())
                    },
                )?;
                for (g, total) in grads.iter_mut().zip(acc) {
                    if total.im.abs() > OUTPUT_IMAG_TOLERANCE {
                        return Err(Error::ComplexOutput {
                            residue: total.im.abs(),
                        });
                    }
                    *g = total.re;
                }
                Ok((grads, stats))
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.theta.len());
        let mut stats = EvalStats::default();
        for (g, st) in per_subsystem {
            out.extend(g);
            stats += st;
        }
        Ok((out, stats))
    }

    fn coeff_gradient(&self, b: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        for t in self.observable.terms() {
            let prod = self.term_product(b, &t.pool_index, None);
            match &t.coefficient {
                TermCoefficient::Constant { .. } => {}
                TermCoefficient::Param { slot } => g[*slot] += prod,
                TermCoefficient::Trees { trees } => {
                    for wt in trees {
                        for &(i, _) in wt.tree.factors() {
                            g[i] += wt.weight * wt.tree.grad(&self.coeffs, i) * prod;
                        }
                    }
                }
            }
        }
        g.into_iter()
            .map(|z| {
                if z.im.abs() > OUTPUT_IMAG_TOLERANCE {
                    Err(Error::ComplexOutput {
                        residue: z.im.abs(),
                    })
                } else {
                    Ok(z.re)
                }
            })
            .collect()
    }

    /// Output plus full gradient, sharing one forward pass.
    pub fn evaluate(&self, data: &[Vec<f64>]) -> Result<Evaluation> {
        let (b, mut stats) = self.pool_values(data, None)?;
        let value = self.output_from(&b)?;
        let coeff_values: Vec<Complex64> = self
            .observable
            .terms()
            .iter()
            .map(|t| t.coefficient.eval(&self.coeffs))
            .collect();
        let (grad_theta, st) = self.theta_gradient(data, &b, &coeff_values)?;
        stats += st;
        let grad_coeffs = self.coeff_gradient(&b)?;
        Ok(Evaluation {
            value,
            grad_theta,
            grad_coeffs,
            stats,
        })
    }

    /// Derivative with respect to one local parameter of one subsystem.
    pub fn grad_theta_single(
        &self,
        data: &[Vec<f64>],
        q: usize,
        slot: usize,
    ) -> Result<(f64, EvalStats)> {
        let (b, mut stats) = self.pool_values(data, None)?;
        let coeff_values: Vec<Complex64> = self
            .observable
            .terms()
            .iter()
            .map(|t| t.coefficient.eval(&self.coeffs))
            .collect();
        if self.observable.pool(q).is_empty() {
            return Ok((0.0, stats));
        }
        let weights = self.effective_weights(&b, q, &coeff_values);
        let (dpool, st) = self.shifted_pool_derivatives(data, q, slot)?;
        stats += st;
        let total: Complex64 = weights.iter().zip(&dpool).map(|(w, d)| w * d).sum();
        Ok((total.re, stats))
    }

    /// Expectations of every pool operator, ranked by magnitude (largest first).
    pub fn ranked_expectations(&self, data: &[Vec<f64>]) -> Result<Vec<(usize, PauliString, f64)>> {
        let (b, _) = self.pool_values(data, None)?;
        let mut out: Vec<(usize, PauliString, f64)> = b
            .iter()
            .enumerate()
            .flat_map(|(s, vals)| {
                self.observable
                    .pool(s)
                    .iter()
                    .zip(vals)
                    .map(move |(w, &v)| (s, w.clone(), v))
            })
            .collect();
        out.sort_by(|a, b| {
            b.2.abs()
                .total_cmp(&a.2.abs())
                .then_with(|| (a.0, &a.1).cmp(&(b.0, &b.1)))
        });
        Ok(out)
    }

    pub fn measurement_budget(&self) -> MeasurementBudget {
        measurement_budget(&self.observable)
    }
}

/// Measurement counts for a factored observable.
pub fn measurement_budget(obs: &FactoredObservable) -> MeasurementBudget {
    let mut unique: BTreeSet<(usize, u64, PauliString)> = BTreeSet::new();
    for t in obs.terms() {
        for (s, (f, &sites)) in t.factors.iter().zip(&t.measured_sites).enumerate() {
            if sites != 0 || !f.is_identity() {
                unique.insert((s, sites, f.clone()));
            }
        }
    }
    let simulated = (0..obs.layout().num_subsystems())
        .map(|s| obs.pool(s).len())
        .sum();
    MeasurementBudget {
        unique_expectations: unique.len(),
        simulated_expectations: simulated,
        terms: obs.len(),
        expanded_terms: obs.expanded_len(),
        coefficients: obs.coefficient_len(),
    }
}
