//! Restricted global unitaries `V = Π (cos cᵢ I + i sin cᵢ Pᵢ)` and the
//! symbolic expansion of `V† M V` into a partition-factored observable.
//!
//! Conjugating a Pauli string `Q` by one barred factor gives
//!
//! ```text
//! (c − i s P) Q (c + i s P) = c² Q + i c s QP − i c s PQ + s² PQP
//! ```
//!
//! and collapses back to `Q` when `[Q, P] = 0`. Every expanded term keeps
//! its coefficient as a product of `cos²`, `±i cos sin`, `sin²` factors so
//! both the value and the angle derivatives stay exact.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionLayout;
use crate::pauli::{Observable, PauliString, Phase};

pub const DEFAULT_TERM_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrigKind {
    Cos2,
    PlusICosSin,
    MinusICosSin,
    Sin2,
    Absent,
}

impl TrigKind {
    pub fn value(self, angle: f64) -> Complex64 {
        let (s, c) = angle.sin_cos();
        match self {
            TrigKind::Cos2 => Complex64::new(c * c, 0.0),
            TrigKind::PlusICosSin => Complex64::new(0.0, c * s),
            TrigKind::MinusICosSin => Complex64::new(0.0, -c * s),
            TrigKind::Sin2 => Complex64::new(s * s, 0.0),
            TrigKind::Absent => Complex64::new(1.0, 0.0),
        }
    }

    pub fn derivative(self, angle: f64) -> Complex64 {
        let (s, c) = angle.sin_cos();
        match self {
            TrigKind::Cos2 => Complex64::new(-2.0 * c * s, 0.0),
            TrigKind::PlusICosSin => Complex64::new(0.0, c * c - s * s),
            TrigKind::MinusICosSin => Complex64::new(0.0, s * s - c * c),
            TrigKind::Sin2 => Complex64::new(2.0 * c * s, 0.0),
            TrigKind::Absent => Complex64::new(0.0, 0.0),
        }
    }
}

/// Symbolic coefficient `base_phase · Π fᵢ(cᵢ)` over the retained factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoefficientTree {
    /// `(factor index, kind)`, strictly increasing in index; never `Absent`.
    factors: Vec<(usize, TrigKind)>,
    base_phase: Phase,
}

impl CoefficientTree {
    pub fn constant(base_phase: Phase) -> Self {
        CoefficientTree {
            factors: Vec::new(),
            base_phase,
        }
    }

    /// Builds a tree from `(index, kind)` pairs; `Absent` entries are skipped.
    pub fn new(mut factors: Vec<(usize, TrigKind)>, base_phase: Phase) -> Result<Self> {
        factors.retain(|&(_, k)| k != TrigKind::Absent);
        factors.sort_by_key(|&(i, _)| i);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(
                "coefficient tree lists a factor index twice".into(),
            ));
        }
        Ok(CoefficientTree {
            factors,
            base_phase,
        })
    }

    pub fn factors(&self) -> &[(usize, TrigKind)] {
        &self.factors
    }

    pub fn base_phase(&self) -> Phase {
        self.base_phase
    }

    pub fn kind(&self, index: usize) -> TrigKind {
        self.factors
            .iter()
            .find(|&&(i, _)| i == index)
            .map_or(TrigKind::Absent, |&(_, k)| k)
    }

    /// Largest referenced factor index, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.factors.last().map(|&(i, _)| i)
    }

    fn extended(&self, index: usize, kind: TrigKind, phase: Phase) -> Self {
        let mut factors = self.factors.clone();
        debug_assert!(factors.last().is_none_or(|&(i, _)| i < index));
        factors.push((index, kind));
        CoefficientTree {
            factors,
            base_phase: self.base_phase * phase,
        }
    }

    fn with_phase(mut self, phase: Phase) -> Self {
        self.base_phase = self.base_phase * phase;
        self
    }

    /// Evaluates the coefficient. `angles` must cover every retained index.
    pub fn eval(&self, angles: &[f64]) -> Complex64 {
        self.factors
            .iter()
            .fold(self.base_phase.to_complex(), |acc, &(i, k)| {
                acc * k.value(angles[i])
            })
    }

    /// Exact derivative with respect to `angles[index]`; zero when the index
    /// is not retained.
    pub fn grad(&self, angles: &[f64], index: usize) -> Complex64 {
        let mut acc = self.base_phase.to_complex();
        let mut found = false;
        for &(i, k) in &self.factors {
            if i == index {
                acc *= k.derivative(angles[i]);
                found = true;
            } else {
                acc *= k.value(angles[i]);
            }
        }
        if found {
            acc
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTree {
    pub weight: Complex64,
    pub tree: CoefficientTree,
}

/// Where a factored term's coefficient comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermCoefficient {
    Constant {
        value: Complex64,
    },
    /// `Σ weight · tree(c)` over the restricted-unitary angles.
    Trees {
        trees: Vec<WeightedTree>,
    },
    /// A trainable real coefficient `d[slot]`.
    Param {
        slot: usize,
    },
}

impl TermCoefficient {
    pub fn eval(&self, coeffs: &[f64]) -> Complex64 {
        match self {
            TermCoefficient::Constant { value } => *value,
            TermCoefficient::Trees { trees } => {
                trees.iter().map(|t| t.weight * t.tree.eval(coeffs)).sum()
            }
            TermCoefficient::Param { slot } => Complex64::new(coeffs[*slot], 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTerm {
    /// One phase-free factor per subsystem.
    pub factors: Vec<PauliString>,
    /// Pool index of each factor; `None` for identity factors.
    pub pool_index: Vec<Option<usize>>,
    /// Local qubits each factor is measured on. Defaults to the support, but
    /// a basis measurement that happens to be `I` may still name its site.
    pub measured_sites: Vec<u64>,
    pub coefficient: TermCoefficient,
}

/// `Σₚ dₚ ⊗ₛ Wₛᵖ` over a partition layout with a deduplicated operator pool.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredObservable {
    layout: PartitionLayout,
    terms: Vec<FactoredTerm>,
    pool: Vec<Vec<PauliString>>,
    coefficient_len: usize,
}

/// A term as supplied to [`FactoredObservable::new`].
#[derive(Debug, Clone)]
pub struct TermSpec {
    pub factors: Vec<PauliString>,
    pub measured_sites: Option<Vec<u64>>,
    pub coefficient: TermCoefficient,
}

fn support_mask(p: &PauliString) -> u64 {
    p.support().iter().fold(0, |m, &q| m | (1 << q))
}

impl FactoredObservable {
    /// Validates factor shapes and builds the per-subsystem operator pool.
    /// `coefficient_len` is the length of the coefficient vector the terms
    /// index into (angles for tree terms, `d` for parameter terms).
    pub fn new(
        layout: PartitionLayout,
        specs: Vec<TermSpec>,
        coefficient_len: usize,
    ) -> Result<Self> {
        let s_count = layout.num_subsystems();
        let mut pool_sets: Vec<BTreeMap<PauliString, usize>> = vec![BTreeMap::new(); s_count];
        for spec in &specs {
            if spec.factors.len() != s_count {
                return Err(Error::InvalidLayout(format!(
                    "term has {} factors for {} subsystems",
                    spec.factors.len(),
                    s_count
                )));
            }
            for (s, f) in spec.factors.iter().enumerate() {
                if f.n_qubits() != layout.size(s) {
                    return Err(Error::DimensionMismatch {
                        left: f.n_qubits(),
                        right: layout.size(s),
                    });
                }
                if f.phase() != Phase::ONE {
                    return Err(Error::InvalidArgument(format!(
                        "factor {f} must carry phase +1"
                    )));
                }
                if !f.is_identity() {
                    pool_sets[s].insert(f.clone(), 0);
                }
            }
            match &spec.coefficient {
                TermCoefficient::Param { slot } if *slot >= coefficient_len => {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient slot {slot} outside {coefficient_len}"
                    )))
                }
                TermCoefficient::Trees { trees }
                    if trees
                        .iter()
                        .any(|t| t.tree.max_index().is_some_and(|i| i >= coefficient_len)) =>
                {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient tree references an angle outside {coefficient_len}"
                    )))
                }
                _ => {}
            }
        }
        let pool: Vec<Vec<PauliString>> = pool_sets
            .iter_mut()
            .map(|set| {
                for (k, v) in set.values_mut().enumerate() {
                    *v = k;
                }
                set.keys().cloned().collect()
            })
            .collect();
        let terms = specs
            .into_iter()
            .map(|spec| {
                let pool_index = spec
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(s, f)| (!f.is_identity()).then(|| pool_sets[s][f]))
                    .collect();
                let measured_sites = spec
                    .measured_sites
                    .unwrap_or_else(|| spec.factors.iter().map(support_mask).collect());
                FactoredTerm {
                    factors: spec.factors,
                    pool_index,
                    measured_sites,
                    coefficient: spec.coefficient,
                }
            })
            .collect();
        Ok(FactoredObservable {
            layout,
            terms,
            pool,
            coefficient_len,
        })
    }

    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[FactoredTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Distinct non-identity operators to measure on subsystem `s`.
    pub fn pool(&self, s: usize) -> &[PauliString] {
        &self.pool[s]
    }

    pub fn coefficient_len(&self) -> usize {
        self.coefficient_len
    }

    /// Number of `(term, tree)` pairs, i.e. the expanded term count.
    pub fn expanded_len(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match &t.coefficient {
                TermCoefficient::Trees { trees } => trees.len(),
                _ => 1,
            })
            .sum()
    }

    /// Sums the terms back into one global observable at the given coefficients.
    pub fn evaluate_at(&self, coeffs: &[f64]) -> Result<Observable> {
        let mut out = Observable::new(self.layout.n_qubits());
        for t in &self.terms {
            let p = PauliString::tensor(&t.factors, Phase::ONE, &self.layout)?;
            out.add_term(t.coefficient.eval(coeffs), &p)?;
        }
        Ok(out)
    }

    pub fn to_record(&self) -> FactoredRecord {
        FactoredRecord {
            subsystem_sizes: self.layout.sizes().to_vec(),
            coefficient_len: self.coefficient_len,
            terms: self
                .terms
                .iter()
                .map(|t| FactoredTermRecord {
                    factors: t.factors.iter().map(ToString::to_string).collect(),
                    coefficient: t.coefficient.clone(),
                })
                .collect(),
            pool: self
                .pool
                .iter()
                .map(|ops| ops.iter().map(ToString::to_string).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }
}

/// JSON debug dump of a [`FactoredObservable`]; factor strings use local
/// 1-based labels within their subsystem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactoredRecord {
    pub subsystem_sizes: Vec<usize>,
    pub coefficient_len: usize,
    pub terms: Vec<FactoredTermRecord>,
    pub pool: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactoredTermRecord {
    pub factors: Vec<String>,
    pub coefficient: TermCoefficient,
}

/// Ordered product of barred factors `P̄ᵢ = cos(cᵢ) I + i sin(cᵢ) Pᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedUnitary {
    n_qubits: usize,
    generators: Vec<PauliString>,
    angles: Vec<f64>,
}

impl RestrictedUnitary {
    pub fn new(n_qubits: usize, generators: Vec<PauliString>, angles: Vec<f64>) -> Result<Self> {
        if generators.len() != angles.len() {
            return Err(Error::SlotMismatch {
                kind: "angle",
                expected: generators.len(),
                got: angles.len(),
            });
        }
        for g in &generators {
            if g.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    left: n_qubits,
                    right: g.n_qubits(),
                });
            }
            if !g.phase().is_real() {
                return Err(Error::NonHermitian(g.to_string()));
            }
        }
        Ok(RestrictedUnitary {
            n_qubits,
            generators,
            angles,
        })
    }

    /// Parses generators from their sparse text form (`"Z3 Y4"`, 1-based).
    pub fn from_labels<S: AsRef<str>>(
        n_qubits: usize,
        labels: &[S],
        angles: Vec<f64>,
    ) -> Result<Self> {
        let generators = labels
            .iter()
            .map(|l| PauliString::parse(n_qubits, l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, generators, angles)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Indices of the factors that survive conjugation of `m`: those that
    /// fail to commute with `m` or with an earlier retained factor.
    pub fn prune_factors(&self, m: &PauliString) -> Result<Vec<usize>> {
        if m.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: m.n_qubits(),
            });
        }
        let mut retained: Vec<usize> = Vec::new();
        for (i, p) in self.generators.iter().enumerate() {
            let keep = !p.commutes_unchecked(m)
                || retained
                    .iter()
                    .any(|&j| !p.commutes_unchecked(&self.generators[j]));
            if keep {
                retained.push(i);
            }
        }
        Ok(retained)
    }

    /// Expands `V† m V` for one Pauli string into `(string, tree)` branches.
    fn expand_string(
        &self,
        m: &PauliString,
        cap: usize,
    ) -> Result<Vec<(PauliString, CoefficientTree)>> {
        let retained = self.prune_factors(m)?;
        let mut branches = vec![(m.normalized(), CoefficientTree::constant(m.phase()))];
        for &i in &retained {
            let p = &self.generators[i];
            let mut next = Vec::with_capacity(branches.len() * 4);
            for (q, tree) in branches {
                if p.commutes_unchecked(&q) {
                    next.push((q, tree));
                    continue;
                }
                let qp = q.mul_unchecked(p);
                let pq = p.mul_unchecked(&q);
                let pqp = pq.mul_unchecked(p);
                next.push((q.clone(), tree.extended(i, TrigKind::Cos2, Phase::ONE)));
                next.push((qp, tree.extended(i, TrigKind::PlusICosSin, Phase::ONE)));
                next.push((pq, tree.extended(i, TrigKind::MinusICosSin, Phase::ONE)));
                next.push((pqp, tree.extended(i, TrigKind::Sin2, Phase::ONE)));
            }
            if next.len() > cap {
                return Err(Error::TermExplosion {
                    term: m.to_string(),
                    retained: retained.len(),
                    cap,
                });
            }
            branches = next;
        }
        // Move each string's phase into its tree so keys are phase-free.
        Ok(branches
            .into_iter()
            .map(|(q, tree)| {
                let ph = q.phase();
                (q.normalized(), tree.with_phase(ph))
            })
            .collect())
    }

    /// Symbolically expands `V† M V` and factors every term over `layout`.
    pub fn conjugate(
        &self,
        m: &Observable,
        layout: &PartitionLayout,
    ) -> Result<FactoredObservable> {
        self.conjugate_with_cap(m, layout, DEFAULT_TERM_CAP)
    }

    pub fn conjugate_with_cap(
        &self,
        m: &Observable,
        layout: &PartitionLayout,
        cap: usize,
    ) -> Result<FactoredObservable> {
        if m.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: m.n_qubits(),
            });
        }
        if layout.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: layout.n_qubits(),
            });
        }
        let hamiltonian_terms: Vec<(&PauliString, Complex64)> = m.terms().collect();
        let expanded: Vec<Vec<(PauliString, CoefficientTree)>> = hamiltonian_terms
            .par_iter()
            .map(|(p, _)| self.expand_string(p, cap))
            .collect::<Result<_>>()?;

        // Order-fixed merge: factor key → (tree → weight).
        let mut merged: BTreeMap<Vec<PauliString>, BTreeMap<CoefficientTree, Complex64>> =
            BTreeMap::new();
        let mut total = 0usize;
        for ((p, lambda), branches) in hamiltonian_terms.iter().zip(expanded) {
            total += branches.len();
            if total > cap {
                return Err(Error::TermExplosion {
                    term: p.to_string(),
                    retained: self.prune_factors(p)?.len(),
                    cap,
                });
            }
            for (q, tree) in branches {
                let (factors, _) = q.restrict_to_partition(layout)?;
                *merged
                    .entry(factors)
                    .or_default()
                    .entry(tree)
                    .or_insert(Complex64::new(0.0, 0.0)) += *lambda;
            }
        }

        let tol = m.drop_tolerance();
        let specs = merged
            .into_iter()
            .filter_map(|(factors, trees)| {
                let trees: Vec<WeightedTree> = trees
                    .into_iter()
                    .filter(|(_, w)| w.norm() >= tol)
                    .map(|(tree, weight)| WeightedTree { weight, tree })
                    .collect();
                (!trees.is_empty()).then_some(TermSpec {
                    factors,
                    measured_sites: None,
                    coefficient: TermCoefficient::Trees { trees },
                })
            })
            .collect();
        FactoredObservable::new(layout.clone(), specs, self.len())
    }
}
