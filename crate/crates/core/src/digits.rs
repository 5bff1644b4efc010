//! 3-vs-6 handwritten digit classification on eight 8-qubit subsystems.
//!
//! Image column `s` is uploaded into subsystem `s` (row `r` on qubit `r`).
//! The readout couples neighbouring subsystems through single-qubit basis
//! operators, alternating between the first and the last qubit.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conjugate::{FactoredObservable, TermCoefficient, TermSpec};
use crate::error::{Error, Result};
use crate::optimize::Sample;
use crate::partition::{PartitionLayout, PartitionedModel};
use crate::pauli::{Pauli, PauliString};
use crate::simulator::{Angle, Gate, SubsystemCircuit};

pub const IMAGE_SIDE: usize = 8;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const SUBSYSTEMS: usize = 8;
pub const QUBITS_PER_SUBSYSTEM: usize = 8;
pub const EXPECTED_SAMPLES: usize = 364;
pub const SPLIT: (usize, usize, usize) = (182, 91, 91);
pub const THRESHOLD: f64 = 0.5;

/// The full 8×8 digits corpus (1797 images), headerless: 64 pixels then the label.
pub const BUNDLED_CORPUS: &str = include_str!("../data/digits.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct DigitSample {
    /// Raw intensities in `[0, 16]`.
    pub raw: [u8; PIXELS],
    /// Rotation angles in `[0, π]`.
    pub pixels: [f64; PIXELS],
    pub label: u8,
    pub target: f64,
}

pub fn scale_pixel(raw: u8) -> f64 {
    f64::from(raw) * PI / 16.0
}

pub fn target_for(label: u8) -> Option<f64> {
    match label {
        3 => Some(0.0),
        6 => Some(1.0),
        _ => None,
    }
}

impl DigitSample {
    pub fn new(raw: [u8; PIXELS], label: u8) -> Result<Self> {
        let target = target_for(label)
            .ok_or_else(|| Error::Dataset(format!("label {label} is not part of the 3/6 task")))?;
        if let Some(&p) = raw.iter().find(|&&p| p > 16) {
            return Err(Error::Dataset(format!("pixel value {p} outside [0, 16]")));
        }
        let mut pixels = [0.0; PIXELS];
        for (a, &r) in pixels.iter_mut().zip(&raw) {
            *a = scale_pixel(r);
        }
        Ok(DigitSample {
            raw,
            pixels,
            label,
            target,
        })
    }

    /// Per-subsystem angles: subsystem `s` gets column `s`, top to bottom.
    pub fn features(&self) -> Vec<Vec<f64>> {
        (0..IMAGE_SIDE)
            .map(|col| {
                (0..IMAGE_SIDE)
                    .map(|row| self.pixels[row * IMAGE_SIDE + col])
                    .collect()
            })
            .collect()
    }

    pub fn to_sample(&self) -> Sample {
        Sample {
            features: self.features(),
            target: self.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<DigitSample>,
    pub validation: Vec<DigitSample>,
    pub test: Vec<DigitSample>,
    pub seed: u64,
}

fn samples(v: &[DigitSample]) -> Vec<Sample> {
    v.iter().map(DigitSample::to_sample).collect()
}

impl SplitDataset {
    pub fn train_samples(&self) -> Vec<Sample> {
        samples(&self.train)
    }

    pub fn validation_samples(&self) -> Vec<Sample> {
        samples(&self.validation)
    }

    pub fn test_samples(&self) -> Vec<Sample> {
        samples(&self.test)
    }
}

/// Parses the headerless corpus and keeps the 3s and 6s, in file order.
pub fn parse_corpus<R: Read>(reader: R) -> Result<Vec<DigitSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("row {}: {e}", line + 1)))?;
        if record.len() != PIXELS + 1 {
            return Err(Error::Dataset(format!(
                "row {}: expected {} columns (64 pixels + label), found {}",
                line + 1,
                PIXELS + 1,
                record.len()
            )));
        }
        let parse = |i: usize| -> Result<u8> {
            record[i].parse::<u8>().map_err(|_| {
                Error::Dataset(format!(
                    "row {}, column {}: not an integer in 0..=255: {:?}",
                    line + 1,
                    i + 1,
                    &record[i]
                ))
            })
        };
        let label = parse(PIXELS)?;
        if label > 9 {
            return Err(Error::Dataset(format!(
                "row {}: unknown label {label}",
                line + 1
            )));
        }
        if target_for(label).is_none() {
            continue;
        }
        let mut raw = [0u8; PIXELS];
        for (i, r) in raw.iter_mut().enumerate() {
            *r = parse(i)?;
        }
        out.push(DigitSample::new(raw, label).map_err(|e| match e {
            Error::Dataset(m) => Error::Dataset(format!("row {}: {m}", line + 1)),
            other => other,
        })?);
    }
    Ok(out)
}

/// Seeded shuffle followed by a 182/91/91 split. Fails unless exactly 364
/// samples of the two classes are present.
pub fn split_samples(mut all: Vec<DigitSample>, seed: u64) -> Result<SplitDataset> {
    if all.len() != EXPECTED_SAMPLES {
        let threes = all.iter().filter(|s| s.label == 3).count();
        return Err(Error::Dataset(format!(
            "expected {EXPECTED_SAMPLES} samples labelled 3 or 6, found {} ({threes} threes, {} sixes)",
            all.len(),
            all.len() - threes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let test = all.split_off(SPLIT.0 + SPLIT.1);
    let validation = all.split_off(SPLIT.0);
    Ok(SplitDataset {
        train: all,
        validation,
        test,
        seed,
    })
}

pub fn load_dataset(path: impl AsRef<Path>, seed: u64) -> Result<SplitDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))?;
    split_samples(parse_corpus(std::io::BufReader::new(file))?, seed)
}

pub fn load_bundled(seed: u64) -> Result<SplitDataset> {
    split_samples(parse_corpus(BUNDLED_CORPUS.as_bytes())?, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `{I, X, Y, Z}`
    Full,
    /// `{I, X}`
    Reduced,
}

impl Basis {
    pub fn ops(self) -> &'static [Pauli] {
        match self {
            Basis::Full => &Pauli::ALL,
            Basis::Reduced => &[Pauli::I, Pauli::X],
        }
    }
}

/// The 7 neighbour pairs `(s, s+1)` and the local qubit each is read on.
pub fn pair_sites() -> Vec<(usize, usize, usize)> {
    (0..SUBSYSTEMS - 1)
        .map(|b| {
            let q = if b % 2 == 0 {
                0
            } else {
                QUBITS_PER_SUBSYSTEM - 1
            };
            (b, b + 1, q)
        })
        .collect()
}

/// `Σ_b Σ_{a,a'} d_{b,a,a'} σ_a ⊗ σ_{a'}` on the pair sites, one real
/// coefficient per `(block, a, a')`, slots ordered block-major.
pub fn build_pair_observable(basis: Basis) -> Result<FactoredObservable> {
    let layout = PartitionLayout::equal(SUBSYSTEMS * QUBITS_PER_SUBSYSTEM, SUBSYSTEMS)?;
    let ops = basis.ops();
    let mut specs = Vec::new();
    for (s1, s2, q) in pair_sites() {
        for &a in ops {
            for &b in ops {
                let mut factors = vec![PauliString::identity(QUBITS_PER_SUBSYSTEM); SUBSYSTEMS];
                factors[s1].set(q, a)?;
                factors[s2].set(q, b)?;
                let mut sites = vec![0u64; SUBSYSTEMS];
                sites[s1] = 1 << q;
                sites[s2] = 1 << q;
                specs.push(TermSpec {
                    factors,
                    measured_sites: Some(sites),
                    coefficient: TermCoefficient::Param { slot: specs.len() },
                });
            }
        }
    }
    let len = specs.len();
    FactoredObservable::new(layout, specs, len)
}

/// `U(x) V(θ₁) W U(x) V(θ₂) W U(x) W` on `n` qubits, where `U` uploads
/// `RY(xᵢ)`, `V` applies trainable `RY`, and `W` is the closed CNOT ladder.
pub fn classifier_ansatz(n_qubits: usize) -> Result<SubsystemCircuit> {
    let upload = |c: &mut SubsystemCircuit| -> Result<()> {
        for q in 0..n_qubits {
            c.push(Gate::Ry {
                target: q,
                angle: Angle::Data(q),
            })?;
        }
        Ok(())
    };
    let mut c = SubsystemCircuit::new(n_qubits);
    for round in 0..2 {
        upload(&mut c)?;
        for q in 0..n_qubits {
            c.push(Gate::Ry {
                target: q,
                angle: Angle::Param(round * n_qubits + q),
            })?;
        }
        c = c.cnot_ladder(true)?;
    }
    upload(&mut c)?;
    c.cnot_ladder(true)
}

pub fn build_classifier_ansatz() -> Result<SubsystemCircuit> {
    classifier_ansatz(QUBITS_PER_SUBSYSTEM)
}

/// Classifier with all parameters zero; training initializes them.
pub fn build_classifier(basis: Basis) -> Result<PartitionedModel> {
    let obs = build_pair_observable(basis)?;
    let circuit = build_classifier_ansatz()?;
    let n_theta = circuit.param_count() * SUBSYSTEMS;
    let n_d = obs.coefficient_len();
    PartitionedModel::new(
        vec![circuit; SUBSYSTEMS],
        obs,
        vec![0.0; n_theta],
        vec![0.0; n_d],
    )
}

pub fn classify(output: f64, threshold: f64) -> u8 {
    if output < threshold {
        3
    } else {
        6
    }
}

/// Fraction of `(output, label)` pairs classified correctly.
pub fn accuracy(outputs: &[f64], labels: &[u8], threshold: f64) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let hits = outputs
        .iter()
        .zip(labels)
        .filter(|(&o, &l)| classify(o, threshold) == l)
        .count();
    hits as f64 / outputs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub accuracy: f64,
    pub mse: f64,
}

pub fn score(model: &PartitionedModel, samples: &[DigitSample]) -> Result<SplitScore> {
    let batch: Vec<Sample> = samples.iter().map(DigitSample::to_sample).collect();
    let outputs = crate::optimize::predict(model, &batch, crate::optimize::OutputMap::Identity)?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    Ok(SplitScore {
        accuracy: accuracy(&outputs, &labels, THRESHOLD),
        mse: crate::optimize::mse(&outputs, &batch),
    })
}
