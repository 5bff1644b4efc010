//! Phase-tracked Pauli strings and weighted sums of them.
//!
//! Each qubit carries an `(x, z)` bit pair: `I = (0,0)`, `X = (1,0)`,
//! `Z = (0,1)`, `Y = (1,1)`. Products and commutation reduce to word-wise
//! bit operations; the global phase is a power of `i` tracked mod 4.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionLayout;

const WORD: usize = 64;

/// Default magnitude below which [`Observable::simplify`] drops a term.
pub const DEFAULT_DROP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A fourth root of unity, `i^k`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) % 4)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })
    }
}

/// Tensor product of single-qubit Paulis over `n_qubits` with a phase.
///
/// Ordering (derived) compares qubit count, then the x words, then the z
/// words, then the phase; it is only used to fix reduction order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: Phase,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD).max(1)
}

fn popcount(words: impl Iterator<Item = u64>) -> u32 {
    words.map(u64::count_ones).sum()
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        let w = words_for(n_qubits);
        PauliString {
            n_qubits,
            x: vec![0; w],
            z: vec![0; w],
            phase: Phase::ONE,
        }
    }

    pub fn from_ops(ops: &[Pauli]) -> Self {
        let mut p = Self::identity(ops.len());
        for (q, &op) in ops.iter().enumerate() {
            p.set_unchecked(q, op);
        }
        p
    }

    /// Builds a string from `(qubit, Pauli)` pairs; qubits are 0-based.
    pub fn from_sparse(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = Self::identity(n_qubits);
        for &(q, op) in ops {
            p.set(q, op)?;
        }
        Ok(p)
    }

    pub fn single(n_qubits: usize, qubit: usize, op: Pauli) -> Result<Self> {
        Self::from_sparse(n_qubits, &[(qubit, op)])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Same operator content with phase +1.
    pub fn normalized(&self) -> Self {
        self.clone().with_phase(Phase::ONE)
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let (w, b) = (qubit / WORD, qubit % WORD);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, op: Pauli) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        self.set_unchecked(qubit, op);
        Ok(())
    }

    fn set_unchecked(&mut self, qubit: usize, op: Pauli) {
        let (w, b) = (qubit / WORD, qubit % WORD);
        let (xb, zb) = op.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
    }

    pub fn ops(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.get(q)).collect()
    }

    /// Qubits where the string acts non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|&q| self.get(q) != Pauli::I)
            .collect()
    }

    pub fn weight(&self) -> usize {
        popcount(self.x.iter().zip(&self.z).map(|(x, z)| x | z)) as usize
    }

    /// True when every qubit is `I`, whatever the phase.
    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn y_count(&self) -> u32 {
        popcount(self.x.iter().zip(&self.z).map(|(x, z)| x & z))
    }

    /// Low word of the x bits. Only meaningful for strings of at most 64 qubits.
    pub fn x_mask(&self) -> u64 {
        self.x[0]
    }

    /// Low word of the z bits. Only meaningful for strings of at most 64 qubits.
    pub fn z_mask(&self) -> u64 {
        self.z[0]
    }

    fn check_dims(&self, other: &PauliString) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    /// Exact product `self · other`, including the accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_dims(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PauliString {
        // With Y = iXZ, each factor is i^{x·z} X^x Z^z. Moving Z^{z1} past
        // X^{x2} contributes (-1)^{z1·x2}; converting back divides by i^{x3·z3}.
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        let mut k: i64 = 0;
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[w], self.z[w], other.x[w], other.z[w]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            k += (x1 & z1).count_ones() as i64
                + (x2 & z2).count_ones() as i64
                + 2 * (z1 & x2).count_ones() as i64
                - (x3 & z3).count_ones() as i64;
            x.push(x3);
            z.push(z3);
        }
        let base = Phase::from_power(k.rem_euclid(4) as u32);
        PauliString {
            n_qubits: self.n_qubits,
            x,
            z,
            phase: self.phase * other.phase * base,
        }
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        let anti: u32 = (0..self.x.len())
            .map(|w| ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones())
            .sum();
        anti.is_multiple_of(2)
    }

    /// Splits the string into one factor per subsystem of `layout`.
    ///
    /// Factors carry phase +1; the string's own phase is returned alongside.
    pub fn restrict_to_partition(
        &self,
        layout: &PartitionLayout,
    ) -> Result<(Vec<PauliString>, Phase)> {
        if layout.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: layout.n_qubits(),
            });
        }
        let mut factors: Vec<PauliString> = (0..layout.num_subsystems())
            .map(|s| PauliString::identity(layout.size(s)))
            .collect();
        for q in 0..self.n_qubits {
            let op = self.get(q);
            if op != Pauli::I {
                let (s, local) = layout.locate(q);
                factors[s].set_unchecked(local, op);
            }
        }
        Ok((factors, self.phase))
    }

    /// Inverse of [`restrict_to_partition`](Self::restrict_to_partition).
    pub fn tensor(
        factors: &[PauliString],
        phase: Phase,
        layout: &PartitionLayout,
    ) -> Result<PauliString> {
        if factors.len() != layout.num_subsystems() {
            return Err(Error::InvalidLayout(format!(
                "{} factors for {} subsystems",
                factors.len(),
                layout.num_subsystems()
            )));
        }
        let mut out = PauliString::identity(layout.n_qubits()).with_phase(phase);
        for (s, f) in factors.iter().enumerate() {
            if f.n_qubits != layout.size(s) {
                return Err(Error::DimensionMismatch {
                    left: f.n_qubits,
                    right: layout.size(s),
                });
            }
            out.phase = out.phase * f.phase;
            for local in 0..f.n_qubits {
                out.set_unchecked(layout.global(s, local), f.get(local));
            }
        }
        Ok(out)
    }

    /// Parses the sparse text form, e.g. `"X1 Z3"` or `"-i Y2"`, with 1-based
    /// qubit labels. `"I"` or an empty string is the identity.
    pub fn parse(n_qubits: usize, text: &str) -> Result<PauliString> {
        let err = |reason: String| Error::PauliParse {
            input: text.to_string(),
            reason,
        };
        let mut p = PauliString::identity(n_qubits);
        let mut tokens = text.split_whitespace().peekable();
        if let Some(&first) = tokens.peek() {
            let phase = match first {
                "+" => Some(Phase::ONE),
                "-" => Some(Phase::MINUS_ONE),
                "i" | "+i" => Some(Phase::I),
                "-i" => Some(Phase::MINUS_I),
                _ => None,
            };
            if let Some(ph) = phase {
                p.phase = ph;
                tokens.next();
            }
        }
        for tok in tokens {
            if tok == "I" {
                continue;
            }
            let mut chars = tok.chars();
            let op = chars
                .next()
                .and_then(Pauli::from_symbol)
                .ok_or_else(|| err(format!("bad operator in {tok:?}")))?;
            let idx: usize = chars
                .as_str()
                .parse()
                .map_err(|_| err(format!("bad qubit label in {tok:?}")))?;
            if idx == 0 || idx > n_qubits {
                return Err(err(format!("qubit {idx} outside 1..={n_qubits}")));
            }
            if p.get(idx - 1) != Pauli::I {
                return Err(err(format!("qubit {idx} given twice")));
            }
            p.set_unchecked(idx - 1, op);
        }
        Ok(p)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.phase != Phase::ONE {
            write!(f, "{} ", self.phase)?;
        }
        let support = self.support();
        if support.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = support
            .iter()
            .map(|&q| format!("{}{}", self.get(q).symbol(), q + 1))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Weighted sum of phase-normalized Pauli strings over a fixed qubit count.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
    drop_tolerance: f64,
}

impl Observable {
    pub fn new(n_qubits: usize) -> Self {
        Observable {
            n_qubits,
            terms: BTreeMap::new(),
            drop_tolerance: DEFAULT_DROP_TOLERANCE,
        }
    }

    pub fn with_drop_tolerance(mut self, tol: f64) -> Self {
        self.drop_tolerance = tol;
        self
    }

    pub fn drop_tolerance(&self) -> f64 {
        self.drop_tolerance
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Adds `coeff · string`, folding the string's phase into the coefficient
    /// and merging with any existing term.
    pub fn add_term(&mut self, coeff: Complex64, string: &PauliString) -> Result<()> {
        if string.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: string.n_qubits(),
            });
        }
        let c = coeff * string.phase().to_complex();
        *self
            .terms
            .entry(string.normalized())
            .or_insert(Complex64::new(0.0, 0.0)) += c;
        Ok(())
    }

    pub fn from_terms<'a>(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (Complex64, &'a PauliString)>,
    ) -> Result<Self> {
        let mut o = Observable::new(n_qubits);
        for (c, p) in terms {
            o.add_term(c, p)?;
        }
        Ok(o)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, Complex64)> {
        self.terms.iter().map(|(p, &c)| (p, c))
    }

    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        let key = string.normalized();
        self.terms.get(&key).copied().unwrap_or_default() * string.phase().to_complex()
    }

    /// Drops terms whose coefficient magnitude is below the drop tolerance.
    pub fn simplify(&self) -> Observable {
        let terms = self
            .terms
            .iter()
            .filter(|(_, c)| c.norm() >= self.drop_tolerance)
            .map(|(p, &c)| (p.clone(), c))
            .collect();
        Observable {
            n_qubits: self.n_qubits,
            terms,
            drop_tolerance: self.drop_tolerance,
        }
    }

    /// True when every coefficient is real within `tol` (phase-normalized keys
    /// are hermitian, so this is hermiticity of the sum).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn to_record(&self) -> ObservableRecord {
        ObservableRecord {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| TermRecord {
                    re: c.re,
                    im: c.im,
                    pauli: p.to_string(),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &ObservableRecord) -> Result<Self> {
        let mut o = Observable::new(record.n_qubits);
        for t in &record.terms {
            let p = PauliString::parse(record.n_qubits, &t.pauli)?;
            o.add_term(Complex64::new(t.re, t.im), &p)?;
        }
        Ok(o)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }
}

/// JSON form of an [`Observable`]: a list of `(coefficient, string)` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub n_qubits: usize,
    pub terms: Vec<TermRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub pauli: String,
}
