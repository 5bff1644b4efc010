//! Dense statevector simulation of a single subsystem.
//!
//! Amplitude index bit `q` is the state of qubit `q` (qubit 0 is the least
//! significant bit).

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub const DEFAULT_MAX_QUBITS: usize = 14;

const NORM_TOLERANCE: f64 = 1e-10;

/// Where a rotation gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Trainable parameter slot.
    Param(usize),
    /// Data (feature) slot; re-uploading circuits may reference a slot many times.
    Data(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry {
        target: usize,
        angle: Angle,
    },
    /// Only used by the random-circuit ensembles; see `variance_lab`.
    Rz {
        target: usize,
        angle: Angle,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    fn angle(&self) -> Option<Angle> {
        match *self {
            Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            Gate::Cnot { .. } => None,
        }
    }
}

/// A parameterized gate list acting on one subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    param_count: usize,
    data_count: usize,
}

impl SubsystemCircuit {
    pub fn new(n_qubits: usize) -> Self {
        SubsystemCircuit {
            n_qubits,
            gates: Vec::new(),
            param_count: 0,
            data_count: 0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn data_count(&self) -> usize {
        self.data_count
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    fn track(&mut self, angle: Angle) {
        match angle {
            Angle::Param(k) => self.param_count = self.param_count.max(k + 1),
            Angle::Data(k) => self.data_count = self.data_count.max(k + 1),
            Angle::Fixed(_) => {}
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        match gate {
            Gate::Ry { target, angle } | Gate::Rz { target, angle } => {
                self.check_qubit(target)?;
                self.track(angle);
            }
            Gate::Cnot { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(Error::InvalidCircuit(format!(
                        "CNOT control equals target ({control})"
                    )));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn ry(mut self, target: usize, angle: Angle) -> Result<Self> {
        self.push(Gate::Ry { target, angle })?;
        Ok(self)
    }

    pub fn rz(mut self, target: usize, angle: Angle) -> Result<Self> {
        self.push(Gate::Rz { target, angle })?;
        Ok(self)
    }

    pub fn cnot(mut self, control: usize, target: usize) -> Result<Self> {
        self.push(Gate::Cnot { control, target })?;
        Ok(self)
    }

    /// Open CNOT ladder `0→1, 1→2, …, (n-2)→(n-1)`; `closed` appends `(n-1)→0`.
    pub fn cnot_ladder(mut self, closed: bool) -> Result<Self> {
        for q in 0..self.n_qubits.saturating_sub(1) {
            self.push(Gate::Cnot {
                control: q,
                target: q + 1,
            })?;
        }
        if closed && self.n_qubits >= 2 {
            self.push(Gate::Cnot {
                control: self.n_qubits - 1,
                target: 0,
            })?;
        }
        Ok(self)
    }

    /// `layers` rounds of (RY on every qubit, open CNOT ladder); parameters
    /// are numbered layer-major so slot `l·n + q` is qubit `q` of round `l`.
    pub fn hardware_efficient(n_qubits: usize, layers: usize) -> Result<Self> {
        let mut c = SubsystemCircuit::new(n_qubits);
        for l in 0..layers {
            for q in 0..n_qubits {
                c.push(Gate::Ry {
                    target: q,
                    angle: Angle::Param(l * n_qubits + q),
                })?;
            }
            c = c.cnot_ladder(false)?;
        }
        Ok(c)
    }

    fn check_inputs(&self, params: &[f64], data: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::SlotMismatch {
                kind: "parameter",
                expected: self.param_count,
                got: params.len(),
            });
        }
        if data.len() != self.data_count {
            return Err(Error::SlotMismatch {
                kind: "data",
                expected: self.data_count,
                got: data.len(),
            });
        }
        Ok(())
    }

    /// Indices of gates whose angle is parameter `slot`.
    pub fn gates_using_param(&self, slot: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g.angle(), Some(Angle::Param(k)) if k == slot))
            .map(|(i, _)| i)
            .collect()
    }

    /// Statevector of the circuit applied to `|0…0⟩`.
    pub fn run(&self, params: &[f64], data: &[f64]) -> Result<StateVector> {
        self.run_shifted(params, data, None)
    }

    fn resolve(angle: Angle, params: &[f64], data: &[f64]) -> f64 {
        match angle {
            Angle::Param(k) => params[k],
            Angle::Data(k) => data[k],
            Angle::Fixed(v) => v,
        }
    }

    fn apply_gate(state: &mut StateVector, gate: &Gate, params: &[f64], data: &[f64], delta: f64) {
        match *gate {
            Gate::Ry { target, angle } => {
                state.apply_ry(target, Self::resolve(angle, params, data) + delta)
            }
            Gate::Rz { target, angle } => {
                state.apply_rz(target, Self::resolve(angle, params, data) + delta)
            }
            Gate::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    /// Like [`run`](Self::run) but adds `delta` to the angle of gate `gate_index`.
    pub fn run_shifted(
        &self,
        params: &[f64],
        data: &[f64],
        shift: Option<(usize, f64)>,
    ) -> Result<StateVector> {
        self.check_inputs(params, data)?;
        let mut state = StateVector::zero(self.n_qubits)?;
        for (i, gate) in self.gates.iter().enumerate() {
            let delta = match shift {
                Some((g, d)) if g == i => d,
                _ => 0.0,
            };
            Self::apply_gate(&mut state, gate, params, data, delta);
        }
        debug_assert!((state.norm_sqr() - 1.0).abs() < NORM_TOLERANCE);
        Ok(state)
    }

    /// Calls `visit(slot, plus, minus)` with the `±π/2`-shifted final states
    /// for every trainable gate occurrence, in gate order. The unshifted
    /// prefix is simulated once and shared.
    pub fn for_each_shift(
        &self,
        params: &[f64],
        data: &[f64],
        mut visit: impl FnMut(usize, &StateVector, &StateVector) -> Result<()>,
    ) -> Result<()> {
        self.check_inputs(params, data)?;
        let mut prefix = StateVector::zero(self.n_qubits)?;
        for (i, gate) in self.gates.iter().enumerate() {
            if let Some(Angle::Param(slot)) = gate.angle() {
                let mut branches = [prefix.clone(), prefix.clone()];
                for (state, delta) in branches.iter_mut().zip([FRAC_PI_2, -FRAC_PI_2]) {
                    Self::apply_gate(state, gate, params, data, delta);
                    for g in &self.gates[i + 1..] {
                        Self::apply_gate(state, g, params, data, 0.0);
                    }
                }
                visit(slot, &branches[0], &branches[1])?;
            }
            Self::apply_gate(&mut prefix, gate, params, data, 0.0);
        }
        Ok(())
    }

    /// The `(θ+π/2, θ−π/2)` states for every gate occurrence of parameter `slot`.
    pub fn shifted_states(
        &self,
        params: &[f64],
        data: &[f64],
        slot: usize,
    ) -> Result<Vec<(StateVector, StateVector)>> {
        if slot >= self.param_count {
            return Err(Error::NotTrainable { slot });
        }
        self.gates_using_param(slot)
            .into_iter()
            .map(|g| {
                Ok((
                    self.run_shifted(params, data, Some((g, FRAC_PI_2)))?,
                    self.run_shifted(params, data, Some((g, -FRAC_PI_2)))?,
                ))
            })
            .collect()
    }

    /// Parameter-shift derivative of `⟨W⟩` with respect to parameter `slot`.
    pub fn param_shift_grad(
        &self,
        params: &[f64],
        data: &[f64],
        observable: &PauliString,
        slot: usize,
    ) -> Result<f64> {
        let mut grad = 0.0;
        for (plus, minus) in self.shifted_states(params, data, slot)? {
            grad += 0.5 * (plus.expectation(observable)? - minus.expectation(observable)?);
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_limit(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_limit(n_qubits: usize, max: usize) -> Result<Self> {
        if n_qubits > max {
            return Err(Error::TooManyQubits { n_qubits, max });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(Complex64::norm_sqr).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "state has squared norm {norm}"
            )));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    fn pairs(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let bit = 1usize << q;
        for chunk in self.amps.chunks_exact_mut(bit << 1) {
            let (lo, hi) = chunk.split_at_mut(bit);
            for (a0, a1) in lo.iter_mut().zip(hi) {
                f(a0, a1);
            }
        }
    }

    pub fn apply_ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        self.pairs(q, |a0, a1| {
            let (v0, v1) = (*a0, *a1);
            *a0 = v0 * c - v1 * s;
            *a1 = v0 * s + v1 * c;
        });
    }

    pub fn apply_rz(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let (m, p) = (Complex64::new(c, -s), Complex64::new(c, s));
        self.pairs(q, |a0, a1| {
            *a0 *= m;
            *a1 *= p;
        });
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for (ci, chunk) in self.amps.chunks_exact_mut(tb << 1).enumerate() {
            let base = ci * (tb << 1);
            let (lo, hi) = chunk.split_at_mut(tb);
            for (j, (a0, a1)) in lo.iter_mut().zip(hi).enumerate() {
                if (base + j) & cb != 0 {
                    std::mem::swap(a0, a1);
                }
            }
        }
    }

    /// `⟨ψ|W|ψ⟩` for a hermitian Pauli string (phase ±1).
    pub fn expectation(&self, w: &PauliString) -> Result<f64> {
        if w.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: w.n_qubits(),
            });
        }
        if !w.phase().is_real() {
            return Err(Error::NonHermitian(w.to_string()));
        }
        let sign = if w.phase().power() == 0 { 1.0 } else { -1.0 };
        if w.is_identity() {
            // Every state is unit-norm by construction; measuring I needs no shots.
            return Ok(sign);
        }
        let (x, z) = (w.x_mask() as usize, w.z_mask() as usize);
        // W|b⟩ = i^{#Y} (-1)^{|b∧z|} |b⊕x⟩
        let y_phase = crate::pauli::Phase::from_power(w.y_count()).to_complex();
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, &amp) in self.amps.iter().enumerate() {
            let term = self.amps[b ^ x].conj() * amp;
            if (b & z).count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let value = acc * y_phase * sign;
        debug_assert!(
            value.im.abs() < NORM_TOLERANCE,
            "imaginary residue {}",
            value.im
        );
        Ok(value.re)
    }
}
