//! Dense-matrix reference implementations. Everything here is built from
//! explicit 2x2 matrices and Kronecker products, independent of the
//! bit-packed code paths under test. Qubit 0 is the least significant bit.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qpart_core::conjugate::{TermCoefficient, TermSpec};
use qpart_core::digits;
use qpart_core::{
    Angle, FactoredObservable, Gate, Observable, PartitionLayout, PartitionedModel, Pauli,
    PauliString, SubsystemCircuit,
};
use rand::Rng;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_2x2(p: Pauli) -> CMat {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match p {
        Pauli::I => CMat::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => CMat::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => CMat::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => CMat::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// `ops[n-1] ⊗ … ⊗ ops[0]`
pub fn kron_all(ops: &[CMat]) -> CMat {
    let mut m = CMat::identity(1, 1);
    for op in ops {
        m = op.kronecker(&m);
    }
    m
}

pub fn pauli_matrix(p: &PauliString) -> CMat {
    let ops: Vec<CMat> = p.ops().into_iter().map(pauli_2x2).collect();
    kron_all(&ops) * p.phase().to_complex()
}

pub fn observable_matrix(obs: &Observable) -> CMat {
    let d = 1 << obs.n_qubits();
    let mut m = CMat::zeros(d, d);
    for (p, coef) in obs.terms() {
        m += pauli_matrix(p) * coef;
    }
    m
}

fn single_qubit_gate(n: usize, q: usize, g: CMat) -> CMat {
    let ops: Vec<CMat> = (0..n)
        .map(|k| {
            if k == q {
                g.clone()
            } else {
                CMat::identity(2, 2)
            }
        })
        .collect();
    kron_all(&ops)
}

pub fn ry_matrix(n: usize, q: usize, theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    single_qubit_gate(
        n,
        q,
        CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]),
    )
}

pub fn rz_matrix(n: usize, q: usize, theta: f64) -> CMat {
    let a = Complex64::from_polar(1.0, -theta / 2.0);
    single_qubit_gate(
        n,
        q,
        CMat::from_row_slice(2, 2, &[a, c(0.0, 0.0), c(0.0, 0.0), a.conj()]),
    )
}

pub fn cnot_matrix(n: usize, control: usize, target: usize) -> CMat {
    let d = 1 << n;
    let mut m = CMat::zeros(d, d);
    for b in 0..d {
        let out = if b >> control & 1 == 1 {
            b ^ (1 << target)
        } else {
            b
        };
        m[(out, b)] = c(1.0, 0.0);
    }
    m
}

/// Unitary of `circuit` acting on the global qubits `qubits` of an `n`-qubit register.
pub fn circuit_unitary(
    circuit: &SubsystemCircuit,
    n: usize,
    qubits: &[usize],
    params: &[f64],
    data: &[f64],
) -> CMat {
    let d = 1 << n;
    let mut u = CMat::identity(d, d);
    let angle = |a: &Angle| match *a {
        Angle::Param(k) => params[k],
        Angle::Data(k) => data[k],
        Angle::Fixed(v) => v,
    };
    for g in circuit.gates() {
        let m = match g {
            Gate::Ry { target, angle: a } => ry_matrix(n, qubits[*target], angle(a)),
            Gate::Rz { target, angle: a } => rz_matrix(n, qubits[*target], angle(a)),
            Gate::Cnot { control, target } => cnot_matrix(n, qubits[*control], qubits[*target]),
        };
        u = m * u;
    }
    u
}

/// `⊗ₛ Uₛ |0⟩` as a dense vector.
pub fn product_state(
    layout: &PartitionLayout,
    circuits: &[SubsystemCircuit],
    theta: &[Vec<f64>],
    data: &[Vec<f64>],
) -> CVec {
    let n = layout.n_qubits();
    let mut psi = CVec::zeros(1 << n);
    psi[0] = c(1.0, 0.0);
    for (s, circ) in circuits.iter().enumerate() {
        let qubits: Vec<usize> = (0..layout.size(s)).map(|l| layout.global(s, l)).collect();
        let x = data.get(s).map_or(&[][..], |v| v.as_slice());
        psi = circuit_unitary(circ, n, &qubits, &theta[s], x) * psi;
    }
    psi
}

/// `V = P̄₁ P̄₂ … P̄_N` with `P̄ᵢ = cos cᵢ I + i sin cᵢ Pᵢ`.
pub fn restricted_unitary_matrix(generators: &[PauliString], angles: &[f64]) -> CMat {
    let n = generators[0].n_qubits();
    let d = 1 << n;
    let mut v = CMat::identity(d, d);
    for (p, &a) in generators.iter().zip(angles) {
        let bar = CMat::identity(d, d) * c(a.cos(), 0.0) + pauli_matrix(p) * c(0.0, a.sin());
        v *= bar;
    }
    v
}

pub fn expectation(m: &CMat, psi: &CVec) -> Complex64 {
    (psi.adjoint() * m * psi)[(0, 0)]
}

/// Lowest eigenvalue of a Hermitian matrix that happens to be real.
pub fn dense_ground_energy(obs: &Observable) -> f64 {
    let m = observable_matrix(obs);
    let real = DMatrix::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re);
    nalgebra::SymmetricEigen::new(real)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn split_theta(model_theta: &[f64], circuits: &[SubsystemCircuit]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut off = 0;
    for circ in circuits {
        out.push(model_theta[off..off + circ.param_count()].to_vec());
        off += circ.param_count();
    }
    out
}

/// Random two-qubit `Z·Y` / `Y·Z` generators on neighbouring sites, as in
/// the shipped presets.
pub fn random_generators(n: usize, rng: &mut impl Rng) -> Vec<PauliString> {
    let k = rng.random_range(1..=6usize);
    (0..k)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + 1) % n;
            let (pa, pb) = if rng.random_bool(0.5) {
                (Pauli::Z, Pauli::Y)
            } else {
                (Pauli::Y, Pauli::Z)
            };
            PauliString::from_sparse(n, &[(a, pa), (b, pb)]).unwrap()
        })
        .collect()
}

pub fn random_state(dim: usize, rng: &mut impl Rng) -> CVec {
    let v = CVec::from_fn(dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Random model with numeric coefficients and data-uploading circuits.
pub fn random_data_model(n: usize, rng: &mut impl Rng) -> (PartitionedModel, Vec<Vec<f64>>) {
    let layout = PartitionLayout::equal(n, 2).unwrap();
    let ns = n / 2;
    let mut specs = Vec::new();
    for _ in 0..rng.random_range(2..8) {
        let factors = (0..2)
            .map(|_| {
                let ops: Vec<Pauli> = (0..ns)
                    .map(|_| Pauli::ALL[rng.random_range(0..4)])
                    .collect();
                PauliString::from_ops(&ops)
            })
            .collect();
        specs.push(TermSpec {
            factors,
            measured_sites: None,
            coefficient: TermCoefficient::Param { slot: specs.len() },
        });
    }
    let len = specs.len();
    let obs = FactoredObservable::new(layout, specs, len).unwrap();
    let circ = digits::classifier_ansatz(ns).unwrap();
    let theta = (0..2 * circ.param_count())
        .map(|_| rng.random::<f64>() * 6.0)
        .collect();
    let d = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
    let data = (0..2)
        .map(|_| (0..ns).map(|_| rng.random::<f64>() * 3.0).collect())
        .collect();
    (
        PartitionedModel::new(vec![circ; 2], obs, theta, d).unwrap(),
        data,
    )
}
