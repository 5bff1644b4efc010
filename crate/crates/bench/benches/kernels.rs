use criterion::{criterion_group, criterion_main, Criterion};

use qpart_core::digits::{self, Basis};
use qpart_core::hamiltonian::TfimSpec;
use qpart_core::optimize::{build_vqe_model, init_uniform_angles, tfim_preset};
use qpart_core::{PartitionLayout, Pauli, PauliString, RestrictedUnitary, SubsystemCircuit};
use std::hint::black_box;

fn pauli_products(c: &mut Criterion) {
    let a = PauliString::from_ops(&[Pauli::X, Pauli::Y, Pauli::Z, Pauli::I].repeat(16));
    let b = PauliString::from_ops(&[Pauli::Z, Pauli::Z, Pauli::Y, Pauli::X].repeat(16));
    c.bench_function("pauli_multiply_64q", |bch| {
        bch.iter(|| black_box(&a).multiply(black_box(&b)).unwrap())
    });
    c.bench_function("pauli_commutes_64q", |bch| {
        bch.iter(|| black_box(&a).commutes(black_box(&b)).unwrap())
    });
}

fn conjugation(c: &mut Criterion) {
    for n in [8, 16] {
        let (s, gens) = tfim_preset(n).unwrap();
        let h = qpart_core::hamiltonian::build_tfim(&TfimSpec::critical(n).unwrap()).unwrap();
        let layout = PartitionLayout::equal(n, s).unwrap();
        let v = RestrictedUnitary::from_labels(n, &gens, vec![0.0; gens.len()]).unwrap();
        c.bench_function(&format!("conjugate_tfim_n{n}"), |bch| {
            bch.iter(|| v.conjugate(&h, &layout).unwrap())
        });
    }
}

fn simulation(c: &mut Criterion) {
    let circ = SubsystemCircuit::hardware_efficient(8, 2).unwrap();
    let theta: Vec<f64> = (0..circ.param_count()).map(|k| 0.1 * k as f64).collect();
    c.bench_function("run_8q_two_rounds", |bch| {
        bch.iter(|| circ.run(black_box(&theta), &[]).unwrap())
    });
}

fn model_evaluation(c: &mut Criterion) {
    let (s, gens) = tfim_preset(8).unwrap();
    let mut vqe = build_vqe_model(&TfimSpec::critical(8).unwrap(), s, &gens, 2).unwrap();
    init_uniform_angles(&mut vqe, 1).unwrap();
    c.bench_function("vqe_n8_evaluate", |bch| {
        bch.iter(|| vqe.evaluate(&[]).unwrap())
    });

    let data = digits::load_bundled(0).unwrap();
    let sample = data.train[0].features();
    let mut cls = digits::build_classifier(Basis::Full).unwrap();
    qpart_core::optimize::init_supervised(&mut cls, 0, 0.1).unwrap();
    c.bench_function("classifier_full_evaluate", |bch| {
        bch.iter(|| cls.evaluate(black_box(&sample)).unwrap())
    });
}

criterion_group!(
    benches,
    pauli_products,
    conjugation,
    simulation,
    model_evaluation
);
criterion_main!(benches);
