//! 1D transverse-field Ising model with periodic boundaries and two exact
//! ground-state references: matrix-free restarted Lanczos and the
//! Jordan–Wigner free-fermion closed form.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Observable, Pauli, PauliString, Phase};

/// `H = −J Σ XᵢXᵢ₊₁ − h Σ Zᵢ` on `n` spins, `X_{n+1} = X_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfimSpec {
    pub n: usize,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "one")]
    pub h: f64,
}

fn one() -> f64 {
    1.0
}

impl TfimSpec {
    pub fn new(n: usize, j: f64, h: f64) -> Result<Self> {
        let spec = TfimSpec { n, j, h };
        spec.validate()?;
        Ok(spec)
    }

    /// Critical point `J = h = 1`.
    pub fn critical(n: usize) -> Result<Self> {
        Self::new(n, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "TFIM needs at least 2 spins, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

pub fn build_tfim(spec: &TfimSpec) -> Result<Observable> {
    spec.validate()?;
    let n = spec.n;
    let mut obs = Observable::new(n);
    for i in 0..n {
        let bond = PauliString::from_sparse(n, &[(i, Pauli::X)])?
            .multiply(&PauliString::from_sparse(n, &[((i + 1) % n, Pauli::X)])?)?;
        obs.add_term(Complex64::new(-spec.j, 0.0), &bond)?;
    }
    for i in 0..n {
        obs.add_term(
            Complex64::new(-spec.h, 0.0),
            &PauliString::single(n, i, Pauli::Z)?,
        )?;
    }
    Ok(obs.simplify())
}

/// A real symmetric operator given as a sum of Pauli actions on basis states.
#[derive(Debug, Clone)]
pub struct PauliOperator {
    n_qubits: usize,
    // (x mask, z mask, real matrix prefactor)
    terms: Vec<(usize, usize, f64)>,
}

impl PauliOperator {
    /// Accepts observables whose matrix is real symmetric.
    pub fn from_observable(obs: &Observable) -> Result<Self> {
        if obs.n_qubits() > 30 {
            return Err(Error::TooManyQubits {
                n_qubits: obs.n_qubits(),
                max: 30,
            });
        }
        let mut terms = Vec::with_capacity(obs.len());
        for (p, c) in obs.terms() {
            // P|b⟩ = i^{#Y} (-1)^{|b∧z|} |b⊕x⟩
            let pref = c * Phase::from_power(p.y_count()).to_complex();
            if pref.im.abs() > 1e-12 || c.im.abs() > 1e-12 {
                return Err(Error::NonHermitian(format!(
                    "{c} · {p} is not real symmetric"
                )));
            }
            terms.push((p.x_mask() as usize, p.z_mask() as usize, pref.re));
        }
        Ok(PauliOperator {
            n_qubits: obs.n_qubits(),
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        const CHUNK: usize = 1 << 12;
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let base = ci * CHUNK;
                for (off, o) in chunk.iter_mut().enumerate() {
                    let target = base + off;
                    let mut acc = 0.0;
                    for &(x, z, c) in &self.terms {
                        let src = target ^ x;
                        let val = c * v[src];
                        if (src & z).count_ones().is_multiple_of(2) {
                            acc += val;
                        } else {
                            acc -= val;
                        }
                    }
                    *o = acc;
                }
            });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Converged when `‖Hv − λv‖ ≤ tol · max(1, |λ|)`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            krylov_dim: 40,
            max_restarts: 500,
            tolerance: 1e-9,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult {
    pub energy: f64,
    pub residual: f64,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    norm
}

/// Lowest eigenvalue by restarted Lanczos with full reorthogonalization.
pub fn lanczos_ground_energy(op: &PauliOperator, opts: &LanczosOptions) -> Result<LanczosResult> {
    let dim = op.dim();
    let m = opts.krylov_dim.min(dim).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut start);

    let mut matvecs = 0;
    let mut last_residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut exhausted = false;
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let bnorm = dot(&w, &w).sqrt();
            beta.push(bnorm);
            if bnorm < 1e-13 {
                exhausted = true;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|x| x / bnorm).collect());
            }
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let s = eig.eigenvectors.column(imin);
        let residual = if exhausted {
            0.0
        } else {
            (beta[k - 1] * s[k - 1]).abs()
        };
        last_residual = residual;
        if residual <= opts.tolerance * theta.abs().max(1.0) {
            return Ok(LanczosResult {
                energy: theta,
                residual,
                matvecs,
            });
        }
        let mut ritz = vec![0.0; dim];
        for (coef, b) in s.iter().zip(&basis) {
            ritz.iter_mut().zip(b).for_each(|(x, y)| *x += coef * y);
        }
        normalize(&mut ritz);
        start = ritz;
    }
    Err(Error::NoConvergence {
        iterations: matvecs,
        residual: last_residual,
    })
}

/// Exact ground energy by matrix-free Lanczos (`n ≤ 20`).
pub fn exact_ground_energy(spec: &TfimSpec) -> Result<f64> {
    if spec.n > 20 {
        return Err(Error::TooManyQubits {
            n_qubits: spec.n,
            max: 20,
        });
    }
    let op = PauliOperator::from_observable(&build_tfim(spec)?)?;
    Ok(lanczos_ground_energy(&op, &LanczosOptions::default())?.energy)
}

/// Closed-form ground energy from the Jordan–Wigner mapping:
/// `E₀ = −Σ_k √(J² + h² − 2Jh cos k)` over the antiperiodic momenta
/// `k = (2m−1)π/n`. Valid for even `n` and `J, h ≥ 0`, where the even-parity
/// sector holds the ground state.
pub fn free_fermion_ground_energy(spec: &TfimSpec) -> Result<f64> {
    spec.validate()?;
    if !spec.n.is_multiple_of(2) || spec.j < 0.0 || spec.h < 0.0 {
        return Err(Error::InvalidArgument(
            "free-fermion formula implemented for even n and non-negative couplings".into(),
        ));
    }
    let (j, h) = (spec.j, spec.h);
    let n = spec.n as f64;
    Ok(-(1..=spec.n)
        .map(|m| {
            let k = (2 * m - 1) as f64 * PI / n;
            (j * j + h * h - 2.0 * j * h * k.cos()).max(0.0).sqrt()
        })
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_spin_wrap_merges() {
        let obs = build_tfim(&TfimSpec::new(2, 0.7, 0.3).unwrap()).unwrap();
        assert_eq!(obs.len(), 3);
        let xx = PauliString::parse(2, "X1 X2").unwrap();
        assert!((obs.coefficient(&xx).re + 1.4).abs() < 1e-15);
    }

    #[test]
    fn four_spins_eight_terms() {
        let obs = build_tfim(&TfimSpec::critical(4).unwrap()).unwrap();
        assert_eq!(obs.len(), 8);
        assert!(obs.terms().all(|(_, c)| c == Complex64::new(-1.0, 0.0)));
        assert!(obs.is_hermitian(0.0));
    }

    #[test]
    fn free_spins() {
        let spec = TfimSpec::new(2, 0.0, 1.0).unwrap();
        assert!((exact_ground_energy(&spec).unwrap() + 2.0).abs() < 1e-10);
        assert!((free_fermion_ground_energy(&spec).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_chain() {
        assert!(TfimSpec::new(1, 1.0, 1.0).is_err());
        assert!(free_fermion_ground_energy(&TfimSpec {
            n: 5,
            j: 1.0,
            h: 1.0
        })
        .is_err());
    }

    #[test]
    fn lanczos_matches_closed_form_small() {
        for n in [4, 6, 8] {
            let spec = TfimSpec::critical(n).unwrap();
            let a = exact_ground_energy(&spec).unwrap();
            let b = free_fermion_ground_energy(&spec).unwrap();
            assert!((a - b).abs() < 1e-9 * b.abs(), "n={n}: {a} vs {b}");
        }
    }
}
