//! Named channel families.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CqChannel;
use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;
use crate::linalg::{random_density, random_pure_vector, CVector, DensityMatrix, NumericTolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Preset {
    /// `Z_q` symmetric channel embedded diagonally: the input survives with
    /// probability `1-p`, otherwise a uniformly random other symbol is output.
    ClassicalSymmetric { q: usize, p: f64 },
    /// `Z_q` with real qubit outputs `cos θ_x |0⟩ + sin θ_x |1⟩`, `q` = number of angles.
    PureStates { angles: Vec<f64> },
    /// `Z_q` with outputs `(1-λ)|x⟩⟨x| + λ I/q`.
    DepolarizedOrthogonal { q: usize, lambda: f64 },
    /// `Z_q` with random outputs of random rank in dimension `k`.
    Random { q: usize, k: usize, seed: u64 },
    /// `Z_q` erasure channel: `|x⟩⟨x|` with probability `1-ε`, else the flag `|q⟩⟨q|`.
    Erasure { q: usize, epsilon: f64 },
}

pub fn preset(p: &Preset) -> Result<CqChannel> {
    let tol = NumericTolerances::default();
    match p {
        Preset::ClassicalSymmetric { q, p } => {
            check_prob("p", *p)?;
            let g = cyclic(*q)?;
            let states = (0..*q)
                .map(|x| {
                    let v: Vec<f64> = (0..*q)
                        .map(|y| if x == y { 1.0 - p } else if *q > 1 { p / (*q - 1) as f64 } else { 0.0 })
                        .collect();
                    DensityMatrix::diagonal(&v, &tol)
                })
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g, &states)
        }
        Preset::PureStates { angles } => {
            let g = cyclic(angles.len())?;
            let states = angles
                .iter()
                .map(|t| {
                    let v = CVector::from_vec(vec![Complex64::new(t.cos(), 0.0), Complex64::new(t.sin(), 0.0)]);
                    DensityMatrix::pure(&v, &tol)
                })
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g, &states)
        }
        Preset::DepolarizedOrthogonal { q, lambda } => {
            check_prob("lambda", *lambda)?;
            let g = cyclic(*q)?;
            let states = (0..*q)
                .map(|x| {
                    let v: Vec<f64> = (0..*q)
                        .map(|y| lambda / *q as f64 + if x == y { 1.0 - lambda } else { 0.0 })
                        .collect();
                    DensityMatrix::diagonal(&v, &tol)
                })
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g, &states)
        }
        Preset::Random { q, k, seed } => {
            let g = cyclic(*q)?;
            if *k == 0 {
                return Err(Error::validation("k must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let states: Vec<DensityMatrix> = (0..*q)
                .map(|_| {
                    let rank = rng.gen_range(1..=*k);
                    if rank == 1 {
                        DensityMatrix::pure(&random_pure_vector(*k, &mut rng), &tol).expect("unit vector")
                    } else {
                        random_density(*k, rank, &mut rng)
                    }
                })
                .collect();
            CqChannel::from_states(g, &states)
        }
        Preset::Erasure { q, epsilon } => {
            check_prob("epsilon", *epsilon)?;
            let g = cyclic(*q)?;
            let states = (0..*q)
                .map(|x| {
                    let mut v = vec![0.0; q + 1];
                    v[x] = 1.0 - epsilon;
                    v[*q] += epsilon;
                    DensityMatrix::diagonal(&v, &tol)
                })
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g, &states)
        }
    }
}

/// Two pure qubit states with the given overlap `|⟨ψ_0|ψ_1⟩|`.
pub fn pure_overlap(overlap: f64) -> Result<CqChannel> {
    check_prob("overlap", overlap)?;
    preset(&Preset::PureStates {
        angles: vec![0.0, overlap.acos()],
    })
}

fn cyclic(q: usize) -> Result<FiniteAbelianGroup> {
    if q == 0 {
        return Err(Error::validation("q must be positive"));
    }
    FiniteAbelianGroup::cyclic(u32::try_from(q).map_err(|_| Error::validation("q too large"))?)
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must lie in [0, 1], got {v}")))
    }
}
