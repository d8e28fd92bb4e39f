//! Seeded smooth test data.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Lattice;
use crate::field::SampledField;

/// `Σ a_k cos(π ω_k·x + φ_k)` with integer frequencies and amplitudes
/// decaying like `1/(1+|ω|²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub seed: u64,
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: [f64; 3],
    pub phase: f64,
    pub amp: f64,
}

impl TrigPolynomial {
    pub fn seeded(seed: u64, dim: usize, terms: usize, max_freq: i32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..terms)
            .map(|_| {
                let mut freq = [0.0; 3];
                for f in freq.iter_mut().take(dim) {
                    *f = rng.random_range(-max_freq..=max_freq) as f64;
                }
                let w2: f64 = freq.iter().map(|f| f * f).sum();
                TrigTerm {
                    freq,
                    phase: rng.random_range(0.0..2.0 * PI),
                    amp: rng.random_range(-1.0..1.0) / (1.0 + w2),
                }
            })
            .collect();
        TrigPolynomial { seed, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let arg: f64 = x.iter().zip(&t.freq).map(|(a, b)| a * b).sum();
                t.amp * (PI * arg + t.phase).cos()
            })
            .sum()
    }

    pub fn sample(&self, lat: Arc<Lattice>) -> SampledField {
        SampledField::from_fn(lat, |x| self.eval(x))
    }
}

/// Default smooth fixture: six terms, frequencies up to 2.
pub fn smooth_field(seed: u64, lat: Arc<Lattice>) -> SampledField {
    TrigPolynomial::seeded(seed, lat.dim(), 6, 2).sample(lat)
}

/// Symmetric positive definite matrix with eigenvalues in `[0.2, 5]`.
pub fn spd_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |_, _| {
        rng.random_range(0.2..5.0)
    }));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
