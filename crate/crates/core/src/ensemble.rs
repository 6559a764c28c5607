//! Seeded random draws for identity checks.
//!
//! The generator is ChaCha20 keyed from a 64-bit seed (`rand_chacha`'s
//! `seed_from_u64`), a counter-mode stream, so a seed names one fixed
//! sequence of draws. Positive-definite kernels are drawn as `A Aᵀ + 0.1·1`
//! with standard-normal `A`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec, Operator, Space, SpaceSpec, C64};

/// Diagonal shift added to `A Aᵀ` in positive-definite draws.
pub const SPD_SHIFT: f64 = 0.1;

pub struct Ensemble {
    rng: ChaCha20Rng,
}

impl Ensemble {
    pub fn new(seed: u64) -> Self {
        Ensemble {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator keyed by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ensemble { rng }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn dim(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    pub fn complex(&mut self) -> C64 {
        C64::new(self.normal(), self.normal())
    }

    pub fn real_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn spd_matrix(&mut self, n: usize) -> DMatrix<f64> {
        let a = self.real_matrix(n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * SPD_SHIFT
    }

    pub fn complex_vector(&mut self, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| self.complex())
    }

    /// Complex vector with entries uniform in the polydisc of the given radius.
    pub fn polydisc_vector(&mut self, n: usize, radius: f64) -> CVec {
        CVec::from_fn(n, |_, _| {
            let r = radius * self.uniform(0.0, 1.0).sqrt();
            let a = self.uniform(0.0, std::f64::consts::TAU);
            C64::from_polar(r, a)
        })
    }

    pub fn real_operator(&mut self, domain: &Space, codomain: &Space) -> Operator {
        let m = self.real_matrix(codomain.dim(), domain.dim());
        Operator::from_real(domain.clone(), codomain.clone(), &m).expect("shape by construction")
    }

    pub fn complex_operator(&mut self, domain: &Space, codomain: &Space) -> Operator {
        let m = CMat::from_fn(codomain.dim(), domain.dim(), |_, _| self.complex());
        Operator::new(domain.clone(), codomain.clone(), m).expect("shape by construction")
    }

    /// Operator that is symmetric and positive definite with respect to the
    /// form of `space`: `G⁻¹ (A Aᵀ + 0.1·1)`.
    pub fn spd_operator(&mut self, space: &Space) -> Operator {
        let m = self.spd_matrix(space.dim());
        let m = space.gram_inv() * m;
        Operator::from_real(space.clone(), space.clone(), &m).expect("shape by construction")
    }

    /// Space with a random positive-definite form.
    pub fn random_space(&mut self, name: &str, dim: usize) -> Space {
        let a = self.real_matrix(dim, dim);
        let g = (&a * a.transpose()) * (0.5 / dim as f64) + DMatrix::identity(dim, dim);
        let g = (&g + g.transpose()) * 0.5;
        SpaceSpec::with_gram(name, g).expect("positive definite by construction")
    }
}
