//! Periodic lattices, rectangular block pavings and averaging operators.
//!
//! Points are indexed row-major (the last axis varies fastest). A coarse
//! point with coordinates `y` owns the fine points `y·block + o` for offsets
//! `o ∈ [0, block)` in every axis; the profile weight for offset `o` is
//! `profile[row_major(o)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, Operator, Space, SpaceSpec, C64};

const PROFILE_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLattice {
    extents: Vec<usize>,
}

impl TorusLattice {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.is_empty() || extents.contains(&0) {
            return Err(Error::Shape(format!(
                "lattice extents must be positive, got {extents:?}"
            )));
        }
        Ok(TorusLattice { extents })
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn num_points(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.extents)
            .fold(0, |acc, (&c, &e)| acc * e + (c % e))
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.extents.len()];
        for (slot, &e) in out.iter_mut().zip(&self.extents).rev() {
            *slot = index % e;
            index /= e;
        }
        out
    }

    /// The space of real fields on this lattice with the ℓ² form.
    pub fn space(&self) -> Space {
        let label: Vec<String> = self.extents.iter().map(|e| e.to_string()).collect();
        SpaceSpec::euclidean(format!("X({})", label.join(",")), self.num_points())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScheme {
    block: Vec<usize>,
    profile: Vec<f64>,
}

impl BlockScheme {
    /// Equal weights `1/|block|`.
    pub fn uniform(block: Vec<usize>) -> Result<Self> {
        if block.is_empty() || block.contains(&0) {
            return Err(Error::Shape(format!(
                "block sides must be positive, got {block:?}"
            )));
        }
        let volume: usize = block.iter().product();
        Ok(BlockScheme {
            profile: vec![1.0 / volume as f64; volume],
            block,
        })
    }

    /// Profile weights over block offsets (row-major). Weights must sum to 1.
    pub fn with_profile(block: Vec<usize>, profile: Vec<f64>) -> Result<Self> {
        let scheme = Self::unnormalized(block, profile)?;
        let total: f64 = scheme.profile.iter().sum();
        if (total - 1.0).abs() > PROFILE_SUM_TOL {
            return Err(Error::Profile(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(scheme)
    }

    /// Profile weights with no normalization requirement.
    pub fn unnormalized(block: Vec<usize>, profile: Vec<f64>) -> Result<Self> {
        let mut scheme = Self::uniform(block)?;
        if profile.len() != scheme.profile.len() {
            return Err(Error::Profile(format!(
                "profile has {} weights, block volume is {}",
                profile.len(),
                scheme.profile.len()
            )));
        }
        scheme.profile = profile;
        Ok(scheme)
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    fn check(&self, lat: &TorusLattice, step: usize) -> Result<()> {
        if self.block.len() != lat.extents.len() {
            return Err(Error::Shape(format!(
                "block {:?} has a different rank than lattice {:?}",
                self.block, lat.extents
            )));
        }
        for (axis, (&extent, &block)) in lat.extents.iter().zip(&self.block).enumerate() {
            if extent % block != 0 {
                return Err(Error::Divisibility {
                    step,
                    axis,
                    extent,
                    block,
                });
            }
        }
        Ok(())
    }
}

/// The coarse lattice `X₊` whose points own one block each.
pub fn sublattice(lat: &TorusLattice, scheme: &BlockScheme) -> Result<TorusLattice> {
    scheme.check(lat, 0)?;
    coarse(lat, scheme)
}

fn coarse(lat: &TorusLattice, scheme: &BlockScheme) -> Result<TorusLattice> {
    TorusLattice::new(
        lat.extents
            .iter()
            .zip(&scheme.block)
            .map(|(e, b)| e / b)
            .collect(),
    )
}

/// The averaging operator `Q: fields on lat → fields on the sublattice`.
pub fn averaging_operator(lat: &TorusLattice, scheme: &BlockScheme) -> Result<Operator> {
    scheme.check(lat, 0)?;
    build_averaging(lat, scheme)
}

fn build_averaging(lat: &TorusLattice, scheme: &BlockScheme) -> Result<Operator> {
    let sub = coarse(lat, scheme)?;
    let block_lat = TorusLattice::new(scheme.block.clone())?;
    let mut m = CMat::zeros(sub.num_points(), lat.num_points());
    for y in 0..sub.num_points() {
        let base: Vec<usize> = sub
            .coords(y)
            .iter()
            .zip(&scheme.block)
            .map(|(c, b)| c * b)
            .collect();
        for (o, &w) in scheme.profile.iter().enumerate() {
            let fine: Vec<usize> = base
                .iter()
                .zip(block_lat.coords(o))
                .map(|(b, off)| b + off)
                .collect();
            m[(y, lat.index(&fine))] += C64::from(w);
        }
    }
    Operator::new(lat.space(), sub.space(), m)
}

/// Nearest-neighbour periodic Laplacian
/// `(Δf)(x) = Σ_axes f(x+e) + f(x−e) − 2f(x)`.
pub fn laplacian(lat: &TorusLattice) -> Operator {
    let n = lat.num_points();
    let mut m = CMat::zeros(n, n);
    for x in 0..n {
        let c = lat.coords(x);
        for (axis, &extent) in lat.extents.iter().enumerate() {
            for step in [1, extent - 1] {
                let mut y = c.clone();
                y[axis] = (y[axis] + step) % extent;
                m[(x, lat.index(&y))] += C64::from(1.0);
            }
            m[(x, x)] -= C64::from(2.0);
        }
    }
    Operator::new(lat.space(), lat.space(), m).expect("square by construction")
}

/// `Q̌₋ = Q ∘ Q₋`.
pub fn compose_averaging(q: &Operator, q_minus: &Operator) -> Result<Operator> {
    q.compose(q_minus)
}

#[derive(Clone, Debug)]
pub struct TowerLevel {
    pub lattice: TorusLattice,
    /// Averaging from the previous level (identity at level 0).
    pub step: Operator,
    /// Averaging from the finest lattice.
    pub cumulative: Operator,
}

/// The decreasing chain `lat ⊃ lat₁ ⊃ … ⊃ lat_steps`.
pub fn build_tower(
    lat: &TorusLattice,
    scheme: &BlockScheme,
    steps: usize,
) -> Result<Vec<TowerLevel>> {
    let id = Operator::identity(&lat.space());
    let mut levels = vec![TowerLevel {
        lattice: lat.clone(),
        step: id.clone(),
        cumulative: id,
    }];
    for k in 1..=steps {
        let prev = levels.last().expect("non-empty");
        scheme.check(&prev.lattice, k)?;
        let step = build_averaging(&prev.lattice, scheme)?;
        let cumulative = compose_averaging(&step, &prev.cumulative)?;
        levels.push(TowerLevel {
            lattice: coarse(&prev.lattice, scheme)?,
            step,
            cumulative,
        });
    }
    Ok(levels)
}
