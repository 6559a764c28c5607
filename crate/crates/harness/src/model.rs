//! Builds the step data of a scenario.

use bsrg_core::action::ActionSpec;
use bsrg_core::ensemble::Ensemble;
use bsrg_core::kernels::RGData;
use bsrg_core::lattice::{build_tower, laplacian, BlockScheme, TorusLattice, TowerLevel};
use bsrg_core::polynomial::{MonomialRecord, PolynomialP};
use bsrg_core::{Operator, Space, SpaceSpec, C64};
use nalgebra::DMatrix;

use crate::config::{LatticeConfig, ModelConfig, PolynomialConfig, ScenarioConfig};
use crate::error::HarnessError;

/// Generator stream of the model draws, disjoint from the suite streams.
pub const MODEL_STREAM: u64 = 0;

pub fn build_spec(cfg: &ScenarioConfig) -> Result<ActionSpec, HarnessError> {
    let mut ens = Ensemble::with_stream(cfg.seed, MODEL_STREAM);
    let (rg, polynomial) = match &cfg.model {
        ModelConfig::ScalarReference { g } => return Ok(ActionSpec::scalar_reference(*g)),
        ModelConfig::Random {
            dims,
            random_forms,
            polynomial,
        } => {
            if dims.contains(&0) {
                return Err(HarnessError::Config(
                    "model.dims: dimensions must be positive".into(),
                ));
            }
            (
                RGData::random(&mut ens, (dims[0], dims[1], dims[2]), *random_forms),
                polynomial,
            )
        }
        ModelConfig::Lattice {
            lattice,
            b,
            fq,
            mass,
            polynomial,
        } => (lattice_data(lattice, *b, *fq, *mass)?, polynomial),
        ModelConfig::Explicit {
            q_minus,
            q,
            fq,
            d,
            b,
            forms,
            polynomial,
        } => (
            explicit_data(q_minus, q, fq, d, *b, forms.as_ref())?,
            polynomial,
        ),
    };
    let p = build_polynomial(cfg, polynomial, &rg.h_minus, &mut ens)?;
    Ok(ActionSpec::new(rg, p)?)
}

fn build_polynomial(
    cfg: &ScenarioConfig,
    pc: &PolynomialConfig,
    space: &Space,
    ens: &mut Ensemble,
) -> Result<PolynomialP, HarnessError> {
    let n = space.dim();
    Ok(match pc {
        PolynomialConfig::Zero => PolynomialP::zero(space),
        PolynomialConfig::Local { g } => {
            let mut p = PolynomialP::zero(space);
            if *g != 0.0 {
                for x in 0..n {
                    let mut e = vec![0u8; 2 * n];
                    e[x] = 1;
                    e[n + x] = 2;
                    p.add_monomial(e, C64::from(*g))?;
                }
            }
            p
        }
        PolynomialConfig::Random { degrees, scale } => {
            if degrees.iter().any(|&d| d < 2) {
                return Err(HarnessError::Config(
                    "model.polynomial.degrees: degrees must be at least 2".into(),
                ));
            }
            PolynomialP::random(ens, space, degrees, *scale)
        }
        PolynomialConfig::Records { records } => PolynomialP::from_records(space, records)?,
        PolynomialConfig::File { path } => {
            let full = cfg.resolve(path);
            let text = std::fs::read_to_string(&full)?;
            let records: Vec<MonomialRecord> = serde_json::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", full.display())))?;
            PolynomialP::from_records(space, &records)?
        }
    })
}

pub fn lattice_tower(
    lc: &LatticeConfig,
) -> Result<(TorusLattice, BlockScheme, Vec<TowerLevel>), HarnessError> {
    let lat = TorusLattice::new(lc.extents.clone())?;
    let scheme = match (&lc.profile, lc.unnormalized) {
        (None, _) => BlockScheme::uniform(lc.block.clone())?,
        (Some(p), false) => BlockScheme::with_profile(lc.block.clone(), p.clone())?,
        (Some(p), true) => BlockScheme::unnormalized(lc.block.clone(), p.clone())?,
    };
    let tower = build_tower(&lat, &scheme, lc.steps)?;
    Ok((lat, scheme, tower))
}

/// `X₋ ⊃ X ⊃ X₊` from two blocking steps; `𝔔 = fq·1`, `D = mass²·1 − Δ`.
fn lattice_data(lc: &LatticeConfig, b: f64, fq: f64, mass: f64) -> Result<RGData, HarnessError> {
    let two_steps = LatticeConfig {
        steps: 2,
        ..lc.clone()
    };
    let (lat, _, tower) = lattice_tower(&two_steps)?;
    let h_minus = lat.space();
    let d = &Operator::identity(&h_minus).scale(mass * mass) - &laplacian(&lat);
    let h = tower[1].lattice.space();
    Ok(RGData::new(
        tower[1].step.clone(),
        tower[2].step.clone(),
        b,
        Operator::identity(&h).scale(fq),
        d,
    )?)
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, HarnessError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::Config(format!(
            "model.{name}: expected a non-empty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn explicit_data(
    q_minus: &[Vec<f64>],
    q: &[Vec<f64>],
    fq: &[Vec<f64>],
    d: &[Vec<f64>],
    b: f64,
    forms: Option<&[Vec<Vec<f64>>; 3]>,
) -> Result<RGData, HarnessError> {
    let (qm, q, fq, d) = (
        matrix("q_minus", q_minus)?,
        matrix("q", q)?,
        matrix("fq", fq)?,
        matrix("d", d)?,
    );
    let dims = [qm.ncols(), qm.nrows(), q.nrows()];
    let names = ["H₋", "H", "H₊"];
    let spaces: Vec<Space> = match forms {
        None => names
            .iter()
            .zip(dims)
            .map(|(n, d)| SpaceSpec::euclidean(*n, d))
            .collect(),
        Some(grams) => names
            .iter()
            .zip(grams)
            .map(|(n, g)| Ok(SpaceSpec::with_gram(*n, matrix("forms", g)?)?))
            .collect::<Result<_, HarnessError>>()?,
    };
    let op = |name: &str, dom: &Space, cod: &Space, m: &DMatrix<f64>| {
        Operator::from_real(dom.clone(), cod.clone(), m)
            .map_err(|e| HarnessError::Config(format!("model.{name}: {e}")))
    };
    Ok(RGData::new(
        op("q_minus", &spaces[0], &spaces[1], &qm)?,
        op("q", &spaces[1], &spaces[2], &q)?,
        b,
        op("fq", &spaces[1], &spaces[1], &fq)?,
        op("d", &spaces[0], &spaces[0], &d)?,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(model: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(
            &format!(r#"{{"seed": 3, "model": {model}}}"#),
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn scalar_reference_is_the_default() {
        let sp = build_spec(&ScenarioConfig::new(1)).unwrap();
        assert_eq!(sp.dims(), (1, 1, 1));
    }

    #[test]
    fn random_models_are_seeded() {
        let c = cfg(
            r#"{"kind": "random", "dims": [3, 2, 1], "polynomial": {"kind": "random", "degrees": [3, 4], "scale": 0.3}}"#,
        );
        let a = build_spec(&c).unwrap();
        let b = build_spec(&c).unwrap();
        assert_eq!(a.dims(), (3, 2, 1));
        assert_eq!(a.rg.q.entries(), b.rg.q.entries());
        assert_eq!(a.p.to_records(), b.p.to_records());
        assert!(a.p.is_at_least_cubic());
    }

    #[test]
    fn lattice_models_use_two_blocking_steps() {
        let c = cfg(
            r#"{"kind": "lattice", "lattice": {"extents": [8], "block": [2]}, "b": 1.0, "fq": 1.0, "mass": 1.0,
                        "polynomial": {"kind": "local", "g": 0.1}}"#,
        );
        let sp = build_spec(&c).unwrap();
        assert_eq!(sp.dims(), (8, 4, 2));
        assert_eq!(sp.p.to_records().len(), 1);
        assert_eq!(sp.p.max_degree(), 3);
    }

    #[test]
    fn explicit_models_match_the_scalar_reference() {
        let c = cfg(
            r#"{"kind": "explicit", "q_minus": [[1.0]], "q": [[1.0]], "fq": [[1.0]], "d": [[1.0]], "b": 1.0,
                        "polynomial": {"kind": "local", "g": 0.05}}"#,
        );
        let sp = build_spec(&c).unwrap();
        let srm = ActionSpec::scalar_reference(0.05);
        assert_eq!(sp.kernels.c.entries(), srm.kernels.c.entries());
        assert_eq!(sp.p.to_records(), srm.p.to_records());
        let bad = cfg(
            r#"{"kind": "explicit", "q_minus": [[1.0, 2.0], [1.0]], "q": [[1.0]], "fq": [[1.0]], "d": [[1.0]], "b": 1.0}"#,
        );
        assert!(build_spec(&bad)
            .unwrap_err()
            .to_string()
            .contains("q_minus"));
    }
}
