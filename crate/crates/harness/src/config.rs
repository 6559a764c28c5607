//! Scenario files: what to build, which suites to run, and with which
//! tolerances.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bsrg_core::polynomial::MonomialRecord;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// A named verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SuiteName {
    #[serde(rename = "woodbury")]
    Woodbury,
    #[serde(rename = "qcheck")]
    Qcheck,
    #[serde(rename = "edA")]
    EdA,
    #[serde(rename = "preparation")]
    Preparation,
    #[serde(rename = "fps-composition")]
    FpsComposition,
    #[serde(rename = "crit-representation")]
    CritRepresentation,
    #[serde(rename = "newton-vs-fps")]
    NewtonVsFps,
    #[serde(rename = "deltaA")]
    DeltaA,
    #[serde(rename = "gaussian-detd")]
    GaussianDetd,
    #[serde(rename = "gaussian-quadrature")]
    GaussianQuadrature,
    #[serde(rename = "lattice")]
    Lattice,
}

impl SuiteName {
    pub const ALL: [SuiteName; 11] = [
        SuiteName::Woodbury,
        SuiteName::Qcheck,
        SuiteName::EdA,
        SuiteName::Preparation,
        SuiteName::FpsComposition,
        SuiteName::CritRepresentation,
        SuiteName::NewtonVsFps,
        SuiteName::DeltaA,
        SuiteName::GaussianDetd,
        SuiteName::GaussianQuadrature,
        SuiteName::Lattice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Woodbury => "woodbury",
            SuiteName::Qcheck => "qcheck",
            SuiteName::EdA => "edA",
            SuiteName::Preparation => "preparation",
            SuiteName::FpsComposition => "fps-composition",
            SuiteName::CritRepresentation => "crit-representation",
            SuiteName::NewtonVsFps => "newton-vs-fps",
            SuiteName::DeltaA => "deltaA",
            SuiteName::GaussianDetd => "gaussian-detd",
            SuiteName::GaussianQuadrature => "gaussian-quadrature",
            SuiteName::Lattice => "lattice",
        }
    }

    /// Generator stream of the suite; fixed so that a suite sees the same
    /// draws whichever other suites run.
    pub fn stream(self) -> u64 {
        Self::ALL.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                format!("unknown suite `{s}`, expected one of {}", names.join(", "))
            })
    }
}

/// The interaction polynomial `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum PolynomialConfig {
    #[default]
    Zero,
    /// `g·Σ_x φ*(x)φ(x)²`.
    Local { g: f64 },
    /// Random coefficients of the given degrees, drawn from the model stream.
    Random { degrees: Vec<usize>, scale: f64 },
    /// Tensor records, inline.
    Records { records: Vec<MonomialRecord> },
    /// Tensor records in a JSON file, relative to the scenario file.
    File { path: PathBuf },
}

/// The step data under test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// One-dimensional spaces, all kernels 1, `P = g·φ*φ²`.
    ScalarReference { g: f64 },
    /// Seeded random real `Q₋`, `Q` and positive-definite `𝔔`, `D`.
    Random {
        dims: [usize; 3],
        #[serde(default)]
        random_forms: bool,
        #[serde(default)]
        polynomial: PolynomialConfig,
    },
    /// Two blocking steps of a torus lattice; `𝔔 = fq·1`,
    /// `D = mass²·1 − lattice Laplacian`.
    Lattice {
        lattice: LatticeConfig,
        b: f64,
        fq: f64,
        mass: f64,
        #[serde(default)]
        polynomial: PolynomialConfig,
    },
    /// Explicit real matrices (rows), optional Gram matrices of `H₋, H, H₊`.
    Explicit {
        q_minus: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        fq: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
        b: f64,
        #[serde(default)]
        forms: Option<[Vec<Vec<f64>>; 3]>,
        #[serde(default)]
        polynomial: PolynomialConfig,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::ScalarReference { g: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub extents: Vec<usize>,
    pub block: Vec<usize>,
    /// Weights over block offsets (row-major); uniform when absent.
    #[serde(default)]
    pub profile: Option<Vec<f64>>,
    /// Accept profiles that do not sum to 1.
    #[serde(default)]
    pub unnormalized: bool,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    2
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            extents: vec![8, 4],
            block: vec![2, 2],
            profile: None,
            unnormalized: false,
            steps: 2,
        }
    }
}

/// Number of random draws per suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Draws {
    pub woodbury: usize,
    pub qcheck: usize,
    pub eda: usize,
    pub gaussian_detd: usize,
    /// Random evaluation points for pointwise identities.
    pub points: usize,
    /// Largest dimension in the Woodbury and `Q̌` draws.
    pub max_dim: usize,
}

impl Default for Draws {
    fn default() -> Self {
        Draws {
            woodbury: 100,
            qcheck: 100,
            eda: 25,
            gaussian_detd: 25,
            points: 20,
            max_dim: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub woodbury: f64,
    pub qcheck: f64,
    pub eda: f64,
    /// Draws whose kernels exceed this condition number are redrawn.
    pub eda_condition: f64,
    pub preparation_value: f64,
    pub preparation_gradient: f64,
    pub composition: f64,
    pub crit_representation: f64,
    /// Scalar-model leading coefficients.
    pub hand_values: f64,
    pub newton_ratio: [f64; 2],
    /// Absolute Newton–series agreement at the field scale; skipped when null.
    pub newton_absolute: Option<f64>,
    pub delta_a: f64,
    pub delta_a_free: f64,
    pub gaussian_detd: f64,
    pub insertion: f64,
    pub quadrature: f64,
    pub lattice: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            woodbury: 1e-11,
            qcheck: 1e-11,
            eda: 1e-11,
            eda_condition: 1e6,
            preparation_value: 1e-11,
            preparation_gradient: 1e-9,
            composition: 1e-10,
            crit_representation: 1e-10,
            hand_values: 1e-12,
            newton_ratio: [16.0, 64.0],
            newton_absolute: Some(1e-7),
            delta_a: 1e-8,
            delta_a_free: 1e-13,
            gaussian_detd: 1e-10,
            insertion: 1e-12,
            quadrature: 1e-3,
            lattice: 1e-14,
        }
    }
}

/// Polydisc radii of the small-field domains `N` and `N₊`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radii {
    pub n: f64,
    pub n_plus: f64,
}

impl Default for Radii {
    fn default() -> Self {
        Radii {
            n: 1.0,
            n_plus: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    pub nodes_per_axis: usize,
    pub check_nodes_per_axis: usize,
    pub theta_cutoff_sigmas: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            nodes_per_axis: 64,
            check_nodes_per_axis: 96,
            theta_cutoff_sigmas: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub suites: Vec<SuiteName>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    /// Field scale of the Newton-vs-series comparison and the `δA` points.
    #[serde(default = "default_field_scale")]
    pub field_scale: f64,
    #[serde(default)]
    pub draws: Draws,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub radii: Radii,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    /// Lattice of the `lattice` suite when the model is not a lattice.
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    /// Record wall-clock timings (makes reports non-reproducible).
    #[serde(default)]
    pub record_timings: bool,
    /// Directory that relative file references resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_max_order() -> usize {
    bsrg_core::fields::DEFAULT_MAX_ORDER
}

fn default_field_scale() -> f64 {
    0.1
}

impl ScenarioConfig {
    pub fn new(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults are valid")
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, why: &str| Err(HarnessError::Config(format!("{field}: {why}")));
        if self.max_order < 1 {
            return bad("max_order", "must be at least 1");
        }
        if self.field_scale.is_nan() || self.field_scale <= 0.0 {
            return bad("field_scale", "must be positive");
        }
        if [self.radii.n, self.radii.n_plus]
            .iter()
            .any(|r| r.is_nan() || *r <= 0.0)
        {
            return bad("radii", "must be positive");
        }
        if self.quadrature.nodes_per_axis == 0 || self.quadrature.check_nodes_per_axis == 0 {
            return bad("quadrature.nodes_per_axis", "must be positive");
        }
        let [lo, hi] = self.tolerances.newton_ratio;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return bad("tolerances.newton_ratio", "must be an interval [lo, hi]");
        }
        let polynomial = match &self.model {
            ModelConfig::ScalarReference { .. } => None,
            ModelConfig::Random { polynomial, .. }
            | ModelConfig::Lattice { polynomial, .. }
            | ModelConfig::Explicit { polynomial, .. } => Some(polynomial),
        };
        if let Some(PolynomialConfig::File { path }) = polynomial {
            let full = self.resolve(path);
            if !full.is_file() {
                return bad(
                    "model.polynomial.path",
                    &format!("{} does not exist", full.display()),
                );
            }
        }
        Ok(())
    }
}
