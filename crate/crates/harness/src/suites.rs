//! The verification suites. Each suite draws from its own generator stream
//! and records every check it runs; computational failures become failed
//! checks.

use bsrg_core::action::{delta_a_direct, ActionSpec, DeltaAFormula, DELTA_A_ORDER};
use bsrg_core::ensemble::Ensemble;
use bsrg_core::fields::{
    newton_critical, newton_series_discrepancy, BackgroundField, FormalFields, NewtonBackground,
    NewtonOptions,
};
use bsrg_core::gaussian::{
    insertion_constant, prop_d_gaussian_check, prop_d_quadrature_check, QuadratureConfig,
};
use bsrg_core::kernels::{identity_suite_eda, qcheck_alt, qcheck_recursion, KernelSet, RGData};
use bsrg_core::lattice::averaging_operator;
use bsrg_core::lattice::BlockScheme;
use bsrg_core::linalg::{
    inverse, max_abs, relative_residual, singular_values, woodbury_left, woodbury_right,
};
use bsrg_core::polynomial::PolynomialP;
use bsrg_core::{CVec, Operator, Result, SpaceSpec, C64};

use crate::config::{LatticeConfig, ModelConfig, ScenarioConfig, SuiteName};
use crate::model::lattice_tower;
use crate::report::{SuiteBuilder, SuiteReport};

/// Newton–series discrepancies below this are dominated by rounding; the
/// scaling ratio is measured above it.
pub const RATIO_FLOOR: f64 = 1e-10;
/// Largest number of field-scale doublings when searching for that range.
const MAX_DOUBLINGS: usize = 8;
/// Redraw budget for draws exceeding the condition cap.
const MAX_REDRAWS: usize = 1000;

/// Whether the suite evaluates the scenario model.
pub fn uses_model(suite: SuiteName) -> bool {
    !matches!(suite, SuiteName::Woodbury | SuiteName::Lattice)
}

pub fn run_suite(suite: SuiteName, cfg: &ScenarioConfig, spec: Option<&ActionSpec>) -> SuiteReport {
    let mut ens = Ensemble::with_stream(cfg.seed, suite.stream());
    let mut out = SuiteBuilder::default();
    let spec = || spec.expect("model built for model suites");
    match suite {
        SuiteName::Woodbury => woodbury(cfg, &mut ens, &mut out),
        SuiteName::Qcheck => qcheck(cfg, spec(), &mut ens, &mut out),
        SuiteName::EdA => eda(cfg, spec(), &mut ens, &mut out),
        SuiteName::Preparation => preparation(cfg, spec(), &mut ens, &mut out),
        SuiteName::FpsComposition => fps_composition(cfg, spec(), &mut out),
        SuiteName::CritRepresentation => crit_representation(cfg, spec(), &mut out),
        SuiteName::NewtonVsFps => newton_vs_fps(cfg, spec(), &mut ens, &mut out),
        SuiteName::DeltaA => delta_a(cfg, spec(), &mut ens, &mut out),
        SuiteName::GaussianDetd => gaussian_detd(cfg, spec(), &mut ens, &mut out),
        SuiteName::GaussianQuadrature => gaussian_quadrature(cfg, spec(), &mut out),
        SuiteName::Lattice => lattice(cfg, &mut ens, &mut out),
    }
    out.finish()
}

/// Largest value of a fallible per-draw residual; the first error wins.
fn max_over<T>(
    items: impl IntoIterator<Item = T>,
    mut f: impl FnMut(T) -> Result<f64>,
) -> Result<f64> {
    let mut m = 0.0f64;
    for x in items {
        m = m.max(f(x)?);
    }
    Ok(m)
}

fn scalar_model_g(cfg: &ScenarioConfig) -> Option<f64> {
    match cfg.model {
        ModelConfig::ScalarReference { g } => Some(g),
        _ => None,
    }
}

/// Both inversion identities on random complex operators.
fn woodbury(cfg: &ScenarioConfig, ens: &mut Ensemble, out: &mut SuiteBuilder) {
    let n_max = cfg.draws.max_dim.max(1);
    let mut left = Ok(0.0f64);
    let mut right = Ok(0.0f64);
    let mut cond = 0.0f64;
    for _ in 0..cfg.draws.woodbury {
        let v = SpaceSpec::euclidean("V", ens.dim(1, n_max));
        let w = SpaceSpec::euclidean("W", ens.dim(1, n_max));
        let f = ens.spd_operator(&v);
        let g = ens.complex_operator(&w, &w);
        let q = ens.complex_operator(&v, &w);
        let q_star = ens.complex_operator(&w, &v);
        let id = Operator::identity(&w);
        let residuals = (|| -> Result<(f64, f64)> {
            let f_inv = inverse(&f, 1e12, "f not invertible")?;
            let lhs = &id + &(&g * &(&q * &(&f_inv * &q_star)));
            cond = cond.max(lhs.condition_number());
            let l = relative_residual(
                (&woodbury_left(&f, &g, &q, &q_star, 1e12)? * &lhs).entries(),
                id.entries(),
            );
            let lhs = &id + &(&q * &(&f_inv * &(&q_star * &g)));
            let r = relative_residual(
                (&woodbury_right(&f, &g, &q, &q_star, 1e12)? * &lhs).entries(),
                id.entries(),
            );
            Ok((l, r))
        })();
        match residuals {
            Ok((l, r)) => {
                left = left.map(|m| m.max(l));
                right = right.map(|m| m.max(r));
            }
            Err(e) => {
                left = left.and(Err(e.clone()));
                right = right.and(Err(e));
            }
        }
    }
    out.value("draws", cfg.draws.woodbury as f64);
    // the residual of a product with the inverse is bounded below by ε·cond
    out.condition("largest condition number of 1 + gqf⁻¹q*", cond);
    out.residual("left identity", left, cfg.tolerances.woodbury);
    out.residual("right identity", right, cfg.tolerances.woodbury);
}

/// The recursion and the alternative form of `Q̌`.
fn qcheck(cfg: &ScenarioConfig, spec: &ActionSpec, ens: &mut Ensemble, out: &mut SuiteBuilder) {
    let forms = |data: &RGData| -> Result<f64> {
        Ok(relative_residual(
            qcheck_recursion(data)?.entries(),
            qcheck_alt(data)?.entries(),
        ))
    };
    let n_max = cfg.draws.max_dim.max(2);
    let draws = max_over(0..cfg.draws.qcheck, |_| {
        let n = ens.dim(2, n_max);
        let np = ens.dim(1, n.min(8));
        forms(&RGData::random(ens, (n, n, np), false))
    });
    out.value("draws", cfg.draws.qcheck as f64);
    out.residual("random draws", draws, cfg.tolerances.qcheck);
    out.residual("model", forms(&spec.rg), cfg.tolerances.qcheck);
}

/// Kernel representations (a)–(e) on well-conditioned draws and the model.
fn eda(cfg: &ScenarioConfig, spec: &ActionSpec, ens: &mut Ensemble, out: &mut SuiteBuilder) {
    let mut worst = [0.0f64; 6];
    let mut max_cond = 0.0f64;
    let mut redraws = 0usize;
    let mut error = None;
    let mut accepted = 0;
    while accepted < cfg.draws.eda && error.is_none() {
        let data = RGData::random(ens, (6, 4, 2), false);
        let cond = match KernelSet::compute(&data) {
            Ok(ks) => ks.max_condition(),
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        if cond > cfg.tolerances.eda_condition {
            redraws += 1;
            if redraws > MAX_REDRAWS {
                error = Some(bsrg_core::Error::Precondition(
                    "no draw met the condition cap".into(),
                ));
            }
            continue;
        }
        accepted += 1;
        max_cond = max_cond.max(cond);
        match identity_suite_eda(&data) {
            Ok(r) => {
                for (w, (_, v)) in worst.iter_mut().zip(r.named()) {
                    *w = w.max(v);
                }
            }
            Err(e) => error = Some(e),
        }
    }
    out.value("draws", accepted as f64);
    out.value("redraws", redraws as f64);
    out.condition("largest kernel condition number", max_cond);
    let names = ["(a)", "(b)", "(b) family", "(c)", "(d)", "(e)"];
    for (name, w) in names.iter().zip(worst) {
        match &error {
            None => out.at_most(&format!("random draws {name}"), w, cfg.tolerances.eda),
            Some(e) => out.failed(&format!("random draws {name}"), e),
        }
    }
    match identity_suite_eda(&spec.rg) {
        Ok(r) => out.at_most("model", r.max(), cfg.tolerances.eda),
        Err(e) => out.failed("model", e),
    }
    if let Ok(ks) = KernelSet::compute(&spec.rg) {
        out.condition("model kernels", ks.max_condition());
    }
}

/// `Ǎ = A_eff∘ψ̃` and its gradient identity at random complex points.
fn preparation(
    cfg: &ScenarioConfig,
    spec: &ActionSpec,
    ens: &mut Ensemble,
    out: &mut SuiteBuilder,
) {
    let (nm, _, np) = spec.dims();
    let mut value = 0.0f64;
    let mut gradient = 0.0f64;
    let mut error = None;
    for _ in 0..cfg.draws.points {
        let (ts, t) = (ens.complex_vector(np), ens.complex_vector(np));
        let (fs, f) = (ens.complex_vector(nm), ens.complex_vector(nm));
        match spec.preparation_check(&ts, &t, &fs, &f) {
            Ok((v, g)) => {
                value = value.max(v);
                gradient = gradient.max(g);
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    out.value("points", cfg.draws.points as f64);
    match error {
        None => {
            out.at_most("value identity", value, cfg.tolerances.preparation_value);
            out.at_most(
                "gradient identity",
                gradient,
                cfg.tolerances.preparation_gradient,
            );
        }
        Some(e) => {
            out.failed("value identity", &e);
            out.failed("gradient identity", e);
        }
    }
}

fn coefficient(s: &bsrg_core::series::Series, e: &[u8]) -> C64 {
    s.coefficient(e).map_or(C64::from(0.0), |c| c[0])
}

/// `φ̌_bg = φ_bg∘ψ_cr` coefficientwise, and the series field equations.
fn fps_composition(cfg: &ScenarioConfig, spec: &ActionSpec, out: &mut SuiteBuilder) {
    let ff = match FormalFields::solve(spec, cfg.max_order) {
        Ok(ff) => ff,
        Err(e) => return out.failed("composition", e),
    };
    out.value("max order", cfg.max_order as f64);
    out.at_most(
        "composition",
        ff.composition_residual(),
        cfg.tolerances.composition,
    );
    for (name, r) in ff.equation_residuals(spec) {
        out.at_most(&format!("equation {name}"), r, cfg.tolerances.composition);
    }
    if let (Some(g), true) = (scalar_model_g(cfg), cfg.max_order >= 2) {
        let ns = &ff.nextscale.unstarred;
        out.at_most(
            "next-scale θ coefficient",
            (coefficient(ns, &[0, 1]) - 1.0 / 3.0).norm(),
            cfg.tolerances.hand_values,
        );
        out.at_most(
            "next-scale θ² coefficient",
            (coefficient(ns, &[0, 2]) + 2.0 * g / 27.0).norm(),
            cfg.tolerances.hand_values,
        );
    }
}

/// `φ̌_bg` solves the next-scale equations and `ψ_cr` the critical ones.
fn crit_representation(cfg: &ScenarioConfig, spec: &ActionSpec, out: &mut SuiteBuilder) {
    let ff = match FormalFields::solve(spec, cfg.max_order) {
        Ok(ff) => ff,
        Err(e) => return out.failed("representation", e),
    };
    out.value("max order", cfg.max_order as f64);
    out.at_most(
        "representation",
        ff.crit_representation_residual(spec),
        cfg.tolerances.crit_representation,
    );
    if let (Some(g), true) = (scalar_model_g(cfg), cfg.max_order >= 2) {
        let tol = cfg.tolerances.hand_values;
        let (cs, c) = (&ff.critical.starred, &ff.critical.unstarred);
        out.at_most(
            "critical θ coefficient",
            (coefficient(c, &[0, 1]) - 2.0 / 3.0).norm(),
            tol,
        );
        out.at_most(
            "critical θ² coefficient",
            (coefficient(c, &[0, 2]) + g / 27.0).norm(),
            tol,
        );
        out.at_most(
            "critical* θ* coefficient",
            (coefficient(cs, &[1, 0]) - 2.0 / 3.0).norm(),
            tol,
        );
        out.at_most(
            "critical* θ*θ coefficient",
            (coefficient(cs, &[1, 1]) + 2.0 * g / 27.0).norm(),
            tol,
        );
    }
}

/// Newton solutions against truncated series: absolute agreement at the
/// field scale and the truncation-order scaling under field doubling.
fn newton_vs_fps(
    cfg: &ScenarioConfig,
    spec: &ActionSpec,
    ens: &mut Ensemble,
    out: &mut SuiteBuilder,
) {
    let ff = match FormalFields::solve(spec, cfg.max_order) {
        Ok(ff) => ff,
        Err(e) => return out.failed("scaling ratio", e),
    };
    let np = spec.dims().2;
    let (ds, d) = (ens.polydisc_vector(np, 1.0), ens.polydisc_vector(np, 1.0));
    let norm = C64::from(max_abs(&ds).max(max_abs(&d)).max(f64::MIN_POSITIVE));
    let (ds, d) = (ds / norm, d / norm);
    let opts = NewtonOptions::default();
    let at = |s: f64| {
        newton_series_discrepancy(
            spec,
            &ff,
            &(&ds * C64::from(s)),
            &(&d * C64::from(s)),
            &opts,
        )
    };

    match at(cfg.field_scale) {
        Ok(e) => {
            out.value("discrepancy at field scale", e);
            if let Some(tol) = cfg.tolerances.newton_absolute {
                out.at_most("absolute agreement", e, tol);
            }
        }
        Err(e) => {
            if cfg.tolerances.newton_absolute.is_some() {
                out.failed("absolute agreement", &e);
            }
            return out.failed("scaling ratio", e);
        }
    }
    let ratio = (|| -> Result<(f64, f64, f64)> {
        let mut s = cfg.field_scale;
        let mut e1 = at(s)?;
        for _ in 0..MAX_DOUBLINGS {
            if e1 >= RATIO_FLOOR {
                break;
            }
            s *= 2.0;
            e1 = at(s)?;
        }
        let e2 = at(2.0 * s)?;
        Ok((s, e1, e2))
    })();
    match ratio {
        Ok((s, e1, e2)) => {
            out.value("ratio field scale", s);
            out.value("discrepancy at ratio scale", e1);
            out.value("discrepancy at doubled scale", e2);
            out.within("scaling ratio", e2 / e1, cfg.tolerances.newton_ratio);
        }
        Err(e) => out.failed("scaling ratio", e),
    }
}

/// `δA` by direct evaluation and by the covariance formula; the
/// interaction-free case against `⟨δψ*, C⁻¹δψ⟩`, the direct value relative
/// to the two actions it subtracts.
fn delta_a(cfg: &ScenarioConfig, spec: &ActionSpec, ens: &mut Ensemble, out: &mut SuiteBuilder) {
    let (_, nh, np) = spec.dims();
    let s = cfg.field_scale;
    let opts = NewtonOptions::default();
    let bg = NewtonBackground(opts);
    let agreement = max_over(0..cfg.draws.points, |_| {
        let (ts, t) = (
            ens.polydisc_vector(np, 2.0 * s),
            ens.polydisc_vector(np, 2.0 * s),
        );
        let (ds, d) = (ens.polydisc_vector(nh, s), ens.polydisc_vector(nh, s));
        let crit = newton_critical(spec, &ts, &t, &opts)?;
        let formula = DeltaAFormula::new(spec, &crit, DELTA_A_ORDER)?.eval(&ds, &d)?;
        let direct = delta_a_direct(spec, &bg, &crit, &ds, &d)?;
        Ok((formula - direct).norm())
    });
    out.value("points", cfg.draws.points as f64);
    out.residual("formula vs direct", agreement, cfg.tolerances.delta_a);

    let free = match ActionSpec::new(spec.rg.clone(), PolynomialP::zero(spec.h_minus())) {
        Ok(f) => f,
        Err(e) => {
            out.failed("interaction-free formula", &e);
            return out.failed("interaction-free direct", e);
        }
    };
    let mut formula_res = Ok(0.0f64);
    let mut direct_res = Ok(0.0f64);
    let c_inv = free.c_inverse();
    for _ in 0..cfg.draws.points {
        let (ts, t) = (ens.complex_vector(np), ens.complex_vector(np));
        let (ds, d) = (ens.complex_vector(nh), ens.complex_vector(nh));
        let r = (|| -> Result<(f64, f64)> {
            let c_inv = c_inv.as_ref().map_err(Clone::clone)?;
            let exact = free.h().pair(&ds, &(c_inv * &d));
            let crit = newton_critical(&free, &ts, &t, &opts)?;
            let scale = 1.0 + exact.norm();
            let formula = DeltaAFormula::new(&free, &crit, DELTA_A_ORDER)?.eval(&ds, &d)?;
            let direct = delta_a_direct(&free, &bg, &crit, &ds, &d)?;
            // the direct value is a difference of two actions; measure it against their size
            let action = |ps: &CVec, p: &CVec| -> Result<C64> {
                let (fs, f) = bg.background(&free, ps, p)?;
                free.eval_aeff(&crit.theta_star, &crit.theta, ps, p, &fs, &f)
            };
            let operands = action(&crit.psi_star, &crit.psi)?.norm()
                + action(&(&crit.psi_star + &ds), &(&crit.psi + &d))?.norm();
            Ok((
                (formula - exact).norm() / scale,
                (direct - exact).norm() / (scale + operands),
            ))
        })();
        match r {
            Ok((f, d)) => {
                formula_res = formula_res.map(|m| m.max(f));
                direct_res = direct_res.map(|m| m.max(d));
            }
            Err(e) => {
                formula_res = formula_res.and(Err(e.clone()));
                direct_res = direct_res.and(Err(e));
            }
        }
    }
    out.residual(
        "interaction-free formula",
        formula_res,
        cfg.tolerances.delta_a_free,
    );
    out.residual(
        "interaction-free direct",
        direct_res,
        cfg.tolerances.delta_a_free,
    );
}

/// The determinant form of the integrated step and the insertion constant.
fn gaussian_detd(
    cfg: &ScenarioConfig,
    spec: &ActionSpec,
    ens: &mut Ensemble,
    out: &mut SuiteBuilder,
) {
    let draws = max_over(0..cfg.draws.gaussian_detd, |_| {
        let dims = (ens.dim(2, 6), ens.dim(2, 4), ens.dim(1, 2));
        Ok(prop_d_gaussian_check(&RGData::random(ens, dims, false))?.relative_residual)
    });
    out.value("draws", cfg.draws.gaussian_detd as f64);
    out.residual("random draws", draws, cfg.tolerances.gaussian_detd);
    match prop_d_gaussian_check(&spec.rg) {
        Ok(r) => {
            out.value("model det Δ⁻¹", r.lhs);
            out.value("model b^n₊ det Δ̌⁻¹ det C", r.rhs);
            out.at_most("model", r.relative_residual, cfg.tolerances.gaussian_detd);
        }
        Err(e) => out.failed("model", e),
    }
    let shifts: Vec<CVec> = (0..10).map(|_| ens.complex_vector(spec.dims().1)).collect();
    match insertion_constant(&spec.rg, &shifts) {
        Ok(ic) => {
            out.value("insertion constant b^-n₊", ic.expected);
            out.at_most("insertion constant", ic.deviation, cfg.tolerances.insertion);
        }
        Err(e) => out.failed("insertion constant", e),
    }
}

/// Both sides of the integrated step by quadrature on `dim H = dim H₊ = 1`.
fn gaussian_quadrature(cfg: &ScenarioConfig, spec: &ActionSpec, out: &mut SuiteBuilder) {
    let qc = QuadratureConfig {
        nodes: cfg.quadrature.nodes_per_axis,
        check_nodes: cfg.quadrature.check_nodes_per_axis,
        theta_cutoff_sigmas: cfg.quadrature.theta_cutoff_sigmas,
        radius: cfg.radii.n,
        radius_plus: cfg.radii.n_plus,
        tolerance: cfg.tolerances.quadrature,
    };
    match prop_d_quadrature_check(spec, None, &qc) {
        Ok(r) => {
            out.value("lhs re", r.sides.lhs.re);
            out.value("lhs im", r.sides.lhs.im);
            out.value("rhs re", r.sides.rhs.re);
            out.value("rhs im", r.sides.rhs.im);
            out.value("small-field term re", r.sides.small_field.re);
            out.value("large-field term re", r.sides.large_field.re);
            out.at_most("two sides", r.relative_difference, qc.tolerance);
            out.at_most("grid refinement", r.self_consistency, qc.tolerance / 2.0);
        }
        Err(e) => {
            out.failed("two sides", &e);
            out.failed("grid refinement", e);
        }
    }
}

fn lattice_config(cfg: &ScenarioConfig) -> LatticeConfig {
    match (&cfg.model, &cfg.lattice) {
        (_, Some(lc)) => lc.clone(),
        (ModelConfig::Lattice { lattice, .. }, None) => lattice.clone(),
        _ => LatticeConfig::default(),
    }
}

/// Sublattice chain, averaging operators and their structural properties.
fn lattice(cfg: &ScenarioConfig, ens: &mut Ensemble, out: &mut SuiteBuilder) {
    let lc = lattice_config(cfg);
    let tol = cfg.tolerances.lattice;
    let (lat, scheme, tower) = match lattice_tower(&lc) {
        Ok(t) => t,
        Err(e) => return out.failed("tower", e),
    };
    out.value("levels", tower.len() as f64);
    out.value("finest points", lat.num_points() as f64);

    let extents = tower
        .windows(2)
        .map(|w| {
            let expect: Vec<usize> = w[0]
                .lattice
                .extents()
                .iter()
                .zip(scheme.block())
                .map(|(e, b)| e / b)
                .collect();
            (expect != w[1].lattice.extents()) as usize
        })
        .sum::<usize>();
    out.at_most("sublattice extents", extents as f64, 0.0);

    let total: f64 = scheme.profile().iter().sum();
    if (total - 1.0).abs() <= 1e-12 {
        let constants = tower[1..]
            .iter()
            .map(|lv| {
                let ones = CVec::from_element(lv.step.domain().dim(), C64::from(1.0));
                max_abs(&lv.step.act(&ones).add_scalar(C64::from(-1.0)))
            })
            .fold(0.0, f64::max);
        out.at_most("constants preserved", constants, tol);
    }

    let rank_defect = tower[1..]
        .iter()
        .map(|lv| {
            let sv = singular_values(lv.step.entries());
            let top = sv.iter().cloned().fold(0.0, f64::max);
            let rank = sv.iter().filter(|&&s| s > 1e-12 * top).count();
            rank.abs_diff(lv.step.codomain().dim())
        })
        .sum::<usize>();
    out.at_most("full row rank", rank_defect as f64, 0.0);

    if let Some(lv) = tower.get(1) {
        let fine = &tower[0].lattice;
        let coarse = &lv.lattice;
        let psi = ens.complex_vector(fine.num_points());
        let shift = |v: &CVec, lat: &bsrg_core::lattice::TorusLattice, by: usize| {
            CVec::from_fn(v.len(), |i, _| {
                let mut c = lat.coords(i);
                c[0] = (c[0] + lat.extents()[0] - by % lat.extents()[0]) % lat.extents()[0];
                v[lat.index(&c)]
            })
        };
        let lhs = lv.step.act(&shift(&psi, fine, scheme.block()[0]));
        let rhs = shift(&lv.step.act(&psi), coarse, 1);
        out.at_most("translation equivariance", max_abs(&(lhs - rhs)), tol);
    }

    if lc.profile.is_none() {
        // uniform profiles: k steps of blocks b average like one step of blocks b^k
        let composite = max_over(tower.iter().enumerate().skip(1), |(k, lv)| {
            let block: Vec<usize> = scheme.block().iter().map(|b| b.pow(k as u32)).collect();
            let direct = averaging_operator(&lat, &BlockScheme::uniform(block)?)?;
            Ok(relative_residual(direct.entries(), lv.cumulative.entries()))
        });
        out.residual("cumulative averaging", composite, tol);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_has_a_distinct_stream() {
        let mut streams: Vec<u64> = SuiteName::ALL.iter().map(|s| s.stream()).collect();
        streams.sort();
        streams.dedup();
        assert_eq!(streams.len(), SuiteName::ALL.len());
        assert!(!streams.contains(&crate::model::MODEL_STREAM));
    }

    #[test]
    fn woodbury_suite_passes_at_seed_one() {
        let r = run_suite(SuiteName::Woodbury, &ScenarioConfig::new(1), None);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checks.len(), 2);
    }

    #[test]
    fn lattice_suite_on_the_default_lattice() {
        let r = run_suite(SuiteName::Lattice, &ScenarioConfig::new(1), None);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checks.len(), 5);
    }

    #[test]
    fn failures_are_recorded_not_thrown() {
        // D = 0 is not invertible: the edA model check fails, the suite still reports
        let cfg = ScenarioConfig::from_json(
            r#"{"seed": 1, "draws": {"eda": 2},
                "model": {"kind": "explicit", "q_minus": [[1.0]], "q": [[1.0]], "fq": [[1.0]], "d": [[0.0]], "b": 1.0}}"#,
            std::path::Path::new("."),
        )
        .unwrap();
        let spec = crate::model::build_spec(&cfg).unwrap();
        let r = run_suite(SuiteName::EdA, &cfg, Some(&spec));
        assert!(!r.passed);
        assert!(r.checks["model"].error.is_some());
        assert!(r.checks["random draws (a)"].passed);
    }
}
