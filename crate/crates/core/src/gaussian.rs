//! Gaussian integrals and the integral form of one step.
//!
//! Integrals over `𝒞H` use the volume form of the bilinear form restricted
//! to the real slice `φ* = conj(φ)`: in coordinates
//! `dμ = det G · Π dx_i dy_i / π` for `φ = x + iy`, so that
//! `∫ dμ e^{−⟨φ*, Mφ⟩} = 1/det M`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::action::{ActionSpec, DeltaAFormula, DELTA_A_ORDER};
use crate::error::{Error, Result};
use crate::fields::{newton_background, newton_critical, NewtonOptions};
use crate::kernels::{KernelSet, RGData};
use crate::linalg::{CMat, CVec, Operator, C64};

/// Smallest eigenvalue of the Hermitian part of `G·M`.
fn min_hermitian_eig(op: &Operator) -> f64 {
    let g = op.domain().gram().map(C64::from);
    let gm = g * op.entries();
    let h = (&gm + gm.adjoint()) * C64::from(0.5);
    h.symmetric_eigenvalues().min()
}

/// `∫ dμ e^{−⟨φ*, Mφ⟩} = 1/det M`; requires the Hermitian part of `M`
/// (with respect to the form) positive definite.
pub fn gaussian_exact(m: &Operator) -> Result<C64> {
    if !m.is_square() {
        return Err(Error::Shape(
            "a Gaussian kernel must act on one space".into(),
        ));
    }
    let min = min_hermitian_eig(m);
    if min <= 0.0 {
        return Err(Error::Precondition(format!(
            "the Hermitian part of M is not positive definite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(C64::from(1.0) / m.determinant())
}

/// Sum in a fixed pairwise order, independent of thread scheduling.
pub fn pairwise_sum(v: &[C64]) -> C64 {
    match v.len() {
        0 => C64::from(0.0),
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Composite Gauss–Legendre rule on `[a, b]`: `panels` panels of `per_panel` nodes.
fn composite_rule(a: f64, b: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let rule = gauss_quad::GaussLegendre::new(per_panel.try_into().expect("positive node count"));
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for &(x, w) in rule.as_node_weight_pairs().iter() {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Nodes and `dx dy/π` weights on the annulus `r0 ≤ |z| ≤ r1`: Gauss–Legendre
/// in the radius, the periodic trapezoid rule in the angle.
pub fn polar_grid(r0: f64, r1: f64, radial: usize, angular: usize) -> Vec<(C64, f64)> {
    let rule = gauss_quad::GaussLegendre::new(radial.try_into().expect("positive node count"));
    let mut out = Vec::with_capacity(radial * angular);
    for &(x, w) in rule.as_node_weight_pairs().iter() {
        let rho = r0 + 0.5 * (r1 - r0) * (x + 1.0);
        let weight = 0.5 * (r1 - r0) * w * rho * 2.0 / angular as f64;
        for k in 0..angular {
            let alpha = 2.0 * PI * k as f64 / angular as f64;
            out.push((C64::from_polar(rho, alpha), weight));
        }
    }
    out
}

/// The insertion constant `∫ dμ_{H₊} e^{−b⟨θ*−Qψ*, θ−Qψ⟩₊}` at several
/// shifts `ψ`.
#[derive(Clone, Debug, Serialize)]
pub struct InsertionConstant {
    /// `b^{−dim H₊}`
    pub expected: f64,
    /// Computed value at each shift.
    pub values: Vec<f64>,
    /// Largest `|value − expected|`.
    pub deviation: f64,
}

/// Computes the insertion integral numerically on the real slice. In
/// coordinates `w = √b·Lᵀθ` with `G₊ = LLᵀ` the integrand is
/// `b^{−n}·Π_k e^{−|w_k − c_k|²}/π`, `c = √b·LᵀQψ`; each real axis is
/// integrated with a composite Gauss–Legendre rule on a window fixed
/// independently of the shift.
pub fn insertion_constant(data: &RGData, shifts: &[CVec]) -> Result<InsertionConstant> {
    let n = data.h_plus.dim();
    let expected = data.b.powi(-(n as i32));
    let l = data
        .h_plus
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("form on H₊ not positive definite".into()))?
        .l();
    let map = l.transpose().map(C64::from) * data.q.entries() * C64::from(data.b.sqrt());
    let centers: Vec<CVec> = shifts
        .iter()
        .map(|psi| {
            if psi.len() != data.h.dim() {
                return Err(Error::Shape(format!("shift must lie in {}", data.h)));
            }
            Ok(&map * psi)
        })
        .collect::<Result<_>>()?;
    let reach = centers
        .iter()
        .flat_map(|c| c.iter().map(|z| z.re.abs().max(z.im.abs())))
        .fold(0.0, f64::max);
    let half = (reach + 9.0).ceil();
    let nodes = composite_rule(-half, half, (2.0 * half) as usize, 16);
    let axis = |c: f64| {
        nodes
            .iter()
            .map(|&(x, w)| w * (-(x - c) * (x - c)).exp())
            .sum::<f64>()
            / PI.sqrt()
    };
    let values: Vec<f64> = centers
        .iter()
        .map(|c| expected * c.iter().map(|z| axis(z.re) * axis(z.im)).product::<f64>())
        .collect();
    let deviation = values
        .iter()
        .map(|v| (v - expected).abs())
        .fold(0.0, f64::max);
    Ok(InsertionConstant {
        expected,
        values,
        deviation,
    })
}

/// Both sides of the determinant form of the integrated step.
#[derive(Clone, Debug, Serialize)]
pub struct DeterminantCheck {
    /// `det Δ⁻¹`
    pub lhs: f64,
    /// `b^{dim H₊} det Δ̌⁻¹ det C`
    pub rhs: f64,
    pub relative_residual: f64,
}

/// `det Δ⁻¹ = b^{dim H₊} det Δ̌⁻¹ det C` with `Δ̌ = Q̌ − Q̌Q̌₋ŠQ̌₋*Q̌`: the
/// integrated step for `P = 0`, `E = 0` over the full spaces.
pub fn prop_d_gaussian_check(data: &RGData) -> Result<DeterminantCheck> {
    let ks = KernelSet::compute(data)?;
    let delta_check = ks.delta_check();
    for (name, op) in [("Δ", &ks.delta), ("Δ̌", &delta_check), ("C", &ks.c)] {
        let min = min_hermitian_eig(op);
        if min <= 0.0 {
            return Err(Error::Precondition(format!(
                "{name} is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
    }
    let lhs = (C64::from(1.0) / ks.delta.determinant()).re;
    let rhs = (C64::from(data.b.powi(data.h_plus.dim() as i32)) * ks.c.determinant()
        / delta_check.determinant())
    .re;
    Ok(DeterminantCheck {
        lhs,
        rhs,
        relative_residual: (lhs - rhs).abs() / lhs.abs(),
    })
}

/// How the fluctuation exponent is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FluctuationMode {
    /// `δA` as the literal difference of effective actions.
    Direct,
    /// `δA` by the covariance formula with the series for `δφ̌⁺`.
    Formula,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Gauss nodes per real axis (radius and angle) of each polar grid.
    pub nodes: usize,
    /// Node count of the comparison run.
    pub check_nodes: usize,
    /// The large-field θ integral is truncated at `r‖Q‖ + sigmas/√b`.
    pub theta_cutoff_sigmas: f64,
    /// Radius of the polydisc `N`.
    pub radius: f64,
    /// Radius of the polydisc `N₊`.
    pub radius_plus: f64,
    /// Allowed relative difference of the two sides.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            nodes: 64,
            check_nodes: 96,
            theta_cutoff_sigmas: 6.0,
            radius: 1.0,
            radius_plus: 1.0,
            tolerance: 1e-3,
        }
    }
}

/// The perturbative correction `E(ψ*, ψ)`.
pub type Correction<'a> = &'a (dyn Fn(&CVec, &CVec) -> C64 + Sync);

fn scalar(x: C64) -> CVec {
    CVec::from_element(1, x)
}

/// Quadrature evaluation of both sides at one grid size.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureSides {
    pub lhs: C64,
    pub small_field: C64,
    pub large_field: C64,
    /// `b^{dim H₊}·(small_field + large_field)`
    pub rhs: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureCheck {
    pub sides: QuadratureSides,
    pub check_sides: QuadratureSides,
    pub relative_difference: f64,
    /// Largest relative change of either side between the two grids.
    pub self_consistency: f64,
}

fn check_scalar_setting(spec: &ActionSpec) -> Result<()> {
    if spec.dims() != (1, 1, 1) {
        return Err(Error::Precondition(format!(
            "quadrature mode needs dim H₋ = dim H = dim H₊ = 1, got {:?}",
            spec.dims()
        )));
    }
    Ok(())
}

/// `Σ |c|·r^{deg−2}` over the monomials of `P`, the size of the interaction
/// relative to the quadratic part on the polydisc of radius `r`.
fn interaction_size(spec: &ActionSpec, r: f64) -> f64 {
    spec.p
        .as_series()
        .terms()
        .iter()
        .map(|(e, c)| c[0].norm() * r.powi(crate::series::degree(e) as i32 - 2))
        .sum()
}

/// Values `A(ψ̄, ψ; φ_bg)` and `E(ψ̄, ψ)` on a ψ grid.
struct PsiSamples {
    nodes: Vec<(C64, f64)>,
    weight_scale: f64,
    exponent: Vec<C64>,
}

fn sample_psi(
    spec: &ActionSpec,
    e: Option<Correction>,
    radius: f64,
    nodes: usize,
    opts: &NewtonOptions,
) -> Result<PsiSamples> {
    let grid = polar_grid(0.0, radius, nodes, nodes);
    let exponent = grid
        .par_iter()
        .map(|&(psi, _)| {
            let (ps, p) = (scalar(psi.conj()), scalar(psi));
            let bg = newton_background(spec, &ps, &p, opts)?;
            let a = spec.eval_a(&ps, &p, &bg.star, &bg.plain)?;
            Ok(e.map_or(C64::from(0.0), |f| f(&ps, &p)) - a)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PsiSamples {
        nodes: grid,
        weight_scale: spec.h().gram()[(0, 0)],
        exponent,
    })
}

fn evaluate_sides(
    spec: &ActionSpec,
    e: Option<Correction>,
    cfg: &QuadratureConfig,
    nodes: usize,
    opts: &NewtonOptions,
) -> Result<QuadratureSides> {
    let psi = sample_psi(spec, e, cfg.radius, nodes, opts)?;
    let b = spec.rg.b;
    let q = spec.rg.q.entries()[(0, 0)];
    let g_plus = spec.h_plus().gram()[(0, 0)];
    let terms: Vec<C64> = psi
        .nodes
        .iter()
        .zip(&psi.exponent)
        .map(|(&(_, w), &x)| x.exp() * (w * psi.weight_scale))
        .collect();
    let lhs = pairwise_sum(&terms);

    // ∫_N dμ(ψ) e^{−A_eff(θ̄, θ; ψ̄, ψ; φ_bg) + E}
    let inner = |theta: C64| -> C64 {
        let v: Vec<C64> = psi
            .nodes
            .iter()
            .zip(&psi.exponent)
            .map(|(&(p, w), &x)| {
                let u = theta - q * p;
                (x - b * g_plus * u.conj() * u).exp() * (w * psi.weight_scale)
            })
            .collect();
        pairwise_sum(&v)
    };

    let small = polar_grid(0.0, cfg.radius_plus, nodes, nodes)
        .par_iter()
        .map(|&(theta, w)| {
            let (ts, t) = (scalar(theta.conj()), scalar(theta));
            let crit = newton_critical(spec, &ts, &t, opts)?;
            let a_check = spec.eval_acheck(&ts, &t, &crit.phi_star, &crit.phi)?;
            let a_eff_cr = spec.eval_aeff(
                &ts,
                &t,
                &crit.psi_star,
                &crit.psi,
                &crit.phi_star,
                &crit.phi,
            )?;
            let e_cr = e.map_or(C64::from(0.0), |f| f(&crit.psi_star, &crit.psi));
            // F(θ) = ∫_N dμ(ψ) e^{−δA + δE}, δA, δE relative to ψ_cr
            let e_shift = e_cr - a_eff_cr;
            let fluct = inner(theta) * (-e_shift).exp();
            Ok((-a_check + e_cr).exp() * fluct * (w * g_plus))
        })
        .collect::<Result<Vec<_>>>()?;
    let small_field = pairwise_sum(&small);

    let cutoff = cfg.radius * spec.rg.q.norm() + cfg.theta_cutoff_sigmas / (b * g_plus).sqrt();
    let large = if cutoff > cfg.radius_plus {
        let v: Vec<C64> = polar_grid(cfg.radius_plus, cutoff, nodes, nodes)
            .par_iter()
            .map(|&(theta, w)| inner(theta) * (w * g_plus))
            .collect();
        pairwise_sum(&v)
    } else {
        C64::from(0.0)
    };
    let rhs = (small_field + large) * b;
    Ok(QuadratureSides {
        lhs,
        small_field,
        large_field: large,
        rhs,
    })
}

/// Both sides of the integrated step on `dim H = dim H₊ = 1` by quadrature,
/// with the grid-refinement check.
pub fn prop_d_quadrature_check(
    spec: &ActionSpec,
    e: Option<Correction>,
    cfg: &QuadratureConfig,
) -> Result<QuadratureCheck> {
    check_scalar_setting(spec)?;
    let size = interaction_size(spec, cfg.radius);
    if size > 0.1 {
        return Err(Error::Precondition(format!(
            "interaction too large for quadrature on radius {} (size {size:e} > 0.1)",
            cfg.radius
        )));
    }
    let opts = NewtonOptions::default();
    let sides = evaluate_sides(spec, e, cfg, cfg.nodes, &opts)?;
    let check_sides = evaluate_sides(spec, e, cfg, cfg.check_nodes, &opts)?;
    let rel = |a: C64, b: C64| (a - b).norm() / b.norm();
    let self_consistency = rel(sides.lhs, check_sides.lhs).max(rel(sides.rhs, check_sides.rhs));
    let allowed = cfg.tolerance / 2.0;
    if self_consistency > allowed {
        let (coarse, fine) = if rel(sides.lhs, check_sides.lhs) >= rel(sides.rhs, check_sides.rhs) {
            (sides.lhs.re, check_sides.lhs.re)
        } else {
            (sides.rhs.re, check_sides.rhs.re)
        };
        return Err(Error::Quadrature {
            coarse,
            fine,
            allowed,
        });
    }
    Ok(QuadratureCheck {
        relative_difference: rel(sides.lhs, sides.rhs),
        sides,
        check_sides,
        self_consistency,
    })
}

/// `F(θ*, θ) = ∫_{D(θ*,θ)} dμ e^{−δA + δE}` on the slice `ψ*_cr + δψ* =
/// conj(ψ_cr + δψ)`, `ψ_cr + δψ ∈ N`, by a polar grid with `nodes` per axis.
pub fn fluctuation_integral(
    spec: &ActionSpec,
    e: Option<Correction>,
    theta: C64,
    radius: f64,
    nodes: usize,
    mode: FluctuationMode,
) -> Result<C64> {
    check_scalar_setting(spec)?;
    let opts = NewtonOptions::default();
    let (ts, t) = (scalar(theta.conj()), scalar(theta));
    let crit = newton_critical(spec, &ts, &t, &opts)?;
    let formula = match mode {
        FluctuationMode::Formula => Some(DeltaAFormula::new(spec, &crit, DELTA_A_ORDER)?),
        FluctuationMode::Direct => None,
    };
    let base = spec.eval_aeff(
        &ts,
        &t,
        &crit.psi_star,
        &crit.psi,
        &crit.phi_star,
        &crit.phi,
    )?;
    let e_cr = e.map_or(C64::from(0.0), |f| f(&crit.psi_star, &crit.psi));
    let weight_scale = spec.h().gram()[(0, 0)];
    let terms = polar_grid(0.0, radius, nodes, nodes)
        .par_iter()
        .map(|&(psi, w)| {
            let (ps, p) = (scalar(psi.conj()), scalar(psi));
            let (ds, d) = (&ps - &crit.psi_star, &p - &crit.psi);
            let delta_a = match &formula {
                Some(f) => f.eval(&ds, &d)?,
                None => {
                    let bg = newton_background(spec, &ps, &p, &opts)?;
                    spec.eval_aeff(&ts, &t, &ps, &p, &bg.star, &bg.plain)? - base
                }
            };
            let delta_e = e.map_or(C64::from(0.0), |f| f(&ps, &p)) - e_cr;
            Ok((delta_e - delta_a).exp() * (w * weight_scale))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

/// `F = det C` for `P = 0`, `E = 0` over the full space.
pub fn fluctuation_integral_exact(spec: &ActionSpec) -> Result<C64> {
    if !spec.p.is_zero() {
        return Err(Error::Precondition(
            "the exact fluctuation integral needs P = 0".into(),
        ));
    }
    Ok(spec.kernels.c.determinant())
}

/// Diagonal kernel helper for tests and scenarios.
pub fn diagonal_operator(space: &crate::Space, diag: &[f64]) -> Result<Operator> {
    let m = CMat::from_diagonal(&CVec::from_iterator(
        diag.len(),
        diag.iter().map(|&x| C64::from(x)),
    ));
    Operator::new(space.clone(), space.clone(), m)
}
