//! Background, critical and next-scale background fields.
//!
//! With `B = diag(S*, S)` and `P'` the stacked gradient `(P'_*, P')`, the
//! background fields solve the primed equations
//!
//! ```text
//! φ_(*) = S^(*)Q₋*𝔔ψ_(*) − S^(*)P'_(*)(φ*, φ)
//! ```
//!
//! and the next-scale fields the same with `Š, Q̌₋*Q̌, θ`. The critical fields
//! solve `(bQ*Q + 𝔔)ψ_(*) = bQ*θ_(*) + 𝔔Q₋φ_(*)bg(ψ*, ψ)`.
//!
//! Formal solutions are [`SeriesPair`]s with no constant term, found by the
//! lower-triangular recursion: the linear part is inverted once and every
//! further sweep fixes one more total degree. Numerical solutions come from
//! Newton's method with the exact Jacobian and step halving.

use std::collections::BTreeMap;

use crate::action::ActionSpec;
use crate::error::{Error, Result};
use crate::linalg::{block_diag, inverse_matrix, solve_matrix, split, stack, CMat, CVec, C64};
use crate::series::{coefficient_residual, Series, SymmetricTensor};

pub const DEFAULT_MAX_ORDER: usize = 4;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 20;

pub const ASSUME_CRITICAL: &str = "bQ*Q+𝔔−𝔔Q₋L_(*) not invertible";
pub const ASSUME_LINEARIZED: &str = "1 + S^(*)·∇P'(0) not invertible";
pub const ASSUME_JACOBIAN: &str = "Newton Jacobian not invertible";

/// A starred and an unstarred series in the same variables: the starred
/// input family first, then the unstarred one.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPair {
    pub starred: Series,
    pub unstarred: Series,
}

/// Symmetric coefficient tensors keyed by `(starred, unstarred)` degree.
pub type TensorsByBidegree = BTreeMap<(usize, usize), SymmetricTensor>;

impl SeriesPair {
    fn from_stacked(s: &Series) -> SeriesPair {
        let (starred, unstarred) = s.split(s.dim() / 2);
        SeriesPair { starred, unstarred }
    }

    pub fn stacked(&self) -> Series {
        Series::stack(&self.starred, &self.unstarred)
    }

    pub fn max_order(&self) -> usize {
        self.starred.max_order().min(self.unstarred.max_order())
    }

    /// Dimension of one input family.
    pub fn input_dim(&self) -> usize {
        self.starred.nvars() / 2
    }

    pub fn output_dim(&self) -> usize {
        self.starred.dim()
    }

    pub fn eval(&self, x_star: &CVec, x: &CVec) -> (CVec, CVec) {
        let point = stack(x_star, x);
        (self.starred.eval(&point), self.unstarred.eval(&point))
    }

    /// Linear coefficient of the stacked series.
    pub fn linear_part(&self) -> CMat {
        self.stacked().linear_part()
    }

    pub fn has_constant_term(&self) -> bool {
        self.starred.has_constant_term() || self.unstarred.has_constant_term()
    }

    /// Max over bidegrees of the tensor norm of the difference.
    pub fn residual(&self, other: &SeriesPair) -> f64 {
        coefficient_residual(&self.stacked(), &other.stacked(), self.input_dim())
    }

    /// Per-bidegree symmetric tensors of both members.
    pub fn tensors(&self) -> (TensorsByBidegree, TensorsByBidegree) {
        let m = self.input_dim();
        (
            self.starred.symmetric_tensors(m),
            self.unstarred.symmetric_tensors(m),
        )
    }
}

/// Solves `X = F − B·G(X)` with `G` a polynomial without constant term and
/// `F` a series without constant term, degree by degree.
fn solve_primed(
    b: &CMat,
    g: &Series,
    forcing: &Series,
    max_order: usize,
    cond_limit: f64,
    assumption: &str,
) -> Result<Series> {
    let n = b.nrows();
    let j = g.linear_part();
    let h = g.degree_range(2, usize::MAX);
    let m = CMat::identity(n, n) + b * j;
    let m_inv = inverse_matrix(&m, cond_limit, assumption)?;
    let base = forcing.with_max_order(max_order).apply(&m_inv);
    let mb = &m_inv * b;
    let mut x = base.clone();
    for _ in 1..max_order {
        x = base.sub(&h.compose(&x).apply(&mb));
    }
    Ok(x)
}

/// `diag(a, a)`.
fn twice(a: &CMat) -> CMat {
    block_diag(a, a)
}

/// Background fields as formal series in `(ψ*, ψ)`.
pub fn fps_background(spec: &ActionSpec, max_order: usize) -> Result<SeriesPair> {
    let m = &spec.m;
    let b = block_diag(&m.s_star, &m.s);
    let forcing = Series::linear(&(&b * twice(&m.qms_fq)), max_order);
    let x = solve_primed(
        &b,
        spec.gradient_series(),
        &forcing,
        max_order,
        spec.rg.cond_limit,
        ASSUME_LINEARIZED,
    )?;
    Ok(SeriesPair::from_stacked(&x))
}

/// Next-scale background fields as formal series in `(θ*, θ)`.
pub fn fps_nextscale(spec: &ActionSpec, max_order: usize) -> Result<SeriesPair> {
    let m = &spec.m;
    let b = block_diag(&m.scheck_star, &m.scheck);
    let forcing = Series::linear(&(&b * twice(&m.qcms_qc)), max_order);
    let x = solve_primed(
        &b,
        spec.gradient_series(),
        &forcing,
        max_order,
        spec.rg.cond_limit,
        ASSUME_LINEARIZED,
    )?;
    Ok(SeriesPair::from_stacked(&x))
}

/// Critical fields as formal series in `(θ*, θ)`, given the background series.
pub fn fps_critical(spec: &ActionSpec, bg: &SeriesPair, max_order: usize) -> Result<SeriesPair> {
    if bg.max_order() < max_order {
        return Err(Error::Shape(format!(
            "background series of order {} cannot determine critical fields to order {max_order}",
            bg.max_order()
        )));
    }
    let m = &spec.m;
    let phi = bg.stacked();
    let e = twice(&m.fq_qm);
    let lhs = twice(&m.k) - &e * phi.linear_part();
    let lhs_inv = inverse_matrix(&lhs, spec.rg.cond_limit, ASSUME_CRITICAL)?;
    let base = Series::linear(&(&lhs_inv * twice(&m.b_qs)), max_order);
    let higher = phi.degree_range(2, usize::MAX);
    let le = &lhs_inv * &e;
    let mut y = base.clone();
    for _ in 1..max_order {
        y = base.add(&higher.compose(&y).apply(&le));
    }
    Ok(SeriesPair::from_stacked(&y))
}

/// `φ̌_cp = φ_bg(ψ*_cr, ψ_cr)`, truncated at `max_order`.
pub fn compose_cp(bg: &SeriesPair, cr: &SeriesPair, max_order: usize) -> Result<SeriesPair> {
    if bg.starred.nvars() != 2 * cr.output_dim() {
        return Err(Error::Shape(format!(
            "background series takes {} variables, critical series provides {}",
            bg.starred.nvars(),
            2 * cr.output_dim()
        )));
    }
    if cr.max_order() < max_order || bg.max_order() < max_order {
        return Err(Error::Shape(format!(
            "series of orders {} and {} cannot be composed to order {max_order}",
            bg.max_order(),
            cr.max_order()
        )));
    }
    let inner = cr.stacked().with_max_order(max_order);
    Ok(SeriesPair::from_stacked(&bg.stacked().compose(&inner)))
}

/// All formal fields of one step.
#[derive(Clone, Debug)]
pub struct FormalFields {
    pub background: SeriesPair,
    pub critical: SeriesPair,
    pub nextscale: SeriesPair,
    pub composed: SeriesPair,
}

impl FormalFields {
    pub fn solve(spec: &ActionSpec, max_order: usize) -> Result<Self> {
        let background = fps_background(spec, max_order)?;
        let critical = fps_critical(spec, &background, max_order)?;
        let nextscale = fps_nextscale(spec, max_order)?;
        let composed = compose_cp(&background, &critical, max_order)?;
        Ok(FormalFields {
            background,
            critical,
            nextscale,
            composed,
        })
    }

    /// `φ̌_cp` against `φ̌_bg`.
    pub fn composition_residual(&self) -> f64 {
        self.composed.residual(&self.nextscale)
    }

    /// `ψ_cr` against `(bQ*Q+𝔔)⁻¹(bQ*θ + 𝔔Q₋φ̌)`, for `φ̌ = φ̌_bg` and `φ̌ = φ̌_cp`.
    pub fn crit_representation_residual(&self, spec: &ActionSpec) -> f64 {
        let m = &spec.m;
        let order = self.critical.max_order();
        let drive = Series::linear(&twice(&m.b_qs), order);
        let map = twice(&m.k_inv);
        let e = twice(&m.fq_qm);
        let represent = |phi: &SeriesPair| {
            SeriesPair::from_stacked(&drive.add(&phi.stacked().apply(&e)).apply(&map))
        };
        self.critical
            .residual(&represent(&self.nextscale))
            .max(self.critical.residual(&represent(&self.composed)))
    }

    /// Residuals of every defining equation after substitution, truncated at
    /// the series order.
    pub fn equation_residuals(&self, spec: &ActionSpec) -> BTreeMap<&'static str, f64> {
        let m = &spec.m;
        let grad = spec.gradient_series();
        let primed = |x: &SeriesPair, b: &CMat, drive: &CMat| {
            let xs = x.stacked();
            let forcing = Series::linear(&(b * twice(drive)), xs.max_order());
            let rhs = forcing.sub(&grad.compose(&xs).apply(b));
            coefficient_residual(&xs, &rhs, x.input_dim())
        };
        let mut out = BTreeMap::new();
        out.insert(
            "background",
            primed(&self.background, &block_diag(&m.s_star, &m.s), &m.qms_fq),
        );
        out.insert(
            "nextscale",
            primed(
                &self.nextscale,
                &block_diag(&m.scheck_star, &m.scheck),
                &m.qcms_qc,
            ),
        );
        let y = self.critical.stacked();
        let lhs = y.apply(&twice(&m.k));
        let rhs = Series::linear(&twice(&m.b_qs), y.max_order()).add(
            &self
                .background
                .stacked()
                .compose(&y)
                .apply(&twice(&m.fq_qm)),
        );
        out.insert(
            "critical",
            coefficient_residual(&lhs, &rhs, self.critical.input_dim()),
        );
        out
    }
}

pub fn verify_composition(spec: &ActionSpec, max_order: usize) -> Result<f64> {
    Ok(FormalFields::solve(spec, max_order)?.composition_residual())
}

pub fn verify_crit_representation(spec: &ActionSpec, max_order: usize) -> Result<f64> {
    Ok(FormalFields::solve(spec, max_order)?.crit_representation_residual(spec))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: NEWTON_TOL,
            max_iter: NEWTON_MAX_ITER,
        }
    }
}

/// A converged Newton solution `(x*, x)`.
#[derive(Clone, Debug)]
pub struct NewtonSolution {
    pub star: CVec,
    pub plain: CVec,
    pub iterations: usize,
    /// Final max-norm residual of the equations.
    pub residual: f64,
    jacobian: CMat,
}

fn max_abs(v: &CVec) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Damped Newton iteration for `R(x) = 0` with Jacobian `jac(x)`.
fn newton(
    solver: &'static str,
    residual: impl Fn(&CVec) -> Result<CVec>,
    jacobian: impl Fn(&CVec) -> Result<CMat>,
    x0: CVec,
    scale: f64,
    opts: &NewtonOptions,
    cond_limit: f64,
) -> Result<(CVec, usize, f64)> {
    let tol = opts.tol * scale.max(1.0);
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut norm = max_abs(&r);
    for iter in 0..=opts.max_iter {
        if norm <= tol {
            return Ok((x, iter, norm));
        }
        if iter == opts.max_iter {
            break;
        }
        let dx = solve_matrix(&jacobian(&x)?, &(-&r), cond_limit, ASSUME_JACOBIAN)?;
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial = &x + &dx * C64::from(step);
            let r_trial = residual(&trial)?;
            let n_trial = max_abs(&r_trial);
            if n_trial < norm || halvings == MAX_HALVINGS {
                x = trial;
                r = r_trial;
                norm = n_trial;
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
    }
    Err(Error::NoConvergence {
        solver,
        iterations: opts.max_iter,
        residual: norm,
    })
}

/// Newton solve of `diag(A*, A)x + P'(x) = rhs`.
fn newton_primed(
    spec: &ActionSpec,
    solver: &'static str,
    a: &CMat,
    rhs: &CVec,
    x0: CVec,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let residual = |x: &CVec| Ok(a * x + spec.p_prime(x) - rhs);
    let jacobian = |x: &CVec| Ok(a + spec.p_prime_jacobian(x));
    let (x, iterations, res) = newton(
        solver,
        residual,
        jacobian,
        x0,
        max_abs(rhs),
        opts,
        spec.rg.cond_limit,
    )?;
    let n = x.len() / 2;
    let (star, plain) = split(&x, n);
    let jac = a + spec.p_prime_jacobian(&x);
    Ok(NewtonSolution {
        star,
        plain,
        iterations,
        residual: res,
        jacobian: jac,
    })
}

fn check_dims(a: &CVec, b: &CVec, n: usize, what: &str) -> Result<()> {
    if a.len() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "{what} must have dimension {n}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Background fields at `(ψ*, ψ)`, started from `S^(*)Q₋*𝔔ψ_(*)`.
pub fn newton_background(
    spec: &ActionSpec,
    psi_star: &CVec,
    psi: &CVec,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    check_dims(psi_star, psi, spec.h().dim(), "ψ")?;
    let m = &spec.m;
    let qfq = &m.qms_fq * &m.q_minus;
    let a = block_diag(&(&m.d_star + &qfq), &(&m.d + &qfq));
    let rhs = stack(&(&m.qms_fq * psi_star), &(&m.qms_fq * psi));
    let x0 = stack(
        &(&m.s_star * (&m.qms_fq * psi_star)),
        &(&m.s * (&m.qms_fq * psi)),
    );
    newton_primed(spec, "background", &a, &rhs, x0, opts)
}

/// Next-scale background fields at `(θ*, θ)`, started from `Š^(*)Q̌₋*Q̌θ_(*)`.
pub fn newton_nextscale(
    spec: &ActionSpec,
    theta_star: &CVec,
    theta: &CVec,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    check_dims(theta_star, theta, spec.h_plus().dim(), "θ")?;
    let m = &spec.m;
    let quad = &m.qcms_qc * &m.qcheck_minus;
    let a = block_diag(&(&m.d_star + &quad), &(&m.d + &quad));
    let rhs = stack(&(&m.qcms_qc * theta_star), &(&m.qcms_qc * theta));
    let x0 = stack(
        &(&m.scheck_star * &(&m.qcms_qc * theta_star)),
        &(&m.scheck * &(&m.qcms_qc * theta)),
    );
    newton_primed(spec, "next-scale background", &a, &rhs, x0, opts)
}

/// Critical fields at `(θ*, θ)` together with their background fields.
#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub theta_star: CVec,
    pub theta: CVec,
    pub psi_star: CVec,
    pub psi: CVec,
    pub phi_star: CVec,
    pub phi: CVec,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton solve of the critical-field equations, started from `bC^(*)Q*θ_(*)`.
/// The background fields are re-solved by Newton at every iterate.
pub fn newton_critical(
    spec: &ActionSpec,
    theta_star: &CVec,
    theta: &CVec,
    opts: &NewtonOptions,
) -> Result<CriticalPoint> {
    check_dims(theta_star, theta, spec.h_plus().dim(), "θ")?;
    let m = &spec.m;
    let n = spec.h().dim();
    let kk = twice(&m.k);
    let e = twice(&m.fq_qm);
    let f = twice(&m.qms_fq);
    let drive = stack(&(&m.b_qs * theta_star), &(&m.b_qs * theta));
    let background = |y: &CVec| {
        let (ps, p) = split(y, n);
        newton_background(spec, &ps, &p, opts)
    };
    let residual = |y: &CVec| {
        let bg = background(y)?;
        Ok(&kk * y - &drive - &e * stack(&bg.star, &bg.plain))
    };
    // dφ_bg/dψ = J_bg⁻¹ diag(Q₋*𝔔)
    let jacobian = |y: &CVec| {
        let bg = background(y)?;
        let dphi = bg
            .jacobian
            .clone()
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::NearSingular {
                assumption: ASSUME_JACOBIAN.into(),
                cond: f64::INFINITY,
                limit: spec.rg.cond_limit,
            })?;
        Ok(&kk - &e * dphi)
    };
    let y0 = stack(
        &(&m.c_star * &(&m.b_qs * theta_star)),
        &(&m.c * &(&m.b_qs * theta)),
    );
    let (y, iterations, res) = newton(
        "critical",
        residual,
        jacobian,
        y0,
        max_abs(&drive),
        opts,
        spec.rg.cond_limit,
    )?;
    let (psi_star, psi) = split(&y, n);
    let bg = newton_background(spec, &psi_star, &psi, opts)?;
    Ok(CriticalPoint {
        theta_star: theta_star.clone(),
        theta: theta.clone(),
        psi_star,
        psi,
        phi_star: bg.star,
        phi: bg.plain,
        iterations,
        residual: res,
    })
}

/// Largest discrepancy between Newton solutions and series evaluations at
/// `(θ*, θ)`: critical fields, background fields at the critical fields and
/// next-scale background fields.
pub fn newton_series_discrepancy(
    spec: &ActionSpec,
    formal: &FormalFields,
    theta_star: &CVec,
    theta: &CVec,
    opts: &NewtonOptions,
) -> Result<f64> {
    let crit = newton_critical(spec, theta_star, theta, opts)?;
    let (ps, p) = formal.critical.eval(theta_star, theta);
    let (fs, f) = formal.background.eval(&crit.psi_star, &crit.psi);
    let ns = newton_nextscale(spec, theta_star, theta, opts)?;
    let (ns_star, ns_plain) = formal.nextscale.eval(theta_star, theta);
    Ok([
        max_abs(&(&crit.psi_star - ps)),
        max_abs(&(&crit.psi - p)),
        max_abs(&(&crit.phi_star - fs)),
        max_abs(&(&crit.phi - f)),
        max_abs(&(&ns.star - ns_star)),
        max_abs(&(&ns.plain - ns_plain)),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// A way of producing background fields at a point.
pub trait BackgroundField: Sync {
    fn background(&self, spec: &ActionSpec, psi_star: &CVec, psi: &CVec) -> Result<(CVec, CVec)>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NewtonBackground(pub NewtonOptions);

impl BackgroundField for NewtonBackground {
    fn background(&self, spec: &ActionSpec, psi_star: &CVec, psi: &CVec) -> Result<(CVec, CVec)> {
        let sol = newton_background(spec, psi_star, psi, &self.0)?;
        Ok((sol.star, sol.plain))
    }
}

impl BackgroundField for SeriesPair {
    fn background(&self, _spec: &ActionSpec, psi_star: &CVec, psi: &CVec) -> Result<(CVec, CVec)> {
        check_dims(psi_star, psi, self.input_dim(), "ψ")?;
        Ok(self.eval(psi_star, psi))
    }
}

/// Variations of the background field around a critical point.
#[derive(Clone, Debug)]
pub struct DeltaPhi {
    /// `δφ̌*_bg`, `δφ̌_bg`: background at the shifted point minus at the base.
    pub delta_star: CVec,
    pub delta: CVec,
    /// `δφ̌^(*)⁺ = δφ̌^(*)_bg − S^(*)Q₋*𝔔δψ_(*)`.
    pub plus_star: CVec,
    pub plus: CVec,
    /// Max-norm residual of
    /// `δφ̌_bg = S^(*)Q₋*𝔔δψ_(*) − S^(*)[P'_(*)(shifted) − P'_(*)(base)]`.
    pub equation_residual: f64,
}

pub fn delta_phi_variants(
    spec: &ActionSpec,
    crit: &CriticalPoint,
    dpsi_star: &CVec,
    dpsi: &CVec,
    opts: &NewtonOptions,
) -> Result<DeltaPhi> {
    check_dims(dpsi_star, dpsi, spec.h().dim(), "δψ")?;
    let m = &spec.m;
    let shifted = newton_background(
        spec,
        &(&crit.psi_star + dpsi_star),
        &(&crit.psi + dpsi),
        opts,
    )?;
    let delta_star = &shifted.star - &crit.phi_star;
    let delta = &shifted.plain - &crit.phi;
    let lin_star = &m.s_star * (&m.qms_fq * dpsi_star);
    let lin = &m.s * (&m.qms_fq * dpsi);
    let plus_star = &delta_star - &lin_star;
    let plus = &delta - &lin;

    let base = stack(&crit.phi_star, &crit.phi);
    let moved = stack(&shifted.star, &shifted.plain);
    let (dp_star, dp) = split(&(spec.p_prime(&moved) - spec.p_prime(&base)), delta.len());
    let r_star = &delta_star - (&lin_star - &m.s_star * dp_star);
    let r = &delta - (&lin - &m.s * dp);
    Ok(DeltaPhi {
        delta_star,
        delta,
        plus_star,
        plus,
        equation_residual: max_abs(&r_star).max(max_abs(&r)),
    })
}

/// `δφ̌⁺` along the ray `t ↦ (tδψ*, tδψ)` as a series in `t` truncated at
/// `order`, stacked `(δφ̌*⁺, δφ̌⁺)`. It solves
/// `δφ_(*) = S^(*)Q₋*𝔔 tδψ_(*) − S^(*)[P'_(*)(φ̌+δφ) − P'_(*)(φ̌)]` around the
/// background `φ̌` of the critical point.
pub fn delta_plus_on_ray(
    spec: &ActionSpec,
    crit: &CriticalPoint,
    dpsi_star: &CVec,
    dpsi: &CVec,
    order: usize,
) -> Result<Series> {
    check_dims(dpsi_star, dpsi, spec.h().dim(), "δψ")?;
    let m = &spec.m;
    let grad = spec.gradient_series();
    let base = stack(&crit.phi_star, &crit.phi);
    let nv = base.len();
    let inner_order = order.max(grad.actual_degree()).max(1);
    let inner = Series::constant(nv, base.clone(), inner_order)
        .add(&Series::linear(&CMat::identity(nv, nv), inner_order));
    let shifted = grad.compose(&inner).degree_range(1, usize::MAX);

    let b = block_diag(&m.s_star, &m.s);
    let lin = &b * stack(&(&m.qms_fq * dpsi_star), &(&m.qms_fq * dpsi));
    let forcing = Series::linear(&CMat::from_column_slice(nv, 1, lin.as_slice()), order);
    let x = solve_primed(
        &b,
        &shifted,
        &forcing,
        order,
        spec.rg.cond_limit,
        ASSUME_LINEARIZED,
    )?;
    Ok(x.sub(&forcing))
}
