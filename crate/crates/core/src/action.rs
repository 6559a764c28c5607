//! The actions of one step and the identities relating them.
//!
//! ```text
//! 𝔄(φ*,φ)          = ⟨φ*, Dφ⟩₋ + P(φ*,φ)
//! A(ψ*,ψ;φ*,φ)     = ⟨ψ*−Q₋φ*, 𝔔(ψ−Q₋φ)⟩ + 𝔄(φ*,φ)
//! A_eff(θ;ψ;φ)     = b⟨θ*−Qψ*, θ−Qψ⟩₊ + A(ψ*,ψ;φ*,φ)
//! Ǎ(θ*,θ;φ*,φ)     = ⟨θ*−Q̌₋φ*, Q̌(θ−Q̌₋φ)⟩₊ + 𝔄(φ*,φ)
//! ```
//!
//! Gradients are with respect to the bilinear pairings; `∇_{x*}` is the
//! gradient in the starred slot.

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::fields::{self, BackgroundField, CriticalPoint};
use crate::kernels::{KernelSet, RGData, ASSUME_C};
use crate::linalg::{adjoint, inverse_matrix, CMat, CVec, Space, C64};
use crate::polynomial::PolynomialP;
use crate::series::{integrate_unit_interval, Series};

/// Step data, interaction and derived kernels, with the matrices the
/// field equations use precomputed.
#[derive(Clone, Debug)]
pub struct ActionSpec {
    pub rg: RGData,
    pub p: PolynomialP,
    pub kernels: KernelSet,
    /// Kernels of the starred equations (`D` replaced by `D*`).
    pub kernels_star: KernelSet,
    pub(crate) m: Matrices,
    pub(crate) grad: Series,
}

#[derive(Clone, Debug)]
pub(crate) struct Matrices {
    pub d: CMat,
    pub d_star: CMat,
    pub q_minus: CMat,
    pub q: CMat,
    pub fq: CMat,
    /// `𝔔Q₋`
    pub fq_qm: CMat,
    /// `Q₋*𝔔`
    pub qms_fq: CMat,
    /// `bQ*`
    pub b_qs: CMat,
    pub k: CMat,
    pub k_inv: CMat,
    pub qcheck: CMat,
    pub qcheck_minus: CMat,
    /// `Q̌₋*Q̌`
    pub qcms_qc: CMat,
    pub s: CMat,
    pub s_star: CMat,
    pub scheck: CMat,
    pub scheck_star: CMat,
    pub c: CMat,
    pub c_star: CMat,
}

/// Gradients of a function with respect to a starred and an unstarred slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotGradient {
    pub star: CVec,
    pub plain: CVec,
}

impl ActionSpec {
    /// The scalar reference model with `P = g·φ*φ²`.
    pub fn scalar_reference(g: f64) -> ActionSpec {
        let rg = RGData::scalar_reference();
        let p = PolynomialP::srm(&rg.h_minus, g).expect("valid by construction");
        ActionSpec::new(rg, p).expect("valid by construction")
    }

    /// Random data with a random `P` of the given degrees and coefficient scale.
    pub fn random(
        ens: &mut Ensemble,
        dims: (usize, usize, usize),
        random_forms: bool,
        degrees: &[usize],
        scale: f64,
    ) -> ActionSpec {
        let rg = RGData::random(ens, dims, random_forms);
        let p = PolynomialP::random(ens, &rg.h_minus, degrees, scale);
        ActionSpec::new(rg, p).expect("positive-definite data has invertible kernels")
    }

    pub fn new(rg: RGData, p: PolynomialP) -> Result<Self> {
        if p.space() != &rg.h_minus {
            return Err(Error::SpaceMismatch {
                expected: rg.h_minus.name().to_string(),
                found: p.space().name().to_string(),
            });
        }
        let kernels = KernelSet::compute(&rg)?;
        let kernels_star = KernelSet::compute(&rg.starred())?;
        let e = |op: &crate::Operator| op.entries().clone();
        let qms = adjoint(&rg.q_minus);
        let qs = adjoint(&rg.q);
        let qcms = adjoint(&kernels.qcheck_minus);
        let m = Matrices {
            d: e(&rg.d),
            d_star: e(&adjoint(&rg.d)),
            q_minus: e(&rg.q_minus),
            q: e(&rg.q),
            fq: e(&rg.fq),
            fq_qm: e(&(&rg.fq * &rg.q_minus)),
            qms_fq: e(&(&qms * &rg.fq)),
            b_qs: e(&qs.scale(rg.b)),
            k: e(&kernels.k),
            k_inv: e(&kernels.k_inv),
            qcheck: e(&kernels.qcheck),
            qcheck_minus: e(&kernels.qcheck_minus),
            qcms_qc: e(&(&qcms * &kernels.qcheck)),
            s: e(&kernels.s),
            s_star: e(&kernels_star.s),
            scheck: e(&kernels.scheck),
            scheck_star: e(&kernels_star.scheck),
            c: e(&kernels.c),
            c_star: e(&kernels_star.c),
        };
        let grad = p.gradient_series();
        Ok(ActionSpec {
            rg,
            p,
            kernels,
            kernels_star,
            m,
            grad,
        })
    }

    pub fn h_minus(&self) -> &Space {
        &self.rg.h_minus
    }

    pub fn h(&self) -> &Space {
        &self.rg.h
    }

    pub fn h_plus(&self) -> &Space {
        &self.rg.h_plus
    }

    /// Dimensions `(dim H₋, dim H, dim H₊)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rg.h_minus.dim(), self.rg.h.dim(), self.rg.h_plus.dim())
    }

    /// `C⁻¹ = Δ + bQ*Q`.
    pub fn c_inverse(&self) -> Result<CMat> {
        inverse_matrix(&self.m.c, self.rg.cond_limit, ASSUME_C)
    }

    /// `(P'_*, P')` stacked at the stacked point `(φ*, φ)`.
    pub(crate) fn p_prime(&self, phi: &CVec) -> CVec {
        self.grad.eval(phi)
    }

    pub(crate) fn p_prime_jacobian(&self, phi: &CVec) -> CMat {
        self.grad.jacobian_at(phi)
    }

    pub(crate) fn gradient_series(&self) -> &Series {
        &self.grad
    }

    pub fn frak_a(&self, phi_star: &CVec, phi: &CVec) -> Result<C64> {
        self.check(phi_star, phi, self.h_minus(), "φ")?;
        Ok(self.h_minus().pair(phi_star, &(&self.m.d * phi)) + self.p.value(phi_star, phi)?)
    }

    pub fn eval_a(&self, psi_star: &CVec, psi: &CVec, phi_star: &CVec, phi: &CVec) -> Result<C64> {
        self.check(psi_star, psi, self.h(), "ψ")?;
        let qm = &self.m.q_minus;
        let u_star = psi_star - qm * phi_star;
        let u = psi - qm * phi;
        Ok(self.h().pair(&u_star, &(&self.m.fq * u)) + self.frak_a(phi_star, phi)?)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn eval_aeff(
        &self,
        theta_star: &CVec,
        theta: &CVec,
        psi_star: &CVec,
        psi: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<C64> {
        self.check(theta_star, theta, self.h_plus(), "θ")?;
        let q = &self.m.q;
        let coupling = self
            .h_plus()
            .pair(&(theta_star - q * psi_star), &(theta - q * psi))
            * self.rg.b;
        Ok(coupling + self.eval_a(psi_star, psi, phi_star, phi)?)
    }

    pub fn eval_acheck(
        &self,
        theta_star: &CVec,
        theta: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<C64> {
        self.check(theta_star, theta, self.h_plus(), "θ")?;
        let qcm = &self.m.qcheck_minus;
        let u_star = theta_star - qcm * phi_star;
        let u = theta - qcm * phi;
        Ok(self.h_plus().pair(&u_star, &(&self.m.qcheck * u)) + self.frak_a(phi_star, phi)?)
    }

    /// `∇𝔄`: `∇_{φ*} = Dφ + P'`, `∇_φ = D*φ* + P'_*`.
    pub fn grad_frak_a(&self, phi_star: &CVec, phi: &CVec) -> Result<SlotGradient> {
        let (_, ps, pp) = self.p.eval_with_grads(phi_star, phi)?;
        Ok(SlotGradient {
            star: &self.m.d * phi + pp,
            plain: &self.m.d_star * phi_star + ps,
        })
    }

    /// `(∇_ψ A, ∇_φ A)`.
    pub fn grad_a(
        &self,
        psi_star: &CVec,
        psi: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<(SlotGradient, SlotGradient)> {
        self.check(psi_star, psi, self.h(), "ψ")?;
        let qm = &self.m.q_minus;
        let fu_star = &self.m.fq * (psi_star - qm * phi_star);
        let fu = &self.m.fq * (psi - qm * phi);
        let fa = self.grad_frak_a(phi_star, phi)?;
        let qms = adjoint_matrix(self.h_minus(), self.h(), qm);
        let d_phi = SlotGradient {
            star: fa.star - &qms * &fu,
            plain: fa.plain - &qms * &fu_star,
        };
        Ok((
            SlotGradient {
                star: fu,
                plain: fu_star,
            },
            d_phi,
        ))
    }

    /// `(∇_θ A_eff, ∇_ψ A_eff, ∇_φ A_eff)`.
    #[allow(clippy::too_many_arguments)]
    pub fn grad_aeff(
        &self,
        theta_star: &CVec,
        theta: &CVec,
        psi_star: &CVec,
        psi: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<(SlotGradient, SlotGradient, SlotGradient)> {
        self.check(theta_star, theta, self.h_plus(), "θ")?;
        let q = &self.m.q;
        let b = C64::from(self.rg.b);
        let v_star = (theta_star - q * psi_star) * b;
        let v = (theta - q * psi) * b;
        let (d_psi, d_phi) = self.grad_a(psi_star, psi, phi_star, phi)?;
        let qs = adjoint_matrix(self.h(), self.h_plus(), q);
        let d_psi = SlotGradient {
            star: d_psi.star - &qs * &v,
            plain: d_psi.plain - &qs * &v_star,
        };
        Ok((
            SlotGradient {
                star: v,
                plain: v_star,
            },
            d_psi,
            d_phi,
        ))
    }

    /// `(∇_θ Ǎ, ∇_φ Ǎ)`.
    pub fn grad_acheck(
        &self,
        theta_star: &CVec,
        theta: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<(SlotGradient, SlotGradient)> {
        self.check(theta_star, theta, self.h_plus(), "θ")?;
        let qcm = &self.m.qcheck_minus;
        let qc = &self.m.qcheck;
        let qc_s = adjoint_matrix(self.h_plus(), self.h_plus(), qc);
        let w = qc * (theta - qcm * phi);
        let w_star = &qc_s * (theta_star - qcm * phi_star);
        let fa = self.grad_frak_a(phi_star, phi)?;
        let qcms = adjoint_matrix(self.h_minus(), self.h_plus(), qcm);
        let d_phi = SlotGradient {
            star: fa.star - &qcms * &w,
            plain: fa.plain - &qcms * &w_star,
        };
        Ok((
            SlotGradient {
                star: w,
                plain: w_star,
            },
            d_phi,
        ))
    }

    /// `ψ̃ = (bQ*Q + 𝔔)⁻¹(bQ*θ + 𝔔Q₋φ)`, the same map for both slots.
    pub fn psi_tilde(&self, theta: &CVec, phi: &CVec) -> Result<CVec> {
        if theta.len() != self.h_plus().dim() || phi.len() != self.h_minus().dim() {
            return Err(Error::Shape("ψ̃ expects (θ, φ) in (H₊, H₋)".into()));
        }
        Ok(&self.m.k_inv * (&self.m.b_qs * theta + &self.m.fq_qm * phi))
    }

    /// Residuals of `Ǎ = A_eff∘ψ̃` and of the gradient identity
    /// `∇_φ Ǎ = (∇_φ A)∘ψ̃ + Q₋*𝔔K⁻¹(∇_ψ A_eff)∘ψ̃`, both slots.
    pub fn preparation_check(
        &self,
        theta_star: &CVec,
        theta: &CVec,
        phi_star: &CVec,
        phi: &CVec,
    ) -> Result<(f64, f64)> {
        let pt_star = self.psi_tilde(theta_star, phi_star)?;
        let pt = self.psi_tilde(theta, phi)?;
        let lhs = self.eval_acheck(theta_star, theta, phi_star, phi)?;
        let rhs = self.eval_aeff(theta_star, theta, &pt_star, &pt, phi_star, phi)?;
        let value = (lhs - rhs).norm();

        let (_, g_check) = self.grad_acheck(theta_star, theta, phi_star, phi)?;
        let (_, g_psi, g_phi) = self.grad_aeff(theta_star, theta, &pt_star, &pt, phi_star, phi)?;
        let (_, g_a_phi) = self.grad_a(&pt_star, &pt, phi_star, phi)?;
        debug_assert_eq!(g_a_phi, g_phi);
        let chain = |g: &CVec| &self.m.qms_fq * (&self.m.k_inv * g);
        let r_star = &g_check.star - (&g_a_phi.star + chain(&g_psi.star));
        let r_plain = &g_check.plain - (&g_a_phi.plain + chain(&g_psi.plain));
        let gradient = max_abs(&r_star).max(max_abs(&r_plain));
        Ok((value, gradient))
    }

    fn check(&self, a: &CVec, b: &CVec, space: &Space, what: &str) -> Result<()> {
        if a.len() != space.dim() || b.len() != space.dim() {
            return Err(Error::Shape(format!(
                "{what}-fields must lie in {space}, got dimensions {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(())
    }
}

fn adjoint_matrix(domain: &Space, codomain: &Space, m: &CMat) -> CMat {
    let op = crate::Operator::new(domain.clone(), codomain.clone(), m.clone())
        .expect("shape by construction");
    adjoint(&op).entries().clone()
}

fn max_abs(v: &CVec) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `δA = A_eff(θ; ψ_cr+δψ; φ_bg(ψ_cr+δψ)) − A_eff(θ; ψ_cr; φ_bg(ψ_cr))`,
/// with the background fields supplied by `bg`.
pub fn delta_a_direct(
    spec: &ActionSpec,
    bg: &dyn BackgroundField,
    crit: &CriticalPoint,
    dpsi_star: &CVec,
    dpsi: &CVec,
) -> Result<C64> {
    let at = |ps: &CVec, p: &CVec| -> Result<C64> {
        let (fs, f) = bg.background(spec, ps, p)?;
        spec.eval_aeff(&crit.theta_star, &crit.theta, ps, p, &fs, &f)
    };
    let shifted = at(&(&crit.psi_star + dpsi_star), &(&crit.psi + dpsi))?;
    Ok(shifted - at(&crit.psi_star, &crit.psi)?)
}

/// `δA = ⟨δψ*, C⁻¹δψ⟩ − ∫₀¹⟨δψ*, 𝔔Q₋δφ̌⁺(tδψ*,tδψ)⟩ − ∫₀¹⟨𝔔Q₋δφ̌*⁺(tδψ*,tδψ), δψ⟩`.
///
/// `δφ̌⁺` along the ray `t ↦ (tδψ*, tδψ)` is the formal solution of its
/// field equation truncated at `order` in `t`; the `t`-integrals use
/// Gauss–Legendre rules exact for that degree.
#[derive(Clone, Debug)]
pub struct DeltaAFormula<'a> {
    spec: &'a ActionSpec,
    crit: CriticalPoint,
    c_inv: CMat,
    order: usize,
}

pub const DELTA_A_ORDER: usize = 12;

impl<'a> DeltaAFormula<'a> {
    pub fn new(spec: &'a ActionSpec, crit: &CriticalPoint, order: usize) -> Result<Self> {
        Ok(DeltaAFormula {
            spec,
            crit: crit.clone(),
            c_inv: spec.c_inverse()?,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, dpsi_star: &CVec, dpsi: &CVec) -> Result<C64> {
        let spec = self.spec;
        let h = spec.h();
        let quad = h.pair(dpsi_star, &(&self.c_inv * dpsi));
        let plus = fields::delta_plus_on_ray(spec, &self.crit, dpsi_star, dpsi, self.order)?;
        let n = spec.h_minus().dim();
        let fqqm = &spec.m.fq_qm;
        let integral = integrate_unit_interval(self.order, |t| {
            let x = CVec::from_element(1, C64::from(t));
            let v = plus.eval(&x);
            let plus_star = v.rows(0, n).into_owned();
            let plus_plain = v.rows(n, n).into_owned();
            h.pair(dpsi_star, &(fqqm * plus_plain)) + h.pair(&(fqqm * plus_star), dpsi)
        });
        Ok(quad - integral)
    }
}

/// `δE = E(ψ*_cr+δψ*, ψ_cr+δψ) − E(ψ*_cr, ψ_cr)`.
pub fn delta_e(
    e: &dyn Fn(&CVec, &CVec) -> C64,
    psi_star_cr: &CVec,
    psi_cr: &CVec,
    dpsi_star: &CVec,
    dpsi: &CVec,
) -> C64 {
    e(&(psi_star_cr + dpsi_star), &(psi_cr + dpsi)) - e(psi_star_cr, psi_cr)
}
