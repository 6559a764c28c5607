//! Quadratic kernels of one block-spin step.
//!
//! Given `Q₋: H₋ → H`, `Q: H → H₊`, `b > 0`, a positive symmetric `𝔔` on `H`
//! and `D` on `H₋`:
//!
//! ```text
//! Q̌  = ((1/b)·1 + Q 𝔔⁻¹ Q*)⁻¹          on H₊
//! S  = (D + Q₋* 𝔔 Q₋)⁻¹                on H₋
//! Š  = (D + Q̌₋* Q̌ Q̌₋)⁻¹,  Q̌₋ = Q Q₋     on H₋
//! Δ  = 𝔔 − 𝔔 Q₋ S Q₋* 𝔔                 on H
//! C  = (Δ + b Q* Q)⁻¹                   on H
//! ```

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, inverse, relative_residual, Operator, Space, SpaceSpec, DEFAULT_COND_LIMIT,
};

const FORM_SYMMETRY_TOL: f64 = 1e-12;

pub const ASSUME_FQ: &str = "𝔔 not invertible";
pub const ASSUME_QCHECK: &str = "(1/b)·1 + Q𝔔⁻¹Q* not invertible";
pub const ASSUME_K: &str = "bQ*Q + 𝔔 not invertible";
pub const ASSUME_S: &str = "D + Q₋*𝔔Q₋ not invertible";
pub const ASSUME_SCHECK: &str = "D + Q̌₋*Q̌Q̌₋ not invertible";
pub const ASSUME_C: &str = "Δ + bQ*Q not invertible";
pub const ASSUME_D: &str = "D not invertible";

/// The data of one step.
#[derive(Clone, Debug)]
pub struct RGData {
    pub h_minus: Space,
    pub h: Space,
    pub h_plus: Space,
    pub q_minus: Operator,
    pub q: Operator,
    pub b: f64,
    pub fq: Operator,
    pub d: Operator,
    pub cond_limit: f64,
}

impl RGData {
    pub fn new(q_minus: Operator, q: Operator, b: f64, fq: Operator, d: Operator) -> Result<Self> {
        let h_minus = q_minus.domain().clone();
        let h = q_minus.codomain().clone();
        let h_plus = q.codomain().clone();
        if q.domain() != &h {
            return Err(Error::Shape(format!(
                "Q has domain {}, expected {}",
                q.domain(),
                h
            )));
        }
        if fq.domain() != &h || fq.codomain() != &h {
            return Err(Error::Shape(format!("𝔔 must act on {h}")));
        }
        if d.domain() != &h_minus || d.codomain() != &h_minus {
            return Err(Error::Shape(format!("D must act on {h_minus}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Precondition(format!("b must be positive, got {b}")));
        }
        let scale = fq.norm().max(f64::MIN_POSITIVE);
        if fq.max_imag() > FORM_SYMMETRY_TOL * scale {
            return Err(Error::Precondition("𝔔 must be real".into()));
        }
        if fq.asymmetry() > FORM_SYMMETRY_TOL {
            return Err(Error::Precondition(format!(
                "𝔔 is not symmetric with respect to the form on {h} (asymmetry {:e})",
                fq.asymmetry()
            )));
        }
        let gfq = h.gram() * fq.entries().map(|z| z.re);
        let gfq = (&gfq + gfq.transpose()) * 0.5;
        let min_eig = gfq.symmetric_eigenvalues().min();
        if min_eig <= 0.0 {
            return Err(Error::Precondition(format!(
                "𝔔 is not positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(RGData {
            h_minus,
            h,
            h_plus,
            q_minus,
            q,
            b,
            fq,
            d,
            cond_limit: DEFAULT_COND_LIMIT,
        })
    }

    /// Random data: real `Q₋`, `Q`, positive-definite `𝔔` and `D`,
    /// `b ∈ [0.5, 2)`; Euclidean forms unless `random_forms`.
    pub fn random(ens: &mut Ensemble, dims: (usize, usize, usize), random_forms: bool) -> RGData {
        let space = |ens: &mut Ensemble, name: &str, n: usize| {
            if random_forms {
                ens.random_space(name, n)
            } else {
                SpaceSpec::euclidean(name, n)
            }
        };
        let hm = space(ens, "H₋", dims.0);
        let h = space(ens, "H", dims.1);
        let hp = space(ens, "H₊", dims.2);
        let q_minus = ens.real_operator(&hm, &h);
        let q = ens.real_operator(&h, &hp);
        let fq = ens.spd_operator(&h);
        let d = ens.spd_operator(&hm);
        let b = ens.uniform(0.5, 2.0);
        RGData::new(q_minus, q, b, fq, d).expect("valid by construction")
    }

    /// All spaces one-dimensional with form 1, `Q₋ = Q = 𝔔 = D = 1`, `b = 1`.
    pub fn scalar_reference() -> RGData {
        let hm = SpaceSpec::euclidean("H₋", 1);
        let h = SpaceSpec::euclidean("H", 1);
        let hp = SpaceSpec::euclidean("H₊", 1);
        RGData::new(
            Operator::identity_between(&hm, &h),
            Operator::identity_between(&h, &hp),
            1.0,
            Operator::identity(&h),
            Operator::identity(&hm),
        )
        .expect("valid by construction")
    }

    pub fn with_cond_limit(mut self, cond_limit: f64) -> Self {
        self.cond_limit = cond_limit;
        self
    }

    /// Same data with `D` replaced by its adjoint; the starred kernels of
    /// `self` are the unstarred kernels of the result.
    pub fn starred(&self) -> RGData {
        RGData {
            d: adjoint(&self.d),
            ..self.clone()
        }
    }

    pub fn d_is_symmetric(&self) -> bool {
        self.d.asymmetry() <= FORM_SYMMETRY_TOL
    }

    /// `Q̌₋ = Q Q₋`.
    pub fn qcheck_minus(&self) -> Operator {
        &self.q * &self.q_minus
    }

    /// `bQ*Q + 𝔔`.
    pub fn k(&self) -> Operator {
        &(&adjoint(&self.q) * &self.q).scale(self.b) + &self.fq
    }

    fn inv(&self, op: &Operator, assumption: &str) -> Result<Operator> {
        inverse(op, self.cond_limit, assumption)
    }
}

/// `Q̌ = ((1/b)·1 + Q 𝔔⁻¹ Q*)⁻¹`.
pub fn qcheck_recursion(data: &RGData) -> Result<Operator> {
    let fq_inv = data.inv(&data.fq, ASSUME_FQ)?;
    let inner = &Operator::identity(&data.h_plus).scale(1.0 / data.b)
        + &(&data.q * &(&fq_inv * &adjoint(&data.q)));
    data.inv(&inner, ASSUME_QCHECK)
}

/// `Q̌ = b [1 − b Q (bQ*Q + 𝔔)⁻¹ Q*]`.
pub fn qcheck_alt(data: &RGData) -> Result<Operator> {
    let k_inv = data.inv(&data.k(), ASSUME_K)?;
    let corr = (&data.q * &(&k_inv * &adjoint(&data.q))).scale(data.b);
    Ok((&Operator::identity(&data.h_plus) - &corr).scale(data.b))
}

/// Green's functions `(S, Š)`.
pub fn greens(data: &RGData) -> Result<(Operator, Operator)> {
    let qcheck = qcheck_recursion(data)?;
    greens_with(data, &qcheck)
}

fn greens_with(data: &RGData, qcheck: &Operator) -> Result<(Operator, Operator)> {
    let qm = &data.q_minus;
    let s = data.inv(&(&data.d + &(&adjoint(qm) * &(&data.fq * qm))), ASSUME_S)?;
    let qcm = data.qcheck_minus();
    let scheck = data.inv(
        &(&data.d + &(&adjoint(&qcm) * &(qcheck * &qcm))),
        ASSUME_SCHECK,
    )?;
    Ok((s, scheck))
}

/// `(Δ, C)`.
pub fn delta_cov(data: &RGData) -> Result<(Operator, Operator)> {
    let (s, _) = greens(data)?;
    delta_cov_with(data, &s)
}

fn delta_cov_with(data: &RGData, s: &Operator) -> Result<(Operator, Operator)> {
    let qm = &data.q_minus;
    let fq = &data.fq;
    let delta = fq - &(fq * &(qm * &(s * &(&adjoint(qm) * fq))));
    let c = data.inv(
        &(&delta + &(&adjoint(&data.q) * &data.q).scale(data.b)),
        ASSUME_C,
    )?;
    Ok((delta, c))
}

/// All derived kernels of one step, with the condition numbers of every
/// matrix that had to be inverted.
#[derive(Clone, Debug)]
pub struct KernelSet {
    pub qcheck: Operator,
    pub qcheck_minus: Operator,
    /// `bQ*Q + 𝔔`
    pub k: Operator,
    pub k_inv: Operator,
    pub s: Operator,
    pub scheck: Operator,
    pub delta: Operator,
    pub c: Operator,
    pub diagnostics: BTreeMap<String, f64>,
}

impl KernelSet {
    pub fn compute(data: &RGData) -> Result<KernelSet> {
        let qcheck = qcheck_recursion(data)?;
        let (s, scheck) = greens_with(data, &qcheck)?;
        let (delta, c) = delta_cov_with(data, &s)?;
        let k = data.k();
        let k_inv = data.inv(&k, ASSUME_K)?;
        let qcheck_minus = data.qcheck_minus();

        let qm = &data.q_minus;
        let qs = adjoint(&data.q);
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("𝔔".to_string(), data.fq.condition_number());
        diagnostics.insert("bQ*Q+𝔔".to_string(), k.condition_number());
        diagnostics.insert(
            "D+Q₋*𝔔Q₋".to_string(),
            (&data.d + &(&adjoint(qm) * &(&data.fq * qm))).condition_number(),
        );
        diagnostics.insert(
            "D+Q̌₋*Q̌Q̌₋".to_string(),
            (&data.d + &(&adjoint(&qcheck_minus) * &(&qcheck * &qcheck_minus))).condition_number(),
        );
        diagnostics.insert(
            "Δ+bQ*Q".to_string(),
            (&delta + &(&qs * &data.q).scale(data.b)).condition_number(),
        );
        Ok(KernelSet {
            qcheck,
            qcheck_minus,
            k,
            k_inv,
            s,
            scheck,
            delta,
            c,
            diagnostics,
        })
    }

    pub fn max_condition(&self) -> f64 {
        self.diagnostics.values().copied().fold(0.0, f64::max)
    }

    /// `Δ̌ = Q̌ − Q̌ Q̌₋ Š Q̌₋* Q̌`, the kernel of `Ǎ` at the next-scale
    /// background field when `P = 0`.
    pub fn delta_check(&self) -> Operator {
        let qc = &self.qcheck;
        let qcm = &self.qcheck_minus;
        qc - &(qc * &(qcm * &(&self.scheck * &(&adjoint(qcm) * qc))))
    }

    /// Largest relative asymmetry of `Q̌, S, Š, Δ, C` with respect to their forms.
    pub fn max_asymmetry(&self) -> f64 {
        [&self.qcheck, &self.s, &self.scheck, &self.delta, &self.c]
            .iter()
            .map(|op| op.asymmetry())
            .fold(0.0, f64::max)
    }
}

/// Residuals of the kernel representations that hold when `D` is invertible.
#[derive(Clone, Debug, Serialize)]
pub struct EdaResiduals {
    /// Both product forms of `Δ`.
    pub a: f64,
    /// `S = D⁻¹ − D⁻¹Q₋*ΔQ₋D⁻¹`.
    pub b: f64,
    /// `[D + R*𝔔R]⁻¹ = D⁻¹ − D⁻¹R*ΔRD⁻¹` for `R = Q₋M`, `R* = M⁻¹Q₋*`, `M = D + c·1`.
    pub b_family: f64,
    /// Both representations of `Š`.
    pub c: f64,
    /// `C = K⁻¹ + K⁻¹𝔔Q₋ŠQ₋*𝔔K⁻¹`, `K = bQ*Q + 𝔔`.
    pub d: f64,
    /// `bC^(*)Q* = K⁻¹[bQ* + 𝔔Q₋Š^(*)Q̌₋*Q̌]`, starred and unstarred.
    pub e: f64,
}

impl EdaResiduals {
    pub fn max(&self) -> f64 {
        [self.a, self.b, self.b_family, self.c, self.d, self.e]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("a", self.a),
            ("b", self.b),
            ("b_family", self.b_family),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
        ]
    }
}

/// Relative operator-norm residuals of every kernel representation that
/// requires `D` invertible.
pub fn identity_suite_eda(data: &RGData) -> Result<EdaResiduals> {
    let ks = KernelSet::compute(data)?;
    let d_inv = data.inv(&data.d, ASSUME_D)?;
    let one_h = Operator::identity(&data.h);
    let fq = &data.fq;
    let qm = &data.q_minus;
    let qm_s = adjoint(qm);
    let k_inv = &ks.k_inv;

    // (a)
    let left = data.inv(
        &(&one_h + &(fq * &(qm * &(&d_inv * &qm_s)))),
        "1 + 𝔔Q₋D⁻¹Q₋* not invertible",
    )?;
    let right = data.inv(
        &(&one_h + &(qm * &(&d_inv * &(&qm_s * fq)))),
        "1 + Q₋D⁻¹Q₋*𝔔 not invertible",
    )?;
    let a = relative_residual(ks.delta.entries(), (&left * fq).entries()).max(relative_residual(
        ks.delta.entries(),
        (fq * &right).entries(),
    ));

    // (b), R = R* = Q₋
    let s_alt = &d_inv - &(&d_inv * &(&qm_s * &(&ks.delta * &(qm * &d_inv))));
    let b = relative_residual(ks.s.entries(), s_alt.entries());

    // (b), R = Q₋M, R* = M⁻¹Q₋* with M commuting with D
    let shift = 1.0 + data.d.norm();
    let m = &data.d + &Operator::identity(&data.h_minus).scale(shift);
    let m_inv = data.inv(&m, "D + c·1 not invertible")?;
    let r = qm * &m;
    let r_star = &m_inv * &qm_s;
    let lhs = data.inv(
        &(&data.d + &(&r_star * &(fq * &r))),
        "D + R*𝔔R not invertible",
    )?;
    let rhs = &d_inv - &(&d_inv * &(&r_star * &(&ks.delta * &(&r * &d_inv))));
    let b_family = relative_residual(lhs.entries(), rhs.entries());

    // (c)
    let s_inv = data.inv(&ks.s, ASSUME_S)?;
    let first = data.inv(
        &(&s_inv - &(&qm_s * &(fq * &(k_inv * &(fq * qm))))),
        "S⁻¹ − Q₋*𝔔K⁻¹𝔔Q₋ not invertible",
    )?;
    let second = &ks.s + &(&ks.s * &(&qm_s * &(fq * &(&ks.c * &(fq * &(qm * &ks.s))))));
    let c = relative_residual(ks.scheck.entries(), first.entries())
        .max(relative_residual(ks.scheck.entries(), second.entries()));

    // (d)
    let c_alt = k_inv + &(k_inv * &(fq * &(qm * &(&ks.scheck * &(&qm_s * &(fq * k_inv))))));
    let d = relative_residual(ks.c.entries(), c_alt.entries());

    // (e), unstarred and starred
    let e_for = |c_op: &Operator, scheck: &Operator| {
        let qs = adjoint(&data.q);
        let lhs = (c_op * &qs).scale(data.b);
        let rhs = k_inv
            * &(&qs.scale(data.b)
                + &(fq * &(qm * &(scheck * &(&adjoint(&ks.qcheck_minus) * &ks.qcheck)))));
        relative_residual(lhs.entries(), rhs.entries())
    };
    let e = e_for(&ks.c, &ks.scheck).max(e_for(&adjoint(&ks.c), &adjoint(&ks.scheck)));

    Ok(EdaResiduals {
        a,
        b,
        b_family,
        c,
        d,
        e,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::C64;
    use nalgebra::DMatrix;

    fn scalar(space: &Space, x: f64) -> Operator {
        Operator::identity(space).scale(x)
    }

    fn value(op: &Operator) -> f64 {
        op.entries()[(0, 0)].re
    }

    /// Scalar reference model: all spaces one-dimensional, Q₋ = Q = 𝔔 = D = b = 1.
    fn srm(b: f64, q: f64, fq: f64) -> RGData {
        let hm = SpaceSpec::euclidean("H-", 1);
        let h = SpaceSpec::euclidean("H", 1);
        let hp = SpaceSpec::euclidean("H+", 1);
        let one = DMatrix::from_element(1, 1, 1.0);
        RGData::new(
            Operator::from_real(hm.clone(), h.clone(), &one).unwrap(),
            Operator::from_real(h.clone(), hp, &(one.clone() * q)).unwrap(),
            b,
            scalar(&h, fq),
            scalar(&hm, 1.0),
        )
        .unwrap()
    }

    pub(crate) fn random_data(ens: &mut Ensemble, dims: (usize, usize, usize)) -> RGData {
        RGData::random(ens, dims, false)
    }

    #[test]
    fn srm_kernels() {
        let data = srm(1.0, 1.0, 1.0);
        assert!((value(&qcheck_recursion(&data).unwrap()) - 0.5).abs() < 1e-15);
        assert!((value(&qcheck_alt(&data).unwrap()) - 0.5).abs() < 1e-15);
        let (s, sc) = greens(&data).unwrap();
        assert!((value(&s) - 0.5).abs() < 1e-15);
        assert!((value(&sc) - 2.0 / 3.0).abs() < 1e-15);
        let (delta, c) = delta_cov(&data).unwrap();
        assert!((value(&delta) - 0.5).abs() < 1e-15);
        assert!((value(&c) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn qcheck_scalar_examples() {
        let data = srm(2.0, 1.0, 2.0);
        assert!((value(&qcheck_recursion(&data).unwrap()) - 1.0).abs() < 1e-15);
        let data = srm(3.0, 0.0, 1.0);
        assert_eq!(value(&qcheck_recursion(&data).unwrap()), 3.0);
        assert_eq!(value(&qcheck_alt(&data).unwrap()), 3.0);
    }

    #[test]
    fn srm_identity_values() {
        // Š = S + S𝔔C𝔔S and bCQ* = K⁻¹[bQ* + 𝔔Q₋ŠQ̌₋*Q̌] with the scalar values
        let (s, sc, c, qc): (f64, f64, f64, f64) = (0.5, 2.0 / 3.0, 2.0 / 3.0, 0.5);
        assert!((s + s * c * s - sc).abs() < 1e-15);
        assert!((c - 0.5 * (1.0 + sc * qc)).abs() < 1e-15);
        let r = identity_suite_eda(&srm(1.0, 1.0, 1.0)).unwrap();
        assert!(r.max() < 1e-15, "{r:?}");
    }

    #[test]
    fn zero_q_minus_reduces_to_inverse_d() {
        let mut ens = Ensemble::new(2);
        let mut data = random_data(&mut ens, (3, 2, 1));
        data.q_minus = Operator::zero(&data.h_minus, &data.h);
        let (s, _) = greens(&data).unwrap();
        let d_inv = inverse(&data.d, 1e12, "D").unwrap();
        assert!(relative_residual(s.entries(), d_inv.entries()) < 1e-14);
        let (delta, _) = delta_cov(&data).unwrap();
        assert_eq!(delta, data.fq);
        assert_eq!(identity_suite_eda(&data).unwrap().b, 0.0);
    }

    #[test]
    fn qcheck_representations_agree() {
        let mut ens = Ensemble::new(7);
        for _ in 0..100 {
            let n = ens.dim(2, 12);
            let np = ens.dim(1, n.min(8));
            let data = random_data(&mut ens, (n, n, np));
            let r = qcheck_recursion(&data).unwrap();
            let a = qcheck_alt(&data).unwrap();
            assert!(relative_residual(r.entries(), a.entries()) < 1e-11);
        }
        let mut data = random_data(&mut ens, (6, 6, 3));
        data.q = Operator::zero(&data.h, &data.h_plus);
        let expect = Operator::identity(&data.h_plus).scale(data.b);
        assert!(relative_residual(qcheck_alt(&data).unwrap().entries(), expect.entries()) < 1e-15);
    }

    #[test]
    fn random_kernels_are_symmetric_and_delta_is_psd() {
        let mut ens = Ensemble::new(9);
        for _ in 0..20 {
            let data = random_data(&mut ens, (5, 4, 2));
            let ks = KernelSet::compute(&data).unwrap();
            assert!(ks.max_asymmetry() < 1e-11, "{}", ks.max_asymmetry());
            let sym = ks.delta.entries().map(|z| z.re);
            let sym = (&sym + sym.transpose()) * 0.5;
            assert!(sym.symmetric_eigenvalues().min() >= -1e-11);
        }
    }

    #[test]
    fn eda_suite_on_random_draws() {
        let mut ens = Ensemble::new(13);
        for _ in 0..25 {
            let data = random_data(&mut ens, (6, 4, 2));
            let r = identity_suite_eda(&data).unwrap();
            assert!(r.max() < 1e-11, "{r:?}");
        }
    }

    #[test]
    fn eda_suite_with_nonsymmetric_d() {
        let mut ens = Ensemble::new(17);
        for _ in 0..10 {
            let mut data = random_data(&mut ens, (4, 3, 2));
            let skew = ens.real_matrix(4, 4) * 0.3;
            let skew = Operator::from_real(
                data.h_minus.clone(),
                data.h_minus.clone(),
                &(&skew - skew.transpose()),
            )
            .unwrap();
            data.d = &data.d + &skew;
            assert!(!data.d_is_symmetric());
            let r = identity_suite_eda(&data).unwrap();
            assert!(r.max() < 1e-11, "{r:?}");
        }
    }

    #[test]
    fn eda_suite_requires_invertible_d() {
        let mut ens = Ensemble::new(19);
        let mut data = random_data(&mut ens, (1, 2, 1));
        data.d = Operator::zero(&data.h_minus, &data.h_minus);
        let err = identity_suite_eda(&data).unwrap_err();
        assert!(
            matches!(err, Error::NearSingular { ref assumption, .. } if assumption == ASSUME_D),
            "{err:?}"
        );
    }

    #[test]
    fn kernels_with_nontrivial_forms() {
        let mut ens = Ensemble::new(23);
        let hm = ens.random_space("H-", 4);
        let h = ens.random_space("H", 3);
        let hp = ens.random_space("H+", 2);
        let data = RGData::new(
            ens.real_operator(&hm, &h),
            ens.real_operator(&h, &hp),
            1.3,
            ens.spd_operator(&h),
            ens.spd_operator(&hm),
        )
        .unwrap();
        let ks = KernelSet::compute(&data).unwrap();
        assert!(ks.max_asymmetry() < 1e-11);
        assert!(
            relative_residual(qcheck_alt(&data).unwrap().entries(), ks.qcheck.entries()) < 1e-11
        );
        assert!(identity_suite_eda(&data).unwrap().max() < 1e-11);
    }

    #[test]
    fn rejects_invalid_fq() {
        let h = SpaceSpec::euclidean("H", 2);
        let hm = SpaceSpec::euclidean("H-", 2);
        let hp = SpaceSpec::euclidean("H+", 1);
        let mut ens = Ensemble::new(1);
        let asym = Operator::from_real(
            h.clone(),
            h.clone(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]),
        )
        .unwrap();
        let res = RGData::new(
            ens.real_operator(&hm, &h),
            ens.real_operator(&h, &hp),
            1.0,
            asym,
            Operator::identity(&hm),
        );
        assert!(matches!(res, Err(Error::Precondition(_))));
        let neg = Operator::identity(&h).scale(C64::from(-1.0));
        let res = RGData::new(
            ens.real_operator(&hm, &h),
            ens.real_operator(&h, &hp),
            1.0,
            neg,
            Operator::identity(&hm),
        );
        assert!(matches!(res, Err(Error::Precondition(_))));
    }
}
