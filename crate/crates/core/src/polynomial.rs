//! The interaction polynomial `P(φ*, φ)` on `𝒞H₋`.
//!
//! `P` is a scalar [`Series`] in `2n` variables, the components of `φ*`
//! followed by those of `φ`. Gradients are taken with respect to the
//! bilinear pairing of `H₋`, so `⟨h, P'_*⟩₋ = d/dt P(φ*, φ + t h)|₀`, and follow
//! the star-swap convention: `P'_* = ∇_φ P`, `P' = ∇_{φ*} P`.

use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::linalg::{split, stack, CMat, CVec, Space, C64};
use crate::series::{degree, Exponent, Series};

/// One entry of a monomial tensor: slot indices of the starred and unstarred
/// groups and the complex coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub multi_index_star: Vec<usize>,
    pub multi_index: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// The bidegree-`(kstar, k)` monomial `Σ T[i…; j…] φ*_i… φ_j…`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialRecord {
    pub kstar: usize,
    pub k: usize,
    pub entries: Vec<TensorEntry>,
}

#[derive(Clone, Debug)]
pub struct PolynomialP {
    space: Space,
    poly: Series,
}

impl PolynomialP {
    pub fn zero(space: &Space) -> Self {
        let n = space.dim();
        PolynomialP {
            space: space.clone(),
            poly: Series::zero(2 * n, 1, usize::MAX / 2),
        }
    }

    /// Builds `P` from tensor records. Entries are summed into monomials, so
    /// a non-symmetric listing is symmetrized.
    pub fn from_records(space: &Space, records: &[MonomialRecord]) -> Result<Self> {
        let n = space.dim();
        let mut p = PolynomialP::zero(space);
        for rec in records {
            if rec.kstar + rec.k < 2 {
                return Err(Error::Polynomial(format!(
                    "monomial of bidegree ({},{}) has degree below two",
                    rec.kstar, rec.k
                )));
            }
            for entry in &rec.entries {
                if entry.multi_index_star.len() != rec.kstar || entry.multi_index.len() != rec.k {
                    return Err(Error::Polynomial(format!(
                        "entry {:?};{:?} does not match bidegree ({},{})",
                        entry.multi_index_star, entry.multi_index, rec.kstar, rec.k
                    )));
                }
                if let Some(&i) = entry
                    .multi_index_star
                    .iter()
                    .chain(&entry.multi_index)
                    .find(|&&i| i >= n)
                {
                    return Err(Error::Polynomial(format!(
                        "index {i} out of range for dimension {n}"
                    )));
                }
                let mut e = vec![0u8; 2 * n];
                for &i in &entry.multi_index_star {
                    e[i] += 1;
                }
                for &j in &entry.multi_index {
                    e[n + j] += 1;
                }
                p.add_monomial(e, C64::new(entry.re, entry.im))?;
            }
        }
        Ok(p)
    }

    /// Adds `coeff · Π φ*_i^{e_i} Π φ_j^{e_{n+j}}`.
    pub fn add_monomial(&mut self, e: Exponent, coeff: C64) -> Result<()> {
        if e.len() != self.poly.nvars() {
            return Err(Error::Polynomial(format!(
                "exponent has {} entries, expected {}",
                e.len(),
                self.poly.nvars()
            )));
        }
        if degree(&e) < 2 {
            return Err(Error::Polynomial(format!(
                "monomial {e:?} has degree below two"
            )));
        }
        self.poly.add_term(e, CVec::from_element(1, coeff));
        Ok(())
    }

    /// `g φ*φ²` on a one-dimensional space.
    pub fn srm(space: &Space, g: f64) -> Result<Self> {
        if space.dim() != 1 {
            return Err(Error::Shape(
                "the scalar model lives on a one-dimensional space".into(),
            ));
        }
        let mut p = PolynomialP::zero(space);
        if g != 0.0 {
            p.add_monomial(vec![1, 2], C64::from(g))?;
        }
        Ok(p)
    }

    /// Random real-coefficient polynomial with every monomial of total degree
    /// in `degrees` present, coefficients `scale · N(0,1)`.
    pub fn random(ens: &mut Ensemble, space: &Space, degrees: &[usize], scale: f64) -> Self {
        let n = space.dim();
        let mut p = PolynomialP::zero(space);
        for &deg in degrees {
            for e in exponents_of_degree(2 * n, deg) {
                p.add_monomial(e, C64::from(scale * ens.normal()))
                    .expect("degree ≥ 2");
            }
        }
        p
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn as_series(&self) -> &Series {
        &self.poly
    }

    pub fn is_zero(&self) -> bool {
        self.poly.terms().values().all(|c| c[0] == C64::from(0.0))
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.nonzero_exponents().map(|e| degree(e)).min()
    }

    pub fn max_degree(&self) -> usize {
        self.poly.actual_degree()
    }

    /// Whether every nonzero monomial has degree at least three.
    pub fn is_at_least_cubic(&self) -> bool {
        self.min_degree().is_none_or(|d| d >= 3)
    }

    fn nonzero_exponents(&self) -> impl Iterator<Item = &Exponent> {
        self.poly
            .terms()
            .iter()
            .filter(|(_, c)| c[0] != C64::from(0.0))
            .map(|(e, _)| e)
    }

    /// Tensor records, one per bidegree present, listing each monomial once
    /// with its index tuple in sorted order.
    pub fn to_records(&self) -> Vec<MonomialRecord> {
        let n = self.dim();
        let mut out: Vec<MonomialRecord> = Vec::new();
        for (e, c) in self.poly.terms() {
            if c[0] == C64::from(0.0) {
                continue;
            }
            let (kstar, k) = (degree(&e[..n]), degree(&e[n..]));
            let expand = |part: &[u8]| -> Vec<usize> {
                part.iter()
                    .enumerate()
                    .flat_map(|(i, &p)| std::iter::repeat_n(i, p as usize))
                    .collect()
            };
            let entry = TensorEntry {
                multi_index_star: expand(&e[..n]),
                multi_index: expand(&e[n..]),
                re: c[0].re,
                im: c[0].im,
            };
            match out.iter_mut().find(|r| r.kstar == kstar && r.k == k) {
                Some(r) => r.entries.push(entry),
                None => out.push(MonomialRecord {
                    kstar,
                    k,
                    entries: vec![entry],
                }),
            }
        }
        out.sort_by_key(|r| (r.kstar + r.k, r.kstar));
        out
    }

    fn check(&self, phi_star: &CVec, phi: &CVec) -> Result<CVec> {
        let n = self.dim();
        if phi_star.len() != n || phi.len() != n {
            return Err(Error::Shape(format!(
                "P expects fields of dimension {n}, got {} and {}",
                phi_star.len(),
                phi.len()
            )));
        }
        Ok(stack(phi_star, phi))
    }

    pub fn value(&self, phi_star: &CVec, phi: &CVec) -> Result<C64> {
        let x = self.check(phi_star, phi)?;
        Ok(self.poly.eval(&x)[0])
    }

    /// `(P'_*, P')` stacked as one series in `(φ*, φ)` with values in
    /// `𝒞H₋ ⊕ 𝒞H₋`.
    pub fn gradient_series(&self) -> Series {
        let n = self.dim();
        let order = self.max_degree().saturating_sub(1).max(1);
        let g_inv = self.space.gram_inv().map(C64::from);
        let coord = |offset: usize| {
            let mut s = Series::zero(2 * n, n, order);
            for j in 0..n {
                let mut unit = CVec::zeros(n);
                unit[j] = C64::from(1.0);
                for (e, c) in self.poly.derivative(offset + j).terms() {
                    s.add_term(e.clone(), &unit * c[0]);
                }
            }
            s.apply(&g_inv)
        };
        Series::stack(&coord(n), &coord(0))
    }

    /// `(value, P'_*, P')` at `(φ*, φ)`.
    pub fn eval_with_grads(&self, phi_star: &CVec, phi: &CVec) -> Result<(C64, CVec, CVec)> {
        let x = self.check(phi_star, phi)?;
        let value = self.poly.eval(&x)[0];
        let (gs, g) = split(&self.gradient_series().eval(&x), self.dim());
        Ok((value, gs, g))
    }

    /// Jacobian of `(P'_*, P')` with respect to `(φ*, φ)`.
    pub fn gradient_jacobian(&self, phi_star: &CVec, phi: &CVec) -> Result<CMat> {
        let x = self.check(phi_star, phi)?;
        Ok(self.gradient_series().jacobian_at(&x))
    }
}

/// Every exponent vector in `nvars` variables of total degree `deg`, in
/// lexicographically decreasing order.
pub fn exponents_of_degree(nvars: usize, deg: usize) -> Vec<Exponent> {
    if nvars == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=deg).rev() {
        for rest in exponents_of_degree(nvars - 1, deg - first) {
            let mut e = vec![first as u8];
            e.extend(rest);
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpaceSpec;
    use proptest::prelude::*;

    fn scalars(v: &[C64]) -> CVec {
        CVec::from_column_slice(v)
    }

    #[test]
    fn scalar_model_value_and_gradients() {
        let h = SpaceSpec::euclidean("H₋", 1);
        let g = 0.7;
        let p = PolynomialP::srm(&h, g).unwrap();
        let (fs, f) = (C64::new(0.3, -0.2), C64::new(-0.4, 0.9));
        let (v, ps, pp) = p.eval_with_grads(&scalars(&[fs]), &scalars(&[f])).unwrap();
        assert!((v - g * fs * f * f).norm() < 1e-15);
        assert!((ps[0] - 2.0 * g * fs * f).norm() < 1e-15);
        assert!((pp[0] - g * f * f).norm() < 1e-15);
        assert!(p.is_at_least_cubic());
    }

    #[test]
    fn zero_polynomial_is_zero_everywhere() {
        let h = SpaceSpec::euclidean("H₋", 3);
        let p = PolynomialP::zero(&h);
        let mut ens = Ensemble::new(2);
        let (v, ps, pp) = p
            .eval_with_grads(&ens.complex_vector(3), &ens.complex_vector(3))
            .unwrap();
        assert_eq!(v, C64::from(0.0));
        assert_eq!(ps.camax(), 0.0);
        assert_eq!(pp.camax(), 0.0);
        assert!(p.is_zero());
    }

    #[test]
    fn low_degree_records_are_rejected() {
        let h = SpaceSpec::euclidean("H₋", 2);
        let rec = MonomialRecord {
            kstar: 1,
            k: 0,
            entries: vec![TensorEntry {
                multi_index_star: vec![0],
                multi_index: vec![],
                re: 1.0,
                im: 0.0,
            }],
        };
        assert!(matches!(
            PolynomialP::from_records(&h, &[rec]),
            Err(Error::Polynomial(_))
        ));
        let bad_index = MonomialRecord {
            kstar: 1,
            k: 1,
            entries: vec![TensorEntry {
                multi_index_star: vec![0],
                multi_index: vec![5],
                re: 1.0,
                im: 0.0,
            }],
        };
        assert!(PolynomialP::from_records(&h, &[bad_index]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let mut ens = Ensemble::new(4);
        let h = SpaceSpec::euclidean("H₋", 2);
        let p = PolynomialP::random(&mut ens, &h, &[3, 4], 0.5);
        let q = PolynomialP::from_records(&h, &p.to_records()).unwrap();
        assert_eq!(p.as_series(), q.as_series());
    }

    /// `P = ⟨φ*, M φ⟩` in coordinates `Σ φ*_i (GM)_{ij} φ_j`; with respect to
    /// the pairing `P'_* = Mᵀ-action on φ*`, checked by central differences.
    #[test]
    fn quadratic_monomial_gradient_matches_finite_differences() {
        let mut ens = Ensemble::new(6);
        let h = ens.random_space("H₋", 3);
        let m = CMat::from_fn(3, 3, |_, _| ens.complex());
        let mut p = PolynomialP::zero(&h);
        for i in 0..3 {
            for j in 0..3 {
                let mut e = vec![0u8; 6];
                e[i] += 1;
                e[3 + j] += 1;
                p.add_monomial(e, m[(i, j)]).unwrap();
            }
        }
        let fs = ens.complex_vector(3);
        let f = ens.complex_vector(3);
        let (_, ps, pp) = p.eval_with_grads(&fs, &f).unwrap();
        let step = 1e-6;
        for k in 0..3 {
            let mut dir = CVec::zeros(3);
            dir[k] = C64::from(1.0);
            let fd_phi = (p.value(&fs, &(&f + &dir * C64::from(step))).unwrap()
                - p.value(&fs, &(&f - &dir * C64::from(step))).unwrap())
                / (2.0 * step);
            let fd_star = (p.value(&(&fs + &dir * C64::from(step)), &f).unwrap()
                - p.value(&(&fs - &dir * C64::from(step)), &f).unwrap())
                / (2.0 * step);
            assert!((h.pair(&dir, &ps) - fd_phi).norm() < 1e-7 * (1.0 + fd_phi.norm()));
            assert!((h.pair(&dir, &pp) - fd_star).norm() < 1e-7 * (1.0 + fd_star.norm()));
        }
        // P'_* in coordinates: G⁻¹ Mᵀ φ*
        let expected = h.gram_inv().map(C64::from) * m.transpose() * &fs;
        assert!((ps - expected).camax() < 1e-12);
    }

    #[test]
    fn exponent_enumeration_counts() {
        // C(n+d−1, d)
        assert_eq!(exponents_of_degree(4, 3).len(), 20);
        assert_eq!(exponents_of_degree(2, 5).len(), 6);
        assert!(exponents_of_degree(3, 4).iter().all(|e| degree(e) == 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gradients_match_directional_derivatives(seed in any::<u64>()) {
            let mut ens = Ensemble::new(seed);
            let h = ens.random_space("H₋", 2);
            let p = PolynomialP::random(&mut ens, &h, &[2, 3, 4], 0.3);
            let fs = ens.complex_vector(2) * C64::from(0.5);
            let f = ens.complex_vector(2) * C64::from(0.5);
            let dir = ens.complex_vector(2);
            let (_, ps, pp) = p.eval_with_grads(&fs, &f).unwrap();
            let step = 1e-6;
            let sc = C64::from(step);
            let fd_phi = (p.value(&fs, &(&f + &dir * sc)).unwrap() - p.value(&fs, &(&f - &dir * sc)).unwrap()) / (2.0 * step);
            let fd_star = (p.value(&(&fs + &dir * sc), &f).unwrap() - p.value(&(&fs - &dir * sc), &f).unwrap()) / (2.0 * step);
            prop_assert!((h.pair(&dir, &ps) - fd_phi).norm() <= 1e-7 * (1.0 + fd_phi.norm()));
            prop_assert!((h.pair(&dir, &pp) - fd_star).norm() <= 1e-7 * (1.0 + fd_star.norm()));
        }
    }
}
