//! Truncated multivariate power series with vector coefficients.
//!
//! A [`Series`] in `nvars` scalar variables with values in `C^dim` is stored
//! as a map from exponent vectors to coefficient vectors; every term of total
//! degree above `max_order` is dropped. When the variables are a starred and
//! an unstarred family, the first `split` variables are the starred ones and
//! the bidegree of a monomial is `(degree in starred, degree in unstarred)`.
//!
//! The monomial map is equivalent to a family of symmetric multilinear
//! tensors, one per bidegree; [`Series::symmetric_tensors`] produces that
//! view.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::{CMat, CVec, C64};

pub type Exponent = Vec<u8>;

pub fn degree(e: &[u8]) -> usize {
    e.iter().map(|&x| x as usize).sum()
}

fn unit(nvars: usize, j: usize) -> Exponent {
    let mut e = vec![0u8; nvars];
    e[j] = 1;
    e
}

fn add_exp(a: &[u8], b: &[u8]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of index tuples that collapse onto the monomial `e`.
fn multinomial(e: &[u8]) -> f64 {
    factorial(degree(e)) / e.iter().map(|&x| factorial(x as usize)).product::<f64>()
}

/// Scalar truncated series, the workhorse of products and composition.
#[derive(Clone, Debug, Default)]
struct Scalar {
    terms: BTreeMap<Exponent, C64>,
}

impl Scalar {
    fn one(nvars: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; nvars], C64::from(1.0));
        Scalar { terms }
    }

    fn mul(&self, other: &Scalar, max_order: usize) -> Scalar {
        let mut out: BTreeMap<Exponent, C64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            let da = degree(ea);
            for (eb, cb) in &other.terms {
                if da + degree(eb) > max_order {
                    continue;
                }
                *out.entry(add_exp(ea, eb)).or_default() += ca * cb;
            }
        }
        Scalar { terms: out }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    nvars: usize,
    dim: usize,
    max_order: usize,
    terms: BTreeMap<Exponent, CVec>,
}

impl Series {
    pub fn zero(nvars: usize, dim: usize, max_order: usize) -> Self {
        Series {
            nvars,
            dim,
            max_order,
            terms: BTreeMap::new(),
        }
    }

    /// The linear map `x ↦ m x` as a series; `m` is `dim × nvars`.
    pub fn linear(m: &CMat, max_order: usize) -> Self {
        let mut s = Series::zero(m.ncols(), m.nrows(), max_order);
        if max_order >= 1 {
            for j in 0..m.ncols() {
                s.add_term(unit(m.ncols(), j), m.column(j).into_owned());
            }
        }
        s
    }

    pub fn constant(nvars: usize, value: CVec, max_order: usize) -> Self {
        let mut s = Series::zero(nvars, value.len(), max_order);
        s.add_term(vec![0; nvars], value);
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, CVec> {
        &self.terms
    }

    pub fn coefficient(&self, e: &[u8]) -> Option<&CVec> {
        self.terms.get(e)
    }

    /// Adds `coeff·x^e`; terms above `max_order` are discarded.
    pub fn add_term(&mut self, e: Exponent, coeff: CVec) {
        assert_eq!(e.len(), self.nvars, "exponent length");
        assert_eq!(coeff.len(), self.dim, "coefficient length");
        if degree(&e) > self.max_order {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(c) => *c += coeff,
            None => {
                self.terms.insert(e, coeff);
            }
        }
    }

    /// Highest degree with a nonzero coefficient (0 for the zero series).
    pub fn actual_degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, c)| c.iter().any(|z| *z != C64::from(0.0)))
            .map(|(e, _)| degree(e))
            .max()
            .unwrap_or(0)
    }

    pub fn has_constant_term(&self) -> bool {
        self.terms
            .get(&vec![0; self.nvars])
            .is_some_and(|c| c.iter().any(|z| *z != C64::from(0.0)))
    }

    /// Terms with `lo ≤ degree ≤ hi`.
    pub fn degree_range(&self, lo: usize, hi: usize) -> Series {
        Series {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| (lo..=hi).contains(&degree(e)))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
            ..Series::zero(self.nvars, self.dim, self.max_order)
        }
    }

    pub fn with_max_order(&self, max_order: usize) -> Series {
        Series {
            max_order,
            ..self.degree_range(0, max_order)
        }
    }

    /// Coefficient matrix of the degree-one part (`dim × nvars`).
    pub fn linear_part(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.nvars);
        for j in 0..self.nvars {
            if let Some(c) = self.terms.get(&unit(self.nvars, j)) {
                m.set_column(j, c);
            }
        }
        m
    }

    fn zip_with(&self, other: &Series, sign: f64) -> Series {
        assert_eq!(
            (self.nvars, self.dim),
            (other.nvars, other.dim),
            "series shapes differ"
        );
        let mut out = self.clone();
        out.max_order = self.max_order.min(other.max_order);
        out.terms.retain(|e, _| degree(e) <= out.max_order);
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c * C64::from(sign));
        }
        out
    }

    pub fn add(&self, other: &Series) -> Series {
        self.zip_with(other, 1.0)
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.zip_with(other, -1.0)
    }

    pub fn scale(&self, a: C64) -> Series {
        self.map_coefficients(|c| c * a, self.dim)
    }

    /// Applies the matrix `m` (`out × dim`) to every coefficient.
    pub fn apply(&self, m: &CMat) -> Series {
        assert_eq!(m.ncols(), self.dim, "matrix width");
        self.map_coefficients(|c| m * c, m.nrows())
    }

    fn map_coefficients(&self, f: impl Fn(&CVec) -> CVec, dim: usize) -> Series {
        Series {
            nvars: self.nvars,
            dim,
            max_order: self.max_order,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), f(c))).collect(),
        }
    }

    /// `(a, b)` stacked into one series of dimension `a.dim + b.dim`.
    pub fn stack(a: &Series, b: &Series) -> Series {
        assert_eq!(a.nvars, b.nvars, "series variables differ");
        let mut out = Series::zero(a.nvars, a.dim + b.dim, a.max_order.min(b.max_order));
        for (e, c) in &a.terms {
            let mut v = CVec::zeros(out.dim);
            v.rows_mut(0, a.dim).copy_from(c);
            out.add_term(e.clone(), v);
        }
        for (e, c) in &b.terms {
            let mut v = CVec::zeros(out.dim);
            v.rows_mut(a.dim, b.dim).copy_from(c);
            out.add_term(e.clone(), v);
        }
        out
    }

    /// Splits the value dimension after `n` components.
    pub fn split(&self, n: usize) -> (Series, Series) {
        let top = self.map_coefficients(|c| c.rows(0, n).into_owned(), n);
        let bottom = self.map_coefficients(|c| c.rows(n, self.dim - n).into_owned(), self.dim - n);
        (top, bottom)
    }

    fn component(&self, i: usize) -> Scalar {
        Scalar {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c[i]))
                .filter(|(_, z)| *z != C64::from(0.0))
                .collect(),
        }
    }

    pub fn eval(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.nvars, "point dimension");
        let mut out = CVec::zeros(self.dim);
        for (e, c) in &self.terms {
            out += c * monomial(e, x);
        }
        out
    }

    /// `∂/∂x_j` of every component.
    pub fn derivative(&self, j: usize) -> Series {
        let mut out = Series::zero(self.nvars, self.dim, self.max_order.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[j] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[j] -= 1;
            out.add_term(d, c * C64::from(e[j] as f64));
        }
        out
    }

    /// Jacobian matrix (`dim × nvars`) at `x`.
    pub fn jacobian_at(&self, x: &CVec) -> CMat {
        let mut jac = CMat::zeros(self.dim, self.nvars);
        for (e, c) in &self.terms {
            for j in 0..self.nvars {
                if e[j] == 0 {
                    continue;
                }
                let mut d = e.clone();
                d[j] -= 1;
                let factor = C64::from(e[j] as f64) * monomial(&d, x);
                for i in 0..self.dim {
                    jac[(i, j)] += c[i] * factor;
                }
            }
        }
        jac
    }

    /// `self(inner(y))`, truncated at `inner.max_order`. `inner` must take
    /// values in the variable space of `self`. Inner constant terms are
    /// allowed when `self` is a polynomial of degree at most `inner.max_order`;
    /// otherwise the result is only meaningful for inner series without
    /// constant terms.
    pub fn compose(&self, inner: &Series) -> Series {
        assert_eq!(
            inner.dim, self.nvars,
            "inner series has the wrong dimension"
        );
        let order = inner.max_order;
        let comps: Vec<Scalar> = (0..self.nvars).map(|i| inner.component(i)).collect();
        // x^e = x^(e − e_i)·x_i with i the last nonzero slot, memoized
        let mut memo: BTreeMap<Exponent, Scalar> = BTreeMap::new();
        memo.insert(vec![0; self.nvars], Scalar::one(inner.nvars));
        let mut out = Series::zero(inner.nvars, self.dim, order);
        for (e, c) in &self.terms {
            let prod = monomial_of(e, &comps, &mut memo, order);
            for (pe, pc) in &prod.terms {
                out.add_term(pe.clone(), c * *pc);
            }
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Frobenius norm of the symmetric tensor of every bidegree present,
    /// with the first `split` variables counted as starred.
    pub fn tensor_norms(&self, split: usize) -> BTreeMap<(usize, usize), f64> {
        let mut sq: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (e, c) in &self.terms {
            let key = (degree(&e[..split]), degree(&e[split..]));
            let count = multinomial(&e[..split]) * multinomial(&e[split..]);
            *sq.entry(key).or_default() += c.norm_squared() / count;
        }
        sq.into_iter().map(|(k, v)| (k, v.sqrt())).collect()
    }

    /// Dense symmetric tensors for every bidegree `(kstar, k)` with
    /// `1 ≤ kstar + k ≤ max_order`. Entry order: output component, then the
    /// `kstar` starred slots, then the `k` unstarred slots, row-major.
    pub fn symmetric_tensors(&self, split: usize) -> BTreeMap<(usize, usize), SymmetricTensor> {
        let n_star = split;
        let n = self.nvars - split;
        let mut out = BTreeMap::new();
        for total in 1..=self.max_order {
            for kstar in 0..=total {
                let k = total - kstar;
                if (kstar > 0 && n_star == 0) || (k > 0 && n == 0) {
                    continue;
                }
                let slots: Vec<usize> = std::iter::repeat_n(n_star, kstar)
                    .chain(std::iter::repeat_n(n, k))
                    .collect();
                let count: usize = slots.iter().product();
                let mut data = Vec::with_capacity(self.dim * count);
                for comp in 0..self.dim {
                    for flat in 0..count {
                        let mut rem = flat;
                        let mut idx = vec![0usize; slots.len()];
                        for (s, &size) in idx.iter_mut().zip(&slots).rev() {
                            *s = rem % size;
                            rem /= size;
                        }
                        let mut e = vec![0u8; self.nvars];
                        for (pos, &i) in idx.iter().enumerate() {
                            if pos < kstar {
                                e[i] += 1;
                            } else {
                                e[split + i] += 1;
                            }
                        }
                        let weight = multinomial(&e[..split]) * multinomial(&e[split..]);
                        let value = self
                            .terms
                            .get(&e)
                            .map_or(C64::from(0.0), |c| c[comp] / weight);
                        data.push(value);
                    }
                }
                let mut shape = vec![self.dim];
                shape.extend(slots);
                out.insert((kstar, k), SymmetricTensor { shape, data });
            }
        }
        out
    }
}

/// Dense tensor, row-major over `shape`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetricTensor {
    pub shape: Vec<usize>,
    pub data: Vec<C64>,
}

fn monomial_of<'m>(
    e: &[u8],
    comps: &[Scalar],
    memo: &'m mut BTreeMap<Exponent, Scalar>,
    order: usize,
) -> &'m Scalar {
    if !memo.contains_key(e) {
        let i = e
            .iter()
            .rposition(|&p| p > 0)
            .expect("constant monomial is memoized");
        let mut lower = e.to_vec();
        lower[i] -= 1;
        let value = monomial_of(&lower, comps, memo, order).mul(&comps[i], order);
        memo.insert(e.to_vec(), value);
    }
    &memo[e]
}

pub fn monomial(e: &[u8], x: &CVec) -> C64 {
    e.iter()
        .zip(x.iter())
        .filter(|(&p, _)| p > 0)
        .map(|(&p, &v)| v.powu(p as u32))
        .product()
}

/// Maximum over bidegrees of the tensor norm of `a − b`.
pub fn coefficient_residual(a: &Series, b: &Series, split: usize) -> f64 {
    a.sub(b)
        .tensor_norms(split)
        .values()
        .copied()
        .fold(0.0, f64::max)
}

/// `∫₀¹ f(t) dt` by Gauss–Legendre with `⌈(degree+1)/2⌉` nodes, exact for
/// polynomial `f` of the given degree.
pub fn integrate_unit_interval(degree: usize, mut f: impl FnMut(f64) -> C64) -> C64 {
    let nodes = (degree + 1).div_ceil(2).max(1);
    let rule = gauss_quad::GaussLegendre::new(nodes.try_into().expect("positive"));
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| f(0.5 * (x + 1.0)) * (0.5 * w))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Ensemble;

    fn c(x: f64) -> C64 {
        C64::from(x)
    }

    fn scalar_poly(nvars: usize, terms: &[(&[u8], f64)], order: usize) -> Series {
        let mut s = Series::zero(nvars, 1, order);
        for (e, v) in terms {
            s.add_term(e.to_vec(), CVec::from_element(1, c(*v)));
        }
        s
    }

    #[test]
    fn composition_of_one_variable_series() {
        // f(x) = x/2 − x²/8,  g(t) = 2t/3 − t²/27;  f(g(t)) = t/3 − 2t²/27 + O(t³)
        let f = scalar_poly(1, &[(&[1], 0.5), (&[2], -1.0 / 8.0)], 2);
        let g = scalar_poly(1, &[(&[1], 2.0 / 3.0), (&[2], -1.0 / 27.0)], 2);
        let h = f.compose(&g);
        assert!((h.coefficient(&[1]).unwrap()[0] - c(1.0 / 3.0)).norm() < 1e-15);
        assert!((h.coefficient(&[2]).unwrap()[0] - c(-2.0 / 27.0)).norm() < 1e-15);
    }

    #[test]
    fn composition_with_zero_quadratic_part_is_linear_times_inner() {
        let mut ens = Ensemble::new(1);
        let lin = CMat::from_fn(2, 3, |_, _| ens.complex());
        let outer = Series::linear(&lin, 3);
        let mut inner = Series::linear(&CMat::from_fn(3, 2, |_, _| ens.complex()), 3);
        inner.add_term(vec![1, 1], ens.complex_vector(3));
        inner.add_term(vec![0, 2], ens.complex_vector(3));
        let composed = outer.compose(&inner);
        let expected = inner.apply(&lin);
        assert!(coefficient_residual(&composed, &expected, 1) < 1e-14);
    }

    #[test]
    fn composition_matches_pointwise_evaluation() {
        let mut ens = Ensemble::new(3);
        let mut outer = Series::zero(2, 2, 3);
        for e in [[1, 0], [0, 1], [2, 0], [1, 1], [0, 3], [2, 1]] {
            outer.add_term(e.to_vec(), ens.complex_vector(2));
        }
        let mut inner = Series::linear(&CMat::from_fn(2, 3, |_, _| ens.complex()), 3);
        inner.add_term(vec![1, 0, 1], ens.complex_vector(2));
        let composed = outer.compose(&inner);
        // at a tiny point the truncation error is O(|y|⁴)
        let y = ens.complex_vector(3) * C64::from(1e-3);
        let direct = outer.eval(&inner.eval(&y));
        let via = composed.eval(&y);
        assert!((direct - via).camax() < 1e-10);
    }

    #[test]
    fn jacobian_matches_derivatives() {
        let mut ens = Ensemble::new(5);
        let mut s = Series::zero(3, 2, 4);
        for e in [[1, 0, 0], [0, 2, 1], [1, 1, 1], [3, 0, 1], [0, 0, 4]] {
            s.add_term(e.to_vec(), ens.complex_vector(2));
        }
        let x = ens.complex_vector(3);
        let jac = s.jacobian_at(&x);
        for j in 0..3 {
            let col = s.derivative(j).eval(&x);
            assert!((jac.column(j) - col).camax() < 1e-13);
        }
    }

    #[test]
    fn tensors_reproduce_the_polynomial() {
        let mut ens = Ensemble::new(9);
        let mut s = Series::zero(4, 1, 3);
        for e in [[1, 0, 1, 0], [0, 1, 2, 0], [2, 0, 0, 1], [0, 0, 1, 1]] {
            s.add_term(e.to_vec(), ens.complex_vector(1));
        }
        let tensors = s.symmetric_tensors(2);
        let xs = ens.complex_vector(2);
        let x = ens.complex_vector(2);
        let point = CVec::from_iterator(4, xs.iter().chain(x.iter()).copied());
        let mut total = C64::from(0.0);
        for ((kstar, k), t) in &tensors {
            let count: usize = t.shape[1..].iter().product();
            for flat in 0..count {
                let mut rem = flat;
                let mut prod = C64::from(1.0);
                for pos in (0..kstar + k).rev() {
                    let size = t.shape[1 + pos];
                    let i = rem % size;
                    rem /= size;
                    prod *= if pos < *kstar { xs[i] } else { x[i] };
                }
                total += t.data[flat] * prod;
            }
        }
        assert!((total - s.eval(&point)[0]).norm() < 1e-13);
        // symmetric within each slot group
        let t = &tensors[&(1, 2)];
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    assert_eq!(t.data[a * 4 + b * 2 + d], t.data[a * 4 + d * 2 + b]);
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for deg in 0..12 {
            let got = integrate_unit_interval(deg, |t| C64::from(t.powi(deg as i32)));
            assert!(
                (got - C64::from(1.0 / (deg as f64 + 1.0))).norm() < 1e-14,
                "degree {deg}"
            );
        }
    }
}
