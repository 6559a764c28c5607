//! Finite-dimensional spaces carrying a positive-definite symmetric form,
//! complex-linear operators between them, and the inversion identities the
//! rest of the crate is built on.
//!
//! Forms are extended to complexifications *bilinearly*: the pairing of `u`
//! and `v` is `uᵀ G v` with no conjugation. Adjoints are taken with respect to
//! these forms, `A* = G_dom⁻¹ Aᵀ G_cod`, so that `⟨Au, w⟩ = ⟨u, A*w⟩`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Condition-number gate applied to every inversion unless a caller overrides it.
pub const DEFAULT_COND_LIMIT: f64 = 1e8;

const SYMMETRY_TOL: f64 = 1e-14;

/// A real space `H` of dimension `dim` together with the Gram matrix of its
/// inner product in the chosen basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceSpec {
    name: String,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

pub type Space = Arc<SpaceSpec>;

impl SpaceSpec {
    /// Space with the identity form (the lattice ℓ² case).
    pub fn euclidean(name: impl Into<String>, dim: usize) -> Space {
        assert!(dim > 0, "space dimension must be positive");
        Arc::new(SpaceSpec {
            name: name.into(),
            gram: DMatrix::identity(dim, dim),
            gram_inv: DMatrix::identity(dim, dim),
        })
    }

    pub fn with_gram(name: impl Into<String>, gram: DMatrix<f64>) -> Result<Space> {
        let name = name.into();
        if gram.nrows() == 0 || gram.nrows() != gram.ncols() {
            return Err(Error::InvalidForm(format!(
                "{name}: gram must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let scale = gram.camax().max(f64::MIN_POSITIVE);
        if (&gram - gram.transpose()).camax() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidForm(format!("{name}: gram is not symmetric")));
        }
        let min_eig = gram.clone().symmetric_eigenvalues().min();
        if min_eig <= 0.0 {
            return Err(Error::InvalidForm(format!(
                "{name}: gram is not positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidForm(format!("{name}: gram is singular")))?;
        Ok(Arc::new(SpaceSpec {
            name,
            gram,
            gram_inv,
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn is_euclidean(&self) -> bool {
        self.gram == DMatrix::identity(self.dim(), self.dim())
    }

    /// Bilinear pairing of raw coordinate vectors.
    pub fn pair(&self, u: &CVec, v: &CVec) -> C64 {
        if self.is_euclidean() {
            u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
        } else {
            let gv = self.gram.map(C64::from) * v;
            u.iter().zip(gv.iter()).map(|(a, b)| a * b).sum()
        }
    }

    /// Turns a coordinate gradient `∂F/∂x` into the gradient with respect to
    /// the form, i.e. the vector `g` with `⟨h, g⟩ = dF·h`.
    pub fn raise(&self, coordinate_grad: &CVec) -> CVec {
        if self.is_euclidean() {
            coordinate_grad.clone()
        } else {
            self.gram_inv.map(C64::from) * coordinate_grad
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim())
    }
}

fn same_space(a: &Space, b: &Space) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_space(expected: &Space, found: &Space) -> Result<()> {
    if same_space(expected, found) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

/// A vector in the complexification of a space. Starred and unstarred fields
/// are independent values of this type; nothing forces them to be conjugate.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    space: Space,
    components: CVec,
}

impl FieldVector {
    pub fn new(space: Space, components: CVec) -> Result<Self> {
        if components.len() != space.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} in {}",
                components.len(),
                space
            )));
        }
        Ok(FieldVector { space, components })
    }

    pub fn zeros(space: Space) -> Self {
        let n = space.dim();
        FieldVector {
            space,
            components: CVec::zeros(n),
        }
    }

    pub fn from_real(space: Space, values: &[f64]) -> Result<Self> {
        let components = CVec::from_iterator(values.len(), values.iter().map(|&x| C64::from(x)));
        Self::new(space, components)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn components(&self) -> &CVec {
        &self.components
    }

    pub fn into_components(self) -> CVec {
        self.components
    }

    pub fn scale(&self, a: C64) -> FieldVector {
        FieldVector {
            space: self.space.clone(),
            components: &self.components * a,
        }
    }

    pub fn add(&self, other: &FieldVector) -> Result<FieldVector> {
        check_space(&self.space, &other.space)?;
        Ok(FieldVector {
            space: self.space.clone(),
            components: &self.components + &other.components,
        })
    }
}

/// `⟨u, v⟩` for vectors in the same space, extended bilinearly.
pub fn pairing(u: &FieldVector, v: &FieldVector) -> Result<C64> {
    check_space(&u.space, &v.space)?;
    Ok(u.space.pair(&u.components, &v.components))
}

/// A complex-linear map `domain → codomain`, stored densely as a
/// `codomain.dim × domain.dim` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    domain: Space,
    codomain: Space,
    entries: CMat,
}

impl Operator {
    pub fn new(domain: Space, codomain: Space, entries: CMat) -> Result<Self> {
        if entries.nrows() != codomain.dim() || entries.ncols() != domain.dim() {
            return Err(Error::Shape(format!(
                "{}x{} matrix for operator {} -> {}",
                entries.nrows(),
                entries.ncols(),
                domain,
                codomain
            )));
        }
        Ok(Operator {
            domain,
            codomain,
            entries,
        })
    }

    pub fn from_real(domain: Space, codomain: Space, entries: &DMatrix<f64>) -> Result<Self> {
        Self::new(domain, codomain, entries.map(C64::from))
    }

    /// The matrix with ones on the diagonal between two spaces.
    pub fn identity_between(domain: &Space, codomain: &Space) -> Self {
        Operator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            entries: CMat::identity(codomain.dim(), domain.dim()),
        }
    }

    pub fn identity(space: &Space) -> Self {
        let n = space.dim();
        Operator {
            domain: space.clone(),
            codomain: space.clone(),
            entries: CMat::identity(n, n),
        }
    }

    pub fn zero(domain: &Space, codomain: &Space) -> Self {
        Operator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            entries: CMat::zeros(codomain.dim(), domain.dim()),
        }
    }

    pub fn domain(&self) -> &Space {
        &self.domain
    }

    pub fn codomain(&self) -> &Space {
        &self.codomain
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        same_space(&self.domain, &self.codomain)
    }

    pub fn scale(&self, a: impl Into<C64>) -> Operator {
        let a = a.into();
        Operator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            entries: &self.entries * a,
        }
    }

    pub fn apply(&self, v: &FieldVector) -> Result<FieldVector> {
        check_space(&self.domain, &v.space)?;
        Ok(FieldVector {
            space: self.codomain.clone(),
            components: &self.entries * &v.components,
        })
    }

    /// Applies the operator to raw coordinates; the caller guarantees the length.
    pub fn act(&self, v: &CVec) -> CVec {
        &self.entries * v
    }

    /// `self ∘ rhs`, checked.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        check_space(&self.domain, &rhs.codomain)?;
        Ok(Operator {
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
            entries: &self.entries * &rhs.entries,
        })
    }

    pub fn try_add(&self, rhs: &Operator) -> Result<Operator> {
        check_space(&self.domain, &rhs.domain)?;
        check_space(&self.codomain, &rhs.codomain)?;
        Ok(Operator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            entries: &self.entries + &rhs.entries,
        })
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Largest imaginary part of any entry.
    pub fn max_imag(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn determinant(&self) -> C64 {
        assert!(self.is_square(), "determinant of a non-square operator");
        self.entries.clone().determinant()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.entries)
    }

    /// Relative asymmetry `‖G A − (G A)ᵀ‖ / ‖G A‖` with respect to the form of the
    /// (common) domain and codomain.
    pub fn asymmetry(&self) -> f64 {
        let ga = self.domain.gram().map(C64::from) * &self.entries;
        let scale = spectral_norm(&ga).max(f64::MIN_POSITIVE);
        spectral_norm(&(&ga - ga.transpose())) / scale
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $check:expr, $body:expr) => {
        impl<'a> $trait<&'a Operator> for &'a Operator {
            type Output = Operator;
            fn $method(self, rhs: &'a Operator) -> Operator {
                $check(self, rhs);
                $body(self, rhs)
            }
        }
        impl $trait<Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                (&self).$method(&rhs)
            }
        }
    };
}

fn assert_same_shape(a: &Operator, b: &Operator) {
    assert!(
        same_space(&a.domain, &b.domain) && same_space(&a.codomain, &b.codomain),
        "operator shape mismatch: {} -> {} vs {} -> {}",
        a.domain,
        a.codomain,
        b.domain,
        b.codomain
    );
}

fn assert_composable(a: &Operator, b: &Operator) {
    assert!(
        same_space(&a.domain, &b.codomain),
        "cannot compose {} -> {} after {} -> {}",
        a.domain,
        a.codomain,
        b.domain,
        b.codomain
    );
}

binary_op!(Add, add, assert_same_shape, |a: &Operator, b: &Operator| {
    Operator {
        domain: a.domain.clone(),
        codomain: a.codomain.clone(),
        entries: &a.entries + &b.entries,
    }
});
binary_op!(Sub, sub, assert_same_shape, |a: &Operator, b: &Operator| {
    Operator {
        domain: a.domain.clone(),
        codomain: a.codomain.clone(),
        entries: &a.entries - &b.entries,
    }
});
binary_op!(Mul, mul, assert_composable, |a: &Operator, b: &Operator| {
    Operator {
        domain: b.domain.clone(),
        codomain: a.codomain.clone(),
        entries: &a.entries * &b.entries,
    }
});

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

/// Adjoint with respect to the forms: `⟨A u, w⟩_cod = ⟨u, A* w⟩_dom`.
/// Plain transpose when both forms are the identity; never conjugated.
pub fn adjoint(a: &Operator) -> Operator {
    let entries = if a.domain.is_euclidean() && a.codomain.is_euclidean() {
        a.entries.transpose()
    } else {
        a.domain.gram_inv().map(C64::from)
            * a.entries.transpose()
            * a.codomain.gram().map(C64::from)
    };
    Operator {
        domain: a.codomain.clone(),
        codomain: a.domain.clone(),
        entries,
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// `σ_max / σ_min`; infinite for a singular matrix.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a raw matrix behind the condition-number gate.
pub fn inverse_matrix(m: &CMat, cond_limit: f64, assumption: &str) -> Result<CMat> {
    assert!(m.is_square(), "inverse of a non-square matrix");
    let cond = condition_number(m);
    if cond.is_nan() || cond > cond_limit {
        return Err(Error::NearSingular {
            assumption: assumption.to_string(),
            cond,
            limit: cond_limit,
        });
    }
    m.clone().try_inverse().ok_or_else(|| Error::NearSingular {
        assumption: assumption.to_string(),
        cond: f64::INFINITY,
        limit: cond_limit,
    })
}

/// Solves `m x = rhs` for raw coordinates behind the condition-number gate.
pub fn solve_matrix(m: &CMat, rhs: &CVec, cond_limit: f64, assumption: &str) -> Result<CVec> {
    assert!(m.is_square(), "solve with a non-square matrix");
    let cond = condition_number(m);
    if cond.is_nan() || cond > cond_limit {
        return Err(Error::NearSingular {
            assumption: assumption.to_string(),
            cond,
            limit: cond_limit,
        });
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::NearSingular {
            assumption: assumption.to_string(),
            cond: f64::INFINITY,
            limit: cond_limit,
        })
}

fn require_square(a: &Operator, assumption: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{assumption}: operator {} -> {} is not square",
            a.domain, a.codomain
        )))
    }
}

/// Solves `A x = rhs`. `assumption` names the hypothesis reported if `A` is
/// numerically singular, e.g. `"D + Q₋*𝔔Q₋ not invertible"`.
pub fn solve(
    a: &Operator,
    rhs: &FieldVector,
    cond_limit: f64,
    assumption: &str,
) -> Result<FieldVector> {
    require_square(a, assumption)?;
    check_space(&a.codomain, &rhs.space)?;
    let x = solve_matrix(&a.entries, &rhs.components, cond_limit, assumption)?;
    Ok(FieldVector {
        space: a.domain.clone(),
        components: x,
    })
}

/// Operator inverse behind the same gate as [`solve`].
pub fn inverse(a: &Operator, cond_limit: f64, assumption: &str) -> Result<Operator> {
    require_square(a, assumption)?;
    Ok(Operator {
        domain: a.codomain.clone(),
        codomain: a.domain.clone(),
        entries: inverse_matrix(&a.entries, cond_limit, assumption)?,
    })
}

fn check_woodbury_shapes(
    f: &Operator,
    g: &Operator,
    q: &Operator,
    q_star: &Operator,
) -> Result<()> {
    require_square(f, "f")?;
    require_square(g, "g")?;
    check_space(f.domain(), q.domain())?;
    check_space(g.domain(), q.codomain())?;
    check_space(g.domain(), q_star.domain())?;
    check_space(f.domain(), q_star.codomain())
}

/// For `q: V → W`, `q_star: W → V`, `f` on `V`, `g` on `W`:
/// `(1_W + g q f⁻¹ q_star)⁻¹ = 1_W − g q (f + q_star g q)⁻¹ q_star`.
/// Returns the right-hand side.
pub fn woodbury_left(
    f: &Operator,
    g: &Operator,
    q: &Operator,
    q_star: &Operator,
    cond_limit: f64,
) -> Result<Operator> {
    check_woodbury_shapes(f, g, q, q_star)?;
    inverse(f, cond_limit, "f not invertible")?;
    let inner = inverse(
        &(f + &(q_star * &(g * q))),
        cond_limit,
        "f + q_* g q not invertible",
    )?;
    Ok(&Operator::identity(g.domain()) - &(g * &(q * &(&inner * q_star))))
}

/// `(1_W + q f⁻¹ q_star g)⁻¹ = 1_W − q (f + q_star g q)⁻¹ q_star g`; returns the
/// right-hand side.
pub fn woodbury_right(
    f: &Operator,
    g: &Operator,
    q: &Operator,
    q_star: &Operator,
    cond_limit: f64,
) -> Result<Operator> {
    check_woodbury_shapes(f, g, q, q_star)?;
    inverse(f, cond_limit, "f not invertible")?;
    let inner = inverse(
        &(f + &(q_star * &(g * q))),
        cond_limit,
        "f + q_* g q not invertible",
    )?;
    Ok(&Operator::identity(g.domain()) - &(q * &(&inner * &(q_star * g))))
}

/// `‖lhs − rhs‖ / ‖lhs‖` in spectral norm; absolute when `lhs` vanishes.
pub fn relative_residual(lhs: &CMat, rhs: &CMat) -> f64 {
    let diff = spectral_norm(&(lhs - rhs));
    let scale = spectral_norm(lhs);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Stacks two coordinate vectors.
pub fn stack(a: &CVec, b: &CVec) -> CVec {
    CVec::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Splits a stacked vector after `n` entries.
pub fn split(v: &CVec, n: usize) -> (CVec, CVec) {
    (
        v.rows(0, n).into_owned(),
        v.rows(n, v.len() - n).into_owned(),
    )
}

pub fn max_abs(v: &CVec) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}
