//! Truncated Fock space and the vectorization that turns maps on operators
//! into superoperator matrices.
//!
//! Vectorization is column stacking throughout the crate: the operator entry
//! `rho[(i, j)]` sits at index `i + j * d` of `vec(rho)`. With this convention
//! `vec(A rho B) = (B^T (x) A) vec(rho)`.

use core::ops::{Add, Mul, Sub};

use faer::{c64, Mat};

use crate::linalg;
use crate::{Error, Result};

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;

/// Fock space of a single mode truncated at `n_max` photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Hilbert-space dimension `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the operator space, `dim()^2`.
    pub fn super_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Ladder operator with `a[(n - 1, n)] = sqrt(n)`.
    pub fn annihilation(&self) -> Operator {
        let d = self.dim();
        let m = Mat::from_fn(d, d, |i, j| {
            if j == i + 1 {
                c64::new(libm::sqrt(j as f64), 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Operator {
            matrix: m,
            space: *self,
        }
    }

    pub fn creation(&self) -> Operator {
        self.annihilation().adjoint()
    }

    pub fn number(&self) -> Operator {
        self.diagonal(|n| n as f64)
    }

    pub fn identity(&self) -> Operator {
        self.diagonal(|_| 1.0)
    }

    /// Diagonal operator `sum_n f(n) |n><n|`.
    pub fn diagonal(&self, f: impl Fn(usize) -> f64) -> Operator {
        let d = self.dim();
        let m = Mat::from_fn(d, d, |i, j| {
            if i == j {
                c64::new(f(i), 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Operator {
            matrix: m,
            space: *self,
        }
    }

    /// Pure Fock state `|n><n|`.
    pub fn fock_state(&self, n: usize) -> Result<DensityOperator> {
        if n > self.n_max {
            return Err(Error::invalid("n", "Fock level above truncation"));
        }
        let mut m = Mat::zeros(self.dim(), self.dim());
        m[(n, n)] = c64::new(1.0, 0.0);
        Ok(DensityOperator {
            matrix: m,
            space: *self,
        })
    }

    /// Thermal state with populations proportional to `(n_th / (1 + n_th))^n`,
    /// renormalized on the truncated space.
    pub fn thermal_state(&self, n_th: f64) -> Result<DensityOperator> {
        if !(n_th >= 0.0) {
            return Err(Error::invalid("n_th", "must be non-negative"));
        }
        let ratio = n_th / (1.0 + n_th);
        let mut pops = alloc::vec::Vec::with_capacity(self.dim());
        let mut w = 1.0;
        for _ in 0..self.dim() {
            pops.push(w);
            w *= ratio;
        }
        let z: f64 = pops.iter().sum();
        let m = self.diagonal(|n| pops[n] / z).matrix;
        Ok(DensityOperator {
            matrix: m,
            space: *self,
        })
    }

    pub(crate) fn check_operator(&self, m: &Mat<c64>) -> Result<()> {
        check_square(m, self.dim())
    }

    pub(crate) fn check_superoperator(&self, m: &Mat<c64>) -> Result<()> {
        check_square(m, self.super_dim())
    }
}

fn check_square(m: &Mat<c64>, d: usize) -> Result<()> {
    if m.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.nrows(),
        });
    }
    if m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.ncols(),
        });
    }
    Ok(())
}

/// A `d x d` operator on a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: Mat<c64>,
    space: FockSpace,
}

impl Operator {
    pub fn new(space: FockSpace, matrix: Mat<c64>) -> Result<Self> {
        space.check_operator(&matrix)?;
        Ok(Self { matrix, space })
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint().to_owned(),
            space: self.space,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operators on different spaces");
        Operator {
            matrix: &self.matrix * &rhs.matrix,
            space: self.space,
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: Mat<c64>,
    space: FockSpace,
}

impl DensityOperator {
    /// Validates hermiticity (1e-12), unit trace (1e-12) and positivity (-1e-10).
    pub fn new(space: FockSpace, matrix: Mat<c64>) -> Result<Self> {
        space.check_operator(&matrix)?;
        let hermiticity = linalg::hermiticity_error(&matrix);
        let trace = linalg::trace(&matrix);
        let min_eigenvalue = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&matrix))?
            .first()
            .copied()
            .unwrap_or(0.0);
        if hermiticity > HERMITICITY_TOL
            || (trace - c64::new(1.0, 0.0)).norm() > TRACE_TOL
            || min_eigenvalue < -POSITIVITY_TOL
        {
            return Err(Error::NotADensityOperator {
                hermiticity,
                trace: trace.re,
                min_eigenvalue,
            });
        }
        Ok(Self { matrix, space })
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }
}

/// Linear map on operators stored as a `d^2 x d^2` column-stacked matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    matrix: Mat<c64>,
    space: FockSpace,
}

impl Superoperator {
    pub fn new(space: FockSpace, matrix: Mat<c64>) -> Result<Self> {
        space.check_superoperator(&matrix)?;
        Ok(Self { matrix, space })
    }

    pub(crate) fn from_parts(space: FockSpace, matrix: Mat<c64>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.super_dim());
        Self { matrix, space }
    }

    pub fn zero(space: FockSpace) -> Self {
        let n = space.super_dim();
        Self::from_parts(space, Mat::zeros(n, n))
    }

    pub fn identity(space: FockSpace) -> Self {
        let n = space.super_dim();
        Self::from_parts(space, Mat::identity(n, n))
    }

    /// `rho -> A rho`, i.e. `I (x) A`.
    pub fn left_mult(a: &Operator) -> Self {
        let d = a.space.dim();
        let m = Mat::from_fn(d * d, d * d, |r, c| {
            let (i, j) = (r % d, r / d);
            let (k, l) = (c % d, c / d);
            if j == l {
                a.matrix[(i, k)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Self::from_parts(a.space, m)
    }

    /// `rho -> rho A`, i.e. `A^T (x) I`.
    pub fn right_mult(a: &Operator) -> Self {
        let d = a.space.dim();
        let m = Mat::from_fn(d * d, d * d, |r, c| {
            let (i, j) = (r % d, r / d);
            let (k, l) = (c % d, c / d);
            if i == k {
                a.matrix[(l, j)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Self::from_parts(a.space, m)
    }

    /// `rho -> C rho C^H - (C^H C rho + rho C^H C) / 2`.
    pub fn dissipator(c: &Operator) -> Self {
        let cd = c.adjoint();
        let cdc = &cd * c;
        let jump = &Self::left_mult(c) * &Self::right_mult(&cd);
        let anti = &Self::left_mult(&cdc) + &Self::right_mult(&cdc);
        &jump - &anti.scale(0.5)
    }

    /// Applies the map to an operator: `unvec(S vec(rho))`.
    ///
    /// The product is accumulated in column order, so for the sparse patterns
    /// produced by [`left_mult`](Self::left_mult) and
    /// [`right_mult`](Self::right_mult) the result is bitwise identical to the
    /// direct operator product.
    pub fn apply(&self, rho: &Mat<c64>) -> Result<Mat<c64>> {
        self.space.check_operator(rho)?;
        let d = self.space.dim();
        let n = d * d;
        let mut out = Mat::<c64>::zeros(d, d);
        for c in 0..n {
            let x = rho[(c % d, c / d)];
            if x == c64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..n {
                let s = self.matrix[(r, c)];
                if s != c64::new(0.0, 0.0) {
                    out[(r % d, r / d)] += s * x;
                }
            }
        }
        Ok(out)
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_parts(
            self.space,
            &self.matrix * faer::Scale(c64::new(factor, 0.0)),
        )
    }

    /// `1 + self`.
    pub fn plus_identity(&self) -> Self {
        &Self::identity(self.space) + self
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.space, self.matrix.adjoint().to_owned())
    }

    /// Row vector `vec(I)^H S`; zero exactly when the map annihilates the trace.
    pub fn trace_row(&self) -> alloc::vec::Vec<c64> {
        let d = self.space.dim();
        (0..self.space.super_dim())
            .map(|c| (0..d).map(|i| self.matrix[(i + i * d, c)]).sum())
            .collect()
    }

    /// Choi matrix of the map.
    pub fn choi(&self) -> Mat<c64> {
        linalg::choi_matrix(&self.matrix, self.space.dim())
    }

    pub(crate) fn check_same_space(&self, other: &Superoperator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.super_dim(),
                found: other.space.super_dim(),
            });
        }
        Ok(())
    }
}

impl Add for &Superoperator {
    type Output = Superoperator;

    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.space, rhs.space, "superoperators on different spaces");
        Superoperator::from_parts(self.space, &self.matrix + &rhs.matrix)
    }
}

impl Sub for &Superoperator {
    type Output = Superoperator;

    fn sub(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.space, rhs.space, "superoperators on different spaces");
        Superoperator::from_parts(self.space, &self.matrix - &rhs.matrix)
    }
}

impl Mul for &Superoperator {
    type Output = Superoperator;

    /// Composition: `(S * T)(rho) = S(T(rho))`.
    fn mul(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.space, rhs.space, "superoperators on different spaces");
        Superoperator::from_parts(self.space, &self.matrix * &rhs.matrix)
    }
}

/// Column-stacked `d^2 x 1` vector of an operator.
pub fn vectorize(rho: &Mat<c64>) -> Mat<c64> {
    let d = rho.nrows();
    Mat::from_fn(d * rho.ncols(), 1, |r, _| rho[(r % d, r / d)])
}

/// Inverse of [`vectorize`] for a `d x d` operator.
pub fn unvectorize(v: &Mat<c64>, d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |i, j| v[(i + j * d, 0)])
}
