//! Dense complex linear algebra shared by the physics modules.
//!
//! Matrix products, LU solves and eigensolvers come from `faer`; the matrix
//! exponential and the diagonal balancing used ahead of the non-Hermitian
//! eigensolver live here.

use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};

use crate::{Error, Result};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norms for which the Padé approximant of each degree is accurate
// to double precision without scaling.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.53939833006323e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

/// Maximum absolute column sum.
pub fn norm_one(a: &Mat<c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_fro(a: &Mat<c64>) -> f64 {
    a.norm_l2()
}

/// Largest absolute elementwise entry.
pub fn norm_max(a: &Mat<c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Max elementwise deviation of `a` from its adjoint.
pub fn hermiticity_error(a: &Mat<c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn trace(a: &Mat<c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `(a + a^H) / 2`.
pub fn hermitian_part(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()) * 0.5
    })
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order. Only the lower
/// triangle is read, so callers should pass a Hermitian-symmetrized input.
pub fn hermitian_eigenvalues(a: &Mat<c64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigensolver)
}

/// Solves `a x = b` with partial-pivoting LU.
pub fn solve(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().solve(b)
}

/// Dense inverse through the LU factorization.
pub fn inverse(a: &Mat<c64>) -> Mat<c64> {
    solve(a, &Mat::identity(a.nrows(), a.ncols()))
}

/// Matrix exponential `exp(a)` by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(a: &Mat<c64>) -> Mat<c64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = norm_one(a);
    if norm == 0.0 {
        return Mat::identity(n, n);
    }

    let ident = Mat::<c64>::identity(n, n);
    let a2 = a * a;

    for (theta, coeffs) in [
        (THETA3, &PADE3[..]),
        (THETA5, &PADE5[..]),
        (THETA7, &PADE7[..]),
        (THETA9, &PADE9[..]),
    ] {
        if norm <= theta {
            let mut powers = Vec::with_capacity(coeffs.len() / 2);
            powers.push(ident.clone());
            powers.push(a2.clone());
            while powers.len() < coeffs.len() / 2 {
                let next = powers.last().unwrap() * &a2;
                powers.push(next);
            }
            let mut u_inner = Mat::<c64>::zeros(n, n);
            let mut v = Mat::<c64>::zeros(n, n);
            for (k, p) in powers.iter().enumerate() {
                u_inner += p * faer::Scale(c64::new(coeffs[2 * k + 1], 0.0));
                v += p * faer::Scale(c64::new(coeffs[2 * k], 0.0));
            }
            let u = a * &u_inner;
            return pade_quotient(&u, &v);
        }
    }

    let mut squarings = 0u32;
    if norm > THETA13 {
        squarings = libm::ceil(libm::log2(norm / THETA13)) as u32;
    }
    let scale = 1.0 / libm::pow(2.0, squarings as f64);
    let s = |x: f64| faer::Scale(c64::new(x, 0.0));

    let a1 = a * s(scale);
    let a2 = &a2 * s(scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_hi = &a6 * s(b[13]) + &a4 * s(b[11]) + &a2 * s(b[9]);
    let u_inner = &a6 * &u_hi + &a6 * s(b[7]) + &a4 * s(b[5]) + &a2 * s(b[3]) + &ident * s(b[1]);
    let u = &a1 * &u_inner;
    let v_hi = &a6 * s(b[12]) + &a4 * s(b[10]) + &a2 * s(b[8]);
    let v = &a6 * &v_hi + &a6 * s(b[6]) + &a4 * s(b[4]) + &a2 * s(b[2]) + &ident * s(b[0]);

    let mut r = pade_quotient(&u, &v);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade_quotient(u: &Mat<c64>, v: &Mat<c64>) -> Mat<c64> {
    let p = v + u;
    let q = v - u;
    solve(&q, &p)
}

/// Diagonal similarity `D^{-1} A D` with power-of-two entries that roughly
/// equalizes off-diagonal row and column norms. Returns the balanced matrix and
/// the diagonal of `D`.
pub fn balance(a: &Mat<c64>) -> (Mat<c64>, Vec<f64>) {
    let n = a.nrows();
    let mut b = a.clone();
    let mut d = alloc::vec![1.0f64; n];
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += b[(j, i)].norm();
                    row += b[(i, j)].norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let exponent = libm::round(0.5 * libm::log2(row / col));
            if exponent == 0.0 {
                continue;
            }
            let f = libm::pow(2.0, exponent);
            if col * f + row / f >= 0.95 * (col + row) {
                continue;
            }
            converged = false;
            d[i] *= f;
            for j in 0..n {
                b[(i, j)] /= f;
                b[(j, i)] *= f;
            }
        }
    }
    (b, d)
}

/// Choi matrix `sum_{ij} |i><j| (x) Phi(|i><j|)` of a map given as a
/// column-stacked superoperator matrix acting on `d x d` operators.
pub fn choi_matrix(superop: &Mat<c64>, d: usize) -> Mat<c64> {
    assert_eq!(superop.nrows(), d * d);
    Mat::from_fn(d * d, d * d, |row, col| {
        let (i, a) = (row / d, row % d);
        let (j, b) = (col / d, col % d);
        superop[(a + b * d, i + j * d)]
    })
}

/// Smallest eigenvalue of the (Hermitian-symmetrized) Choi matrix.
pub fn choi_min_eigenvalue(superop: &Mat<c64>, d: usize) -> Result<f64> {
    let choi = hermitian_part(&choi_matrix(superop, d));
    Ok(hermitian_eigenvalues(&choi)?
        .first()
        .copied()
        .unwrap_or(0.0))
}
