//! Damped-cavity Liouvillian, its spectral decomposition and functional calculus.

use alloc::vec::Vec;

use faer::{c64, Mat};

use crate::fock::{unvectorize, vectorize, FockSpace, Superoperator};
use crate::linalg;
use crate::{Error, Result};

/// Residual above which a decomposition is rejected as near-defective.
pub const DEFECTIVE_RESIDUAL: f64 = 1e-6;

/// Ratio guarding against eigenvalues that sit on or next to a pole of the
/// lifted function.
pub const POLE_RATIO: f64 = 1e6;

/// Decay rate and thermal occupation of the cavity reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    kappa: f64,
    n_th: f64,
}

impl CavityParams {
    pub fn new(kappa: f64, n_th: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa", "must be finite and non-negative"));
        }
        if !(n_th >= 0.0) || !n_th.is_finite() {
            return Err(Error::invalid("n_th", "must be finite and non-negative"));
        }
        Ok(Self { kappa, n_th })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_th(&self) -> f64 {
        self.n_th
    }

    /// Default kernel tolerance, `1e-9 * kappa`.
    pub fn kernel_tol(&self) -> f64 {
        1e-9 * self.kappa
    }
}

/// `L = kappa (n_th + 1) D[a] + kappa n_th D[a^dagger]`.
pub fn build_cavity_liouvillian(space: FockSpace, params: CavityParams) -> Superoperator {
    let a = space.annihilation();
    let loss = Superoperator::dissipator(&a).scale(params.kappa * (params.n_th + 1.0));
    let gain = Superoperator::dissipator(&a.adjoint()).scale(params.kappa * params.n_th);
    &loss + &gain
}

/// Eigenvalues with biorthonormal right (columns) and left (rows) eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    space: FockSpace,
    eigenvalues: Vec<c64>,
    right: Mat<c64>,
    left: Mat<c64>,
    condition_estimate: f64,
    residual: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn right_vectors(&self) -> &Mat<c64> {
        &self.right
    }

    pub fn left_vectors(&self) -> &Mat<c64> {
        &self.left
    }

    /// 1-norm condition number of the right eigenvector matrix.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Relative Frobenius residual of `right diag(eigenvalues) left` against
    /// the decomposed matrix.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// `right diag(values) left`.
    pub fn assemble(&self, values: &[c64]) -> Mat<c64> {
        assert_eq!(values.len(), self.eigenvalues.len());
        let n = values.len();
        let scaled = Mat::from_fn(n, n, |i, j| self.right[(i, j)] * values[j]);
        &scaled * &self.left
    }

    /// Projector onto the span of eigenvectors with `|lambda| <= tol`.
    pub fn kernel_projector(&self, tol: f64) -> Superoperator {
        let selector: Vec<c64> = self
            .eigenvalues
            .iter()
            .map(|l| c64::new(if l.norm() <= tol { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Superoperator::from_parts(self.space, self.assemble(&selector))
    }

    pub fn kernel_dimension(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.norm() <= tol).count()
    }
}

/// Eigendecomposition of a superoperator.
///
/// The matrix is first split into the connected components of its sparsity
/// pattern (for phase-covariant maps these are the coherence orders `j - i`),
/// and each block is balanced by a power-of-two diagonal similarity before the
/// eigensolve. Both steps matter for the strongly non-normal Liouvillians of
/// larger truncations. Left vectors are the inverse of the right-vector
/// matrix. Accuracy is certified after the fact by the reconstruction residual.
pub fn spectral_decompose(s: &Superoperator) -> Result<SpectralDecomposition> {
    let a = s.matrix();
    let n = a.nrows();
    let space = s.space();

    let mut eigenvalues = alloc::vec![c64::new(0.0, 0.0); n];
    let mut right = Mat::<c64>::zeros(n, n);
    let mut left = Mat::<c64>::zeros(n, n);
    for block in connected_blocks(a) {
        let m = block.len();
        if m == 1 {
            let i = block[0];
            eigenvalues[i] = a[(i, i)];
            right[(i, i)] = c64::new(1.0, 0.0);
            left[(i, i)] = c64::new(1.0, 0.0);
            continue;
        }
        let sub = Mat::from_fn(m, m, |i, j| a[(block[i], block[j])]);
        let (balanced, scaling) = linalg::balance(&sub);
        let evd = balanced.eigen().map_err(|_| Error::Eigensolver)?;
        let u = evd.U();
        let mut vr = Mat::from_fn(m, m, |i, j| u[(i, j)] * scaling[i]);
        for j in 0..m {
            let norm = libm::sqrt((0..m).map(|i| vr[(i, j)].norm_sqr()).sum::<f64>());
            if norm > 0.0 {
                for i in 0..m {
                    vr[(i, j)] /= norm;
                }
            }
        }
        let vl = linalg::inverse(&vr);
        // Eigenpair j of the block is stored at global slot block[j].
        for j in 0..m {
            eigenvalues[block[j]] = evd.S()[j];
            for i in 0..m {
                right[(block[i], block[j])] = vr[(i, j)];
                left[(block[j], block[i])] = vl[(j, i)];
            }
        }
    }
    let condition_estimate = (linalg::norm_one(&right) * linalg::norm_one(&left)).max(1.0);

    let mut dec = SpectralDecomposition {
        space,
        eigenvalues,
        right,
        left,
        condition_estimate,
        residual: 0.0,
    };
    let rebuilt = dec.assemble(&dec.eigenvalues);
    let scale = linalg::norm_fro(a);
    let err = linalg::norm_fro(&(&rebuilt - a));
    let residual = if scale > 0.0 { err / scale } else { err };
    if !(residual <= DEFECTIVE_RESIDUAL) {
        return Err(Error::NearDefective { residual });
    }
    dec.residual = residual;
    Ok(dec)
}

/// Index sets of the connected components of the graph linking `i` and `j`
/// whenever `a[i, j]` or `a[j, i]` is nonzero, each in increasing order.
fn connected_blocks(a: &Mat<c64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let zero = c64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            if i != j && a[(i, j)] != zero {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = alloc::vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// `exp(S t)` as a superoperator, by scaling and squaring.
pub fn propagator(s: &Superoperator, t: f64) -> Superoperator {
    let scaled = s.matrix() * faer::Scale(c64::new(t, 0.0));
    Superoperator::from_parts(s.space(), linalg::expm(&scaled))
}

/// `exp(S t) rho` through the dense matrix exponential.
pub fn exp_action(s: &Superoperator, t: f64, rho: &Mat<c64>) -> Result<Mat<c64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    s.space().check_operator(rho)?;
    let e = propagator(s, t);
    let v = e.matrix() * vectorize(rho);
    Ok(unvectorize(&v, s.space().dim()))
}

/// `exp(S t) rho` through a spectral decomposition of `S`.
pub fn exp_action_spectral(
    dec: &SpectralDecomposition,
    t: f64,
    rho: &Mat<c64>,
) -> Result<Mat<c64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    dec.space.check_operator(rho)?;
    let coeffs = &dec.left * vectorize(rho);
    let n = dec.eigenvalues.len();
    let scaled = Mat::from_fn(n, 1, |i, _| coeffs[(i, 0)] * (dec.eigenvalues[i] * t).exp());
    Ok(unvectorize(&(&dec.right * &scaled), dec.space.dim()))
}

/// `f(S) = right diag(g(lambda)) left`, where `g = f` away from the kernel and
/// `g = kernel_value` for `|lambda| <= kernel_tol`.
///
/// Fails with [`Error::PoleProximity`] when an eigenvalue lands on or next to
/// a pole of `f`: either a non-finite value, a value above
/// `POLE_RATIO * (|kernel_value| + |lambda|)` off the kernel, or a nonzero
/// eigenvalue inside the kernel tolerance whose `f` exceeds the same bound.
pub fn lift_scalar_function(
    dec: &SpectralDecomposition,
    f: impl Fn(c64) -> c64,
    kernel_value: c64,
    kernel_tol: f64,
) -> Result<Superoperator> {
    let mut values = Vec::with_capacity(dec.eigenvalues.len());
    for &lambda in &dec.eigenvalues {
        let magnitude = lambda.norm();
        if magnitude <= kernel_tol {
            if magnitude > 0.0 {
                let v = f(lambda);
                if v.is_finite() && v.norm() > POLE_RATIO * (kernel_value.norm() + magnitude) {
                    return Err(Error::PoleProximity {
                        eigenvalue: lambda,
                        magnitude: v.norm(),
                    });
                }
            }
            values.push(kernel_value);
        } else {
            let v = f(lambda);
            if !v.is_finite() || v.norm() > POLE_RATIO * (kernel_value.norm() + magnitude) {
                return Err(Error::PoleProximity {
                    eigenvalue: lambda,
                    magnitude: v.norm(),
                });
            }
            values.push(v);
        }
    }
    Ok(Superoperator::from_parts(dec.space, dec.assemble(&values)))
}

/// The pump weight `lambda / (1 - exp(-lambda T))`, whose value at the
/// removable singularity `lambda = 0` is `1 / T`.
pub fn maser_function(period: f64) -> impl Fn(c64) -> c64 {
    move |lambda: c64| {
        let x = lambda * period;
        if x.norm() < 1e-2 {
            // x / (1 - e^{-x}) = 1 + x/2 + x^2/12 - x^4/720 + x^6/30240
            let x2 = x * x;
            let series =
                c64::new(1.0, 0.0) + x * 0.5 + x2 / 12.0 - x2 * x2 / 720.0 + x2 * x2 * x2 / 30240.0;
            series / period
        } else {
            lambda / (c64::new(1.0, 0.0) - (-x).exp())
        }
    }
}
