//! Photon statistics and distances between states.

use alloc::vec::Vec;

use faer::{c64, Mat};

use crate::fock::FockSpace;
use crate::linalg;
use crate::micro::{cycle_average, CoarseGrainFilter, Trajectory};
use crate::Result;

/// Means below this are treated as the vacuum, where the Mandel parameter is undefined.
pub const VACUUM_MEAN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStatistics {
    /// Diagonal `p_n = <n|rho|n>`.
    pub distribution: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean - 1`; `None` for (near-)vacuum states.
    pub mandel_q: Option<f64>,
    /// `Tr rho^2`.
    pub purity: f64,
    /// Population of the highest retained level.
    pub top_level_population: f64,
}

pub fn photon_statistics(rho: &Mat<c64>, space: FockSpace) -> Result<PhotonStatistics> {
    space.check_operator(rho)?;
    let d = space.dim();
    let distribution: Vec<f64> = (0..d).map(|n| rho[(n, n)].re).collect();
    let mean: f64 = distribution
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum();
    let second: f64 = distribution
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n) as f64 * p)
        .sum();
    let variance = second - mean * mean;
    let mandel_q = (mean > VACUUM_MEAN).then(|| variance / mean - 1.0);
    let mut purity = 0.0;
    for j in 0..d {
        for i in 0..d {
            purity += (rho[(i, j)] * rho[(j, i)]).re;
        }
    }
    Ok(PhotonStatistics {
        top_level_population: distribution[d - 1],
        distribution,
        mean,
        variance,
        mandel_q,
        purity,
    })
}

/// `||rho - sigma||_1 / 2`, via the eigenvalues of the Hermitian part of the difference.
pub fn trace_distance(rho: &Mat<c64>, sigma: &Mat<c64>) -> Result<f64> {
    if rho.nrows() != sigma.nrows() || rho.ncols() != sigma.ncols() {
        return Err(crate::Error::DimensionMismatch {
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    let diff = linalg::hermitian_part(&(rho - sigma));
    let eig = linalg::hermitian_eigenvalues(&diff)?;
    Ok(0.5 * eig.iter().map(|x| x.abs()).sum::<f64>())
}

/// Filter average of a converged limit cycle.
///
/// `cycle` covers exactly one period, from the post-kick state at a tick to
/// the pre-kick state at the next (see [`Trajectory::last_period`]); it is
/// repeated periodically to fill the filter window.
pub fn limit_cycle_average(cycle: &Trajectory, filter: &CoarseGrainFilter) -> Result<Mat<c64>> {
    cycle_average(cycle, filter)
}
