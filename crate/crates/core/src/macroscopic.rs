//! Coarse-grained (macroscopic) generator of the pumped cavity.
//!
//! Averaging the kicked dynamics over a window much longer than the injection
//! period gives the autonomous equation `d rho_bar / dt = G rho_bar` with
//! `G = L + K f(L)` and `f(lambda) = lambda / (1 - exp(-lambda T))`.
//!
//! `f(L)` is evaluated either on the eigenbasis of `L` or through the series
//! `f(L) = -sum_{l>=1} L exp(L T l) + P0 / T`, where `P0` is the projector onto
//! the kernel of `L`. The series is summed in the form `sum (E - P0)^l` with
//! `E = exp(L T)`, which equals `sum E^l - l P0` term by term after
//! multiplication by `L`, but keeps the partial sums bounded.

use alloc::vec::Vec;

use faer::{c64, Mat};

use crate::fock::{unvectorize, vectorize, DensityOperator, Superoperator};
use crate::injection::PumpSchedule;
use crate::linalg;
use crate::liouvillian::{
    lift_scalar_function, maser_function, propagator, spectral_decompose, SpectralDecomposition,
};
use crate::micro::{coarse_grain, evolve_micro, CoarseGrainFilter, Trajectory};
use crate::{Error, Result};

/// Term budget used when the spectral route falls back to the series.
pub const FALLBACK_L_MAX: usize = 1 << 24;
/// Tail tolerance used when the spectral route falls back to the series.
pub const FALLBACK_TAIL_TOL: f64 = 1e-12;
/// A second singular value below this fraction of the largest marks the
/// stationary state as non-unique.
pub const STEADY_STATE_RANK_TOL: f64 = 1e-12;
/// Upper bound on `||G rho_ss|| / ||G||` for an accepted steady state.
pub const STEADY_STATE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MacroMethod {
    /// Lift `f` through the eigendecomposition of `L`. Falls back to the
    /// series when `L` is numerically defective.
    Spectral,
    /// Truncated series with at most `l_max` terms; fails unless the certified
    /// tail bound is below `tail_tol`.
    Series { l_max: usize, tail_tol: f64 },
}

/// How a macroscopic generator was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDiagnostics {
    /// Method that actually produced the pump term.
    pub method_used: MacroMethod,
    pub kernel_dimension: usize,
    /// Eigenvector condition estimate of `L`; `None` when `L` is defective.
    pub condition_estimate: Option<f64>,
    pub decomposition_residual: Option<f64>,
    /// Number of series terms summed, when the series was used.
    pub series_terms: Option<usize>,
    pub tail_bound: Option<f64>,
    /// `max |vec(I)^H G|`: how far `G` is from annihilating the trace.
    pub trace_annihilation: f64,
}

#[derive(Debug, Clone)]
pub struct MacroGenerator {
    generator: Superoperator,
    pump_part: Superoperator,
    diagnostics: MacroDiagnostics,
}

impl MacroGenerator {
    /// `G = L + K f(L)`.
    pub fn generator(&self) -> &Superoperator {
        &self.generator
    }

    /// `K f(L)`.
    pub fn pump_part(&self) -> &Superoperator {
        &self.pump_part
    }

    pub fn diagnostics(&self) -> &MacroDiagnostics {
        &self.diagnostics
    }
}

/// Outcome of a truncated series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesReport {
    pub terms: usize,
    pub tail_bound: f64,
}

fn check_stable(eigenvalues: &[c64], kernel_tol: f64) -> Result<()> {
    match eigenvalues.iter().map(|l| l.re).find(|&re| re > kernel_tol) {
        Some(real) => Err(Error::UnstableSpectrum { real }),
        None => Ok(()),
    }
}

/// `K f(L)` through the eigendecomposition of `L`.
///
/// Eigenvalues with `|lambda| <= kernel_tol` are treated as exact zeros and
/// receive the limit value `1 / T`.
pub fn pump_generator_spectral(
    k: &Superoperator,
    l: &Superoperator,
    period: f64,
    kernel_tol: f64,
) -> Result<Superoperator> {
    let dec = spectral_decompose(l)?;
    spectral_pump(k, &dec, period, kernel_tol)
}

fn spectral_pump(
    k: &Superoperator,
    dec: &SpectralDecomposition,
    period: f64,
    kernel_tol: f64,
) -> Result<Superoperator> {
    k.check_same_space(&Superoperator::zero(dec.space()))?;
    if !(period > 0.0) {
        return Err(Error::invalid("period", "must be positive"));
    }
    check_stable(dec.eigenvalues(), kernel_tol)?;
    let f = lift_scalar_function(
        dec,
        maser_function(period),
        c64::new(1.0 / period, 0.0),
        kernel_tol,
    )?;
    Ok(k * &f)
}

/// Spectral data the series route needs: kernel projector, eigenvalues and an
/// eigenvector conditioning factor for the tail bound.
struct SeriesSpectrum {
    projector: Superoperator,
    eigenvalues: Vec<c64>,
    condition: f64,
    residual: Option<f64>,
    condition_known: bool,
}

fn series_spectrum(l: &Superoperator, kernel_tol: f64) -> Result<SeriesSpectrum> {
    match spectral_decompose(l) {
        Ok(dec) => Ok(SeriesSpectrum {
            projector: dec.kernel_projector(kernel_tol),
            eigenvalues: dec.eigenvalues().to_vec(),
            condition: dec.condition_estimate(),
            residual: Some(dec.residual()),
            condition_known: true,
        }),
        Err(Error::NearDefective { .. }) => {
            let eigenvalues = l.matrix().eigenvalues().map_err(|_| Error::Eigensolver)?;
            let kernel_dim = eigenvalues
                .iter()
                .filter(|z| z.norm() <= kernel_tol)
                .count();
            Ok(SeriesSpectrum {
                projector: null_space_projector(l, kernel_dim)?,
                eigenvalues,
                condition: 1.0,
                residual: None,
                condition_known: false,
            })
        }
        Err(e) => Err(e),
    }
}

/// Spectral projector onto the null space from the `dim` smallest singular
/// triplets: `P0 = V (U^H V)^{-1} U^H`.
fn null_space_projector(l: &Superoperator, dim: usize) -> Result<Superoperator> {
    let n = l.space().super_dim();
    if dim == 0 {
        return Ok(Superoperator::zero(l.space()));
    }
    let svd = l.matrix().svd().map_err(|_| Error::Eigensolver)?;
    let right = svd.V().subcols(n - dim, dim).to_owned();
    let left = svd.U().subcols(n - dim, dim).to_owned();
    let gram = left.adjoint() * &right;
    let p = &right * linalg::solve(&gram, &left.adjoint().to_owned());
    Ok(Superoperator::from_parts(l.space(), p))
}

/// Bound on the discarded tail `||K sum_{l>terms} L exp(L T l)||`.
fn tail_bound(
    k_norm: f64,
    spec: &SeriesSpectrum,
    period: f64,
    kernel_tol: f64,
    terms: usize,
) -> f64 {
    spec.eigenvalues
        .iter()
        .filter(|z| z.norm() > kernel_tol)
        .map(|z| {
            let q = libm::exp(z.re * period);
            if q >= 1.0 {
                return f64::INFINITY;
            }
            z.norm() * libm::pow(q, (terms + 1) as f64) / (1.0 - q)
        })
        .fold(0.0, f64::max)
        * k_norm
        * spec.condition
}

/// Smallest term count whose tail bound is below `tol` (per mode, in closed form).
fn required_terms(
    k_norm: f64,
    spec: &SeriesSpectrum,
    period: f64,
    kernel_tol: f64,
    tol: f64,
) -> usize {
    let mut needed = 1usize;
    for z in spec.eigenvalues.iter().filter(|z| z.norm() > kernel_tol) {
        let rate = z.re * period;
        if rate >= 0.0 {
            return usize::MAX;
        }
        let q = libm::exp(rate);
        let scale = k_norm * spec.condition * z.norm() / (1.0 - q);
        if scale <= tol {
            continue;
        }
        // scale * q^(n+1) <= tol  <=>  n >= ln(tol / scale) / rate - 1
        let n = libm::ceil(libm::log(tol / scale) / rate - 1.0);
        let n = if n.is_finite() && n < usize::MAX as f64 {
            n as usize
        } else {
            usize::MAX
        };
        needed = needed.max(n);
    }
    needed
}

/// `sum_{l=1}^{n} a^l` by binary doubling.
fn geometric_sum(a: &Mat<c64>, n: usize) -> Mat<c64> {
    let dim = a.nrows();
    let mut sum = Mat::<c64>::zeros(dim, dim);
    let mut power = Mat::<c64>::identity(dim, dim);
    if n == 0 {
        return sum;
    }
    for bit in (0..usize::BITS - n.leading_zeros()).rev() {
        sum = &sum + &power * &sum;
        power = &power * &power;
        if (n >> bit) & 1 == 1 {
            power = &power * a;
            sum += &power;
        }
    }
    sum
}

/// `K f(L)` through the truncated series. Sums just enough terms to certify
/// the tail bound below `tail_tol`; errors if that exceeds `l_max`.
pub fn pump_generator_series(
    k: &Superoperator,
    l: &Superoperator,
    period: f64,
    l_max: usize,
    tail_tol: f64,
    kernel_tol: f64,
) -> Result<(Superoperator, SeriesReport)> {
    let spec = series_spectrum(l, kernel_tol)?;
    series_pump(k, l, &spec, period, l_max, tail_tol, kernel_tol)
}

fn series_pump(
    k: &Superoperator,
    l: &Superoperator,
    spec: &SeriesSpectrum,
    period: f64,
    l_max: usize,
    tail_tol: f64,
    kernel_tol: f64,
) -> Result<(Superoperator, SeriesReport)> {
    l.check_same_space(k)?;
    if !(period > 0.0) {
        return Err(Error::invalid("period", "must be positive"));
    }
    if l_max == 0 {
        return Err(Error::invalid("l_max", "must be at least 1"));
    }
    if !(tail_tol > 0.0) {
        return Err(Error::invalid("tail_tol", "must be positive"));
    }
    check_stable(&spec.eigenvalues, kernel_tol)?;

    let k_norm = linalg::norm_fro(k.matrix());
    let terms = required_terms(k_norm, spec, period, kernel_tol, tail_tol);
    if terms > l_max {
        return Err(Error::SeriesNotConverged {
            l_max,
            required_l_max: terms,
            tail_bound: tail_bound(k_norm, spec, period, kernel_tol, l_max),
        });
    }

    let e = propagator(l, period);
    let reduced = e.matrix() - spec.projector.matrix();
    let sum = geometric_sum(&reduced, terms);
    let lf = l.matrix() * &sum * faer::Scale(c64::new(-1.0, 0.0))
        + spec.projector.matrix() * faer::Scale(c64::new(1.0 / period, 0.0));
    let pump = Superoperator::from_parts(l.space(), k.matrix() * &lf);
    Ok((
        pump,
        SeriesReport {
            terms,
            tail_bound: tail_bound(k_norm, spec, period, kernel_tol, terms),
        },
    ))
}

/// Assembles `G = L + K f(L)` with the chosen method.
pub fn build_macro_generator(
    k: &Superoperator,
    l: &Superoperator,
    period: f64,
    method: MacroMethod,
    kernel_tol: f64,
) -> Result<MacroGenerator> {
    l.check_same_space(k)?;
    let (pump_part, diagnostics) = match method {
        MacroMethod::Spectral => match spectral_decompose(l) {
            Ok(dec) => {
                let pump = spectral_pump(k, &dec, period, kernel_tol)?;
                let diag = MacroDiagnostics {
                    method_used: MacroMethod::Spectral,
                    kernel_dimension: dec.kernel_dimension(kernel_tol),
                    condition_estimate: Some(dec.condition_estimate()),
                    decomposition_residual: Some(dec.residual()),
                    series_terms: None,
                    tail_bound: None,
                    trace_annihilation: 0.0,
                };
                (pump, diag)
            }
            Err(Error::NearDefective { .. }) => {
                let fallback = MacroMethod::Series {
                    l_max: FALLBACK_L_MAX,
                    tail_tol: FALLBACK_TAIL_TOL,
                };
                series_generator(k, l, period, fallback, kernel_tol)?
            }
            Err(e) => return Err(e),
        },
        series @ MacroMethod::Series { .. } => series_generator(k, l, period, series, kernel_tol)?,
    };
    let generator = l + &pump_part;
    let trace_annihilation = generator
        .trace_row()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(MacroGenerator {
        generator,
        pump_part,
        diagnostics: MacroDiagnostics {
            trace_annihilation,
            ..diagnostics
        },
    })
}

fn series_generator(
    k: &Superoperator,
    l: &Superoperator,
    period: f64,
    method: MacroMethod,
    kernel_tol: f64,
) -> Result<(Superoperator, MacroDiagnostics)> {
    let MacroMethod::Series { l_max, tail_tol } = method else {
        unreachable!("series_generator called with a non-series method");
    };
    let spec = series_spectrum(l, kernel_tol)?;
    let (pump, report) = series_pump(k, l, &spec, period, l_max, tail_tol, kernel_tol)?;
    let kernel_dimension = spec
        .eigenvalues
        .iter()
        .filter(|z| z.norm() <= kernel_tol)
        .count();
    Ok((
        pump,
        MacroDiagnostics {
            method_used: method,
            kernel_dimension,
            condition_estimate: spec.condition_known.then_some(spec.condition),
            decomposition_residual: spec.residual,
            series_terms: Some(report.terms),
            tail_bound: Some(report.tail_bound),
            trace_annihilation: 0.0,
        },
    ))
}

/// `exp(G t) rho_bar`.
pub fn evolve_macro(g: &Superoperator, rho_bar: &Mat<c64>, t: f64) -> Result<Mat<c64>> {
    crate::liouvillian::exp_action(g, t, rho_bar)
}

/// Macroscopic trajectory on the grid `start + i T / samples_per_period`,
/// `i = 0..n_samples`, advanced by repeated application of the one-step
/// propagator.
pub fn evolve_macro_sampled(
    g: &Superoperator,
    rho_bar: &Mat<c64>,
    start: f64,
    schedule: PumpSchedule,
    samples_per_period: usize,
    n_samples: usize,
) -> Result<Trajectory> {
    if samples_per_period == 0 || n_samples == 0 {
        return Err(Error::invalid(
            "samples",
            "need at least one sample and one sample per period",
        ));
    }
    let space = g.space();
    space.check_operator(rho_bar)?;
    let d = space.dim();
    let step = propagator(g, schedule.period() / samples_per_period as f64).into_matrix();
    let mut v = vectorize(rho_bar);
    let mut states = Vec::with_capacity(n_samples);
    states.push(rho_bar.clone());
    for _ in 1..n_samples {
        v = &step * &v;
        states.push(unvectorize(&v, d));
    }
    Trajectory::new(start, schedule, samples_per_period, states)
}

/// Unique stationary state of `G`, with its relative residual and the
/// singular-value gap that certifies uniqueness.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityOperator,
    /// `||G rho_ss||_F / ||G||_F`.
    pub residual: f64,
    /// Second-smallest singular value of `G` relative to the largest.
    pub gap: f64,
}

/// Null vector of `G`, normalized to unit trace and Hermitian-symmetrized.
pub fn steady_state(g: &Superoperator) -> Result<SteadyState> {
    let space = g.space();
    let n = space.super_dim();
    let d = space.dim();
    if n == 1 {
        let state = DensityOperator::new(space, Mat::identity(1, 1))?;
        return Ok(SteadyState {
            state,
            residual: 0.0,
            gap: f64::INFINITY,
        });
    }
    let svd = g.matrix().svd().map_err(|_| Error::Eigensolver)?;
    let s: Vec<f64> = (0..n).map(|i| svd.S()[i].re).collect();
    let largest = s[0];
    if largest == 0.0 {
        return Err(Error::DegenerateSteadyState {
            kernel_dimension: n,
            gap: 0.0,
        });
    }
    // The truncated kick leaks trace through the top level, so the smallest
    // singular value is tiny rather than zero; only a second small one makes
    // the stationary state ambiguous.
    let kernel_dimension = 1 + s[..n - 1]
        .iter()
        .filter(|&&x| x <= STEADY_STATE_RANK_TOL * largest)
        .count();
    let gap = s[n - 2] / largest;
    if kernel_dimension != 1 {
        return Err(Error::DegenerateSteadyState {
            kernel_dimension,
            gap,
        });
    }

    let v = svd.V().col(n - 1).to_owned();
    let v = Mat::from_fn(n, 1, |i, _| v[i]);
    let rho = unvectorize(&v, d);
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-300 {
        return Err(Error::DegenerateSteadyState {
            kernel_dimension,
            gap,
        });
    }
    let rho = linalg::hermitian_part(&(&rho * faer::Scale(tr.inv())));
    let residual = linalg::norm_fro(&(g.matrix() * vectorize(&rho))) / linalg::norm_fro(g.matrix());
    if !(residual <= STEADY_STATE_RESIDUAL_TOL) {
        return Err(Error::DegenerateSteadyState {
            kernel_dimension,
            gap,
        });
    }
    Ok(SteadyState {
        state: DensityOperator::new(space, rho)?,
        residual,
        gap,
    })
}

/// Coarse-grained state at `t = T0` of the microscopic run started from
/// `rho0`, used to seed the macroscopic equation.
pub fn macro_initial_state(
    rho0: &Mat<c64>,
    l: &Superoperator,
    k: &Superoperator,
    schedule: PumpSchedule,
    filter: &CoarseGrainFilter,
    samples_per_period: usize,
) -> Result<Mat<c64>> {
    let periods = libm::ceil(filter.width() / schedule.period() - 1e-9).max(1.0) as usize;
    let traj = evolve_micro(rho0, l, k, schedule, periods, samples_per_period)?;
    let cg = coarse_grain(&traj, filter)?;
    Ok(cg.states()[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::injection::{
        average_kick, single_atom_kick, InjectionStatistics, KickFamily, KickModel,
    };
    use crate::liouvillian::{build_cavity_liouvillian, CavityParams};

    fn setup(n_max: usize, kappa: f64, n_th: f64, theta: f64) -> (Superoperator, Superoperator) {
        let space = FockSpace::new(n_max);
        let l = build_cavity_liouvillian(space, CavityParams::new(kappa, n_th).unwrap());
        let m1 = single_atom_kick(&KickModel::new(space, theta).unwrap());
        (l, m1)
    }

    fn rel(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
        linalg::norm_fro(&(a - b)) / linalg::norm_fro(b).max(1e-300)
    }

    #[test]
    fn geometric_sum_matches_direct_loop() {
        let a = Mat::from_fn(3, 3, |i, j| {
            c64::new(0.1 * (i as f64 - j as f64 + 0.5), 0.05 * (i * j) as f64)
        });
        for n in [1usize, 2, 3, 7, 16, 33] {
            let mut direct = Mat::<c64>::zeros(3, 3);
            let mut p = Mat::<c64>::identity(3, 3);
            for _ in 0..n {
                p = &p * &a;
                direct += &p;
            }
            assert!(rel(&geometric_sum(&a, n), &direct) < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn zero_pump_leaves_the_liouvillian() {
        let (l, _) = setup(4, 1.0, 0.2, 1.0);
        let k = Superoperator::zero(l.space());
        let g = build_macro_generator(&k, &l, 0.2, MacroMethod::Spectral, 1e-9).unwrap();
        assert_eq!(g.generator(), &l);
        assert!(linalg::norm_max(g.pump_part().matrix()) == 0.0);
    }

    #[test]
    fn vanishing_decay_gives_rate_one_over_t() {
        // L = 0: f(L) = 1/T, so G = K / T.
        let (_, m1) = setup(5, 1.0, 0.0, 0.7);
        let l = Superoperator::zero(m1.space());
        let g = build_macro_generator(&m1, &l, 0.25, MacroMethod::Spectral, 0.0).unwrap();
        assert!(rel(g.generator().matrix(), m1.scale(4.0).matrix()) < 1e-14);
        let (series, report) = pump_generator_series(&m1, &l, 0.25, 10, 1e-12, 0.0).unwrap();
        assert_eq!(report.terms, 1);
        assert!(rel(series.matrix(), m1.scale(4.0).matrix()) < 1e-14);
    }

    #[test]
    fn short_period_limit_is_l_plus_k_over_t() {
        let (l, m1) = setup(6, 1.0, 0.1, 0.3);
        let period = 1e-3;
        let g = build_macro_generator(&m1, &l, period, MacroMethod::Spectral, 1e-9).unwrap();
        // f(L) = 1/T + L/2 + L^2 T/12 + O(T^3).
        let expansion = &(&l + &m1.scale(1.0 / period)) + &(&m1 * &l).scale(0.5);
        let err = rel(g.generator().matrix(), expansion.matrix());
        assert!(err < 1e-5, "{err:e}");
        let crude = rel(
            g.generator().matrix(),
            (&l + &m1.scale(1.0 / period)).matrix(),
        );
        assert!(crude > 10.0 * err);
    }

    #[test]
    fn spectral_and_series_agree() {
        let (l, m1) = setup(8, 1.0, 0.2, 0.9);
        let stats = InjectionStatistics::from_pairs(&[(0, 0.3), (1, 0.5), (2, 0.2)]).unwrap();
        let k = average_kick(&stats, &KickFamily::sequential(&m1, 2)).unwrap();
        let spectral = pump_generator_spectral(&k, &l, 0.3, 1e-9).unwrap();
        let (series, report) = pump_generator_series(&k, &l, 0.3, 1 << 20, 1e-12, 1e-9).unwrap();
        assert!(report.tail_bound <= 1e-12);
        let err = rel(series.matrix(), spectral.matrix());
        assert!(err < 1e-9, "{err:e}");
    }

    #[test]
    fn series_reports_insufficient_terms() {
        let (l, m1) = setup(4, 1.0, 0.0, 0.9);
        match pump_generator_series(&m1, &l, 0.1, 5, 1e-10, 1e-9) {
            Err(Error::SeriesNotConverged {
                l_max,
                required_l_max,
                tail_bound,
            }) => {
                assert_eq!(l_max, 5);
                assert!(required_l_max > 5);
                assert!(tail_bound > 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generator_annihilates_the_trace() {
        // theta sqrt(n_max + 1) = pi makes the top level a trapping state, so
        // the truncated kick is exactly trace preserving.
        let theta = core::f64::consts::PI / libm::sqrt(11.0);
        let (l, m1) = setup(10, 1.0, 0.1, theta);
        for method in [
            MacroMethod::Spectral,
            MacroMethod::Series {
                l_max: 1 << 20,
                tail_tol: 1e-12,
            },
        ] {
            let g = build_macro_generator(&m1, &l, 0.5, method, 1e-9).unwrap();
            assert!(g.diagnostics().trace_annihilation < 1e-12, "{method:?}");
        }
    }

    #[test]
    fn steady_state_of_pure_decay_is_vacuum() {
        let (l, _) = setup(5, 1.0, 0.0, 0.0);
        let ss = steady_state(&l).unwrap();
        let vac = l.space().fock_state(0).unwrap();
        assert!(linalg::norm_max(&(ss.state.matrix() - vac.matrix())) < 1e-12);
        assert!(ss.residual < 1e-12);
    }

    #[test]
    fn steady_state_of_thermal_cavity_is_thermal() {
        let (l, _) = setup(30, 1.0, 0.5, 0.0);
        let ss = steady_state(&l).unwrap();
        let p = ss.state.matrix();
        for n in 1..10 {
            let ratio = p[(n, n)].re / p[(n - 1, n - 1)].re;
            assert!((ratio - 0.5 / 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_generator_is_rejected() {
        let space = FockSpace::new(2);
        assert!(matches!(
            steady_state(&Superoperator::zero(space)),
            Err(Error::DegenerateSteadyState { .. })
        ));
    }

    #[test]
    fn initial_state_without_dynamics_is_unchanged() {
        let space = FockSpace::new(3);
        let zero = Superoperator::zero(space);
        let rho = space.thermal_state(0.4).unwrap();
        let schedule = PumpSchedule::new(0.5).unwrap();
        let filter = CoarseGrainFilter::rectangular(2.0).unwrap();
        let out = macro_initial_state(rho.matrix(), &zero, &zero, schedule, &filter, 4).unwrap();
        assert!(linalg::norm_max(&(&out - rho.matrix())) < 1e-15);
    }

    #[test]
    fn sampled_macro_trajectory_matches_direct_exponential() {
        let (l, m1) = setup(5, 1.0, 0.1, 0.8);
        let g = build_macro_generator(&m1, &l, 0.2, MacroMethod::Spectral, 1e-9).unwrap();
        let rho = l.space().fock_state(0).unwrap();
        let schedule = PumpSchedule::new(0.2).unwrap();
        let traj = evolve_macro_sampled(g.generator(), rho.matrix(), 0.0, schedule, 4, 21).unwrap();
        let direct = evolve_macro(g.generator(), rho.matrix(), 1.0).unwrap();
        assert!(linalg::norm_max(&(traj.final_state() - &direct)) < 1e-12);
    }
}
