//! Kicked microscopic dynamics and coarse graining.
//!
//! At every tick `t_j = j T` the field receives the kick `1 + K` (the kick acts
//! on the state just before the tick) and then decays under `L` until the
//! next tick. Trajectories are sampled on a uniform grid of `samples_per_period`
//! points per period. A sample that falls on a tick stores the post-kick state;
//! the pre-kick state is kept alongside so that quadratures can integrate the
//! piecewise-smooth trajectory without smearing the jump.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fock::{unvectorize, vectorize, Superoperator};
use crate::injection::{sample_event, InjectionStatistics, KickFamily, PumpSchedule};
use crate::linalg;
use crate::liouvillian::propagator;
use crate::{Error, Result};

/// Largest tolerated deviation of the continuous filter integral from one
/// under the trajectory's trapezoid rule.
pub const FILTER_NORMALIZATION_TOL: f64 = 1e-3;

/// Uniformly sampled density-matrix trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    start: f64,
    schedule: PumpSchedule,
    samples_per_period: usize,
    states: Vec<Mat<c64>>,
    left_limits: BTreeMap<usize, Mat<c64>>,
    trace_deficit: f64,
}

impl Trajectory {
    /// Samples at `start + i T / samples_per_period`, with no discontinuities.
    pub fn new(
        start: f64,
        schedule: PumpSchedule,
        samples_per_period: usize,
        states: Vec<Mat<c64>>,
    ) -> Result<Self> {
        if samples_per_period == 0 {
            return Err(Error::invalid("samples_per_period", "must be at least 1"));
        }
        if states.is_empty() {
            return Err(Error::invalid("states", "trajectory has no samples"));
        }
        let d = states[0].nrows();
        if let Some(bad) = states.iter().find(|s| s.nrows() != d || s.ncols() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.nrows(),
            });
        }
        Ok(Self {
            start,
            schedule,
            samples_per_period,
            states,
            left_limits: BTreeMap::new(),
            trace_deficit: 0.0,
        })
    }

    /// Records the state just before sample `index` when the trajectory jumps there.
    pub fn with_left_limit(mut self, index: usize, state: Mat<c64>) -> Result<Self> {
        if index == 0 || index >= self.states.len() {
            return Err(Error::invalid(
                "index",
                "left limit outside the trajectory interior",
            ));
        }
        self.left_limits.insert(index, state);
        Ok(self)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn schedule(&self) -> PumpSchedule {
        self.schedule
    }

    pub fn samples_per_period(&self) -> usize {
        self.samples_per_period
    }

    pub fn spacing(&self) -> f64 {
        self.schedule.period() / self.samples_per_period as f64
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start + index as f64 * self.spacing()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|i| self.time(i)).collect()
    }

    /// Right-continuous samples (post-kick on ticks).
    pub fn states(&self) -> &[Mat<c64>] {
        &self.states
    }

    /// The state approached from the left at sample `index`.
    pub fn left_state(&self, index: usize) -> &Mat<c64> {
        self.left_limits.get(&index).unwrap_or(&self.states[index])
    }

    pub fn final_state(&self) -> &Mat<c64> {
        self.states.last().expect("trajectory is never empty")
    }

    /// Time between the first and last sample.
    pub fn span(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.spacing()
    }

    /// Trace lost at kicks, summed over the run. For the Jaynes-Cummings kick
    /// this is the population pushed past the truncation.
    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    /// The final period as its own trajectory: the post-kick state at the last
    /// tick through the pre-kick state one period later.
    pub fn last_period(&self) -> Result<Trajectory> {
        let spp = self.samples_per_period;
        if self.states.len() < spp + 1 {
            return Err(Error::TrajectoryTooShort {
                span: self.span(),
                width: self.schedule.period(),
            });
        }
        let first = self.states.len() - spp - 1;
        Trajectory::new(
            self.time(first),
            self.schedule,
            spp,
            self.states[first..].to_vec(),
        )
    }
}

/// Window shape of the coarse-graining filter on `[0, width]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    Rectangular,
    /// Symmetric tent peaking at `width / 2`.
    Triangular,
    /// Gaussian centred at `width / 2` with standard deviation `width / 6`,
    /// cut off at the window edges.
    GaussianTruncated,
    /// User-supplied density values on a uniform grid over `[0, width]`,
    /// interpolated linearly.
    Tabulated(Vec<f64>),
}

/// Normalized causal window `f(tau)` supported on `[0, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrainFilter {
    kind: FilterKind,
    width: f64,
}

impl CoarseGrainFilter {
    pub fn new(kind: FilterKind, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid("width", "must be finite and positive"));
        }
        if let FilterKind::Tabulated(values) = &kind {
            if values.len() < 2 {
                return Err(Error::invalid(
                    "filter",
                    "tabulated filter needs at least two values",
                ));
            }
            if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid(
                    "filter",
                    "tabulated values must be finite and non-negative",
                ));
            }
        }
        Ok(Self { kind, width })
    }

    pub fn rectangular(width: f64) -> Result<Self> {
        Self::new(FilterKind::Rectangular, width)
    }

    pub fn kind(&self) -> &FilterKind {
        &self.kind
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Continuous density `f(tau)`.
    pub fn density(&self, tau: f64) -> f64 {
        let w = self.width;
        if !(0.0..=w).contains(&tau) {
            return 0.0;
        }
        match &self.kind {
            FilterKind::Rectangular => 1.0 / w,
            FilterKind::Triangular => (2.0 / w) * (1.0 - (2.0 * tau / w - 1.0).abs()),
            FilterKind::GaussianTruncated => {
                let sigma = w / 6.0;
                let z = sigma
                    * libm::sqrt(2.0 * core::f64::consts::PI)
                    * libm::erf(3.0 / core::f64::consts::SQRT_2);
                let x = (tau - 0.5 * w) / sigma;
                libm::exp(-0.5 * x * x) / z
            }
            FilterKind::Tabulated(values) => {
                let cells = (values.len() - 1) as f64;
                let x = tau / w * cells;
                let i = (libm::floor(x) as usize).min(values.len() - 2);
                let frac = x - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Nodal densities at `tau_i = i * spacing`, `i = 0..=m`, rescaled so that
    /// the trapezoid rule integrates them to exactly one.
    pub fn nodal_weights(&self, spacing: f64) -> Result<Vec<f64>> {
        let ratio = self.width / spacing;
        let m = libm::round(ratio);
        if m < 1.0 || (ratio - m).abs() > 1e-9 * m {
            return Err(Error::invalid(
                "width",
                "filter width must be a whole number of sample spacings",
            ));
        }
        let m = m as usize;
        let mut nodes: Vec<f64> = (0..=m).map(|i| self.density(i as f64 * spacing)).collect();
        let integral: f64 = nodes
            .windows(2)
            .map(|p| 0.5 * spacing * (p[0] + p[1]))
            .sum();
        if !((integral - 1.0).abs() <= FILTER_NORMALIZATION_TOL) {
            return Err(Error::FilterNormalization { integral });
        }
        for v in &mut nodes {
            *v /= integral;
        }
        Ok(nodes)
    }
}

/// `exp(L T) (1 + K) rho`.
pub fn stroboscopic_step(
    rho: &Mat<c64>,
    l: &Superoperator,
    k: &Superoperator,
    period: f64,
) -> Result<Mat<c64>> {
    l.check_same_space(k)?;
    l.space().check_operator(rho)?;
    let kicked = k.plus_identity().matrix() * vectorize(rho);
    let v = propagator(l, period).matrix() * kicked;
    Ok(unvectorize(&v, l.space().dim()))
}

fn propagate<'a>(
    rho0: &Mat<c64>,
    l: &Superoperator,
    schedule: PumpSchedule,
    n_periods: usize,
    samples_per_period: usize,
    mut kick_at: impl FnMut(usize) -> Option<&'a Mat<c64>>,
) -> Result<Trajectory> {
    if n_periods == 0 {
        return Err(Error::invalid("n_periods", "must be at least 1"));
    }
    if samples_per_period == 0 {
        return Err(Error::invalid("samples_per_period", "must be at least 1"));
    }
    let space = l.space();
    space.check_operator(rho0)?;
    let d = space.dim();
    let step = propagator(l, schedule.period() / samples_per_period as f64).into_matrix();

    let mut states = Vec::with_capacity(n_periods * samples_per_period + 1);
    let mut left_limits = BTreeMap::new();
    let mut deficit = 0.0;
    let mut v = vectorize(rho0);
    for j in 0..n_periods {
        if let Some(kick) = kick_at(j) {
            if j > 0 {
                left_limits.insert(j * samples_per_period, unvectorize(&v, d));
            }
            let before = vec_trace(&v, d);
            v = kick * &v;
            deficit += before - vec_trace(&v, d);
        }
        for _ in 0..samples_per_period {
            states.push(unvectorize(&v, d));
            v = &step * &v;
        }
    }
    states.push(unvectorize(&v, d));

    Ok(Trajectory {
        start: 0.0,
        schedule,
        samples_per_period,
        states,
        left_limits,
        trace_deficit: deficit,
    })
}

fn vec_trace(v: &Mat<c64>, d: usize) -> f64 {
    (0..d).map(|i| v[(i + i * d, 0)].re).sum()
}

/// Deterministic kicked evolution with the averaged kick `K` at every tick.
///
/// The returned trajectory holds `n_periods * samples_per_period + 1` samples;
/// the last one is the state just before tick `n_periods`.
pub fn evolve_micro(
    rho0: &Mat<c64>,
    l: &Superoperator,
    k: &Superoperator,
    schedule: PumpSchedule,
    n_periods: usize,
    samples_per_period: usize,
) -> Result<Trajectory> {
    l.check_same_space(k)?;
    let kick = k.plus_identity().into_matrix();
    propagate(rho0, l, schedule, n_periods, samples_per_period, |_| {
        Some(&kick)
    })
}

/// Single realization: at every tick an event size `k` is drawn from `stats`
/// and `1 + M_k` is applied.
#[allow(clippy::too_many_arguments)]
pub fn evolve_micro_stochastic(
    rho0: &Mat<c64>,
    l: &Superoperator,
    family: &KickFamily,
    stats: &InjectionStatistics,
    schedule: PumpSchedule,
    n_periods: usize,
    samples_per_period: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut kicks: Vec<Option<Mat<c64>>> = alloc::vec![None; stats.k_max() + 1];
    for (k, &p) in stats.probabilities().iter().enumerate().skip(1) {
        if p > 0.0 {
            let m = family.get(k).ok_or(Error::MissingKick { k })?;
            l.check_same_space(m)?;
            kicks[k] = Some(m.plus_identity().into_matrix());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    propagate(rho0, l, schedule, n_periods, samples_per_period, |_| {
        let k = sample_event(stats, &mut rng);
        kicks[k].as_ref()
    })
}

/// Coarse-grained trajectory `rho_bar(t) = int_0^{T0} rho(t - tau) f(tau) dtau`.
///
/// Output starts at `t = start + T0`; earlier times have no coarse-grained
/// state and are omitted. Each grid interval is integrated by the trapezoid
/// rule using the right limit at its left end and the left limit at its right
/// end, so kicks inside the window are integrated exactly as jumps.
pub fn coarse_grain(traj: &Trajectory, filter: &CoarseGrainFilter) -> Result<Trajectory> {
    let period = traj.schedule.period();
    if filter.width() < period * (1.0 - 1e-12) {
        return Err(Error::FilterTooNarrow {
            width: filter.width(),
            period,
        });
    }
    let h = traj.spacing();
    let nodes = filter.nodal_weights(h)?;
    let m = nodes.len() - 1;
    let last = traj.len() - 1;
    if last < m {
        return Err(Error::TrajectoryTooShort {
            span: traj.span(),
            width: filter.width(),
        });
    }

    let d = traj.states[0].nrows();
    let half = 0.5 * h;
    let mut out = Vec::with_capacity(last - m + 1);
    for n in m..=last {
        let mut acc = Mat::<c64>::zeros(d, d);
        for i in 0..m {
            let w_left = half * nodes[i + 1];
            let w_right = half * nodes[i];
            let a = &traj.states[n - i - 1];
            let b = traj.left_state(n - i);
            for c in 0..d {
                for r in 0..d {
                    acc[(r, c)] += a[(r, c)] * w_left + b[(r, c)] * w_right;
                }
            }
        }
        out.push(acc);
    }

    let mut cg = Trajectory::new(traj.time(m), traj.schedule, traj.samples_per_period, out)?;
    cg.trace_deficit = traj.trace_deficit;
    Ok(cg)
}

/// Filter-weighted average of a converged limit cycle.
///
/// `cycle` must cover exactly one period (`samples_per_period + 1` samples from
/// the post-kick state to the next pre-kick state). The cycle is repeated to
/// fill the filter window and the coarse-grained value at the end of the
/// window is returned.
pub(crate) fn cycle_average(cycle: &Trajectory, filter: &CoarseGrainFilter) -> Result<Mat<c64>> {
    let spp = cycle.samples_per_period;
    if cycle.len() != spp + 1 {
        return Err(Error::invalid(
            "cycle",
            "limit cycle must hold exactly one period of samples",
        ));
    }
    let period = cycle.schedule.period();
    let repeats = (libm::ceil(filter.width() / period - 1e-9) as usize).max(1);
    let mut states = Vec::with_capacity(repeats * spp + 1);
    for _ in 0..repeats {
        states.extend(cycle.states[..spp].iter().cloned());
    }
    states.push(cycle.final_state().clone());
    let mut tiled = Trajectory::new(0.0, cycle.schedule, spp, states)?;
    for r in 1..repeats {
        tiled = tiled.with_left_limit(r * spp, cycle.final_state().clone())?;
    }
    let cg = coarse_grain(&tiled, filter)?;
    Ok(cg.final_state().clone())
}

/// Max elementwise hermiticity defect and max trace error over a trajectory.
pub fn trajectory_defects(traj: &Trajectory) -> (f64, f64) {
    traj.states.iter().fold((0.0f64, 0.0f64), |(h, t), s| {
        (
            h.max(linalg::hermiticity_error(s)),
            t.max((linalg::trace(s).re - 1.0).abs()),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::injection::{average_kick, single_atom_kick, KickModel};
    use crate::liouvillian::{build_cavity_liouvillian, exp_action, CavityParams};
    use core::f64::consts::FRAC_PI_2;

    fn mean_n(space: FockSpace, rho: &Mat<c64>) -> f64 {
        (0..space.dim()).map(|n| n as f64 * rho[(n, n)].re).sum()
    }

    fn constant(d: usize, value: f64) -> Mat<c64> {
        Mat::from_fn(d, d, |i, j| c64::new(value * (1 + i + 2 * j) as f64, 0.0))
    }

    #[test]
    fn step_without_kick_is_pure_decay() {
        let space = FockSpace::new(4);
        let l = build_cavity_liouvillian(space, CavityParams::new(1.0, 0.2).unwrap());
        let rho = space.fock_state(2).unwrap();
        let a = stroboscopic_step(rho.matrix(), &l, &Superoperator::zero(space), 0.3).unwrap();
        let b = exp_action(&l, 0.3, rho.matrix()).unwrap();
        assert!(linalg::norm_max(&(&a - &b)) < 1e-15);

        let zero = Superoperator::zero(space);
        let same = stroboscopic_step(rho.matrix(), &zero, &zero, 0.3).unwrap();
        assert_eq!(&same, rho.matrix());
    }

    #[test]
    fn step_with_resonant_kick_and_no_decay() {
        let space = FockSpace::new(3);
        let k = single_atom_kick(&KickModel::new(space, FRAC_PI_2).unwrap());
        let out = stroboscopic_step(
            space.fock_state(0).unwrap().matrix(),
            &Superoperator::zero(space),
            &k,
            1.0,
        )
        .unwrap();
        assert!(linalg::norm_max(&(&out - space.fock_state(1).unwrap().matrix())) < 1e-15);
    }

    #[test]
    fn single_sample_trajectory_is_one_decay_period() {
        let space = FockSpace::new(3);
        let l = build_cavity_liouvillian(space, CavityParams::new(0.7, 0.0).unwrap());
        let rho0 = space.fock_state(3).unwrap();
        let traj = evolve_micro(
            rho0.matrix(),
            &l,
            &Superoperator::zero(space),
            PumpSchedule::new(0.4).unwrap(),
            1,
            1,
        )
        .unwrap();
        assert_eq!(traj.len(), 2);
        let expected = exp_action(&l, 0.4, rho0.matrix()).unwrap();
        assert!(linalg::norm_max(&(traj.final_state() - &expected)) < 1e-14);
    }

    #[test]
    fn free_decay_over_fifty_periods() {
        let space = FockSpace::new(4);
        let l = build_cavity_liouvillian(space, CavityParams::new(1.0, 0.0).unwrap());
        let traj = evolve_micro(
            space.fock_state(1).unwrap().matrix(),
            &l,
            &Superoperator::zero(space),
            PumpSchedule::new(0.1).unwrap(),
            50,
            8,
        )
        .unwrap();
        assert!((traj.time(traj.len() - 1) - 5.0).abs() < 1e-12);
        let n = mean_n(space, traj.final_state());
        assert!((n - libm::exp(-5.0)).abs() < 1e-9, "{n}");
    }

    #[test]
    fn lossless_resonant_pumping_follows_population_recursion() {
        // Populations under one JC passage: p'_n = cos^2(theta sqrt(n+1)) p_n
        // + sin^2(theta sqrt(n)) p_{n-1}.
        let space = FockSpace::new(5);
        let theta = FRAC_PI_2;
        let k = single_atom_kick(&KickModel::new(space, theta).unwrap());
        let traj = evolve_micro(
            space.fock_state(0).unwrap().matrix(),
            &Superoperator::zero(space),
            &k,
            PumpSchedule::new(1.0).unwrap(),
            3,
            1,
        )
        .unwrap();
        let mut pops = alloc::vec![0.0; 6];
        pops[0] = 1.0;
        for j in 1..=3 {
            let mut next = alloc::vec![0.0; 6];
            for n in 0..6 {
                let stay = libm::cos(theta * libm::sqrt((n + 1) as f64));
                next[n] += stay * stay * pops[n];
                if n > 0 {
                    let s = libm::sin(theta * libm::sqrt(n as f64));
                    next[n] += s * s * pops[n - 1];
                }
            }
            pops = next;
            // With L = 0 the sample after kick j (index j) is the post-kick state.
            let rho = traj.left_state(j);
            for n in 0..6 {
                assert!(
                    (rho[(n, n)].re - pops[n]).abs() < 1e-14,
                    "period {j}, level {n}"
                );
            }
        }
        assert!(
            linalg::norm_max(&(&traj.states()[0] - space.fock_state(1).unwrap().matrix())) < 1e-15
        );
    }

    #[test]
    fn micro_trajectory_stays_physical() {
        let space = FockSpace::new(12);
        let l = build_cavity_liouvillian(space, CavityParams::new(1.0, 0.1).unwrap());
        let k = single_atom_kick(&KickModel::new(space, 1.0).unwrap());
        let traj = evolve_micro(
            space.fock_state(0).unwrap().matrix(),
            &l,
            &k,
            PumpSchedule::new(0.2).unwrap(),
            40,
            4,
        )
        .unwrap();
        let (herm, tr) = trajectory_defects(&traj);
        assert!(herm <= 1e-10);
        assert!(tr <= 1e-9 + traj.trace_deficit(), "{tr:e}");
        for s in traj.states() {
            let min = linalg::hermitian_eigenvalues(&linalg::hermitian_part(s)).unwrap()[0];
            assert!(min >= -1e-9);
        }
    }

    #[test]
    fn deterministic_statistics_reproduce_deterministic_run() {
        let space = FockSpace::new(3);
        let l = build_cavity_liouvillian(space, CavityParams::new(1.0, 0.1).unwrap());
        let m1 = single_atom_kick(&KickModel::new(space, 0.8).unwrap());
        let family = KickFamily::sequential(&m1, 1);
        let schedule = PumpSchedule::new(0.3).unwrap();
        let rho0 = space.fock_state(0).unwrap();

        let always = InjectionStatistics::from_pairs(&[(1, 1.0)]).unwrap();
        let k = average_kick(&always, &family).unwrap();
        let det = evolve_micro(rho0.matrix(), &l, &k, schedule, 10, 3).unwrap();
        let sto = evolve_micro_stochastic(rho0.matrix(), &l, &family, &always, schedule, 10, 3, 5)
            .unwrap();
        assert_eq!(det.states(), sto.states());

        let never = InjectionStatistics::from_pairs(&[(0, 1.0)]).unwrap();
        let decay = evolve_micro(
            rho0.matrix(),
            &l,
            &Superoperator::zero(space),
            schedule,
            10,
            3,
        )
        .unwrap();
        let sto = evolve_micro_stochastic(rho0.matrix(), &l, &family, &never, schedule, 10, 3, 5)
            .unwrap();
        for (a, b) in decay.states().iter().zip(sto.states()) {
            assert!(linalg::norm_max(&(a - b)) < 1e-15);
        }
    }

    #[test]
    fn filters_integrate_to_one() {
        let h = 0.01;
        for kind in [
            FilterKind::Rectangular,
            FilterKind::Triangular,
            FilterKind::GaussianTruncated,
        ] {
            let f = CoarseGrainFilter::new(kind.clone(), 0.8).unwrap();
            let w = f.nodal_weights(h).unwrap();
            let integral: f64 = w.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
            assert!((integral - 1.0).abs() < 1e-10, "{kind:?}");
            assert_eq!(f.density(-0.1), 0.0);
            assert_eq!(f.density(0.81), 0.0);
        }
    }

    #[test]
    fn misnormalized_filter_is_rejected() {
        let f = CoarseGrainFilter::new(FilterKind::Tabulated(alloc::vec![1.01; 5]), 1.0).unwrap();
        assert!(matches!(
            f.nodal_weights(0.1),
            Err(Error::FilterNormalization { .. })
        ));
        let ok = CoarseGrainFilter::new(FilterKind::Tabulated(alloc::vec![1.0; 5]), 1.0).unwrap();
        assert!(ok.nodal_weights(0.1).is_ok());
        assert!(ok.nodal_weights(0.3).is_err());
    }

    #[test]
    fn constant_trajectory_is_a_fixed_point_of_every_filter() {
        let schedule = PumpSchedule::new(0.5).unwrap();
        let rho = constant(3, 0.1);
        let traj = Trajectory::new(0.0, schedule, 4, alloc::vec![rho.clone(); 41]).unwrap();
        for kind in [
            FilterKind::Rectangular,
            FilterKind::Triangular,
            FilterKind::GaussianTruncated,
        ] {
            let cg = coarse_grain(&traj, &CoarseGrainFilter::new(kind, 1.5).unwrap()).unwrap();
            assert_eq!(cg.len(), 41 - 12);
            assert!((cg.start() - 1.5).abs() < 1e-15);
            for s in cg.states() {
                assert!(linalg::norm_max(&(s - &rho)) < 1e-14);
            }
        }
    }

    #[test]
    fn alternating_half_periods_average_to_the_mean() {
        let schedule = PumpSchedule::new(1.0).unwrap();
        let (a, b) = (constant(2, 1.0), constant(2, -0.3));
        let states: Vec<_> = (0..9)
            .map(|i| if i % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let traj = Trajectory::new(0.0, schedule, 2, states).unwrap();
        let cg = coarse_grain(&traj, &CoarseGrainFilter::rectangular(2.0).unwrap()).unwrap();
        let mean = (&a + &b) * faer::Scale(c64::new(0.5, 0.0));
        for s in cg.states() {
            assert!(linalg::norm_max(&(s - &mean)) < 1e-15);
        }
    }

    #[test]
    fn coarse_grain_preconditions() {
        let schedule = PumpSchedule::new(1.0).unwrap();
        let traj = Trajectory::new(0.0, schedule, 2, alloc::vec![constant(2, 1.0); 3]).unwrap();
        assert!(matches!(
            coarse_grain(&traj, &CoarseGrainFilter::rectangular(0.5).unwrap()),
            Err(Error::FilterTooNarrow { .. })
        ));
        assert!(matches!(
            coarse_grain(&traj, &CoarseGrainFilter::rectangular(2.0).unwrap()),
            Err(Error::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn coarse_graining_commutes_with_mixing() {
        let space = FockSpace::new(3);
        let l = build_cavity_liouvillian(space, CavityParams::new(1.0, 0.3).unwrap());
        let k = single_atom_kick(&KickModel::new(space, 1.2).unwrap());
        let schedule = PumpSchedule::new(0.25).unwrap();
        let t1 = evolve_micro(
            space.fock_state(0).unwrap().matrix(),
            &l,
            &k,
            schedule,
            12,
            4,
        )
        .unwrap();
        let t2 = evolve_micro(
            space.fock_state(2).unwrap().matrix(),
            &l,
            &k,
            schedule,
            12,
            4,
        )
        .unwrap();
        let lambda = 0.3;
        let mix_state = |a: &Mat<c64>, b: &Mat<c64>| {
            a * faer::Scale(c64::new(lambda, 0.0)) + b * faer::Scale(c64::new(1.0 - lambda, 0.0))
        };
        let mixed_states: Vec<_> = t1
            .states()
            .iter()
            .zip(t2.states())
            .map(|(a, b)| mix_state(a, b))
            .collect();
        let mut mixed = Trajectory::new(0.0, schedule, 4, mixed_states).unwrap();
        for j in 1..12 {
            mixed = mixed
                .with_left_limit(4 * j, mix_state(t1.left_state(4 * j), t2.left_state(4 * j)))
                .unwrap();
        }
        let filter = CoarseGrainFilter::new(FilterKind::Triangular, 1.0).unwrap();
        let (c1, c2, cm) = (
            coarse_grain(&t1, &filter).unwrap(),
            coarse_grain(&t2, &filter).unwrap(),
            coarse_grain(&mixed, &filter).unwrap(),
        );
        for i in 0..cm.len() {
            let expected = mix_state(&c1.states()[i], &c2.states()[i]);
            assert!(linalg::norm_max(&(&cm.states()[i] - &expected)) < 1e-12);
        }
    }

    #[test]
    fn cycle_average_of_simple_cycles() {
        let schedule = PumpSchedule::new(1.0).unwrap();
        let rho = constant(2, 0.2);
        let flat = Trajectory::new(0.0, schedule, 4, alloc::vec![rho.clone(); 5]).unwrap();
        let avg = cycle_average(&flat, &CoarseGrainFilter::rectangular(3.0).unwrap()).unwrap();
        assert!(linalg::norm_max(&(&avg - &rho)) < 1e-15);

        let (a, b) = (constant(2, 1.0), constant(2, 0.0));
        let two = Trajectory::new(0.0, schedule, 1, alloc::vec![a.clone(), b.clone()]).unwrap();
        let avg = cycle_average(&two, &CoarseGrainFilter::rectangular(2.0).unwrap()).unwrap();
        let mean = (&a + &b) * faer::Scale(c64::new(0.5, 0.0));
        assert!(linalg::norm_max(&(&avg - &mean)) < 1e-15);
    }
}
