//! Atom injection: kick maps, event statistics and the averaged kick `K`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use faer::{c64, Mat};
use rand::Rng;

use crate::fock::{FockSpace, Operator, Superoperator};
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Resonant Jaynes-Cummings interaction of one excited atom with the field,
/// parameterized by the accumulated Rabi angle `theta = g tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickModel {
    theta: f64,
    space: FockSpace,
}

impl KickModel {
    pub fn new(space: FockSpace, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite and non-negative"));
        }
        Ok(Self { theta, space })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Emission probability `sin^2(theta sqrt(n + 1))` from Fock level `n`.
    pub fn emission_probability(&self, n: usize) -> f64 {
        let s = libm::sin(self.theta * libm::sqrt((n + 1) as f64));
        s * s
    }

    /// Population that one passage would push above `n_max`. This is exactly
    /// the trace lost by `1 + M_1` on `rho`.
    pub fn clipped_flux(&self, rho: &Mat<c64>) -> f64 {
        let top = self.space.n_max();
        rho[(top, top)].re * self.emission_probability(top)
    }

    /// Kraus pair `(C, S)` with `C = cos(theta sqrt(a a^dagger))` and
    /// `S = a^dagger sin(theta sqrt(a a^dagger)) / sqrt(a a^dagger)`, with
    /// `a a^dagger` taken as `n + 1` on every level. The row of `S` that would
    /// leave the truncated space is dropped.
    pub fn kraus_operators(&self) -> (Operator, Operator) {
        let space = self.space;
        let cos = space.diagonal(|n| libm::cos(self.theta * libm::sqrt((n + 1) as f64)));
        let sinc = space.diagonal(|n| {
            let r = libm::sqrt((n + 1) as f64);
            libm::sin(self.theta * r) / r
        });
        let s = &space.creation() * &sinc;
        (cos, s)
    }
}

/// `M_1 = Phi - 1` for the Jaynes-Cummings gain channel
/// `Phi(rho) = C rho C + S rho S^dagger`.
pub fn single_atom_kick(model: &KickModel) -> Superoperator {
    let (c, s) = model.kraus_operators();
    let stay = &Superoperator::left_mult(&c) * &Superoperator::right_mult(&c.adjoint());
    let emit = &Superoperator::left_mult(&s) * &Superoperator::right_mult(&s.adjoint());
    let channel = &stay + &emit;
    &channel - &Superoperator::identity(model.space)
}

/// `M_k = (1 + M_1)^k - 1`: `k` independent passages within one tick.
pub fn multi_atom_kick(m1: &Superoperator, k: usize) -> Result<Superoperator> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let step = m1.plus_identity();
    let mut total = step.clone();
    for _ in 1..k {
        total = &step * &total;
    }
    Ok(&total - &Superoperator::identity(m1.space()))
}

/// Kick maps `k -> M_k` for the event sizes a pump can produce.
#[derive(Debug, Clone, Default)]
pub struct KickFamily {
    kicks: BTreeMap<usize, Superoperator>,
}

impl KickFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sequential composition of `m1` for `k = 1..=k_max`.
    pub fn sequential(m1: &Superoperator, k_max: usize) -> Self {
        let mut family = Self::new();
        if k_max == 0 {
            return family;
        }
        let step = m1.plus_identity();
        let ident = Superoperator::identity(m1.space());
        let mut power = step.clone();
        family.kicks.insert(1, m1.clone());
        for k in 2..=k_max {
            power = &step * &power;
            family.kicks.insert(k, &power - &ident);
        }
        family
    }

    pub fn insert(&mut self, k: usize, kick: Superoperator) {
        self.kicks.insert(k, kick);
    }

    pub fn get(&self, k: usize) -> Option<&Superoperator> {
        self.kicks.get(&k)
    }
}

/// Probabilities `p_k` of a `k`-atom event per tick, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionStatistics {
    probabilities: Vec<f64>,
}

impl InjectionStatistics {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("probabilities", "table is empty"));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::invalid(
                "probabilities",
                alloc::format!("entry {p} outside [0, 1]"),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::ProbabilitySum { sum });
        }
        Ok(Self { probabilities })
    }

    /// Builds the table from `(k, p_k)` pairs; unlisted counts get zero.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let k_max = pairs.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let mut probabilities = alloc::vec![0.0; k_max + 1];
        for &(k, p) in pairs {
            probabilities[k] += p;
        }
        Self::new(probabilities)
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn k_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// Mean number of atoms per tick.
    pub fn mean_atoms(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

/// Strictly periodic injection times `t_j = j T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSchedule {
    period: f64,
}

impl PumpSchedule {
    pub fn new(period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("period", "must be finite and positive"));
        }
        Ok(Self { period })
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// `K = sum_{k>=1} p_k M_k`. Empty ticks contribute nothing.
pub fn average_kick(stats: &InjectionStatistics, family: &KickFamily) -> Result<Superoperator> {
    let mut total: Option<Superoperator> = None;
    for (k, &p) in stats.probabilities.iter().enumerate().skip(1) {
        if p == 0.0 {
            continue;
        }
        let kick = family.get(k).ok_or(Error::MissingKick { k })?;
        let term = kick.scale(p);
        total = Some(match total {
            Some(acc) => &acc + &term,
            None => term,
        });
    }
    match total {
        Some(k) => Ok(k),
        None => family
            .kicks
            .values()
            .next()
            .map(|m| Superoperator::zero(m.space()))
            .ok_or(Error::MissingKick { k: 0 }),
    }
}

/// Expected trace clipped at the top level during one tick of sequential
/// passages, as a linear functional on vectorized states:
/// `sum_j P(k > j) w (1 + M_1)^j` with `w` the top-level emission flux. For
/// every state, `tr((1 + K) rho) + row . vec(rho) = tr(rho)`.
pub fn sequential_clipping_row(model: &KickModel, stats: &InjectionStatistics) -> Vec<f64> {
    let space = model.space();
    let d = space.dim();
    let top = space.n_max() * (d + 1);
    let step = single_atom_kick(model).plus_identity().into_matrix();
    let mut w = Mat::<c64>::zeros(1, d * d);
    w[(0, top)] = c64::new(model.emission_probability(space.n_max()), 0.0);
    let mut row = alloc::vec![0.0; d * d];
    for j in 0..stats.k_max() {
        let survival: f64 = stats.probabilities[j + 1..].iter().sum();
        for (r, z) in row.iter_mut().zip(w.row(0).iter()) {
            *r += survival * z.re;
        }
        w = &w * &step;
    }
    row
}

/// Draws an event size `k` with probability `p_k` by inverse-CDF sampling of a
/// single uniform variate.
pub fn sample_event<R: Rng + ?Sized>(stats: &InjectionStatistics, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (k, &p) in stats.probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    // Rounding left the cumulative sum just below 1; return the last populated count.
    stats
        .probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use core::f64::consts::FRAC_PI_2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn emitted(space: FockSpace, theta: f64, rho: &Mat<c64>) -> Mat<c64> {
        let m1 = single_atom_kick(&KickModel::new(space, theta).unwrap());
        m1.plus_identity().apply(rho).unwrap()
    }

    #[test]
    fn zero_angle_kick_is_zero() {
        let m1 = single_atom_kick(&KickModel::new(FockSpace::new(4), 0.0).unwrap());
        assert_eq!(linalg::norm_max(m1.matrix()), 0.0);
    }

    #[test]
    fn pi_half_kick_empties_vacuum_into_one_photon() {
        let space = FockSpace::new(3);
        let out = emitted(space, FRAC_PI_2, space.fock_state(0).unwrap().matrix());
        let target = space.fock_state(1).unwrap();
        assert!(linalg::norm_max(&(&out - target.matrix())) < 1e-15);
        assert!((linalg::trace(&out).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_populations_follow_jaynes_cummings_rates() {
        let space = FockSpace::new(6);
        let theta = 0.9;
        let rho = space.thermal_state(1.2).unwrap();
        let out = emitted(space, theta, rho.matrix());
        for n in 0..=space.n_max() {
            let stay = 1.0 - libm::pow(libm::sin(theta * libm::sqrt((n + 1) as f64)), 2.0);
            let mut expected = stay * rho.matrix()[(n, n)].re;
            if n > 0 {
                let s = libm::sin(theta * libm::sqrt(n as f64));
                expected += s * s * rho.matrix()[(n - 1, n - 1)].re;
            }
            if n == space.n_max() {
                // Emission out of the top level is clipped.
                let clip = libm::pow(libm::sin(theta * libm::sqrt((n + 1) as f64)), 2.0);
                expected = rho.matrix()[(n, n)].re * (1.0 - clip)
                    + libm::pow(libm::sin(theta * libm::sqrt(n as f64)), 2.0)
                        * rho.matrix()[(n - 1, n - 1)].re;
            }
            assert!((out[(n, n)].re - expected).abs() < 1e-14, "level {n}");
        }
    }

    #[test]
    fn trace_deficit_equals_clipped_flux() {
        let space = FockSpace::new(4);
        let model = KickModel::new(space, 1.3).unwrap();
        let rho = space.thermal_state(3.0).unwrap();
        let out = emitted(space, 1.3, rho.matrix());
        let deficit = 1.0 - linalg::trace(&out).re;
        assert!(deficit > 1e-3);
        assert!((deficit - model.clipped_flux(rho.matrix())).abs() < 1e-14);

        let low = space.fock_state(1).unwrap();
        let out = emitted(space, 1.3, low.matrix());
        assert!((linalg::trace(&out).re - 1.0).abs() < 1e-10);
        assert_eq!(model.clipped_flux(low.matrix()), 0.0);
    }

    #[test]
    fn clipping_row_accounts_for_every_lost_trace() {
        let space = FockSpace::new(3);
        let model = KickModel::new(space, 1.3).unwrap();
        let m1 = single_atom_kick(&model);
        let stats = InjectionStatistics::from_pairs(&[(0, 0.2), (1, 0.3), (3, 0.5)]).unwrap();
        let k = average_kick(&stats, &KickFamily::sequential(&m1, 3)).unwrap();
        let row = sequential_clipping_row(&model, &stats);
        let trace = k.plus_identity().trace_row();
        let d = space.dim();
        for c in 0..d * d {
            let target = if c % d == c / d { 1.0 } else { 0.0 };
            assert!((trace[c].re + row[c] - target).abs() < 1e-14, "column {c}");
            assert!(trace[c].im.abs() < 1e-15);
        }
        // Level 1 reaches the top only after two passages.
        assert!(row[1 + d] > 1e-3);
        let none = InjectionStatistics::from_pairs(&[(0, 1.0)]).unwrap();
        assert!(sequential_clipping_row(&model, &none)
            .iter()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn kick_channel_is_completely_positive() {
        for n_max in 1..=5 {
            for theta in [0.3, FRAC_PI_2, 2.0] {
                let m1 = single_atom_kick(&KickModel::new(FockSpace::new(n_max), theta).unwrap());
                let min =
                    linalg::choi_min_eigenvalue(m1.plus_identity().matrix(), n_max + 1).unwrap();
                assert!(min >= -1e-9, "n_max {n_max}, theta {theta}: {min:e}");
            }
        }
    }

    #[test]
    fn multi_atom_composition() {
        let space = FockSpace::new(2);
        let m1 = single_atom_kick(&KickModel::new(space, 0.7).unwrap());
        assert_eq!(multi_atom_kick(&m1, 1).unwrap(), m1);
        assert!(multi_atom_kick(&m1, 0).is_err());

        let zero = Superoperator::zero(space);
        assert_eq!(
            linalg::norm_max(multi_atom_kick(&zero, 4).unwrap().matrix()),
            0.0
        );

        // Direct 9x9 product oracle.
        let one_plus = (&Superoperator::identity(space) + &m1).into_matrix();
        let n = one_plus.nrows();
        let mut sq = Mat::<c64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    sq[(i, j)] += one_plus[(i, k)] * one_plus[(k, j)];
                }
            }
        }
        let expected = &sq - Mat::<c64>::identity(n, n);
        let m2 = multi_atom_kick(&m1, 2).unwrap();
        assert!(linalg::norm_max(&(m2.matrix() - &expected)) < 1e-14);
    }

    #[test]
    fn family_powers_satisfy_recursion() {
        let space = FockSpace::new(3);
        let m1 = single_atom_kick(&KickModel::new(space, 1.1).unwrap());
        let family = KickFamily::sequential(&m1, 5);
        let step = m1.plus_identity();
        for k in 2..=5 {
            let lhs = family.get(k).unwrap().plus_identity();
            let rhs = &step * &family.get(k - 1).unwrap().plus_identity();
            assert!(linalg::norm_max(&(lhs.matrix() - rhs.matrix())) < 1e-12);
            let direct = multi_atom_kick(&m1, k).unwrap();
            assert!(linalg::norm_max(&(family.get(k).unwrap().matrix() - direct.matrix())) < 1e-12);
        }
    }

    #[test]
    fn average_kick_examples() {
        let space = FockSpace::new(2);
        let m1 = single_atom_kick(&KickModel::new(space, 0.7).unwrap());
        let family = KickFamily::sequential(&m1, 2);

        let only_one = InjectionStatistics::from_pairs(&[(1, 1.0)]).unwrap();
        assert_eq!(average_kick(&only_one, &family).unwrap(), m1);

        let empty = InjectionStatistics::from_pairs(&[(0, 1.0)]).unwrap();
        assert_eq!(
            average_kick(&empty, &family).unwrap(),
            Superoperator::zero(space)
        );

        let mixed = InjectionStatistics::from_pairs(&[(1, 0.5), (2, 0.5)]).unwrap();
        let k = average_kick(&mixed, &family).unwrap();
        let m2 = family.get(2).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expected = m1.matrix()[(i, j)] * 0.5 + m2.matrix()[(i, j)] * 0.5;
                assert!((k.matrix()[(i, j)] - expected).norm() < 1e-15);
            }
        }

        let three = InjectionStatistics::from_pairs(&[(3, 1.0)]).unwrap();
        assert!(matches!(
            average_kick(&three, &family),
            Err(Error::MissingKick { k: 3 })
        ));
    }

    #[test]
    fn averaged_kick_channel_is_completely_positive() {
        let space = FockSpace::new(4);
        let m1 = single_atom_kick(&KickModel::new(space, 2.0).unwrap());
        let family = KickFamily::sequential(&m1, 3);
        let stats = InjectionStatistics::from_pairs(&[(0, 0.2), (1, 0.3), (3, 0.5)]).unwrap();
        let k = average_kick(&stats, &family).unwrap();
        let min = linalg::choi_min_eigenvalue(k.plus_identity().matrix(), 5).unwrap();
        assert!(min >= -1e-9, "{min:e}");
    }

    #[test]
    fn statistics_validation() {
        assert!(matches!(
            InjectionStatistics::from_pairs(&[(1, 0.6), (2, 0.6)]),
            Err(Error::ProbabilitySum { sum }) if (sum - 1.2).abs() < 1e-12
        ));
        assert!(InjectionStatistics::new(alloc::vec![-0.1, 1.1]).is_err());
        assert!(InjectionStatistics::new(alloc::vec![]).is_err());
        let s = InjectionStatistics::from_pairs(&[(0, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(s.mean_atoms(), 1.0);
        assert_eq!(s.k_max(), 2);
        assert!(PumpSchedule::new(0.0).is_err());
    }

    #[test]
    fn deterministic_distribution_always_yields_its_count() {
        let stats = InjectionStatistics::from_pairs(&[(3, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_event(&stats, &mut rng) == 3));
    }

    #[test]
    fn fair_coin_frequency_within_four_sigma() {
        // Binomial(1e5, 1/2): sigma = 158, so 4 sigma is about 0.0063 in frequency.
        let stats = InjectionStatistics::from_pairs(&[(0, 0.5), (1, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let ones = (0..draws)
            .filter(|_| sample_event(&stats, &mut rng) == 1)
            .count();
        let freq = ones as f64 / draws as f64;
        assert!((0.49..=0.51).contains(&freq), "{freq}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let stats = InjectionStatistics::from_pairs(&[(0, 0.2), (1, 0.5), (2, 0.3)]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| sample_event(&stats, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
