//! Run orchestration: builds the physics objects for each configuration point,
//! evolves them in the requested mode and collects observable rows and
//! diagnostics.

use std::time::Instant;

use maser_core::liouvillian::propagator;
use maser_core::macroscopic::{evolve_macro_sampled, MacroDiagnostics};
use maser_core::micro::Trajectory;
use maser_core::{
    average_kick, build_cavity_liouvillian, build_macro_generator, c64, coarse_grain, evolve_micro,
    evolve_micro_stochastic, limit_cycle_average, linalg, macro_initial_state, photon_statistics,
    sequential_clipping_row, single_atom_kick, spectral_decompose, steady_state, trace_distance,
    CavityParams, FockSpace, KickFamily, KickModel, MacroGenerator, MacroMethod, Mat, PumpSchedule,
    Superoperator,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    Composition, Document, InitialState, MacroSeed, Mode, SimulationConfig, SweepPoint,
};

/// Largest acceptable population of the top retained Fock level.
pub const TRUNCATION_LIMIT: f64 = 1e-6;
/// Structural-suite tolerances.
pub const CHOI_TOL: f64 = 1e-9;
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;
pub const SPECTRUM_TOL: f64 = 1e-10;

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub time: f64,
    pub mode: String,
    pub mean_n: f64,
    pub variance: f64,
    pub mandel_q: Option<f64>,
    pub purity: f64,
    pub top_level_population: f64,
    pub dev_mean_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn at_least(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            passed: value >= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub method: String,
    pub kernel_dimension: usize,
    pub condition_estimate: Option<f64>,
    pub decomposition_residual: Option<f64>,
    pub series_terms: Option<usize>,
    pub tail_bound: Option<f64>,
    pub trace_annihilation: f64,
    /// `||pump_part - K/T|| / ||K/T||`, Frobenius norms.
    pub pump_deviation_from_rate_limit: Option<f64>,
    /// Relative Frobenius distance of the pump part to the other method's.
    pub cross_check_distance: Option<f64>,
}

impl GeneratorReport {
    fn new(d: &MacroDiagnostics) -> Self {
        Self {
            method: match d.method_used {
                MacroMethod::Spectral => "spectral".into(),
                MacroMethod::Series { .. } => "series".into(),
            },
            kernel_dimension: d.kernel_dimension,
            condition_estimate: d.condition_estimate,
            decomposition_residual: d.decomposition_residual,
            series_terms: d.series_terms,
            tail_bound: d.tail_bound,
            trace_annihilation: d.trace_annihilation,
            pump_deviation_from_rate_limit: None,
            cross_check_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    pub choi_min_propagator: f64,
    pub choi_min_kick: f64,
    /// Max deviation of the stroboscopic map's trace row, plus the trace
    /// clipped at the top level, from `vec(I)^H`.
    pub stroboscopic_trace_error: f64,
    /// Largest trace fraction any basis column loses to clipping per period.
    pub top_level_clipping: f64,
    pub max_real_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub mean_n: f64,
    pub variance: f64,
    pub mandel_q: Option<f64>,
    pub top_level_population: f64,
    pub residual: f64,
    pub singular_gap: f64,
    /// Trace distance to the filter-averaged final micro period.
    pub cycle_trace_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub macro_seed: String,
    /// Max over shared times of `|<n>_macro - <n>_micro| / max(1, <n>_micro)`.
    pub max_relative_deviation_mean_n: f64,
    pub time_of_max_deviation: f64,
    pub max_trace_distance: f64,
    pub time_of_max_trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticReport {
    pub realizations: usize,
    /// Max over samples of `|ensemble mean - deterministic| / standard error` for `<n>`.
    pub max_standard_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub label: String,
    pub mode: &'static str,
    pub generator: Option<GeneratorReport>,
    /// Trace removed by truncation clipping over the micro run.
    pub truncation_flux: Option<f64>,
    pub max_top_level_population: f64,
    pub structural: Option<StructuralReport>,
    pub steady_state: Option<SteadyStateReport>,
    pub comparison: Option<ComparisonReport>,
    pub stochastic: Option<StochasticReport>,
    pub gates: Vec<Gate>,
    pub gates_enabled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub row_count: usize,
    pub has_deviation_column: bool,
    pub points: Vec<PointReport>,
    pub wall_clock_seconds: f64,
    pub config: Document,
}

impl RunReport {
    /// True when every enabled gate passed.
    pub fn gates_passed(&self) -> bool {
        self.points
            .iter()
            .all(|p| !p.gates_enabled || p.gates.iter().all(|g| g.passed))
    }
}

/// Runs every point of a validated document, using up to `workers` threads
/// for sweep points and stochastic realizations. Output order does not depend
/// on the worker count.
pub fn run(doc: &Document, points: &[SweepPoint], workers: usize) -> maser_core::Result<RunReport> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<maser_core::Result<(Vec<Row>, PointReport)>> = pool.install(|| {
        if points.len() > 1 {
            points.par_iter().map(run_point).collect()
        } else {
            points.iter().map(run_point).collect()
        }
    });

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for r in results {
        let (mut point_rows, report) = r?;
        rows.append(&mut point_rows);
        reports.push(report);
    }
    let has_deviation_column = points.iter().any(|p| p.config.mode == Mode::Compare);
    Ok(RunReport {
        row_count: rows.len(),
        rows,
        has_deviation_column,
        points: reports,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: doc.clone(),
    })
}

/// Cavity, pump and initial state of one configuration.
pub struct Setup {
    pub space: FockSpace,
    pub l: Superoperator,
    pub m1: Superoperator,
    pub family: KickFamily,
    pub k: Superoperator,
    pub schedule: PumpSchedule,
    pub rho0: Mat<c64>,
    pub kernel_tol: f64,
    /// Expected trace clipped at the top level per tick, as a functional on `vec(rho)`.
    pub clipping: Vec<f64>,
}

impl Setup {
    pub fn new(cfg: &SimulationConfig) -> maser_core::Result<Self> {
        let space = FockSpace::new(cfg.n_max);
        let params = CavityParams::new(cfg.kappa, cfg.n_th)?;
        let l = build_cavity_liouvillian(space, params);
        let model = KickModel::new(space, cfg.theta)?;
        let m1 = single_atom_kick(&model);
        let family = match cfg.composition {
            // At least M_1, so that the family also fixes the space when no atoms arrive.
            Composition::Sequential => KickFamily::sequential(&m1, cfg.statistics.k_max().max(1)),
        };
        let clipping = match cfg.composition {
            Composition::Sequential => sequential_clipping_row(&model, &cfg.statistics),
        };
        let k = average_kick(&cfg.statistics, &family)?;
        let rho0 = match cfg.initial_state {
            InitialState::Vacuum => space.fock_state(0)?,
            InitialState::Thermal => space.thermal_state(cfg.n_th)?,
            InitialState::Fock(n) => space.fock_state(n)?,
        }
        .into_matrix();
        Ok(Self {
            space,
            l,
            m1,
            family,
            k,
            schedule: PumpSchedule::new(cfg.period)?,
            rho0,
            kernel_tol: params.kernel_tol(),
            clipping,
        })
    }
}

fn stats_row(space: FockSpace, time: f64, mode: &str, rho: &Mat<c64>) -> maser_core::Result<Row> {
    let s = photon_statistics(rho, space)?;
    Ok(Row {
        time,
        mode: mode.to_string(),
        mean_n: s.mean,
        variance: s.variance,
        mandel_q: s.mandel_q,
        purity: s.purity,
        top_level_population: s.top_level_population,
        dev_mean_n: None,
    })
}

fn trajectory_rows(
    space: FockSpace,
    traj: &Trajectory,
    mode: &str,
) -> maser_core::Result<Vec<Row>> {
    traj.states()
        .iter()
        .enumerate()
        .map(|(i, rho)| stats_row(space, traj.time(i), mode, rho))
        .collect()
}

fn tag(mode: &str, label: &str) -> String {
    if label.is_empty() {
        mode.to_string()
    } else {
        format!("{mode}@{label}")
    }
}

pub fn run_point(point: &SweepPoint) -> maser_core::Result<(Vec<Row>, PointReport)> {
    let cfg = &point.config;
    let label = point.label.as_str();
    let setup = Setup::new(cfg)?;
    let space = setup.space;
    let mut rows = Vec::new();
    let mut report = PointReport {
        label: label.to_string(),
        mode: cfg.mode.name(),
        generator: None,
        truncation_flux: None,
        max_top_level_population: 0.0,
        structural: None,
        steady_state: None,
        comparison: None,
        stochastic: None,
        gates: Vec::new(),
        gates_enabled: cfg.gates,
    };

    if cfg.structural_checks {
        report.structural = Some(structural(&setup)?);
    }

    let needs_micro = matches!(cfg.mode, Mode::Micro | Mode::Compare);
    let needs_generator =
        matches!(cfg.mode, Mode::Macro | Mode::Compare) || cfg.steady_state || cfg.cross_check;

    let micro = if needs_micro {
        let traj = evolve_micro(
            &setup.rho0,
            &setup.l,
            &setup.k,
            setup.schedule,
            cfg.n_periods,
            cfg.samples_per_period,
        )?;
        let coarse = coarse_grain(&traj, &cfg.filter)?;
        report.truncation_flux = Some(traj.trace_deficit());
        Some((traj, coarse))
    } else {
        None
    };

    let generator = if needs_generator {
        let g = build_macro_generator(
            &setup.k,
            &setup.l,
            cfg.period,
            cfg.macro_method(),
            setup.kernel_tol,
        )?;
        report.generator = Some(generator_report(cfg, &setup, &g)?);
        Some(g)
    } else {
        None
    };

    let mut micro_coarse_rows = Vec::new();
    if let Some((traj, coarse)) = &micro {
        rows.extend(trajectory_rows(space, traj, &tag("micro-raw", label))?);
        micro_coarse_rows = trajectory_rows(space, coarse, &tag("micro-coarse", label))?;
    }

    if let (Some(g), true) = (&generator, matches!(cfg.mode, Mode::Macro | Mode::Compare)) {
        let h = cfg.period / cfg.samples_per_period as f64;
        let (start_index, seed_state) = match cfg.macro_seed {
            MacroSeed::CoarseGrained => {
                let m = (cfg.filter.width() / h).round() as usize;
                let seed = macro_initial_state(
                    &setup.rho0,
                    &setup.l,
                    &setup.k,
                    setup.schedule,
                    &cfg.filter,
                    cfg.samples_per_period,
                )?;
                (m, seed)
            }
            MacroSeed::Microscopic => (0, setup.rho0.clone()),
        };
        let last_index = cfg.n_periods * cfg.samples_per_period;
        let macro_traj = evolve_macro_sampled(
            g.generator(),
            &seed_state,
            start_index as f64 * h,
            setup.schedule,
            cfg.samples_per_period,
            last_index - start_index + 1,
        )?;
        let mut macro_rows = trajectory_rows(space, &macro_traj, &tag("macro", label))?;

        if let Some((_, coarse)) = &micro {
            // Coarse sample j sits at grid index m + j; macro sample i at start_index + i.
            let m = last_index + 1 - coarse.len();
            let mut cmp = ComparisonReport {
                macro_seed: match cfg.macro_seed {
                    MacroSeed::CoarseGrained => "coarse-grained".into(),
                    MacroSeed::Microscopic => "microscopic".into(),
                },
                max_relative_deviation_mean_n: 0.0,
                time_of_max_deviation: f64::NAN,
                max_trace_distance: 0.0,
                time_of_max_trace_distance: f64::NAN,
            };
            for (j, micro_row) in micro_coarse_rows.iter_mut().enumerate() {
                let i = m + j - start_index;
                let macro_row = &mut macro_rows[i];
                let dev = (macro_row.mean_n - micro_row.mean_n).abs() / micro_row.mean_n.max(1.0);
                macro_row.dev_mean_n = Some(dev);
                micro_row.dev_mean_n = Some(dev);
                if dev > cmp.max_relative_deviation_mean_n {
                    cmp.max_relative_deviation_mean_n = dev;
                    cmp.time_of_max_deviation = micro_row.time;
                }
                let td = trace_distance(&coarse.states()[j], &macro_traj.states()[i])?;
                if td > cmp.max_trace_distance {
                    cmp.max_trace_distance = td;
                    cmp.time_of_max_trace_distance = micro_row.time;
                }
            }
            report.comparison = Some(cmp);
        }
        rows.append(&mut micro_coarse_rows);
        rows.append(&mut macro_rows);
    } else {
        rows.append(&mut micro_coarse_rows);
    }

    if let (Some(g), true) = (&generator, cfg.steady_state || cfg.mode == Mode::Compare) {
        let ss = steady_state(g.generator())?;
        let stats = photon_statistics(ss.state.matrix(), space)?;
        let cycle_trace_distance = match &micro {
            Some((traj, _)) => {
                let cycle = traj.last_period()?;
                let avg = limit_cycle_average(&cycle, &cfg.filter)?;
                Some(trace_distance(&avg, ss.state.matrix())?)
            }
            None => None,
        };
        report.steady_state = Some(SteadyStateReport {
            mean_n: stats.mean,
            variance: stats.variance,
            mandel_q: stats.mandel_q,
            top_level_population: stats.top_level_population,
            residual: ss.residual,
            singular_gap: ss.gap,
            cycle_trace_distance,
        });
    }

    if cfg.mode == Mode::Stochastic {
        let (mut stochastic_rows, stochastic) = run_stochastic(cfg, &setup, label)?;
        rows.append(&mut stochastic_rows);
        report.stochastic = Some(stochastic);
    }

    report.max_top_level_population = rows
        .iter()
        .map(|r| r.top_level_population)
        .chain(report.steady_state.iter().map(|s| s.top_level_population))
        .fold(0.0, f64::max);
    report.gates = gates(cfg, &report);
    Ok((rows, report))
}

fn generator_report(
    cfg: &SimulationConfig,
    setup: &Setup,
    g: &MacroGenerator,
) -> maser_core::Result<GeneratorReport> {
    let mut out = GeneratorReport::new(g.diagnostics());
    let rate = setup.k.scale(1.0 / cfg.period);
    let rate_norm = linalg::norm_fro(rate.matrix());
    if rate_norm > 0.0 {
        out.pump_deviation_from_rate_limit =
            Some(linalg::norm_fro(&(g.pump_part().matrix() - rate.matrix())) / rate_norm);
    }
    if cfg.cross_check {
        let other = build_macro_generator(
            &setup.k,
            &setup.l,
            cfg.period,
            cfg.other_method(),
            setup.kernel_tol,
        )?;
        let reference = linalg::norm_fro(g.pump_part().matrix());
        let diff = linalg::norm_fro(&(g.pump_part().matrix() - other.pump_part().matrix()));
        out.cross_check_distance = Some(if reference > 0.0 {
            diff / reference
        } else {
            diff
        });
    }
    Ok(out)
}

/// Complete positivity, stroboscopic trace preservation and spectrum of `L`.
pub fn structural(setup: &Setup) -> maser_core::Result<StructuralReport> {
    let d = setup.space.dim();
    let period = setup.schedule.period();
    let e = propagator(&setup.l, period);
    let kick = setup.k.plus_identity();
    let strobe = &e * &kick;
    let row = strobe.trace_row();
    let mut trace_error = 0.0f64;
    for (c, (z, clip)) in row.iter().zip(&setup.clipping).enumerate() {
        let target = if c % d == c / d { 1.0 } else { 0.0 };
        trace_error = trace_error.max((z + c64::new(*clip, 0.0) - c64::new(target, 0.0)).norm());
    }
    let eigenvalues = match spectral_decompose(&setup.l) {
        Ok(dec) => dec.eigenvalues().to_vec(),
        Err(maser_core::Error::NearDefective { .. }) => setup
            .l
            .matrix()
            .eigenvalues()
            .map_err(|_| maser_core::Error::Eigensolver)?,
        Err(err) => return Err(err),
    };
    Ok(StructuralReport {
        choi_min_propagator: linalg::choi_min_eigenvalue(e.matrix(), d)?,
        choi_min_kick: linalg::choi_min_eigenvalue(kick.matrix(), d)?,
        stroboscopic_trace_error: trace_error,
        top_level_clipping: setup.clipping.iter().copied().fold(0.0, f64::max),
        max_real_eigenvalue: eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

fn gates(cfg: &SimulationConfig, report: &PointReport) -> Vec<Gate> {
    let mut gates = vec![Gate::at_most(
        "truncation",
        report.max_top_level_population,
        TRUNCATION_LIMIT,
    )];
    if let (Some(g), crate::config::MethodName::Series) = (&report.generator, cfg.method) {
        if let Some(bound) = g.tail_bound {
            gates.push(Gate::at_most("series_tail", bound, cfg.tail_tol));
        }
    }
    if let Some(s) = &report.structural {
        gates.push(Gate::at_least(
            "choi_propagator",
            s.choi_min_propagator,
            -CHOI_TOL,
        ));
        gates.push(Gate::at_least("choi_kick", s.choi_min_kick, -CHOI_TOL));
        gates.push(Gate::at_most(
            "stroboscopic_trace",
            s.stroboscopic_trace_error,
            TRACE_PRESERVATION_TOL,
        ));
        gates.push(Gate::at_most(
            "spectrum",
            s.max_real_eigenvalue,
            SPECTRUM_TOL,
        ));
    }
    gates
}

/// Ensemble of single realizations against the deterministic averaged-kick run.
fn run_stochastic(
    cfg: &SimulationConfig,
    setup: &Setup,
    label: &str,
) -> maser_core::Result<(Vec<Row>, StochasticReport)> {
    let space = setup.space;
    let det = evolve_micro(
        &setup.rho0,
        &setup.l,
        &setup.k,
        setup.schedule,
        cfg.n_periods,
        cfg.samples_per_period,
    )?;
    let samples = det.len();
    let d = space.dim();
    let mut sum_states = vec![Mat::<c64>::zeros(d, d); samples];
    let mut sum_n = vec![0.0; samples];
    let mut sum_n2 = vec![0.0; samples];

    let chunk = 4 * rayon::current_num_threads().max(1);
    let indices: Vec<usize> = (0..cfg.realizations).collect();
    for block in indices.chunks(chunk) {
        let runs: Vec<maser_core::Result<Trajectory>> = block
            .par_iter()
            .map(|&r| {
                evolve_micro_stochastic(
                    &setup.rho0,
                    &setup.l,
                    &setup.family,
                    &cfg.statistics,
                    setup.schedule,
                    cfg.n_periods,
                    cfg.samples_per_period,
                    cfg.seed.wrapping_add(r as u64),
                )
            })
            .collect();
        for traj in runs {
            let traj = traj?;
            for (i, rho) in traj.states().iter().enumerate() {
                let n: f64 = (0..d).map(|k| k as f64 * rho[(k, k)].re).sum();
                sum_n[i] += n;
                sum_n2[i] += n * n;
                sum_states[i] += rho;
            }
        }
    }

    let count = cfg.realizations as f64;
    let mut rows = trajectory_rows(space, &det, &tag("micro-raw", label))?;
    let mut max_score = 0.0f64;
    for i in 0..samples {
        let avg = Mat::from_fn(d, d, |a, b| sum_states[i][(a, b)] / count);
        rows.push(stats_row(
            space,
            det.time(i),
            &tag("micro-stochastic", label),
            &avg,
        )?);
        let mean = sum_n[i] / count;
        let var = ((sum_n2[i] - count * mean * mean) / (count - 1.0)).max(0.0);
        let stderr = (var / count).sqrt();
        let det_n: f64 = (0..d).map(|k| k as f64 * det.states()[i][(k, k)].re).sum();
        let diff = (mean - det_n).abs();
        let score = if stderr > 0.0 {
            diff / stderr
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_score = max_score.max(score);
    }
    Ok((
        rows,
        StochasticReport {
            realizations: cfg.realizations,
            max_standard_score: max_score,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const DECAY: &str = r#"
        [cavity]
        n_max = 6
        kappa = 1.0
        [pump]
        theta = 1.0
        period = 0.1
        probabilities = { 0 = 1.0 }
        [run]
        mode = "micro"
        n_periods = 30
        initial_state = "fock:1"
    "#;

    #[test]
    fn analytic_decay_through_the_runner() {
        let (doc, points) = parse_config(DECAY).unwrap();
        let report = run(&doc, &points, 1).unwrap();
        let raw: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.mode == "micro-raw")
            .collect();
        assert_eq!(raw.len(), 30 * 8 + 1);
        for r in raw {
            assert!((r.mean_n - (-r.time).exp()).abs() < 1e-9, "t={}", r.time);
        }
        assert!(report.rows.iter().any(|r| r.mode == "micro-coarse"));
        assert!(report.gates_passed());
        assert!(!report.has_deviation_column);
    }

    #[test]
    fn compare_rows_carry_deviations() {
        let text = DECAY
            .replace("mode = \"micro\"", "mode = \"compare\"")
            .replace("{ 0 = 1.0 }", "{ 0 = 0.5, 1 = 0.5 }")
            .replace("n_max = 6", "n_max = 12");
        let (doc, points) = parse_config(&text).unwrap();
        let report = run(&doc, &points, 1).unwrap();
        assert!(report.has_deviation_column);
        let macro_rows: Vec<_> = report.rows.iter().filter(|r| r.mode == "macro").collect();
        let coarse_rows: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.mode == "micro-coarse")
            .collect();
        assert_eq!(macro_rows.len(), coarse_rows.len());
        assert!((macro_rows[0].time - 1.0).abs() < 1e-12);
        assert!(macro_rows.iter().all(|r| r.dev_mean_n.is_some()));
        let cmp = report.points[0].comparison.as_ref().unwrap();
        assert!(cmp.max_relative_deviation_mean_n.is_finite());
        assert!(report.points[0].steady_state.is_some());
    }

    #[test]
    fn microscopic_seed_starts_at_zero() {
        let text = DECAY.replace(
            "mode = \"micro\"",
            "mode = \"macro\"\nmacro_seed = \"microscopic\"",
        );
        let (doc, points) = parse_config(&text).unwrap();
        let report = run(&doc, &points, 1).unwrap();
        let first = report.rows.iter().find(|r| r.mode == "macro").unwrap();
        assert_eq!(first.time, 0.0);
        assert_eq!(first.mean_n, 1.0);
    }
}
