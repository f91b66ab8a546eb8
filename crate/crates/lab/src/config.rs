//! TOML run configuration.
//!
//! A document has the sections `[cavity]`, `[pump]`, `[filter]`, `[run]`,
//! `[output]` and, for parameter sweeps, `[sweep]`. Unknown keys are errors.
//! Parsing reports every semantic violation at once rather than stopping at
//! the first one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use maser_core::{CoarseGrainFilter, FilterKind, InjectionStatistics, MacroMethod};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub cavity: CavitySection,
    pub pump: PumpSection,
    #[serde(default)]
    pub filter: FilterSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub n_max: usize,
    pub kappa: f64,
    #[serde(default)]
    pub n_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub theta: f64,
    pub period: f64,
    /// Event size `k` (as a key) to probability.
    pub probabilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub composition: Composition,
}

/// How `k`-atom kicks are built from the single-atom kick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Atoms pass one after another: `1 + M_k = (1 + M_1)^k`.
    #[default]
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterName {
    #[default]
    Rectangular,
    Triangular,
    Gaussian,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default)]
    pub kind: FilterName,
    /// Window length `T0`; defaults to ten periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Density values on a uniform grid, for `kind = "tabulated"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Micro,
    Macro,
    Compare,
    Stochastic,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Micro => "micro",
            Mode::Macro => "macro",
            Mode::Compare => "compare",
            Mode::Stochastic => "stochastic",
            Mode::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        [
            Mode::Micro,
            Mode::Macro,
            Mode::Compare,
            Mode::Stochastic,
            Mode::Sweep,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Spectral,
    Series,
}

/// Where the macroscopic trajectory starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroSeed {
    /// Coarse-grained micro state at `t = T0`.
    #[default]
    CoarseGrained,
    /// The microscopic initial state, taken as the macroscopic value at `t = 0`.
    Microscopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub n_periods: usize,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// `"vacuum"`, `"thermal"` or `"fock:<n>"`.
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    #[serde(default)]
    pub macro_seed: MacroSeed,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Also build the generator with the other method and report the distance.
    #[serde(default)]
    pub cross_check: bool,
    /// Steady state of `G` and its distance to the micro limit cycle.
    #[serde(default)]
    pub steady_state: bool,
    /// Choi spectra, stroboscopic trace preservation and the spectrum of `L`.
    #[serde(default)]
    pub structural_checks: bool,
    /// Fail the run (exit status 4) when a diagnostic gate trips.
    #[serde(default = "default_true")]
    pub gates: bool,
}

fn default_samples() -> usize {
    8
}

fn default_l_max() -> usize {
    1_000_000
}

fn default_tail_tol() -> f64 {
    1e-10
}

fn default_initial_state() -> String {
    "thermal".into()
}

fn default_realizations() -> usize {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// CSV destination; the JSON sidecar goes next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Grid of parameter values; the sweep is the Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Run mode applied at every grid point.
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Vacuum,
    Thermal,
    Fock(usize),
}

impl InitialState {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "vacuum" => Some(InitialState::Vacuum),
            "thermal" => Some(InitialState::Thermal),
            _ => s
                .strip_prefix("fock:")?
                .trim()
                .parse()
                .ok()
                .map(InitialState::Fock),
        }
    }
}

/// Validated configuration for a single (non-sweep) run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_max: usize,
    pub kappa: f64,
    pub n_th: f64,
    pub theta: f64,
    pub period: f64,
    pub statistics: InjectionStatistics,
    pub composition: Composition,
    pub filter: CoarseGrainFilter,
    pub mode: Mode,
    pub n_periods: usize,
    pub samples_per_period: usize,
    pub method: MethodName,
    pub l_max: usize,
    pub tail_tol: f64,
    pub initial_state: InitialState,
    pub macro_seed: MacroSeed,
    pub seed: u64,
    pub realizations: usize,
    pub cross_check: bool,
    pub steady_state: bool,
    pub structural_checks: bool,
    pub gates: bool,
}

impl SimulationConfig {
    pub fn macro_method(&self) -> MacroMethod {
        self.method_for(self.method)
    }

    /// The method not selected, used for cross-checks.
    pub fn other_method(&self) -> MacroMethod {
        self.method_for(match self.method {
            MethodName::Spectral => MethodName::Series,
            MethodName::Series => MethodName::Spectral,
        })
    }

    fn method_for(&self, name: MethodName) -> MacroMethod {
        match name {
            MethodName::Spectral => MacroMethod::Spectral,
            MethodName::Series => MacroMethod::Series {
                l_max: self.l_max,
                tail_tol: self.tail_tol,
            },
        }
    }
}

/// One point of a sweep: its label and validated configuration.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax(String),
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax(msg) => write!(f, "config syntax error: {msg}"),
            ConfigError::Invalid(list) => {
                write!(f, "invalid config:")?;
                for v in list {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn violations(&self) -> Vec<String> {
        match self {
            ConfigError::Syntax(msg) => vec![msg.clone()],
            ConfigError::Invalid(list) => list.clone(),
        }
    }
}

pub fn parse_document(text: &str) -> Result<Document, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string().trim_end().to_string()))
}

impl Document {
    /// Validates the document. Sweep documents expand into one point per grid
    /// entry (in row-major order over `n_max, kappa, n_th, theta, period`);
    /// single runs produce one unlabelled point.
    pub fn points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        let mut errors = Vec::new();
        let base = self.validate(&mut errors);

        if self.run.mode == Mode::Sweep {
            let Some(sweep) = &self.sweep else {
                errors.push("run.mode = \"sweep\" requires a [sweep] section".into());
                return Err(ConfigError::Invalid(errors));
            };
            if sweep.mode == Mode::Sweep {
                errors.push("sweep.mode must name a non-sweep run mode".into());
            }
            let axes = sweep_axes(sweep);
            if axes.is_empty() {
                errors.push("[sweep] declares no parameter values".into());
            }
            for (name, values) in &axes {
                if values.is_empty() {
                    errors.push(format!("sweep.{name} is empty"));
                }
            }
            if !errors.is_empty() {
                return Err(ConfigError::Invalid(errors));
            }

            let mut points = Vec::new();
            for combo in cartesian(&axes) {
                let mut doc = self.clone();
                doc.run.mode = sweep.mode;
                doc.sweep = None;
                let mut label = Vec::new();
                for (name, value) in combo {
                    match name {
                        "n_max" => doc.cavity.n_max = value as usize,
                        "kappa" => doc.cavity.kappa = value,
                        "n_th" => doc.cavity.n_th = value,
                        "theta" => doc.pump.theta = value,
                        "period" => doc.pump.period = value,
                        _ => unreachable!("unknown sweep axis"),
                    }
                    label.push(format!("{name}={value}"));
                }
                let label = label.join(",");
                let mut point_errors = Vec::new();
                match doc.validate(&mut point_errors) {
                    Some(config) if point_errors.is_empty() => {
                        points.push(SweepPoint { label, config })
                    }
                    _ => {
                        errors.extend(point_errors.into_iter().map(|e| format!("at {label}: {e}")))
                    }
                }
            }
            return if errors.is_empty() {
                Ok(points)
            } else {
                Err(ConfigError::Invalid(errors))
            };
        }

        if self.sweep.is_some() {
            errors.push("[sweep] section given but run.mode is not \"sweep\"".into());
        }
        match base {
            Some(config) if errors.is_empty() => Ok(vec![SweepPoint {
                label: String::new(),
                config,
            }]),
            _ => Err(ConfigError::Invalid(errors)),
        }
    }

    fn validate(&self, errors: &mut Vec<String>) -> Option<SimulationConfig> {
        let start = errors.len();
        let c = &self.cavity;
        if c.n_max < 1 {
            errors.push("cavity.n_max must be at least 1".into());
        }
        if !(c.kappa >= 0.0) || !c.kappa.is_finite() {
            errors.push(format!(
                "cavity.kappa must be finite and non-negative, got {}",
                c.kappa
            ));
        }
        if !(c.n_th >= 0.0) || !c.n_th.is_finite() {
            errors.push(format!(
                "cavity.n_th must be finite and non-negative, got {}",
                c.n_th
            ));
        }

        let p = &self.pump;
        if !p.theta.is_finite() {
            errors.push("pump.theta must be finite".into());
        }
        if !(p.period > 0.0) || !p.period.is_finite() {
            errors.push(format!(
                "pump.period must be finite and positive, got {}",
                p.period
            ));
        }
        let mut table = Vec::new();
        for (key, &prob) in &p.probabilities {
            match key.trim().parse::<usize>() {
                Ok(k) => table.push((k, prob)),
                Err(_) => errors.push(format!(
                    "pump.probabilities key `{key}` is not a non-negative integer"
                )),
            }
        }
        let statistics = if table.is_empty() {
            errors.push("pump.probabilities is empty".into());
            None
        } else {
            match InjectionStatistics::from_pairs(&table) {
                Ok(s) => Some(s),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            }
        };

        let period = p.period;
        let width = self.filter.width.unwrap_or(10.0 * period);
        if !(width > 0.0) || !width.is_finite() {
            errors.push(format!(
                "filter.width must be finite and positive, got {width}"
            ));
        } else if period > 0.0 && width < period {
            errors.push("filter width below injection period".into());
        }
        let kind = match self.filter.kind {
            FilterName::Rectangular => FilterKind::Rectangular,
            FilterName::Triangular => FilterKind::Triangular,
            FilterName::Gaussian => FilterKind::GaussianTruncated,
            FilterName::Tabulated => match &self.filter.values {
                Some(v) => FilterKind::Tabulated(v.clone()),
                None => {
                    errors.push("filter.values is required for kind = \"tabulated\"".into());
                    FilterKind::Rectangular
                }
            },
        };
        if self.filter.values.is_some() && self.filter.kind != FilterName::Tabulated {
            errors.push("filter.values is only allowed for kind = \"tabulated\"".into());
        }

        let r = &self.run;
        if r.n_periods < 1 {
            errors.push("run.n_periods must be at least 1".into());
        }
        if r.samples_per_period < 1 {
            errors.push("run.samples_per_period must be at least 1".into());
        }
        if period > 0.0 && width > 0.0 && r.samples_per_period >= 1 {
            let steps = width / (period / r.samples_per_period as f64);
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                errors.push("filter.width must be a whole number of sample spacings (period / samples_per_period)".into());
            }
            if matches!(r.mode, Mode::Micro | Mode::Macro | Mode::Compare)
                && (r.n_periods as f64) * period < width * (1.0 - 1e-12)
            {
                errors.push("run.n_periods * pump.period must cover the filter width".into());
            }
        }
        if r.l_max < 1 {
            errors.push("run.l_max must be at least 1".into());
        }
        if !(r.tail_tol > 0.0) {
            errors.push("run.tail_tol must be positive".into());
        }
        if r.mode == Mode::Stochastic && r.realizations < 2 {
            errors.push("run.realizations must be at least 2 in stochastic mode".into());
        }
        let initial_state = InitialState::parse(&r.initial_state);
        match initial_state {
            None => errors.push(format!(
                "run.initial_state `{}` is not one of vacuum, thermal, fock:<n>",
                r.initial_state
            )),
            Some(InitialState::Fock(n)) if n > c.n_max => errors.push(format!(
                "run.initial_state fock:{n} exceeds cavity.n_max {}",
                c.n_max
            )),
            _ => {}
        }

        let filter = CoarseGrainFilter::new(kind, width);
        if let Err(e) = &filter {
            errors.push(e.to_string());
        }
        if errors.len() > start {
            return None;
        }
        Some(SimulationConfig {
            n_max: c.n_max,
            kappa: c.kappa,
            n_th: c.n_th,
            theta: p.theta,
            period,
            statistics: statistics?,
            composition: p.composition,
            filter: filter.ok()?,
            mode: r.mode,
            n_periods: r.n_periods,
            samples_per_period: r.samples_per_period,
            method: r.method,
            l_max: r.l_max,
            tail_tol: r.tail_tol,
            initial_state: initial_state?,
            macro_seed: r.macro_seed,
            seed: r.seed,
            realizations: r.realizations,
            cross_check: r.cross_check,
            steady_state: r.steady_state,
            structural_checks: r.structural_checks,
            gates: r.gates,
        })
    }
}

fn sweep_axes(s: &SweepSection) -> Vec<(&'static str, Vec<f64>)> {
    let mut axes = Vec::new();
    if let Some(v) = &s.n_max {
        axes.push(("n_max", v.iter().map(|&n| n as f64).collect()));
    }
    for (name, values) in [
        ("kappa", &s.kappa),
        ("n_th", &s.n_th),
        ("theta", &s.theta),
        ("period", &s.period),
    ] {
        if let Some(v) = values {
            axes.push((name, v.clone()));
        }
    }
    axes
}

fn cartesian(axes: &[(&'static str, Vec<f64>)]) -> Vec<Vec<(&'static str, f64)>> {
    let mut out: Vec<Vec<(&'static str, f64)>> = vec![Vec::new()];
    for (name, values) in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((*name, v));
                    p
                })
            })
            .collect();
    }
    out
}

/// Parses and validates in one step.
pub fn parse_config(text: &str) -> Result<(Document, Vec<SweepPoint>), ConfigError> {
    let doc = parse_document(text)?;
    let points = doc.points()?;
    Ok((doc, points))
}
