//! Acceptance scenarios shipped with the binary.

pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: &'static str,
}

macro_rules! scenario {
    ($name:literal, $summary:literal) => {
        Scenario {
            name: $name,
            summary: $summary,
            config: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

pub const SCENARIOS: &[Scenario] = &[
    scenario!(
        "generator-equivalence",
        "spectral vs series pump generator over n_max, n_th, T"
    ),
    scenario!(
        "rate-limit",
        "pump generator approaching K/T as kappa T -> 0"
    ),
    scenario!(
        "micro-macro-agreement",
        "coarse-grained micro vs macro trajectory, n_max = 30"
    ),
    scenario!(
        "steady-state-consistency",
        "macro steady state vs averaged micro limit cycle"
    ),
    scenario!(
        "structural-suite",
        "complete positivity, trace preservation, spectrum of L"
    ),
    scenario!(
        "analytic-decay",
        "free single-photon decay against exp(-kappa t)"
    ),
    scenario!(
        "stochastic-consistency",
        "realization ensemble vs averaged-kick evolution"
    ),
    scenario!(
        "pump-statistics-regular",
        "steady state for exactly one atom per tick"
    ),
    scenario!(
        "pump-statistics-bimodal",
        "steady state for zero or two atoms per tick"
    ),
    scenario!("theta-sweep", "two-point sweep over the interaction angle"),
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_scenario_validates() {
        for s in SCENARIOS {
            if let Err(e) = parse_config(s.config) {
                panic!("{}: {e}", s.name);
            }
        }
    }
}
