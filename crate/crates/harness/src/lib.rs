//! Scenario-driven verification of one block-spin step: builds the step data
//! described by a scenario file, runs the named suites and assembles a
//! deterministic report.

pub mod config;
pub mod error;
pub mod model;
pub mod report;
pub mod suites;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ScenarioConfig, SuiteName};
pub use error::HarnessError;
pub use report::{emit_report, Format, Report, SuiteReport};

/// Runs every requested suite. Suites run in parallel, each on its own
/// generator stream, and the report is ordered by suite name, so the same
/// config gives the same report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report, HarnessError> {
    let suites: BTreeSet<SuiteName> = cfg.suites.iter().copied().collect();
    let spec = if suites.iter().any(|&s| suites::uses_model(s)) {
        Some(model::build_spec(cfg)?)
    } else {
        None
    };
    let results: Vec<(String, SuiteReport)> = suites
        .into_par_iter()
        .map(|s| {
            let start = Instant::now();
            let mut r = suites::run_suite(s, cfg, spec.as_ref());
            if cfg.record_timings {
                r.seconds = Some(report::decimal(start.elapsed().as_secs_f64()));
            }
            (s.as_str().to_string(), r)
        })
        .collect();
    Ok(Report::new(
        cfg.clone(),
        results.into_iter().collect::<BTreeMap<_, _>>(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_list_gives_an_empty_passing_report() {
        let r = run_scenario(&ScenarioConfig::new(1)).unwrap();
        assert!(r.passed() && r.suites.is_empty());
    }

    #[test]
    fn single_woodbury_suite() {
        let mut cfg = ScenarioConfig::new(1);
        cfg.suites = vec![SuiteName::Woodbury];
        let r = run_scenario(&cfg).unwrap();
        assert!(r.passed());
        assert_eq!(r.suites.len(), 1);
        let json = String::from_utf8(emit_report(&r, Format::Json)).unwrap();
        assert!(!json.contains("seconds"));
    }

    #[test]
    fn timings_only_when_requested() {
        let mut cfg = ScenarioConfig::new(1);
        cfg.suites = vec![SuiteName::Lattice];
        cfg.record_timings = true;
        let r = run_scenario(&cfg).unwrap();
        assert!(r.suites["lattice"].seconds.is_some());
    }
}
