//! Verification reports and their JSON and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::HarnessError;

/// Decimal rendering with 17 significant digits.
pub fn decimal(x: f64) -> String {
    format!("{x:.16e}")
}

/// One executed check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Measured residual, ratio or count.
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_most: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<[String; 2]>,
    pub passed: bool,
    /// Set when the computation itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub checks: BTreeMap<String, Check>,
    /// Condition numbers of the kernels involved.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub conditions: BTreeMap<String, String>,
    /// Informational quantities (integral values, scales, draw counts).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<String>,
}

/// Accumulates the checks of one suite; each name may be recorded once.
#[derive(Default)]
pub struct SuiteBuilder {
    report: SuiteReport,
}

impl SuiteBuilder {
    fn insert(&mut self, name: &str, check: Check) {
        let previous = self.report.checks.insert(name.to_string(), check);
        assert!(previous.is_none(), "check `{name}` recorded twice");
    }

    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.insert(
            name,
            Check {
                value: decimal(value),
                at_most: Some(decimal(bound)),
                within: None,
                passed: value <= bound,
                error: None,
            },
        );
    }

    pub fn within(&mut self, name: &str, value: f64, [lo, hi]: [f64; 2]) {
        self.insert(
            name,
            Check {
                value: decimal(value),
                at_most: None,
                within: Some([decimal(lo), decimal(hi)]),
                passed: lo <= value && value <= hi,
                error: None,
            },
        );
    }

    pub fn failed(&mut self, name: &str, error: impl std::fmt::Display) {
        self.insert(
            name,
            Check {
                value: "NaN".into(),
                at_most: None,
                within: None,
                passed: false,
                error: Some(error.to_string()),
            },
        );
    }

    /// Records `at_most` for a successful computation, a failure otherwise.
    pub fn residual<E: std::fmt::Display>(
        &mut self,
        name: &str,
        value: Result<f64, E>,
        bound: f64,
    ) {
        match value {
            Ok(v) => self.at_most(name, v, bound),
            Err(e) => self.failed(name, e),
        }
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.report.values.insert(name.to_string(), decimal(v));
    }

    pub fn condition(&mut self, name: &str, v: f64) {
        self.report.conditions.insert(name.to_string(), decimal(v));
    }

    pub fn finish(mut self) -> SuiteReport {
        self.report.passed = self.report.checks.values().all(|c| c.passed);
        self.report
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub version: String,
}

impl Default for Artifact {
    fn default() -> Self {
        Artifact {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub failed: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub artifact: Artifact,
    pub config: ScenarioConfig,
    pub suites: BTreeMap<String, SuiteReport>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: ScenarioConfig, suites: BTreeMap<String, SuiteReport>) -> Self {
        let checks = suites.values().map(|s| s.checks.len()).sum();
        let failed = suites
            .values()
            .flat_map(|s| s.checks.values())
            .filter(|c| !c.passed)
            .count();
        Report {
            artifact: Artifact::default(),
            config,
            suites,
            summary: Summary {
                checks,
                failed,
                passed: failed == 0,
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// `(suite, check)` pairs that failed, in report order.
    pub fn failures(&self) -> Vec<(String, String)> {
        self.suites
            .iter()
            .flat_map(|(s, r)| {
                r.checks
                    .iter()
                    .filter(|(_, c)| !c.passed)
                    .map(move |(c, _)| (s.clone(), c.clone()))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(HarnessError::Format(other.to_string())),
        }
    }
}

/// JSON with keys in sorted order, or a plain table.
pub fn emit_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            // `Value` objects are sorted maps, so every key is emitted in order
            let value = serde_json::to_value(report).expect("reports are plain data");
            let mut out = serde_json::to_string_pretty(&value).expect("reports are plain data");
            out.push('\n');
            out.into_bytes()
        }
        Format::Text => render_text(report).into_bytes(),
    }
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {}  seed {}",
        report.artifact.name, report.artifact.version, report.config.seed
    );
    let width = report
        .suites
        .values()
        .flat_map(|s| s.checks.keys())
        .map(|k| k.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    for (name, suite) in &report.suites {
        let _ = writeln!(
            out,
            "\n[{}] {}",
            if suite.passed { "pass" } else { "FAIL" },
            name
        );
        for (check, c) in &suite.checks {
            let bound = match (&c.at_most, &c.within) {
                (Some(b), _) => format!("<= {b}"),
                (_, Some([lo, hi])) => format!("in [{lo}, {hi}]"),
                _ => String::new(),
            };
            let pad = width - check.chars().count();
            let _ = write!(
                out,
                "  {} {check}{:pad$}  {:>24}  {bound}",
                if c.passed { "ok  " } else { "FAIL" },
                "",
                c.value
            );
            if let Some(e) = &c.error {
                let _ = write!(out, "  ({e})");
            }
            out.push('\n');
        }
    }
    let _ = writeln!(
        out,
        "\n{} checks, {} failed: {}",
        report.summary.checks,
        report.summary.failed,
        if report.passed() { "PASS" } else { "FAIL" }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut b = SuiteBuilder::default();
        b.at_most("residual", 1.25e-13, 1e-11);
        b.within("ratio", 31.9, [16.0, 64.0]);
        b.value("draws", 100.0);
        let mut suites = BTreeMap::new();
        suites.insert("woodbury".to_string(), b.finish());
        Report::new(ScenarioConfig::new(1), suites)
    }

    #[test]
    fn decimals_carry_seventeen_digits() {
        assert_eq!(decimal(0.1), "1.0000000000000001e-1");
        assert_eq!(decimal(1e-11), "9.9999999999999994e-12");
        assert_eq!(decimal(1e-10), "1.0000000000000000e-10");
        assert_eq!(decimal(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn empty_report_has_metadata_only() {
        let r = Report::new(ScenarioConfig::new(1), BTreeMap::new());
        assert!(r.passed());
        assert_eq!(r.summary.checks, 0);
        let json: serde_json::Value =
            serde_json::from_slice(&emit_report(&r, Format::Json)).unwrap();
        assert_eq!(json["suites"], serde_json::json!({}));
        assert!(json["artifact"]["version"].is_string());
    }

    #[test]
    fn json_round_trips_with_sorted_keys() {
        let r = sample();
        let bytes = emit_report(&r, Format::Json);
        let back: Report = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, r);
        let text = String::from_utf8(bytes).unwrap();
        let keys = ["\"artifact\"", "\"config\"", "\"suites\"", "\"summary\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("\"value\": \"1.2500000000000000e-13\""));
    }

    #[test]
    fn failures_are_listed() {
        let mut b = SuiteBuilder::default();
        b.at_most("small", 1.0, 0.5);
        b.failed("broken", "not invertible");
        let mut suites = BTreeMap::new();
        suites.insert("qcheck".to_string(), b.finish());
        let r = Report::new(ScenarioConfig::new(1), suites);
        assert!(!r.passed());
        assert_eq!(r.summary.failed, 2);
        assert_eq!(
            r.failures()[0],
            ("qcheck".to_string(), "broken".to_string())
        );
        let text = String::from_utf8(emit_report(&r, Format::Text)).unwrap();
        assert!(text.contains("FAIL") && text.contains("not invertible"));
    }

    #[test]
    fn unknown_formats_are_rejected() {
        assert_eq!("text".parse::<Format>().unwrap(), Format::Text);
        assert!(matches!(
            "yaml".parse::<Format>(),
            Err(HarnessError::Format(_))
        ));
    }

    #[test]
    #[should_panic(expected = "recorded twice")]
    fn checks_are_recorded_once() {
        let mut b = SuiteBuilder::default();
        b.at_most("x", 0.0, 1.0);
        b.at_most("x", 0.0, 1.0);
    }
}
