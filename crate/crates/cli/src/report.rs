//! Report records. Reports are TOML; the first line is a `#` comment holding
//! the wall-clock timestamp so that the body stays byte-identical between
//! runs of the same scenario.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use fixpoint_core::bellman::ConditionReport;
use fixpoint_core::certify::Certificate;
use fixpoint_core::metric::FiniteMetricSpace;
use fixpoint_core::solver::TelescopeReport;

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub x: usize,
    pub y: usize,
    pub x_label: String,
    pub y_label: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    pub condition: String,
    pub passed: bool,
    pub constant_name: String,
    pub constant: f64,
    pub image_metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<String>,
    pub pairs_checked: usize,
    pub selections: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
}

impl CertificateRecord {
    pub fn new(cert: &Certificate, space: &FiniteMetricSpace) -> Self {
        Self {
            condition: cert.condition.name().to_owned(),
            passed: cert.passed,
            constant_name: cert.constant_name.to_owned(),
            constant: cert.constant,
            image_metric: cert.image_metric.name().to_owned(),
            reduction: cert.reduction.clone(),
            pairs_checked: cert.pairs_checked,
            selections: cert.selections.len(),
            witness: cert.witness.map(|w| WitnessRecord {
                x: w.x.0,
                y: w.y.0,
                x_label: space.label(w.x).to_owned(),
                y_label: space.label(w.y).to_owned(),
                lhs: w.lhs,
                rhs: w.rhs,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub method: String,
    pub start: usize,
    pub status: String,
    pub steps: usize,
    pub last: usize,
    pub last_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_coord: Option<f64>,
    pub is_fixed: bool,
    /// Every fixed point of the map, by exhaustive enumeration.
    pub fixed_points: Vec<usize>,
    pub in_fixed_point_set: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TelescopeRecord {
    pub potential: String,
    pub passed: bool,
    pub pairs_checked: usize,
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[usize; 2]>,
}

impl TelescopeRecord {
    pub fn new(potential: &str, r: &TelescopeReport) -> Self {
        Self {
            potential: potential.to_owned(),
            passed: r.passed,
            pairs_checked: r.pairs_checked,
            worst_margin: r.worst_margin,
            witness: r.witness.map(|(n, m)| [n, m]),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionWitnessRecord {
    pub sample: usize,
    pub x: usize,
    pub y: usize,
    pub gap: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRecord {
    pub passed: bool,
    pub expected_pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub range: [f64; 2],
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ConditionWitnessRecord>,
}

impl ConditionRecord {
    pub fn new(r: &ConditionReport, expected_pass: bool) -> Self {
        Self {
            passed: r.passed,
            expected_pass,
            samples: r.samples,
            seed: r.seed,
            range: [r.range.0, r.range.1],
            worst_margin: r.worst_margin,
            witness: r.witness.map(|w| ConditionWitnessRecord {
                sample: w.sample,
                x: w.x,
                y: w.y,
                gap: w.gap,
                lhs: w.lhs,
                rhs: w.rhs,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BellmanRecord {
    pub contraction_asserted: bool,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub values: Vec<f64>,
    pub policy: Vec<String>,
    pub condition: ConditionRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRecord {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_points: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failures: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub scenario_sha256: String,
    pub action: String,
    pub passed: bool,
    pub exit_code: i32,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telescoping: Option<TelescopeRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bellman: Option<BellmanRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleRecord>,
}

impl Report {
    pub fn new(scenario: &str, sha256: &str, action: &str) -> Self {
        Self {
            scenario: scenario.to_owned(),
            scenario_sha256: sha256.to_owned(),
            action: action.to_owned(),
            passed: false,
            exit_code: 0,
            outcome: String::new(),
            message: None,
            trace: None,
            certificate: None,
            solve: None,
            telescoping: None,
            bellman: None,
            oracle: None,
        }
    }

    pub fn body(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "# generated_unix={stamp}")?;
        f.write_all(self.body().as_bytes())
    }
}

/// Report body without the timestamp header line.
pub fn strip_header(text: &str) -> &str {
    match text.strip_prefix("# generated_unix=") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}
