//! Declarative scenario files (TOML) and their resolution into core types.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use fixpoint_core::bellman::{DPInstance, Recursion};
use fixpoint_core::certify::{Condition, MapKind, MapSpec, Slack};
use fixpoint_core::gauge::{complement_gauge, midpoint_upgrade, paper_rho, product_gauge, CheckGrid, Gauge};
use fixpoint_core::metric::{validate_metric, FiniteMetricSpace, GridSpace, Point};
use fixpoint_core::potential::{build_potential_from_gauge, PairPotential, PointPotential, Upgrade};
use fixpoint_core::solver::StopRule;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Certify,
    Solve,
    Bellman,
    Oracle,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Certify => "certify",
            Action::Solve => "solve",
            Action::Bellman => "bellman",
            Action::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub action: Action,
    pub seed: Option<u64>,
    pub condition: Option<String>,
    /// Expected certificate outcome for `certify`.
    #[serde(default)]
    pub expect: Expect,
    /// Solve start: a grid coordinate (snapped) or a point index.
    pub start: Option<f64>,
    pub start_index: Option<usize>,
    pub space: Option<SpaceSpec>,
    pub map: Option<MapSpecConfig>,
    pub gauge: Option<GaugeSpec>,
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub stop: StopSpec,
    pub slack: Option<SlackSpec>,
    pub check_grid: Option<GridSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    pub bellman: Option<BellmanSpec>,
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Grid {
        lower: f64,
        upper: f64,
        resolution: usize,
    },
    Table {
        labels: Option<Vec<String>>,
        dist: Vec<Vec<f64>>,
    },
    Line {
        coords: Vec<f64>,
    },
}

/// A real function used as one branch of a map defined on a grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Branch {
    /// `a * x + b`
    Affine { a: f64, #[serde(default)] b: f64 },
    /// `x / by`
    Divide { by: f64 },
    /// `x^2 / (1 + x)`
    SquareRatio,
    Constant { value: f64 },
    Identity,
}

impl Branch {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Branch::Affine { a, b } => a * x + b,
            Branch::Divide { by } => x / by,
            Branch::SquareRatio => x * x / (1.0 + x),
            Branch::Constant { value } => value,
            Branch::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKindSpec {
    Single,
    Multi,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpecConfig {
    pub kind: MapKindSpec,
    /// Grid spaces only.
    pub branches: Option<Vec<Branch>>,
    /// Point indices per point.
    pub images: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    Linear { alpha: f64 },
    Constant { value: f64 },
    Zero,
    Rational,
    Sqrt,
    MinOne,
    PaperRho,
    Midpoint { inner: Box<GaugeSpec> },
    Product { inner: Box<GaugeSpec> },
    Complement { inner: Box<GaugeSpec> },
}

impl GaugeSpec {
    pub fn build(&self, grid: &CheckGrid) -> Result<Gauge, ScenarioError> {
        Ok(match self {
            GaugeSpec::Linear { alpha } => Gauge::linear(*alpha),
            GaugeSpec::Constant { value } => Gauge::constant(*value),
            GaugeSpec::Zero => Gauge::zero(),
            GaugeSpec::Rational => Gauge::rational(),
            GaugeSpec::Sqrt => Gauge::sqrt(),
            GaugeSpec::MinOne => Gauge::min_one(),
            GaugeSpec::PaperRho => paper_rho(),
            GaugeSpec::Midpoint { inner } => midpoint_upgrade(&inner.build(grid)?),
            GaugeSpec::Product { inner } => {
                product_gauge(&inner.build(grid)?, grid).map_err(|e| invalid(e.to_string()))?
            }
            GaugeSpec::Complement { inner } => {
                complement_gauge(&inner.build(grid)?, grid).map_err(|e| invalid(e.to_string()))?
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Point potential `phi`, one value per point.
    Point { values: Vec<f64> },
    /// Point potential `phi(x) = factor * coord(x)` on a grid.
    CoordScaled { factor: f64 },
    /// `Phi(x, y) = factor * d(x, y)`.
    ScaledDistance { factor: f64 },
    PairTable { values: Vec<Vec<f64>> },
    FromGauge {
        gauge: GaugeSpec,
        #[serde(default)]
        midpoint: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    StopRule::default().tol()
}

fn default_max_iter() -> usize {
    StopRule::default().max_iter()
}

impl Default for StopSpec {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackSpec {
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report file name inside the output directory; defaults to
    /// `<name>.report.toml`.
    pub report: Option<String>,
    /// Trace file name; defaults to `<name>.trace.jsonl`.
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecursionSpec {
    /// `I(x, y, r) = c * r + b` everywhere.
    Linear { c: f64, #[serde(default)] b: f64 },
    /// Per state/decision coefficients.
    LinearTable { c: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    ClippedLinear { c: f64, #[serde(default)] b: f64, lo: f64, hi: f64 },
    Constant { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellmanSpec {
    pub states: Vec<String>,
    pub decisions: Vec<String>,
    pub reward: Vec<Vec<f64>>,
    pub transition: Vec<Vec<usize>>,
    pub recursion: RecursionSpec,
    pub rho: GaugeSpec,
    pub h0: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    /// Expected outcome of the sampled recursion condition.
    #[serde(default)]
    pub expect_condition: Expect,
}

fn default_samples() -> usize {
    200
}

fn default_range() -> [f64; 2] {
    [-10.0, 10.0]
}

/// Seeded sweep over random multi-valued maps.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub instances: usize,
    pub max_points: usize,
    #[serde(default = "default_max_image")]
    pub max_image: usize,
    pub eta: GaugeSpec,
}

fn default_max_image() -> usize {
    3
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub action: Option<Action>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub slack: Option<f64>,
    pub condition: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str, path: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ScenarioError> {
        let display = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|source| ScenarioError::Io {
            path: display.clone(),
            source,
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|e| ScenarioError::Parse {
            path: display.clone(),
            message: e.to_string(),
        })?;
        Ok((Self::parse(text, &display)?, bytes))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.action {
            self.action = a;
        }
        if let Some(t) = o.tol {
            self.stop.tol = t;
        }
        if let Some(m) = o.max_iter {
            self.stop.max_iter = m;
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(s) = o.slack {
            self.slack = Some(SlackSpec { abs: s, rel: s });
        }
        if let Some(c) = &o.condition {
            self.condition = Some(c.clone());
        }
    }

    pub fn report_name(&self) -> String {
        self.output.report.clone().unwrap_or_else(|| format!("{}.report.toml", self.name))
    }

    pub fn trace_name(&self) -> String {
        self.output.trace.clone().unwrap_or_else(|| format!("{}.trace.jsonl", self.name))
    }

    pub fn slack(&self) -> Slack {
        self.slack.map(|s| Slack { abs: s.abs, rel: s.rel }).unwrap_or_default()
    }

    pub fn stop_rule(&self) -> Result<StopRule, ScenarioError> {
        StopRule::new(self.stop.tol, self.stop.max_iter).map_err(|e| invalid(e.to_string()))
    }

    pub fn check_grid(&self) -> Result<Option<CheckGrid>, ScenarioError> {
        self.check_grid
            .map(|g| CheckGrid::new(g.t_min, g.t_max, g.count).map_err(|e| invalid(e.to_string())))
            .transpose()
    }

    pub fn condition(&self) -> Result<Condition, ScenarioError> {
        let name = self
            .condition
            .as_deref()
            .ok_or_else(|| invalid(format!("action `{}` needs `condition`", self.action.name())))?;
        name.parse().map_err(|_| invalid(format!("unknown condition `{name}`")))
    }

    pub fn require_seed(&self) -> Result<u64, ScenarioError> {
        self.seed
            .ok_or_else(|| invalid(format!("action `{}` is randomized and needs `seed`", self.action.name())))
    }
}

/// A resolved space: the metric, plus the grid when there is one.
pub struct ResolvedSpace {
    pub space: FiniteMetricSpace,
    pub grid: Option<GridSpace>,
}

impl ResolvedSpace {
    pub fn coord(&self, p: Point) -> Option<f64> {
        self.grid.as_ref().map(|g| g.coord(p))
    }
}

pub fn resolve_space(spec: &SpaceSpec) -> Result<ResolvedSpace, ScenarioError> {
    let (space, grid) = match spec {
        SpaceSpec::Grid {
            lower,
            upper,
            resolution,
        } => {
            let grid = GridSpace::new(*lower, *upper, *resolution).map_err(|e| invalid(e.to_string()))?;
            (grid.space().clone(), Some(grid))
        }
        SpaceSpec::Table { labels, dist } => {
            let labels = labels.clone().unwrap_or_else(|| (0..dist.len()).map(|i| format!("p{i}")).collect());
            let space = FiniteMetricSpace::from_table(labels, dist.clone()).map_err(|e| invalid(e.to_string()))?;
            (space, None)
        }
        SpaceSpec::Line { coords } => (
            FiniteMetricSpace::on_line(coords).map_err(|e| invalid(e.to_string()))?,
            None,
        ),
    };
    // line and grid distances are metrics by construction; tables are checked
    if matches!(spec, SpaceSpec::Table { .. }) {
        if let Some(v) = validate_metric(&space).violations.first() {
            return Err(invalid(format!("space is not a metric: {v}")));
        }
    }
    Ok(ResolvedSpace { space, grid })
}

pub fn resolve_map(spec: &MapSpecConfig, rs: &ResolvedSpace) -> Result<MapSpec, ScenarioError> {
    let kind = match spec.kind {
        MapKindSpec::Single => MapKind::Single,
        MapKindSpec::Multi => MapKind::Multi,
    };
    match (&spec.branches, &spec.images) {
        (Some(branches), None) => {
            let grid = rs
                .grid
                .as_ref()
                .ok_or_else(|| invalid("map `branches` need a grid space"))?;
            if branches.is_empty() || (kind == MapKind::Single && branches.len() != 1) {
                return Err(invalid("single maps take one branch, multi maps at least one"));
            }
            MapSpec::on_grid(grid, kind, |x| branches.iter().map(|b| b.eval(x)).collect())
                .map_err(|e| invalid(e.to_string()))
        }
        (None, Some(images)) => {
            let pts = |v: &Vec<usize>| v.iter().map(|&i| Point(i)).collect::<Vec<_>>();
            let r = match kind {
                MapKind::Single => {
                    let single = images
                        .iter()
                        .map(|v| match v.as_slice() {
                            [i] => Ok(Point(*i)),
                            _ => Err(invalid("single map images must have exactly one point")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    MapSpec::single(&rs.space, single)
                }
                MapKind::Multi => MapSpec::multi(&rs.space, images.iter().map(pts).collect()),
            };
            r.map_err(|e| invalid(e.to_string()))
        }
        _ => Err(invalid("map needs exactly one of `branches` or `images`")),
    }
}

pub enum ResolvedPotential {
    Point(PointPotential),
    Pair(PairPotential),
}

pub fn resolve_potential(
    spec: &PotentialSpec,
    rs: &ResolvedSpace,
    grid: &CheckGrid,
) -> Result<ResolvedPotential, ScenarioError> {
    let err = |e: fixpoint_core::potential::PotentialError| invalid(e.to_string());
    Ok(match spec {
        PotentialSpec::Point { values } => {
            if values.len() != rs.space.len() {
                return Err(invalid(format!(
                    "potential has {} values, space has {} points",
                    values.len(),
                    rs.space.len()
                )));
            }
            ResolvedPotential::Point(PointPotential::new(values.clone()).map_err(err)?)
        }
        PotentialSpec::CoordScaled { factor } => {
            let grid_space = rs.grid.as_ref().ok_or_else(|| invalid("`coord_scaled` needs a grid space"))?;
            let values = grid_space.coords().iter().map(|c| factor * c).collect();
            ResolvedPotential::Point(PointPotential::new(values).map_err(err)?)
        }
        PotentialSpec::ScaledDistance { factor } => ResolvedPotential::Pair(PairPotential::scaled_distance(*factor)),
        PotentialSpec::PairTable { values } => {
            ResolvedPotential::Pair(PairPotential::from_table(values.clone()).map_err(err)?)
        }
        PotentialSpec::FromGauge { gauge, midpoint } => {
            let eta = gauge.build(grid)?;
            let upgrade = if *midpoint { Upgrade::Midpoint } else { Upgrade::None };
            ResolvedPotential::Pair(build_potential_from_gauge(&eta, upgrade, grid).map_err(err)?)
        }
    })
}

pub fn resolve_bellman(spec: &BellmanSpec, grid: &CheckGrid) -> Result<DPInstance, ScenarioError> {
    let (n, m) = (spec.states.len(), spec.decisions.len());
    let recursion = match &spec.recursion {
        RecursionSpec::Linear { c, b } => Recursion::Linear {
            c: vec![vec![*c; m]; n],
            b: vec![vec![*b; m]; n],
        },
        RecursionSpec::LinearTable { c, b } => Recursion::Linear { c: c.clone(), b: b.clone() },
        RecursionSpec::ClippedLinear { c, b, lo, hi } => Recursion::ClippedLinear {
            c: vec![vec![*c; m]; n],
            b: vec![vec![*b; m]; n],
            lo: *lo,
            hi: *hi,
        },
        RecursionSpec::Constant { values } => Recursion::Constant(values.clone()),
    };
    DPInstance::new(
        spec.states.clone(),
        spec.decisions.clone(),
        spec.reward.clone(),
        spec.transition.clone(),
        recursion,
        spec.rho.build(grid)?,
    )
    .map_err(|e| invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_gauges() {
        let s = Scenario::parse(
            r#"
            name = "t"
            action = "certify"
            condition = "mt"
            gauge = { kind = "product", inner = { kind = "constant", value = 0.5 } }
            "#,
            "t.toml",
        )
        .unwrap();
        let g = s.gauge.unwrap().build(&CheckGrid::default()).unwrap();
        assert_eq!(g.eval(2.0), 1.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = Scenario::parse("name = \"t\"\naction = \"certify\"\nbogus = 1\n", "t.toml");
        assert!(matches!(e, Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn non_metric_table_is_invalid() {
        let spec = SpaceSpec::Table {
            labels: None,
            dist: vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]],
        };
        assert!(matches!(resolve_space(&spec), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn overrides_win() {
        let mut s = Scenario::parse("name = \"t\"\naction = \"certify\"\n", "t.toml").unwrap();
        s.apply(&Overrides {
            action: Some(Action::Solve),
            max_iter: Some(7),
            seed: Some(3),
            ..Default::default()
        });
        assert_eq!(s.action, Action::Solve);
        assert_eq!(s.stop.max_iter, 7);
        assert_eq!(s.seed, Some(3));
    }
}
