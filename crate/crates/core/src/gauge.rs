//! Gauge (comparison) functions on `[0, inf)` and sampled property checks.
//!
//! A gauge is an opaque function together with the properties it claims.
//! "For all t > 0" is checked on a geometric [`CheckGrid`]; every report
//! carries the grid it was computed on so failures can be reproduced.
//! Semi-continuity is declared, never checked.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Slack for monotonicity comparisons of composed gauges.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Estimates of `limsup eta` must stay below `1 - LIMSUP_MARGIN`.
pub const LIMSUP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GaugeProp {
    BelowIdentity,
    RatioNondecreasing,
    RatioNonincreasing,
    Nondecreasing,
    RangeSubOne,
}

impl GaugeProp {
    pub fn name(self) -> &'static str {
        match self {
            GaugeProp::BelowIdentity => "below_identity",
            GaugeProp::RatioNondecreasing => "ratio_nondecreasing",
            GaugeProp::RatioNonincreasing => "ratio_nonincreasing",
            GaugeProp::Nondecreasing => "nondecreasing",
            GaugeProp::RangeSubOne => "range_sub_one",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("gauge `{gauge}` returned non-finite value {value} at t={t}")]
    NonFinite { gauge: String, t: f64, value: f64 },
    #[error("gauge `{gauge}` returned negative value {value} at t={t}")]
    Negative { gauge: String, t: f64, value: f64 },
    #[error("invalid check grid: {0}")]
    Grid(String),
    #[error("gauge `{gauge}` rejected: {check} fails at t={t} (value {value})")]
    Rejected {
        gauge: String,
        check: String,
        t: f64,
        value: f64,
    },
    #[error("transform output `{gauge}` fails {check} at t={t}")]
    Postcondition { gauge: String, check: String, t: f64 },
}

/// An evaluable function `[0, inf) -> [0, inf)` with a name and declared
/// properties.
#[derive(Clone)]
pub struct Gauge {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    props: BTreeSet<GaugeProp>,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge")
            .field("label", &self.label)
            .field("props", &self.props)
            .finish()
    }
}

impl Gauge {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            props: BTreeSet::new(),
        }
    }

    pub fn with_props(mut self, props: impl IntoIterator<Item = GaugeProp>) -> Self {
        self.props.extend(props);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared(&self) -> &BTreeSet<GaugeProp> {
        &self.props
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Evaluates and rejects negative or non-finite values.
    pub fn try_eval(&self, t: f64) -> Result<f64, GaugeError> {
        let value = self.eval(t);
        if !value.is_finite() {
            return Err(GaugeError::NonFinite {
                gauge: self.label.clone(),
                t,
                value,
            });
        }
        if value < 0.0 {
            return Err(GaugeError::Negative {
                gauge: self.label.clone(),
                t,
                value,
            });
        }
        Ok(value)
    }

    /// `t -> alpha * t`.
    pub fn linear(alpha: f64) -> Self {
        let mut props = vec![GaugeProp::RatioNondecreasing, GaugeProp::RatioNonincreasing];
        if alpha < 1.0 {
            props.push(GaugeProp::BelowIdentity);
        }
        if alpha >= 0.0 {
            props.push(GaugeProp::Nondecreasing);
        }
        Self::new(format!("linear({alpha})"), move |t| alpha * t).with_props(props)
    }

    /// `t -> c`.
    pub fn constant(c: f64) -> Self {
        let mut props = vec![GaugeProp::Nondecreasing];
        if (0.0..1.0).contains(&c) {
            props.push(GaugeProp::RangeSubOne);
        }
        Self::new(format!("constant({c})"), move |_| c).with_props(props)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0).with_props([
            GaugeProp::BelowIdentity,
            GaugeProp::RatioNondecreasing,
            GaugeProp::RatioNonincreasing,
            GaugeProp::Nondecreasing,
            GaugeProp::RangeSubOne,
        ])
    }

    /// `t -> t / (1 + t)`.
    pub fn rational() -> Self {
        Self::new("rational", |t| t / (1.0 + t)).with_props([
            GaugeProp::BelowIdentity,
            GaugeProp::RatioNonincreasing,
            GaugeProp::Nondecreasing,
            GaugeProp::RangeSubOne,
        ])
    }

    pub fn sqrt() -> Self {
        Self::new("sqrt", f64::sqrt).with_props([GaugeProp::RatioNonincreasing, GaugeProp::Nondecreasing])
    }

    pub fn min_one() -> Self {
        Self::new("min_one", |t: f64| t.min(1.0)).with_props([GaugeProp::Nondecreasing])
    }
}

/// `t^2 / 2` on `(0, 1)`, `2t / 3` on `[1, inf)`, and `0` at `0`.
pub fn paper_rho() -> Gauge {
    Gauge::new("paper_rho", |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t < 1.0 {
            0.5 * t * t
        } else {
            2.0 * t / 3.0
        }
    })
    .with_props([GaugeProp::BelowIdentity, GaugeProp::RatioNondecreasing, GaugeProp::Nondecreasing])
}

/// Geometric sample grid standing in for "all t > 0".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckGrid {
    t_min: f64,
    t_max: f64,
    count: usize,
}

impl Default for CheckGrid {
    fn default() -> Self {
        Self {
            t_min: 1e-3,
            t_max: 1e2,
            count: 10_000,
        }
    }
}

impl CheckGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self, GaugeError> {
        if !(t_min > 0.0 && t_min.is_finite()) {
            return Err(GaugeError::Grid(format!("t_min must be positive, got {t_min}")));
        }
        if !(t_min < t_max && t_max.is_finite()) {
            return Err(GaugeError::Grid(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if count < 2 {
            return Err(GaugeError::Grid(format!("need at least 2 samples, got {count}")));
        }
        Ok(Self { t_min, t_max, count })
    }

    /// Default grid widened to cover `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64) -> Self {
        let d = Self::default();
        let t_min = if lo > 0.0 && lo.is_finite() { d.t_min.min(lo) } else { d.t_min };
        let t_max = if hi.is_finite() { d.t_max.max(hi) } else { d.t_max };
        Self { t_min, t_max, ..d }
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sample(&self, i: usize) -> f64 {
        if i == 0 {
            return self.t_min;
        }
        if i + 1 == self.count {
            return self.t_max;
        }
        let frac = i as f64 / (self.count - 1) as f64;
        self.t_min * (self.t_max / self.t_min).powf(frac)
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.sample(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub gauge: String,
    pub grid: CheckGrid,
    pub passed: bool,
    /// First sample where the check failed.
    pub first_failure: Option<f64>,
    /// Check-specific extremum: sup ratio, largest monotonicity drop, or
    /// largest limsup estimate.
    pub extremum: f64,
}

impl CheckReport {
    fn new(check: &str, gauge: &Gauge, grid: CheckGrid) -> Self {
        Self {
            check: check.to_string(),
            gauge: gauge.label.clone(),
            grid,
            passed: true,
            first_failure: None,
            extremum: 0.0,
        }
    }

    fn fail_at(&mut self, t: f64) {
        if self.passed {
            self.passed = false;
            self.first_failure = Some(t);
        }
    }

    fn into_rejection(self, g: &Gauge) -> GaugeError {
        let t = self.first_failure.unwrap_or(f64::NAN);
        GaugeError::Rejected {
            gauge: g.label.clone(),
            check: self.check,
            t,
            value: g.eval(t),
        }
    }
}

/// Passes iff `g(t) < t - rel_slack * t` at every sample.
pub fn check_below_identity_with(g: &Gauge, grid: &CheckGrid, rel_slack: f64) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("below_identity", g, *grid);
    report.extremum = f64::NEG_INFINITY;
    for t in grid.samples() {
        let v = g.try_eval(t)?;
        report.extremum = report.extremum.max(v / t);
        if !(v < t - rel_slack * t) {
            report.fail_at(t);
        }
    }
    Ok(report)
}

pub fn check_below_identity(g: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    check_below_identity_with(g, grid, 0.0)
}

/// Monotonicity of `g(t) / t` along the grid, within [`MONOTONE_SLACK`].
pub fn check_ratio_monotone(g: &Gauge, grid: &CheckGrid, direction: Direction) -> Result<CheckReport, GaugeError> {
    let name = match direction {
        Direction::Nondecreasing => "ratio_nondecreasing",
        Direction::Nonincreasing => "ratio_nonincreasing",
    };
    let mut report = CheckReport::new(name, g, *grid);
    let mut prev: Option<f64> = None;
    for t in grid.samples() {
        let r = g.try_eval(t)? / t;
        if let Some(p) = prev {
            let drop = match direction {
                Direction::Nondecreasing => p - r,
                Direction::Nonincreasing => r - p,
            };
            report.extremum = report.extremum.max(drop);
            if drop > MONOTONE_SLACK * p.abs().max(1.0) {
                report.fail_at(t);
            }
        }
        prev = Some(r);
    }
    Ok(report)
}

pub fn check_nondecreasing(g: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("nondecreasing", g, *grid);
    let mut prev = g.try_eval(0.0)?;
    for t in grid.samples() {
        let v = g.try_eval(t)?;
        let drop = prev - v;
        report.extremum = report.extremum.max(drop);
        if drop > MONOTONE_SLACK * prev.abs().max(1.0) {
            report.fail_at(t);
        }
        prev = v;
    }
    Ok(report)
}

/// `0 <= g(t) < 1` at `t = 0` and every sample.
pub fn check_range_sub_one(g: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("range_sub_one", g, *grid);
    for t in std::iter::once(0.0).chain(grid.samples()) {
        let v = g.try_eval(t)?;
        report.extremum = report.extremum.max(v);
        if v >= 1.0 {
            report.fail_at(t);
        }
    }
    Ok(report)
}

fn check_positive(g: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("positive", g, *grid);
    report.extremum = f64::INFINITY;
    for t in grid.samples() {
        let v = g.try_eval(t)?;
        report.extremum = report.extremum.min(v);
        if v <= 0.0 {
            report.fail_at(t);
        }
    }
    Ok(report)
}

fn check_not_above_identity(g: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("not_above_identity", g, *grid);
    for t in grid.samples() {
        let v = g.try_eval(t)?;
        report.extremum = report.extremum.max(v / t);
        if v > t {
            report.fail_at(t);
        }
    }
    Ok(report)
}

/// Runs the sampled check matching each declared property.
pub fn verify_declared(g: &Gauge, grid: &CheckGrid) -> Result<Vec<CheckReport>, GaugeError> {
    g.declared()
        .iter()
        .map(|p| match p {
            GaugeProp::BelowIdentity => check_below_identity(g, grid),
            GaugeProp::RatioNondecreasing => check_ratio_monotone(g, grid, Direction::Nondecreasing),
            GaugeProp::RatioNonincreasing => check_ratio_monotone(g, grid, Direction::Nonincreasing),
            GaugeProp::Nondecreasing => check_nondecreasing(g, grid),
            GaugeProp::RangeSubOne => check_range_sub_one(g, grid),
        })
        .collect()
}

fn require(report: CheckReport, g: &Gauge) -> Result<(), GaugeError> {
    if report.passed {
        Ok(())
    } else {
        Err(report.into_rejection(g))
    }
}

fn ensure(report: CheckReport, g: &Gauge) -> Result<(), GaugeError> {
    if report.passed {
        Ok(())
    } else {
        Err(GaugeError::Postcondition {
            gauge: g.label.clone(),
            check: report.check,
            t: report.first_failure.unwrap_or(f64::NAN),
        })
    }
}

/// The gauge an admissible `eta` must satisfy for the multi-valued theorem:
/// below the identity with nondecreasing ratio.
pub fn require_admissible(g: &Gauge, grid: &CheckGrid) -> Result<(), GaugeError> {
    require(check_below_identity(g, grid)?, g)?;
    require(check_ratio_monotone(g, grid, Direction::Nondecreasing)?, g)
}

/// `theta(t) = (eta(t) + t) / 2`. Strictly between `eta` and the identity
/// whenever `eta` is below it.
pub fn midpoint_upgrade(eta: &Gauge) -> Gauge {
    let inner = eta.clone();
    let props: Vec<GaugeProp> = eta
        .declared()
        .iter()
        .copied()
        .filter(|p| {
            matches!(
                p,
                GaugeProp::BelowIdentity | GaugeProp::RatioNondecreasing | GaugeProp::RatioNonincreasing
            )
        })
        .collect();
    Gauge::new(format!("midpoint({})", eta.label), move |t| 0.5 * (inner.eval(t) + t)).with_props(props)
}

/// `theta(t) = eta(t) * t` for `eta` nondecreasing into `[0, 1)`.
pub fn product_gauge(eta: &Gauge, grid: &CheckGrid) -> Result<Gauge, GaugeError> {
    require(check_range_sub_one(eta, grid)?, eta)?;
    require(check_nondecreasing(eta, grid)?, eta)?;
    let inner = eta.clone();
    let theta = Gauge::new(format!("product({})", eta.label), move |t| inner.eval(t) * t)
        .with_props([GaugeProp::BelowIdentity, GaugeProp::RatioNondecreasing]);
    ensure(check_below_identity(&theta, grid)?, &theta)?;
    ensure(check_ratio_monotone(&theta, grid, Direction::Nondecreasing)?, &theta)?;
    Ok(theta)
}

/// `eta(t) = t - theta(t)` for positive `theta <= t` with nonincreasing ratio.
pub fn complement_gauge(theta: &Gauge, grid: &CheckGrid) -> Result<Gauge, GaugeError> {
    require(check_not_above_identity(theta, grid)?, theta)?;
    require(check_positive(theta, grid)?, theta)?;
    require(check_ratio_monotone(theta, grid, Direction::Nonincreasing)?, theta)?;
    let inner = theta.clone();
    let eta = Gauge::new(format!("complement({})", theta.label), move |t| {
        if t <= 0.0 {
            0.0
        } else {
            t - inner.eval(t)
        }
    })
    .with_props([GaugeProp::BelowIdentity, GaugeProp::RatioNondecreasing]);
    ensure(check_below_identity(&eta, grid)?, &eta)?;
    ensure(check_ratio_monotone(&eta, grid, Direction::Nondecreasing)?, &eta)?;
    Ok(eta)
}

/// Estimates `sup eta` over `(s, s + delta]` for three dyadic refinements of
/// `delta` at each sample `s`, and passes iff every estimate stays below
/// `1 - LIMSUP_MARGIN`. A non-monotone `eta` fails outright.
pub fn check_limsup_below_one(eta: &Gauge, grid: &CheckGrid) -> Result<CheckReport, GaugeError> {
    let mut report = CheckReport::new("limsup_below_one", eta, *grid);
    let monotone = check_nondecreasing(eta, grid)?;
    if !monotone.passed {
        report.passed = false;
        report.first_failure = monotone.first_failure;
        return Ok(report);
    }
    const POINTS_PER_WINDOW: usize = 4;
    let n = grid.count();
    for i in 0..n {
        let s = grid.sample(i);
        let base = if i + 1 < n {
            grid.sample(i + 1) - s
        } else {
            s - grid.sample(i - 1)
        };
        for k in 0..3 {
            let delta = base / f64::from(1u32 << k);
            let mut sup = f64::NEG_INFINITY;
            for j in 1..=POINTS_PER_WINDOW {
                let t = s + delta * j as f64 / POINTS_PER_WINDOW as f64;
                sup = sup.max(eta.try_eval(t)?);
            }
            report.extremum = report.extremum.max(sup);
            if !(sup < 1.0 - LIMSUP_MARGIN) {
                report.fail_at(s);
            }
        }
    }
    Ok(report)
}
