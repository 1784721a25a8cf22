//! Finite metric spaces.
//!
//! A [`FiniteMetricSpace`] is a list of labelled points plus a dense distance
//! table. Construction only checks the table's shape; the metric axioms are
//! checked by [`validate_metric`], which reports every violation as data.

use std::fmt;

use thiserror::Error;

/// Triangle slack used for tables computed from coordinates.
pub const DERIVED_TRIANGLE_SLACK: f64 = 1e-12;

/// Index of a point in its host space. Index order is the tie-break order
/// everywhere downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point(pub usize);

impl Point {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("a metric space needs at least one point")]
    NoPoints,
    #[error("distance table has {rows} rows but {points} points were declared")]
    RowCount { rows: usize, points: usize },
    #[error("distance table row {row} has {len} entries, expected {points}")]
    RowLength { row: usize, len: usize, points: usize },
    #[error("point set is empty")]
    EmptySet,
    #[error("point {0} is not in the space")]
    UnknownPoint(Point),
    #[error("grid needs lower < upper, got [{lower}, {upper}]")]
    GridBounds { lower: f64, upper: f64 },
    #[error("grid resolution must be at least 2, got {0}")]
    GridResolution(usize),
}

/// A nonempty, sorted, duplicate-free set of points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointSet(Vec<Point>);

impl PointSet {
    pub fn new(members: impl IntoIterator<Item = Point>) -> Result<Self, MetricError> {
        let mut members: Vec<Point> = members.into_iter().collect();
        if members.is_empty() {
            return Err(MetricError::EmptySet);
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self(members))
    }

    pub fn singleton(p: Point) -> Self {
        Self(vec![p])
    }

    pub fn members(&self) -> &[Point] {
        &self.0
    }

    pub fn contains(&self, p: Point) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::ops::Deref for PointSet {
    type Target = [Point];

    fn deref(&self) -> &[Point] {
        &self.0
    }
}

/// Points plus a dense distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    triangle_slack: f64,
}

impl FiniteMetricSpace {
    /// Builds a space from an explicit table. Axiom checks on such tables are
    /// exact.
    pub fn from_table(labels: Vec<String>, table: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = labels.len();
        if n == 0 {
            return Err(MetricError::NoPoints);
        }
        if table.len() != n {
            return Err(MetricError::RowCount {
                rows: table.len(),
                points: n,
            });
        }
        let mut dist = Vec::with_capacity(n * n);
        for (row, entries) in table.into_iter().enumerate() {
            if entries.len() != n {
                return Err(MetricError::RowLength {
                    row,
                    len: entries.len(),
                    points: n,
                });
            }
            dist.extend(entries);
        }
        Ok(Self {
            labels,
            dist,
            triangle_slack: 0.0,
        })
    }

    /// Builds a space from a distance function; the table is treated as
    /// derived, so triangle checks get [`DERIVED_TRIANGLE_SLACK`].
    pub fn from_fn(labels: Vec<String>, d: impl Fn(usize, usize) -> f64) -> Result<Self, MetricError> {
        let n = labels.len();
        if n == 0 {
            return Err(MetricError::NoPoints);
        }
        let mut dist = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                dist.push(d(i, j));
            }
        }
        Ok(Self {
            labels,
            dist,
            triangle_slack: DERIVED_TRIANGLE_SLACK,
        })
    }

    /// Points on the real line with `|x - y|` distances.
    pub fn on_line(coords: &[f64]) -> Result<Self, MetricError> {
        let labels = coords.iter().map(|x| format!("{x}")).collect();
        Self::from_fn(labels, |i, j| (coords[i] - coords[j]).abs())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + Clone {
        (0..self.len()).map(Point)
    }

    pub fn label(&self, p: Point) -> &str {
        &self.labels[p.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn triangle_slack(&self) -> f64 {
        self.triangle_slack
    }

    pub fn with_triangle_slack(mut self, slack: f64) -> Self {
        self.triangle_slack = slack;
        self
    }

    #[inline]
    pub fn dist(&self, a: Point, b: Point) -> f64 {
        self.dist[a.0 * self.len() + b.0]
    }

    pub fn contains(&self, p: Point) -> bool {
        p.0 < self.len()
    }

    pub fn check_point(&self, p: Point) -> Result<(), MetricError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(MetricError::UnknownPoint(p))
        }
    }

    /// Overwrites one table entry. Only the entry `(a, b)` changes, so this can
    /// produce a non-metric table on purpose.
    pub fn set_dist(&mut self, a: Point, b: Point, value: f64) {
        let n = self.len();
        self.dist[a.0 * n + b.0] = value;
    }

    /// Smallest positive and largest table entry, if any pair is distinct.
    pub fn distance_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for &d in &self.dist {
            if d > 0.0 && d.is_finite() {
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (hi > 0.0).then_some((lo, hi))
    }
}

/// Relative tolerance (in grid spacings) for ties in [`GridSpace::snap`].
pub const SNAP_TIE_TOLERANCE: f64 = 1e-9;

/// A uniform grid on `[lower, upper]` with the absolute-difference metric.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    lower: f64,
    upper: f64,
    coords: Vec<f64>,
    space: FiniteMetricSpace,
}

impl GridSpace {
    pub fn new(lower: f64, upper: f64, resolution: usize) -> Result<Self, MetricError> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(MetricError::GridBounds { lower, upper });
        }
        if resolution < 2 {
            return Err(MetricError::GridResolution(resolution));
        }
        let step = (upper - lower) / (resolution - 1) as f64;
        let coords: Vec<f64> = (0..resolution)
            .map(|i| if i + 1 == resolution { upper } else { lower + i as f64 * step })
            .collect();
        let space = FiniteMetricSpace::on_line(&coords)?;
        Ok(Self {
            lower,
            upper,
            coords,
            space,
        })
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn into_space(self) -> FiniteMetricSpace {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, p: Point) -> f64 {
        self.coords[p.0]
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn resolution(&self) -> usize {
        self.coords.len()
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.coords.len() - 1) as f64
    }

    /// Nearest grid point to `x` after clamping into the grid's range. Ties go
    /// to the lower index; distances within `SNAP_TIE_TOLERANCE` spacings of
    /// each other count as tied, so rounding in the coordinates cannot break
    /// a tie.
    pub fn snap(&self, x: f64) -> Point {
        let x = x.clamp(self.lower, self.upper);
        let pos = self.coords.partition_point(|&c| c < x);
        if pos == 0 {
            return Point(0);
        }
        if pos == self.coords.len() {
            return Point(pos - 1);
        }
        let below = x - self.coords[pos - 1];
        let above = self.coords[pos] - x;
        if above < below - SNAP_TIE_TOLERANCE * self.spacing() {
            Point(pos)
        } else {
            Point(pos - 1)
        }
    }
}

/// One failed metric axiom, with its witness.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Entry is negative, NaN or infinite.
    InvalidEntry { a: Point, b: Point, value: f64 },
    /// `d(a, a) != 0`.
    NonzeroDiagonal { a: Point, value: f64 },
    /// `d(a, b) <= 0` for `a != b`.
    NotPositive { a: Point, b: Point, value: f64 },
    /// `d(a, b) != d(b, a)`.
    Asymmetric { a: Point, b: Point, ab: f64, ba: f64 },
    /// `d(a, c) > d(a, b) + d(b, c)`.
    Triangle { a: Point, b: Point, c: Point, direct: f64, via: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidEntry { a, b, value } => write!(f, "invalid entry d({a},{b})={value}"),
            Violation::NonzeroDiagonal { a, value } => write!(f, "d({a},{a})={value} != 0"),
            Violation::NotPositive { a, b, value } => write!(f, "d({a},{b})={value} <= 0"),
            Violation::Asymmetric { a, b, ab, ba } => {
                write!(f, "d({a},{b})={ab} != d({b},{a})={ba}")
            }
            Violation::Triangle { a, b, c, direct, via } => {
                write!(f, "d({a},{c})={direct} > d({a},{b})+d({b},{c})={via}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exhaustive check of the metric axioms over all points, pairs and triples.
pub fn validate_metric(space: &FiniteMetricSpace) -> ValidationReport {
    let mut violations = Vec::new();
    let slack = space.triangle_slack();
    for a in space.points() {
        for b in space.points() {
            let v = space.dist(a, b);
            if !v.is_finite() || v < 0.0 {
                violations.push(Violation::InvalidEntry { a, b, value: v });
                continue;
            }
            if a == b {
                if v != 0.0 {
                    violations.push(Violation::NonzeroDiagonal { a, value: v });
                }
            } else if v <= 0.0 {
                violations.push(Violation::NotPositive { a, b, value: v });
            }
            if a < b {
                let back = space.dist(b, a);
                if v != back {
                    violations.push(Violation::Asymmetric { a, b, ab: v, ba: back });
                }
            }
        }
    }
    for a in space.points() {
        for b in space.points() {
            for c in space.points() {
                let direct = space.dist(a, c);
                let via = space.dist(a, b) + space.dist(b, c);
                if direct > via + slack {
                    violations.push(Violation::Triangle { a, b, c, direct, via });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// `d(x, A) = min_{a in A} d(x, a)`.
pub fn point_to_set_distance(
    space: &FiniteMetricSpace,
    x: Point,
    set: &[Point],
) -> Result<f64, MetricError> {
    if set.is_empty() {
        return Err(MetricError::EmptySet);
    }
    space.check_point(x)?;
    let mut best = f64::INFINITY;
    for &a in set {
        space.check_point(a)?;
        best = best.min(space.dist(x, a));
    }
    Ok(best)
}
