//! Exhaustive certification of contraction-type conditions for maps on a
//! finite space.
//!
//! Every scan visits ordered pairs in lexicographic order and keeps the first
//! violating pair as the witness, so results do not depend on evaluation
//! order. Conditions quantified over `t > 0` skip the diagonal; the Caristi
//! and pair-potential conditions include it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gauge::{complement_gauge, product_gauge, require_admissible, CheckGrid, Gauge, GaugeError};
use crate::hausdorff::{hausdorff_distance, hausdorff_on_line};
use crate::metric::{FiniteMetricSpace, GridSpace, MetricError, Point, PointSet};
use crate::potential::{PairPotential, PointPotential, PotentialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("map has {got} images, space has {expected} points")]
    Size { got: usize, expected: usize },
    #[error("image of {0} is empty")]
    EmptyImage(Point),
    #[error("image of {x} contains {image}, which is not in the space")]
    OutOfSpace { x: Point, image: Point },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("gauge precondition unmet: {0}")]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("condition {condition} needs a single-valued map")]
    NeedsSingle { condition: Condition },
    #[error("potential has {got} values, space has {expected} points")]
    PotentialSize { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Single,
    Multi,
}

/// How distances between images are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageMetric {
    /// Through the space's distance table, on the image points.
    Table,
    /// On the real line, between the exact (unsnapped) images of a map
    /// declared by formula on a grid.
    Line,
}

impl ImageMetric {
    pub fn name(self) -> &'static str {
        match self {
            ImageMetric::Table => "table",
            ImageMetric::Line => "line",
        }
    }
}

/// A total map `X -> X` or `X -> nonempty subsets of X`.
///
/// Maps declared by formula on a grid keep their exact real images. The image
/// table (nearest grid point, ties to the lower index) drives orbits and
/// fixed-point enumeration, while contraction certificates measure the exact
/// images: snapping alone moves neighbouring images a full grid step apart,
/// which no contraction constant below 1 survives.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    kind: MapKind,
    images: Vec<PointSet>,
    exact: Option<Vec<Vec<f64>>>,
}

impl MapSpec {
    pub fn single(space: &FiniteMetricSpace, images: Vec<Point>) -> Result<Self, MapError> {
        let sets = images.into_iter().map(PointSet::singleton).collect();
        Self::checked(space, MapKind::Single, sets)
    }

    pub fn multi(space: &FiniteMetricSpace, images: Vec<Vec<Point>>) -> Result<Self, MapError> {
        let mut sets = Vec::with_capacity(images.len());
        for (i, img) in images.into_iter().enumerate() {
            sets.push(PointSet::new(img).map_err(|_| MapError::EmptyImage(Point(i)))?);
        }
        Self::checked(space, MapKind::Multi, sets)
    }

    fn checked(space: &FiniteMetricSpace, kind: MapKind, images: Vec<PointSet>) -> Result<Self, MapError> {
        if images.len() != space.len() {
            return Err(MapError::Size {
                got: images.len(),
                expected: space.len(),
            });
        }
        for (i, img) in images.iter().enumerate() {
            if let Some(&bad) = img.iter().find(|p| !space.contains(**p)) {
                return Err(MapError::OutOfSpace { x: Point(i), image: bad });
            }
        }
        Ok(Self {
            kind,
            images,
            exact: None,
        })
    }

    /// Map declared by a real function on a grid; `f` returns the image
    /// values of one coordinate (exactly one for a single-valued map).
    pub fn on_grid(grid: &GridSpace, kind: MapKind, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, MapError> {
        let mut exact = Vec::with_capacity(grid.resolution());
        let mut images = Vec::with_capacity(grid.resolution());
        for (i, &x) in grid.coords().iter().enumerate() {
            let values: Vec<f64> = f(x).into_iter().map(|v| v.clamp(grid.lower(), grid.upper())).collect();
            if values.is_empty() || (kind == MapKind::Single && values.len() != 1) {
                return Err(MapError::EmptyImage(Point(i)));
            }
            let set = PointSet::new(values.iter().map(|&v| grid.snap(v))).map_err(|_| MapError::EmptyImage(Point(i)))?;
            images.push(set);
            exact.push(values);
        }
        let mut map = Self::checked(grid.space(), kind, images)?;
        map.exact = Some(exact);
        Ok(map)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, x: Point) -> &PointSet {
        &self.images[x.0]
    }

    /// The image point of a single-valued map (the smallest image point of a
    /// multi-valued one).
    pub fn apply(&self, x: Point) -> Point {
        self.images[x.0][0]
    }

    pub fn exact_image(&self, x: Point) -> Option<&[f64]> {
        self.exact.as_ref().map(|e| e[x.0].as_slice())
    }

    pub fn image_metric(&self) -> ImageMetric {
        if self.exact.is_some() {
            ImageMetric::Line
        } else {
            ImageMetric::Table
        }
    }

    /// The same images viewed as a set-valued map.
    pub fn as_multi(&self) -> Self {
        Self {
            kind: MapKind::Multi,
            ..self.clone()
        }
    }

    /// Distance between `Tx` and `Ty`: `d` for single-valued maps, the
    /// Hausdorff distance for set-valued ones.
    pub fn image_distance(&self, space: &FiniteMetricSpace, x: Point, y: Point) -> Result<f64, MetricError> {
        match &self.exact {
            Some(exact) => hausdorff_on_line(&exact[x.0], &exact[y.0]),
            None => hausdorff_distance(space, &self.images[x.0], &self.images[y.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Banach,
    NonExpansive,
    GaugeContraction,
    MultivaluedGauge,
    MizoguchiTakahashi,
    WeakContraction,
    Caristi,
    PairPotential,
    MultiPairPotential,
}

impl Condition {
    pub const ALL: [Condition; 9] = [
        Condition::Banach,
        Condition::NonExpansive,
        Condition::GaugeContraction,
        Condition::MultivaluedGauge,
        Condition::MizoguchiTakahashi,
        Condition::WeakContraction,
        Condition::Caristi,
        Condition::PairPotential,
        Condition::MultiPairPotential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Banach => "banach",
            Condition::NonExpansive => "nonexpansive",
            Condition::GaugeContraction => "gauge",
            Condition::MultivaluedGauge => "multi_gauge",
            Condition::MizoguchiTakahashi => "mt",
            Condition::WeakContraction => "weak",
            Condition::Caristi => "caristi",
            Condition::PairPotential => "pair_potential",
            Condition::MultiPairPotential => "multi_pair_potential",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

/// Absolute plus relative slack on the right-hand side of `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-12 }
    }
}

impl Slack {
    pub fn uniform(s: f64) -> Self {
        Self { abs: s, rel: s }
    }

    #[inline]
    pub fn allows(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs + self.abs + self.rel * rhs.abs()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    pub slack: Slack,
    /// Grid for gauge property checks; defaults to one covering the space's
    /// distances.
    pub grid: Option<CheckGrid>,
}

impl CertifyOptions {
    pub fn grid_for(&self, space: &FiniteMetricSpace) -> CheckGrid {
        self.grid.unwrap_or_else(|| match space.distance_range() {
            Some((lo, hi)) => CheckGrid::covering(lo, hi),
            None => CheckGrid::default(),
        })
    }
}

/// A violated instance of `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    pub lhs: f64,
    pub rhs: f64,
}

/// The `z in Ty` chosen for `y in Tx` by the multi-valued potential scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub x: Point,
    pub y: Point,
    pub z: Point,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub condition: Condition,
    pub passed: bool,
    /// Lexicographically smallest violating pair; always set on failure.
    pub witness: Option<Witness>,
    /// Tightest observed constant: `alpha*` for Banach/non-expansive, the
    /// largest `lhs - rhs` otherwise.
    pub constant: f64,
    pub constant_name: &'static str,
    /// The gauge reduction applied before the scan, if any.
    pub reduction: Option<String>,
    pub image_metric: ImageMetric,
    pub pairs_checked: usize,
    pub selections: Vec<Selection>,
}

impl Certificate {
    fn new(condition: Condition, constant_name: &'static str, metric: ImageMetric) -> Self {
        Self {
            condition,
            passed: true,
            witness: None,
            constant: f64::NEG_INFINITY,
            constant_name,
            reduction: None,
            image_metric: metric,
            pairs_checked: 0,
            selections: Vec::new(),
        }
    }

    fn record(&mut self, witness: Witness, violated: bool) {
        self.pairs_checked += 1;
        if violated && self.passed {
            self.passed = false;
            self.witness = Some(witness);
        }
    }

    fn finish(mut self) -> Self {
        if self.constant == f64::NEG_INFINITY {
            self.constant = 0.0;
        }
        self
    }
}

fn require_single(map: &MapSpec, condition: Condition) -> Result<(), CertifyError> {
    if map.kind() == MapKind::Single {
        Ok(())
    } else {
        Err(CertifyError::NeedsSingle { condition })
    }
}

fn check_size(space: &FiniteMetricSpace, map: &MapSpec) -> Result<(), CertifyError> {
    if map.len() != space.len() {
        return Err(MapError::Size {
            got: map.len(),
            expected: space.len(),
        }
        .into());
    }
    Ok(())
}

fn lipschitz_scan(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    condition: Condition,
    violated: impl Fn(f64) -> bool,
) -> Result<Certificate, CertifyError> {
    check_size(space, map)?;
    let mut cert = Certificate::new(condition, "alpha_star", map.image_metric());
    for x in space.points() {
        for y in space.points().filter(|&y| y != x) {
            let lhs = map.image_distance(space, x, y)?;
            let rhs = space.dist(x, y);
            let ratio = lhs / rhs;
            cert.constant = cert.constant.max(ratio);
            cert.record(Witness { x, y, lhs, rhs }, violated(ratio));
        }
    }
    Ok(cert.finish())
}

/// `alpha* = max d(Tx, Ty) / d(x, y)` over distinct pairs; passes iff
/// `alpha* < 1`.
pub fn certify_banach(space: &FiniteMetricSpace, map: &MapSpec) -> Result<Certificate, CertifyError> {
    require_single(map, Condition::Banach)?;
    lipschitz_scan(space, map, Condition::Banach, |ratio| ratio >= 1.0)
}

/// Hausdorff non-expansiveness `H(Tx, Ty) <= d(x, y)`, with the relative
/// slack applied to the ratio.
pub fn certify_nonexpansive(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let slack = opts.slack;
    lipschitz_scan(space, map, Condition::NonExpansive, |ratio| !slack.allows(ratio, 1.0))
}

fn gauge_scan(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    eta: &Gauge,
    condition: Condition,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    check_size(space, map)?;
    let mut cert = Certificate::new(condition, "max_margin", map.image_metric());
    for x in space.points() {
        for y in space.points().filter(|&y| y != x) {
            let lhs = map.image_distance(space, x, y)?;
            let rhs = eta.try_eval(space.dist(x, y))?;
            cert.constant = cert.constant.max(lhs - rhs);
            cert.record(Witness { x, y, lhs, rhs }, !opts.slack.allows(lhs, rhs));
        }
    }
    Ok(cert.finish())
}

/// `d(Tx, Ty) <= eta(d(x, y))` for distinct pairs, with `eta` below the
/// identity and `eta(t) / t` nondecreasing.
pub fn certify_gauge_contraction(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    eta: &Gauge,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    require_single(map, Condition::GaugeContraction)?;
    require_admissible(eta, &opts.grid_for(space))?;
    gauge_scan(space, map, eta, Condition::GaugeContraction, opts)
}

/// `H(Tx, Ty) <= eta(d(x, y))` for distinct pairs.
pub fn certify_multivalued_gauge(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    eta: &Gauge,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    require_admissible(eta, &opts.grid_for(space))?;
    gauge_scan(space, map, eta, Condition::MultivaluedGauge, opts)
}

/// `H(Tx, Ty) <= eta(d(x, y)) d(x, y)` with `eta` nondecreasing into `[0, 1)`,
/// reduced to [`certify_multivalued_gauge`] with `theta(t) = eta(t) t`.
pub fn certify_mt(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    eta: &Gauge,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let grid = opts.grid_for(space);
    let theta = product_gauge(eta, &grid)?;
    let mut cert = certify_multivalued_gauge(space, map, &theta, opts)?;
    cert.condition = Condition::MizoguchiTakahashi;
    cert.reduction = Some(theta.label().to_string());
    Ok(cert)
}

/// `H(Tx, Ty) <= d(x, y) - theta(d(x, y))`, reduced to
/// [`certify_multivalued_gauge`] with `eta(t) = t - theta(t)`.
pub fn certify_weak_contraction(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    theta: &Gauge,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let grid = opts.grid_for(space);
    let eta = complement_gauge(theta, &grid)?;
    let mut cert = certify_multivalued_gauge(space, map, &eta, opts)?;
    cert.condition = Condition::WeakContraction;
    cert.reduction = Some(eta.label().to_string());
    Ok(cert)
}

/// `d(x, Tx) <= phi(x) - phi(Tx)` at every point.
pub fn certify_caristi(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    phi: &PointPotential,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    require_single(map, Condition::Caristi)?;
    check_size(space, map)?;
    if phi.len() != space.len() {
        return Err(CertifyError::PotentialSize {
            got: phi.len(),
            expected: space.len(),
        });
    }
    let mut cert = Certificate::new(Condition::Caristi, "max_margin", ImageMetric::Table);
    for x in space.points() {
        let tx = map.apply(x);
        let lhs = space.dist(x, tx);
        let rhs = phi.at(x) - phi.at(tx);
        cert.constant = cert.constant.max(lhs - rhs);
        cert.record(Witness { x, y: tx, lhs, rhs }, !opts.slack.allows(lhs, rhs));
    }
    Ok(cert.finish())
}

/// `d(x, y) <= Phi(x, y) - Phi(Tx, Ty)` for all ordered pairs.
pub fn certify_pair_potential(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    phi: &PairPotential,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    require_single(map, Condition::PairPotential)?;
    check_size(space, map)?;
    let mut cert = Certificate::new(Condition::PairPotential, "max_margin", ImageMetric::Table);
    for x in space.points() {
        for y in space.points() {
            let lhs = space.dist(x, y);
            let rhs = phi.eval(space, x, y)? - phi.eval(space, map.apply(x), map.apply(y))?;
            cert.constant = cert.constant.max(lhs - rhs);
            cert.record(Witness { x, y, lhs, rhs }, !opts.slack.allows(lhs, rhs));
        }
    }
    Ok(cert.finish())
}

/// For every `x` and `y in Tx` there is `z in Ty` with
/// `d(x, y) <= Phi(x, y) - Phi(y, z)`. The recorded `z` minimises
/// `Phi(y, .)` over `Ty`, ties to the lowest index.
pub fn certify_multi_pair_potential(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    phi: &PairPotential,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    check_size(space, map)?;
    let mut cert = Certificate::new(Condition::MultiPairPotential, "max_margin", ImageMetric::Table);
    for x in space.points() {
        for &y in map.image(x).iter() {
            let mut best: Option<(Point, f64)> = None;
            for &z in map.image(y).iter() {
                let v = phi.eval(space, y, z)?;
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((z, v));
                }
            }
            let (z, phi_yz) = best.expect("images are nonempty");
            let lhs = space.dist(x, y);
            let rhs = phi.eval(space, x, y)? - phi_yz;
            cert.constant = cert.constant.max(lhs - rhs);
            cert.selections.push(Selection { x, y, z, lhs, rhs });
            cert.record(Witness { x, y, lhs, rhs }, !opts.slack.allows(lhs, rhs));
        }
    }
    Ok(cert.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::Gauge;
    use crate::potential::{build_potential_from_gauge, Upgrade};

    fn two_points() -> FiniteMetricSpace {
        FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap()
    }

    fn halving_grid(n: usize) -> (GridSpace, MapSpec) {
        let g = GridSpace::new(0.0, 1.0, n).unwrap();
        let m = MapSpec::on_grid(&g, MapKind::Single, |x| vec![x / 2.0]).unwrap();
        (g, m)
    }

    fn opts() -> CertifyOptions {
        CertifyOptions::default()
    }

    #[test]
    fn banach_examples() {
        let s = two_points();
        let id = MapSpec::single(&s, vec![Point(0), Point(1)]).unwrap();
        let c = certify_banach(&s, &id).unwrap();
        assert!(!c.passed);
        assert_eq!(c.constant, 1.0);
        assert_eq!(c.witness.unwrap().x, Point(0));

        let constant = MapSpec::single(&s, vec![Point(1), Point(1)]).unwrap();
        let c = certify_banach(&s, &constant).unwrap();
        assert!(c.passed);
        assert_eq!(c.constant, 0.0);

        let (g, m) = halving_grid(5);
        let c = certify_banach(g.space(), &m).unwrap();
        assert!(c.passed);
        assert_eq!(c.constant, 0.5);
        assert_eq!(c.image_metric, ImageMetric::Line);
    }

    #[test]
    fn snapped_table_of_halving_is_not_a_contraction() {
        let (g, m) = halving_grid(5);
        let table: Vec<Point> = g.space().points().map(|p| m.apply(p)).collect();
        let snapped = MapSpec::single(g.space(), table).unwrap();
        let c = certify_banach(g.space(), &snapped).unwrap();
        assert!(!c.passed);
        assert_eq!(c.constant, 1.0);
    }

    #[test]
    fn gauge_contraction_examples() {
        let (g, m) = halving_grid(9);
        let s = g.space();
        assert!(certify_gauge_contraction(s, &m, &Gauge::linear(0.5), &opts()).unwrap().passed);
        let c = certify_gauge_contraction(s, &m, &Gauge::linear(0.25), &opts()).unwrap();
        assert!(!c.passed);
        let w = c.witness.unwrap();
        assert_eq!((w.x, w.y), (Point(0), Point(1)));
        assert!(w.lhs > w.rhs);
        let constant = MapSpec::single(s, vec![Point(3); 9]).unwrap();
        assert!(certify_gauge_contraction(s, &constant, &Gauge::linear(0.1), &opts()).unwrap().passed);
        assert!(matches!(
            certify_gauge_contraction(s, &m, &Gauge::sqrt(), &opts()),
            Err(CertifyError::Gauge(_))
        ));
    }

    #[test]
    fn multivalued_gauge_examples() {
        let g = GridSpace::new(0.0, 1.0, 13).unwrap();
        let s = g.space();
        let m = MapSpec::on_grid(&g, MapKind::Multi, |x| vec![x / 2.0, x / 3.0]).unwrap();
        assert!(certify_multivalued_gauge(s, &m, &Gauge::linear(0.5), &opts()).unwrap().passed);

        let two = two_points();
        let m = MapSpec::multi(&two, vec![vec![Point(0)], vec![Point(0), Point(1)]]).unwrap();
        let c = certify_multivalued_gauge(&two, &m, &Gauge::linear(0.9), &opts()).unwrap();
        assert!(!c.passed);
        let w = c.witness.unwrap();
        assert_eq!((w.lhs, w.rhs), (1.0, 0.9));
    }

    #[test]
    fn mt_and_weak_examples() {
        let two = two_points();
        let id = MapSpec::multi(&two, vec![vec![Point(0)], vec![Point(1)]]).unwrap();
        let c = certify_mt(&two, &id, &Gauge::constant(0.99), &opts()).unwrap();
        assert!(!c.passed);
        assert_eq!(c.condition, Condition::MizoguchiTakahashi);
        assert_eq!(c.reduction.as_deref(), Some("product(constant(0.99))"));

        let (g, m) = halving_grid(9);
        assert!(certify_mt(g.space(), &m.as_multi(), &Gauge::constant(0.5), &opts()).unwrap().passed);
        assert!(matches!(
            certify_mt(g.space(), &m, &Gauge::constant(1.0), &opts()),
            Err(CertifyError::Gauge(GaugeError::Rejected { .. }))
        ));
        assert!(certify_weak_contraction(g.space(), &m, &Gauge::linear(0.5), &opts()).unwrap().passed);
        let c = certify_weak_contraction(g.space(), &m, &Gauge::linear(1.0), &opts()).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn caristi_examples() {
        let (g, m) = halving_grid(9);
        let s = g.space();
        let table: Vec<Point> = s.points().map(|p| m.apply(p)).collect();
        let snapped = MapSpec::single(s, table).unwrap();
        let phi = PointPotential::new(g.coords().iter().map(|x| 2.0 * x).collect()).unwrap();
        assert!(certify_caristi(s, &snapped, &phi, &opts()).unwrap().passed);

        let id = MapSpec::single(s, s.points().collect()).unwrap();
        assert!(certify_caristi(s, &id, &PointPotential::zero(9), &opts()).unwrap().passed);

        let two = two_points();
        let swap = MapSpec::single(&two, vec![Point(1), Point(0)]).unwrap();
        for phi in [vec![0.0, 0.0], vec![5.0, 1.0], vec![1.0, 5.0]] {
            let phi = PointPotential::new(phi).unwrap();
            assert!(!certify_caristi(&two, &swap, &phi, &opts()).unwrap().passed);
        }
    }

    #[test]
    fn pair_potential_examples() {
        // exact halving on dyadic points: 1, 1/2, ..., 1/16, 0
        let coords: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).chain([0.0]).collect();
        let s = FiniteMetricSpace::on_line(&coords).unwrap();
        let images: Vec<Point> = (0..6).map(|i| Point((i + 1).min(5))).collect();
        let m = MapSpec::single(&s, images).unwrap();
        let c = certify_pair_potential(&s, &m, &PairPotential::scaled_distance(2.0), &opts()).unwrap();
        assert!(!c.passed, "1/16 -> 0 breaks exact halving");
        let w = c.witness.unwrap();
        assert_eq!(w.x, Point(0));
        assert_eq!(w.y, Point(4));

        // 3 -> 1 -> 0 -> 0 contracts every pair by at least half
        let s = FiniteMetricSpace::on_line(&[0.0, 1.0, 3.0]).unwrap();
        let m = MapSpec::single(&s, vec![Point(0), Point(0), Point(1)]).unwrap();
        assert!(certify_pair_potential(&s, &m, &PairPotential::scaled_distance(2.0), &opts()).unwrap().passed);

        assert!(!certify_pair_potential(&s, &m, &PairPotential::zero(), &opts()).unwrap().passed);
        let one = FiniteMetricSpace::on_line(&[0.0]).unwrap();
        let m1 = MapSpec::single(&one, vec![Point(0)]).unwrap();
        assert!(certify_pair_potential(&one, &m1, &PairPotential::zero(), &opts()).unwrap().passed);

        let two = two_points();
        let swap = MapSpec::single(&two, vec![Point(1), Point(0)]).unwrap();
        assert!(!certify_pair_potential(&two, &swap, &PairPotential::scaled_distance(10.0), &opts()).unwrap().passed);
    }

    #[test]
    fn multi_pair_potential_examples() {
        let s = FiniteMetricSpace::on_line(&[0.0, 1.0, 3.0]).unwrap();
        let m = MapSpec::single(&s, vec![Point(0), Point(0), Point(1)]).unwrap();
        let phi = PairPotential::scaled_distance(2.0);
        let c = certify_multi_pair_potential(&s, &m.as_multi(), &phi, &opts()).unwrap();
        assert!(c.passed);
        assert_eq!(c.selections.len(), 3);

        let grid = CheckGrid::default();
        let phi = build_potential_from_gauge(&Gauge::linear(0.5), Upgrade::None, &grid).unwrap();
        let m = MapSpec::multi(&s, vec![vec![Point(0)], vec![Point(0)], vec![Point(0), Point(1)]]).unwrap();
        let c = certify_multi_pair_potential(&s, &m, &phi, &opts()).unwrap();
        assert!(c.passed, "{:?}", c.witness);
        let sel = c.selections.iter().find(|s| s.x == Point(2) && s.y == Point(1)).unwrap();
        assert_eq!((sel.z, sel.lhs, sel.rhs), (Point(0), 2.0, 2.0));

        // Snapping {x/2, x/3} sends both images of 2h to h and of h to 0, so
        // the bottom of any grid breaks the existential step.
        let g = GridSpace::new(0.0, 1.0, 13).unwrap();
        let m = MapSpec::on_grid(&g, MapKind::Multi, |x| vec![x / 2.0, x / 3.0]).unwrap();
        let c = certify_multi_pair_potential(g.space(), &m, &phi, &opts()).unwrap();
        let w = c.witness.unwrap();
        assert_eq!((w.x, w.y), (Point(2), Point(1)));

        let two = two_points();
        let swap = MapSpec::multi(&two, vec![vec![Point(1)], vec![Point(0)]]).unwrap();
        assert!(!certify_multi_pair_potential(&two, &swap, &PairPotential::scaled_distance(3.0), &opts()).unwrap().passed);
    }

    #[test]
    fn map_validation() {
        let s = two_points();
        assert!(matches!(MapSpec::single(&s, vec![Point(0)]), Err(MapError::Size { .. })));
        assert!(matches!(
            MapSpec::multi(&s, vec![vec![Point(0)], vec![]]),
            Err(MapError::EmptyImage(Point(1)))
        ));
        assert!(matches!(
            MapSpec::single(&s, vec![Point(0), Point(7)]),
            Err(MapError::OutOfSpace { .. })
        ));
    }

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>(), Ok(c));
        }
        assert!("nope".parse::<Condition>().is_err());
    }
}
