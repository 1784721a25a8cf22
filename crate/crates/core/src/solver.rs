//! Constructive fixed-point computation: Picard orbits, Caristi descent,
//! selection orbits of set-valued maps, and a brute-force oracle.
//!
//! On a finite space an orbit either reaches a fixed point exactly or
//! revisits a point; "converged" always means exact fixed-point membership.

use std::collections::HashSet;

use thiserror::Error;

use crate::certify::{
    certify_caristi, certify_multivalued_gauge, CertifyError, CertifyOptions, Certificate, MapKind, MapSpec, Slack,
};
use crate::gauge::{midpoint_upgrade, Gauge, GaugeError};
use crate::metric::{FiniteMetricSpace, MetricError, Point};
use crate::potential::{build_potential_from_gauge, PairPotential, PointPotential, PotentialError, Upgrade};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("refusing to solve: {} certificate failed", .0.condition)]
    Gate(Box<Certificate>),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("map must be single-valued")]
    NeedsSingle,
    #[error("invalid stop rule: {0}")]
    StopRule(String),
    #[error("step {step}: d(x,Tx) = {lhs} exceeds phi(x) - phi(Tx) = {rhs}")]
    CaristiStep { step: usize, lhs: f64, rhs: f64 },
    #[error("orbit length {total} exceeds potential drop {drop} over {steps} steps")]
    CaristiTotal { total: f64, drop: f64, steps: usize },
    #[error("step {step}: selected {z} from {x} at distance {dist} > theta bound {bound}")]
    Selection {
        step: usize,
        x: Point,
        z: Point,
        dist: f64,
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    tol: f64,
    max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl StopRule {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self, SolveError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(SolveError::StopRule(format!("tol must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(SolveError::StopRule("max_iter must be at least 1".into()));
        }
        Ok(Self { tol, max_iter })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStatus {
    Converged,
    MaxIter,
    CycleDetected,
}

impl OrbitStatus {
    pub fn name(self) -> &'static str {
        match self {
            OrbitStatus::Converged => "converged",
            OrbitStatus::MaxIter => "max_iter",
            OrbitStatus::CycleDetected => "cycle_detected",
        }
    }
}

/// One selection step `x_n -> x_{n+1}` of a set-valued orbit. The Hausdorff
/// value and `eps0 = theta(d(x_{n-1}, x_n)) - H(Tx_{n-1}, Tx_n)` exist from
/// the second step on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRecord {
    pub chosen: Point,
    pub hausdorff: Option<f64>,
    pub theta: Option<f64>,
    pub eps0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub iterates: Vec<Point>,
    /// `step_dists[n] = d(iterates[n], iterates[n + 1])`.
    pub step_dists: Vec<f64>,
    /// Caristi descent: `phi(x_n)` per iterate. Selection orbits:
    /// `Phi(x_n, x_{n+1})` per step. Empty otherwise.
    pub potentials: Vec<f64>,
    pub selections: Vec<SelectionRecord>,
    pub status: OrbitStatus,
}

impl OrbitTrace {
    /// A trace from an explicit iterate list; step distances are recomputed.
    pub fn from_iterates(space: &FiniteMetricSpace, iterates: Vec<Point>, status: OrbitStatus) -> Self {
        let step_dists = iterates.windows(2).map(|w| space.dist(w[0], w[1])).collect();
        Self {
            iterates,
            step_dists,
            potentials: Vec::new(),
            selections: Vec::new(),
            status,
        }
    }

    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> Point {
        *self.iterates.last().expect("trace is never empty")
    }
}

/// Follows `step` from `x0` until `is_fixed` holds, a point repeats, or
/// `max_iter` moves have been made.
fn run_orbit(
    space: &FiniteMetricSpace,
    x0: Point,
    stop: &StopRule,
    is_fixed: impl Fn(Point) -> bool,
    mut step: impl FnMut(usize, Point) -> Result<Point, SolveError>,
) -> Result<OrbitTrace, SolveError> {
    space.check_point(x0)?;
    let mut trace = OrbitTrace::from_iterates(space, vec![x0], OrbitStatus::MaxIter);
    let mut visited = HashSet::from([x0]);
    loop {
        let x = trace.last();
        if is_fixed(x) {
            trace.status = OrbitStatus::Converged;
            return Ok(trace);
        }
        let n = trace.steps();
        if n == stop.max_iter {
            return Ok(trace);
        }
        let next = step(n, x)?;
        trace.step_dists.push(space.dist(x, next));
        trace.iterates.push(next);
        if !visited.insert(next) {
            trace.status = OrbitStatus::CycleDetected;
            return Ok(trace);
        }
    }
}

/// Picard iteration `x_{n+1} = T(x_n)`.
pub fn picard_solve(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    x0: Point,
    stop: &StopRule,
) -> Result<OrbitTrace, SolveError> {
    if map.kind() != MapKind::Single {
        return Err(SolveError::NeedsSingle);
    }
    run_orbit(space, x0, stop, |x| map.apply(x) == x, |_, x| Ok(map.apply(x)))
}

/// Picard iteration gated on a passing Caristi certificate, asserting
/// `d(x_n, x_{n+1}) <= phi(x_n) - phi(x_{n+1})` at each step and the
/// telescoped bound on the total orbit length.
pub fn caristi_descent_solve(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    phi: &PointPotential,
    x0: Point,
    stop: &StopRule,
    opts: &CertifyOptions,
) -> Result<OrbitTrace, SolveError> {
    let cert = certify_caristi(space, map, phi, opts)?;
    if !cert.passed {
        return Err(SolveError::Gate(Box::new(cert)));
    }
    let mut trace = picard_solve(space, map, x0, stop)?;
    let slack = opts.slack;
    for (n, w) in trace.iterates.windows(2).enumerate() {
        let lhs = trace.step_dists[n];
        let rhs = phi.at(w[0]) - phi.at(w[1]);
        if !slack.allows(lhs, rhs) {
            return Err(SolveError::CaristiStep { step: n, lhs, rhs });
        }
    }
    let steps = trace.steps();
    let total: f64 = trace.step_dists.iter().sum();
    let drop = phi.at(x0) - phi.at(trace.last());
    if total > drop + steps as f64 * (slack.abs + slack.rel * drop.abs()) {
        return Err(SolveError::CaristiTotal { total, drop, steps });
    }
    trace.potentials = trace.iterates.iter().map(|&p| phi.at(p)).collect();
    Ok(trace)
}

/// Closest point of `Tx` to `x`, ties to the lowest index.
fn nearest_image(space: &FiniteMetricSpace, map: &MapSpec, x: Point) -> Point {
    let mut best = (map.image(x)[0], f64::INFINITY);
    for &z in map.image(x).iter() {
        let d = space.dist(x, z);
        if d < best.1 {
            best = (z, d);
        }
    }
    best.0
}

/// Selection orbit of a set-valued map certified against `eta`.
///
/// Each step moves to the nearest point of the current image. From the second
/// step on, the move is checked against `theta(d_prev)` with
/// `theta = (eta + id) / 2`; the nearest point is at least as close as any
/// point the existence argument provides. The attached potential is the
/// `theta`-potential `Phi(x_n, x_{n+1})`.
pub fn multi_orbit_solve(
    space: &FiniteMetricSpace,
    map: &MapSpec,
    x0: Point,
    eta: &Gauge,
    stop: &StopRule,
    opts: &CertifyOptions,
) -> Result<OrbitTrace, SolveError> {
    let cert = certify_multivalued_gauge(space, map, eta, opts)?;
    if !cert.passed {
        return Err(SolveError::Gate(Box::new(cert)));
    }
    let theta = midpoint_upgrade(eta);
    let potential = build_potential_from_gauge(eta, Upgrade::Midpoint, &opts.grid_for(space))?;
    let slack = opts.slack;

    let mut previous: Option<Point> = None;
    let mut selections = Vec::new();
    let mut potentials = Vec::new();
    let mut trace = run_orbit(space, x0, stop, |x| map.image(x).contains(x), |n, x| {
        let z = nearest_image(space, map, x);
        let dist = space.dist(x, z);
        let mut record = SelectionRecord {
            chosen: z,
            hausdorff: None,
            theta: None,
            eps0: None,
        };
        if let Some(prev) = previous {
            let bound = theta.try_eval(space.dist(prev, x))?;
            if !slack.allows(dist, bound) {
                return Err(SolveError::Selection { step: n, x, z, dist, bound });
            }
            let h = map.image_distance(space, prev, x)?;
            record.hausdorff = Some(h);
            record.theta = Some(bound);
            record.eps0 = Some((bound - h).max(0.0));
        }
        selections.push(record);
        potentials.push(potential.eval(space, x, z)?);
        previous = Some(x);
        Ok(z)
    })?;
    trace.selections = selections;
    trace.potentials = potentials;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelescopeReport {
    pub passed: bool,
    pub pairs_checked: usize,
    /// Largest `d(x_n, x_m) - (Phi(x_n, x_{n+1}) - Phi(x_m, x_{m+1}))`.
    pub worst_margin: f64,
    /// First violating `(n, m)`.
    pub witness: Option<(usize, usize)>,
}

/// Checks `d(x_n, x_m) <= Phi(x_n, x_{n+1}) - Phi(x_m, x_{m+1})` for all
/// `n < m`, with `(m - n)` times the slack. A converged trace's last iterate
/// is its own successor; otherwise it only appears as `x_{n+1}`.
pub fn verify_telescoping(
    space: &FiniteMetricSpace,
    trace: &OrbitTrace,
    potential: &PairPotential,
    slack: &Slack,
) -> Result<TelescopeReport, PotentialError> {
    let its = &trace.iterates;
    let last = its.len() - 1;
    let usable = if trace.status == OrbitStatus::Converged {
        its.len()
    } else {
        last
    };
    let successor = |n: usize| if n < last { its[n + 1] } else { its[n] };
    let phi: Vec<f64> = (0..usable)
        .map(|n| potential.eval(space, its[n], successor(n)))
        .collect::<Result<_, _>>()?;

    let mut report = TelescopeReport {
        passed: true,
        pairs_checked: 0,
        worst_margin: f64::NEG_INFINITY,
        witness: None,
    };
    for n in 0..usable {
        for m in n + 1..usable {
            let lhs = space.dist(its[n], its[m]);
            let rhs = phi[n] - phi[m];
            report.pairs_checked += 1;
            report.worst_margin = report.worst_margin.max(lhs - rhs);
            let k = (m - n) as f64;
            if lhs > rhs + k * slack.abs + slack.rel * rhs.abs() && report.passed {
                report.passed = false;
                report.witness = Some((n, m));
            }
        }
    }
    if report.pairs_checked == 0 {
        report.worst_margin = 0.0;
    }
    Ok(report)
}

/// `{x : T(x) = x}` or `{x : x in Tx}` by enumeration.
pub fn brute_force_fixed_points(space: &FiniteMetricSpace, map: &MapSpec) -> Vec<Point> {
    space.points().filter(|&x| map.image(x).contains(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::GridSpace;

    fn halving(n: usize) -> (GridSpace, MapSpec) {
        let g = GridSpace::new(0.0, 1.0, n).unwrap();
        let m = MapSpec::on_grid(&g, MapKind::Single, |x| vec![x / 2.0]).unwrap();
        (g, m)
    }

    #[test]
    fn picard_examples() {
        let (g, m) = halving(17);
        let s = g.space();
        let t = picard_solve(s, &m, Point(0), &StopRule::default()).unwrap();
        assert_eq!((t.steps(), t.status), (0, OrbitStatus::Converged));

        let t = picard_solve(s, &m, Point(16), &StopRule::default()).unwrap();
        assert_eq!(t.status, OrbitStatus::Converged);
        assert_eq!(t.last(), Point(0));
        assert_eq!(t.iterates, [16, 8, 4, 2, 1, 0].map(Point));
        for w in t.step_dists[..4].windows(2) {
            assert_eq!(w[1], w[0] / 2.0);
        }

        let two = FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap();
        let swap = MapSpec::single(&two, vec![Point(1), Point(0)]).unwrap();
        let t = picard_solve(&two, &swap, Point(0), &StopRule::default()).unwrap();
        assert_eq!(t.status, OrbitStatus::CycleDetected);
    }

    #[test]
    fn picard_max_iter_and_exact_budget() {
        let (g, m) = halving(17);
        let t = picard_solve(g.space(), &m, Point(16), &StopRule::new(1.0, 3).unwrap()).unwrap();
        assert_eq!((t.steps(), t.status), (3, OrbitStatus::MaxIter));
        let t = picard_solve(g.space(), &m, Point(16), &StopRule::new(1.0, 5).unwrap()).unwrap();
        assert_eq!((t.steps(), t.status), (5, OrbitStatus::Converged));
    }

    #[test]
    fn caristi_examples() {
        let (g, m) = halving(17);
        let s = g.space();
        let table: Vec<Point> = s.points().map(|p| m.apply(p)).collect();
        let snapped = MapSpec::single(s, table).unwrap();
        let phi = PointPotential::new(g.coords().iter().map(|x| 2.0 * x).collect()).unwrap();
        let opts = CertifyOptions::default();
        let t = caristi_descent_solve(s, &snapped, &phi, Point(16), &StopRule::default(), &opts).unwrap();
        assert_eq!(t.status, OrbitStatus::Converged);
        assert!(t.step_dists.iter().sum::<f64>() <= 2.0);
        assert_eq!(t.potentials.len(), t.iterates.len());

        let c = Point(5);
        let constant = MapSpec::single(s, vec![c; 17]).unwrap();
        let phi = PointPotential::new(s.points().map(|p| s.dist(p, c)).collect()).unwrap();
        let t = caristi_descent_solve(s, &constant, &phi, Point(12), &StopRule::default(), &opts).unwrap();
        assert_eq!((t.steps(), t.last()), (1, c));

        let id = MapSpec::single(s, s.points().collect()).unwrap();
        let t = caristi_descent_solve(s, &id, &PointPotential::zero(17), Point(3), &StopRule::default(), &opts).unwrap();
        assert_eq!(t.steps(), 0);

        let two = FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap();
        let swap = MapSpec::single(&two, vec![Point(1), Point(0)]).unwrap();
        let phi = PointPotential::new(vec![3.0, 1.0]).unwrap();
        assert!(matches!(
            caristi_descent_solve(&two, &swap, &phi, Point(0), &StopRule::default(), &opts),
            Err(SolveError::Gate(_))
        ));
    }

    #[test]
    fn multi_orbit_selects_the_halving_branch() {
        // 3 * 2^4 intervals: the orbit 48h, 24h, ..., 3h, h, 0 stays on the grid
        let g = GridSpace::new(0.0, 1.0, 49).unwrap();
        let m = MapSpec::on_grid(&g, MapKind::Multi, |x| vec![x / 2.0, x / 3.0]).unwrap();
        let eta = Gauge::linear(0.5);
        let opts = CertifyOptions::default();
        let t = multi_orbit_solve(g.space(), &m, Point(48), &eta, &StopRule::default(), &opts).unwrap();
        assert_eq!(t.status, OrbitStatus::Converged);
        assert_eq!(t.iterates, [48, 24, 12, 6, 3, 1, 0].map(Point));
        assert_eq!(t.selections.len(), t.steps());
        assert_eq!(t.potentials.len(), t.steps());
        assert!(t.selections[0].eps0.is_none());
        for r in &t.selections[1..] {
            assert!(r.eps0.unwrap() >= 0.0);
        }
        for w in t.potentials.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn multi_orbit_on_a_dyadic_grid_trips_the_selection_check() {
        // 16h -> ... -> h -> 0 makes the last two steps both equal to h
        let g = GridSpace::new(0.0, 1.0, 17).unwrap();
        let m = MapSpec::on_grid(&g, MapKind::Multi, |x| vec![x / 2.0, x / 3.0]).unwrap();
        let r = multi_orbit_solve(g.space(), &m, Point(16), &Gauge::linear(0.5), &StopRule::default(), &CertifyOptions::default());
        assert!(matches!(r, Err(SolveError::Selection { x: Point(1), z: Point(0), .. })), "{r:?}");
    }

    #[test]
    fn multi_orbit_trivial_and_gated() {
        let s = FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap();
        let opts = CertifyOptions::default();
        let swap = MapSpec::multi(&s, vec![vec![Point(1)], vec![Point(0)]]).unwrap();
        assert!(matches!(
            multi_orbit_solve(&s, &swap, Point(0), &Gauge::linear(0.5), &StopRule::default(), &opts),
            Err(SolveError::Gate(_))
        ));
        let m = MapSpec::multi(&s, vec![vec![Point(0), Point(1)], vec![Point(0), Point(1)]]).unwrap();
        let t = multi_orbit_solve(&s, &m, Point(1), &Gauge::linear(0.5), &StopRule::default(), &opts).unwrap();
        assert_eq!((t.steps(), t.status), (0, OrbitStatus::Converged));
    }

    #[test]
    fn telescoping_examples() {
        let coords: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let s = FiniteMetricSpace::on_line(&coords).unwrap();
        let phi = PairPotential::scaled_distance(2.0);
        let slack = Slack::default();

        let short = OrbitTrace::from_iterates(&s, vec![Point(0), Point(1)], OrbitStatus::MaxIter);
        let r = verify_telescoping(&s, &short, &phi, &slack).unwrap();
        assert!(r.passed);
        assert_eq!(r.pairs_checked, 0);

        let orbit = OrbitTrace::from_iterates(&s, (0..6).map(Point).collect(), OrbitStatus::MaxIter);
        let r = verify_telescoping(&s, &orbit, &phi, &slack).unwrap();
        assert!(r.passed);
        assert!(r.worst_margin.abs() < 1e-15, "equality case, got {}", r.worst_margin);

        let shuffled = OrbitTrace::from_iterates(&s, [5, 4, 3, 2, 1, 0].map(Point).to_vec(), OrbitStatus::MaxIter);
        let r = verify_telescoping(&s, &shuffled, &phi, &slack).unwrap();
        assert!(!r.passed);
        assert_eq!(r.witness, Some((0, 1)));
    }

    #[test]
    fn brute_force_examples() {
        let (g, m) = halving(17);
        let s = g.space();
        assert_eq!(brute_force_fixed_points(s, &m), vec![Point(0)]);
        let id = MapSpec::single(s, s.points().collect()).unwrap();
        assert_eq!(brute_force_fixed_points(s, &id).len(), 17);
        let two = FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap();
        let swap = MapSpec::single(&two, vec![Point(1), Point(0)]).unwrap();
        assert!(brute_force_fixed_points(&two, &swap).is_empty());
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::new(0.0, 3).is_err());
        assert!(StopRule::new(1e-3, 0).is_err());
    }
}
