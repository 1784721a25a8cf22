//! Finite instances of the functional equation
//! `p(x) = sup_y { f(x, y) + I(x, y, p(transition(x, y))) }`
//! solved by iterating the operator `S` under the sup metric.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gauge::{check_below_identity, check_ratio_monotone, CheckGrid, Direction, Gauge, GaugeError};
use crate::solver::StopRule;

/// Slack on the per-step contraction assertion `d_{n+1} <= rho(d_n)`.
pub const CONTRACTION_SLACK: f64 = 1e-10;
/// Slack on the sampled recursion condition.
pub const CONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellmanError {
    #[error("instance has no states or no decisions")]
    Empty,
    #[error("{table} table has shape mismatch at state {state}")]
    Shape { table: &'static str, state: usize },
    #[error("reward f({x},{y}) = {value} is not finite")]
    Reward { x: usize, y: usize, value: f64 },
    #[error("transition({x},{y}) = {target} is not a state")]
    Transition { x: usize, y: usize, target: usize },
    #[error("rho rejected: {0}")]
    Rho(String),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("functions are defined on {left} and {right} states")]
    Mismatch { left: usize, right: usize },
    #[error("value {value} at state {state} is not finite")]
    NonFiniteValue { state: usize, value: f64 },
    #[error("recursion value at ({x},{y}) is not finite: {value}")]
    NonFiniteRecursion { x: usize, y: usize, value: f64 },
    #[error("step {step}: residual {next} exceeds rho({prev}) = {bound}")]
    Contraction { step: usize, prev: f64, next: f64, bound: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// A real function on the state set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedFunction(Vec<f64>);

impl BoundedFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, BellmanError> {
        if let Some((state, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(BellmanError::NonFiniteValue { state, value });
        }
        Ok(Self(values))
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, x: usize) -> f64 {
        self.0[x]
    }
}

/// `d(h, k) = max_x |h(x) - k(x)|`.
pub fn sup_metric(h: &BoundedFunction, k: &BoundedFunction) -> Result<f64, BellmanError> {
    if h.len() != k.len() {
        return Err(BellmanError::Mismatch {
            left: h.len(),
            right: k.len(),
        });
    }
    Ok(h.0.iter().zip(&k.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// The recursion term `I(x, y, r)`. Tables are indexed `[state][decision]`.
#[derive(Clone)]
pub enum Recursion {
    /// `I(x, y, r) = value[x][y]`.
    Constant(Vec<Vec<f64>>),
    /// `I(x, y, r) = c[x][y] * r + b[x][y]`.
    Linear { c: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// The linear form clamped into `[lo, hi]`.
    ClippedLinear {
        c: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        lo: f64,
        hi: f64,
    },
    Custom(Arc<dyn Fn(usize, usize, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Recursion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recursion::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Recursion::Linear { c, b } => f.debug_struct("Linear").field("c", c).field("b", b).finish(),
            Recursion::ClippedLinear { c, b, lo, hi } => f
                .debug_struct("ClippedLinear")
                .field("c", c)
                .field("b", b)
                .field("lo", lo)
                .field("hi", hi)
                .finish(),
            Recursion::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Recursion {
    /// `I(x, y, r) = c * r` for every state and decision.
    pub fn uniform_linear(states: usize, decisions: usize, c: f64) -> Self {
        Recursion::Linear {
            c: vec![vec![c; decisions]; states],
            b: vec![vec![0.0; decisions]; states],
        }
    }

    #[inline]
    pub fn eval(&self, x: usize, y: usize, r: f64) -> f64 {
        match self {
            Recursion::Constant(v) => v[x][y],
            Recursion::Linear { c, b } => c[x][y] * r + b[x][y],
            Recursion::ClippedLinear { c, b, lo, hi } => (c[x][y] * r + b[x][y]).clamp(*lo, *hi),
            Recursion::Custom(f) => f(x, y, r),
        }
    }

    fn tables(&self) -> Vec<(&'static str, &Vec<Vec<f64>>)> {
        match self {
            Recursion::Constant(v) => vec![("recursion", v)],
            Recursion::Linear { c, b } | Recursion::ClippedLinear { c, b, .. } => {
                vec![("recursion.c", c), ("recursion.b", b)]
            }
            Recursion::Custom(_) => vec![],
        }
    }
}

/// A finite dynamic-programming instance.
#[derive(Debug, Clone)]
pub struct DPInstance {
    states: Vec<String>,
    decisions: Vec<String>,
    reward: Vec<Vec<f64>>,
    transition: Vec<Vec<usize>>,
    recursion: Recursion,
    rho: Gauge,
}

impl DPInstance {
    pub fn new(
        states: Vec<String>,
        decisions: Vec<String>,
        reward: Vec<Vec<f64>>,
        transition: Vec<Vec<usize>>,
        recursion: Recursion,
        rho: Gauge,
    ) -> Result<Self, BellmanError> {
        let (n, m) = (states.len(), decisions.len());
        if n == 0 || m == 0 {
            return Err(BellmanError::Empty);
        }
        let shape_ok = |rows: usize, lens: &mut dyn Iterator<Item = usize>, table| -> Result<(), BellmanError> {
            if rows != n {
                return Err(BellmanError::Shape { table, state: rows.min(n) });
            }
            for (state, len) in lens.enumerate() {
                if len != m {
                    return Err(BellmanError::Shape { table, state });
                }
            }
            Ok(())
        };
        shape_ok(reward.len(), &mut reward.iter().map(Vec::len), "reward")?;
        shape_ok(transition.len(), &mut transition.iter().map(Vec::len), "transition")?;
        for (table, t) in recursion.tables() {
            shape_ok(t.len(), &mut t.iter().map(Vec::len), table)?;
        }
        for x in 0..n {
            for y in 0..m {
                let value = reward[x][y];
                if !value.is_finite() {
                    return Err(BellmanError::Reward { x, y, value });
                }
                let target = transition[x][y];
                if target >= n {
                    return Err(BellmanError::Transition { x, y, target });
                }
            }
        }
        let grid = CheckGrid::default();
        for report in [
            check_below_identity(&rho, &grid)?,
            check_ratio_monotone(&rho, &grid, Direction::Nondecreasing)?,
        ] {
            if !report.passed {
                return Err(BellmanError::Rho(format!(
                    "{} fails {} at t={}",
                    rho.label(),
                    report.check,
                    report.first_failure.unwrap_or(f64::NAN)
                )));
            }
        }
        Ok(Self {
            states,
            decisions,
            reward,
            transition,
            recursion,
            rho,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn decisions(&self) -> &[String] {
        &self.decisions
    }

    pub fn rho(&self) -> &Gauge {
        &self.rho
    }

    pub fn recursion(&self) -> &Recursion {
        &self.recursion
    }

    pub fn reward(&self, x: usize, y: usize) -> f64 {
        self.reward[x][y]
    }

    pub fn transition(&self, x: usize, y: usize) -> usize {
        self.transition[x][y]
    }

    fn check_domain(&self, h: &BoundedFunction) -> Result<(), BellmanError> {
        if h.len() != self.states.len() {
            return Err(BellmanError::Mismatch {
                left: self.states.len(),
                right: h.len(),
            });
        }
        Ok(())
    }
}

/// `S(h)(x) = max_y { f(x, y) + I(x, y, h(transition(x, y))) }` together with
/// the maximising decision per state (first maximiser in decision order).
pub fn apply_bellman(inst: &DPInstance, h: &BoundedFunction) -> Result<(BoundedFunction, Vec<usize>), BellmanError> {
    inst.check_domain(h)?;
    let n = inst.states.len();
    let mut values = Vec::with_capacity(n);
    let mut policy = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = (0, f64::NEG_INFINITY);
        for y in 0..inst.decisions.len() {
            let r = h.at(inst.transition(x, y));
            let term = inst.recursion.eval(x, y, r);
            if !term.is_finite() {
                return Err(BellmanError::NonFiniteRecursion { x, y, value: term });
            }
            let v = inst.reward(x, y) + term;
            if v > best.1 {
                best = (y, v);
            }
        }
        policy.push(best.0);
        values.push(best.1);
    }
    Ok((BoundedFunction(values), policy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionWitness {
    pub sample: usize,
    pub x: usize,
    pub y: usize,
    /// `d(h, k)` for the sampled pair.
    pub gap: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub passed: bool,
    pub samples: usize,
    pub seed: u64,
    pub range: (f64, f64),
    /// Largest `lhs - rhs` over all samples, states and decisions.
    pub worst_margin: f64,
    /// The violation with the largest margin.
    pub witness: Option<ConditionWitness>,
}

/// Samples `count` pairs `(h, k)` with values uniform in `range` and checks
/// `|I(x, y, h(x')) - I(x, y, k(x'))| <= rho(d(h, k))` with
/// `x' = transition(x, y)` at every state and decision.
pub fn check_im_condition(
    inst: &DPInstance,
    count: usize,
    seed: u64,
    range: (f64, f64),
) -> Result<ConditionReport, BellmanError> {
    if count == 0 {
        return Err(BellmanError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.states.len();
    let mut report = ConditionReport {
        passed: true,
        samples: count,
        seed,
        range,
        worst_margin: f64::NEG_INFINITY,
        witness: None,
    };
    for sample in 0..count {
        let h = BoundedFunction((0..n).map(|_| rng.gen_range(range.0..=range.1)).collect());
        let k = BoundedFunction((0..n).map(|_| rng.gen_range(range.0..=range.1)).collect());
        let gap = sup_metric(&h, &k)?;
        let rhs = inst.rho.try_eval(gap)?;
        for x in 0..n {
            for y in 0..inst.decisions.len() {
                let target = inst.transition(x, y);
                let lhs = (inst.recursion.eval(x, y, h.at(target)) - inst.recursion.eval(x, y, k.at(target))).abs();
                let margin = lhs - rhs;
                if lhs > rhs + CONDITION_SLACK {
                    report.passed = false;
                    if report.witness.is_none_or(|w| margin > w.lhs - w.rhs) {
                        report.witness = Some(ConditionWitness { sample, x, y, gap, lhs, rhs });
                    }
                }
                report.worst_margin = report.worst_margin.max(margin);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub h: BoundedFunction,
    pub policy: Vec<usize>,
    /// `d_n = d(h_n, S h_n)` for every iterate visited.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ValueSolution {
    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }
}

/// Iterates `h_{n+1} = S(h_n)` until `d_n = d(h_n, S h_n) <= tol`. With
/// `assert_contraction` set (the recursion condition was checked), every step
/// must satisfy `d_{n+1} <= rho(d_n) + CONTRACTION_SLACK`.
///
/// On stopping, `S(h_n)` is returned instead of `h_n` when its own residual is
/// also within `tol`; `iterations` is `n` either way and the last entry of
/// `residuals` belongs to the returned function.
pub fn value_iterate(
    inst: &DPInstance,
    h0: &BoundedFunction,
    stop: &StopRule,
    assert_contraction: bool,
) -> Result<ValueSolution, BellmanError> {
    inst.check_domain(h0)?;
    let step = |h: &BoundedFunction, prev: Option<f64>, n: usize| {
        let (next, policy) = apply_bellman(inst, h)?;
        let d = sup_metric(h, &next)?;
        if let (true, Some(prev)) = (assert_contraction, prev) {
            let bound = inst.rho.try_eval(prev)?;
            if d > bound + CONTRACTION_SLACK {
                return Err(BellmanError::Contraction {
                    step: n,
                    prev,
                    next: d,
                    bound,
                });
            }
        }
        Ok((next, policy, d))
    };
    let mut h = h0.clone();
    let mut residuals: Vec<f64> = Vec::new();
    for n in 0..=stop.max_iter() {
        let (next, policy, d) = step(&h, residuals.last().copied(), n)?;
        residuals.push(d);
        if d <= stop.tol() {
            let (_, next_policy, d_next) = step(&next, Some(d), n + 1)?;
            let (h, policy) = if d_next <= stop.tol() {
                residuals.push(d_next);
                (next, next_policy)
            } else {
                (h, policy)
            };
            return Ok(ValueSolution {
                h,
                policy,
                residuals,
                iterations: n,
                converged: true,
            });
        }
        if n == stop.max_iter() {
            return Ok(ValueSolution {
                h,
                policy,
                residuals,
                iterations: n,
                converged: false,
            });
        }
        h = next;
    }
    unreachable!("loop returns at n == max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::paper_rho;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn halving_loop(states: usize) -> DPInstance {
        DPInstance::new(
            names("s", states),
            names("d", 1),
            vec![vec![0.0]; states],
            (0..states).map(|x| vec![x]).collect(),
            Recursion::uniform_linear(states, 1, 0.5),
            Gauge::linear(0.5),
        )
        .unwrap()
    }

    #[test]
    fn sup_metric_examples() {
        let h = BoundedFunction::new(vec![1.0, -2.0, 0.0]).unwrap();
        let k = BoundedFunction::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(sup_metric(&h, &h), Ok(0.0));
        assert_eq!(sup_metric(&BoundedFunction::constant(3, 1.0), &BoundedFunction::zero(3)), Ok(1.0));
        assert_eq!(sup_metric(&h, &k), Ok(3.0));
        assert!(matches!(
            sup_metric(&h, &BoundedFunction::zero(2)),
            Err(BellmanError::Mismatch { .. })
        ));
    }

    #[test]
    fn apply_bellman_examples() {
        let inst = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![1.0]],
            vec![vec![0]],
            Recursion::Constant(vec![vec![0.0]]),
            Gauge::linear(0.5),
        )
        .unwrap();
        for c in [-3.0, 0.0, 8.0] {
            let (s, _) = apply_bellman(&inst, &BoundedFunction::constant(1, c)).unwrap();
            assert_eq!(s.values(), &[1.0]);
        }

        let inst = halving_loop(2);
        let (s, _) = apply_bellman(&inst, &BoundedFunction::constant(2, 2.0)).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0]);

        // 2 states x 2 decisions; by hand with h = (4, -2):
        //   x0: y0 -> 1 + 0.5*h(1) = 0,   y1 -> 3 + 0.5*h(0) = 5   => 5, y1
        //   x1: y0 -> 2 + 0.5*h(0) = 4,   y1 -> -1 + 0.5*h(1) = -2 => 4, y0
        let inst = DPInstance::new(
            names("s", 2),
            names("d", 2),
            vec![vec![1.0, 3.0], vec![2.0, -1.0]],
            vec![vec![1, 0], vec![0, 1]],
            Recursion::uniform_linear(2, 2, 0.5),
            Gauge::linear(0.5),
        )
        .unwrap();
        let (s, policy) = apply_bellman(&inst, &BoundedFunction::new(vec![4.0, -2.0]).unwrap()).unwrap();
        assert_eq!(s.values(), &[5.0, 4.0]);
        assert_eq!(policy, vec![1, 0]);
    }

    #[test]
    fn ties_go_to_the_first_decision() {
        let inst = DPInstance::new(
            names("s", 1),
            names("d", 3),
            vec![vec![1.0, 2.0, 2.0]],
            vec![vec![0, 0, 0]],
            Recursion::Constant(vec![vec![0.0; 3]]),
            Gauge::linear(0.5),
        )
        .unwrap();
        let (_, policy) = apply_bellman(&inst, &BoundedFunction::zero(1)).unwrap();
        assert_eq!(policy, vec![1]);
    }

    #[test]
    fn non_finite_recursion_is_reported() {
        let inst = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![0.0]],
            vec![vec![0]],
            Recursion::Custom(Arc::new(|_, _, r| 1.0 / r)),
            Gauge::linear(0.5),
        )
        .unwrap();
        assert!(matches!(
            apply_bellman(&inst, &BoundedFunction::zero(1)),
            Err(BellmanError::NonFiniteRecursion { x: 0, y: 0, .. })
        ));
    }

    #[test]
    fn instance_validation() {
        let bad_transition = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![0.0]],
            vec![vec![3]],
            Recursion::uniform_linear(1, 1, 0.5),
            Gauge::linear(0.5),
        );
        assert!(matches!(bad_transition, Err(BellmanError::Transition { target: 3, .. })));
        let bad_rho = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![0.0]],
            vec![vec![0]],
            Recursion::uniform_linear(1, 1, 0.5),
            Gauge::sqrt(),
        );
        assert!(matches!(bad_rho, Err(BellmanError::Rho(_))));
        let bad_shape = DPInstance::new(
            names("s", 2),
            names("d", 1),
            vec![vec![0.0], vec![0.0, 1.0]],
            vec![vec![0], vec![0]],
            Recursion::uniform_linear(2, 1, 0.5),
            Gauge::linear(0.5),
        );
        assert!(matches!(bad_shape, Err(BellmanError::Shape { table: "reward", state: 1 })));
    }

    #[test]
    fn condition_examples() {
        let constant = DPInstance::new(
            names("s", 2),
            names("d", 1),
            vec![vec![0.0]; 2],
            vec![vec![1], vec![0]],
            Recursion::Constant(vec![vec![5.0]; 2]),
            Gauge::linear(0.5),
        )
        .unwrap();
        let r = check_im_condition(&constant, 50, 1, (-1.0, 1.0)).unwrap();
        assert!(r.passed);
        assert!(r.worst_margin <= 0.0);

        let inst = halving_loop(1);
        let r = check_im_condition(&inst, 50, 1, (-1.0, 1.0)).unwrap();
        assert!(r.passed);
        // one state: the gap is attained, so lhs = rho(gap) exactly
        assert!(r.worst_margin.abs() < 1e-15);
    }

    #[test]
    fn paper_rho_condition_fails_below_one() {
        let inst = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![0.0]],
            vec![vec![0]],
            Recursion::uniform_linear(1, 1, 0.5),
            paper_rho(),
        )
        .unwrap();
        let r = check_im_condition(&inst, 200, 7, (-1.0, 1.0)).unwrap();
        assert!(!r.passed);
        let w = r.witness.unwrap();
        assert!(w.gap > 0.0 && w.gap < 1.0);
        assert_eq!(w.lhs, w.gap / 2.0);
        assert_eq!(w.rhs, w.gap * w.gap / 2.0);
        // best possible violation is 1/8 at gap 1/2
        assert!(r.worst_margin <= 0.125 + 1e-15);
        assert!(check_im_condition(&inst, 0, 7, (-1.0, 1.0)).is_err());
    }

    #[test]
    fn value_iterate_examples() {
        let inst = DPInstance::new(
            names("s", 2),
            names("d", 2),
            vec![vec![1.0, 3.0], vec![2.0, -1.0]],
            vec![vec![1, 0], vec![0, 1]],
            Recursion::Constant(vec![vec![0.0; 2]; 2]),
            Gauge::linear(0.5),
        )
        .unwrap();
        let stop = StopRule::new(1e-12, 100).unwrap();
        let sol = value_iterate(&inst, &BoundedFunction::zero(2), &stop, true).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.h.values(), &[3.0, 2.0]);
        assert_eq!(sol.policy, vec![1, 0]);

        let again = value_iterate(&inst, &sol.h, &stop, true).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.h, sol.h);
    }

    #[test]
    fn value_iterate_max_iter_and_contraction_abort() {
        let inst = halving_loop(1);
        let stop = StopRule::new(1e-12, 3).unwrap();
        let sol = value_iterate(&inst, &BoundedFunction::constant(1, 8.0), &stop, true).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.residuals, vec![4.0, 2.0, 1.0, 0.5]);

        // rho = t/4 is too strong for I = r/2
        let strict = DPInstance::new(
            names("s", 1),
            names("d", 1),
            vec![vec![0.0]],
            vec![vec![0]],
            Recursion::uniform_linear(1, 1, 0.5),
            Gauge::linear(0.25),
        )
        .unwrap();
        assert!(matches!(
            value_iterate(&strict, &BoundedFunction::constant(1, 8.0), &stop, true),
            Err(BellmanError::Contraction { step: 1, .. })
        ));
        assert!(value_iterate(&strict, &BoundedFunction::constant(1, 8.0), &stop, false).is_ok());
    }
}
