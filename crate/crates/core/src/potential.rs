//! Caristi-style potentials: point potentials `phi(x)` and pair potentials
//! `Phi(x, y)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::gauge::{midpoint_upgrade, require_admissible, CheckGrid, Gauge, GaugeError};
use crate::metric::{FiniteMetricSpace, Point};

/// Pair potentials built from a gauge refuse to evaluate once
/// `g(d) / d >= 1 - SINGULARITY_GUARD`.
pub const SINGULARITY_GUARD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential `{label}` is singular at ({x}, {y}): gauge ratio {ratio}")]
    Singular { label: String, x: Point, y: Point, ratio: f64 },
    #[error("potential `{label}` has invalid value {value} at {at}")]
    InvalidValue { label: String, at: String, value: f64 },
    #[error("potential has {got} entries, space has {expected} points")]
    Size { got: usize, expected: usize },
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}

/// `phi: X -> [0, inf)`, stored per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPotential(Vec<f64>);

impl PointPotential {
    pub fn new(values: Vec<f64>) -> Result<Self, PotentialError> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(PotentialError::InvalidValue {
                    label: "point".into(),
                    at: Point(i).to_string(),
                    value: v,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn at(&self, p: Point) -> f64 {
        self.0[p.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone)]
enum PairKind {
    ScaledDistance(f64),
    Gauge(Gauge),
    Table { n: usize, values: Vec<f64> },
    Custom(Arc<dyn Fn(&FiniteMetricSpace, Point, Point) -> f64 + Send + Sync>),
}

/// `Phi: X x X -> [0, inf)`.
#[derive(Clone)]
pub struct PairPotential {
    label: String,
    kind: PairKind,
}

impl fmt::Debug for PairPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("PairPotential").field(&self.label).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upgrade {
    None,
    Midpoint,
}

impl PairPotential {
    /// `Phi(x, y) = c * d(x, y)`; with `c = 1 / (1 - alpha)` this is the
    /// Banach potential.
    pub fn scaled_distance(c: f64) -> Self {
        Self {
            label: format!("scaled_distance({c})"),
            kind: PairKind::ScaledDistance(c),
        }
    }

    pub fn zero() -> Self {
        Self::scaled_distance(0.0)
    }

    pub fn from_table(table: Vec<Vec<f64>>) -> Result<Self, PotentialError> {
        let n = table.len();
        let mut values = Vec::with_capacity(n * n);
        for row in table {
            if row.len() != n {
                return Err(PotentialError::Size { got: row.len(), expected: n });
            }
            values.extend(row);
        }
        Ok(Self {
            label: "table".into(),
            kind: PairKind::Table { n, values },
        })
    }

    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(&FiniteMetricSpace, Point, Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            kind: PairKind::Custom(Arc::new(f)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, space: &FiniteMetricSpace, x: Point, y: Point) -> Result<f64, PotentialError> {
        let value = match &self.kind {
            PairKind::ScaledDistance(c) => c * space.dist(x, y),
            PairKind::Table { n, values } => {
                if *n != space.len() {
                    return Err(PotentialError::Size {
                        got: *n,
                        expected: space.len(),
                    });
                }
                values[x.0 * n + y.0]
            }
            PairKind::Custom(f) => f(space, x, y),
            PairKind::Gauge(g) => {
                if x == y {
                    return Ok(0.0);
                }
                let d = space.dist(x, y);
                let ratio = g.try_eval(d)? / d;
                if ratio >= 1.0 - SINGULARITY_GUARD {
                    return Err(PotentialError::Singular {
                        label: self.label.clone(),
                        x,
                        y,
                        ratio,
                    });
                }
                d / (1.0 - ratio)
            }
        };
        if !value.is_finite() || value < 0.0 {
            return Err(PotentialError::InvalidValue {
                label: self.label.clone(),
                at: format!("({x}, {y})"),
                value,
            });
        }
        Ok(value)
    }
}

/// `Phi(x, y) = d / (1 - g(d) / d)` with `d = d(x, y)` and `Phi(x, x) = 0`,
/// where `g` is `eta` itself or its midpoint upgrade `(eta + id) / 2`.
pub fn build_potential_from_gauge(
    eta: &Gauge,
    upgrade: Upgrade,
    grid: &CheckGrid,
) -> Result<PairPotential, PotentialError> {
    require_admissible(eta, grid)?;
    let g = match upgrade {
        Upgrade::None => eta.clone(),
        Upgrade::Midpoint => midpoint_upgrade(eta),
    };
    Ok(PairPotential {
        label: format!("gauge_potential({})", g.label()),
        kind: PairKind::Gauge(g),
    })
}
