//! Hausdorff distance between nonempty finite point sets.
//!
//! `H(A, B) = max{ sup_{x in B} d(x, A), sup_{x in A} d(x, B) }`, computed by
//! full enumeration. Finite subsets of a finite space are closed and bounded,
//! so every nonempty subset is admissible.

use std::fmt;

use thiserror::Error;

use crate::metric::{point_to_set_distance, FiniteMetricSpace, MetricError, Point};

/// Default bound on the space size for [`verify_hausdorff_axioms`].
pub const DEFAULT_AXIOM_POINT_LIMIT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HausdorffError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("space has {points} points, subset enumeration is limited to {limit}")]
    TooLarge { points: usize, limit: usize },
}

/// `sup_{x in from} d(x, to)`.
pub fn directed_distance(
    space: &FiniteMetricSpace,
    from: &[Point],
    to: &[Point],
) -> Result<f64, MetricError> {
    if from.is_empty() || to.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let mut worst = 0.0_f64;
    for &x in from {
        worst = worst.max(point_to_set_distance(space, x, to)?);
    }
    Ok(worst)
}

pub fn hausdorff_distance(
    space: &FiniteMetricSpace,
    a: &[Point],
    b: &[Point],
) -> Result<f64, MetricError> {
    let ba = directed_distance(space, b, a)?;
    let ab = directed_distance(space, a, b)?;
    Ok(ba.max(ab))
}

/// Hausdorff distance between finite subsets of the real line.
pub fn hausdorff_on_line(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let directed = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|x| to.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    Ok(directed(b, a).max(directed(a, b)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum HausdorffViolation {
    /// `H(A, B) = 0` disagrees with `A = B`.
    Identity { a: Vec<Point>, b: Vec<Point>, value: f64 },
    Symmetry { a: Vec<Point>, b: Vec<Point>, ab: f64, ba: f64 },
    Triangle { a: Vec<Point>, b: Vec<Point>, c: Vec<Point>, direct: f64, via: f64 },
    /// `H({x}, {y}) != d(x, y)`; this is where a corrupted table shows up,
    /// since the max of the two directed distances is symmetric by
    /// construction.
    Singleton { x: Point, y: Point, hausdorff: f64, dist: f64 },
}

impl fmt::Display for HausdorffViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity { a, b, value } => write!(f, "H({a:?},{b:?})={value} breaks identity"),
            Self::Symmetry { a, b, ab, ba } => {
                write!(f, "H({a:?},{b:?})={ab} != H({b:?},{a:?})={ba}")
            }
            Self::Triangle { a, b, c, direct, via } => {
                write!(f, "H({a:?},{c:?})={direct} > H via {b:?} = {via}")
            }
            Self::Singleton { x, y, hausdorff, dist } => {
                write!(f, "H({{{x}}},{{{y}}})={hausdorff} != d({x},{y})={dist}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HausdorffReport {
    pub subsets: usize,
    pub violations: Vec<HausdorffViolation>,
}

impl HausdorffReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// All nonempty subsets in bitmask order.
pub fn nonempty_subsets(space: &FiniteMetricSpace) -> Vec<Vec<Point>> {
    let n = space.len();
    (1u64..(1u64 << n))
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(Point).collect())
        .collect()
}

/// Checks identity, symmetry and the triangle inequality of `H` over every
/// pair and triple of nonempty subsets, plus the singleton reduction
/// `H({x},{y}) = d(x,y)`.
pub fn verify_hausdorff_axioms(
    space: &FiniteMetricSpace,
    limit: usize,
) -> Result<HausdorffReport, HausdorffError> {
    if space.len() > limit || space.len() > 20 {
        return Err(HausdorffError::TooLarge {
            points: space.len(),
            limit,
        });
    }
    let subsets = nonempty_subsets(space);
    let m = subsets.len();
    let mut h = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            h[i * m + j] = hausdorff_distance(space, &subsets[i], &subsets[j])?;
        }
    }
    let slack = space.triangle_slack();
    let mut violations = Vec::new();

    for x in space.points() {
        for y in space.points() {
            let hd = hausdorff_distance(space, &[x], &[y])?;
            let d = space.dist(x, y);
            if hd != d {
                violations.push(HausdorffViolation::Singleton { x, y, hausdorff: hd, dist: d });
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            let v = h[i * m + j];
            if (v == 0.0) != (i == j) {
                violations.push(HausdorffViolation::Identity {
                    a: subsets[i].clone(),
                    b: subsets[j].clone(),
                    value: v,
                });
            }
            if i < j && v != h[j * m + i] {
                violations.push(HausdorffViolation::Symmetry {
                    a: subsets[i].clone(),
                    b: subsets[j].clone(),
                    ab: v,
                    ba: h[j * m + i],
                });
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let direct = h[i * m + k];
                let via = h[i * m + j] + h[j * m + k];
                if direct > via + slack {
                    violations.push(HausdorffViolation::Triangle {
                        a: subsets[i].clone(),
                        b: subsets[j].clone(),
                        c: subsets[k].clone(),
                        direct,
                        via,
                    });
                }
            }
        }
    }
    Ok(HausdorffReport {
        subsets: m,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> FiniteMetricSpace {
        FiniteMetricSpace::on_line(&[0.0, 1.0, 2.0, 3.0, 5.0]).unwrap()
    }

    #[test]
    fn examples() {
        let s = line();
        let a = [Point(0), Point(1)];
        assert_eq!(hausdorff_distance(&s, &a, &a), Ok(0.0));
        assert_eq!(hausdorff_distance(&s, &[Point(0)], &[Point(3)]), Ok(3.0));
        // {0,1} vs {2,5}: directed distances 2 and 4
        assert_eq!(directed_distance(&s, &a, &[Point(2), Point(4)]), Ok(2.0));
        assert_eq!(directed_distance(&s, &[Point(2), Point(4)], &a), Ok(4.0));
        assert_eq!(hausdorff_distance(&s, &a, &[Point(2), Point(4)]), Ok(4.0));
        assert_eq!(hausdorff_distance(&s, &a, &[]), Err(MetricError::EmptySet));
    }

    #[test]
    fn on_line_matches_table_version() {
        let s = line();
        let coords = [0.0, 1.0, 2.0, 3.0, 5.0];
        for a in nonempty_subsets(&s) {
            for b in nonempty_subsets(&s).iter().step_by(3) {
                let xa: Vec<f64> = a.iter().map(|p| coords[p.0]).collect();
                let xb: Vec<f64> = b.iter().map(|p| coords[p.0]).collect();
                assert_eq!(
                    hausdorff_on_line(&xa, &xb).unwrap(),
                    hausdorff_distance(&s, &a, b).unwrap()
                );
            }
        }
    }

    #[test]
    fn one_point_space_has_one_subset() {
        let s = FiniteMetricSpace::on_line(&[0.0]).unwrap();
        let r = verify_hausdorff_axioms(&s, DEFAULT_AXIOM_POINT_LIMIT).unwrap();
        assert_eq!(r.subsets, 1);
        assert!(r.is_valid());
    }

    #[test]
    fn four_point_space_is_valid() {
        let s = FiniteMetricSpace::on_line(&[0.0, 0.5, 2.0, 3.25]).unwrap();
        let r = verify_hausdorff_axioms(&s, DEFAULT_AXIOM_POINT_LIMIT).unwrap();
        assert_eq!(r.subsets, 15);
        assert!(r.is_valid(), "{:?}", r.violations);
    }

    #[test]
    fn asymmetric_table_surfaces_in_singletons() {
        let mut s = FiniteMetricSpace::on_line(&[0.0, 1.0, 2.0]).unwrap();
        s.set_dist(Point(0), Point(1), 1.5);
        let r = verify_hausdorff_axioms(&s, DEFAULT_AXIOM_POINT_LIMIT).unwrap();
        // H({1},{0}) = max(d(0,1), d(1,0)) = 1.5 but d(1,0) = 1
        assert!(r.violations.contains(&HausdorffViolation::Singleton {
            x: Point(1),
            y: Point(0),
            hausdorff: 1.5,
            dist: 1.0,
        }));
        assert!(!r.is_valid());
    }

    #[test]
    fn too_large_is_an_error() {
        let s = FiniteMetricSpace::on_line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            verify_hausdorff_axioms(&s, DEFAULT_AXIOM_POINT_LIMIT),
            Err(HausdorffError::TooLarge { points: 6, limit: 5 })
        );
    }
}
