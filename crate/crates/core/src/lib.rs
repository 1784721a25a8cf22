//! Fixed-point certification and computation on finite metric spaces.
//!
//! Maps (single or set-valued) on a [`FiniteMetricSpace`] are checked
//! exhaustively against contraction-type conditions, and the matching
//! constructive procedures compute fixed points. [`bellman`] applies the same
//! machinery to finite functional equations of dynamic programming.

pub mod bellman;
pub mod certify;
pub mod gauge;
pub mod hausdorff;
pub mod metric;
pub mod potential;
pub mod random;
pub mod solver;

pub use bellman::{
    apply_bellman, check_im_condition, sup_metric, value_iterate, BellmanError, BoundedFunction, ConditionReport,
    DPInstance, Recursion, ValueSolution,
};
pub use certify::{
    certify_banach, certify_caristi, certify_gauge_contraction, certify_mt, certify_multi_pair_potential,
    certify_multivalued_gauge, certify_nonexpansive, certify_pair_potential, certify_weak_contraction, Certificate,
    CertifyError, CertifyOptions, Condition, ImageMetric, MapKind, MapSpec, Slack, Witness,
};
pub use gauge::{paper_rho, CheckGrid, CheckReport, Direction, Gauge, GaugeError, GaugeProp};
pub use hausdorff::{hausdorff_distance, verify_hausdorff_axioms, HausdorffReport, HausdorffViolation};
pub use metric::{
    validate_metric, FiniteMetricSpace, GridSpace, MetricError, Point, PointSet, ValidationReport, Violation,
};
pub use potential::{build_potential_from_gauge, PairPotential, PointPotential, PotentialError, Upgrade};
pub use solver::{
    brute_force_fixed_points, caristi_descent_solve, multi_orbit_solve, picard_solve, verify_telescoping,
    OrbitStatus, OrbitTrace, SolveError, StopRule, TelescopeReport,
};
