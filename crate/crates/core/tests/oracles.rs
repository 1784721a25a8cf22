//! Independent recomputations of derived values.

use fixpoint_core::bellman::{value_iterate, BoundedFunction, DPInstance, Recursion};
use fixpoint_core::certify::{certify_banach, MapKind, MapSpec};
use fixpoint_core::gauge::{paper_rho, Gauge};
use fixpoint_core::hausdorff::hausdorff_distance;
use fixpoint_core::metric::{GridSpace, Point};
use fixpoint_core::potential::{build_potential_from_gauge, Upgrade};
use fixpoint_core::random;
use fixpoint_core::solver::StopRule;
use fixpoint_core::CheckGrid;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Value of every stationary policy of a linear recursion
/// `h = f_pi + C_pi P_pi h`, solved exactly; the optimum is the pointwise max.
fn policy_oracle(inst: &DPInstance, c: &[Vec<f64>]) -> Vec<f64> {
    let n = inst.states().len();
    let m = inst.decisions().len();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut policy = vec![0usize; n];
    loop {
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for x in 0..n {
            let y = policy[x];
            a[(x, inst.transition(x, y))] -= c[x][y];
            rhs[x] = inst.reward(x, y);
        }
        let h = a.lu().solve(&rhs).expect("I - C P is invertible for c < 1");
        for x in 0..n {
            best[x] = best[x].max(h[x]);
        }
        // next policy in mixed-radix order
        let mut i = 0;
        while i < n {
            policy[i] += 1;
            if policy[i] < m {
                break;
            }
            policy[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random::linear_dp(&mut rng, 4, 3, 0.8);
        let c = match inst.recursion() {
            Recursion::Linear { c, .. } => c.clone(),
            _ => unreachable!(),
        };
        let oracle = policy_oracle(&inst, &c);
        let stop = StopRule::new(1e-12, 1000).unwrap();
        let sol = value_iterate(&inst, &BoundedFunction::zero(4), &stop, true).unwrap();
        assert!(sol.converged);
        for (a, b) in sol.h.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
        }
    }
}

/// `H(A, B)` as the least table distance `r` with each set inside the
/// `r`-neighbourhood of the other.
fn threshold_hausdorff(space: &fixpoint_core::FiniteMetricSpace, a: &[Point], b: &[Point]) -> f64 {
    let covers = |from: &[Point], to: &[Point], r: f64| from.iter().all(|&x| to.iter().any(|&y| space.dist(x, y) <= r));
    let mut candidates: Vec<f64> = a
        .iter()
        .flat_map(|&x| b.iter().map(move |&y| space.dist(x, y)))
        .collect();
    candidates.sort_by(f64::total_cmp);
    *candidates
        .iter()
        .find(|&&r| covers(a, b, r) && covers(b, a, r))
        .expect("the largest cross distance always covers")
}

#[test]
fn hausdorff_matches_threshold_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let (space, map) = random::multi_instance(&mut rng, 8, 4);
        for x in space.points() {
            for y in space.points() {
                let (a, b) = (map.image(x), map.image(y));
                assert_eq!(hausdorff_distance(&space, a, b).unwrap(), threshold_hausdorff(&space, a, b));
            }
        }
    }
}

#[test]
fn banach_constant_for_halving_is_exact() {
    // images measured on the line: |x/2 - y/2| / |x - y| = 1/2 up to rounding
    let g = GridSpace::new(0.0, 1.0, 257).unwrap();
    let m = MapSpec::on_grid(&g, MapKind::Single, |x| vec![x / 2.0]).unwrap();
    let c = certify_banach(g.space(), &m).unwrap();
    assert!(c.passed);
    assert!((c.constant - 0.5).abs() < 1e-12, "{}", c.constant);
}

#[test]
fn gauge_potential_closed_forms() {
    let s = fixpoint_core::FiniteMetricSpace::on_line(&[0.0, 0.5, 2.0]).unwrap();
    let grid = CheckGrid::default();
    // eta = t/2 with the midpoint upgrade: theta = 3t/4, Phi = 4d
    let phi = build_potential_from_gauge(&Gauge::linear(0.5), Upgrade::Midpoint, &grid).unwrap();
    for x in s.points() {
        for y in s.points() {
            assert_eq!(phi.eval(&s, x, y).unwrap(), 4.0 * s.dist(x, y));
        }
    }
    // paper rho: Phi = d / (1 - d/2) below 1, 3d above
    let phi = build_potential_from_gauge(&paper_rho(), Upgrade::None, &grid).unwrap();
    assert_eq!(phi.eval(&s, Point(0), Point(1)).unwrap(), 0.5 / 0.75);
    assert!((phi.eval(&s, Point(0), Point(2)).unwrap() - 6.0).abs() < 1e-12);
}
