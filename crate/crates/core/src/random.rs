//! Seeded generators for small random instances, used by property tests,
//! benches and the `oracle` command.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bellman::{DPInstance, Recursion};
use crate::certify::MapSpec;
use crate::gauge::Gauge;
use crate::metric::{FiniteMetricSpace, Point};

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// Shortest-path metric of a complete graph with integer edge weights in
/// `1..=max_weight`. Integer weights keep the triangle inequality exact.
pub fn graph_space<R: Rng + ?Sized>(rng: &mut R, n: usize, max_weight: u32) -> FiniteMetricSpace {
    assert!(n > 0 && max_weight > 0);
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = f64::from(rng.gen_range(1..=max_weight));
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    FiniteMetricSpace::from_table(labels(n), d).expect("shortest-path table is a metric")
}

/// `n` distinct points on a line, coordinates multiples of `1/8` in `[0, 16]`.
pub fn line_coords<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    assert!((1..=129).contains(&n));
    let mut ticks: Vec<u32> = (0..=128).collect();
    ticks.shuffle(rng);
    let mut coords: Vec<f64> = ticks[..n].iter().map(|&t| f64::from(t) / 8.0).collect();
    coords.sort_by(f64::total_cmp);
    coords
}

pub fn line_space<R: Rng + ?Sized>(rng: &mut R, n: usize) -> FiniteMetricSpace {
    FiniteMetricSpace::on_line(&line_coords(rng, n)).expect("distinct coordinates")
}

/// A single-valued map; with probability `fixed_bias` each point is sent to a
/// shared sink, which makes contractive behaviour more common.
pub fn single_map<R: Rng + ?Sized>(rng: &mut R, space: &FiniteMetricSpace, fixed_bias: f64) -> MapSpec {
    let n = space.len();
    let sink = rng.gen_range(0..n);
    let images = (0..n)
        .map(|_| {
            if rng.gen_bool(fixed_bias) {
                Point(sink)
            } else {
                Point(rng.gen_range(0..n))
            }
        })
        .collect();
    MapSpec::single(space, images).expect("images are in range")
}

/// A multi-valued map with images of size `1..=max_image`. Each image
/// contains the point nearest to a shared sink with probability `sink_bias`.
pub fn multi_map<R: Rng + ?Sized>(rng: &mut R, space: &FiniteMetricSpace, max_image: usize, sink_bias: f64) -> MapSpec {
    let n = space.len();
    let sink = rng.gen_range(0..n);
    let images = (0..n)
        .map(|_| {
            let size = rng.gen_range(1..=max_image.clamp(1, n));
            let mut img: Vec<Point> = (0..size).map(|_| Point(rng.gen_range(0..n))).collect();
            if rng.gen_bool(sink_bias) {
                img[0] = Point(sink);
            }
            img
        })
        .collect();
    MapSpec::multi(space, images).expect("images are in range")
}

/// A multi-valued map on points of a line: branch `k` sends `x` to the point
/// nearest `c + lambda_k (x - c)` for a random centre `c` and factors
/// `lambda_k` in `[0, lambda_max]`. Images are point indices, so the map is
/// measured through the distance table like any other.
pub fn line_contraction<R: Rng + ?Sized>(
    rng: &mut R,
    coords: &[f64],
    branches: usize,
    lambda_max: f64,
) -> (FiniteMetricSpace, MapSpec) {
    let space = FiniteMetricSpace::on_line(coords).expect("distinct coordinates");
    let c = coords[rng.gen_range(0..coords.len())];
    let lambdas: Vec<f64> = (0..branches.max(1)).map(|_| rng.gen_range(0.0..=lambda_max)).collect();
    let nearest = |v: f64| {
        let mut best = (0, f64::INFINITY);
        for (i, &p) in coords.iter().enumerate() {
            if (p - v).abs() < best.1 {
                best = (i, (p - v).abs());
            }
        }
        Point(best.0)
    };
    let images = coords
        .iter()
        .map(|&x| lambdas.iter().map(|l| nearest(c + l * (x - c))).collect())
        .collect();
    let map = MapSpec::multi(&space, images).expect("images are in range");
    (space, map)
}

/// One random multi-valued instance on `2..=max_points` points: half the
/// time a sink-biased map on a graph metric, otherwise a line contraction.
pub fn multi_instance<R: Rng + ?Sized>(rng: &mut R, max_points: usize, max_image: usize) -> (FiniteMetricSpace, MapSpec) {
    assert!(max_points >= 2);
    let n = rng.gen_range(2..=max_points.min(129));
    if rng.gen_bool(0.5) {
        let space = graph_space(rng, n, 9);
        let map = multi_map(rng, &space, max_image, 0.9);
        (space, map)
    } else {
        let coords = line_coords(rng, n);
        line_contraction(rng, &coords, max_image.max(1), 0.5)
    }
}

/// `I(x, y, r) = c(x, y) * r` with `c` uniform in `[0, c_max]`, rewards
/// uniform in `[-5, 5]`, and `rho(t) = c_max * t`.
pub fn linear_dp<R: Rng + ?Sized>(rng: &mut R, states: usize, decisions: usize, c_max: f64) -> DPInstance {
    assert!(c_max > 0.0 && c_max < 1.0);
    let reward = (0..states)
        .map(|_| (0..decisions).map(|_| rng.gen_range(-5.0..=5.0)).collect())
        .collect();
    let transition = (0..states)
        .map(|_| (0..decisions).map(|_| rng.gen_range(0..states)).collect())
        .collect();
    let c = (0..states)
        .map(|_| (0..decisions).map(|_| rng.gen_range(0.0..=c_max)).collect())
        .collect();
    DPInstance::new(
        (0..states).map(|i| format!("s{i}")).collect(),
        (0..decisions).map(|i| format!("d{i}")).collect(),
        reward,
        transition,
        Recursion::Linear {
            c,
            b: vec![vec![0.0; decisions]; states],
        },
        Gauge::linear(c_max),
    )
    .expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate_metric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic_and_valid() {
        for seed in 0..20 {
            let a = graph_space(&mut ChaCha8Rng::seed_from_u64(seed), 7, 9);
            let b = graph_space(&mut ChaCha8Rng::seed_from_u64(seed), 7, 9);
            assert_eq!(a.labels(), b.labels());
            for x in a.points() {
                for y in a.points() {
                    assert_eq!(a.dist(x, y), b.dist(x, y));
                }
            }
            assert!(validate_metric(&a).is_valid());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let line = line_space(&mut rng, 6);
            assert!(validate_metric(&line).is_valid());
            let m = multi_map(&mut rng, &line, 3, 0.5);
            assert_eq!(m.len(), 6);
        }
    }
}
