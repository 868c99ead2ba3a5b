//! Fixtures shared by the benchmarks.

use nnsketch::oracle::{gen_queries, gen_random, Distribution};
use nnsketch::{Params, PointSet};

/// A uniform dataset with its parameters and a query batch.
pub fn fixture(n: usize, d: usize, phi: i64, eps: f64, q: usize, seed: u64) -> (PointSet, Params, Vec<Vec<i64>>) {
    let points = gen_random(n, d, phi, Distribution::Uniform, seed).expect("valid fixture");
    let params = points.params(eps, 0.1, q, seed).expect("valid params");
    let queries = gen_queries(&points, q, seed);
    (points, params, queries)
}
