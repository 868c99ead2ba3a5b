//! Brute-force ground truth and instance generators.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution as _, Normal};

use crate::geometry::{dist_sq_int, GeometryError, PointSet};
use crate::io::KeyEntry;
use crate::rng::{derive, seeded, tag};

/// Exact nearest neighbor of `y`; ties go to the smaller index.
pub fn exact_nn(points: &PointSet, y: &[i64]) -> Result<(usize, f64), GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::InvalidParams("empty point set".into()));
    }
    if y.len() != points.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: points.dim(),
            got: y.len(),
        });
    }
    let (i, d2) = points
        .rows()
        .map(|x| dist_sq_int(x, y))
        .enumerate()
        .min_by_key(|&(i, d2)| (d2, i))
        .unwrap();
    Ok((i, (d2 as f64).sqrt()))
}

/// `out[j][i] = ‖y_j − x_i‖`.
pub fn exact_all_distances(points: &PointSet, queries: &[Vec<i64>]) -> Vec<Vec<f64>> {
    queries
        .iter()
        .map(|y| points.rows().map(|x| (dist_sq_int(x, y) as f64).sqrt()).collect())
        .collect()
}

/// Shapes of random point sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Uniform over the whole box.
    Uniform,
    /// `count` centers uniform in the inner half of the box, points
    /// Gaussian around them with standard deviation `spread`.
    GaussianClusters { count: usize, spread: f64 },
    /// Two clusters whose centers are `2^level` apart, each of diameter at
    /// most `eps · 2^level`.
    PlantedTwoCluster { level: u32, eps: f64 },
}

pub fn gen_random(n: usize, d: usize, phi: i64, dist: Distribution, seed: u64) -> Result<PointSet, GeometryError> {
    // Validates d and Φ before any sampling.
    PointSet::new(d, phi, Vec::new())?;
    let mut rng = seeded(seed);
    let mut coords = Vec::with_capacity(n * d);
    match dist {
        Distribution::Uniform => {
            coords.extend((0..n * d).map(|_| rng.random_range(-phi..=phi)));
        }
        Distribution::GaussianClusters { count, spread } => {
            if count == 0 || !(spread.is_finite() && spread >= 0.0) {
                return Err(GeometryError::InvalidParams("clusters need count ≥ 1 and spread ≥ 0".into()));
            }
            let centers: Vec<i64> = (0..count * d).map(|_| rng.random_range(-phi / 2..=phi / 2)).collect();
            let noise = Normal::new(0.0, spread).unwrap();
            for _ in 0..n {
                let c = rng.random_range(0..count);
                for a in 0..d {
                    let v = centers[c * d + a] as f64 + noise.sample(&mut rng);
                    coords.push((v.round() as i64).clamp(-phi, phi));
                }
            }
        }
        Distribution::PlantedTwoCluster { level, eps } => {
            let sep = 1i64.checked_shl(level).filter(|&s| s <= phi).ok_or_else(|| {
                GeometryError::InvalidParams(format!("separation 2^{level} exceeds Φ = {phi}"))
            })?;
            if !(eps > 0.0 && eps < 0.5) {
                return Err(GeometryError::InvalidParams("planted clusters need ε in (0, 1/2)".into()));
            }
            let half = (eps * sep as f64 / (2.0 * (d as f64).sqrt())).floor() as i64;
            for i in 0..n {
                let centre = if i < n.div_ceil(2) { -sep / 2 } else { sep - sep / 2 };
                for a in 0..d {
                    let base = if a == 0 { centre } else { 0 };
                    coords.push(base + rng.random_range(-half..=half));
                }
            }
        }
    }
    PointSet::new(d, phi, coords)
}

/// Queries for the evaluation harness: the first half uniform over the box,
/// the rest data points moved by at most `Φ/16` per axis.
pub fn gen_queries(points: &PointSet, q: usize, seed: u64) -> Vec<Vec<i64>> {
    let mut rng = seeded(derive(seed, &[tag::QUERY]));
    let (d, phi) = (points.dim(), points.phi());
    let jitter = (phi / 16).max(1);
    (0..q)
        .map(|j| {
            if j < q / 2 || points.is_empty() {
                (0..d).map(|_| rng.random_range(-phi..=phi)).collect()
            } else {
                let x = points.row(rng.random_range(0..points.len()));
                x.iter()
                    .map(|&v| (v + rng.random_range(-jitter..=jitter)).clamp(-phi, phi))
                    .collect()
            }
        })
        .collect()
}

/// The adversarial instance used to show that nearest neighbor sketches must
/// store `Ω(n/ε²)` bits: `x_i` hides a `k`-sparse pattern that single
/// queries reveal one bit at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    /// Integer scale applied to the real-valued construction.
    pub scale: i64,
    /// `x_0..x_{n-1}` followed by `z_0..z_{n-1}`.
    pub points: PointSet,
    /// `support[i]` lists the nonzero positions of `x_i`, ascending.
    pub support: Vec<Vec<usize>>,
    /// Queries `y_ij` in key order.
    pub queries: Vec<Vec<i64>>,
    pub key: Vec<KeyEntry>,
}

impl HardInstance {
    pub fn dim(n: usize) -> usize {
        n + 1 + n.trailing_zeros() as usize
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        self.support[i].binary_search(&j).is_ok()
    }

    pub fn query(&self, i: usize, j: usize) -> Vec<i64> {
        let d = Self::dim(self.n);
        let mut y = vec![0i64; d];
        y[j] = self.scale;
        self.write_id(&mut y, i);
        y
    }

    fn write_id(&self, v: &mut [i64], i: usize) {
        let base = self.n + 1;
        for b in 0..self.n.trailing_zeros() as usize {
            v[base + b] = if (i >> b) & 1 == 1 { 10 * self.scale } else { 0 };
        }
    }
}

/// Builds the instance with `k = 1/ε²` and coordinates scaled by `Φ/16`.
///
/// With `all_queries` every `y_ij` for `j < n` is emitted; otherwise only the
/// `n·k` queries at planted positions.
pub fn gen_hard_instance(n: usize, eps: f64, phi: i64, seed: u64, all_queries: bool) -> Result<HardInstance, GeometryError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(GeometryError::InvalidParams(format!("n = {n} must be a power of two ≥ 2")));
    }
    let root_k = (1.0 / eps).round();
    if !(eps > 0.0 && eps < 1.0) || (root_k * eps - 1.0).abs() > 1e-9 {
        return Err(GeometryError::InvalidParams(format!("1/ε = {} must be an integer", 1.0 / eps)));
    }
    let k = (root_k * root_k) as usize;
    if k > n {
        return Err(GeometryError::InvalidParams(format!("k = {k} exceeds n = {n}")));
    }
    if phi < 16 {
        return Err(GeometryError::InvalidParams("Φ must be at least 16".into()));
    }
    let scale = phi / 16;
    let d = HardInstance::dim(n);
    let mut rng = seeded(seed);
    let support: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut s = sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    let mut inst = HardInstance {
        n,
        eps,
        k,
        scale,
        points: PointSet::new(d, phi, Vec::new())?,
        support,
        queries: Vec::new(),
        key: Vec::new(),
    };
    let entry = (scale as f64 / root_k).round() as i64;
    let tail = (scale as f64 * (1.0 - eps).sqrt()).round() as i64;
    let mut coords = vec![0i64; 2 * n * d];
    for i in 0..n {
        let (x, z) = coords.split_at_mut(n * d);
        let x = &mut x[i * d..(i + 1) * d];
        for &j in &inst.support[i] {
            x[j] = entry;
        }
        inst.write_id(x, i);
        let z = &mut z[i * d..(i + 1) * d];
        z[n] = tail;
        inst.write_id(z, i);
    }
    inst.points = PointSet::new(d, phi, coords)?;

    // The ordering x_i (planted) < z_i < x_i (empty) must survive rounding.
    let y = inst.query(0, 0);
    let mut probe = inst.points.row(0).to_vec();
    probe[0] = entry;
    let planted = dist_sq_int(&probe, &y);
    probe[0] = 0;
    let empty = dist_sq_int(&probe, &y);
    let middle = dist_sq_int(inst.points.row(n), &y);
    if !(planted < middle && middle < empty) {
        return Err(GeometryError::InvalidParams(format!(
            "Φ = {phi} is too small: rounding closes the gap ({planted} < {middle} < {empty} fails)"
        )));
    }

    for i in 0..n {
        let cols: Vec<usize> = if all_queries { (0..n).collect() } else { inst.support[i].clone() };
        for j in cols {
            let expected = if inst.bit(i, j) { i } else { n + i };
            inst.queries.push(inst.query(i, j));
            inst.key.push(KeyEntry { i, j, expected });
        }
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[i64]) -> PointSet {
        PointSet::new(1, 16, xs.to_vec()).unwrap()
    }

    #[test]
    fn nn_examples() {
        let pts = line(&[0, 3, 10]);
        assert_eq!(exact_nn(&pts, &[6]).unwrap(), (1, 3.0));
        assert_eq!(exact_nn(&pts, &[10]).unwrap(), (2, 0.0));
        assert_eq!(exact_nn(&line(&[-2, 2]), &[0]).unwrap().0, 0);
        assert!(exact_nn(&line(&[]), &[0]).is_err());
    }

    #[test]
    fn all_distances_example() {
        let pts = PointSet::new(2, 8, vec![0, 0]).unwrap();
        assert_eq!(exact_all_distances(&pts, &[vec![3, 4]]), vec![vec![5.0]]);
    }

    #[test]
    fn generators_are_deterministic_and_in_range() {
        for dist in [
            Distribution::Uniform,
            Distribution::GaussianClusters { count: 3, spread: 40.0 },
            Distribution::PlantedTwoCluster { level: 6, eps: 0.25 },
        ] {
            let a = gen_random(50, 3, 64, dist, 9).unwrap();
            assert_eq!(a, gen_random(50, 3, 64, dist, 9).unwrap());
            assert!(a.coords().iter().all(|c| c.abs() <= 64));
        }
        assert!(gen_random(4, 2, 16, Distribution::PlantedTwoCluster { level: 5, eps: 0.25 }, 1).is_err());
    }

    #[test]
    fn hard_instance_shape() {
        let h = gen_hard_instance(64, 0.25, 1024, 3, false).unwrap();
        assert_eq!(h.k, 16);
        assert_eq!(h.points.dim(), 71);
        assert_eq!(h.points.len(), 128);
        assert_eq!(h.queries.len(), 64 * 16);
        assert!(gen_hard_instance(64, 0.25, 8, 3, false).is_err());
        assert!(gen_hard_instance(8, 0.25, 1024, 3, false).is_err());
    }
}
