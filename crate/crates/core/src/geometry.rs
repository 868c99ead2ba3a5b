//! Integer point sets, global parameters and the aligned grid hierarchy.
//!
//! All grids are generated from the hypercube with corners `(±Φ, …, ±Φ)` by
//! repeated halving, so every cell side is an exact power of two and every
//! grid corner is a dyadic rational. Snapping and ball enumeration are exact
//! in binary64 as long as the side stays within [`GridNet::min_exponent`].

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("coordinate {value} on axis {axis} is outside [-{phi}, {phi}]")]
    OutOfDomain { axis: usize, value: f64, phi: i64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid precision exhausted for scale {gamma} (raise the scale or Φ)")]
    PrecisionExhausted { gamma: f64 },
    #[error("non-positive or non-finite scale {0}")]
    InvalidScale(f64),
}

/// Global sketch parameters `(n, d, Φ, ε, δ, q)` plus the reproducibility seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub n: usize,
    pub d: usize,
    pub phi: i64,
    pub eps: f64,
    pub delta: f64,
    pub q: usize,
    pub seed: u64,
}

impl Params {
    pub fn new(
        n: usize,
        d: usize,
        phi: i64,
        eps: f64,
        delta: f64,
        q: usize,
        seed: u64,
    ) -> Result<Self, GeometryError> {
        let p = Params::new_unchecked_dims(n, d, phi, eps, delta, q, seed)?;
        if d > n {
            return Err(GeometryError::InvalidParams(format!(
                "d = {d} exceeds n = {n}"
            )));
        }
        Ok(p)
    }

    /// Same as [`Params::new`] but without the `d ≤ n` requirement, which only
    /// holds w.l.o.g. for the original input (a projected dimension may exceed n).
    pub(crate) fn new_unchecked_dims(
        n: usize,
        d: usize,
        phi: i64,
        eps: f64,
        delta: f64,
        q: usize,
        seed: u64,
    ) -> Result<Self, GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParams(m));
        if n == 0 {
            return bad("n must be positive".into());
        }
        if d == 0 {
            return bad("d must be positive".into());
        }
        if phi <= 0 || (phi as u64).count_ones() != 1 || phi > (1 << 40) {
            return bad(format!("Φ = {phi} must be a power of two in [1, 2^40]"));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return bad(format!("ε = {eps} must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return bad(format!("δ = {delta} must lie in (0, 1)"));
        }
        if q == 0 || q > n {
            return bad(format!("q = {q} must lie in [1, n = {n}]"));
        }
        Ok(Params {
            n,
            d,
            phi,
            eps,
            delta,
            q,
            seed,
        })
    }

    pub fn phi_log2(&self) -> u32 {
        self.phi.trailing_zeros()
    }

    /// `⌈log2(2·√d·Φ)⌉`, computed exactly as the least `L ≥ 0` with `4^L ≥ 4·d·Φ²`.
    pub fn top_level(&self) -> i32 {
        top_level(self.d, self.phi)
    }
}

pub(crate) fn top_level(d: usize, phi: i64) -> i32 {
    let target = 4u128 * d as u128 * (phi as u128) * (phi as u128);
    let mut level = 0i32;
    while (1u128 << (2 * level)) < target {
        level += 1;
    }
    level
}

/// An `n × d` integer point set with coordinates in `{-Φ..Φ}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    n: usize,
    d: usize,
    phi: i64,
    coords: Vec<i64>,
}

impl PointSet {
    pub fn new(d: usize, phi: i64, coords: Vec<i64>) -> Result<Self, GeometryError> {
        if d == 0 {
            return Err(GeometryError::InvalidParams("d must be positive".into()));
        }
        if phi <= 0 || (phi as u64).count_ones() != 1 {
            return Err(GeometryError::InvalidParams(format!(
                "Φ = {phi} must be a positive power of two"
            )));
        }
        if !coords.len().is_multiple_of(d) {
            return Err(GeometryError::InvalidParams(format!(
                "{} coordinates do not form rows of length {d}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| c.abs() > phi) {
            return Err(GeometryError::OutOfDomain {
                axis: pos % d,
                value: coords[pos] as f64,
                phi,
            });
        }
        Ok(PointSet {
            n: coords.len() / d,
            d,
            phi,
            coords,
        })
    }

    pub fn from_rows(phi: i64, rows: &[Vec<i64>]) -> Result<Self, GeometryError> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        PointSet::new(d, phi, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn phi(&self) -> i64 {
        self.phi
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Exact squared distance between two members.
    pub fn dist_sq(&self, i: usize, j: usize) -> u64 {
        dist_sq_int(self.row(i), self.row(j))
    }

    /// Params for this point set.
    pub fn params(
        &self,
        eps: f64,
        delta: f64,
        q: usize,
        seed: u64,
    ) -> Result<Params, GeometryError> {
        Params::new(self.n, self.d, self.phi, eps, delta, q, seed)
    }

    /// Checks that `y` is a valid query for this point set.
    pub fn check_query(&self, y: &[i64]) -> Result<(), GeometryError> {
        check_query(y, self.d, self.phi)
    }
}

pub(crate) fn check_query(y: &[i64], d: usize, phi: i64) -> Result<(), GeometryError> {
    if y.len() != d {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    if let Some(axis) = y.iter().position(|c| c.abs() > phi) {
        return Err(GeometryError::OutOfDomain {
            axis,
            value: y[axis] as f64,
            phi,
        });
    }
    Ok(())
}

#[inline]
pub fn dist_sq_int(a: &[i64], b: &[i64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let t = (x - y).unsigned_abs();
            t * t
        })
        .sum()
}

#[inline]
pub fn dist_sq_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance between an integer point and a real point.
#[inline]
pub fn dist_sq_mixed(a: &[i64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| {
            let t = x as f64 - y;
            t * t
        })
        .sum()
}

/// One level `N_γ` of the aligned grid hierarchy.
///
/// Corners are `-Φ + k·side` for `k ∈ {0..=cells}` on every axis, with
/// `side = 2^exponent`. Points are addressed by their integer index vector `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridNet {
    exponent: i32,
    phi_log2: u32,
    d: usize,
}

impl GridNet {
    /// The coarsest grid whose cell side is at most `γ/√d`.
    ///
    /// Scales with `γ/√d ≥ 2Φ` map to the single enclosing cube.
    pub fn for_scale(gamma: f64, d: usize, phi: i64) -> Result<Self, GeometryError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(GeometryError::InvalidScale(gamma));
        }
        let phi_log2 = phi.trailing_zeros();
        let max_exp = phi_log2 as i32 + 1;
        let min_exp = Self::min_exponent_for(phi_log2);
        let g2 = gamma * gamma;
        let mut e = max_exp;
        // side^2 · d ≤ γ^2, evaluated with an exact power of two on the left.
        while e >= min_exp && exp2(2 * e) * d as f64 > g2 {
            e -= 1;
        }
        if e < min_exp {
            return Err(GeometryError::PrecisionExhausted { gamma });
        }
        Ok(GridNet {
            exponent: e,
            phi_log2,
            d,
        })
    }

    /// Grid `N_{2^level}`, used for root surrogates.
    pub fn for_level(level: i32, d: usize, phi: i64) -> Result<Self, GeometryError> {
        Self::for_scale(exp2(level), d, phi)
    }

    /// Smallest exponent for which every corner `-Φ + k·side` is exact in binary64.
    pub fn min_exponent_for(phi_log2: u32) -> i32 {
        phi_log2 as i32 + 1 - 52
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn side(&self) -> f64 {
        exp2(self.exponent)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn phi(&self) -> f64 {
        exp2(self.phi_log2 as i32)
    }

    /// Number of cells per axis; valid indices are `0..=cells`.
    pub fn cells(&self) -> i64 {
        1i64 << (self.phi_log2 as i32 + 1 - self.exponent)
    }

    pub fn coord(&self, k: i64) -> f64 {
        -self.phi() + k as f64 * self.side()
    }

    pub fn point(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().map(|&k| self.coord(k)).collect()
    }

    fn check(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.d {
            return Err(GeometryError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let phi = self.phi();
        if let Some(axis) = x.iter().position(|v| !(v.abs() <= phi)) {
            return Err(GeometryError::OutOfDomain {
                axis,
                value: x[axis],
                phi: phi as i64,
            });
        }
        Ok(())
    }

    /// `N_γ[x]`: the closest corner of the cell containing `x`.
    ///
    /// Cells are half-open `[a, a+side)` except the last one on each axis,
    /// which is closed. Per-axis ties go to the lower corner, which yields
    /// the lexicographically smallest among equidistant corners.
    pub fn snap(&self, x: &[f64]) -> Result<Vec<i64>, GeometryError> {
        self.check(x)?;
        let side = self.side();
        let phi = self.phi();
        let last = self.cells() - 1;
        Ok(x
            .iter()
            .map(|&v| {
                let t = (v + phi) / side;
                let cell = (t.floor() as i64).clamp(0, last);
                if t - cell as f64 > 0.5 {
                    cell + 1
                } else {
                    cell
                }
            })
            .collect())
    }

    pub fn snap_point(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        Ok(self.point(&self.snap(x)?))
    }

    /// Snap on the unbounded extension of this grid (multiples of `side`),
    /// returning origin-relative multiples. Agrees with [`GridNet::snap`]
    /// inside the domain whenever `side ≤ Φ`.
    pub fn snap_lattice(&self, x: &[f64]) -> Vec<i64> {
        debug_assert!(self.exponent <= self.phi_log2 as i32);
        let side = self.side();
        x.iter()
            .map(|&v| {
                let t = v / side;
                let cell = t.floor();
                if t - cell > 0.5 {
                    cell as i64 + 1
                } else {
                    cell as i64
                }
            })
            .collect()
    }

    /// All grid corners within Euclidean distance `radius` of `center`,
    /// in lexicographic order of their index vectors.
    pub fn enumerate_ball(&self, center: &[f64], radius: f64) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        self.visit_ball(center, radius, (), |_, _, _| (), |_, idx| {
            out.push(idx.to_vec())
        });
        out
    }

    /// Number of grid corners within `radius` of `center`.
    pub fn count_ball(&self, center: &[f64], radius: f64) -> usize {
        let mut count = 0usize;
        self.visit_ball(center, radius, (), |_, _, _| (), |_, _| count += 1);
        count
    }

    /// Visits the corners within `radius` of `center` in lexicographic order,
    /// threading an accumulator through the per-axis recursion so callers can
    /// evaluate axis-separable functions (such as a linear hash) incrementally.
    pub fn visit_ball<S, F, G>(&self, center: &[f64], radius: f64, init: S, step: F, mut visit: G)
    where
        S: Copy,
        F: Fn(S, usize, i64) -> S,
        G: FnMut(S, &[i64]),
    {
        assert_eq!(center.len(), self.d, "center dimension mismatch");
        if !(radius >= 0.0) {
            return;
        }
        let mut idx = vec![0i64; self.d];
        let r2 = radius * radius;
        self.visit_axis(center, r2, 0, 0.0, init, &step, &mut visit, &mut idx);
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_axis<S, F, G>(
        &self,
        center: &[f64],
        r2: f64,
        axis: usize,
        acc: f64,
        state: S,
        step: &F,
        visit: &mut G,
        idx: &mut [i64],
    ) where
        S: Copy,
        F: Fn(S, usize, i64) -> S,
        G: FnMut(S, &[i64]),
    {
        if axis == self.d {
            visit(state, idx);
            return;
        }
        let side = self.side();
        let phi = self.phi();
        let residual = (r2 - acc).max(0.0).sqrt();
        let c = center[axis];
        // Widen by one cell on each side and let the exact test decide.
        let lo = (((c - residual + phi) / side).floor() as i64 - 1).max(0);
        let hi = (((c + residual + phi) / side).ceil() as i64 + 1).min(self.cells());
        for k in lo..=hi {
            let diff = self.coord(k) - c;
            let next = acc + diff * diff;
            if next <= r2 {
                idx[axis] = k;
                let s = step(state, axis, k);
                self.visit_axis(center, r2, axis + 1, next, s, step, visit, idx);
            }
        }
    }
}

#[inline]
pub(crate) fn exp2(e: i32) -> f64 {
    2f64.powi(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ball(grid: &GridNet, center: &[f64], radius: f64) -> Vec<Vec<i64>> {
        // Oracle: scan every corner of the bounding box in lexicographic order.
        let d = grid.dim();
        let cells = grid.cells();
        let mut out = Vec::new();
        let mut idx = vec![0i64; d];
        loop {
            let mut acc = 0.0;
            for a in 0..d {
                let diff = grid.coord(idx[a]) - center[a];
                acc += diff * diff;
            }
            if acc <= radius * radius {
                out.push(idx.clone());
            }
            let mut a = d;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= cells {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(4, 2, 8, 0.25, 0.1, 2, 0).is_ok());
        assert!(Params::new(4, 2, 12, 0.25, 0.1, 2, 0).is_err());
        assert!(Params::new(4, 5, 8, 0.25, 0.1, 2, 0).is_err());
        assert!(Params::new(4, 2, 8, 1.0, 0.1, 2, 0).is_err());
        assert!(Params::new(4, 2, 8, 0.25, 0.0, 2, 0).is_err());
        assert!(Params::new(4, 2, 8, 0.25, 0.1, 5, 0).is_err());
        assert!(Params::new(4, 2, 8, 0.25, 0.1, 0, 0).is_err());
    }

    #[test]
    fn top_level_matches_definition() {
        // ceil(log2(2·sqrt(d)·Φ))
        for d in 1..40usize {
            for phi_log in 0..12 {
                let phi = 1i64 << phi_log;
                let want = (2.0 * (d as f64).sqrt() * phi as f64).log2().ceil() as i32;
                let got = top_level(d, phi);
                // Exact integer version; float may be off at exact powers of two.
                assert!(
                    got == want || (exp2(want) - 2.0 * (d as f64).sqrt() * phi as f64).abs() < 1e-9
                );
                assert!(4u128.pow(got as u32) >= 4 * d as u128 * (phi * phi) as u128);
            }
        }
        assert_eq!(top_level(1, 16), 5);
    }

    #[test]
    fn grid_for_examples() {
        // γ=4, d=4, Φ=8 → candidates 16,8,4,2; largest ≤ 4/2 = 2
        assert_eq!(GridNet::for_scale(4.0, 4, 8).unwrap().side(), 2.0);
        // γ = 2√d·Φ → 2Φ
        for d in [1usize, 4, 9, 16] {
            let g = 2.0 * (d as f64).sqrt() * 8.0;
            assert_eq!(GridNet::for_scale(g, d, 8).unwrap().side(), 16.0);
        }
        // γ/√d ∈ (Φ, 2Φ) → Φ
        for ratio in [1.01, 1.5, 1.99] {
            let g = ratio * 8.0 * 3.0; // d = 9
            assert_eq!(GridNet::for_scale(g, 9, 8).unwrap().side(), 8.0);
        }
        // coarsest admissible: side ≤ γ/√d < 2·side
        for (g, d) in [(0.3, 3usize), (1.0, 6), (17.0, 2), (0.01, 1)] {
            let grid = GridNet::for_scale(g, d, 1024).unwrap();
            let lim = g / (d as f64).sqrt();
            assert!(grid.side() <= lim && lim < 2.0 * grid.side());
        }
    }

    #[test]
    fn grid_precision_exhausted() {
        assert!(matches!(
            GridNet::for_scale(1e-30, 4, 8),
            Err(GeometryError::PrecisionExhausted { .. })
        ));
        assert!(GridNet::for_scale(0.0, 4, 8).is_err());
        assert!(GridNet::for_scale(f64::NAN, 4, 8).is_err());
    }

    #[test]
    fn snap_examples() {
        let grid = GridNet::for_scale(4.0, 4, 8).unwrap();
        assert_eq!(grid.side(), 2.0);
        assert_eq!(
            grid.snap_point(&[1.5, 1.5, 1.5, 1.5]).unwrap(),
            vec![2.0, 2.0, 2.0, 2.0]
        );
        assert_eq!(
            grid.snap_point(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
            vec![0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            grid.snap_point(&[-4.0, 6.0, 8.0, -8.0]).unwrap(),
            vec![-4.0, 6.0, 8.0, -8.0]
        );
        assert!(grid.snap(&[9.0, 0.0, 0.0, 0.0]).is_err());
        assert!(grid.snap(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn snap_matches_exhaustive_corner_search() {
        // Oracle: compare all 2^d corners of the containing cell.
        let grid = GridNet::for_scale(4.0, 3, 8).unwrap();
        let mut rng = crate::rng::seeded(3);
        use rand::Rng;
        for _ in 0..500 {
            let x: Vec<f64> = (0..3)
                .map(|_| (rng.random_range(-32i32..=32) as f64) / 4.0)
                .collect();
            let side = grid.side();
            let lower: Vec<i64> = x
                .iter()
                .map(|&v| (((v + 8.0) / side).floor() as i64).min(grid.cells() - 1))
                .collect();
            let mut best: Option<(f64, Vec<i64>)> = None;
            for mask in 0..8u32 {
                let c: Vec<i64> = (0..3)
                    .map(|a| lower[a] + ((mask >> (2 - a)) & 1) as i64)
                    .collect();
                let dist = dist_sq_f64(&grid.point(&c), &x);
                let better = match &best {
                    None => true,
                    Some((bd, bc)) => dist < *bd || (dist == *bd && c < *bc),
                };
                if better {
                    best = Some((dist, c));
                }
            }
            assert_eq!(grid.snap(&x).unwrap(), best.unwrap().1, "x = {x:?}");
        }
    }

    #[test]
    fn snap_lattice_agrees_inside_domain() {
        let grid = GridNet::for_scale(0.7, 2, 4).unwrap();
        let half_cells = grid.cells() / 2;
        for x in [[0.1, -0.3], [1.26, 3.9], [-3.99, 0.0]] {
            let a = grid.snap(&x).unwrap();
            let b = grid.snap_lattice(&x);
            let a: Vec<i64> = a.iter().map(|k| k - half_cells).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ball_examples() {
        // d=1, side 2 → corners are even integers in [-8, 8]
        let g1 = GridNet::for_scale(2.0, 1, 8).unwrap();
        assert_eq!(g1.side(), 2.0);
        let pts: Vec<f64> = g1
            .enumerate_ball(&[3.0], 4.0)
            .iter()
            .map(|p| g1.coord(p[0]))
            .collect();
        assert_eq!(pts, vec![0.0, 2.0, 4.0, 6.0]);

        let g2 = GridNet::for_scale(2.0 * 2f64.sqrt(), 2, 8).unwrap();
        assert_eq!(g2.side(), 2.0);
        let pts: Vec<Vec<f64>> = g2
            .enumerate_ball(&[0.0, 0.0], 2.0)
            .iter()
            .map(|p| g2.point(p))
            .collect();
        assert_eq!(
            pts,
            vec![
                vec![-2.0, 0.0],
                vec![0.0, -2.0],
                vec![0.0, 0.0],
                vec![0.0, 2.0],
                vec![2.0, 0.0]
            ]
        );

        // radius < side/2 around a corner → only the corner
        assert_eq!(g2.enumerate_ball(&[4.0, -6.0], 0.9), vec![vec![6, 1]]);
    }

    #[test]
    fn ball_matches_brute_force_exhaustively() {
        for d in 1..=4usize {
            for phi in [1i64, 2, 4, 8, 16] {
                for gamma in [0.9, 2.0, 5.0, 11.0] {
                    let grid = match GridNet::for_scale(gamma, d, phi) {
                        Ok(g) => g,
                        Err(_) => continue,
                    };
                    if grid.cells() > 64 && d > 2 {
                        continue;
                    }
                    let centers = [vec![0.0; d], vec![phi as f64 * 0.37; d], {
                        let mut c = vec![-(phi as f64); d];
                        c[0] = phi as f64 / 3.0;
                        c
                    }];
                    for c in &centers {
                        for r in [0.5, gamma, 2.0 * gamma] {
                            assert_eq!(grid.enumerate_ball(c, r), brute_ball(&grid, c, r));
                        }
                    }
                }
            }
        }
    }
}
