//! Distance sketches: a random sign projection and fixed-scale range sketches.

use crate::geometry::{exp2, GeometryError};
use crate::rng::{derive, tag};
use crate::QueryError;

/// `⌈c·ε^-2·ln(1/δ')⌉`.
pub fn target_dimension(c: f64, eps: f64, delta_prime: f64) -> usize {
    (c / (eps * eps) * (1.0 / delta_prime).ln()).ceil().max(1.0) as usize
}

/// A `d' × d` matrix with entries `±1/√d'`, regenerated from its seed.
///
/// Signs are stored as integers so that projections of integer vectors can
/// be kept exactly as `√d'·Mx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignProjection {
    d_in: usize,
    d_out: usize,
    seed: u64,
    signs: Vec<i8>,
}

impl SignProjection {
    pub fn new(d_in: usize, d_out: usize, seed: u64) -> Self {
        let signs = (0..d_out)
            .flat_map(|i| (0..d_in).map(move |j| (i, j)))
            .map(|(i, j)| Self::sign_at(seed, i, j))
            .collect();
        SignProjection {
            d_in,
            d_out,
            seed,
            signs,
        }
    }

    /// Entry `(i, j)` of `√d'·M`, a pure function of `(seed, i, j)`.
    pub fn sign_at(seed: u64, i: usize, j: usize) -> i8 {
        if derive(seed, &[tag::SIGN, i as u64, j as u64]) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check(&self, len: usize) -> Result<(), GeometryError> {
        if len != self.d_in {
            return Err(GeometryError::DimensionMismatch {
                expected: self.d_in,
                got: len,
            });
        }
        Ok(())
    }

    /// `Mx`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check(x.len())?;
        let norm = 1.0 / (self.d_out as f64).sqrt();
        Ok(self
            .signs
            .chunks_exact(self.d_in)
            .map(|row| row.iter().zip(x).map(|(&s, &v)| s as f64 * v).sum::<f64>() * norm)
            .collect())
    }

    /// `√d'·Mx`, exact for integer input.
    pub fn project_int(&self, x: &[i64]) -> Result<Vec<i64>, GeometryError> {
        self.check(x.len())?;
        Ok(self
            .signs
            .chunks_exact(self.d_in)
            .map(|row| row.iter().zip(x).map(|(&s, &v)| s as i64 * v).sum())
            .collect())
    }

    /// `‖Ma − Mb‖` from two exact scaled projections.
    pub fn scaled_distance(&self, a: &[i64], b: &[i64]) -> f64 {
        let sq: f64 = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let t = (x - y) as f64;
                t * t
            })
            .sum();
        (sq / self.d_out as f64).sqrt()
    }
}

/// Outcome of comparing two fixed-scale sketches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeVerdict {
    Small,
    Large,
    Estimate(f64),
}

impl RangeVerdict {
    /// Whether the verdict says the distance exceeds `R`.
    pub fn exceeds(&self, r: f64) -> bool {
        match *self {
            RangeVerdict::Small => false,
            RangeVerdict::Large => true,
            RangeVerdict::Estimate(e) => e > r,
        }
    }
}

/// Quantized sketch of one vector at a fixed scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalePayload {
    pub seed: u64,
    pub level: i32,
    pub cells: Vec<u32>,
}

/// Fixed-scale sketch `sk_R` with `R = 2^level`.
///
/// Coordinates of the projection are quantized at step `εR/√d'` and stored
/// modulo `2^width`, where the width covers differences up to `±4R`. Decoding
/// takes per-coordinate differences on the torus, so the sketch of a vector
/// is independent of where the vector sits and only the difference matters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSketch {
    level: i32,
    eps: f64,
    width: u32,
    proj: SignProjection,
}

impl ScaleSketch {
    pub fn new(level: i32, eps: f64, d_in: usize, d_out: usize, seed: u64) -> Self {
        let width = ((8.0 * (d_out as f64).sqrt() / eps + 1.0).log2().ceil() as u32).max(1);
        assert!(width <= 32, "scale sketch width {width} too large");
        ScaleSketch {
            level,
            eps,
            width,
            proj: SignProjection::new(d_in, d_out, seed),
        }
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn radius(&self) -> f64 {
        exp2(self.level)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.proj.d_out()
    }

    pub fn seed(&self) -> u64 {
        self.proj.seed()
    }

    pub fn step(&self) -> f64 {
        self.eps * self.radius() / (self.dim() as f64).sqrt()
    }

    /// Payload size in bits.
    pub fn payload_bits(&self) -> u64 {
        self.width as u64 * self.dim() as u64
    }

    fn modulus(&self) -> i64 {
        1i64 << self.width
    }

    pub fn sketch(&self, x: &[f64]) -> Result<ScalePayload, GeometryError> {
        let v = self.proj.project(x)?;
        let step = self.step();
        let m = self.modulus();
        Ok(ScalePayload {
            seed: self.seed(),
            level: self.level,
            cells: v
                .iter()
                .map(|&c| ((c / step).round() as i64).rem_euclid(m) as u32)
                .collect(),
        })
    }

    pub fn sketch_int(&self, x: &[i64]) -> Result<ScalePayload, GeometryError> {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        self.sketch(&xf)
    }

    /// Euclidean distance between the decoded payloads.
    pub fn decoded_distance(&self, a: &ScalePayload, b: &ScalePayload) -> Result<f64, QueryError> {
        if a.seed != self.seed()
            || b.seed != self.seed()
            || a.level != self.level
            || b.level != self.level
            || a.cells.len() != self.dim()
            || b.cells.len() != self.dim()
        {
            return Err(QueryError::SketchMismatch);
        }
        let m = self.modulus();
        let half = m / 2;
        let sq: f64 = a
            .cells
            .iter()
            .zip(&b.cells)
            .map(|(&p, &q)| {
                let mut t = (p as i64 - q as i64).rem_euclid(m);
                if t >= half {
                    t -= m;
                }
                (t * t) as f64
            })
            .sum();
        Ok(sq.sqrt() * self.step())
    }

    pub fn compare(&self, a: &ScalePayload, b: &ScalePayload) -> Result<RangeVerdict, QueryError> {
        let e = self.decoded_distance(a, b)?;
        Ok(self.verdict(e))
    }

    /// Verdict for a decoded distance `e`.
    pub fn verdict(&self, e: f64) -> RangeVerdict {
        let r = self.radius();
        if e < (1.0 - self.eps / 2.0) * r {
            RangeVerdict::Small
        } else if e > 2.0 * (1.0 + self.eps / 2.0) * r {
            RangeVerdict::Large
        } else {
            RangeVerdict::Estimate(e)
        }
    }
}

/// Stored distance data for one subtree root.
#[derive(Debug, Clone, PartialEq)]
pub struct RootDistance {
    pub node: u32,
    /// `√d'·M·x_c(r)`.
    pub projected: Vec<i64>,
    pub range: ScalePayload,
}

/// Everything the distance query needs beyond the basic sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBundle {
    pub c: f64,
    pub seed: u64,
    pub projection: SignProjection,
    pub scales: Vec<ScaleSketch>,
    /// Sorted by node id.
    pub roots: Vec<RootDistance>,
}

impl DistanceBundle {
    /// Samples the projection and one range sketch per level `0..=top`.
    pub fn sample(c: f64, seed: u64, eps: f64, delta: f64, q: usize, d: usize, top: i32) -> Self {
        let d_proj = target_dimension(c, eps, delta / q as f64);
        let d_range = target_dimension(c, eps, delta / (q as f64 * (top + 1) as f64));
        let projection = SignProjection::new(d, d_proj, derive(seed, &[tag::PROJECTION]));
        let scales = (0..=top)
            .map(|l| ScaleSketch::new(l, eps, d, d_range, derive(seed, &[tag::SCALE, l as u64])))
            .collect();
        DistanceBundle {
            c,
            seed,
            projection,
            scales,
            roots: Vec::new(),
        }
    }

    pub fn scale(&self, level: i32) -> &ScaleSketch {
        &self.scales[level as usize]
    }

    pub fn root(&self, node: u32) -> Option<&RootDistance> {
        self.roots
            .binary_search_by_key(&node, |r| r.node)
            .ok()
            .map(|i| &self.roots[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn projection_is_linear_and_deterministic() {
        let p = SignProjection::new(5, 40, 9);
        assert_eq!(p.project(&[0.0; 5]).unwrap(), vec![0.0; 40]);
        let x = [1.5, -2.0, 3.25, 0.0, 7.0];
        let y = [-4.0, 1.0, 0.5, 2.0, -1.0];
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (px, py, ps) = (
            p.project(&x).unwrap(),
            p.project(&y).unwrap(),
            p.project(&sum).unwrap(),
        );
        for i in 0..40 {
            assert!((px[i] + py[i] - ps[i]).abs() <= 1e-9 * ps[i].abs().max(1.0));
        }
        assert_eq!(p, SignProjection::new(5, 40, 9));
        assert!(p.project(&[1.0]).is_err());
    }

    #[test]
    fn integer_projection_matches_float() {
        let p = SignProjection::new(3, 16, 1);
        let a = p.project_int(&[3, -7, 11]).unwrap();
        let f = p.project(&[3.0, -7.0, 11.0]).unwrap();
        for (ai, fi) in a.iter().zip(&f) {
            assert!((*ai as f64 / 4.0 - fi).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_formula() {
        // 8 · 16 · ln 20 = 383.45
        assert_eq!(target_dimension(8.0, 0.25, 0.05), 384);
    }

    #[test]
    fn verdict_boundaries() {
        let s = ScaleSketch::new(3, 0.25, 2, 8, 0);
        assert_eq!(s.verdict(0.0), RangeVerdict::Small);
        assert_eq!(s.verdict(6.99), RangeVerdict::Small);
        assert_eq!(s.verdict(7.0), RangeVerdict::Estimate(7.0));
        assert_eq!(s.verdict(18.0), RangeVerdict::Estimate(18.0));
        assert_eq!(s.verdict(18.01), RangeVerdict::Large);
        assert!(!RangeVerdict::Estimate(8.0).exceeds(8.0));
        assert!(RangeVerdict::Estimate(8.5).exceeds(8.0));
    }

    #[test]
    fn payload_width_and_identity() {
        let s = ScaleSketch::new(4, 0.25, 3, 100, 5);
        // ⌈log2(8·10/0.25 + 1)⌉ = ⌈log2 321⌉ = 9
        assert_eq!(s.width(), 9);
        let p = s.sketch(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.cells.len(), 100);
        assert!(p.cells.iter().all(|&c| c < 512));
        assert_eq!(p, s.sketch(&[1.0, 2.0, 3.0]).unwrap());
        let other = ScaleSketch::new(4, 0.25, 3, 100, 6);
        assert!(matches!(
            s.compare(&p, &other.sketch(&[0.0; 3]).unwrap()),
            Err(QueryError::SketchMismatch)
        ));
    }

    #[test]
    fn small_shift_moves_cells_by_at_most_one() {
        let s = ScaleSketch::new(2, 0.25, 4, 64, 11);
        let mut rng = crate::rng::seeded(2);
        let m = 1i64 << s.width();
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-50.0..50.0)).collect();
            let dir: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let len = 0.49 * s.step();
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b / norm * len).collect();
            let (px, py) = (s.sketch(&x).unwrap(), s.sketch(&y).unwrap());
            for (a, b) in px.cells.iter().zip(&py.cells) {
                let t = (*a as i64 - *b as i64).rem_euclid(m);
                assert!(t <= 1 || t == m - 1);
            }
        }
    }

    #[test]
    fn quantization_error_bound() {
        let s = ScaleSketch::new(5, 0.25, 6, 50, 3);
        let mut rng = crate::rng::seeded(8);
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-40.0..40.0)).collect();
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-40.0..40.0)).collect();
            let px = s.proj.project(&x).unwrap();
            let py = s.proj.project(&y).unwrap();
            let exact = px
                .iter()
                .zip(&py)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let e = s
                .decoded_distance(&s.sketch(&x).unwrap(), &s.sketch(&y).unwrap())
                .unwrap();
            // Each payload is within step·√d'/2 of its projection.
            assert!((e - exact).abs() <= s.step() * (s.dim() as f64).sqrt() + 1e-9);
        }
    }
}
