//! Optional dimension reduction of the input before the exact engine runs.

use crate::distance::{target_dimension, SignProjection};
use crate::geometry::{check_query, GeometryError, PointSet};

/// Projection of `{-Φ..Φ}^d` into a lower-dimensional integer grid.
///
/// A point maps to `round(scale · M·x)` with `M` a sign matrix and
/// `scale = ⌈√d'/ε⌉`, so rounding moves distances by at most `ε/2` in the
/// units where unit distances map to `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct JlProjection {
    pub d_in: usize,
    pub phi_in: i64,
    pub c: f64,
    pub seed: u64,
    pub scale: u64,
    pub phi_out: i64,
    proj: SignProjection,
}

impl JlProjection {
    pub fn new(
        d_in: usize,
        phi_in: i64,
        c: f64,
        eps: f64,
        delta_prime: f64,
        seed: u64,
    ) -> Result<Self, GeometryError> {
        let d_out = target_dimension(c, eps, delta_prime);
        Self::with_dimension(d_in, phi_in, c, d_out, eps, seed)
    }

    pub fn with_dimension(
        d_in: usize,
        phi_in: i64,
        c: f64,
        d_out: usize,
        eps: f64,
        seed: u64,
    ) -> Result<Self, GeometryError> {
        let root = (d_out as f64).sqrt();
        let scale = (root / eps).ceil() as u64;
        let reach = (scale as f64 * d_in as f64 * phi_in as f64 / root).ceil();
        if reach >= (1u64 << 40) as f64 {
            return Err(GeometryError::InvalidParams(format!(
                "projected coordinates reach {reach}, beyond 2^40"
            )));
        }
        let phi_out = (reach as u64).max(1).next_power_of_two() as i64;
        Ok(JlProjection {
            d_in,
            phi_in,
            c,
            seed,
            scale,
            phi_out,
            proj: SignProjection::new(d_in, d_out, seed),
        })
    }

    pub fn d_out(&self) -> usize {
        self.proj.d_out()
    }

    pub fn map(&self, x: &[i64]) -> Result<Vec<i64>, GeometryError> {
        check_query(x, self.d_in, self.phi_in)?;
        let factor = self.scale as f64 / (self.d_out() as f64).sqrt();
        let raw = self.proj.project_int(x)?;
        Ok(raw
            .iter()
            .map(|&v| ((v as f64 * factor).round() as i64).clamp(-self.phi_out, self.phi_out))
            .collect())
    }

    pub fn map_points(&self, points: &PointSet) -> Result<PointSet, GeometryError> {
        let mut coords = Vec::with_capacity(points.len() * self.d_out());
        for row in points.rows() {
            coords.extend(self.map(row)?);
        }
        PointSet::new(self.d_out(), self.phi_out, coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projected_points_fit_the_new_domain() {
        let jl = JlProjection::with_dimension(4, 16, 8.0, 3, 0.5, 7).unwrap();
        // scale = ⌈√3/0.5⌉ = 4; reach = ⌈4·4·16/√3⌉ = 148 → Φ' = 256
        assert_eq!(jl.scale, 4);
        assert_eq!(jl.phi_out, 256);
        let pts = PointSet::new(4, 16, vec![16, 16, 16, 16, -16, 3, 0, 9]).unwrap();
        let out = jl.map_points(&pts).unwrap();
        assert_eq!(out.dim(), 3);
        assert!(out.coords().iter().all(|c| c.abs() <= 256));
        assert!(jl.map(&[17, 0, 0, 0]).is_err());
    }
}
