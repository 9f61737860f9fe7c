use num_complex::Complex64;

use super::{Grid, SampledField};
use crate::error::{Error, Result};

/// `eta_{v,m}(r) = 2^{nv} (1 + 2^v r)^{-m}` for `r = |x|`.
pub fn eta_value(dim: usize, v: i32, m_exp: f64, r: f64) -> f64 {
    let s = 2f64.powi(v);
    s.powi(dim as i32) * (1.0 + s * r).powf(-m_exp)
}

/// Samples `eta_{v,m}` with `|x|` measured by the minimal-image convention.
pub fn eta_kernel(grid: &Grid, v: i32, m_exp: f64) -> Result<SampledField> {
    let n = grid.dim() as f64;
    if !(m_exp > n) {
        return Err(Error::InvalidParameter(format!("eta exponent {m_exp} must exceed the dimension {n}")));
    }
    let values = (0..grid.len())
        .map(|i| Complex64::new(eta_value(grid.dim(), v, m_exp, grid.periodic_radius(i)), 0.0))
        .collect();
    SampledField::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let g = Grid::new(1, 4.0, 1024).unwrap();
        let eta = eta_kernel(&g, 2, 3.0).unwrap();
        let at = |x: f64| eta.values()[((x + 4.0) / g.spacing()).round() as usize].re;
        assert_eq!(at(0.0), 4.0);
        assert_eq!(at(0.25), 0.5);
        assert_eq!(at(-0.25), 0.5);
    }

    #[test]
    fn exponent_must_exceed_dimension() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        assert!(eta_kernel(&g, 0, 2.0).is_err());
        assert!(eta_kernel(&g, 0, 2.5).is_ok());
    }

    #[test]
    fn l1_norm_is_roughly_level_independent() {
        // exact integral on R is 2/(m-1) = 1 for m = 3
        let g = Grid::new(1, 64.0, 1 << 15).unwrap();
        let norms: Vec<f64> = (0..=4).map(|v| eta_kernel(&g, v, 3.0).unwrap().integrate().re).collect();
        let (lo, hi) = norms.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 1.05, "{norms:?}");
    }

    #[test]
    fn positive_everywhere() {
        let g = Grid::new(2, 2.0, 32).unwrap();
        let eta = eta_kernel(&g, -1, 2.5).unwrap();
        assert!(eta.values().iter().all(|z| z.re > 0.0));
    }
}
