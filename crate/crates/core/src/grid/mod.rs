//! Sampled-function substrate: a uniform periodic grid over the box
//! `[-L, L)^n`, dyadic cubes, fields, Fourier transforms and the decay
//! kernels `eta_{v,m}`.
//!
//! Points are stored row-major with axis 0 slowest. The point with axis
//! indices `(i_0, .., i_{n-1})` sits at `x_k = -L + i_k h`, `h = 2L/N`.
//! Frequencies use the angular convention `Ff(xi) = int f(x) e^{-i x.xi} dx`,
//! so DFT bin `k` (signed `k'`) corresponds to `xi = pi k' / L`.

mod cube;
mod fft;
mod field;
pub mod io;
mod kernels;

pub use cube::{CubeGeometry, DyadicCube};
pub use fft::{apply_multiplier, apply_multiplier_to_spectrum, convolve, fourier, inv_fourier, radial_symbol};
pub use field::SampledField;
pub use kernels::{eta_kernel, eta_value};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform periodic grid over `[-L, L)^n`, `n` in {1, 2}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

fn exact_log2(x: f64) -> Option<i32> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let e = x.log2().round() as i32;
    (2f64.powi(e) == x).then_some(e)
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        match exact_log2(half_width) {
            Some(e) if e >= 0 => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "half width must be a power of two >= 1, got {half_width}"
                )))
            }
        }
        if (points_per_axis as f64) < 2.0 * half_width {
            return Err(Error::InvalidGrid(format!(
                "grid spacing exceeds 1 ({} points on a box of side {})",
                points_per_axis,
                2.0 * half_width
            )));
        }
        Ok(Self { dim, half_width, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Coarsest dyadic level whose cubes fit in the box: `-log2(2L)`.
    pub fn v_min(&self) -> i32 {
        -exact_log2(2.0 * self.half_width).expect("validated in constructor")
    }

    /// Level whose cubes have side `h`: `log2(N / 2L)`.
    pub fn v_finest(&self) -> i32 {
        exact_log2(self.points_per_axis as f64 / (2.0 * self.half_width)).expect("validated")
    }

    /// Largest admissible truncation level: `log2(N / 2L) - 1`.
    pub fn v_max_limit(&self) -> i32 {
        self.v_finest() - 1
    }

    pub fn check_v_max(&self, v_max: i32) -> Result<()> {
        if v_max < 0 || v_max > self.v_max_limit() {
            return Err(Error::BandOverflow { v_max, limit: self.v_max_limit() });
        }
        Ok(())
    }

    pub fn coord(&self, axis_index: usize) -> f64 {
        -self.half_width + axis_index as f64 * self.spacing()
    }

    /// Axis indices of a flat index (unused axes are zero).
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        let n = self.points_per_axis;
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    pub fn flat_index(&self, ai: [usize; 2]) -> usize {
        if self.dim == 1 {
            ai[0]
        } else {
            ai[0] * self.points_per_axis + ai[1]
        }
    }

    /// Coordinates of a grid point (unused axes are zero).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ai = self.axis_indices(idx);
        let mut x = [0.0; 2];
        for (k, xk) in x.iter_mut().enumerate().take(self.dim) {
            *xk = self.coord(ai[k]);
        }
        x
    }

    /// Euclidean norm of a grid point (no wrapping).
    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.point(idx);
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    }

    /// Wraps a coordinate difference into `[-L, L)`.
    pub fn min_image(&self, d: f64) -> f64 {
        let period = 2.0 * self.half_width;
        let mut r = (d + self.half_width).rem_euclid(period) - self.half_width;
        if r >= self.half_width {
            r -= period;
        }
        r
    }

    /// Signed minimal-image index offset along one axis, in `[-N/2, N/2)`.
    pub fn min_image_offset(&self, d: isize) -> isize {
        let n = self.points_per_axis as isize;
        let r = d.rem_euclid(n);
        if r >= n / 2 {
            r - n
        } else {
            r
        }
    }

    /// Minimal-image Euclidean distance between two grid points.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ia = self.axis_indices(a);
        let ib = self.axis_indices(b);
        let h = self.spacing();
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = self.min_image_offset(ia[k] as isize - ib[k] as isize) as f64 * h;
            s += d * d;
        }
        s.sqrt()
    }

    /// Minimal-image distance of a grid point from the origin.
    pub fn periodic_radius(&self, idx: usize) -> f64 {
        let ai = self.axis_indices(idx);
        let h = self.spacing();
        let half = (self.points_per_axis / 2) as isize;
        let mut s = 0.0;
        for &a in ai.iter().take(self.dim) {
            // the origin sits at axis index N/2
            let d = self.min_image_offset(a as isize - half) as f64 * h;
            s += d * d;
        }
        s.sqrt()
    }

    /// Index of the grid point at the origin.
    pub fn origin_index(&self) -> usize {
        let half = self.points_per_axis / 2;
        self.flat_index([half, half])
    }

    /// Angular frequency of DFT bin `k` along one axis.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.points_per_axis;
        let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        std::f64::consts::PI * signed / self.half_width
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency_vector(&self, idx: usize) -> [f64; 2] {
        let ai = self.axis_indices(idx);
        let mut w = [0.0; 2];
        for (k, wk) in w.iter_mut().enumerate().take(self.dim) {
            *wk = self.frequency(ai[k]);
        }
        w
    }

    /// `|xi|` for a flat spectral index.
    pub fn frequency_norm(&self, idx: usize) -> f64 {
        let w = self.frequency_vector(idx);
        (w[0] * w[0] + w[1] * w[1]).sqrt()
    }

    /// Largest representable angular frequency along an axis, `pi N / 2L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.points_per_axis as f64 / (2.0 * self.half_width)
    }

    pub fn same_as(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// Dyadic cubes `Q_{v,m}` contained in the box, lexicographic in `m`.
    pub fn dyadic_cubes_at_level(&self, v: i32) -> Result<Vec<DyadicCube>> {
        let v_min = self.v_min();
        if v < v_min {
            return Err(Error::LevelBelowMinimum { v, v_min });
        }
        if v > self.v_finest() + 8 {
            return Err(Error::InvalidParameter(format!("level {v} is far below grid resolution")));
        }
        // m ranges over [-L 2^v, L 2^v) on every axis
        let per_axis = 1i64 << (v - v_min);
        let lo = -per_axis / 2;
        let mut out = Vec::with_capacity((per_axis as usize).pow(self.dim as u32));
        if self.dim == 1 {
            for m0 in lo..lo + per_axis {
                out.push(DyadicCube::new(v, vec![m0]));
            }
        } else {
            for m0 in lo..lo + per_axis {
                for m1 in lo..lo + per_axis {
                    out.push(DyadicCube::new(v, vec![m0, m1]));
                }
            }
        }
        Ok(out)
    }

    /// All dyadic cubes for levels `v_lo..=v_hi`, ordered by `(v, m)`.
    pub fn dyadic_cubes(&self, v_lo: i32, v_hi: i32) -> Result<Vec<DyadicCube>> {
        let mut out = Vec::new();
        for v in v_lo..=v_hi {
            out.extend(self.dyadic_cubes_at_level(v)?);
        }
        Ok(out)
    }

    /// The single cube equal to the whole box (level `v_min`).
    pub fn box_cube(&self) -> DyadicCube {
        DyadicCube::new(self.v_min(), vec![0; self.dim])
    }

    /// Geometry of a cube on this grid. At level `v_min` the cube `[0, 2L)^n`
    /// is identified with the box `[-L, L)^n` by periodicity.
    pub fn cube_geometry(&self, cube: &DyadicCube) -> CubeGeometry {
        if cube.v <= self.v_min() {
            let side = 2.0 * self.half_width;
            let mut corner = [0.0; 2];
            let mut center = [0.0; 2];
            for k in 0..self.dim {
                corner[k] = -self.half_width;
                center[k] = 0.0;
            }
            return CubeGeometry { side, corner, center, measure: side.powi(self.dim as i32) };
        }
        cube.geometry()
    }

    /// Index range `[lo, hi)` of grid points inside the half-open interval
    /// `[a, b)` along one axis, clipped to the grid.
    pub fn axis_range(&self, a: f64, b: f64) -> (usize, usize) {
        let h = self.spacing();
        let n = self.points_per_axis as f64;
        let lo = ((a + self.half_width) / h).ceil().clamp(0.0, n) as usize;
        let hi = ((b + self.half_width) / h).ceil().clamp(0.0, n) as usize;
        (lo, hi.max(lo))
    }

    /// Flat indices of grid points inside a cube (half-open), in row-major order.
    pub fn cube_indices(&self, cube: &DyadicCube) -> Vec<usize> {
        let g = self.cube_geometry(cube);
        let (lo0, hi0) = self.axis_range(g.corner[0], g.corner[0] + g.side);
        if self.dim == 1 {
            return (lo0..hi0).collect();
        }
        let (lo1, hi1) = self.axis_range(g.corner[1], g.corner[1] + g.side);
        let mut out = Vec::with_capacity((hi0 - lo0) * (hi1 - lo1));
        for i0 in lo0..hi0 {
            for i1 in lo1..hi1 {
                out.push(self.flat_index([i0, i1]));
            }
        }
        out
    }

    /// Does the cube intersect the box?
    pub fn cube_meets_box(&self, cube: &DyadicCube) -> bool {
        let g = self.cube_geometry(cube);
        (0..self.dim).all(|k| g.corner[k] < self.half_width && g.corner[k] + g.side > -self.half_width)
    }

    /// Is the grid point inside the (half-open) cube?
    pub fn cube_contains(&self, cube: &DyadicCube, idx: usize) -> bool {
        let g = self.cube_geometry(cube);
        let x = self.point(idx);
        (0..self.dim).all(|k| g.corner[k] <= x[k] && x[k] < g.corner[k] + g.side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 12).is_err());
        assert!(Grid::new(1, 3.0, 16).is_err());
        assert!(Grid::new(1, 0.5, 16).is_err());
        assert!(Grid::new(1, 8.0, 8).is_err());
        assert!(Grid::new(2, 1.0, 8).is_ok());
    }

    #[test]
    fn level_bounds() {
        let g = Grid::new(1, 4.0, 1024).unwrap();
        assert_eq!(g.v_min(), -3);
        assert_eq!(g.v_finest(), 7);
        assert_eq!(g.v_max_limit(), 6);
        assert!(g.check_v_max(6).is_ok());
        assert!(g.check_v_max(7).is_err());
        assert_eq!(g.spacing(), 1.0 / 128.0);
    }

    #[test]
    fn cubes_at_level_one() {
        let g = Grid::new(1, 1.0, 64).unwrap();
        let cubes = g.dyadic_cubes_at_level(1).unwrap();
        let ms: Vec<i64> = cubes.iter().map(|c| c.m[0]).collect();
        assert_eq!(ms, vec![-2, -1, 0, 1]);
        let coarse = g.dyadic_cubes_at_level(-1).unwrap();
        assert_eq!(coarse.len(), 1);
        let gm = g.cube_geometry(&coarse[0]);
        assert_eq!((gm.corner[0], gm.side), (-1.0, 2.0));
        assert!(matches!(
            g.dyadic_cubes_at_level(-2),
            Err(Error::LevelBelowMinimum { v: -2, v_min: -1 })
        ));
    }

    #[test]
    fn unit_cubes_in_the_plane() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let cubes = g.dyadic_cubes_at_level(0).unwrap();
        assert_eq!(cubes.len(), 4);
        assert_eq!(cubes[0].m, vec![-1, -1]);
        assert_eq!(cubes[3].m, vec![0, 0]);
    }

    #[test]
    fn cubes_partition_the_grid() {
        for g in [Grid::new(1, 2.0, 64).unwrap(), Grid::new(2, 1.0, 32).unwrap()] {
            for v in g.v_min()..=g.v_finest() {
                let cubes = g.dyadic_cubes_at_level(v).unwrap();
                assert_eq!(cubes.len(), 1usize << ((v - g.v_min()) as usize * g.dim()));
                let mut hits = vec![0usize; g.len()];
                for c in &cubes {
                    for i in g.cube_indices(c) {
                        hits[i] += 1;
                    }
                }
                assert!(hits.iter().all(|&h| h == 1), "level {v}");
            }
        }
    }

    #[test]
    fn box_cube_is_whole_box() {
        let g = Grid::new(2, 2.0, 32).unwrap();
        let b = g.box_cube();
        assert_eq!(b.v, g.v_min());
        assert_eq!(g.cube_indices(&b).len(), g.len());
    }

    #[test]
    fn minimal_image() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        assert_eq!(g.min_image(1.5), -0.5);
        assert_eq!(g.min_image(-1.0), -1.0);
        assert_eq!(g.min_image(1.0), -1.0);
        assert_eq!(g.min_image_offset(15), -1);
        assert_eq!(g.min_image_offset(8), -8);
        assert_eq!(g.periodic_radius(g.origin_index()), 0.0);
        assert_eq!(g.distance(0, 15), g.spacing());
    }
}
