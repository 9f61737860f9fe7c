use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, SampledField};
use crate::error::Result;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new())).lock().expect("fft planner poisoned");
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalised n-dimensional DFT in place.
fn dft_in_place(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let fft = plan(n, inverse);
    fft.process(data);
    if grid.dim() == 2 {
        transpose(data, n);
        fft.process(data);
        transpose(data, n);
    }
}

/// `(-1)^{k_0 + .. + k_{n-1}}`: the phase from placing `x_0 = -L`.
fn checkerboard(grid: &Grid, data: &mut [Complex64], scale: f64) {
    let n = grid.points_per_axis();
    for (idx, z) in data.iter_mut().enumerate() {
        let parity = if grid.dim() == 1 { idx } else { idx / n + idx % n };
        *z *= if parity % 2 == 0 { scale } else { -scale };
    }
}

/// Spectrum `Ff(xi_k) = h^n sum_j f(x_j) e^{-i xi_k . x_j}` in DFT order.
pub fn fourier(f: &SampledField) -> SampledField {
    let grid = *f.grid();
    let mut data = f.values().to_vec();
    dft_in_place(&grid, &mut data, false);
    checkerboard(&grid, &mut data, grid.cell_volume());
    SampledField::from_parts(grid, data)
}

/// Inverse of [`fourier`]: `f(x_j) = (2L)^{-n} sum_k F(xi_k) e^{i xi_k . x_j}`.
pub fn inv_fourier(spectrum: &SampledField) -> SampledField {
    let grid = *spectrum.grid();
    let mut data = spectrum.values().to_vec();
    checkerboard(&grid, &mut data, 1.0 / grid.volume());
    dft_in_place(&grid, &mut data, true);
    SampledField::from_parts(grid, data)
}

/// Samples a radial symbol `m(|xi|)` at every spectral index.
pub fn radial_symbol(grid: &Grid, m: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|k| m(grid.frequency_norm(k))).collect()
}

/// `F^{-1}[m Ff]` for a real symbol sampled in DFT order.
pub fn apply_multiplier(f: &SampledField, symbol: &[f64]) -> SampledField {
    let spec = fourier(f);
    apply_multiplier_to_spectrum(&spec, symbol)
}

/// `F^{-1}[m F]` for a precomputed spectrum.
pub fn apply_multiplier_to_spectrum(spectrum: &SampledField, symbol: &[f64]) -> SampledField {
    debug_assert_eq!(symbol.len(), spectrum.values().len());
    let grid = *spectrum.grid();
    let data = spectrum.values().iter().zip(symbol).map(|(z, m)| z * m).collect();
    inv_fourier(&SampledField::from_parts(grid, data))
}

/// Periodic convolution `(f*g)(x) = h^n sum_y f(y) g(x - y)`, differences
/// taken modulo the box.
pub fn convolve(f: &SampledField, g: &SampledField) -> Result<SampledField> {
    f.grid().same_as(g.grid())?;
    let prod = fourier(f).mul(&fourier(g))?;
    Ok(inv_fourier(&prod))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn direct_convolution(f: &SampledField, g: &SampledField) -> Vec<Complex64> {
        // y_i + z_l = x_j  <=>  l = j - i + N/2 (mod N) per axis
        let grid = f.grid();
        let n = grid.points_per_axis() as isize;
        let w = grid.cell_volume();
        (0..grid.len())
            .map(|j| {
                let aj = grid.axis_indices(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..grid.len() {
                    let ai = grid.axis_indices(i);
                    let mut al = [0usize; 2];
                    for k in 0..grid.dim() {
                        al[k] = (aj[k] as isize - ai[k] as isize + n / 2).rem_euclid(n) as usize;
                    }
                    acc += f.values()[i] * g.values()[grid.flat_index(al)];
                }
                acc * w
            })
            .collect()
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let grid = Grid::new(1, 8.0, 256).unwrap();
        let f = SampledField::from_real_fn(grid, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        let spec = fourier(&f);
        let root = (2.0 * std::f64::consts::PI).sqrt();
        for k in 0..grid.len() {
            let xi = grid.frequency(k);
            let expect = root * (-xi * xi / 2.0).exp();
            assert!((spec.values()[k] - expect).norm() < 1e-12, "bin {k}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for grid in [Grid::new(1, 2.0, 64).unwrap(), Grid::new(2, 1.0, 16).unwrap()] {
            let f = SampledField::from_fn(grid, |x| {
                Complex64::new(x.iter().map(|t| (3.0 * t).sin()).sum::<f64>(), x[0] * x[0])
            })
            .unwrap();
            let spec = fourier(&f);
            let back = inv_fourier(&spec);
            assert!(back.max_abs_diff(&f).unwrap() < 1e-12);
            let energy: f64 = spec.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.volume();
            assert!((energy - f.l2_norm().powi(2)).abs() < 1e-10 * energy);
        }
    }

    #[test]
    fn convolution_with_delta_is_identity() {
        let grid = Grid::new(2, 1.0, 16).unwrap();
        let f = SampledField::from_real_fn(grid, |x| x[0] - 2.0 * x[1] * x[1]).unwrap();
        let g = convolve(&f, &SampledField::delta(grid)).unwrap();
        assert!(g.max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        for grid in [Grid::new(1, 2.0, 32).unwrap(), Grid::new(2, 1.0, 8).unwrap()] {
            let f = SampledField::from_real_fn(grid, |x| (x[0] + 0.3).cos() * (1.0 + x.len() as f64)).unwrap();
            let g = SampledField::from_fn(grid, |x| Complex64::new((-x[0].abs()).exp(), x[x.len() - 1])).unwrap();
            let fast = convolve(&f, &g).unwrap();
            let slow = direct_convolution(&f, &g);
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn indicator_self_convolution() {
        // discrete chi_[0,1) * chi_[0,1) at x = 1 counts N/(2L) - 1 overlaps
        let grid = Grid::new(1, 4.0, 1024).unwrap();
        let chi = SampledField::from_real_fn(grid, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap();
        let c = convolve(&chi, &chi).unwrap();
        let h = grid.spacing();
        let at = |x: f64| c.values()[((x + 4.0) / h).round() as usize].re;
        assert!((at(1.0) - (1.0 - h)).abs() < 1e-12);
        assert!((at(1.0 - h) - 1.0).abs() < 1e-12);
        assert!((at(0.0) - h).abs() < 1e-12);
        assert!((at(0.5) - (0.5 + h)).abs() < 1e-12);
    }
}
