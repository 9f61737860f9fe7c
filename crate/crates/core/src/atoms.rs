//! `[K, L]`-atoms: admissible orders, validation and a constructive atomic
//! decomposition with exact re-synthesis.
//!
//! The analysing kernels are compactly supported: a bump `b` of radius 1/4
//! at level 0 and `theta_v = 2^{-2Mv} (-Delta_h)^M b_v` above it, whose
//! discrete moments below order `2M` vanish. The matching synthesis symbols
//! are `m_v / E` with `E = sum_v F theta_v m_v`, where `m_v` is the
//! Littlewood-Paley symbol of level `v`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{unit_bump, ExponentField};
use crate::grid::{apply_multiplier_to_spectrum, fourier, inv_fourier, DyadicCube, Grid, SampledField};
use crate::lp::{annulus_profile, cutoff_profile, dilated_symbol, Profile};
use crate::phi::CoeffSequence;

/// Largest derivative order the finite-difference validator accepts.
pub const MAX_DERIVATIVE_ORDER: i32 = 8;
/// Slack on the derivative bound.
pub const DERIVATIVE_SLACK: f64 = 1.05;
/// Default relative tolerance for support and moment checks.
pub const DEFAULT_ATOM_TOL: f64 = 1e-8;

/// Smallest `(K, L)` allowed for atoms of the space with these exponents.
pub fn admissible_kl(
    alpha: &ExponentField,
    tau: &ExponentField,
    p: &ExponentField,
    q: Option<&ExponentField>,
) -> Result<(i32, i32)> {
    if !(tau.min() > 0.0) {
        return Err(Error::Hypothesis(format!("atomic orders need tau^- > 0, got {}", tau.min())));
    }
    let n = alpha.grid().dim() as f64;
    let k = ((alpha.max() + n * tau.max()).floor() as i32 + 1).max(0);
    let low = q.map_or(p.min(), |q| p.min().min(q.min())).min(1.0);
    let l = ((n * (tau.max() / (tau.min() * low) - 1.0) - alpha.min()).floor() as i32).max(-1);
    Ok((k, l))
}

/// Multi-indices `beta` with `|beta| <= order` in `dim` variables.
pub fn multi_indices(dim: usize, order: i32) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    if order < 0 {
        return out;
    }
    for total in 0..=order as u32 {
        if dim == 1 {
            out.push([total, 0]);
        } else {
            for b0 in (0..=total).rev() {
                out.push([b0, total - b0]);
            }
        }
    }
    out
}

/// A dense rectangle of samples on the periodic grid. `start` is the grid
/// axis index of the first sample; the patch may wrap. Samples outside the
/// patch are zero unless the patch spans a whole axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub start: [isize; 2],
    pub extent: [usize; 2],
    pub values: Vec<Complex64>,
}

impl Patch {
    pub fn zeros(start: [isize; 2], extent: [usize; 2]) -> Self {
        Self { start, extent, values: vec![Complex64::new(0.0, 0.0); extent[0] * extent[1]] }
    }

    pub fn from_field(f: &SampledField) -> Self {
        let g = f.grid();
        let n = g.points_per_axis();
        let extent = if g.dim() == 1 { [n, 1] } else { [n, n] };
        Self { start: [0, 0], extent, values: f.values().to_vec() }
    }

    fn local(&self, i0: usize, i1: usize) -> usize {
        i0 * self.extent[1] + i1
    }

    /// Grid index of a local cell.
    pub fn grid_index(&self, grid: &Grid, i0: usize, i1: usize) -> usize {
        let n = grid.points_per_axis() as isize;
        let a0 = (self.start[0] + i0 as isize).rem_euclid(n) as usize;
        let a1 = (self.start[1] + i1 as isize).rem_euclid(n) as usize;
        grid.flat_index([a0, a1])
    }

    pub fn to_field(&self, grid: &Grid) -> SampledField {
        let mut vals = vec![Complex64::new(0.0, 0.0); grid.len()];
        self.add_into(grid, &mut vals, Complex64::new(1.0, 0.0));
        SampledField::new(*grid, vals).expect("patch values are finite")
    }

    /// `acc += c * patch` on the grid.
    pub fn add_into(&self, grid: &Grid, acc: &mut [Complex64], c: Complex64) {
        for i0 in 0..self.extent[0] {
            for i1 in 0..self.extent[1] {
                acc[self.grid_index(grid, i0, i1)] += c * self.values[self.local(i0, i1)];
            }
        }
    }

    /// Pads with `r` zero cells on each used axis. Falls back to the whole
    /// periodic grid when the padding would wrap onto itself.
    fn padded(&self, grid: &Grid, r: usize) -> (Patch, [bool; 2]) {
        let n = grid.points_per_axis();
        let dim = grid.dim();
        if (0..dim).any(|k| self.extent[k] < n && self.extent[k] + 2 * r >= n) {
            return (Patch::from_field(&self.to_field(grid)), [true, true]);
        }
        let mut periodic = [true, true];
        let mut start = self.start;
        let mut extent = self.extent;
        let mut off = [0usize; 2];
        for k in 0..dim {
            if self.extent[k] < n {
                periodic[k] = false;
                start[k] -= r as isize;
                extent[k] += 2 * r;
                off[k] = r;
            }
        }
        let mut out = Patch::zeros(start, extent);
        for i0 in 0..self.extent[0] {
            for i1 in 0..self.extent[1] {
                let j = out.local(i0 + off[0], i1 + off[1]);
                out.values[j] = self.values[self.local(i0, i1)];
            }
        }
        (out, periodic)
    }
}

/// Fourth-order centred first difference along `axis`.
fn difference(p: &Patch, axis: usize, periodic: bool, h: f64) -> Patch {
    let [e0, e1] = p.extent;
    let len = p.extent[axis] as isize;
    let mut out = Patch::zeros(p.start, p.extent);
    let at = |i0: isize, i1: isize| -> Complex64 {
        let (mut i0, mut i1) = (i0, i1);
        let idx = if axis == 0 { &mut i0 } else { &mut i1 };
        if periodic {
            *idx = idx.rem_euclid(len);
        } else if *idx < 0 || *idx >= len {
            return Complex64::new(0.0, 0.0);
        }
        p.values[i0 as usize * e1 + i1 as usize]
    };
    for i0 in 0..e0 as isize {
        for i1 in 0..e1 as isize {
            let shift = |d: isize| if axis == 0 { at(i0 + d, i1) } else { at(i0, i1 + d) };
            let v = (shift(-2) - shift(-1) * 8.0 + shift(1) * 8.0 - shift(2)) / (12.0 * h);
            out.values[i0 as usize * e1 + i1 as usize] = v;
        }
    }
    out
}

/// `D^beta` by composed finite differences.
fn derivative(p: &Patch, periodic: [bool; 2], beta: [u32; 2], h: f64) -> Patch {
    let mut cur = p.clone();
    for axis in 0..2 {
        for _ in 0..beta[axis] {
            cur = difference(&cur, axis, periodic[axis], h);
        }
    }
    cur
}

/// A sampled function claimed to be a `[K, L]`-atom for `gamma Q_{v,m}`.
#[derive(Clone, Debug)]
pub struct AtomCandidate {
    pub grid: Grid,
    pub patch: Patch,
    pub cube: DyadicCube,
    pub gamma: f64,
    pub k: i32,
    pub l: i32,
}

impl AtomCandidate {
    pub fn from_field(field: &SampledField, cube: DyadicCube, gamma: f64, k: i32, l: i32) -> Self {
        Self { grid: *field.grid(), patch: Patch::from_field(field), cube, gamma, k, l }
    }
}

/// Outcome of [`validate_atom`]. Margins are ratios to the allowed value,
/// so a check passes when its margin is at most 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub support_ok: bool,
    pub derivative_ok: bool,
    pub moments_ok: bool,
    pub support_margin: f64,
    pub derivative_margin: f64,
    pub moment_margin: f64,
}

impl AtomReport {
    pub fn ok(&self) -> bool {
        self.support_ok && self.derivative_ok && self.moments_ok
    }
}

pub fn validate_atom(c: &AtomCandidate, tol: f64) -> Result<AtomReport> {
    let grid = c.grid;
    let n = grid.points_per_axis();
    let dim = grid.dim();
    if !(c.gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {}", c.gamma)));
    }
    if c.k < 0 || c.k > MAX_DERIVATIVE_ORDER || 2 * c.k as usize >= n / 2 {
        return Err(Error::InvalidParameter(format!(
            "derivative order {} exceeds the finite-difference limit for {} points per axis",
            c.k, n
        )));
    }
    let h = grid.spacing();
    let v = c.cube.v;
    let geo = grid.cube_geometry(&c.cube);
    let sup = c.patch.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(AtomReport {
            support_ok: true,
            derivative_ok: true,
            moments_ok: true,
            support_margin: 0.0,
            derivative_margin: 0.0,
            moment_margin: 0.0,
        });
    }
    let half = c.gamma * geo.side / 2.0;
    let rel = |i0: usize, i1: usize| -> [f64; 2] {
        let x = grid.point(c.patch.grid_index(&grid, i0, i1));
        let mut d = [0.0; 2];
        for k in 0..dim {
            d[k] = grid.min_image(x[k] - geo.center[k]);
        }
        d
    };

    // support
    let mut outside = 0.0f64;
    for i0 in 0..c.patch.extent[0] {
        for i1 in 0..c.patch.extent[1] {
            let d = rel(i0, i1);
            if d[..dim].iter().any(|t| t.abs() > half * (1.0 + 1e-12)) {
                outside = outside.max(c.patch.values[c.patch.local(i0, i1)].norm());
            }
        }
    }
    let support_margin = outside / (tol * sup);

    // derivatives
    let (padded, periodic) = c.patch.padded(&grid, 2 * c.k as usize);
    let mut derivative_margin = 0.0f64;
    for beta in multi_indices(dim, c.k) {
        let order = (beta[0] + beta[1]) as f64;
        let d = derivative(&padded, periodic, beta, h);
        let peak = d.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bound = DERIVATIVE_SLACK * 2f64.powf(v as f64 * (order + 0.5));
        derivative_margin = derivative_margin.max(peak / bound);
    }

    // moments
    let mut moment_margin = 0.0f64;
    if v > 0 && c.l >= 0 {
        let measure = (c.gamma * geo.side).powi(dim as i32);
        let w = grid.cell_volume();
        for beta in multi_indices(dim, c.l) {
            let mut acc = Complex64::new(0.0, 0.0);
            for i0 in 0..c.patch.extent[0] {
                for i1 in 0..c.patch.extent[1] {
                    let d = rel(i0, i1);
                    let mono = d[0].powi(beta[0] as i32) * if dim == 2 { d[1].powi(beta[1] as i32) } else { 1.0 };
                    acc += c.patch.values[c.patch.local(i0, i1)] * mono;
                }
            }
            let scale = tol * sup * measure * half.powi((beta[0] + beta[1]) as i32);
            moment_margin = moment_margin.max((acc * w).norm() / scale);
        }
    }
    Ok(AtomReport {
        support_ok: support_margin <= 1.0,
        derivative_ok: derivative_margin <= 1.0,
        moments_ok: moment_margin <= 1.0,
        support_margin,
        derivative_margin,
        moment_margin,
    })
}

/// The compactly supported analysing kernel of one level, as a centred patch
/// of radius `radius` cells per axis.
#[derive(Clone, Debug)]
struct Kernel {
    radius: usize,
    patch: Patch,
}

/// Number of Laplacians needed for vanishing moments up to order `l`.
pub fn laplacian_power(l: i32) -> usize {
    if l < 0 {
        0
    } else {
        (l as usize) / 2 + 1
    }
}

fn build_kernel(grid: &Grid, v: i32, m_lap: usize) -> Result<Kernel> {
    let h = grid.spacing();
    let dim = grid.dim();
    let s = 2f64.powi(v);
    // bump radius 2^{-v}/4; cells strictly inside
    let reach = (0.25 / (s * h)).ceil() as usize;
    let power = if v == 0 { 0 } else { m_lap };
    let radius = reach + power;
    if 2 * radius + 1 >= grid.points_per_axis() {
        return Err(Error::InvalidGrid(format!("level {v} kernel does not fit in the grid")));
    }
    let width = 2 * radius + 1;
    let extent = if dim == 1 { [width, 1] } else { [width, width] };
    // centred on the origin, which sits at axis index N/2
    let o = (grid.points_per_axis() / 2) as isize - radius as isize;
    let start = [o, if dim == 1 { 0 } else { o }];
    let mut patch = Patch::zeros(start, extent);
    let amp = s.powi(dim as i32);
    for i0 in 0..extent[0] {
        for i1 in 0..extent[1] {
            let x0 = (i0 as f64 - radius as f64) * h;
            let x1 = if dim == 1 { 0.0 } else { (i1 as f64 - radius as f64) * h };
            let r = (x0 * x0 + x1 * x1).sqrt();
            patch.values[i0 * extent[1] + i1] = Complex64::new(amp * unit_bump(4.0 * s * r), 0.0);
        }
    }
    for _ in 0..power {
        patch = neg_laplacian(&patch, dim, h);
    }
    let scale = 2f64.powi(-2 * power as i32 * v);
    for z in patch.values.iter_mut() {
        *z *= scale;
    }
    Ok(Kernel { radius, patch })
}

/// `-Delta_h` on a zero-padded patch (support must stay inside).
fn neg_laplacian(p: &Patch, dim: usize, h: f64) -> Patch {
    let [e0, e1] = p.extent;
    let mut out = Patch::zeros(p.start, p.extent);
    let get = |i0: isize, i1: isize| -> Complex64 {
        if i0 < 0 || i1 < 0 || i0 >= e0 as isize || i1 >= e1 as isize {
            Complex64::new(0.0, 0.0)
        } else {
            p.values[i0 as usize * e1 + i1 as usize]
        }
    };
    for i0 in 0..e0 as isize {
        for i1 in 0..e1 as isize {
            let mut acc = get(i0, i1) * (2.0 * dim as f64) - get(i0 - 1, i1) - get(i0 + 1, i1);
            if dim == 2 {
                acc -= get(i0, i1 - 1) + get(i0, i1 + 1);
            }
            out.values[i0 as usize * e1 + i1 as usize] = acc / (h * h);
        }
    }
    out
}

/// A decomposition `f = sum lambda_{v,m} rho_{v,m}`.
#[derive(Clone, Debug)]
pub struct AtomicDecomposition {
    pub grid: Grid,
    pub k: i32,
    pub l: i32,
    pub gamma: f64,
    pub c_theta: f64,
    /// Smallest value of `E` on the covered band.
    pub e_min: f64,
    pub coefficients: CoeffSequence,
    pub atoms: BTreeMap<DyadicCube, Patch>,
}

impl AtomicDecomposition {
    pub fn atom_field(&self, cube: &DyadicCube) -> Option<SampledField> {
        self.atoms.get(cube).map(|p| p.to_field(&self.grid))
    }

    pub fn candidate(&self, cube: &DyadicCube) -> Option<AtomCandidate> {
        self.atoms.get(cube).map(|p| AtomCandidate {
            grid: self.grid,
            patch: p.clone(),
            cube: cube.clone(),
            gamma: self.gamma,
            k: self.k,
            l: self.l,
        })
    }
}

/// `C_theta = max_{v, |beta| <= K} 2^{-v(n + |beta|)} sup |D^beta theta_v|`,
/// derivatives taken with the validator's difference operator.
fn kernel_constant(grid: &Grid, kernels: &[Kernel], k: i32) -> f64 {
    let h = grid.spacing();
    let n = grid.dim() as f64;
    let mut c = 0.0f64;
    for (v, ker) in kernels.iter().enumerate() {
        let (padded, periodic) = ker.patch.padded(grid, 2 * k as usize);
        for beta in multi_indices(grid.dim(), k) {
            let order = (beta[0] + beta[1]) as f64;
            let d = derivative(&padded, periodic, beta, h);
            let peak = d.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            c = c.max(2f64.powf(-(v as f64) * (n + order)) * peak);
        }
    }
    c
}

/// Atomic decomposition of `f` with atoms of orders `(k, l)` on levels
/// `0..=v_max`. `gamma` is raised above 3 only if a kernel would not fit.
pub fn atomic_analyze(f: &SampledField, v_max: i32, k: i32, l: i32) -> Result<AtomicDecomposition> {
    let grid = *f.grid();
    grid.check_v_max(v_max)?;
    if k < 0 || k > MAX_DERIVATIVE_ORDER || 2 * k as usize >= grid.points_per_axis() / 2 {
        return Err(Error::InvalidParameter(format!("derivative order {k} is out of range")));
    }
    let m_lap = laplacian_power(l);
    let kernels = (0..=v_max).map(|v| build_kernel(&grid, v, m_lap)).collect::<Result<Vec<_>>>()?;
    let h = grid.spacing();
    let mut gamma = 3.0f64;
    for (v, ker) in kernels.iter().enumerate() {
        let side = 2f64.powi(-(v as i32));
        gamma = gamma.max(1.0 + 2.0 * ker.radius as f64 * h / side);
    }

    // E = sum_v F theta_v m_v
    let symbols: Vec<Vec<f64>> = (0..=v_max)
        .map(|v| dilated_symbol(&grid, if v == 0 { Profile::Cutoff } else { Profile::Annulus }, v))
        .collect();
    let kernel_spectra: Vec<Vec<Complex64>> = kernels
        .iter()
        .map(|ker| fourier(&ker.patch.to_field(&grid)).into_values())
        .collect();
    let mut e = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (sym, spec) in symbols.iter().zip(&kernel_spectra) {
        for ((acc, &m), s) in e.iter_mut().zip(sym).zip(spec) {
            *acc += s * m;
        }
    }
    let band = 2f64.powi(v_max);
    let mut e_min = f64::INFINITY;
    for (idx, z) in e.iter().enumerate() {
        if grid.frequency_norm(idx) <= band {
            e_min = e_min.min(z.re);
        }
    }
    if !(e_min > 0.0) {
        return Err(Error::Hypothesis(format!("kernel symbol sum is not positive on the band (min {e_min})")));
    }

    let c_theta = kernel_constant(&grid, &kernels, k);
    let spec = fourier(f);
    let w = grid.cell_volume();
    let levels: Vec<Vec<(DyadicCube, Complex64, Patch)>> = (0..=v_max)
        .into_par_iter()
        .map(|v| {
            let sym = &symbols[v as usize];
            let dual: Vec<f64> = sym
                .iter()
                .zip(&e)
                .map(|(&m, z)| if m == 0.0 || z.re <= 0.0 { 0.0 } else { m / z.re })
                .collect();
            let g = apply_multiplier_to_spectrum(&spec, &dual);
            let ker = &kernels[v as usize];
            let mut out = Vec::new();
            for cube in grid.dyadic_cubes_at_level(v).expect("levels in range") {
                let idx = grid.cube_indices(&cube);
                let sup = idx.iter().map(|&i| g.values()[i].norm()).fold(0.0, f64::max);
                let lambda = c_theta * sup;
                if lambda == 0.0 {
                    continue;
                }
                let patch = atom_patch(&grid, &cube, ker, &g, w / lambda);
                out.push((cube, Complex64::new(lambda, 0.0), patch));
            }
            out
        })
        .collect();
    let mut coefficients = CoeffSequence::new();
    let mut atoms = BTreeMap::new();
    for (cube, lambda, patch) in levels.into_iter().flatten() {
        coefficients.insert(cube.clone(), lambda);
        atoms.insert(cube, patch);
    }
    Ok(AtomicDecomposition { grid, k, l, gamma, c_theta, e_min, coefficients, atoms })
}

/// `scale * sum_{y in Q} theta(x - y) g(y)` on the patch `Q + supp theta`.
fn atom_patch(grid: &Grid, cube: &DyadicCube, ker: &Kernel, g: &SampledField, scale: f64) -> Patch {
    let dim = grid.dim();
    let geo = grid.cube_geometry(cube);
    let (lo0, hi0) = grid.axis_range(geo.corner[0], geo.corner[0] + geo.side);
    let (lo1, hi1) = if dim == 2 { grid.axis_range(geo.corner[1], geo.corner[1] + geo.side) } else { (0, 1) };
    let r = ker.radius;
    let extent = [hi0 - lo0 + 2 * r, if dim == 2 { hi1 - lo1 + 2 * r } else { 1 }];
    let start = [lo0 as isize - r as isize, if dim == 2 { lo1 as isize - r as isize } else { 0 }];
    let mut patch = Patch::zeros(start, extent);
    let ke = ker.patch.extent;
    for y0 in lo0..hi0 {
        for y1 in lo1..hi1 {
            let gy = g.values()[grid.flat_index([y0, y1])] * scale;
            if gy == Complex64::new(0.0, 0.0) {
                continue;
            }
            // kernel cell (k0, k1) sits at offset (k0 - r, k1 - r) from y
            let b0 = y0 - lo0;
            let b1 = if dim == 2 { y1 - lo1 } else { 0 };
            for k0 in 0..ke[0] {
                let row = (b0 + k0) * extent[1];
                let krow = k0 * ke[1];
                for k1 in 0..ke[1] {
                    patch.values[row + b1 + k1] += ker.patch.values[krow + k1] * gy;
                }
            }
        }
    }
    patch
}

/// `sum lambda_{v,m} rho_{v,m}` in `(v, m)` order.
pub fn atomic_synthesize(d: &AtomicDecomposition) -> SampledField {
    let mut acc = vec![Complex64::new(0.0, 0.0); d.grid.len()];
    for (cube, lambda) in d.coefficients.iter() {
        if let Some(p) = d.atoms.get(cube) {
            p.add_into(&d.grid, &mut acc, *lambda);
        }
    }
    SampledField::new(d.grid, acc).expect("finite sums")
}

/// Largest measured constant in the two kernel bounds for `phi_j * rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBound {
    pub c: f64,
    pub cube: Option<DyadicCube>,
    pub j: i32,
}

/// Measures `c` in `|phi_j * rho_{v,m}(x)| <= c 2^{(v-j)K + vn/2} (1 + 2^v |x - x_Q|)^{-M}`
/// (`v <= j`) and `<= c 2^{(j-v)(L+n+1) + vn/2} (1 + 2^j |x - x_Q|)^{-M}` (`v >= j`)
/// over the given atoms and `j = 0..=v_max`.
pub fn fj_kernel_bound(
    grid: &Grid,
    atoms: &[(DyadicCube, SampledField)],
    k: i32,
    l: i32,
    v_max: i32,
    m_decay: f64,
) -> Result<KernelBound> {
    grid.check_v_max(v_max)?;
    let n = grid.dim() as f64;
    let symbols: Vec<Vec<f64>> = (0..=v_max)
        .map(|j| {
            (0..grid.len())
                .map(|i| {
                    let r = grid.frequency_norm(i) * 2f64.powi(-j);
                    if j == 0 {
                        cutoff_profile(r)
                    } else {
                        annulus_profile(r)
                    }
                })
                .collect()
        })
        .collect();
    let results: Vec<KernelBound> = atoms
        .par_iter()
        .map(|(cube, rho)| {
            let geo = grid.cube_geometry(cube);
            let v = cube.v;
            let spec = fourier(rho);
            let mut best = KernelBound { c: 0.0, cube: None, j: 0 };
            for j in 0..=v_max {
                let conv = inv_fourier(&SampledField::from_parts(
                    *grid,
                    spec.values().iter().zip(&symbols[j as usize]).map(|(z, m)| z * m).collect(),
                ));
                let (amp, s) = if v <= j {
                    (2f64.powf(((v - j) * k) as f64 + v as f64 * n / 2.0), 2f64.powi(v))
                } else {
                    (2f64.powf((j - v) as f64 * (l as f64 + n + 1.0) + v as f64 * n / 2.0), 2f64.powi(j))
                };
                for (i, z) in conv.values().iter().enumerate() {
                    let x = grid.point(i);
                    let mut d2 = 0.0;
                    for kx in 0..grid.dim() {
                        d2 += grid.min_image(x[kx] - geo.corner[kx]).powi(2);
                    }
                    let bound = amp * (1.0 + s * d2.sqrt()).powf(-m_decay);
                    let c = z.norm() / bound;
                    if c > best.c {
                        best = KernelBound { c, cube: Some(cube.clone()), j };
                    }
                }
            }
            best
        })
        .collect();
    Ok(results.into_iter().fold(KernelBound { c: 0.0, cube: None, j: 0 }, |a, b| if b.c > a.c { b } else { a }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let c = |x: f64| ExponentField::constant(g, x).unwrap();
        let (k, _) = admissible_kl(&c(1.5), &c(0.2), &c(2.0), Some(&c(2.0))).unwrap();
        assert_eq!(k, 2);
        let (_, l) = admissible_kl(&c(0.0), &c(0.5), &c(1.0), Some(&c(1.0))).unwrap();
        assert_eq!(l, 0);
        let (_, l) = admissible_kl(&c(50.0), &c(0.5), &c(0.5), Some(&c(1.0))).unwrap();
        assert_eq!(l, -1);
        assert!(admissible_kl(&c(0.0), &c(0.0), &c(1.0), None).is_err());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert!(multi_indices(2, -1).is_empty());
    }

    fn bump_field(grid: Grid, center: f64, radius: f64, amp: f64) -> SampledField {
        SampledField::from_real_fn(grid, |x| amp * unit_bump((x[0] - center) / radius)).unwrap()
    }

    #[test]
    fn zero_field_is_an_atom() {
        let g = Grid::new(1, 4.0, 256).unwrap();
        let c = AtomCandidate::from_field(&SampledField::zeros(g), DyadicCube::new(1, vec![0]), 3.0, 2, 1);
        assert!(validate_atom(&c, 1e-8).unwrap().ok());
    }

    #[test]
    fn support_violation() {
        let g = Grid::new(1, 4.0, 512).unwrap();
        // Q_{0,0} = [0,1), 3Q = [-1, 2); bump of radius 1.8 at 0.5 leaks out
        let f = bump_field(g, 0.5, 1.8, 0.1);
        let r = validate_atom(&AtomCandidate::from_field(&f, DyadicCube::new(0, vec![0]), 3.0, 0, -1), 1e-8).unwrap();
        assert!(!r.support_ok);
        let f = bump_field(g, 0.5, 1.2, 0.1);
        let r = validate_atom(&AtomCandidate::from_field(&f, DyadicCube::new(0, vec![0]), 3.0, 0, -1), 1e-8).unwrap();
        assert!(r.support_ok);
    }

    #[test]
    fn odd_bump_has_zero_mean() {
        let g = Grid::new(1, 4.0, 1024).unwrap();
        // derivative of a bump centred at c_Q = 0.25 for Q_{1,0}
        let f = SampledField::from_real_fn(g, |x| {
            let t = (x[0] - 0.25) / 0.5;
            if t.abs() >= 1.0 {
                0.0
            } else {
                0.01 * -2.0 * t / (1.0 - t * t).powi(2) * unit_bump(t)
            }
        })
        .unwrap();
        let r = validate_atom(&AtomCandidate::from_field(&f, DyadicCube::new(1, vec![0]), 3.0, 1, 0), 1e-8).unwrap();
        assert!(r.moments_ok, "{r:?}");
        assert!(r.support_ok);
    }

    #[test]
    fn derivative_order_limit() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let c = AtomCandidate::from_field(&SampledField::zeros(g), DyadicCube::new(0, vec![0]), 3.0, 4, 0);
        assert!(validate_atom(&c, 1e-8).is_err());
    }

    #[test]
    fn kernel_moments_vanish() {
        let g = Grid::new(1, 4.0, 1024).unwrap();
        for l in [0, 1, 2, 3] {
            let m = laplacian_power(l);
            let ker = build_kernel(&g, 2, m).unwrap();
            for order in 0..2 * m as i32 {
                let s: f64 = ker
                    .patch
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z.re * ((i as f64 - ker.radius as f64) * g.spacing()).powi(order))
                    .sum();
                let scale: f64 = ker.patch.values.iter().map(|z| z.norm()).sum();
                assert!(s.abs() <= 1e-12 * scale, "l = {l}, order {order}: {s}");
            }
        }
    }

    #[test]
    fn decomposition_reconstructs_and_atoms_validate() {
        let g = Grid::new(1, 4.0, 512).unwrap();
        let f = SampledField::from_real_fn(g, |x| (-2.0 * x[0] * x[0]).exp() * (3.0 * x[0]).cos()).unwrap();
        let symbol: Vec<f64> = (0..g.len()).map(|i| cutoff_profile(g.frequency_norm(i) / 8.0)).collect();
        let f = crate::grid::apply_multiplier(&f, &symbol);
        let d = atomic_analyze(&f, 5, 2, 1).unwrap();
        assert!(d.e_min > 0.0);
        let back = atomic_synthesize(&d);
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-6 * f.sup_norm());
        for cube in d.atoms.keys() {
            let r = validate_atom(&d.candidate(cube).unwrap(), DEFAULT_ATOM_TOL).unwrap();
            assert!(r.ok(), "{cube:?}: {r:?}");
        }
    }

    #[test]
    fn zero_field_empty_decomposition() {
        let g = Grid::new(1, 2.0, 128).unwrap();
        let d = atomic_analyze(&SampledField::zeros(g), 3, 1, 0).unwrap();
        assert!(d.coefficients.is_empty() && d.atoms.is_empty());
        assert_eq!(atomic_synthesize(&d).sup_norm(), 0.0);
    }

    #[test]
    fn fj_bound_grows_with_decay() {
        let g = Grid::new(1, 4.0, 256).unwrap();
        let f = SampledField::from_real_fn(g, |x| (-4.0 * x[0] * x[0]).exp()).unwrap();
        let d = atomic_analyze(&f, 4, 1, 0).unwrap();
        let atoms: Vec<(DyadicCube, SampledField)> = d
            .atoms
            .keys()
            .filter(|q| q.m[0] == 0)
            .map(|q| (q.clone(), d.atom_field(q).unwrap()))
            .collect();
        let a = fj_kernel_bound(&g, &atoms, 1, 0, 4, 2.0).unwrap();
        let b = fj_kernel_bound(&g, &atoms, 1, 0, 4, 4.0).unwrap();
        assert!(a.c.is_finite() && a.c > 0.0);
        assert!(b.c >= a.c);
        assert_eq!(fj_kernel_bound(&g, &[], 1, 0, 4, 2.0).unwrap().c, 0.0);
    }

    #[test]
    fn decomposition_2d() {
        let g = Grid::new(2, 2.0, 64).unwrap();
        let f = SampledField::from_real_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp()).unwrap();
        let symbol: Vec<f64> = (0..g.len()).map(|i| cutoff_profile(g.frequency_norm(i) / 4.0)).collect();
        let f = crate::grid::apply_multiplier(&f, &symbol);
        let d = atomic_analyze(&f, 3, 1, 0).unwrap();
        let back = atomic_synthesize(&d);
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-6 * f.sup_norm());
        for cube in d.atoms.keys().step_by(7) {
            let r = validate_atom(&d.candidate(cube).unwrap(), DEFAULT_ATOM_TOL).unwrap();
            assert!(r.ok(), "{cube:?}: {r:?}");
        }
    }
}
