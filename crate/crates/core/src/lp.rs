//! Littlewood-Paley machinery: the admissible pair `(Phi, phi)` built on the
//! frequency side, its Calderón dual `(Psi, psi)`, decompositions and the
//! `F^{alpha, tau}_{p, q}` norm with its equivalent variants.
//!
//! All profiles are radial and real, so `phi~ = phi` and `Phi~ = Phi`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{apply_multiplier_to_spectrum, fourier, inv_fourier, DyadicCube, Grid, SampledField};
use crate::lebesgue::{cube_weighted_norm, default_cubes, InnerExponent, LayeredField, LevelRule, NormResult};

fn glue(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `t <= 0`, 0 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let a = glue(1.0 - t);
    let b = glue(t);
    a / (a + b)
}

/// `F Phi(xi)` as a function of `|xi|`: 1 on `[0, 1]`, 0 from 2 on.
pub fn cutoff_profile(r: f64) -> f64 {
    smooth_step(r - 1.0)
}

/// `F phi(xi) = F Phi(xi) - F Phi(2 xi)`, supported in `1/2 < |xi| < 2`.
pub fn annulus_profile(r: f64) -> f64 {
    cutoff_profile(r) - cutoff_profile(2.0 * r)
}

/// `G(r) = sum_{j in Z} |F phi(2^{-j} r)|^2`, dilation invariant, positive on `r > 0`.
pub fn calderon_denominator(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let top = r.log2().floor() as i32;
    ((top - 1)..=(top + 2)).map(|j| annulus_profile(r * 2f64.powi(-j)).powi(2)).sum()
}

/// `F psi = F phi / G`.
pub fn dual_annulus_profile(r: f64) -> f64 {
    let a = annulus_profile(r);
    if a == 0.0 {
        0.0
    } else {
        a / calderon_denominator(r)
    }
}

/// `F Psi = (sum_{j <= 0} |F phi(2^{-j} xi)|^2 / G) / F Phi`, equal to 1 on `|xi| <= 1`.
pub fn dual_cutoff_profile(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    let big = cutoff_profile(r);
    if big == 0.0 {
        return 0.0;
    }
    // for r > 1 only j = 0 survives: F phi(r) = F Phi(r)
    let head: f64 = (0..4).map(|k| annulus_profile(r * 2f64.powi(k)).powi(2)).sum();
    head / (calderon_denominator(r) * big)
}

/// Which profile a layer uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Cutoff,
    Annulus,
    DualCutoff,
    DualAnnulus,
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Cutoff => cutoff_profile(r),
            Profile::Annulus => annulus_profile(r),
            Profile::DualCutoff => dual_cutoff_profile(r),
            Profile::DualAnnulus => dual_annulus_profile(r),
        }
    }
}

/// Samples `profile(2^{-v} |xi|)` on the grid's spectral indices: the symbol
/// of the dilation `2^{vn} g(2^v .)`.
pub fn dilated_symbol(grid: &Grid, profile: Profile, v: i32) -> Vec<f64> {
    let s = 2f64.powi(-v);
    (0..grid.len()).map(|k| profile.eval(s * grid.frequency_norm(k))).collect()
}

/// Symbol of level `v` in a family whose first level `first` uses the
/// cutoff and later levels the annulus.
fn level_symbol(grid: &Grid, first: i32, v: i32, dual: bool) -> Vec<f64> {
    let profile = match (v == first, dual) {
        (true, false) => Profile::Cutoff,
        (false, false) => Profile::Annulus,
        (true, true) => Profile::DualCutoff,
        (false, true) => Profile::DualAnnulus,
    };
    dilated_symbol(grid, profile, v)
}

const SCAN_POINTS: usize = 20_001;

fn scan_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    (0..SCAN_POINTS)
        .map(|i| f(lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).abs())
        .fold(f64::INFINITY, f64::min)
}

/// The pair `(Phi, phi)` sampled on a grid.
#[derive(Clone, Debug)]
pub struct AdmissiblePair {
    grid: Grid,
    v_max: i32,
    big_phi: SampledField,
    phi: SampledField,
    lower_bound_c: f64,
}

impl AdmissiblePair {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn v_max(&self) -> i32 {
        self.v_max
    }

    /// `Phi` on the space side.
    pub fn big_phi(&self) -> &SampledField {
        &self.big_phi
    }

    /// `phi` on the space side.
    pub fn phi(&self) -> &SampledField {
        &self.phi
    }

    /// Measured `c` with `|F Phi| >= c` on `|xi| <= 5/3` and `|F phi| >= c` on `[3/5, 5/3]`.
    pub fn lower_bound_c(&self) -> f64 {
        self.lower_bound_c
    }

    /// Symbol of `phi_v` (`Phi` for `v = 0`).
    pub fn symbol(&self, v: i32) -> Vec<f64> {
        level_symbol(&self.grid, 0, v, false)
    }
}

/// Builds `(Phi, phi)` on a grid able to resolve levels up to `v_max`.
pub fn build_admissible_pair(grid: &Grid, v_max: i32) -> Result<AdmissiblePair> {
    grid.check_v_max(v_max)?;
    let big_phi = inv_fourier(&SampledField::from_real(*grid, dilated_symbol(grid, Profile::Cutoff, 0))?);
    let phi = inv_fourier(&SampledField::from_real(*grid, dilated_symbol(grid, Profile::Annulus, 0))?);
    let c = scan_min(0.0, 5.0 / 3.0, cutoff_profile).min(scan_min(0.6, 5.0 / 3.0, annulus_profile));
    Ok(AdmissiblePair { grid: *grid, v_max, big_phi, phi, lower_bound_c: c })
}

/// The Calderón dual `(Psi, psi)` of an admissible pair.
#[derive(Clone, Debug)]
pub struct DualPair {
    grid: Grid,
    v_max: i32,
    big_psi: SampledField,
    psi: SampledField,
    residual: f64,
}

impl DualPair {
    pub fn big_psi(&self) -> &SampledField {
        &self.big_psi
    }

    pub fn psi(&self) -> &SampledField {
        &self.psi
    }

    /// `max |F Phi F Psi + sum_v F phi_v F psi_v - 1|` over grid frequencies in the band.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn v_max(&self) -> i32 {
        self.v_max
    }

    /// Symbol of `psi_v` (`Psi` for `v = 0`).
    pub fn symbol(&self, v: i32) -> Vec<f64> {
        level_symbol(&self.grid, 0, v, true)
    }
}

/// `sum_{v=0}^{V} F phi_v F psi_v` at radius `r` (level 0 is `Phi`, `Psi`).
pub fn calderon_sum(r: f64, v_max: i32) -> f64 {
    let mut s = cutoff_profile(r) * dual_cutoff_profile(r);
    for v in 1..=v_max {
        let t = r * 2f64.powi(-v);
        s += annulus_profile(t) * dual_annulus_profile(t);
    }
    s
}

/// Upper edge of the band on which the truncated Calderón identity is exact.
pub fn covered_band(v_max: i32) -> f64 {
    2f64.powi(v_max)
}

pub fn build_dual_pair(pair: &AdmissiblePair) -> Result<DualPair> {
    let grid = pair.grid;
    let band = covered_band(pair.v_max);
    let mut residual = 0.0f64;
    for k in 0..grid.len() {
        let r = grid.frequency_norm(k);
        if r <= band {
            if r > 0.0 && calderon_denominator(r) <= 0.0 {
                return Err(Error::Hypothesis(format!("Calderón denominator vanishes at |xi| = {r}")));
            }
            residual = residual.max((calderon_sum(r, pair.v_max) - 1.0).abs());
        }
    }
    let big_psi = inv_fourier(&SampledField::from_real(grid, dilated_symbol(&grid, Profile::DualCutoff, 0))?);
    let psi = inv_fourier(&SampledField::from_real(grid, dilated_symbol(&grid, Profile::DualAnnulus, 0))?);
    Ok(DualPair { grid, v_max: pair.v_max, big_psi, psi, residual })
}

/// One CSV row of the exported profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub xi: f64,
    pub phi_big: f64,
    pub phi: f64,
    pub psi_big: f64,
    pub psi: f64,
    pub residual: f64,
}

/// Profiles sampled at the grid's axis frequencies inside the covered band.
pub fn profile_rows(grid: &Grid, v_max: i32) -> Vec<ProfileRow> {
    let band = covered_band(v_max);
    (0..grid.points_per_axis() / 2)
        .map(|k| grid.frequency(k))
        .take_while(|&r| r <= band)
        .map(|r| ProfileRow {
            xi: r,
            phi_big: cutoff_profile(r),
            phi: annulus_profile(r),
            psi_big: dual_cutoff_profile(r),
            psi: dual_annulus_profile(r),
            residual: (calderon_sum(r, v_max) - 1.0).abs(),
        })
        .collect()
}

/// `f = sum_v psi_v * phi~_v * f` truncated at `v_max`, computed spectrally.
pub fn calderon_reconstruct(f: &SampledField, v_max: i32) -> Result<SampledField> {
    f.grid().check_v_max(v_max)?;
    let grid = *f.grid();
    let symbol: Vec<f64> = (0..grid.len()).map(|k| calderon_sum(grid.frequency_norm(k), v_max)).collect();
    Ok(apply_multiplier_to_spectrum(&fourier(f), &symbol))
}

/// Layers `phi_v * f`, `v = 0..=V_max`, layer 0 being `Phi * f`.
#[derive(Clone, Debug)]
pub struct LpDecomposition {
    pub v_max: i32,
    pub layers: LayeredField,
}

/// Layers `g_v * f` for `v = first..=v_max`, `g_first` the dilated cutoff.
pub fn decompose_from(f: &SampledField, first: i32, v_max: i32) -> Result<LayeredField> {
    f.grid().check_v_max(v_max)?;
    if first > v_max {
        return Err(Error::InvalidParameter(format!("first level {first} exceeds {v_max}")));
    }
    let grid = *f.grid();
    let spec = fourier(f);
    let layers: Vec<SampledField> = (first..=v_max)
        .into_par_iter()
        .map(|v| apply_multiplier_to_spectrum(&spec, &level_symbol(&grid, first, v, false)))
        .collect();
    LayeredField::new(first, layers)
}

pub fn lp_decompose(f: &SampledField, pair: &AdmissiblePair, v_max: i32) -> Result<LpDecomposition> {
    pair.grid.same_as(f.grid())?;
    if v_max > pair.v_max {
        return Err(Error::BandOverflow { v_max, limit: pair.v_max });
    }
    Ok(LpDecomposition { v_max, layers: decompose_from(f, 0, v_max)? })
}

/// The exponents `alpha, tau, p, q` of a space.
#[derive(Clone, Copy, Debug)]
pub struct SpaceExponents<'a> {
    pub alpha: &'a ExponentField,
    pub tau: &'a ExponentField,
    pub p: &'a ExponentField,
    pub q: InnerExponent<'a>,
}

/// The equivalent forms of the norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FNormVariant {
    /// Layers `v >= v_P^+` over all cubes.
    Standard,
    /// Cubes with `|P| <= 1`, layers `v >= v_P`.
    Sharp,
    /// Layers `v >= 0` for every cube.
    StarV0,
    /// Layers `v >= v_P^+ - gamma`, the first one `Phi_{-gamma}`.
    Gamma { gamma: i32 },
    /// Peetre maximal layers with decay `a`.
    Peetre { a: f64 },
}

/// `2^{v alpha(x)} f_v(x)` for every layer.
pub fn weight_layers(layers: &LayeredField, alpha: &ExponentField) -> Result<LayeredField> {
    alpha.check_grid(layers.grid())?;
    let weighted = layers
        .levels()
        .map(|(v, f)| {
            let vals = f
                .values()
                .iter()
                .zip(alpha.values())
                .map(|(z, &a)| z * 2f64.powf(v as f64 * a))
                .collect();
            SampledField::new(*f.grid(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    LayeredField::new(layers.first_level(), weighted)
}

/// `max_y w(y) / (1 + 2^v |x - y|)^a` with minimal-image distances.
pub fn peetre_envelope(grid: &Grid, weights: &[f64], v: i32, a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("Peetre exponent must be positive, got {a}")));
    }
    let n = grid.points_per_axis();
    let s = 2f64.powi(v);
    // decay factor by index offset, indexed like the grid (offset + N/2)
    let kernel: Vec<f64> = (0..grid.len())
        .map(|i| (1.0 + s * grid.periodic_radius(i)).powf(-a))
        .collect();
    let support: Vec<usize> = (0..grid.len()).filter(|&i| weights[i] > 0.0).collect();
    let half = n / 2;
    let out = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let ax = grid.axis_indices(x);
            let mut best = 0.0f64;
            for &y in &support {
                let ay = grid.axis_indices(y);
                let mut ak = [0usize; 2];
                for k in 0..grid.dim() {
                    ak[k] = (ax[k] + n + half - ay[k]) % n;
                }
                best = best.max(weights[y] * kernel[grid.flat_index(ak)]);
            }
            best
        })
        .collect();
    Ok(out)
}

/// `(phi*_{v,a} 2^{v alpha} f)(x)` for layer `v` of a decomposition.
pub fn peetre_maximal(dec: &LpDecomposition, alpha: &ExponentField, a: f64, v: i32) -> Result<SampledField> {
    let layer = dec
        .layers
        .layer(v)
        .ok_or_else(|| Error::InvalidParameter(format!("level {v} is not in the decomposition")))?;
    alpha.check_grid(layer.grid())?;
    let w: Vec<f64> = layer
        .values()
        .iter()
        .zip(alpha.values())
        .map(|(z, &al)| 2f64.powf(v as f64 * al) * z.norm())
        .collect();
    SampledField::from_real(*layer.grid(), peetre_envelope(layer.grid(), &w, v, a)?)
}

/// Evaluates a variant of the norm over the given cube family (all cubes
/// with `v_min <= v <= v_max` by default).
pub fn f_norm_variant(
    f: &SampledField,
    e: SpaceExponents,
    v_max: i32,
    variant: FNormVariant,
    cubes: Option<&[DyadicCube]>,
    tol: f64,
) -> Result<NormResult> {
    let grid = *f.grid();
    grid.check_v_max(v_max)?;
    let (first, rule) = match variant {
        FNormVariant::Gamma { gamma } => {
            if gamma < 0 {
                return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
            }
            (-gamma, LevelRule::PositivePart { shift: gamma })
        }
        FNormVariant::StarV0 => (0, LevelRule::All),
        _ => (0, LevelRule::PositivePart { shift: 0 }),
    };
    let raw = decompose_from(f, first, v_max)?;
    let mut layers = weight_layers(&raw, e.alpha)?;
    if let FNormVariant::Peetre { a } = variant {
        let env = layers
            .levels()
            .map(|(v, l)| SampledField::from_real(grid, peetre_envelope(&grid, &l.abs(), v, a)?))
            .collect::<Result<Vec<_>>>()?;
        layers = LayeredField::new(first, env)?;
    }
    let owned;
    let family = match (cubes, variant) {
        (Some(c), _) => c,
        (None, FNormVariant::Sharp) => {
            owned = grid.dyadic_cubes(0.max(grid.v_min()), v_max)?;
            &owned[..]
        }
        (None, _) => {
            owned = default_cubes(&grid, v_max)?;
            &owned[..]
        }
    };
    let family: Vec<DyadicCube> = if variant == FNormVariant::Sharp {
        family.iter().filter(|c| c.v >= 0).cloned().collect()
    } else {
        family.to_vec()
    };
    cube_weighted_norm(&layers, e.p, e.q, e.tau, &family, rule, tol)
}

pub fn f_norm(
    f: &SampledField,
    e: SpaceExponents,
    v_max: i32,
    cubes: Option<&[DyadicCube]>,
    tol: f64,
) -> Result<NormResult> {
    f_norm_variant(f, e, v_max, FNormVariant::Standard, cubes, tol)
}

/// Triebel-Lizorkin-Morrey norm: `sup_P || (2^{v alpha} phi_v * f)_{v >= 0} |P|^{-(1/p - 1/u)} chi_P ||`
/// in `L^p(l^q)`, every layer counted on every cube.
pub fn morrey_space_norm(
    f: &SampledField,
    alpha: &ExponentField,
    p: &ExponentField,
    q: InnerExponent,
    u: &ExponentField,
    v_max: i32,
    cubes: Option<&[DyadicCube]>,
    tol: f64,
) -> Result<NormResult> {
    let grid = *f.grid();
    u.check_grid(&grid)?;
    p.check_grid(&grid)?;
    if let Some(i) = p.values().iter().zip(u.values()).position(|(a, b)| a > b) {
        return Err(Error::InvalidExponent(format!("p exceeds u at index {i}")));
    }
    let weight = ExponentField::new(grid, p.values().iter().zip(u.values()).map(|(a, b)| 1.0 / a - 1.0 / b).collect())?;
    let layers = weight_layers(&decompose_from(f, 0, v_max)?, alpha)?;
    let owned;
    let family = match cubes {
        Some(c) => c,
        None => {
            owned = default_cubes(&grid, v_max)?;
            &owned[..]
        }
    };
    cube_weighted_norm(&layers, p, q, &weight, family, LevelRule::All, tol)
}

/// `sup_v sup_x 2^{v s(x)} |phi_v * f(x)|`.
pub fn besov_sup_norm(f: &SampledField, s: &ExponentField, v_max: i32) -> Result<f64> {
    let layers = weight_layers(&decompose_from(f, 0, v_max)?, s)?;
    Ok(layers.layers().iter().map(|l| l.sup_norm()).fold(0.0, f64::max))
}
