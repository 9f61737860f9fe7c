//! The phi-transform `S_phi`, its inverse `T_psi`, the sequence space norm
//! and the maximal sequence `lambda*`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{fourier, inv_fourier, DyadicCube, Grid, SampledField};
use crate::lebesgue::{default_cubes, luxemburg_samples, tau_weighted_norm, LayeredField, NormResult};
use crate::lp::{lp_decompose, AdmissiblePair, DualPair, SpaceExponents};

/// One serialized coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub v: i32,
    pub m: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// Coefficients `lambda_{v,m}`; absent keys are zero. Iteration is in
/// `(v, m)` order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<CoeffRecord>", try_from = "Vec<CoeffRecord>")]
pub struct CoeffSequence {
    entries: BTreeMap<DyadicCube, Complex64>,
}

impl From<CoeffSequence> for Vec<CoeffRecord> {
    fn from(s: CoeffSequence) -> Self {
        s.entries
            .into_iter()
            .map(|(q, z)| CoeffRecord { v: q.v, m: q.m, re: z.re, im: z.im })
            .collect()
    }
}

impl TryFrom<Vec<CoeffRecord>> for CoeffSequence {
    type Error = Error;

    fn try_from(records: Vec<CoeffRecord>) -> Result<Self> {
        let mut s = CoeffSequence::new();
        for (index, r) in records.into_iter().enumerate() {
            if !(r.re.is_finite() && r.im.is_finite()) {
                return Err(Error::NonFinite { index });
            }
            s.insert(DyadicCube::new(r.v, r.m), Complex64::new(r.re, r.im));
        }
        Ok(s)
    }
}

impl CoeffSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cube: DyadicCube, value: Complex64) {
        self.entries.insert(cube, value);
    }

    pub fn get(&self, cube: &DyadicCube) -> Complex64 {
        self.entries.get(cube).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DyadicCube, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries that are not exactly zero.
    pub fn nonzero_count(&self) -> usize {
        self.entries.values().filter(|z| z.norm() > 0.0).count()
    }

    pub fn max_level(&self) -> Option<i32> {
        self.entries.keys().map(|q| q.v).max()
    }

    pub fn level(&self, v: i32) -> impl Iterator<Item = (&DyadicCube, &Complex64)> {
        self.entries.iter().filter(move |(q, _)| q.v == v)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { entries: self.entries.iter().map(|(q, z)| (q.clone(), z * c)).collect() }
    }

    pub fn sup(&self) -> f64 {
        self.entries.values().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Drops exact zeros.
    pub fn pruned(&self) -> Self {
        Self { entries: self.entries.iter().filter(|(_, z)| z.norm() > 0.0).map(|(q, z)| (q.clone(), *z)).collect() }
    }
}

/// Grid index of the lattice point `2^{-v} m`, if it is a grid point in the box.
pub fn lattice_index(grid: &Grid, cube: &DyadicCube) -> Option<usize> {
    let side = cube.side();
    let h = grid.spacing();
    let n = grid.points_per_axis() as i64;
    let mut ai = [0usize; 2];
    for (k, &mk) in cube.m.iter().enumerate() {
        let pos = (side * mk as f64 + grid.half_width()) / h;
        let idx = pos.round();
        if (pos - idx).abs() > 1e-9 || idx < 0.0 || idx as i64 >= n {
            return None;
        }
        ai[k] = idx as usize;
    }
    Some(grid.flat_index(ai))
}

/// `(S_phi f)_{v,m} = <f, phi_{v,m}> = 2^{-vn/2} (phi~_v * f)(2^{-v} m)`,
/// level 0 using `Phi`.
pub fn analyze(f: &SampledField, pair: &AdmissiblePair, v_max: i32) -> Result<CoeffSequence> {
    let grid = *f.grid();
    let dec = lp_decompose(f, pair, v_max)?;
    let n = grid.dim() as f64;
    let mut out = CoeffSequence::new();
    for (v, layer) in dec.layers.levels() {
        let norm = 2f64.powf(-(v as f64) * n / 2.0);
        for cube in grid.dyadic_cubes_at_level(v)? {
            let idx = lattice_index(&grid, &cube)
                .ok_or_else(|| Error::InvalidParameter(format!("lattice point of {cube:?} is off the grid")))?;
            out.insert(cube, layer.values()[idx] * norm);
        }
    }
    Ok(out)
}

/// `T_psi lambda = sum_m lambda_{0,m} Psi_m + sum_{v >= 1} sum_m lambda_{v,m} psi_{v,m}`.
pub fn synthesize(lambda: &CoeffSequence, dual: &DualPair, grid: &Grid) -> Result<SampledField> {
    let n = grid.dim() as f64;
    let inv_cell = 1.0 / grid.cell_volume();
    let mut total = vec![Complex64::new(0.0, 0.0); grid.len()];
    let levels: Vec<i32> = {
        let mut l: Vec<i32> = lambda.iter().map(|(q, _)| q.v).collect();
        l.dedup();
        l
    };
    for v in levels {
        if v < 0 || v > grid.v_max_limit() {
            return Err(Error::BandOverflow { v_max: v, limit: grid.v_max_limit() });
        }
        let mut comb = vec![Complex64::new(0.0, 0.0); grid.len()];
        let weight = 2f64.powf(-(v as f64) * n / 2.0) * inv_cell;
        for (cube, z) in lambda.level(v) {
            let idx = lattice_index(grid, cube).ok_or_else(|| Error::CubeOutsideBox(cube.clone()))?;
            comb[idx] += z * weight;
        }
        let spec = fourier(&SampledField::new(*grid, comb)?);
        let symbol = dual.symbol(v);
        for ((t, s), m) in total.iter_mut().zip(spec.values()).zip(&symbol) {
            *t += s * m;
        }
    }
    Ok(inv_fourier(&SampledField::new(*grid, total)?))
}

/// Layers `sum_m 2^{v(alpha(x) + n/2)} lambda_{v,m} chi_{v,m}(x)`, `v = 0..=v_max`.
pub fn sequence_layers(lambda: &CoeffSequence, alpha: &ExponentField, v_max: i32) -> Result<LayeredField> {
    let grid = *alpha.grid();
    let n = grid.dim() as f64;
    let mut layers = Vec::with_capacity(v_max as usize + 1);
    for v in 0..=v_max {
        let mut vals = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (cube, z) in lambda.level(v) {
            for i in grid.cube_indices(cube) {
                vals[i] = z * 2f64.powf(v as f64 * (alpha.at(i) + n / 2.0));
            }
        }
        layers.push(SampledField::new(grid, vals)?);
    }
    LayeredField::new(0, layers)
}

/// `|| lambda ||_{f^{alpha, tau}_{p, q}}` over cubes with `v_min <= v <= v_max`.
pub fn sequence_norm(
    lambda: &CoeffSequence,
    e: SpaceExponents,
    v_max: i32,
    cubes: Option<&[DyadicCube]>,
    tol: f64,
) -> Result<NormResult> {
    let layers = sequence_layers(lambda, e.alpha, v_max)?;
    let owned;
    let family = match cubes {
        Some(c) => c,
        None => {
            owned = default_cubes(e.alpha.grid(), v_max)?;
            &owned[..]
        }
    };
    tau_weighted_norm(&layers, e.p, e.q, e.tau, family, tol)
}

/// `lambda*_{v,m} = (sum_h |lambda_{v,h}|^r / (1 + |h - m|)^d)^{1/r}` over the
/// in-box lattice, for every cube of the levels present in `lambda`.
pub fn lambda_star(lambda: &CoeffSequence, grid: &Grid, r: f64, d: f64) -> Result<CoeffSequence> {
    if !(r > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda* needs r > 0 and d > 0, got r = {r}, d = {d}")));
    }
    let mut levels: Vec<i32> = lambda.iter().map(|(q, _)| q.v).collect();
    levels.dedup();
    let mut out = CoeffSequence::new();
    for v in levels {
        let sources: Vec<(Vec<i64>, f64)> = lambda
            .level(v)
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(q, z)| (q.m.clone(), z.norm().powf(r)))
            .collect();
        let targets = grid.dyadic_cubes_at_level(v)?;
        let values: Vec<f64> = targets
            .par_iter()
            .map(|t| {
                let s: f64 = sources
                    .iter()
                    .map(|(h, w)| {
                        let dist2: f64 = h.iter().zip(&t.m).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
                        w * (1.0 + dist2.sqrt()).powf(-d)
                    })
                    .sum();
                s.powf(1.0 / r)
            })
            .collect();
        for (t, val) in targets.into_iter().zip(values) {
            out.insert(t, Complex64::new(val, 0.0));
        }
    }
    Ok(out)
}

/// Largest `c` in `|lambda_{v,m}| <= c 2^{-v(alpha(x)+n/2)} |Q|^{tau(x)} ||lambda|| / ||chi_{v,m}||_{p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBound {
    pub c: f64,
    pub cube: Option<DyadicCube>,
    pub point: Option<usize>,
    pub sequence_norm: f64,
}

pub fn coefficient_bound(
    lambda: &CoeffSequence,
    e: SpaceExponents,
    v_max: i32,
    tol: f64,
) -> Result<CoefficientBound> {
    let grid = *e.alpha.grid();
    let norm = sequence_norm(lambda, e, v_max, None, tol)?.value;
    let mut best = CoefficientBound { c: 0.0, cube: None, point: None, sequence_norm: norm };
    if norm == 0.0 {
        return Ok(best);
    }
    let n = grid.dim() as f64;
    for (cube, z) in lambda.iter() {
        if z.norm() == 0.0 || cube.v > v_max {
            continue;
        }
        let idx = grid.cube_indices(cube);
        let ones = vec![1.0; idx.len()];
        let p: Vec<f64> = idx.iter().map(|&i| e.p.at(i)).collect();
        let chi = luxemburg_samples(&ones, &p, grid.cell_volume(), tol)?.value;
        let measure = grid.cube_geometry(cube).measure;
        for &i in &idx {
            let rhs = 2f64.powf(-(cube.v as f64) * (e.alpha.at(i) + n / 2.0)) * measure.powf(e.tau.at(i)) * norm / chi;
            let c = z.norm() / rhs;
            if c > best.c {
                best.c = c;
                best.cube = Some(cube.clone());
                best.point = Some(i);
            }
        }
    }
    Ok(best)
}
