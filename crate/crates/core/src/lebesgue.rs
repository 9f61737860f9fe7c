//! Modulars, Luxemburg norms and the mixed, cube-weighted and Morrey norms
//! built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{DyadicCube, Grid, SampledField};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;
const MAX_BRACKET_STEPS: usize = 4096;

/// Result of a norm evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    /// `|rho(f/value) - 1|` for Luxemburg-type norms, zero otherwise.
    pub residual: f64,
    pub attaining_cube: Option<DyadicCube>,
}

impl NormResult {
    fn plain(value: f64, residual: f64) -> Self {
        Self { value, residual, attaining_cube: None }
    }
}

/// A family of fields `f_v`, `v = first_level, first_level + 1, ..`.
#[derive(Clone, Debug)]
pub struct LayeredField {
    first_level: i32,
    layers: Vec<SampledField>,
}

impl LayeredField {
    pub fn new(first_level: i32, layers: Vec<SampledField>) -> Result<Self> {
        let Some(head) = layers.first() else {
            return Err(Error::InvalidParameter("a layered field needs at least one layer".into()));
        };
        for l in &layers[1..] {
            head.grid().same_as(l.grid())?;
        }
        Ok(Self { first_level, layers })
    }

    pub fn grid(&self) -> &Grid {
        self.layers[0].grid()
    }

    pub fn first_level(&self) -> i32 {
        self.first_level
    }

    pub fn last_level(&self) -> i32 {
        self.first_level + self.layers.len() as i32 - 1
    }

    pub fn layers(&self) -> &[SampledField] {
        &self.layers
    }

    pub fn layer(&self, v: i32) -> Option<&SampledField> {
        usize::try_from(v - self.first_level).ok().and_then(|i| self.layers.get(i))
    }

    pub fn levels(&self) -> impl Iterator<Item = (i32, &SampledField)> {
        self.layers.iter().enumerate().map(move |(i, f)| (self.first_level + i as i32, f))
    }
}

/// Inner exponent of a mixed norm: a variable `q(x)` or `q = infinity`.
#[derive(Clone, Copy, Debug)]
pub enum InnerExponent<'a> {
    Finite(&'a ExponentField),
    Infinite,
}

fn require_p0(p: &ExponentField, what: &str) -> Result<()> {
    if !(p.min() > 0.0) {
        return Err(Error::InvalidExponent(format!("{what} must be positive, minimum is {}", p.min())));
    }
    Ok(())
}

/// `rho_p(f) = int |f(x)|^{p(x)} dx`.
pub fn modular(f: &SampledField, p: &ExponentField) -> Result<f64> {
    require_p0(p, "p")?;
    p.check_grid(f.grid())?;
    let w = f.grid().cell_volume();
    Ok(f.values().iter().zip(p.values()).map(|(z, &e)| z.norm().powf(e)).sum::<f64>() * w)
}

/// `ln rho(g / e^t)` and its `t`-derivative, computed with a shifted
/// log-sum-exp so large exponents cannot overflow.
fn log_modular(ln_g: &[f64], p: &[f64], ln_w: f64, t: f64) -> (f64, f64) {
    let mut top = f64::NEG_INFINITY;
    for (&lg, &e) in ln_g.iter().zip(p) {
        top = top.max(e * (lg - t));
    }
    let mut s = 0.0;
    let mut d = 0.0;
    for (&lg, &e) in ln_g.iter().zip(p) {
        let term = (e * (lg - t) - top).exp();
        s += term;
        d -= e * term;
    }
    (ln_w + top + s.ln(), d / s)
}

/// Luxemburg norm of nonnegative samples `g` with exponents `p` and
/// quadrature weight `w`: the `mu` with `sum w (g/mu)^p = 1`.
pub fn luxemburg_samples(g: &[f64], p: &[f64], w: f64, tol: f64) -> Result<NormResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut ln_g = Vec::with_capacity(g.len());
    let mut exps = Vec::with_capacity(g.len());
    let mut sup = 0.0f64;
    let mut mass = 0.0;
    for (&x, &e) in g.iter().zip(p) {
        if x > 0.0 {
            ln_g.push(x.ln());
            exps.push(e);
            sup = sup.max(x);
            mass += x * w;
        }
    }
    if ln_g.is_empty() {
        return Ok(NormResult::plain(0.0, 0.0));
    }
    let ln_w = w.ln();
    let phi = |t: f64| log_modular(&ln_g, &exps, ln_w, t);

    // bracket: phi(lo) >= 0 >= phi(hi)
    let m0 = sup + mass;
    let mut hi = m0.ln();
    let mut lo = (1e-3 * m0).ln();
    let mut steps = 0;
    while phi(hi).0 > 0.0 {
        hi += std::f64::consts::LN_2;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::NoConvergence { lo: lo.exp(), hi: hi.exp() });
        }
    }
    while phi(lo).0 < 0.0 {
        lo -= std::f64::consts::LN_2;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::NoConvergence { lo: lo.exp(), hi: hi.exp() });
        }
    }

    // Newton on the convex function ln rho(t), falling back to bisection
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (val, der) = phi(t);
        let residual = val.exp_m1().abs();
        if residual <= tol {
            return Ok(NormResult::plain(t.exp(), residual));
        }
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - val / der;
        t = if der < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            let residual = phi(t).0.exp_m1().abs();
            if residual <= tol {
                return Ok(NormResult::plain(t.exp(), residual));
            }
            break;
        }
    }
    Err(Error::NoConvergence { lo: lo.exp(), hi: hi.exp() })
}

/// `inf { mu > 0 : rho_p(f / mu) <= 1 }`.
pub fn luxemburg_norm(f: &SampledField, p: &ExponentField, tol: f64) -> Result<NormResult> {
    require_p0(p, "p")?;
    p.check_grid(f.grid())?;
    luxemburg_samples(&f.abs(), p.values(), f.grid().cell_volume(), tol)
}

/// Pointwise inner norm `(sum_v |f_v(x)|^{q(x)})^{1/q(x)}` (or `sup_v`).
pub fn inner_norm(layers: &LayeredField, q: InnerExponent) -> Result<Vec<f64>> {
    let len = layers.grid().len();
    match q {
        InnerExponent::Finite(q) => {
            require_p0(q, "q")?;
            q.check_grid(layers.grid())?;
            let mut acc = vec![0.0; len];
            for f in layers.layers() {
                for ((a, z), &e) in acc.iter_mut().zip(f.values()).zip(q.values()) {
                    *a += z.norm().powf(e);
                }
            }
            Ok(acc.iter().zip(q.values()).map(|(&s, &e)| s.powf(1.0 / e)).collect())
        }
        InnerExponent::Infinite => {
            let mut acc = vec![0.0f64; len];
            for f in layers.layers() {
                for (a, z) in acc.iter_mut().zip(f.values()) {
                    *a = a.max(z.norm());
                }
            }
            Ok(acc)
        }
    }
}

/// `|| (f_v) ||_{L^{p}(l^{q})}`.
pub fn mixed_norm(layers: &LayeredField, p: &ExponentField, q: InnerExponent, tol: f64) -> Result<NormResult> {
    require_p0(p, "p")?;
    p.check_grid(layers.grid())?;
    let g = inner_norm(layers, q)?;
    luxemburg_samples(&g, p.values(), layers.grid().cell_volume(), tol)
}

/// Which layers a cube `P` sees in a cube-weighted norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelRule {
    /// `v >= v_P^+ - shift`.
    PositivePart { shift: i32 },
    /// Every layer.
    All,
}

impl LevelRule {
    pub fn first_level(&self, cube: &DyadicCube) -> Option<i32> {
        match self {
            LevelRule::PositivePart { shift } => Some(cube.v_q_plus() - shift),
            LevelRule::All => None,
        }
    }
}

/// All dyadic cubes of the grid for `v` in `[v_min, v_max]`.
pub fn default_cubes(grid: &Grid, v_max: i32) -> Result<Vec<DyadicCube>> {
    grid.dyadic_cubes(grid.v_min(), v_max)
}

/// Per-point suffix accumulations `S_k(x) = sum_{v >= k} |f_v(x)|^{q(x)}`
/// (or `max` for `q = infinity`), indexed by `k - first_level`.
struct SuffixSums {
    first_level: i32,
    sums: Vec<Vec<f64>>,
    finite: bool,
}

impl SuffixSums {
    fn new(layers: &LayeredField, q: InnerExponent) -> Result<Self> {
        let len = layers.grid().len();
        let count = layers.layers().len();
        let mut sums = vec![vec![0.0; len]; count + 1];
        let finite = matches!(q, InnerExponent::Finite(_));
        if let InnerExponent::Finite(q) = q {
            require_p0(q, "q")?;
            q.check_grid(layers.grid())?;
        }
        for k in (0..count).rev() {
            let f = &layers.layers()[k];
            let (head, tail) = sums.split_at_mut(k + 1);
            let (cur, next) = (&mut head[k], &tail[0]);
            for i in 0..len {
                let a = f.values()[i].norm();
                cur[i] = match q {
                    InnerExponent::Finite(q) => next[i] + a.powf(q.at(i)),
                    InnerExponent::Infinite => next[i].max(a),
                };
            }
        }
        Ok(Self { first_level: layers.first_level(), sums, finite })
    }

    /// `(sum_{v >= k} |f_v(x)|^q)^{1/q}` at grid point `i`.
    fn inner(&self, k: Option<i32>, i: usize, q: InnerExponent) -> f64 {
        let idx = match k {
            None => 0,
            Some(k) => (k - self.first_level).clamp(0, self.sums.len() as i32 - 1) as usize,
        };
        let s = self.sums[idx][i];
        match q {
            InnerExponent::Finite(q) if self.finite => s.powf(1.0 / q.at(i)),
            _ => s,
        }
    }
}

/// `sup_P || (f_v |P|^{-tau} chi_P)_{v in rule(P)} ||_{L^p(l^q)}` over `cubes`.
///
/// Ties go to the first cube in the given order.
pub fn cube_weighted_norm(
    layers: &LayeredField,
    p: &ExponentField,
    q: InnerExponent,
    tau: &ExponentField,
    cubes: &[DyadicCube],
    rule: LevelRule,
    tol: f64,
) -> Result<NormResult> {
    if cubes.is_empty() {
        return Err(Error::EmptyCubeFamily);
    }
    let grid = *layers.grid();
    require_p0(p, "p")?;
    p.check_grid(&grid)?;
    tau.check_grid(&grid)?;
    if tau.min() < 0.0 {
        return Err(Error::InvalidExponent(format!("tau must be nonnegative, minimum is {}", tau.min())));
    }
    let suffix = SuffixSums::new(layers, q)?;
    let w = grid.cell_volume();
    let results: Vec<Result<NormResult>> = cubes
        .par_iter()
        .map(|cube| {
            if !grid.cube_meets_box(cube) {
                return Err(Error::CubeOutsideBox(cube.clone()));
            }
            let k = rule.first_level(cube);
            let ln_measure = grid.cube_geometry(cube).measure.ln();
            let idx = grid.cube_indices(cube);
            let g: Vec<f64> = idx
                .iter()
                .map(|&i| (-tau.at(i) * ln_measure).exp() * suffix.inner(k, i, q))
                .collect();
            let e: Vec<f64> = idx.iter().map(|&i| p.at(i)).collect();
            luxemburg_samples(&g, &e, w, tol)
        })
        .collect();
    pick_sup(cubes, results)
}

fn pick_sup(cubes: &[DyadicCube], results: Vec<Result<NormResult>>) -> Result<NormResult> {
    let mut best: Option<NormResult> = None;
    for (cube, r) in cubes.iter().zip(results) {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(NormResult { attaining_cube: Some(cube.clone()), ..r });
        }
    }
    Ok(best.expect("nonempty"))
}

/// `|| (f_v) ||_{L^{tau}_{p}(l^{q})}`: sup over cubes of the mixed norm of
/// the layers `v >= v_P^+`, weighted by `|P|^{-tau(x)}` and restricted to `P`.
pub fn tau_weighted_norm(
    layers: &LayeredField,
    p: &ExponentField,
    q: InnerExponent,
    tau: &ExponentField,
    cubes: &[DyadicCube],
    tol: f64,
) -> Result<NormResult> {
    cube_weighted_norm(layers, p, q, tau, cubes, LevelRule::PositivePart { shift: 0 }, tol)
}

/// Cubes with `|P| >= 1` inside the box.
pub fn large_cubes(grid: &Grid) -> Result<Vec<DyadicCube>> {
    if grid.v_min() > 0 {
        return Err(Error::InvalidGrid("box is smaller than a unit cube".into()));
    }
    grid.dyadic_cubes(grid.v_min(), 0)
}

/// `sup_{|P| >= 1} || f chi_P / |P|^{tau} ||_{p}`.
pub fn tilde_norm(f: &SampledField, p: &ExponentField, tau: &ExponentField, tol: f64) -> Result<NormResult> {
    let cubes = large_cubes(f.grid())?;
    let layers = LayeredField::new(0, vec![f.clone()])?;
    cube_weighted_norm(&layers, p, InnerExponent::Infinite, tau, &cubes, LevelRule::All, tol)
}

/// Variable Morrey norm `sup_P || f |P|^{-(1/p - 1/u)} chi_P ||_{p}` over all
/// dyadic cubes down to side `2^{-v_max}`.
pub fn morrey_norm(
    f: &SampledField,
    p: &ExponentField,
    u: &ExponentField,
    v_max: i32,
    tol: f64,
) -> Result<NormResult> {
    require_p0(p, "p")?;
    u.check_grid(f.grid())?;
    if let Some(i) = p.values().iter().zip(u.values()).position(|(a, b)| a > b) {
        return Err(Error::InvalidExponent(format!("p exceeds u at index {i}")));
    }
    let weight = ExponentField::new(
        *f.grid(),
        p.values().iter().zip(u.values()).map(|(a, b)| 1.0 / a - 1.0 / b).collect(),
    )?;
    let cubes = f.grid().dyadic_cubes(f.grid().v_min(), v_max)?;
    let layers = LayeredField::new(0, vec![f.clone()])?;
    cube_weighted_norm(&layers, p, InnerExponent::Infinite, &weight, &cubes, LevelRule::All, tol)
}

/// `M_Q f`: mean of `|f|` over the grid points of `Q`.
pub fn averaged_maximal(f: &SampledField, cube: &DyadicCube) -> Result<f64> {
    if !f.grid().cube_meets_box(cube) {
        return Err(Error::CubeOutsideBox(cube.clone()));
    }
    let idx = f.grid().cube_indices(cube);
    if idx.is_empty() {
        return Ok(0.0);
    }
    Ok(idx.iter().map(|&i| f.values()[i].norm()).sum::<f64>() / idx.len() as f64)
}

/// Dyadic surrogate of the Hardy-Littlewood maximal function: at each point,
/// the largest mean of `|f|` over dyadic cubes (levels `v_min..=v_finest`)
/// containing it.
pub fn hl_maximal(f: &SampledField) -> SampledField {
    let grid = *f.grid();
    let abs = f.abs();
    let mut out = vec![0.0f64; grid.len()];
    for v in grid.v_min()..=grid.v_finest() {
        for cube in grid.dyadic_cubes_at_level(v).expect("levels are in range") {
            let idx = grid.cube_indices(&cube);
            if idx.is_empty() {
                continue;
            }
            let mean = idx.iter().map(|&i| abs[i]).sum::<f64>() / idx.len() as f64;
            for &i in &idx {
                out[i] = out[i].max(mean);
            }
        }
    }
    SampledField::from_real(grid, out).expect("means are finite")
}
