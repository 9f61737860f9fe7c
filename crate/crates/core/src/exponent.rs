//! Variable exponents and their regularity diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Offsets with sup-norm at most this radius are always scanned in 2-D.
const NEAR_RADIUS: isize = 4;
/// Coarse offsets in 2-D are multiples of `N / COARSE_DIVISIONS`.
const COARSE_DIVISIONS: usize = 16;

/// A real exponent sampled on a grid, with cached bounds and log-Hölder
/// constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    samples: Vec<f64>,
    min: f64,
    max: f64,
    clog_local: f64,
    clog_decay: f64,
    g_infinity: f64,
}

impl ExponentField {
    /// Builds the field and populates every cache.
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: samples.len() });
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let clog_local = clog_local(&grid, &samples);
        let (g_infinity, clog_decay) = clog_decay(&grid, &samples);
        Ok(Self { grid, samples, min, max, clog_local, clog_decay, g_infinity })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        Self::new(grid, (0..grid.len()).map(|i| f(&grid.point(i)[..n])).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.samples
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.samples[idx]
    }

    /// `g^-`.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// `g^+`.
    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }

    pub fn clog_local(&self) -> f64 {
        self.clog_local
    }

    pub fn clog_decay(&self) -> f64 {
        self.clog_decay
    }

    /// Boundary-shell mean, the stand-in for `g_infinity`.
    pub fn g_infinity(&self) -> f64 {
        self.g_infinity
    }

    /// `c_log(g) = max(local, decay)`.
    pub fn clog(&self) -> f64 {
        self.clog_local.max(self.clog_decay)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.samples.iter().map(|&x| f(x)).collect())
    }

    /// `1/g`; errors if `g` vanishes somewhere.
    pub fn reciprocal(&self) -> Result<Self> {
        if let Some(index) = self.samples.iter().position(|&x| x == 0.0) {
            return Err(Error::InvalidExponent(format!("exponent vanishes at index {index}")));
        }
        self.map(|x| 1.0 / x)
    }

    pub fn shifted(&self, c: f64) -> Result<Self> {
        self.map(|x| x + c)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.grid.same_as(grid)
    }
}

fn weight(d: f64) -> f64 {
    d * (std::f64::consts::E + 1.0 / d).ln()
}

fn max_diff_at_offset(grid: &Grid, g: &[f64], off: [isize; 2]) -> f64 {
    let n = grid.points_per_axis() as isize;
    let mut best = 0.0f64;
    if grid.dim() == 1 {
        for i in 0..n {
            let j = (i + off[0]).rem_euclid(n);
            best = best.max((g[i as usize] - g[j as usize]).abs());
        }
    } else {
        for i0 in 0..n {
            let j0 = (i0 + off[0]).rem_euclid(n);
            for i1 in 0..n {
                let j1 = (i1 + off[1]).rem_euclid(n);
                best = best.max((g[(i0 * n + i1) as usize] - g[(j0 * n + j1) as usize]).abs());
            }
        }
    }
    best
}

/// Offsets scanned by the local log-Hölder estimate. Every offset is listed
/// once up to sign; all nearest-neighbour offsets are included.
pub fn clog_offsets(grid: &Grid) -> Vec<[isize; 2]> {
    let n = grid.points_per_axis() as isize;
    let half = n / 2;
    let mut out = Vec::new();
    if grid.dim() == 1 {
        out.extend((1..=half).map(|d| [d, 0]));
        return out;
    }
    let positive = |a: isize, b: isize| a > 0 || (a == 0 && b > 0);
    if n <= 32 {
        for a in -half + 1..=half {
            for b in -half + 1..=half {
                if positive(a, b) {
                    out.push([a, b]);
                }
            }
        }
        return out;
    }
    for a in -NEAR_RADIUS..=NEAR_RADIUS {
        for b in -NEAR_RADIUS..=NEAR_RADIUS {
            if positive(a, b) {
                out.push([a, b]);
            }
        }
    }
    let stride = n / COARSE_DIVISIONS as isize;
    for a in (-half + stride..=half).step_by(stride as usize) {
        for b in (-half + stride..=half).step_by(stride as usize) {
            let near = a.abs() <= NEAR_RADIUS && b.abs() <= NEAR_RADIUS;
            if positive(a, b) && !near {
                out.push([a, b]);
            }
        }
    }
    out
}

/// `max |g(x) - g(y)| log(e + 1/|x - y|)` over pairs at the scanned offsets,
/// with periodic (minimal-image) distances.
pub fn clog_local(grid: &Grid, g: &[f64]) -> f64 {
    let h = grid.spacing();
    clog_offsets(grid)
        .par_iter()
        .map(|&off| {
            let d = ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt() * h;
            max_diff_at_offset(grid, g, off) * weight(d)
        })
        .reduce(|| 0.0, f64::max)
}

/// `(g_inf, max |g(x) - g_inf| log(e + |x|))` with `g_inf` the mean over the
/// boundary shell (points with an index 0 or N-1 on some axis).
pub fn clog_decay(grid: &Grid, g: &[f64]) -> (f64, f64) {
    let last = grid.points_per_axis() - 1;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &x) in g.iter().enumerate() {
        let ai = grid.axis_indices(i);
        if ai[..grid.dim()].iter().any(|&a| a == 0 || a == last) {
            sum += x;
            count += 1;
        }
    }
    let g_inf = sum / count as f64;
    let c = g
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - g_inf).abs() * (std::f64::consts::E + grid.radius(i)).ln())
        .fold(0.0, f64::max);
    (g_inf, c)
}

/// Membership in the exponent classes `P_0`, `P` and `P^log`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub in_p0: bool,
    pub in_p: bool,
    pub in_plog: bool,
    pub p_min: f64,
    pub p_max: f64,
    /// Local log-Hölder constant of `1/p`.
    pub clog_local: f64,
    /// Decay constant of `1/p`.
    pub clog_decay: f64,
    /// Boundary-shell estimate of `1/p_infinity`.
    pub inv_p_infinity: f64,
}

pub fn classify(p: &ExponentField, tol: f64) -> Result<ClassReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let in_p0 = p.min() > tol;
    let in_p = p.min() >= 1.0 - tol;
    let (clog_local, clog_decay, inv_p_infinity) = if in_p0 {
        let inv = p.reciprocal()?;
        (inv.clog_local(), inv.clog_decay(), inv.g_infinity())
    } else {
        (f64::INFINITY, f64::INFINITY, f64::NAN)
    };
    let in_plog = in_p && clog_local.is_finite() && clog_decay.is_finite();
    Ok(ClassReport {
        in_p0: in_p0 || in_p,
        in_p,
        in_plog,
        p_min: p.min(),
        p_max: p.max(),
        clog_local,
        clog_decay,
        inv_p_infinity,
    })
}

/// Closed family of exponent generators used in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    /// `clamp(base + slope . x, lo, hi)`.
    AffineClamped { base: f64, slope: Vec<f64>, lo: f64, hi: f64 },
    /// `base + amplitude * b(|x - center| / radius)` with the unit bump
    /// `b(r) = exp(1 - 1/(1 - r^2))` on `r < 1`.
    SmoothBump { base: f64, amplitude: f64, center: Vec<f64>, radius: f64 },
    /// `limit + amplitude / log(e + |x|)`.
    RadialLogDecay { limit: f64, amplitude: f64 },
}

/// `exp(1 - 1/(1 - r^2))` on `r < 1`, zero elsewhere; equals 1 at the origin.
pub fn unit_bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

impl ExponentSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExponentSpec::Constant { value } => *value,
            ExponentSpec::AffineClamped { base, slope, lo, hi } => {
                let t = base + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>();
                t.clamp(*lo, *hi)
            }
            ExponentSpec::SmoothBump { base, amplitude, center, radius } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, xi)| (xi - center.get(k).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                base + amplitude * unit_bump(r2.sqrt() / radius)
            }
            ExponentSpec::RadialLogDecay { limit, amplitude } => {
                let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
                limit + amplitude / (std::f64::consts::E + r).ln()
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidExponent(m));
        match self {
            ExponentSpec::Constant { value } if !value.is_finite() => bad("constant must be finite".into()),
            ExponentSpec::AffineClamped { slope, lo, hi, .. } if slope.len() != dim || !(lo <= hi) => {
                bad(format!("affine exponent needs {dim} slopes and lo <= hi"))
            }
            ExponentSpec::SmoothBump { center, radius, .. } if center.len() != dim || !(*radius > 0.0) => {
                bad(format!("bump exponent needs a {dim}-dimensional center and positive radius"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, grid: Grid) -> Result<ExponentField> {
        self.validate(grid.dim())?;
        ExponentField::from_fn(grid, |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_clog(grid: &Grid, g: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    best = best.max((g[i] - g[j]).abs() * weight(grid.distance(i, j)));
                }
            }
        }
        best
    }

    #[test]
    fn constant_field_caches() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let e = ExponentField::constant(g, 2.0).unwrap();
        assert_eq!((e.min(), e.max()), (2.0, 2.0));
        assert_eq!(e.clog_local(), 0.0);
        assert_eq!((e.g_infinity(), e.clog_decay()), (2.0, 0.0));
        assert_eq!(e.reciprocal().unwrap().clog_local(), 0.0);
    }

    #[test]
    fn sine_bounds() {
        let g = Grid::new(1, 1.0, 256).unwrap();
        let e = ExponentField::from_fn(g, |x| 2.0 + (std::f64::consts::PI * x[0]).sin()).unwrap();
        let oracle: Vec<f64> = (0..256).map(|i| 2.0 + (std::f64::consts::PI * g.coord(i)).sin()).collect();
        let lo = oracle.iter().copied().fold(f64::MAX, f64::min);
        assert_eq!(e.min(), lo);
        assert!((e.min() - 1.0).abs() < 1e-3 && (e.max() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn nan_rejected_with_index() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut v = vec![1.0; 8];
        v[5] = f64::NAN;
        assert!(matches!(ExponentField::new(g, v), Err(Error::NonFinite { index: 5 })));
    }

    #[test]
    fn identity_field_matches_brute_force() {
        // periodic distances: the jump across x = +-1 dominates
        let g = Grid::new(1, 1.0, 16).unwrap();
        let e = ExponentField::from_fn(g, |x| x[0]).unwrap();
        let oracle = brute_force_clog(&g, e.values());
        assert!((e.clog_local() - oracle).abs() < 1e-14);
        // at separation d the largest difference is the wrapped one, 2 - d
        let h = g.spacing();
        let closed = (1..=8).map(|k| (2.0 - k as f64 * h) * weight(k as f64 * h)).fold(0.0, f64::max);
        assert!((oracle - closed).abs() < 1e-14);
    }

    #[test]
    fn small_plane_matches_brute_force() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let e = ExponentField::from_fn(g, |x| 1.5 + 0.4 * unit_bump((x[0] * x[0] + x[1] * x[1]).sqrt() / 0.7)).unwrap();
        assert!((e.clog_local() - brute_force_clog(&g, e.values())).abs() < 1e-13);
    }

    #[test]
    fn plane_offsets_cover_neighbours() {
        let g = Grid::new(2, 2.0, 256).unwrap();
        let offs = clog_offsets(&g);
        assert!(offs.contains(&[1, 0]) && offs.contains(&[0, 1]));
        assert!(offs.len() * g.len() >= 100_000);
    }

    #[test]
    fn decay_of_log_profile() {
        let g = Grid::new(1, 4.0, 256).unwrap();
        let e = ExponentSpec::RadialLogDecay { limit: 2.0, amplitude: 1.0 }.sample(g).unwrap();
        let lg = |r: f64| (std::f64::consts::E + r).ln();
        let h = g.spacing();
        let g_inf = 2.0 + 0.5 * (1.0 / lg(4.0) + 1.0 / lg(4.0 - h));
        assert!((e.g_infinity() - g_inf).abs() < 1e-14);
        // the maximum of |1/lg(r) - (g_inf - 2)| lg(r) sits at the origin
        let c = 1.0 - (g_inf - 2.0);
        assert!((e.clog_decay() - c).abs() < 1e-14);
    }

    #[test]
    fn antisymmetric_boundary_mean() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let e = ExponentField::from_fn(g, |x| x[0].sin()).unwrap();
        let expect = 0.5 * ((-2.0f64).sin() + (2.0 - g.spacing()).sin());
        assert!((e.g_infinity() - expect).abs() < 1e-15);
    }

    #[test]
    fn classification() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let two = classify(&ExponentField::constant(g, 2.0).unwrap(), 1e-12).unwrap();
        assert!(two.in_p0 && two.in_p && two.in_plog);
        assert_eq!((two.clog_local, two.clog_decay), (0.0, 0.0));
        let half = classify(&ExponentField::constant(g, 0.5).unwrap(), 1e-12).unwrap();
        assert!(half.in_p0 && !half.in_p && !half.in_plog);
        let spec = ExponentSpec::SmoothBump { base: 1.5, amplitude: 0.4, center: vec![0.0], radius: 1.0 };
        let p = spec.sample(g).unwrap();
        let r = classify(&p, 1e-12).unwrap();
        assert!(r.in_plog);
        let inv: Vec<f64> = p.values().iter().map(|x| 1.0 / x).collect();
        assert!((r.clog_local - brute_force_clog(&g, &inv)).abs() < 1e-14);
    }

    #[test]
    fn generators_deserialize() {
        let s: ExponentSpec =
            serde_json::from_str(r#"{"kind":"affine_clamped","base":2,"slope":[0.5],"lo":1.5,"hi":2.5}"#).unwrap();
        assert_eq!(s.eval(&[10.0]), 2.5);
        assert_eq!(s.eval(&[0.2]), 2.1);
        assert!(s.validate(2).is_err());
    }
}
