//! Registry of numerical checks. Each check either verifies an exact
//! inequality (PASS/FAIL) or measures the best constant in an estimate
//! (MEASURED), optionally tracking its drift as `v_max` grows.

pub mod embedding;
pub mod equivalence;
pub mod family;
pub mod maximal;
pub mod pointwise;
pub mod report;
pub mod sequence;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::atoms;
use crate::error::{Error, Result};
use crate::exponent::{ExponentField, ExponentSpec};
use crate::grid::{Grid, SampledField};
use crate::lebesgue::{InnerExponent, DEFAULT_TOL};
use crate::lp::SpaceExponents;

pub use report::{CheckReport, Status};

/// Largest allowed ratio between constants measured at consecutive `v_max`.
pub const STABILITY_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.half_width, self.points_per_axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infinity {
    Infinity,
}

/// An inner exponent: a generator or the literal `"infinity"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InnerSpec {
    Infinite(Infinity),
    Finite(ExponentSpec),
}

/// Named exponent generators. Missing entries fall back to defaults
/// (`p = q = 2`, `alpha = 1/2`, `tau = 1/4`) or to their base exponent
/// (`u, p0, p1 -> p`, `q0, q1 -> q`, `alpha0, alpha1 -> alpha`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<InnerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0: Option<InnerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<InnerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<ExponentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<ExponentSpec>,
}

impl ExponentSet {
    /// Entries of `over` replace those of `self`.
    pub fn merged(&self, over: &ExponentSet) -> ExponentSet {
        macro_rules! pick {
            ($($f:ident),*) => { ExponentSet { $($f: over.$f.clone().or_else(|| self.$f.clone())),* } };
        }
        pick!(p, q, alpha, tau, u, p0, p1, q0, q1, alpha0, alpha1)
    }

    pub fn resolve(&self, grid: Grid) -> Result<Exponents> {
        let field = |s: &Option<ExponentSpec>, fallback: &ExponentField| -> Result<ExponentField> {
            match s {
                Some(s) => s.sample(grid),
                None => Ok(fallback.clone()),
            }
        };
        let inner = |s: &Option<InnerSpec>, fallback: &Option<ExponentField>| -> Result<Option<ExponentField>> {
            match s {
                Some(InnerSpec::Infinite(_)) => Ok(None),
                Some(InnerSpec::Finite(s)) => Ok(Some(s.sample(grid)?)),
                None => Ok(fallback.clone()),
            }
        };
        let p = field(&self.p, &ExponentField::constant(grid, 2.0)?)?;
        let q = inner(&self.q, &Some(ExponentField::constant(grid, 2.0)?))?;
        let alpha = field(&self.alpha, &ExponentField::constant(grid, 0.5)?)?;
        let tau = field(&self.tau, &ExponentField::constant(grid, 0.25)?)?;
        Ok(Exponents {
            u: field(&self.u, &p)?,
            p0: field(&self.p0, &p)?,
            p1: field(&self.p1, &p)?,
            q0: inner(&self.q0, &q)?,
            q1: inner(&self.q1, &q)?,
            alpha0: field(&self.alpha0, &alpha)?,
            alpha1: field(&self.alpha1, &alpha)?,
            p,
            q,
            alpha,
            tau,
        })
    }
}

/// Sampled exponents; `None` inner exponents mean `q = infinity`.
#[derive(Clone, Debug)]
pub struct Exponents {
    pub p: ExponentField,
    pub q: Option<ExponentField>,
    pub alpha: ExponentField,
    pub tau: ExponentField,
    pub u: ExponentField,
    pub p0: ExponentField,
    pub p1: ExponentField,
    pub q0: Option<ExponentField>,
    pub q1: Option<ExponentField>,
    pub alpha0: ExponentField,
    pub alpha1: ExponentField,
}

pub fn inner(q: &Option<ExponentField>) -> InnerExponent<'_> {
    match q {
        Some(q) => InnerExponent::Finite(q),
        None => InnerExponent::Infinite,
    }
}

impl Exponents {
    pub fn space(&self) -> SpaceExponents<'_> {
        SpaceExponents { alpha: &self.alpha, tau: &self.tau, p: &self.p, q: inner(&self.q) }
    }

    pub fn q_min(&self) -> f64 {
        self.q.as_ref().map_or(f64::INFINITY, |q| q.min())
    }
}

/// Check-specific tuning; each check documents which entries it reads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    /// Decay exponent `m` of the eta kernels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Peetre exponent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Decay `d` of `lambda*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Decay `M` of the atom kernel bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// Extra shift `R` of the eta exponent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    /// Test fields are supported in `|xi| <= 2^band`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequences: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    /// Point pairs scanned in two dimensions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

/// Everything a check needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    pub grid: GridSpec,
    #[serde(default)]
    pub exponents: ExponentSet,
    pub v_max: i32,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub knobs: Knobs,
    /// Levels at which measured constants are recomputed for the drift test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<i32>>,
}

/// Resolved inputs of one check run.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub id: &'static str,
    pub grid: Grid,
    pub ex: Exponents,
    pub v_max: i32,
    pub samples: usize,
    pub seed: u64,
    pub knobs: Knobs,
    pub tol: f64,
}

impl Ctx {
    pub fn new(id: &'static str, params: &CheckParams) -> Result<Self> {
        let grid = params.grid.build()?;
        grid.check_v_max(params.v_max)?;
        if params.v_max < 0 {
            return Err(Error::InvalidParameter(format!("v_max must be nonnegative, got {}", params.v_max)));
        }
        Ok(Self {
            id,
            grid,
            ex: params.exponents.resolve(grid)?,
            v_max: params.v_max,
            samples: params.samples,
            seed: params.seed,
            knobs: params.knobs.clone(),
            tol: DEFAULT_TOL,
        })
    }

    pub fn band(&self) -> i32 {
        self.knobs.band.unwrap_or(4)
    }

    pub fn family(&self) -> Result<Vec<SampledField>> {
        family::test_family(&self.grid, self.samples, self.seed, self.band())
    }

    fn at_level(&self, v_max: i32) -> Result<Self> {
        self.grid.check_v_max(v_max)?;
        Ok(Self { v_max, ..self.clone() })
    }
}

/// Result of one evaluation. `passed` is set for exact checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: Option<bool>,
    pub constant: Option<f64>,
    pub witness: Value,
}

impl Outcome {
    pub fn measured(constant: f64, witness: Value) -> Self {
        Self { passed: None, constant: Some(constant), witness }
    }

    pub fn exact(passed: bool, constant: Option<f64>, witness: Value) -> Self {
        Self { passed: Some(passed), constant, witness }
    }
}

/// Running two-sided ratio statistics with the sample that attains each end.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_at: Value,
    pub hi_at: Value,
    pub count: usize,
    pub nan: bool,
}

impl Default for RatioRange {
    fn default() -> Self {
        Self { lo: f64::INFINITY, hi: 0.0, lo_at: Value::Null, hi_at: Value::Null, count: 0, nan: false }
    }
}

impl RatioRange {
    pub fn push(&mut self, r: f64, at: impl FnOnce() -> Value) {
        self.count += 1;
        if r.is_nan() {
            if !self.nan {
                self.nan = true;
                self.hi_at = at();
            }
            return;
        }
        if r < self.lo || r > self.hi {
            let w = at();
            if r < self.lo {
                self.lo = r;
                self.lo_at = w.clone();
            }
            if r > self.hi {
                self.hi = r;
                self.hi_at = w;
            }
        }
    }

    /// `max(hi, 1/lo)`: the equivalence constant in both directions.
    pub fn two_sided(&self) -> f64 {
        if self.nan {
            return f64::NAN;
        }
        if self.count == 0 {
            return 0.0;
        }
        self.hi.max(1.0 / self.lo)
    }

    pub fn witness(&self) -> Value {
        if self.count == 0 {
            return json!({ "vacuous": true });
        }
        json!({ "min_ratio": finite_or_null(self.lo), "max_ratio": finite_or_null(self.hi),
                "min_at": self.lo_at, "max_at": self.hi_at, "count": self.count })
    }
}

pub fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(format!("{x}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Pointwise,
    Sequence,
    Equivalence,
    Embedding,
    Maximal,
    Atomic,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckInfo {
    pub id: &'static str,
    pub kind: CheckKind,
    /// Exact checks report PASS/FAIL; the rest report MEASURED.
    pub exact: bool,
}

const fn info(id: &'static str, kind: CheckKind, exact: bool) -> CheckInfo {
    CheckInfo { id, kind, exact }
}

pub const REGISTRY: &[CheckInfo] = &[
    info("eta_shift", CheckKind::Pointwise, false),
    info("r_trick", CheckKind::Pointwise, false),
    info("dhhr_estimate", CheckKind::Pointwise, false),
    info("conv_est", CheckKind::Pointwise, false),
    info("conv_est1", CheckKind::Pointwise, false),
    info("conv_est2", CheckKind::Pointwise, false),
    info("key_lemma", CheckKind::Pointwise, false),
    info("emd", CheckKind::Pointwise, false),
    info("hardy", CheckKind::Sequence, true),
    info("bm_interpolation", CheckKind::Sequence, true),
    info("sharp", CheckKind::Equivalence, false),
    info("star_v0", CheckKind::Equivalence, false),
    info("gamma_shift", CheckKind::Equivalence, false),
    info("peetre", CheckKind::Equivalence, false),
    info("lambda_star", CheckKind::Equivalence, false),
    info("besov_identification", CheckKind::Equivalence, false),
    info("morrey_identification", CheckKind::Equivalence, false),
    info("reconstruction", CheckKind::Equivalence, true),
    info("coefficient_bound", CheckKind::Equivalence, false),
    info("elem_q", CheckKind::Embedding, true),
    info("elem_alpha", CheckKind::Embedding, false),
    info("sobolev", CheckKind::Embedding, false),
    info("classical_into_type", CheckKind::Embedding, false),
    info("schwartz_chain", CheckKind::Embedding, true),
    info("maximal", CheckKind::Maximal, false),
    info("fj_kernel_bound", CheckKind::Atomic, false),
    info("atomic_decomposition", CheckKind::Atomic, true),
];

pub fn lookup(id: &str) -> Result<&'static CheckInfo> {
    REGISTRY.iter().find(|c| c.id == id).ok_or_else(|| Error::UnknownCheck(id.to_string()))
}

fn evaluate(ctx: &Ctx) -> Result<Outcome> {
    match lookup(ctx.id)?.kind {
        CheckKind::Pointwise => pointwise::evaluate(ctx),
        CheckKind::Sequence => sequence::evaluate(ctx),
        CheckKind::Equivalence => equivalence::evaluate(ctx),
        CheckKind::Embedding => embedding::evaluate(ctx),
        CheckKind::Maximal => maximal::evaluate(ctx),
        CheckKind::Atomic => atomic_evaluate(ctx),
    }
}

/// Runs one check. Measured checks with `params.stability` set are
/// re-evaluated at each listed level and FAIL if the constant changes by
/// more than [`STABILITY_FACTOR`] between consecutive levels.
pub fn run_check(id: &str, params: &CheckParams, config_digest: &str) -> Result<CheckReport> {
    let info = lookup(id)?;
    let ctx = Ctx::new(info.id, params)?;
    let main = evaluate(&ctx)?;
    let mut witness = json!({ "worst": main.witness });
    let mut status = match main.passed {
        Some(true) => Status::Pass,
        Some(false) => Status::Fail,
        None => Status::Measured,
    };
    if let Some(c) = main.constant {
        if !c.is_finite() {
            status = Status::Fail;
            witness["non_finite"] = json!(format!("{c}"));
        }
    }
    if let (None, Some(levels)) = (main.passed, &params.stability) {
        let mut rows = Vec::new();
        let mut prev: Option<f64> = None;
        let mut drift_ok = true;
        for &v in levels {
            let c = if v == ctx.v_max { main.constant } else { evaluate(&ctx.at_level(v)?)?.constant };
            let c = c.unwrap_or(f64::NAN);
            if let Some(p) = prev {
                drift_ok &= within_factor(p, c, STABILITY_FACTOR);
            }
            drift_ok &= c.is_finite();
            rows.push(json!({ "v_max": v, "constant": finite_or_null(c) }));
            prev = Some(c);
        }
        witness["stability"] = Value::Array(rows);
        witness["stable"] = json!(drift_ok);
        if !drift_ok {
            status = Status::Fail;
        }
    }
    Ok(CheckReport {
        check_id: info.id.to_string(),
        status,
        measured_constant: main.constant.filter(|c| c.is_finite()),
        witness,
        config_digest: config_digest.to_string(),
    })
}

/// `a` and `b` agree up to the factor `k`; two zeros agree.
pub fn within_factor(a: f64, b: f64, k: f64) -> bool {
    if a == 0.0 && b == 0.0 {
        return true;
    }
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a.max(b) <= k * a.min(b)
}

/// Runs the suite in parallel; reports keep the suite order.
pub fn run_suite(entries: &[(String, CheckParams)], config_digest: &str) -> Result<Vec<CheckReport>> {
    for (id, _) in entries {
        lookup(id)?;
    }
    entries.par_iter().map(|(id, p)| run_check(id, p, config_digest)).collect()
}

fn atomic_evaluate(ctx: &Ctx) -> Result<Outcome> {
    let ex = &ctx.ex;
    let (k, l) = atoms::admissible_kl(&ex.alpha, &ex.tau, &ex.p, ex.q.as_ref())?;
    let fields = ctx.family()?;
    match ctx.id {
        "fj_kernel_bound" => {
            let m_decay = ctx.knobs.decay.unwrap_or(ctx.grid.dim() as f64 + 1.0);
            let mut best = atoms::KernelBound { c: 0.0, cube: None, j: 0 };
            let mut at = 0usize;
            for (s, f) in fields.iter().enumerate().take(ctx.samples.min(2)) {
                let d = atoms::atomic_analyze(f, ctx.v_max, k, l)?;
                // the atom of each level nearest the origin
                let mut picked = Vec::new();
                for v in 0..=ctx.v_max {
                    if let Some(q) = d.atoms.keys().filter(|q| q.v == v).min_by_key(|q| q.m.iter().map(|m| m.abs()).sum::<i64>()) {
                        picked.push((q.clone(), d.atom_field(q).expect("atom exists")));
                    }
                }
                let b = atoms::fj_kernel_bound(&ctx.grid, &picked, k, l, ctx.v_max, m_decay)?;
                if b.c > best.c {
                    best = b;
                    at = s;
                }
            }
            Ok(Outcome::measured(
                best.c,
                json!({ "sample": at, "cube": best.cube, "j": best.j, "K": k, "L": l, "M": m_decay }),
            ))
        }
        "atomic_decomposition" => {
            let mut worst_err = 0.0f64;
            let mut failures = 0usize;
            let mut atoms_seen = 0usize;
            let mut first_failure = Value::Null;
            for (s, f) in fields.iter().enumerate() {
                let d = atoms::atomic_analyze(f, ctx.v_max, k, l)?;
                let back = atoms::atomic_synthesize(&d);
                let scale = f.sup_norm();
                let err = if scale > 0.0 { back.max_abs_diff(f)? / scale } else { back.sup_norm() };
                worst_err = worst_err.max(err);
                for cube in d.atoms.keys() {
                    atoms_seen += 1;
                    let r = atoms::validate_atom(&d.candidate(cube).expect("atom exists"), atoms::DEFAULT_ATOM_TOL)?;
                    if !r.ok() {
                        failures += 1;
                        if first_failure.is_null() {
                            first_failure = json!({ "sample": s, "cube": cube, "report": r });
                        }
                    }
                }
            }
            let passed = worst_err <= 1e-6 && failures == 0;
            Ok(Outcome::exact(
                passed,
                Some(worst_err),
                json!({ "K": k, "L": l, "atoms": atoms_seen, "invalid_atoms": failures, "first_invalid": first_failure }),
            ))
        }
        other => Err(Error::UnknownCheck(other.to_string())),
    }
}
