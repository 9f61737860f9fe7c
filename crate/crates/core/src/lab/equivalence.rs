//! Equivalent norms, measured as two-sided ratios over the test family.

use serde_json::json;

use super::maximal::dhr_decay;
use super::{Ctx, Outcome, RatioRange};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::SampledField;
use crate::lp::{besov_sup_norm, build_admissible_pair, build_dual_pair, covered_band, f_norm, f_norm_variant, morrey_space_norm, FNormVariant};
use crate::phi::{analyze, coefficient_bound, lambda_star, sequence_norm, synthesize};

/// Largest relative sup error accepted by the round trip.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

pub fn evaluate(ctx: &Ctx) -> Result<Outcome> {
    match ctx.id {
        "sharp" => sharp(ctx),
        "star_v0" => star_v0(ctx),
        "gamma_shift" => {
            let gamma = ctx.knobs.gamma.unwrap_or(1);
            variant_ratio(ctx, FNormVariant::Gamma { gamma }, json!({ "gamma": gamma }))
        }
        "peetre" => peetre(ctx),
        "lambda_star" => lambda_star_check(ctx),
        "besov_identification" => besov(ctx),
        "morrey_identification" => morrey(ctx),
        "reconstruction" => reconstruction(ctx),
        "coefficient_bound" => coefficients(ctx),
        other => Err(Error::UnknownCheck(other.to_string())),
    }
}

/// `min_x (tau(x) - 1/p(x))` and `max_x` of the same.
fn tau_gap(ctx: &Ctx) -> (f64, f64) {
    let g = ctx.ex.tau.values().iter().zip(ctx.ex.p.values()).map(|(t, p)| t - 1.0 / p);
    g.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Ratio `other(f) / f_norm(f)` over the family.
fn family_ratio(ctx: &Ctx, mut other: impl FnMut(&SampledField) -> Result<f64>) -> Result<RatioRange> {
    let mut range = RatioRange::default();
    for (s, f) in ctx.family()?.iter().enumerate() {
        let base = f_norm(f, ctx.ex.space(), ctx.v_max, None, ctx.tol)?.value;
        let o = other(f)?;
        if base == 0.0 && o == 0.0 {
            continue;
        }
        range.push(o / base, || json!({ "sample": s, "f_norm": base, "other": o }));
    }
    Ok(range)
}

fn variant_ratio(ctx: &Ctx, variant: FNormVariant, extra: serde_json::Value) -> Result<Outcome> {
    let range = family_ratio(ctx, |f| Ok(f_norm_variant(f, ctx.ex.space(), ctx.v_max, variant, None, ctx.tol)?.value))?;
    Ok(Outcome::measured(range.two_sided(), json!({ "ratios": range.witness(), "params": extra })))
}

fn sharp(ctx: &Ctx) -> Result<Outcome> {
    let (lo, _) = tau_gap(ctx);
    if lo < 0.0 {
        return Err(Error::Hypothesis(format!("the sharp form needs tau >= 1/p pointwise; min(tau - 1/p) = {lo}")));
    }
    variant_ratio(ctx, FNormVariant::Sharp, json!({}))
}

fn star_v0(ctx: &Ctx) -> Result<Outcome> {
    let (_, hi) = tau_gap(ctx);
    let ok = hi < 0.0 || (hi <= 0.0 && ctx.ex.q.is_none());
    if !ok {
        return Err(Error::Hypothesis(format!(
            "layers from v = 0 need tau < 1/p (or tau <= 1/p with q = infinity); max(tau - 1/p) = {hi}"
        )));
    }
    variant_ratio(ctx, FNormVariant::StarV0, json!({}))
}

/// Peetre exponent `1.05 tau^+ m / (tau^- p^-)` with `m` from the maximal lemma.
pub fn peetre_threshold(ctx: &Ctx) -> Result<f64> {
    let ex = &ctx.ex;
    if !(ex.tau.min() > 0.0) {
        return Err(Error::Hypothesis(format!("the Peetre form needs tau^- > 0, got {}", ex.tau.min())));
    }
    if ex.q.is_none() || !ex.p.max().is_finite() {
        return Err(Error::Hypothesis("the Peetre form needs p^+, q^+ < infinity".into()));
    }
    let (_, m) = dhr_decay(ctx)?;
    Ok(ex.tau.max() * m / (ex.tau.min() * ex.p.min()))
}

fn peetre(ctx: &Ctx) -> Result<Outcome> {
    let threshold = peetre_threshold(ctx)?;
    let a = ctx.knobs.a.unwrap_or(1.05 * threshold);
    if !(a > threshold) {
        return Err(Error::Hypothesis(format!("Peetre exponent a = {a} must exceed {threshold}")));
    }
    variant_ratio(ctx, FNormVariant::Peetre { a }, json!({ "a": a, "threshold": threshold }))
}

/// `(r, d)` for `lambda*`: `r` at half its admissible bound (capped at 1),
/// `d` 5% above its threshold.
pub fn lambda_star_params(ctx: &Ctx) -> Result<(f64, f64)> {
    let ex = &ctx.ex;
    let n = ctx.grid.dim() as f64;
    let (tmin, tmax) = (ex.tau.min(), ex.tau.max());
    if !(tmin > 0.0) || ex.q.is_none() {
        return Err(Error::Hypothesis("lambda* equivalence needs tau^- > 0 and q^+ < infinity".into()));
    }
    let r = ctx.knobs.r.unwrap_or((0.5 * ex.p.min().min(ex.q_min()) * tmin / tmax).min(1.0));
    if !(r > 0.0 && tmax / tmin < ex.p.min().min(ex.q_min()) / r) {
        return Err(Error::Hypothesis(format!("r = {r} violates tau^+/tau^- < min(p^-, q^-)/r")));
    }
    let (w, _) = dhr_decay(ctx)?;
    let a = r * ex.alpha.clog().max(ex.alpha.max() - ex.alpha.min());
    let threshold = n * r * tmax + n * tmin + n + a + w;
    let d = ctx.knobs.d.unwrap_or(1.05 * threshold);
    if !(d > threshold) {
        return Err(Error::Hypothesis(format!("d = {d} must exceed {threshold}")));
    }
    Ok((r, d))
}

fn lambda_star_check(ctx: &Ctx) -> Result<Outcome> {
    let (r, d) = lambda_star_params(ctx)?;
    let pair = build_admissible_pair(&ctx.grid, ctx.v_max)?;
    let mut range = RatioRange::default();
    for (s, f) in ctx.family()?.iter().enumerate() {
        let lambda = analyze(f, &pair, ctx.v_max)?;
        let base = sequence_norm(&lambda, ctx.ex.space(), ctx.v_max, None, ctx.tol)?.value;
        let star = sequence_norm(&lambda_star(&lambda, &ctx.grid, r, d)?, ctx.ex.space(), ctx.v_max, None, ctx.tol)?.value;
        if base == 0.0 && star == 0.0 {
            continue;
        }
        range.push(star / base, || json!({ "sample": s }));
    }
    Ok(Outcome::measured(range.two_sided(), json!({ "ratios": range.witness(), "r": r, "d": d })))
}

fn besov(ctx: &Ctx) -> Result<Outcome> {
    let (lo, _) = tau_gap(ctx);
    if !(lo > 0.0) {
        return Err(Error::Hypothesis(format!("the Besov identification needs (tau - 1/p)^- > 0; got {lo}")));
    }
    let ex = &ctx.ex;
    let n = ctx.grid.dim() as f64;
    let s = ExponentField::new(
        ctx.grid,
        (0..ctx.grid.len()).map(|i| ex.alpha.at(i) + n * (ex.tau.at(i) - 1.0 / ex.p.at(i))).collect(),
    )?;
    let range = family_ratio(ctx, |f| besov_sup_norm(f, &s, ctx.v_max))?;
    Ok(Outcome::measured(range.two_sided(), json!({ "ratios": range.witness() })))
}

/// The F-norm with `tau = 1/p - 1/u` against the Triebel-Lizorkin-Morrey norm.
fn morrey(ctx: &Ctx) -> Result<Outcome> {
    let ex = &ctx.ex;
    if let Some(i) = (0..ctx.grid.len()).find(|&i| ex.u.at(i) < ex.p.at(i)) {
        return Err(Error::Hypothesis(format!("the Morrey identification needs u >= p; fails at index {i}")));
    }
    let tau = ExponentField::new(ctx.grid, (0..ctx.grid.len()).map(|i| 1.0 / ex.p.at(i) - 1.0 / ex.u.at(i)).collect())?;
    let mut space = ex.space();
    space.tau = &tau;
    let mut range = RatioRange::default();
    for (s, f) in ctx.family()?.iter().enumerate() {
        let base = f_norm(f, space, ctx.v_max, None, ctx.tol)?.value;
        let m = morrey_space_norm(f, &ex.alpha, &ex.p, space.q, &ex.u, ctx.v_max, None, ctx.tol)?.value;
        if base == 0.0 && m == 0.0 {
            continue;
        }
        range.push(m / base, || json!({ "sample": s, "f_norm": base, "morrey": m }));
    }
    Ok(Outcome::measured(range.two_sided(), json!({ "ratios": range.witness() })))
}

/// `T_psi S_phi f = f`: PASS iff the worst relative sup error is at most
/// [`RECONSTRUCTION_TOL`].
fn reconstruction(ctx: &Ctx) -> Result<Outcome> {
    let pair = build_admissible_pair(&ctx.grid, ctx.v_max)?;
    let dual = build_dual_pair(&pair)?;
    let mut worst = 0.0f64;
    let mut at = json!(null);
    for (s, f) in ctx.family()?.iter().enumerate() {
        let back = synthesize(&analyze(f, &pair, ctx.v_max)?, &dual, &ctx.grid)?;
        let sup = f.sup_norm();
        let err = if sup == 0.0 { back.sup_norm() } else { f.max_abs_diff(&back)? / sup };
        if !(err <= worst) {
            worst = err;
            at = json!({ "sample": s });
        }
    }
    Ok(Outcome::exact(
        worst <= RECONSTRUCTION_TOL,
        Some(worst),
        json!({ "relative_error": super::finite_or_null(worst), "at": at, "band": ctx.band(),
                "covered_band": covered_band(ctx.v_max), "dual_residual": dual.residual() }),
    ))
}

fn coefficients(ctx: &Ctx) -> Result<Outcome> {
    let pair = build_admissible_pair(&ctx.grid, ctx.v_max)?;
    let mut best = (0.0f64, json!(null));
    for (s, f) in ctx.family()?.iter().enumerate() {
        let lambda = analyze(f, &pair, ctx.v_max)?;
        let b = coefficient_bound(&lambda, ctx.ex.space(), ctx.v_max, ctx.tol)?;
        if b.c > best.0 {
            let point = b.point.map(|i| ctx.grid.point(i));
            best = (b.c, json!({ "sample": s, "cube": b.cube, "x": point, "sequence_norm": b.sequence_norm }));
        }
    }
    Ok(Outcome::measured(best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::super::tests::params;
    use super::super::{run_check, Status};
    use super::*;
    use crate::exponent::ExponentSpec;

    fn constant(v: f64) -> Option<ExponentSpec> {
        Some(ExponentSpec::Constant { value: v })
    }

    #[test]
    fn gamma_zero_is_identity() {
        let mut p = params(1, 4.0, 256, 4);
        p.knobs.gamma = Some(0);
        let r = run_check("gamma_shift", &p, "").unwrap();
        assert_eq!(r.measured_constant, Some(1.0));
    }

    #[test]
    fn morrey_degenerates_when_u_equals_p() {
        let mut p = params(1, 4.0, 256, 4);
        p.exponents.p = Some(ExponentSpec::AffineClamped { base: 2.0, slope: vec![0.2], lo: 1.5, hi: 2.5 });
        let o = evaluate(&Ctx::new("morrey_identification", &p).unwrap()).unwrap();
        assert!((o.constant.unwrap() - 1.0).abs() <= 1e-10, "{:?}", o.constant);
        p.exponents.u = constant(1.0);
        assert!(matches!(run_check("morrey_identification", &p, ""), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn hypotheses_are_enforced() {
        // defaults: tau = 1/4 < 1/p = 1/2
        let p = params(1, 4.0, 256, 3);
        assert!(matches!(run_check("sharp", &p, ""), Err(Error::Hypothesis(_))));
        assert!(matches!(run_check("besov_identification", &p, ""), Err(Error::Hypothesis(_))));
        assert!(run_check("star_v0", &p, "").is_ok());
        let mut q = p.clone();
        q.exponents.tau = constant(0.75);
        assert!(matches!(run_check("star_v0", &q, ""), Err(Error::Hypothesis(_))));
        for id in ["sharp", "besov_identification"] {
            let r = run_check(id, &q, "").unwrap();
            let c = r.measured_constant.unwrap();
            assert!(c.is_finite() && c >= 1.0, "{id}: {c}");
        }
    }

    #[test]
    fn reconstruction_passes_and_fails() {
        let p = params(1, 4.0, 256, 4);
        assert_eq!(run_check("reconstruction", &p, "").unwrap().status, Status::Pass);
        // test fields reach |xi| = 16 while the covered band stops near 2^2
        let mut q = params(1, 4.0, 256, 1);
        q.knobs.band = Some(4);
        assert_eq!(run_check("reconstruction", &q, "").unwrap().status, Status::Fail);
    }

    #[test]
    fn measured_equivalences_finite() {
        let p = params(1, 4.0, 256, 3);
        for id in ["peetre", "lambda_star", "coefficient_bound"] {
            let r = run_check(id, &p, "").unwrap();
            let c = r.measured_constant.unwrap();
            assert!(c.is_finite() && c > 0.0, "{id}: {c}");
        }
    }

    #[test]
    fn peetre_dominates() {
        let p = params(1, 4.0, 256, 3);
        let o = evaluate(&Ctx::new("peetre", &p).unwrap()).unwrap();
        assert!(o.witness["ratios"]["min_ratio"].as_f64().unwrap() >= 1.0 - 1e-12);
    }
}
