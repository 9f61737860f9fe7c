//! Embeddings between spaces with different exponents.

use serde_json::json;

use super::{inner, Ctx, Outcome};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::SampledField;
use crate::lebesgue::{mixed_norm, InnerExponent};
use crate::lp::{decompose_from, f_norm, weight_layers, SpaceExponents};

/// Relative allowance for the exact monotonicity check.
pub const ARITHMETIC_SLACK: f64 = 1e-12;

pub fn evaluate(ctx: &Ctx) -> Result<Outcome> {
    match ctx.id {
        "elem_q" => elem_q(ctx),
        "elem_alpha" => elem_alpha(ctx),
        "sobolev" => sobolev(ctx),
        "classical_into_type" => classical(ctx),
        "schwartz_chain" => schwartz(ctx),
        other => Err(Error::UnknownCheck(other.to_string())),
    }
}

/// `q0 <= q1` pointwise, `None` being infinity.
fn q_ordered(q0: &Option<ExponentField>, q1: &Option<ExponentField>) -> bool {
    match (q0, q1) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(a), Some(b)) => a.values().iter().zip(b.values()).all(|(x, y)| x <= y),
    }
}

/// Worst `target(f) / source(f)` over the family.
fn worst_ratio(
    ctx: &Ctx,
    mut source: impl FnMut(&SampledField) -> Result<f64>,
    mut target: impl FnMut(&SampledField) -> Result<f64>,
) -> Result<(f64, serde_json::Value)> {
    let mut best = (0.0f64, json!(null));
    for (s, f) in ctx.family()?.iter().enumerate() {
        let (a, b) = (source(f)?, target(f)?);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let r = b / a;
        if !(r <= best.0) {
            best = (r, json!({ "sample": s, "source": a, "target": b }));
        }
    }
    Ok(best)
}

fn space<'a>(alpha: &'a ExponentField, tau: &'a ExponentField, p: &'a ExponentField, q: InnerExponent<'a>) -> SpaceExponents<'a> {
    SpaceExponents { alpha, tau, p, q }
}

/// Exact: the norm with `q1` never exceeds the norm with `q0 <= q1`.
fn elem_q(ctx: &Ctx) -> Result<Outcome> {
    let ex = &ctx.ex;
    if !q_ordered(&ex.q0, &ex.q1) {
        return Err(Error::Hypothesis("elem_q needs q0 <= q1 pointwise".into()));
    }
    // tight Luxemburg brackets so that rounding stays below the slack
    let tol = ctx.tol.min(1e-13);
    let (worst, at) = worst_ratio(
        ctx,
        |f| Ok(f_norm(f, space(&ex.alpha, &ex.tau, &ex.p, inner(&ex.q0)), ctx.v_max, None, tol)?.value),
        |f| Ok(f_norm(f, space(&ex.alpha, &ex.tau, &ex.p, inner(&ex.q1)), ctx.v_max, None, tol)?.value),
    )?;
    Ok(Outcome::exact(worst <= 1.0 + ARITHMETIC_SLACK, Some(worst), at))
}

fn elem_alpha(ctx: &Ctx) -> Result<Outcome> {
    let ex = &ctx.ex;
    let gap = (0..ctx.grid.len()).map(|i| ex.alpha0.at(i) - ex.alpha1.at(i)).fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::Hypothesis(format!("elem_alpha needs (alpha0 - alpha1)^- > 0, got {gap}")));
    }
    let (worst, at) = worst_ratio(
        ctx,
        |f| Ok(f_norm(f, space(&ex.alpha0, &ex.tau, &ex.p, inner(&ex.q0)), ctx.v_max, None, ctx.tol)?.value),
        |f| Ok(f_norm(f, space(&ex.alpha1, &ex.tau, &ex.p, inner(&ex.q1)), ctx.v_max, None, ctx.tol)?.value),
    )?;
    Ok(Outcome::measured(worst, json!({ "worst": at, "alpha_gap": gap })))
}

fn require_tau_and_q(ctx: &Ctx, id: &str) -> Result<()> {
    if !(ctx.ex.tau.min() > 0.0) || ctx.ex.q.is_none() {
        return Err(Error::Hypothesis(format!("{id} needs tau^- > 0 and q^+ < infinity")));
    }
    Ok(())
}

/// Source `(alpha0, p0, q)`, target `(alpha1, p1, infinity)` with
/// `alpha1 = alpha0 - n/p0 + n/p1`.
fn sobolev(ctx: &Ctx) -> Result<Outcome> {
    require_tau_and_q(ctx, "sobolev")?;
    let ex = &ctx.ex;
    let n = ctx.grid.dim() as f64;
    let ratio = (0..ctx.grid.len()).map(|i| ex.p0.at(i) / ex.p1.at(i)).fold(0.0, f64::max);
    if !(ratio < 1.0) {
        return Err(Error::Hypothesis(format!("sobolev needs (p0/p1)^+ < 1, got {ratio}")));
    }
    let alpha1 = ExponentField::new(
        ctx.grid,
        (0..ctx.grid.len()).map(|i| ex.alpha0.at(i) - n / ex.p0.at(i) + n / ex.p1.at(i)).collect(),
    )?;
    let (worst, at) = worst_ratio(
        ctx,
        |f| Ok(f_norm(f, space(&ex.alpha0, &ex.tau, &ex.p0, inner(&ex.q)), ctx.v_max, None, ctx.tol)?.value),
        |f| Ok(f_norm(f, space(&alpha1, &ex.tau, &ex.p1, InnerExponent::Infinite), ctx.v_max, None, ctx.tol)?.value),
    )?;
    Ok(Outcome::measured(worst, json!({ "worst": at, "p0_over_p1": ratio })))
}

/// Classical `F^s_{p2,q}` norm: the mixed norm of all weighted layers.
pub fn classical_f_norm(f: &SampledField, s: &ExponentField, p: &ExponentField, q: InnerExponent, v_max: i32, tol: f64) -> Result<f64> {
    Ok(mixed_norm(&weight_layers(&decompose_from(f, 0, v_max)?, s)?, p, q, tol)?.value)
}

/// Source `F^{alpha + n tau + n/p0 - n/p}_{p0,q}`, target the space with `p`.
fn classical(ctx: &Ctx) -> Result<Outcome> {
    require_tau_and_q(ctx, "classical_into_type")?;
    let ex = &ctx.ex;
    let n = ctx.grid.dim() as f64;
    if let Some(i) = (0..ctx.grid.len()).find(|&i| ex.p0.at(i) > ex.p.at(i)) {
        return Err(Error::Hypothesis(format!("classical_into_type needs p0 <= p; fails at index {i}")));
    }
    let s = ExponentField::new(
        ctx.grid,
        (0..ctx.grid.len())
            .map(|i| ex.alpha.at(i) + n * ex.tau.at(i) + n / ex.p0.at(i) - n / ex.p.at(i))
            .collect(),
    )?;
    let (worst, at) = worst_ratio(
        ctx,
        |f| classical_f_norm(f, &s, &ex.p0, inner(&ex.q), ctx.v_max, ctx.tol),
        |f| Ok(f_norm(f, ex.space(), ctx.v_max, None, ctx.tol)?.value),
    )?;
    Ok(Outcome::measured(worst, json!({ "worst": at })))
}

/// A Gaussian has a finite, positive norm.
fn schwartz(ctx: &Ctx) -> Result<Outcome> {
    require_tau_and_q(ctx, "schwartz_chain")?;
    let g = SampledField::from_real_fn(ctx.grid, |x| (-x.iter().map(|t| t * t).sum::<f64>()).exp())?;
    let norm = f_norm(&g, ctx.ex.space(), ctx.v_max, None, ctx.tol)?.value;
    Ok(Outcome::exact(norm.is_finite() && norm > 0.0, Some(norm), json!({ "field": "exp(-|x|^2)", "norm": super::finite_or_null(norm) })))
}

#[cfg(test)]
mod tests {
    use super::super::tests::params;
    use super::super::{run_check, InnerSpec, Status};
    use super::*;
    use crate::exponent::ExponentSpec;

    fn finite(v: f64) -> Option<InnerSpec> {
        Some(InnerSpec::Finite(ExponentSpec::Constant { value: v }))
    }

    #[test]
    fn elem_q_equal_exponents_is_one() {
        let p = params(1, 4.0, 256, 3);
        let r = run_check("elem_q", &p, "").unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!((r.measured_constant.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elem_q_one_into_two() {
        let mut p = params(1, 4.0, 256, 3);
        p.exponents.q0 = finite(1.0);
        p.exponents.q1 = finite(2.0);
        let r = run_check("elem_q", &p, "").unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(r.measured_constant.unwrap() < 1.0);
        p.exponents.q0 = finite(3.0);
        assert!(matches!(run_check("elem_q", &p, ""), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn sobolev_constant_exponents() {
        let mut p = params(1, 4.0, 256, 3);
        p.exponents.p0 = Some(ExponentSpec::Constant { value: 1.5 });
        p.exponents.p1 = Some(ExponentSpec::Constant { value: 3.0 });
        let c = run_check("sobolev", &p, "").unwrap().measured_constant.unwrap();
        assert!(c.is_finite() && c > 0.0);
        // p0 = p1 is outside the hypothesis
        p.exponents.p1 = Some(ExponentSpec::Constant { value: 1.5 });
        assert!(run_check("sobolev", &p, "").is_err());
    }

    #[test]
    fn remaining_embeddings() {
        let mut p = params(1, 4.0, 256, 3);
        p.exponents.alpha1 = Some(ExponentSpec::Constant { value: 0.0 });
        p.exponents.p0 = Some(ExponentSpec::Constant { value: 1.5 });
        for id in ["elem_alpha", "classical_into_type"] {
            let c = run_check(id, &p, "").unwrap().measured_constant.unwrap();
            assert!(c.is_finite() && c > 0.0, "{id}: {c}");
        }
        assert_eq!(run_check("schwartz_chain", &p, "").unwrap().status, Status::Pass);
    }
}
