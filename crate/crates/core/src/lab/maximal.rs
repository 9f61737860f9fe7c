//! Boundedness of `(f_v) -> (eta_{v,m} * f_v)` in the mixed norm and in the
//! cube-weighted norm.

use serde_json::json;

use super::family::random_layers;
use super::{inner, Ctx, Outcome};
use crate::error::{Error, Result};
use crate::grid::{convolve, eta_kernel};
use crate::lebesgue::{default_cubes, mixed_norm, tau_weighted_norm, LayeredField};

/// `(w, m)` with `w = n + c_log(1/q) + c_log(tau) + 0.05` and
/// `m = n tau^+ + 2n + w + 0.05` unless the `m` knob is set.
pub fn dhr_decay(ctx: &Ctx) -> Result<(f64, f64)> {
    let ex = &ctx.ex;
    let n = ctx.grid.dim() as f64;
    let clog_q = match &ex.q {
        Some(q) => q.reciprocal()?.clog(),
        None => 0.0,
    };
    let w = n + clog_q + ex.tau.clog() + 0.05;
    let m = ctx.knobs.m.unwrap_or(n * ex.tau.max() + 2.0 * n + w + 0.05);
    Ok((w, m))
}

pub fn smooth_layers(f: &LayeredField, m: f64) -> Result<LayeredField> {
    let grid = *f.grid();
    let out = f.levels().map(|(v, l)| convolve(&eta_kernel(&grid, v, m)?, l)).collect::<Result<Vec<_>>>()?;
    LayeredField::new(f.first_level(), out)
}

/// `||smoothed|| / ||f||`, `None` when both vanish.
fn ratio(a: f64, b: f64) -> Option<f64> {
    if a == 0.0 && b == 0.0 {
        None
    } else {
        Some(b / a)
    }
}

pub fn evaluate(ctx: &Ctx) -> Result<Outcome> {
    if ctx.id != "maximal" {
        return Err(Error::UnknownCheck(ctx.id.to_string()));
    }
    let ex = &ctx.ex;
    let (w, m) = dhr_decay(ctx)?;
    let min_pq = ex.p.min().min(ex.q_min());
    let mixed = ex.p.min() > 1.0 && ex.q_min() > 1.0 && ex.p.max().is_finite();
    let weighted = ex.tau.min() > 0.0 && ex.tau.max() / ex.tau.min() < min_pq;
    if !mixed && !weighted {
        return Err(Error::Hypothesis(
            "neither 1 < p^-, q^- nor 0 < tau^+/tau^- < min(p^-, q^-) holds".into(),
        ));
    }
    let cubes = default_cubes(&ctx.grid, ctx.v_max)?;
    let (mut worst_mixed, mut worst_weighted) = (0.0f64, 0.0f64);
    let (mut at_mixed, mut at_weighted) = (json!(null), json!(null));
    for s in 0..ctx.samples as u64 {
        let f = random_layers(&ctx.grid, ctx.seed, s, ctx.v_max, ctx.band())?;
        let g = smooth_layers(&f, m)?;
        if mixed {
            let a = mixed_norm(&f, &ex.p, inner(&ex.q), ctx.tol)?.value;
            let b = mixed_norm(&g, &ex.p, inner(&ex.q), ctx.tol)?.value;
            if let Some(r) = ratio(a, b).filter(|r| !(*r <= worst_mixed)) {
                worst_mixed = r;
                at_mixed = json!({ "sample": s });
            }
        }
        if weighted {
            let a = tau_weighted_norm(&f, &ex.p, inner(&ex.q), &ex.tau, &cubes, ctx.tol)?.value;
            let b = tau_weighted_norm(&g, &ex.p, inner(&ex.q), &ex.tau, &cubes, ctx.tol)?.value;
            if let Some(r) = ratio(a, b).filter(|r| !(*r <= worst_weighted)) {
                worst_weighted = r;
                at_weighted = json!({ "sample": s });
            }
        }
    }
    let worst = worst_mixed.max(worst_weighted);
    let worst = if worst_mixed.is_nan() || worst_weighted.is_nan() { f64::NAN } else { worst };
    Ok(Outcome::measured(
        worst,
        json!({
            "m": m, "w": w,
            "mixed": if mixed { json!({ "ratio": worst_mixed, "at": at_mixed }) } else { json!("not applicable") },
            "weighted": if weighted { json!({ "ratio": worst_weighted, "at": at_weighted }) } else { json!("not applicable") },
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::tests::params;
    use super::super::run_check;
    use super::*;
    use crate::grid::{Grid, SampledField};
    use crate::ExponentField;

    #[test]
    fn zero_layers_are_vacuous() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let f = LayeredField::new(0, vec![SampledField::zeros(g); 3]).unwrap();
        let s = smooth_layers(&f, 3.0).unwrap();
        let p = ExponentField::constant(g, 2.0).unwrap();
        let q = ExponentField::constant(g, 2.0).unwrap();
        let a = mixed_norm(&f, &p, crate::InnerExponent::Finite(&q), 1e-12).unwrap().value;
        let b = mixed_norm(&s, &p, crate::InnerExponent::Finite(&q), 1e-12).unwrap().value;
        assert_eq!(ratio(a, b), None);
    }

    #[test]
    fn constant_layer_ratio_is_kernel_mass() {
        // eta * 1 = ||eta||_1 (discrete), so every norm scales by that mass
        let g = Grid::new(1, 4.0, 256).unwrap();
        let (v, m) = (2, 3.0);
        let f = LayeredField::new(v, vec![SampledField::from_real(g, vec![1.0; 256]).unwrap()]).unwrap();
        let s = smooth_layers(&f, m).unwrap();
        let mass: f64 = eta_kernel(&g, v, m).unwrap().values().iter().map(|z| z.re).sum::<f64>() * g.spacing();
        for z in s.layers()[0].values() {
            assert!((z.re - mass).abs() < 1e-12 * mass);
        }
        // closed form of the continuum mass: 2 / (m - 1)
        assert!((mass - 2.0 / (m - 1.0)).abs() < 0.05);
    }

    #[test]
    fn measured_and_refused() {
        let p = params(1, 4.0, 256, 3);
        let c = run_check("maximal", &p, "").unwrap().measured_constant.unwrap();
        assert!(c.is_finite() && c > 0.0);
        let mut q = p.clone();
        q.exponents.p = Some(crate::ExponentSpec::Constant { value: 0.8 });
        q.exponents.tau = Some(crate::ExponentSpec::Constant { value: 0.0 });
        assert!(run_check("maximal", &q, "").is_err());
    }
}
