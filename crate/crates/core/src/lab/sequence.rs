//! Exact sequence inequalities: the Hardy-type bound for geometric
//! averages and the interpolation bound between two weighted sup norms.
//! Both sides are computed exactly (up to rounding) and compared against
//! explicit constants.

use num_complex::Complex64;
use rand::Rng;
use serde_json::json;

use super::family::rng_for;
use super::{Ctx, Outcome};
use crate::error::{Error, Result};

/// Relative rounding allowance when comparing the two sides.
pub const ROUNDING: f64 = 1e-12;

/// `(sum_k delta_k^q)^{1/q}` and `(sum_k eps_k^q)^{1/q}` for
/// `delta_k = sum_{j <= k} a^{k-j} eps_j`, where `eps` vanishes after its
/// last entry and `delta` continues geometrically. `q = None` is the sup.
pub fn hardy_sides(a: f64, q: Option<f64>, eps: &[f64]) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("Hardy ratio a must lie in (0, 1), got {a}")));
    }
    if let Some(q) = q {
        if !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
    }
    let mut delta = 0.0;
    let mut lhs = 0.0f64;
    let mut rhs = 0.0f64;
    for &e in eps {
        delta = a * delta + e;
        match q {
            Some(q) => {
                lhs += delta.powf(q);
                rhs += e.powf(q);
            }
            None => {
                lhs = lhs.max(delta);
                rhs = rhs.max(e);
            }
        }
    }
    Ok(match q {
        Some(q) => {
            let aq = a.powf(q);
            lhs += delta.powf(q) * aq / (1.0 - aq);
            (lhs.powf(1.0 / q), rhs.powf(1.0 / q))
        }
        None => (lhs, rhs),
    })
}

/// `1/(1-a)` for `q >= 1`, `(1 - a^q)^{-1/q}` for `q < 1`.
pub fn hardy_constant(a: f64, q: Option<f64>) -> f64 {
    match q {
        Some(q) if q < 1.0 => (1.0 - a.powf(q)).powf(-1.0 / q),
        _ => 1.0 / (1.0 - a),
    }
}

/// Sides of the interpolation inequality for `(a_j)_{j >= first}`:
/// `|| 2^{(sigma s0 + (1-sigma) s1) j} a_j ||_q` and
/// `|| 2^{s0 j} a_j ||_inf^sigma || 2^{s1 j} a_j ||_inf^{1-sigma}`.
pub fn bm_sides(s0: f64, s1: f64, sigma: f64, q: Option<f64>, first: i64, a: &[Complex64]) -> Result<(f64, f64)> {
    if !(s1 < s0) || !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!("need s1 < s0 and 0 < sigma < 1, got {s0}, {s1}, {sigma}")));
    }
    let s = sigma * s0 + (1.0 - sigma) * s1;
    let mut lhs = 0.0f64;
    let mut sup0 = 0.0f64;
    let mut sup1 = 0.0f64;
    for (i, z) in a.iter().enumerate() {
        let j = (first + i as i64) as f64;
        let m = z.norm();
        let t = 2f64.powf(s * j) * m;
        match q {
            Some(q) => lhs += t.powf(q),
            None => lhs = lhs.max(t),
        }
        sup0 = sup0.max(2f64.powf(s0 * j) * m);
        sup1 = sup1.max(2f64.powf(s1 * j) * m);
    }
    if let Some(q) = q {
        lhs = lhs.powf(1.0 / q);
    }
    Ok((lhs, sup0.powf(sigma) * sup1.powf(1.0 - sigma)))
}

/// `1` for `q = infinity`, otherwise `(1/(1-r0) + 1/(1-r1))^{1/q}` with
/// `r0 = 2^{-(1-sigma)(s0-s1)q}`, `r1 = 2^{-sigma(s0-s1)q}`.
pub fn bm_constant(s0: f64, s1: f64, sigma: f64, q: Option<f64>) -> f64 {
    match q {
        None => 1.0,
        Some(q) => {
            let d = s0 - s1;
            let r0 = 2f64.powf(-(1.0 - sigma) * d * q);
            let r1 = 2f64.powf(-sigma * d * q);
            (1.0 / (1.0 - r0) + 1.0 / (1.0 - r1)).powf(1.0 / q)
        }
    }
}

fn random_q(rng: &mut impl Rng) -> Option<f64> {
    if rng.gen_bool(0.1) {
        None
    } else {
        Some(rng.gen_range(0.25..4.0))
    }
}

fn q_json(q: Option<f64>) -> serde_json::Value {
    q.map_or(json!("infinity"), |q| json!(q))
}

pub fn evaluate(ctx: &Ctx) -> Result<Outcome> {
    let count = ctx.knobs.sequences.unwrap_or(10_000);
    let max_len = ctx.knobs.max_len.unwrap_or(64).max(1);
    // worst fraction of the explicit bound used by any sequence
    let mut worst = 0.0f64;
    let mut witness = json!(null);
    match ctx.id {
        "hardy" => {
            for i in 0..count as u64 {
                let mut rng = rng_for(ctx.seed, "hardy", i);
                let a: f64 = rng.gen_range(0.02..0.98);
                let q = random_q(&mut rng);
                let len = rng.gen_range(1..=max_len);
                let eps: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
                let (lhs, rhs) = hardy_sides(a, q, &eps)?;
                let used = lhs / (hardy_constant(a, q) * rhs);
                if used > worst {
                    worst = used;
                    witness = json!({ "sequence": i, "a": a, "q": q_json(q), "len": len, "lhs": lhs, "rhs": rhs });
                }
            }
            let (lhs, rhs) = hardy_sides(0.5, Some(1.0), &(0..=20).map(|k| 0.5f64.powi(k)).collect::<Vec<_>>())?;
            witness = json!({ "worst": witness, "closed_form_ratio": lhs / rhs });
        }
        "bm_interpolation" => {
            for i in 0..count as u64 {
                let mut rng = rng_for(ctx.seed, "bm", i);
                let s1: f64 = rng.gen_range(-2.0..2.0);
                let s0 = s1 + rng.gen_range(0.1..3.0);
                let sigma: f64 = rng.gen_range(0.05..0.95);
                let q = random_q(&mut rng);
                let first: i64 = rng.gen_range(0..8);
                let len = rng.gen_range(1..=max_len);
                let drift: f64 = rng.gen_range(s1..s0);
                let a: Vec<Complex64> = (0..len)
                    .map(|k| {
                        let mag = 2f64.powf(-drift * (first + k as i64) as f64) * 10f64.powf(rng.gen_range(-2.0..2.0));
                        Complex64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU))
                    })
                    .collect();
                let (lhs, rhs) = bm_sides(s0, s1, sigma, q, first, &a)?;
                let used = lhs / (bm_constant(s0, s1, sigma, q) * rhs);
                if used > worst {
                    worst = used;
                    witness = json!({ "sequence": i, "s0": s0, "s1": s1, "sigma": sigma, "q": q_json(q),
                                      "first": first, "len": len, "lhs": lhs, "rhs": rhs });
                }
            }
            let a: Vec<Complex64> = (0..=40).map(|j| Complex64::new(0.5f64.powi(j), 0.0)).collect();
            let (lhs, rhs) = bm_sides(1.0, 0.0, 0.5, None, 0, &a)?;
            witness = json!({ "worst": witness, "closed_form": { "lhs": lhs, "rhs": rhs } });
        }
        other => return Err(Error::UnknownCheck(other.to_string())),
    }
    Ok(Outcome::exact(worst <= 1.0 + ROUNDING, Some(worst), witness))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardy_closed_form() {
        // delta_k = (k+1) 2^{-k}; with the geometric tail the ratio is exactly 2
        let eps: Vec<f64> = (0..=20).map(|k| 0.5f64.powi(k)).collect();
        let (lhs, rhs) = hardy_sides(0.5, Some(1.0), &eps).unwrap();
        assert!((lhs / rhs - 2.0).abs() <= 1e-12);
        let head: f64 = (0..=20).map(|k| (k + 1) as f64 * 0.5f64.powi(k)).sum();
        let tail = 21.0 * 0.5f64.powi(20);
        assert!((lhs - (head + tail)).abs() <= 1e-12);
        assert!((hardy_constant(0.5, Some(1.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hardy_zero_sequence() {
        assert_eq!(hardy_sides(0.3, Some(0.7), &[0.0; 5]).unwrap(), (0.0, 0.0));
        assert_eq!(hardy_sides(0.3, None, &[0.0; 5]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn hardy_sup_case() {
        // constant eps: delta climbs to (1 - a^n)/(1 - a)
        let (lhs, rhs) = hardy_sides(0.5, None, &[1.0; 10]).unwrap();
        assert!((lhs - (1.0 - 0.5f64.powi(10)) / 0.5).abs() < 1e-15);
        assert_eq!(rhs, 1.0);
    }

    #[test]
    fn bm_closed_form() {
        let a: Vec<Complex64> = (0..=40).map(|j| Complex64::new(0.5f64.powi(j), 0.0)).collect();
        let (lhs, rhs) = bm_sides(1.0, 0.0, 0.5, None, 0, &a).unwrap();
        assert!((lhs - 1.0).abs() <= 1e-12 && (rhs - 1.0).abs() <= 1e-12);
        assert_eq!(bm_constant(1.0, 0.0, 0.5, None), 1.0);
    }

    #[test]
    fn bm_bound_holds_on_geometric() {
        let (s0, s1, sigma) = (1.0, 0.0, 0.5);
        let a: Vec<Complex64> = (0..200).map(|j| Complex64::new(2f64.powf(-0.5 * j as f64), 0.0)).collect();
        let (lhs, rhs) = bm_sides(s0, s1, sigma, Some(1.0), 0, &a).unwrap();
        assert!(lhs <= bm_constant(s0, s1, sigma, Some(1.0)) * rhs);
        assert!(bm_sides(0.0, 1.0, 0.5, None, 0, &a).is_err());
    }

    #[test]
    fn checks_pass() {
        let mut p = super::super::tests::params(1, 1.0, 16, 1);
        p.knobs.sequences = Some(2000);
        for id in ["hardy", "bm_interpolation"] {
            let r = super::super::run_check(id, &p, "").unwrap();
            assert_eq!(r.status, super::super::Status::Pass, "{r:?}");
            assert!(r.measured_constant.unwrap() <= 1.0 + ROUNDING);
        }
    }
}
