use num_complex::Complex64;
use proptest::prelude::*;

use tlvar_core::lab::family::test_field;
use tlvar_core::lebesgue::{large_cubes, luxemburg_norm, mixed_norm, modular, tilde_norm};
use tlvar_core::{ExponentField, ExponentSpec, Grid, InnerExponent, LayeredField, SampledField};

fn grid() -> Grid {
    Grid::new(1, 4.0, 256).unwrap()
}

/// One of the four generator kinds with values in `[lo, hi]`.
fn exponent(kind: u8, a: f64, b: f64, lo: f64, hi: f64) -> ExponentField {
    let mid = lo + a * (hi - lo);
    let spec = match kind % 4 {
        0 => ExponentSpec::Constant { value: mid },
        1 => ExponentSpec::AffineClamped { base: mid, slope: vec![b - 0.5], lo, hi },
        2 => ExponentSpec::SmoothBump { base: lo, amplitude: a * (hi - lo), center: vec![4.0 * b - 2.0], radius: 1.5 },
        _ => ExponentSpec::RadialLogDecay { limit: lo, amplitude: a * (hi - lo) },
    };
    spec.sample(grid()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unit_ball(seed in any::<u64>(), kind in 0u8..4, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = exponent(kind, a, b, 0.5, 4.0);
        let f = test_field(&grid(), seed, 0, 4).unwrap();
        let n = luxemburg_norm(&f, &p, 1e-12).unwrap().value;
        let rho = modular(&f.scale(Complex64::new(1.0 / n, 0.0)), &p).unwrap();
        prop_assert!((rho - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn homogeneity(seed in any::<u64>(), kind in 0u8..4, a in 0.0f64..1.0, c in -50.0f64..50.0) {
        prop_assume!(c.abs() > 1e-3);
        let p = exponent(kind, a, 0.3, 0.7, 3.0);
        let f = test_field(&grid(), seed, 1, 4).unwrap();
        let n = luxemburg_norm(&f, &p, 1e-12).unwrap().value;
        let m = luxemburg_norm(&f.scale(Complex64::new(c, 0.0)), &p, 1e-12).unwrap().value;
        prop_assert!((m - c.abs() * n).abs() <= 1e-8 * c.abs() * n);
    }

    #[test]
    fn constant_exponent_reduction(seed in any::<u64>(), p in 0.3f64..8.0) {
        let g = grid();
        let f = test_field(&g, seed, 2, 4).unwrap();
        let direct = (f.values().iter().map(|z| z.norm().powf(p)).sum::<f64>() * g.spacing()).powf(1.0 / p);
        let lux = luxemburg_norm(&f, &ExponentField::constant(g, p).unwrap(), 1e-12).unwrap().value;
        prop_assert!((lux - direct).abs() <= 1e-6 * direct);
    }

    #[test]
    fn lq_monotone(seed in any::<u64>(), a in 0.0f64..1.0, lift in 0.0f64..2.0) {
        let g = grid();
        let layers = LayeredField::new(0, (0..4).map(|k| test_field(&g, seed, k, 4).unwrap()).collect()).unwrap();
        let p = exponent(1, a, 0.7, 1.0, 3.0);
        let q0 = exponent(1, a, 0.2, 0.5, 2.0);
        let q1 = q0.shifted(lift).unwrap();
        let n0 = mixed_norm(&layers, &p, InnerExponent::Finite(&q0), 1e-13).unwrap().value;
        let n1 = mixed_norm(&layers, &p, InnerExponent::Finite(&q1), 1e-13).unwrap().value;
        let ninf = mixed_norm(&layers, &p, InnerExponent::Infinite, 1e-13).unwrap().value;
        prop_assert!(n1 <= n0 * (1.0 + 1e-12));
        prop_assert!(ninf <= n1 * (1.0 + 1e-12));
    }

    /// `||f||~ <= 1` iff `sup_{|P| >= 1} || |f/|P|^tau|^q chi_P ||_{p/q} <= 1`,
    /// tested just inside and just outside the unit sphere.
    #[test]
    fn modular_estimate_both_directions(seed in any::<u64>(), a in 0.0f64..1.0, q in 0.5f64..3.0, eps in 1e-4f64..0.1) {
        let g = grid();
        let p = exponent(1, a, 0.8, 1.0, 3.0);
        let tau = exponent(3, a, 0.0, 0.1, 0.5);
        let f = test_field(&g, seed, 3, 4).unwrap();
        let n = tilde_norm(&f, &p, &tau, 1e-13).unwrap().value;
        let p_over_q = p.map(|x| x / q).unwrap();
        for (scale, inside) in [(1.0 - eps, true), (1.0 + eps, false)] {
            let h = f.scale(Complex64::new(scale / n, 0.0));
            prop_assert_eq!(tilde_norm(&h, &p, &tau, 1e-13).unwrap().value <= 1.0, inside);
            let mut worst = 0.0f64;
            for cube in large_cubes(&g).unwrap() {
                let w = g.cube_geometry(&cube).measure;
                let vals: Vec<f64> = (0..g.len())
                    .map(|i| if g.cube_contains(&cube, i) { (h.values()[i].norm() / w.powf(tau.at(i))).powf(q) } else { 0.0 })
                    .collect();
                let powered = SampledField::from_real(g, vals).unwrap();
                worst = worst.max(luxemburg_norm(&powered, &p_over_q, 1e-13).unwrap().value);
            }
            prop_assert_eq!(worst <= 1.0, inside);
        }
    }
}
