use num_complex::Complex64;
use proptest::prelude::*;

use tlvar_core::exponent::classify;
use tlvar_core::grid::{convolve, eta_kernel};
use tlvar_core::lab::family::test_field;
use tlvar_core::{ExponentField, Grid, SampledField};

fn grid1() -> Grid {
    Grid::new(1, 4.0, 128).unwrap()
}

fn roll(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    (0..n).map(|i| values[(i + n - k % n) % n]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convolution_is_associative_and_commutative(seed in any::<u64>()) {
        let g = grid1();
        let a = test_field(&g, seed, 0, 3).unwrap();
        let b = test_field(&g, seed, 1, 3).unwrap();
        let c = test_field(&g, seed, 2, 3).unwrap();
        let left = convolve(&convolve(&a, &b).unwrap(), &c).unwrap();
        let right = convolve(&a, &convolve(&b, &c).unwrap()).unwrap();
        let scale = left.sup_norm().max(1e-300);
        prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-10 * scale);
        let ab = convolve(&a, &b).unwrap();
        let ba = convolve(&b, &a).unwrap();
        prop_assert!(ab.max_abs_diff(&ba).unwrap() <= 1e-12 * ab.sup_norm().max(1e-300));
    }

    #[test]
    fn eta_kernel_is_positive(v in 0i32..5, extra in 0.01f64..4.0, dim in 1usize..=2) {
        let g = Grid::new(dim, 2.0, if dim == 1 { 256 } else { 32 }).unwrap();
        let e = eta_kernel(&g, v, dim as f64 + extra).unwrap();
        prop_assert!(e.values().iter().all(|z| z.re > 0.0 && z.im == 0.0));
    }

    #[test]
    fn cubes_partition_every_level(dim in 1usize..=2, level in 0i32..5) {
        let g = Grid::new(dim, 2.0, if dim == 1 { 128 } else { 32 }).unwrap();
        let v = g.v_min() + level.min(g.v_finest() - g.v_min());
        let cubes = g.dyadic_cubes_at_level(v).unwrap();
        prop_assert_eq!(cubes.len(), 1usize << ((v - g.v_min()) as usize * dim));
        let mut count = vec![0u32; g.len()];
        for q in &cubes {
            for i in g.cube_indices(q) {
                count[i] += 1;
            }
        }
        prop_assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn clog_is_translation_invariant(seed in any::<u64>(), shift in 0usize..128) {
        let g = grid1();
        let f = test_field(&g, seed, 0, 3).unwrap();
        let vals: Vec<f64> = f.values().iter().map(|z| 1.5 + 0.25 * z.re).collect();
        let a = ExponentField::new(g, vals.clone()).unwrap().clog_local();
        let b = ExponentField::new(g, roll(&vals, shift)).unwrap().clog_local();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn clog_vanishes_only_for_constants(c in 0.5f64..4.0, bump in 1e-6f64..1.0, at in 0usize..128) {
        let g = grid1();
        prop_assert_eq!(ExponentField::constant(g, c).unwrap().clog_local(), 0.0);
        let mut vals = vec![c; g.len()];
        vals[at] += bump;
        prop_assert!(ExponentField::new(g, vals).unwrap().clog_local() > 0.0);
    }

    #[test]
    fn classify_is_monotone_under_shifts(seed in any::<u64>(), lift in 0.0f64..2.0) {
        let g = grid1();
        let f = test_field(&g, seed, 1, 3).unwrap();
        let p = ExponentField::new(g, f.values().iter().map(|z| 1.0 + 0.2 * z.re.abs()).collect()).unwrap();
        let before = classify(&p, 1e-12).unwrap();
        let after = classify(&p.shifted(lift).unwrap(), 1e-12).unwrap();
        prop_assert!(!before.in_p || after.in_p);
        prop_assert!(!before.in_p0 || after.in_p0);
    }
}

#[test]
fn delta_convolution_in_two_dimensions() {
    let g = Grid::new(2, 2.0, 32).unwrap();
    let f = SampledField::from_fn(g, |x| Complex64::new((-x[0] * x[0] - 2.0 * x[1] * x[1]).exp(), x[0])).unwrap();
    let d = SampledField::delta(g);
    assert!(convolve(&f, &d).unwrap().max_abs_diff(&f).unwrap() < 1e-12);
}
