//! Shared fixtures for the benchmarks.

use tlvar_core::lab::family::test_field;
use tlvar_core::{ExponentField, Grid, SampledField};

pub struct Fixture {
    pub grid: Grid,
    pub field: SampledField,
    pub p: ExponentField,
    pub q: ExponentField,
    pub alpha: ExponentField,
    pub tau: ExponentField,
}

/// Band-limited sample field and smooth exponents on a 1D grid of `points` samples.
pub fn fixture(points: usize) -> Fixture {
    let grid = Grid::new(1, 4.0, points).expect("grid");
    let field = test_field(&grid, 7, 0, 4).expect("field");
    let smooth = |f: fn(f64) -> f64| ExponentField::from_fn(grid, |x| f(x[0])).expect("exponent");
    Fixture {
        grid,
        field,
        p: smooth(|x| 2.0 + 0.3 * (x / 2.0).tanh()),
        q: smooth(|x| 1.8 - 0.2 * (x / 3.0).tanh()),
        alpha: smooth(|x| 0.5 + 0.2 * (-x * x).exp()),
        tau: smooth(|x| 0.2 + 0.05 / (1.0 + x.abs()).ln().max(1.0)),
    }
}
