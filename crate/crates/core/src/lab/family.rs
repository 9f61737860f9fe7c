//! Seeded test data. Every draw comes from a ChaCha stream keyed by the run
//! seed and a label, so results do not depend on evaluation order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{radial_symbol, apply_multiplier, Grid, SampledField};
use crate::lebesgue::LayeredField;
use crate::lp::{annulus_profile, cutoff_profile};

/// FNV-1a of the label, mixed with the index.
pub fn stream_id(label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn rng_for(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label, index));
    rng
}

fn noise(grid: &Grid, rng: &mut ChaCha8Rng) -> SampledField {
    let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SampledField::from_real(*grid, vals).expect("finite noise")
}

/// Sample `index` of the test family, spectrally supported in `|xi| <= 2^band`.
///
/// Kinds cycle through modulated Gaussians, band-limited noise and
/// single-annulus fields.
pub fn test_field(grid: &Grid, seed: u64, index: u64, band: i32) -> Result<SampledField> {
    let mut rng = rng_for(seed, "family", index);
    let dim = grid.dim();
    let l = grid.half_width();
    let raw = match index % 3 {
        0 => {
            let mut c = [0.0; 2];
            let mut k = [0.0; 2];
            for i in 0..dim {
                c[i] = rng.gen_range(-0.5 * l..0.5 * l);
                k[i] = rng.gen_range(-8.0..8.0);
            }
            let s: f64 = rng.gen_range(0.3..1.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            SampledField::from_real_fn(*grid, |x| {
                let mut r2 = 0.0;
                let mut arg = phase;
                for i in 0..dim {
                    r2 += (x[i] - c[i]).powi(2);
                    arg += k[i] * x[i];
                }
                (-r2 / (2.0 * s * s)).exp() * arg.cos()
            })?
        }
        1 => noise(grid, &mut rng),
        _ => {
            let j = rng.gen_range(1..band.max(2));
            let f = noise(grid, &mut rng);
            apply_multiplier(&f, &radial_symbol(grid, |r| annulus_profile(r * 2f64.powi(-j))))
        }
    };
    let limited = apply_multiplier(&raw, &radial_symbol(grid, |r| cutoff_profile(r * 2f64.powi(1 - band))));
    let real: Vec<f64> = limited.values().iter().map(|z| z.re).collect();
    let sup = real.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let amp: f64 = rng.gen_range(0.5..2.0);
    let scale = if sup > 0.0 { amp / sup } else { 0.0 };
    SampledField::from_real(*grid, real.into_iter().map(|v| v * scale).collect())
}

pub fn test_family(grid: &Grid, count: usize, seed: u64, band: i32) -> Result<Vec<SampledField>> {
    (0..count as u64).map(|i| test_field(grid, seed, i, band)).collect()
}

/// Nonnegative layers `|f_{s,v}|`, `v = 0..=v_max`, one stream per layer so
/// that raising `v_max` only appends layers.
pub fn random_layers(grid: &Grid, seed: u64, sample: u64, v_max: i32, band: i32) -> Result<LayeredField> {
    let layers = (0..=v_max)
        .map(|v| {
            let f = test_field(grid, seed ^ 0x5eed, sample * 64 + v as u64, band)?;
            let vals: Vec<Complex64> = f.values().iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
            SampledField::new(*grid, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    LayeredField::new(0, layers)
}
