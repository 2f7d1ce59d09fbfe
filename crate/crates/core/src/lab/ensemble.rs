use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::spectral::{gaussian_bump, random_band_limited_field, GridSpec, RealField};

const CUTOFFS: [usize; 5] = [4, 8, 16, 32, 64];

/// Seed for sample `index` of an ensemble seeded by `seed`. Independent of
/// evaluation order, so parallel and serial runs draw the same samples.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    splitmix(seed ^ splitmix(index.wrapping_add(0x6a09_e667_f3bc_c909)))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample `index` of the standard test ensemble.
///
/// Even indices are random band-limited fields with a cutoff drawn from
/// `{4, 8, 16, 32, 64}` (capped below Nyquist); odd indices are Gaussian
/// bumps of width in `[2, 6]` centred in `[-L/4, L/4]`. Every sample has
/// unit `L^2` norm before the optional mean removal.
pub fn ensemble_field(seed: u64, index: u64, grid: GridSpec, remove_mean: bool) -> Result<RealField> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, index));
    let field = if index.is_multiple_of(2) {
        let cutoff = CUTOFFS[rng.random_range(0..CUTOFFS.len())].min(grid.n_points() / 2 - 1);
        random_band_limited_field(rng.next_u64(), cutoff, 1.0, grid)?
    } else {
        let l = grid.half_length();
        let center = rng.random_range(-0.25 * l..0.25 * l);
        let width = rng.random_range(2.0..6.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let bump = gaussian_bump(grid, center, width, sign)?;
        let norm = crate::spaces::lp_norm(&bump, crate::spaces::LpExponent::Two);
        bump.scaled(1.0 / norm)
    };
    Ok(if remove_mean {
        field.without_mean()
    } else {
        field
    })
}
