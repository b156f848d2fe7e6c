//! Shared inputs for the benchmarks.

use pdlab::noise::add_correlated_awgn;
use pdlab::{scene, Image, Rng};

/// A colour test scene with correlated noise at σ = 25.
pub fn noisy_scene(width: usize, height: usize) -> Image {
    let clean = scene::natural(width, height, 3, &mut Rng::new(1));
    add_correlated_awgn(&clean, 25.0, 2, &mut Rng::new(2)).expect("even dimensions")
}
