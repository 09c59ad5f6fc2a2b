//! Shared fixtures for the criterion benches.

use pttd_core::haze::{synthesize_haze, AsmParams};
use pttd_core::scene::{scene, SceneKind};
use pttd_core::Image;

/// A hazy/clean-prompt pair of the given square size.
pub fn hazy_pair(side: usize) -> (Image, Image) {
    let clean = scene(SceneKind::Colorful, side, side, 1);
    let hazy = synthesize_haze(&clean, &AsmParams::scalar([0.9; 3], 0.5)).expect("valid haze parameters");
    (hazy, scene(SceneKind::Colorful, side, side, 2))
}
