//! End-to-end test-time dehazing with the reference backbone.

use serde::{Deserialize, Serialize};

use crate::adapt::{fln_per_level, AdaptationTrace, FlnConfig};
use crate::backbone::{decode, encode, BackboneConfig};
use crate::error::Result;
use crate::prompt::{generate_prompt, GatingReport, PgmConfig};
use crate::tensor::Image;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PttdConfig {
    pub pgm: PgmConfig,
    pub fln: FlnConfig,
    pub backbone: BackboneConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DehazeOutput {
    /// Restored image clamped to `[0, 1]`.
    pub image: Image,
    /// Decoder output before clamping.
    pub unclamped: Image,
    pub prompt: Image,
    pub gating: GatingReport,
    /// One trace per encoder level, finest first, base last.
    pub traces: Vec<AdaptationTrace>,
}

/// Generates the prompt from `source` and runs the adapted backbone on `hazy`.
pub fn dehaze(hazy: &Image, source: &Image, cfg: &PttdConfig) -> Result<DehazeOutput> {
    cfg.fln.validate()?;
    let (prompt, gating) = generate_prompt(source, hazy, &cfg.pgm)?;
    let (unclamped, traces) = dehaze_with_prompt(hazy, &prompt, &cfg.fln, &cfg.backbone)?;
    Ok(DehazeOutput {
        image: unclamped.clamped(),
        unclamped,
        prompt,
        gating,
        traces,
    })
}

/// The feature transformation half: encode both images, adapt every level of
/// the input toward the prompt, decode. Returns the unclamped result.
pub fn dehaze_with_prompt(
    hazy: &Image,
    prompt: &Image,
    fln: &FlnConfig,
    backbone: &BackboneConfig,
) -> Result<(Image, Vec<AdaptationTrace>)> {
    let pyr_x = encode(hazy, backbone)?;
    let pyr_p = encode(prompt, backbone)?;
    let (levels, traces) = fln_per_level(&pyr_x.feature_levels(), &pyr_p.feature_levels(), fln)?;
    let restored = decode(&pyr_x.with_feature_levels(levels)?)?;
    Ok((restored, traces))
}
