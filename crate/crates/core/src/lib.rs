//! Prompt-based test-time dehazing.
//!
//! A clean image is turned into a *visual prompt* that carries the haze of a
//! real input ([`prompt`]), and the input's encoder features are nudged
//! toward the prompt's statistics under guard rules ([`adapt`]) before being
//! decoded. [`backbone`] provides an exactly invertible multi-scale encoder so
//! the whole chain can be checked without a trained network; external models
//! exchange features through [`ftx`] files instead.

pub mod adapt;
pub mod backbone;
pub mod color;
pub mod error;
pub mod ftx;
pub mod haze;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod resample;
pub mod scene;
pub mod stats;
pub mod tensor;

pub use adapt::{adapt_stats, fln, fln_per_level, mean_adapt, std_adapt, AdaptationTrace, ChannelTrace, FlnConfig, MeanBranch, StdBranch};
pub use backbone::{band_rms, decode, encode, perturb_stats, BackboneConfig, Pyramid};
pub use color::{hue_rgb, rgb_to_hue, HueSaturation};
pub use error::{Error, Result};
pub use ftx::{decode_records, encode_records, FtxRecord};
pub use haze::{dark_channel, haze_density, hazy_region_mask, synthesize_haze, AsmParams, DarkChannelConfig, Transmission};
pub use metrics::{psnr, ssim, MetricReport};
pub use pipeline::{dehaze, dehaze_with_prompt, DehazeOutput, PttdConfig};
pub use prompt::{cbiln_gray, generate_prompt, iln, mos, partition, GatingReport, PatchGrid, PgmConfig, PromptBranch};
pub use resample::resize_bilinear;
pub use stats::{affine_normalize, channel_stats, ChannelStats, STD_FLOOR};
pub use tensor::{FeatureMap, Image, Planar, Rect};
