mod dehaze;
mod eval;
mod fln_apply;
mod motivate;
mod prompt;
mod sweep;
mod synth;

pub use dehaze::{cmd_dehaze, size_guidance, DehazeRow};
pub use eval::{cmd_eval, EvalRow};
pub use fln_apply::cmd_fln_apply;
pub use motivate::{cmd_motivate, MotivateRow};
pub use prompt::cmd_prompt;
pub use sweep::{cmd_sweep, SweepRow};
pub use synth::{cmd_synth, SynthEntry};
