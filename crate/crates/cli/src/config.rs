//! Command-line flags and the run configuration they override.
//!
//! Settings resolve in three layers: built-in defaults, then the TOML file
//! named by `--config`, then explicit flags. Flags always win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pttd_core::PttdConfig;
use serde::{Deserialize, Serialize};

use crate::io::ReportFormat;

#[derive(Debug, Parser)]
#[command(name = "pttd", version, about = "Prompt-based test-time dehazing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input image file or directory (FTX file for fln-apply).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Clean image used to build the prompt (prompt FTX file for fln-apply).
    #[arg(long, global = true)]
    pub prompt_source: Option<PathBuf>,
    /// Ground-truth image file or directory, matched by file stem.
    #[arg(long, global = true)]
    pub gt: Option<PathBuf>,
    /// Output directory (output FTX file for fln-apply).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub patch_divisor: Option<usize>,
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<ReportFormat>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize hazy images from clean ones with the scattering model.
    Synth(SynthArgs),
    /// Build the visual prompt for each hazy input.
    Prompt,
    /// Restore hazy inputs with the reference backbone.
    Dehaze,
    /// Adapt externally produced features stored in FTX files.
    FlnApply,
    /// Perturb per-level statistics and record the contrast response.
    Motivate,
    /// Rank candidate prompt sources on a labeled set.
    Sweep(SweepArgs),
    /// Score images against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub mode: Option<TransmissionMode>,
    /// Transmission for scalar mode.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Fixed airlight as `r,g,b`; otherwise drawn per image.
    #[arg(long, value_parser = parse_rgb)]
    pub airlight: Option<[f64; 3]>,
    /// Fraction of images that get a colored (non-neutral) airlight.
    #[arg(long)]
    pub colored_fraction: Option<f64>,
    /// Generate this many procedural clean scenes instead of reading --input.
    #[arg(long)]
    pub generate: Option<usize>,
    /// Side of generated scenes in pixels.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Directory of candidate clean prompt sources.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Hazy originals, for the input haze density column.
    #[arg(long)]
    pub hazy: Option<PathBuf>,
}

fn parse_rgb(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [v] => Ok([*v; 3]),
        [r, g, b] => Ok([*r, *g, *b]),
        _ => Err(format!("expected 1 or 3 comma-separated values, got {}", parts.len())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TransmissionMode {
    /// One transmission for the whole image.
    Scalar,
    /// One transmission per patch of the prompt grid.
    PerPatch,
    /// A smooth transmission field.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub mode: TransmissionMode,
    pub t: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub airlight: Option<[f64; 3]>,
    pub colored_fraction: f64,
    pub generate: Option<usize>,
    pub size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mode: TransmissionMode::PerPatch,
            t: 0.5,
            t_min: 0.3,
            t_max: 0.8,
            airlight: None,
            colored_fraction: 0.5,
            generate: None,
            size: 128,
        }
    }
}

/// Deltas used by `motivate`.
pub const MOTIVATE_DELTAS: [f64; 5] = [-0.01, -0.005, 0.0, 0.005, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub prompt_source: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub hazy: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub format: ReportFormat,
    #[serde(flatten)]
    pub pttd: PttdConfig,
    pub synth: SynthConfig,
    pub motivate_deltas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            prompt_source: None,
            gt: None,
            out: None,
            candidates: None,
            hazy: None,
            seed: 0,
            workers: 1,
            format: ReportFormat::Json,
            pttd: PttdConfig::default(),
            synth: SynthConfig::default(),
            motivate_deltas: MOTIVATE_DELTAS.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Defaults, then `--config`, then flags.
    pub fn resolve(common: &CommonArgs, command: &Command) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply_flags(common, command);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_flags(&mut self, common: &CommonArgs, command: &Command) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        set_opt(&mut self.input, &common.input);
        set_opt(&mut self.prompt_source, &common.prompt_source);
        set_opt(&mut self.gt, &common.gt);
        set_opt(&mut self.out, &common.out);
        set(&mut self.pttd.pgm.tau, &common.tau);
        set(&mut self.pttd.fln.alpha, &common.alpha);
        set(&mut self.pttd.pgm.patch_divisor, &common.patch_divisor);
        set(&mut self.pttd.backbone.num_levels, &common.levels);
        set(&mut self.workers, &common.workers);
        set(&mut self.format, &common.format);
        set(&mut self.seed, &common.seed);
        match command {
            Command::Synth(a) => {
                let s = &mut self.synth;
                set(&mut s.mode, &a.mode);
                set(&mut s.t, &a.t);
                set(&mut s.t_min, &a.t_min);
                set(&mut s.t_max, &a.t_max);
                set_opt(&mut s.airlight, &a.airlight);
                set(&mut s.colored_fraction, &a.colored_fraction);
                set_opt(&mut s.generate, &a.generate);
                set(&mut s.size, &a.size);
            }
            Command::Sweep(a) => set_opt(&mut self.candidates, &a.candidates),
            Command::Eval(a) => set_opt(&mut self.hazy, &a.hazy),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pttd.pgm.validate()?;
        self.pttd.fln.validate()?;
        if self.pttd.backbone.num_levels == 0 {
            bail!("--levels must be at least 1");
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        let s = &self.synth;
        if !(s.t_min > 0.0 && s.t_min <= s.t_max && s.t_max <= 1.0) {
            bail!("transmission range must satisfy 0 < t_min <= t_max <= 1");
        }
        if !(0.0..=1.0).contains(&s.colored_fraction) {
            bail!("colored fraction must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input.as_deref().context("--input is required")
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    pub fn require_prompt_source(&self) -> Result<&Path> {
        self.prompt_source.as_deref().context("--prompt-source is required")
    }
}
