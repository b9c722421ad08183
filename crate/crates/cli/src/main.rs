//! Command-line frontend: `blend` deflickers a style sequence against its
//! guide, `interpolate` renders a whole video from styled keyframes, and
//! `selftest` runs the built-in oracle checks.

mod config;
mod runner;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Mode, SettingsBuilder, Switch, TuningFlags, WindowValue};
use runner::{parse_keyframe, BlendInputs, InterpolateInputs};

#[derive(Parser)]
#[command(name = "patchblend", version, about = "Patch-based video deflickering and keyframe interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blend a style sequence against its guide to remove flicker
    Blend(BlendArgs),
    /// Render every frame of a video from one or more styled keyframes
    Interpolate(InterpolateArgs),
    /// Run the built-in oracle and counting checks
    Selftest,
}

#[derive(Args)]
struct BlendArgs {
    /// Directory of guide frames (the original video)
    #[arg(long)]
    guide: PathBuf,
    /// Directory of style frames (the processed video), same length
    #[arg(long)]
    style: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Blending mode
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Window radius in frames, or "full"
    #[arg(long)]
    window: Option<WindowValue>,
    /// Chain window fields along the frame order (balanced mode only)
    #[arg(long)]
    tracking: Option<Switch>,
    #[command(flatten)]
    tuning: TuningFlags,
}

#[derive(Args)]
struct InterpolateArgs {
    /// Directory of guide frames (the original video)
    #[arg(long)]
    guide: PathBuf,
    /// Styled keyframe as index:path; repeat for several keyframes
    #[arg(long = "keyframe", required = true)]
    keyframes: Vec<String>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Chain fields outward from each keyframe
    #[arg(long)]
    tracking: Option<Switch>,
    /// Jointly align the two fields of each in-between frame
    #[arg(long)]
    alignment: Option<Switch>,
    #[command(flatten)]
    tuning: TuningFlags,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Blend(args) => {
            let file = FileConfig::load(args.tuning.config.as_deref())?;
            let settings = SettingsBuilder {
                mode: args.mode,
                window: args.window,
                tracking: args.tracking.map(|s| s.0),
                alignment: None,
                default_tracking: false,
            }
            .resolve(&args.tuning, &file)?;
            runner::run_blend(
                &BlendInputs {
                    guide_dir: &args.guide,
                    style_dir: &args.style,
                    out_dir: &args.out,
                    emit_stats: args.tuning.emit_stats,
                },
                &settings,
            )
        }
        Command::Interpolate(args) => {
            let keyframes = args
                .keyframes
                .iter()
                .map(|arg| parse_keyframe(arg))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let file = FileConfig::load(args.tuning.config.as_deref())?;
            let settings = SettingsBuilder {
                mode: None,
                window: None,
                tracking: args.tracking.map(|s| s.0),
                alignment: args.alignment.map(|s| s.0),
                default_tracking: true,
            }
            .resolve(&args.tuning, &file)?;
            runner::run_interpolate(
                &InterpolateInputs {
                    guide_dir: &args.guide,
                    keyframes: &keyframes,
                    out_dir: &args.out,
                    emit_stats: args.tuning.emit_stats,
                },
                &settings,
            )
        }
        Command::Selftest => selftest::run(),
    }
}
