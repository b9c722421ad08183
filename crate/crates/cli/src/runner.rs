//! Pipeline drivers: load inputs, run the selected operation, write the
//! output sequence, and optionally emit stats. Any failure after output
//! files have appeared removes them, so a nonzero exit never leaves a
//! partial sequence behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use patchblend::blend::{blend_accurate_streaming, blend_balanced, blend_fast, BlendMode};
use patchblend::interp::{interpolate, KeyframeSet};
use patchblend::io::{load_frame, load_sequence, save_frame, SequenceSource, DEFAULT_PATTERN};
use patchblend::nnf::Matcher;
use patchblend::{Frame, Role};
use serde::Serialize;

use crate::config::Settings;

/// Wall time per pipeline phase, in milliseconds.
#[derive(Debug, Default, Serialize)]
pub struct PhaseTimes {
    pub load: u128,
    pub process: u128,
    pub save: u128,
}

#[derive(Debug, Serialize)]
pub struct Stats<'a> {
    pub schema: u32,
    pub nnf_count: u64,
    pub phase_times_ms: PhaseTimes,
    pub peak_frames_resident: usize,
    pub effective_config: EffectiveConfig<'a>,
}

#[derive(Debug, Serialize)]
pub struct EffectiveConfig<'a> {
    pub subcommand: &'a str,
    pub guide: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyframes: Option<Vec<String>>,
    pub out: String,
    #[serde(flatten)]
    pub settings: &'a Settings,
}

/// Output directory that tracks what it wrote and can roll it back.
struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes frame `index` (0-based) under its 1-based sequence name.
    fn write_frame(&mut self, index: usize, frame: &Frame) -> patchblend::Result<()> {
        let path = self.dir.join(format!("{:04}.png", index + 1));
        save_frame(frame, &path)?;
        self.written.push(path);
        Ok(())
    }

    fn write_stats(&mut self, stats: &Stats) -> Result<()> {
        let path = self.dir.join("stats.json");
        let text = serde_json::to_string_pretty(stats).context("serializing stats")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Removes everything written so far. Best effort; rollback must not
    /// mask the error that triggered it.
    fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(&path);
        }
    }
}

fn build_matcher(settings: &Settings) -> Result<Matcher> {
    Ok(Matcher::patch_match().with_workers(settings.workers)?)
}

pub struct BlendInputs<'a> {
    pub guide_dir: &'a Path,
    pub style_dir: &'a Path,
    pub out_dir: &'a Path,
    pub emit_stats: bool,
}

pub fn run_blend(inputs: &BlendInputs, settings: &Settings) -> Result<()> {
    settings.blend_config().validate()?;
    let matcher = build_matcher(settings)?;
    let mut out = OutputDir::create(inputs.out_dir)?;
    let result = blend_into(inputs, settings, &matcher, &mut out);
    if result.is_err() {
        out.discard();
    }
    result
}

fn blend_into(
    inputs: &BlendInputs,
    settings: &Settings,
    matcher: &Matcher,
    out: &mut OutputDir,
) -> Result<()> {
    let cfg = settings.blend_config();
    let mut times = PhaseTimes::default();
    let peak;

    if cfg.mode == BlendMode::Accurate {
        // lazy sources plus a streaming sink keep residency at the window
        let t = Instant::now();
        let guide = SequenceSource::open(inputs.guide_dir, DEFAULT_PATTERN)?;
        let style = SequenceSource::open(inputs.style_dir, DEFAULT_PATTERN)?;
        times.load = t.elapsed().as_millis();

        let t = Instant::now();
        let mut save_ms = 0u128;
        let stream = blend_accurate_streaming(&guide, &style, &cfg, matcher, &mut |i, frame| {
            let t = Instant::now();
            out.write_frame(i, &frame)?;
            save_ms += t.elapsed().as_millis();
            Ok(())
        })?;
        times.save = save_ms;
        times.process = t.elapsed().as_millis().saturating_sub(save_ms);
        peak = stream.peak_resident;
    } else {
        let t = Instant::now();
        let guide = load_sequence(inputs.guide_dir, DEFAULT_PATTERN, Role::Guide)?;
        let style = load_sequence(inputs.style_dir, DEFAULT_PATTERN, Role::Style)?;
        times.load = t.elapsed().as_millis();
        peak = guide.len() + style.len();

        let t = Instant::now();
        let blended = match cfg.mode {
            BlendMode::Fast => blend_fast(&guide, &style, &cfg, matcher)?,
            BlendMode::Balanced => blend_balanced(&guide, &style, &cfg, matcher)?,
            BlendMode::Accurate => unreachable!("handled above"),
        };
        times.process = t.elapsed().as_millis();

        let t = Instant::now();
        for (i, frame) in blended.frames().iter().enumerate() {
            out.write_frame(i, frame)?;
        }
        times.save = t.elapsed().as_millis();
    }

    if inputs.emit_stats {
        out.write_stats(&Stats {
            schema: 1,
            nnf_count: matcher.nnf_count(),
            phase_times_ms: times,
            peak_frames_resident: peak,
            effective_config: EffectiveConfig {
                subcommand: "blend",
                guide: inputs.guide_dir.display().to_string(),
                style: Some(inputs.style_dir.display().to_string()),
                keyframes: None,
                out: inputs.out_dir.display().to_string(),
                settings,
            },
        })?;
    }
    Ok(())
}

pub struct InterpolateInputs<'a> {
    pub guide_dir: &'a Path,
    pub keyframes: &'a [(usize, PathBuf)],
    pub out_dir: &'a Path,
    pub emit_stats: bool,
}

/// Parses an `index:path` keyframe argument.
pub fn parse_keyframe(arg: &str) -> Result<(usize, PathBuf)> {
    let (index, path) = arg
        .split_once(':')
        .ok_or_else(|| anyhow!("keyframe {arg:?} must look like index:path"))?;
    let index: usize = index
        .parse()
        .map_err(|_| anyhow!("keyframe index in {arg:?} must be a non-negative integer"))?;
    if path.is_empty() {
        bail!("keyframe {arg:?} has an empty path");
    }
    Ok((index, PathBuf::from(path)))
}

pub fn run_interpolate(inputs: &InterpolateInputs, settings: &Settings) -> Result<()> {
    settings.interp_config().validate()?;
    let matcher = build_matcher(settings)?;
    let mut out = OutputDir::create(inputs.out_dir)?;
    let result = interpolate_into(inputs, settings, &matcher, &mut out);
    if result.is_err() {
        out.discard();
    }
    result
}

fn interpolate_into(
    inputs: &InterpolateInputs,
    settings: &Settings,
    matcher: &Matcher,
    out: &mut OutputDir,
) -> Result<()> {
    let mut times = PhaseTimes::default();

    let t = Instant::now();
    let guide = load_sequence(inputs.guide_dir, DEFAULT_PATTERN, Role::Guide)?;
    let mut entries = Vec::with_capacity(inputs.keyframes.len());
    let mut echoed = Vec::with_capacity(inputs.keyframes.len());
    let mut ordered = inputs.keyframes.to_vec();
    ordered.sort_by_key(|(index, _)| *index);
    for (index, path) in &ordered {
        // index validation happens before any frame is decoded
        if *index >= guide.len() {
            return Err(patchblend::Error::KeyframeOutOfRange {
                index: *index,
                len: guide.len(),
            }
            .into());
        }
        echoed.push(format!("{index}:{}", path.display()));
    }
    for (index, path) in &ordered {
        entries.push((*index, load_frame(path)?));
    }
    let keys = KeyframeSet::new(entries)?;
    times.load = t.elapsed().as_millis();
    let peak = guide.len() + keys.len();

    let t = Instant::now();
    let rendered = interpolate(&guide, &keys, &settings.interp_config(), matcher)?;
    times.process = t.elapsed().as_millis();

    let t = Instant::now();
    for (i, frame) in rendered.frames().iter().enumerate() {
        out.write_frame(i, frame)?;
    }
    times.save = t.elapsed().as_millis();

    if inputs.emit_stats {
        out.write_stats(&Stats {
            schema: 1,
            nnf_count: matcher.nnf_count(),
            phase_times_ms: times,
            peak_frames_resident: peak,
            effective_config: EffectiveConfig {
                subcommand: "interpolate",
                guide: inputs.guide_dir.display().to_string(),
                style: None,
                keyframes: Some(echoed),
                out: inputs.out_dir.display().to_string(),
                settings,
            },
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyframe_arguments_parse_index_and_path() {
        let (index, path) = parse_keyframe("3:frames/key.png").unwrap();
        assert_eq!(index, 3);
        assert_eq!(path, PathBuf::from("frames/key.png"));
        assert!(parse_keyframe("frames/key.png").is_err());
        assert!(parse_keyframe("x:frames/key.png").is_err());
        assert!(parse_keyframe("3:").is_err());
    }
}
