//! Run settings assembled from defaults, an optional JSON config file, and
//! command-line flags, in that precedence order. The resolved settings are
//! echoed verbatim into the stats output so a run can be reproduced.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use patchblend::blend::{BlendConfig, BlendMode, Window};
use patchblend::interp::InterpConfig;
use patchblend::nnf::MatchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fast,
    Balanced,
    Accurate,
}

impl From<Mode> for BlendMode {
    fn from(mode: Mode) -> BlendMode {
        match mode {
            Mode::Fast => BlendMode::Fast,
            Mode::Balanced => BlendMode::Balanced,
            Mode::Accurate => BlendMode::Accurate,
        }
    }
}

/// Window radius: a frame count or "full".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowValue {
    Frames(usize),
    Full,
}

impl From<WindowValue> for Window {
    fn from(value: WindowValue) -> Window {
        match value {
            WindowValue::Frames(m) => Window::Frames(m),
            WindowValue::Full => Window::Full,
        }
    }
}

impl FromStr for WindowValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(WindowValue::Full);
        }
        s.parse()
            .map(WindowValue::Frames)
            .map_err(|_| format!("window must be a frame count or \"full\", got {s:?}"))
    }
}

impl fmt::Display for WindowValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowValue::Frames(m) => write!(f, "{m}"),
            WindowValue::Full => write!(f, "full"),
        }
    }
}

impl Serialize for WindowValue {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WindowValue::Frames(m) => ser.serialize_u64(*m as u64),
            WindowValue::Full => ser.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for WindowValue {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(m) => Ok(WindowValue::Frames(m as usize)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// An on/off switch flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch(pub bool);

impl FromStr for Switch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "on" => Ok(Switch(true)),
            "off" => Ok(Switch(false)),
            other => Err(format!("expected \"on\" or \"off\", got {other:?}")),
        }
    }
}

/// The JSON config file. Every field optional; unknown keys are errors.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub window: Option<WindowValue>,
    pub alpha: Option<f32>,
    pub patch_radius: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tracking: Option<bool>,
    pub alignment: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Tuning flags shared by the blend and interpolate subcommands. `None`
/// defers to the config file, then to the defaults.
#[derive(Debug, Default, clap::Args)]
pub struct TuningFlags {
    /// Weight of the guide term in the match loss
    #[arg(long)]
    pub alpha: Option<f32>,
    /// Patch half-width; patches are (2p+1) x (2p+1)
    #[arg(long)]
    pub patch_radius: Option<usize>,
    /// Match iterations per pyramid level
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Seed for all randomized search
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for estimation jobs
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON config file; flags given here override it
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Write stats.json next to the outputs
    #[arg(long)]
    pub emit_stats: bool,
}

/// Fully resolved tunables for one run.
#[derive(Debug, Serialize)]
pub struct Settings {
    pub mode: Mode,
    pub window: WindowValue,
    pub alpha: f32,
    pub patch_radius: usize,
    pub iterations: usize,
    pub seed: u64,
    pub workers: usize,
    pub tracking: bool,
    pub alignment: bool,
}

pub struct SettingsBuilder {
    pub mode: Option<Mode>,
    pub window: Option<WindowValue>,
    pub tracking: Option<bool>,
    pub alignment: Option<bool>,
    /// Subcommand-specific tracking default; blending chains fields only on
    /// request, interpolation by default.
    pub default_tracking: bool,
}

impl SettingsBuilder {
    pub fn resolve(self, flags: &TuningFlags, file: &FileConfig) -> Result<Settings> {
        let base = MatchConfig::default();
        let workers = match flags.workers.or(file.workers) {
            Some(w) => {
                if w == 0 {
                    bail!("workers must be at least 1");
                }
                w
            }
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        Ok(Settings {
            mode: self.mode.or(file.mode).unwrap_or(Mode::Fast),
            window: self.window.or(file.window).unwrap_or(WindowValue::Frames(15)),
            alpha: flags.alpha.or(file.alpha).unwrap_or(2.0),
            patch_radius: flags.patch_radius.or(file.patch_radius).unwrap_or(base.patch_radius),
            iterations: flags.iterations.or(file.iterations).unwrap_or(base.iterations),
            seed: flags.seed.or(file.seed).unwrap_or(base.rng_seed),
            workers,
            tracking: self.tracking.or(file.tracking).unwrap_or(self.default_tracking),
            alignment: self.alignment.or(file.alignment).unwrap_or(true),
        })
    }
}

impl Settings {
    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            patch_radius: self.patch_radius,
            iterations: self.iterations,
            rng_seed: self.seed,
            ..MatchConfig::default()
        }
    }

    pub fn blend_config(&self) -> BlendConfig {
        BlendConfig {
            mode: self.mode.into(),
            window: self.window.into(),
            alpha: self.alpha,
            tracking: self.tracking,
            match_cfg: self.match_config(),
        }
    }

    pub fn interp_config(&self) -> InterpConfig {
        InterpConfig {
            tracking: self.tracking,
            alignment: self.alignment,
            alpha: self.alpha,
            match_cfg: self.match_config(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builder() -> SettingsBuilder {
        SettingsBuilder {
            mode: None,
            window: None,
            tracking: None,
            alignment: None,
            default_tracking: false,
        }
    }

    #[test]
    fn windows_parse_from_counts_and_full() {
        assert_eq!("15".parse::<WindowValue>().unwrap(), WindowValue::Frames(15));
        assert_eq!("full".parse::<WindowValue>().unwrap(), WindowValue::Full);
        assert!("soon".parse::<WindowValue>().is_err());
    }

    #[test]
    fn window_json_accepts_integers_and_full() {
        let cfg: FileConfig = serde_json::from_str(r#"{"window": 7}"#).unwrap();
        assert_eq!(cfg.window, Some(WindowValue::Frames(7)));
        let cfg: FileConfig = serde_json::from_str(r#"{"window": "full"}"#).unwrap();
        assert_eq!(cfg.window, Some(WindowValue::Full));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<FileConfig>(r#"{"widnow": 7}"#).unwrap_err();
        assert!(err.to_string().contains("widnow"));
    }

    #[test]
    fn flags_override_the_config_file() {
        let file: FileConfig = serde_json::from_str(r#"{"alpha": 9.0, "seed": 5}"#).unwrap();
        let flags = TuningFlags {
            alpha: Some(1.5),
            ..TuningFlags::default()
        };
        let settings = builder().resolve(&flags, &file).unwrap();
        assert_eq!(settings.alpha, 1.5);
        assert_eq!(settings.seed, 5);
    }

    #[test]
    fn defaults_fill_everything_else() {
        let settings = builder().resolve(&TuningFlags::default(), &FileConfig::default()).unwrap();
        assert_eq!(settings.mode, Mode::Fast);
        assert_eq!(settings.window, WindowValue::Frames(15));
        assert_eq!(settings.alpha, 2.0);
        assert!(!settings.tracking);
        assert!(settings.alignment);
        assert!(settings.workers >= 1);
    }

    #[test]
    fn switches_parse_on_and_off_only() {
        assert_eq!("on".parse::<Switch>().unwrap(), Switch(true));
        assert_eq!("off".parse::<Switch>().unwrap(), Switch(false));
        assert!("true".parse::<Switch>().is_err());
    }
}
