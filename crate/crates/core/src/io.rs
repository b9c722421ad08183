//! Numbered PNG sequences on disk, loaded eagerly into [`Video`]s or lazily
//! through [`SequenceSource`].
//!
//! Filenames follow a printf-style pattern with one zero-padded decimal
//! placeholder, "%04d.png" by default. Indices on disk must be contiguous
//! but may start anywhere; frame 0 of the loaded video is the lowest index.
//! Bytes map to intensities as x/255 with no gamma transform, so a save/load
//! round trip is exact to one 8-bit quantization step.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSource, Role, Video, CHANNELS};

pub const DEFAULT_PATTERN: &str = "%04d.png";

/// A filename pattern split around its single "%0<width>d" placeholder.
struct Pattern {
    prefix: String,
    suffix: String,
    width: usize,
}

impl Pattern {
    fn parse(pattern: &str) -> Result<Pattern> {
        let bad = || {
            Error::InvalidConfig(format!(
                "filename pattern {pattern:?} must contain exactly one %0<width>d placeholder"
            ))
        };
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        if !rest.starts_with('0') {
            return Err(bad());
        }
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        let after = &rest[digits.len()..];
        if !after.starts_with('d') {
            return Err(bad());
        }
        let width: usize = digits.parse().map_err(|_| bad())?;
        if width == 0 {
            return Err(bad());
        }
        let suffix = &after[1..];
        if suffix.contains('%') {
            return Err(bad());
        }
        Ok(Pattern {
            prefix: pattern[..start].to_string(),
            suffix: suffix.to_string(),
            width,
        })
    }

    fn filename(&self, index: usize) -> String {
        format!("{}{:0width$}{}", self.prefix, index, self.suffix, width = self.width)
    }

    /// The numeric index encoded in `name`, if it matches the pattern.
    fn index_of(&self, name: &str) -> Option<usize> {
        let middle = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if middle.is_empty() || !middle.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        middle.parse().ok()
    }
}

/// Paths of the files matching `pattern` in `dir`, sorted by index and
/// verified contiguous.
fn list_sequence(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let pat = Pattern::parse(pattern)?;
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut indexed: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(|n| pat.index_of(n)) {
            indexed.push((index, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(Error::EmptySequence {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    indexed.sort_by_key(|(index, _)| *index);
    let first = indexed[0].0;
    for (k, (index, _)) in indexed.iter().enumerate() {
        if *index != first + k {
            return Err(Error::NonContiguousIndices {
                dir: dir.to_path_buf(),
                expected: first + k,
                found: *index,
            });
        }
    }
    Ok(indexed.into_iter().map(|(_, path)| path).collect())
}

/// Loads one image file as a frame.
pub fn load_frame(path: &Path) -> Result<Frame> {
    decode_frame(path)
}

fn decode_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .into_rgb8();
    let (w, h) = img.dimensions();
    if h == 0 || w == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            message: "image has zero pixels".into(),
        });
    }
    let data: Vec<f32> = img.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Frame::new(h as usize, w as usize, data)
}

/// Loads every frame of a numbered sequence into memory.
pub fn load_sequence(dir: &Path, pattern: &str, role: Role) -> Result<Video> {
    let paths = list_sequence(dir, pattern)?;
    let frames: Result<Vec<Frame>> = paths.par_iter().map(|p| decode_frame(p)).collect();
    Video::new(frames?, role)
}

/// Writes `video` as 8-bit PNGs named by `DEFAULT_PATTERN`, indices starting
/// at 1. Intensities encode as round(x*255).
pub fn save_sequence(video: &Video, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let pat = Pattern::parse(DEFAULT_PATTERN).expect("default pattern is valid");
    let results: Result<Vec<()>> = video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, frame)| save_frame(frame, &dir.join(pat.filename(i + 1))))
        .collect();
    results.map(|_| ())
}

/// Writes one frame as an 8-bit PNG.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (h, w) = frame.dims();
    let bytes: Vec<u8> = frame
        .data()
        .iter()
        .map(|&x| (x * 255.0).round() as u8)
        .collect();
    debug_assert_eq!(bytes.len(), h * w * CHANNELS);
    let img = RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer length matches dims");
    img.save_with_format(path, ImageFormat::Png).map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A numbered sequence decoded on demand, for runs where only a sliding
/// window should be resident.
pub struct SequenceSource {
    paths: Vec<PathBuf>,
    dims: (usize, usize),
}

impl SequenceSource {
    /// Lists and validates the sequence, decoding only the first frame to
    /// learn the dimensions.
    pub fn open(dir: &Path, pattern: &str) -> Result<Self> {
        let paths = list_sequence(dir, pattern)?;
        let first = decode_frame(&paths[0])?;
        Ok(SequenceSource {
            paths,
            dims: first.dims(),
        })
    }
}

impl FrameSource for SequenceSource {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn get(&self, index: usize) -> Result<Frame> {
        let frame = decode_frame(&self.paths[index])?;
        if frame.dims() != self.dims {
            return Err(Error::MixedDimensions {
                index,
                got_h: frame.dims().0,
                got_w: frame.dims().1,
                want_h: self.dims.0,
                want_w: self.dims.1,
            });
        }
        Ok(frame)
    }
}
