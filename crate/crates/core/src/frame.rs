//! Frame and video containers.
//!
//! A [`Frame`] is an RGB image with `f32` channels in `[0, 1]`, stored
//! row-major and channel-interleaved. A [`Video`] is a non-empty list of
//! frames sharing one resolution. [`FrameSource`] abstracts over videos
//! that are fully resident and videos whose frames are produced on demand,
//! which is what lets the accurate blending mode run with a bounded
//! working set.

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// What a video is used for. Carried as metadata; the algorithms treat
/// guides and styles identically at the pixel level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Guide,
    Style,
}

#[derive(Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Frame({}x{})", self.height, self.width)
    }
}

impl Frame {
    /// Builds a frame from interleaved RGB data, validating shape and range.
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidFrame("zero dimension".into()));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::InvalidFrame(format!(
                "expected {} values for {}x{}, got {}",
                height * width * CHANNELS,
                height,
                width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidFrame(format!("channel value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Internal constructor for values already known to be in range.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        debug_assert!(data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self::new(height, width, data)
    }

    /// Builds a frame by evaluating `f(row, col) -> [r, g, b]` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for x in 0..height {
            for y in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn px(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (x * self.width + y) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub(crate) fn row(&self, x: usize) -> &[f32] {
        let start = x * self.width * CHANNELS;
        &self.data[start..start + self.width * CHANNELS]
    }

    /// Largest absolute per-channel difference between two frames.
    pub fn max_abs_diff(&self, other: &Frame) -> f32 {
        assert_eq!(self.dims(), other.dims(), "max_abs_diff on mismatched frames");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn mean_abs_diff(&self, other: &Frame) -> f64 {
        assert_eq!(self.dims(), other.dims(), "mean_abs_diff on mismatched frames");
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        sum / self.data.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct Video {
    frames: Vec<Frame>,
    role: Role,
}

impl Video {
    /// Wraps frames as a video. All frames must share one resolution and the
    /// list must be non-empty.
    pub fn new(frames: Vec<Frame>, role: Role) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidFrame("video with zero frames".into()))?;
        let (h, w) = first.dims();
        for (i, f) in frames.iter().enumerate() {
            if f.dims() != (h, w) {
                return Err(Error::MixedDimensions {
                    index: i,
                    got_h: f.height(),
                    got_w: f.width(),
                    want_h: h,
                    want_w: w,
                });
            }
        }
        Ok(Self { frames, role })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Same frames in reverse temporal order.
    pub fn reversed(&self) -> Video {
        let mut frames = self.frames.clone();
        frames.reverse();
        Video {
            frames,
            role: self.role,
        }
    }
}

/// A video whose frames may be decoded or synthesized on demand.
///
/// `get` may be called repeatedly for the same index; implementations are
/// free to re-read from disk each time. Callers that need cheap repeated
/// access should wrap a source in their own bounded cache.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;
    fn dims(&self) -> (usize, usize);
    fn get(&self, index: usize) -> Result<Frame>;
}

impl FrameSource for Video {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn dims(&self) -> (usize, usize) {
        Video::dims(self)
    }

    fn get(&self, index: usize) -> Result<Frame> {
        Ok(self.frames[index].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_new_validates_shape_and_range() {
        assert!(Frame::new(2, 2, vec![0.0; 12]).is_ok());
        assert!(Frame::new(2, 2, vec![0.0; 11]).is_err());
        assert!(Frame::new(2, 2, vec![1.5; 12]).is_err());
        assert!(Frame::new(2, 2, vec![-0.1; 12]).is_err());
        assert!(Frame::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn px_reads_interleaved_channels() {
        let f = Frame::from_fn(2, 3, |x, y| [x as f32 / 10.0, y as f32 / 10.0, 0.5]).unwrap();
        assert_eq!(f.px(1, 2), [0.1, 0.2, 0.5]);
    }

    #[test]
    fn video_rejects_mixed_dimensions() {
        let a = Frame::filled(4, 4, [0.0; 3]).unwrap();
        let b = Frame::filled(4, 5, [0.0; 3]).unwrap();
        let err = Video::new(vec![a, b], Role::Style).unwrap_err();
        assert!(matches!(err, Error::MixedDimensions { index: 1, .. }));
    }

    #[test]
    fn video_rejects_empty() {
        assert!(Video::new(vec![], Role::Guide).is_err());
    }

    #[test]
    fn reversed_flips_order() {
        let a = Frame::filled(2, 2, [0.1; 3]).unwrap();
        let b = Frame::filled(2, 2, [0.9; 3]).unwrap();
        let v = Video::new(vec![a.clone(), b.clone()], Role::Style).unwrap();
        let r = v.reversed();
        assert_eq!(r.frame(0), &b);
        assert_eq!(r.frame(1), &a);
    }
}
