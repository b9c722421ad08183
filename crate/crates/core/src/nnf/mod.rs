//! Nearest-neighbor field estimation.
//!
//! An [`Nnf`] maps every pixel of a target image to a pixel of a source
//! image; estimation searches for the field minimizing a patch loss
//! ([`LossSpec`]) with the usual propagation plus shrinking random search,
//! run coarse to fine. All per-pixel updates read frozen snapshots and use
//! counter-based randomness, so results are independent of thread count.

pub(crate) mod estimate;
mod kernels;
mod matcher;

pub use estimate::{estimate_nnf, estimate_nnf_batch, estimate_nnf_traced, StepSnapshot};
pub use kernels::{pairwise_patch_error, patch_error};
pub use matcher::{Matcher, MatcherKind};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng;

/// Nearest-neighbor field: `get(x, y)` is the source coordinate whose patch
/// represents target position `(x, y)`. Every cell stays inside the source
/// bounds; constructors and update steps maintain that invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nnf {
    height: usize,
    width: usize,
    src_height: usize,
    src_width: usize,
    cells: Vec<(u32, u32)>,
}

impl Nnf {
    pub fn identity(dims: (usize, usize), source_dims: (usize, usize)) -> Self {
        let (h, w) = dims;
        let (sh, sw) = source_dims;
        let mut cells = Vec::with_capacity(h * w);
        for x in 0..h {
            for y in 0..w {
                cells.push((x.min(sh - 1) as u32, y.min(sw - 1) as u32));
            }
        }
        Self {
            height: h,
            width: w,
            src_height: sh,
            src_width: sw,
            cells,
        }
    }

    pub(crate) fn from_cells(
        dims: (usize, usize),
        source_dims: (usize, usize),
        cells: Vec<(u32, u32)>,
    ) -> Self {
        debug_assert_eq!(cells.len(), dims.0 * dims.1);
        Self {
            height: dims.0,
            width: dims.1,
            src_height: source_dims.0,
            src_width: source_dims.1,
            cells,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.src_height, self.src_width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (u32, u32) {
        self.cells[x * self.width + y]
    }

    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    /// Exchanges the cell storage with `other`; lengths must match.
    pub(crate) fn swap_cells(&mut self, other: &mut Vec<(u32, u32)>) {
        debug_assert_eq!(other.len(), self.cells.len());
        std::mem::swap(&mut self.cells, other);
    }

    /// True when every cell lies inside the declared source bounds.
    pub fn in_bounds(&self) -> bool {
        self.cells
            .iter()
            .all(|&(x, y)| (x as usize) < self.src_height && (y as usize) < self.src_width)
    }
}

/// Error map produced next to a field: entry `(x, y)` is the patch loss of
/// the field's cell at that position.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ErrorMap {
    pub(crate) fn new(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[x * self.width + y]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| *v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Exchanges the value storage with `other`; lengths must match.
    pub(crate) fn swap_data(&mut self, other: &mut Vec<f32>) {
        debug_assert_eq!(other.len(), self.data.len());
        std::mem::swap(&mut self.data, other);
    }
}

/// Initial search radius for the random-search schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchRadius {
    /// Longest side of the current pyramid level.
    LevelMax,
    Fixed(u32),
}

#[derive(Clone, Debug)]
pub struct MatchConfig {
    /// Patch half-width; patches are `(2p+1) x (2p+1)`.
    pub patch_radius: usize,
    /// Optimization iterations per pyramid level.
    pub iterations: usize,
    /// Coarsest allowed pyramid side. Must be at least one patch wide.
    pub pyramid_min_side: usize,
    pub rng_seed: u64,
    /// Random-search candidates drawn at each radius step.
    pub candidates_per_radius: usize,
    pub initial_radius: SearchRadius,
}

impl Default for MatchConfig {
    fn default() -> Self {
        // the data-parallel update moves information one pixel per pass, so
        // it needs a deeper pyramid and more iterations than scan-order
        // PatchMatch; these values hold self-match error under 1% of the
        // random-init error at any frame size
        Self {
            patch_radius: 3,
            iterations: 10,
            pyramid_min_side: 16,
            rng_seed: 0,
            candidates_per_radius: 1,
            initial_radius: SearchRadius::LevelMax,
        }
    }
}

impl MatchConfig {
    pub fn patch_side(&self) -> usize {
        2 * self.patch_radius + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_radius < 1 {
            return Err(Error::InvalidConfig("patch_radius must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.candidates_per_radius < 1 {
            return Err(Error::InvalidConfig(
                "candidates_per_radius must be at least 1".into(),
            ));
        }
        if self.pyramid_min_side < self.patch_side() {
            return Err(Error::InvalidConfig(format!(
                "pyramid_min_side {} is smaller than the patch side {}",
                self.pyramid_min_side,
                self.patch_side()
            )));
        }
        if let SearchRadius::Fixed(0) = self.initial_radius {
            return Err(Error::InvalidConfig("initial search radius must be positive".into()));
        }
        Ok(())
    }
}

/// Style target used by the guide-style loss.
#[derive(Clone, Debug)]
pub enum StyleTarget {
    /// Compared against as-is for the whole run.
    Fixed(Frame),
    /// Re-remapped from the style source through the current field once at
    /// the start of every iteration.
    SelfRemap,
}

/// Patch loss selection. The plain source/target arguments of the match
/// operations always feed the first term; the variants carry whatever extra
/// frames their second term needs.
#[derive(Clone, Debug)]
pub enum LossSpec {
    /// `||S[F(x,y)] - T[x,y]||^2`
    Base,
    /// `alpha * ||G_src[F] - G_tgt||^2 + ||style_source[F] - style_target||^2`
    GuideStyle {
        alpha: f32,
        style_source: Frame,
        style_target: StyleTarget,
    },
    /// `alpha * ||S[F] - T||^2 + ||S[F] - average||^2`
    AverageAlign { alpha: f32, average: Frame },
    /// `alpha * ||S[F] - T||^2 + ||S[F(x,y)] - counterpart_key[counterpart_nnf(x,y)]||^2`
    PairwiseAlign {
        alpha: f32,
        counterpart_key: Frame,
        counterpart_nnf: Nnf,
    },
}

impl LossSpec {
    pub fn guide_style(alpha: f32, style_source: Frame, style_target: StyleTarget) -> Self {
        Self::GuideStyle {
            alpha,
            style_source,
            style_target,
        }
    }

    /// Checks the auxiliary frames against the main source/target pair.
    pub(crate) fn validate(&self, source: &Frame, target: &Frame) -> Result<()> {
        let want = |ctx: &'static str, got: (usize, usize), expect: (usize, usize)| {
            if got == expect {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context: ctx,
                    left_h: got.0,
                    left_w: got.1,
                    right_h: expect.0,
                    right_w: expect.1,
                })
            }
        };
        match self {
            LossSpec::Base => Ok(()),
            LossSpec::GuideStyle {
                style_source,
                style_target,
                ..
            } => {
                want("guide-style source", style_source.dims(), source.dims())?;
                if let StyleTarget::Fixed(f) = style_target {
                    want("guide-style target", f.dims(), target.dims())?;
                }
                Ok(())
            }
            LossSpec::AverageAlign { average, .. } => {
                want("average-align average", average.dims(), target.dims())
            }
            LossSpec::PairwiseAlign {
                counterpart_key,
                counterpart_nnf,
                ..
            } => {
                want("pairwise counterpart field", counterpart_nnf.dims(), target.dims())?;
                want(
                    "pairwise counterpart key",
                    counterpart_key.dims(),
                    counterpart_nnf.source_dims(),
                )
            }
        }
    }
}

/// Uniformly random field over the source bounds, reproducible from `seed`.
pub fn init_random(dims: (usize, usize), source_dims: (usize, usize), seed: u64) -> Nnf {
    let (h, w) = dims;
    let (sh, sw) = source_dims;
    let mut cells = Vec::with_capacity(h * w);
    for x in 0..h {
        for y in 0..w {
            let sx = rng::uniform(rng::draw(seed, u32::MAX, 0, x as u32, y as u32, 0), sh as u64);
            let sy = rng::uniform(rng::draw(seed, u32::MAX, 0, x as u32, y as u32, 1), sw as u64);
            cells.push((sx as u32, sy as u32));
        }
    }
    Nnf::from_cells(dims, source_dims, cells)
}

/// Scales a field up to finer dimensions. Each fine cell copies its coarse
/// cell's coordinate scaled by the exact dimension ratio, then adds the fine
/// cell's offset inside the coarse cell's block, clamped into the new source
/// bounds. Upsampling an identity map yields an identity map.
pub fn upsample_nnf(field: &Nnf, new_dims: (usize, usize), new_source_dims: (usize, usize)) -> Result<Nnf> {
    let (h, w) = field.dims();
    let (sh, sw) = field.source_dims();
    let (nh, nw) = new_dims;
    let (nsh, nsw) = new_source_dims;
    if nh < h || nw < w || nsh < sh || nsw < sw {
        return Err(Error::InvalidConfig(format!(
            "upsample target {}x{} (source {}x{}) smaller than field {}x{} (source {}x{})",
            nh, nw, nsh, nsw, h, w, sh, sw
        )));
    }
    // Smallest fine index that maps onto the given coarse index; fine index
    // x belongs to coarse cell floor(x * h / nh). Scaling source coordinates
    // through the same block decomposition makes identity maps upsample to
    // identity maps.
    let anchor = |c: usize, coarse: usize, fine: usize| (c * fine).div_ceil(coarse);
    let mut cells = Vec::with_capacity(nh * nw);
    for x in 0..nh {
        let cx = x * h / nh;
        let ax = anchor(cx, h, nh);
        for y in 0..nw {
            let cy = y * w / nw;
            let ay = anchor(cy, w, nw);
            let (ox, oy) = field.get(cx, cy);
            let sx = (anchor(ox as usize, sh, nsh) + (x - ax)).min(nsh - 1);
            let sy = (anchor(oy as usize, sw, nsw) + (y - ay)).min(nsw - 1);
            cells.push((sx as u32, sy as u32));
        }
    }
    Ok(Nnf::from_cells(new_dims, new_source_dims, cells))
}
