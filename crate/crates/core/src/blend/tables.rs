//! Remapping and blending tables: the O(N log N) precomputation behind fast
//! blending.
//!
//! Cell (i, 0) of the remapping table holds style frame i verbatim. The
//! bit-indexed build loop pairs each frame i with a chain of partners j
//! (setting one clear bit at a time from the bottom) and drops each remap
//! (S_i -> S_j) into cell (j, L+1). The blending table then stores prefix
//! sums down each frame's levels, after which cell (i, L) aggregates the
//! 2^L consecutive frames i-2^L+1 ..= i whenever the query walk can reach
//! it (i ends in at least L set bits). An interval query greedily consumes
//! the largest reachable cells from the right end down, costing one field
//! estimation per non-self cell: at most ceil(log2 len) estimations when the
//! interval starts at frame 0 and at most twice that in general, since cell
//! sizes rise and then fall at most once per level.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, Video};
use crate::nnf::{LossSpec, MatchConfig, Matcher, StyleTarget};
use crate::remap::{accumulate, remap, remap_accumulator, BlendAccumulator};
use crate::rng;

use super::{check_paired, BlendConfig};

/// Whether a table was built over the original or the mirrored frame order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Reversed,
}

/// Highest table level: ceil(log2 n).
pub(crate) fn top_level(n: usize) -> usize {
    if n <= 1 {
        0
    } else if n.is_power_of_two() {
        n.ilog2() as usize
    } else {
        n.ilog2() as usize + 1
    }
}

/// Per-frame, per-level sums of remapped style frames.
pub struct RemappingTable {
    n: usize,
    top: usize,
    dims: (usize, usize),
    orientation: Orientation,
    cells: Vec<BlendAccumulator>,
}

impl RemappingTable {
    fn at(&self, i: usize, level: usize) -> usize {
        debug_assert!(i < self.n && level <= self.top);
        i * (self.top + 1) + level
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest level index; cells exist for levels `0..=top_level()`.
    pub fn top_level(&self) -> usize {
        self.top
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn cell(&self, i: usize, level: usize) -> &BlendAccumulator {
        &self.cells[self.at(i, level)]
    }
}

/// Prefix-summed table answering interval queries.
pub struct BlendingTable {
    n: usize,
    top: usize,
    dims: (usize, usize),
    orientation: Orientation,
    cells: Vec<BlendAccumulator>,
}

impl BlendingTable {
    fn at(&self, i: usize, level: usize) -> usize {
        debug_assert!(i < self.n && level <= self.top);
        i * (self.top + 1) + level
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn top_level(&self) -> usize {
        self.top
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn cell(&self, i: usize, level: usize) -> &BlendAccumulator {
        &self.cells[self.at(i, level)]
    }

    /// Style frame i, recovered exactly from its level-0 cell.
    fn style(&self, i: usize) -> Frame {
        self.cell(i, 0).mean().expect("level-0 cells hold one frame")
    }
}

/// Builds the remapping table. Every pairing is an independent estimation
/// job; jobs are dispatched together and their results folded into cells in
/// a fixed order, so outputs do not depend on scheduling.
pub fn build_remapping_table(
    guide: &Video,
    style: &Video,
    cfg: &BlendConfig,
    matcher: &Matcher,
    orientation: Orientation,
) -> Result<RemappingTable> {
    cfg.validate()?;
    check_paired(guide, style)?;
    let n = guide.len();
    let top = top_level(n);
    let dims = guide.dims();

    let mut cells: Vec<BlendAccumulator> = Vec::with_capacity(n * (top + 1));
    for i in 0..n {
        cells.push(BlendAccumulator::from_frame(style.frame(i)));
        for _ in 0..top {
            cells.push(BlendAccumulator::zero(dims));
        }
    }

    // frame i feeds cell (j, L+1) for each clear bit L of i, where j is i
    // with bits 0..=L set; chains stop once j leaves the video
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..n {
        let mut j = i;
        for level in 0..top {
            if i & (1 << level) != 0 {
                continue;
            }
            j |= 1 << level;
            if j < n {
                jobs.push((i, j, level + 1));
            }
        }
    }

    let phase = match orientation {
        Orientation::Forward => 16,
        Orientation::Reversed => 17,
    };
    let remapped: Result<Vec<Frame>> = matcher.run(|| {
        jobs.par_iter()
            .map(|&(i, j, _)| {
                let loss = LossSpec::GuideStyle {
                    alpha: cfg.alpha,
                    style_source: style.frame(i).clone(),
                    style_target: StyleTarget::Fixed(style.frame(j).clone()),
                };
                let cfg_ij = MatchConfig {
                    rng_seed: rng::job_seed(cfg.match_cfg.rng_seed, phase, i as u64, j as u64),
                    ..cfg.match_cfg.clone()
                };
                let (field, _) = matcher.estimate(guide.frame(i), guide.frame(j), &loss, &cfg_ij)?;
                remap(style.frame(i), &field, cfg.match_cfg.patch_radius)
            })
            .collect()
    });
    let remapped = remapped?;

    let mut table = RemappingTable {
        n,
        top,
        dims,
        orientation,
        cells,
    };
    for ((_, j, level), frame) in jobs.iter().zip(&remapped) {
        let at = table.at(*j, *level);
        table.cells[at].add_frame(frame)?;
    }
    Ok(table)
}

/// Prefix-sums each frame's column: cell (i, L) = cell (i, L-1) + remapping
/// cell (i, L). Pure accumulator arithmetic, no estimation.
pub fn build_blending_table(remapping: &RemappingTable) -> Result<BlendingTable> {
    let mut cells = Vec::with_capacity(remapping.n * (remapping.top + 1));
    for i in 0..remapping.n {
        let mut running = remapping.cell(i, 0).clone();
        cells.push(running.clone());
        for level in 1..=remapping.top {
            running = accumulate(&running, remapping.cell(i, level))?;
            cells.push(running.clone());
        }
    }
    Ok(BlendingTable {
        n: remapping.n,
        top: remapping.top,
        dims: remapping.dims,
        orientation: remapping.orientation,
        cells,
    })
}

/// Sum of (S_i -> S_r) for i in [l, r], as an accumulator of count r-l+1.
/// Each consumed cell except the right endpoint's own costs one field
/// estimation onto frame r.
pub fn query_blending_table(
    table: &BlendingTable,
    guide: &Video,
    l: usize,
    r: usize,
    cfg: &BlendConfig,
    matcher: &Matcher,
) -> Result<BlendAccumulator> {
    query_impl(table, guide, l, r, cfg, matcher, &mut |_, _| {})
}

/// [`query_blending_table`] plus the list of consumed (frame, level) cells
/// in consumption order.
pub fn query_blending_table_traced(
    table: &BlendingTable,
    guide: &Video,
    l: usize,
    r: usize,
    cfg: &BlendConfig,
    matcher: &Matcher,
) -> Result<(BlendAccumulator, Vec<(usize, usize)>)> {
    let mut trace = Vec::new();
    let acc = query_impl(table, guide, l, r, cfg, matcher, &mut |i, level| {
        trace.push((i, level))
    })?;
    Ok((acc, trace))
}

fn query_impl(
    table: &BlendingTable,
    guide: &Video,
    l: usize,
    r: usize,
    cfg: &BlendConfig,
    matcher: &Matcher,
    observe: &mut dyn FnMut(usize, usize),
) -> Result<BlendAccumulator> {
    cfg.validate()?;
    if l > r || r >= table.n {
        return Err(Error::InvalidInterval { l, r, n: table.n });
    }
    if guide.len() != table.n {
        return Err(Error::LengthMismatch {
            guide: guide.len(),
            style: table.n,
        });
    }
    if guide.dims() != table.dims {
        return Err(Error::DimensionMismatch {
            context: "query guide vs table",
            left_h: guide.dims().0,
            left_w: guide.dims().1,
            right_h: table.dims.0,
            right_w: table.dims.1,
        });
    }

    let phase = match table.orientation {
        Orientation::Forward => 18,
        Orientation::Reversed => 19,
    };
    let style_r = table.style(r);
    let mut acc = BlendAccumulator::zero(table.dims);
    let li = l as isize;
    let mut i = r as isize;
    while i >= li {
        // grow the cell while i keeps trailing set bits and the doubled
        // range would still start inside [l, r]
        let mut level = 0usize;
        while level < table.top && i & (1 << level) != 0 && i - (1 << (level + 1)) + 1 >= li {
            level += 1;
        }
        observe(i as usize, level);
        let cell = table.cell(i as usize, level);
        if i as usize == r {
            // the cell already lives in frame r's geometry
            acc.add(cell)?;
        } else {
            let loss = LossSpec::GuideStyle {
                alpha: cfg.alpha,
                style_source: table.style(i as usize),
                style_target: StyleTarget::Fixed(style_r.clone()),
            };
            let cfg_ir = MatchConfig {
                rng_seed: rng::job_seed(cfg.match_cfg.rng_seed, phase, i as u64, r as u64),
                ..cfg.match_cfg.clone()
            };
            let (field, _) = matcher.estimate(guide.frame(i as usize), guide.frame(r), &loss, &cfg_ir)?;
            acc.add(&remap_accumulator(cell, &field, cfg.match_cfg.patch_radius)?)?;
        }
        i -= 1 << level;
    }
    Ok(acc)
}

/// Checks that a query trace tiles [l, r] exactly: each consumed cell
/// covers the contiguous block ending where the previous one left off, and
/// the last block ends at l.
pub fn verify_query_coverage(trace: &[(usize, usize)], l: usize, r: usize) -> bool {
    let mut expect_end = r as isize;
    for &(i, level) in trace {
        if i as isize != expect_end {
            return false;
        }
        expect_end = i as isize - (1 << level);
    }
    expect_end == l as isize - 1
}
