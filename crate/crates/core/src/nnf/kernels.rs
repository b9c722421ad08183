//! Patch loss kernels shared by the public error operations and the
//! estimation sweeps.

use rayon::prelude::*;

use super::{ErrorMap, LossSpec, Nnf, StyleTarget};
use crate::error::Result;
use crate::frame::Frame;
use crate::remap::remap;

#[inline]
pub(crate) fn clamp_add(v: u32, d: isize, n: usize) -> usize {
    (v as isize + d).clamp(0, n as isize - 1) as usize
}

/// Squared distance between the patch of `a` centered at `ac` and the patch
/// of `b` centered at `bc`. Out-of-bounds taps clamp on each side
/// independently, so comparing a frame against itself at equal centers is
/// exactly zero everywhere, borders included.
#[inline]
pub(crate) fn patch_ssd(a: &Frame, ac: (u32, u32), b: &Frame, bc: (u32, u32), p: usize) -> f64 {
    patch_ssd_capped(a, ac, b, bc, p, 1.0, f64::INFINITY)
}

/// [`patch_ssd`] that may stop once `scale * partial >= cap`. The partial
/// sum only grows, so the exact distance is returned whenever
/// `scale * ssd < cap`; otherwise the return value still satisfies
/// `scale * value >= cap`, which is all a strict-threshold caller needs.
#[inline]
pub(crate) fn patch_ssd_capped(
    a: &Frame,
    ac: (u32, u32),
    b: &Frame,
    bc: (u32, u32),
    p: usize,
    scale: f64,
    cap: f64,
) -> f64 {
    let (ah, aw) = a.dims();
    let (bh, bw) = b.dims();
    let p = p as isize;
    let mut acc = 0f64;
    for d in -p..=p {
        let arow = a.row(clamp_add(ac.0, d, ah));
        let brow = b.row(clamp_add(bc.0, d, bh));
        for e in -p..=p {
            let ai = clamp_add(ac.1, e, aw) * 3;
            let bi = clamp_add(bc.1, e, bw) * 3;
            let d0 = arow[ai] - brow[bi];
            let d1 = arow[ai + 1] - brow[bi + 1];
            let d2 = arow[ai + 2] - brow[bi + 2];
            acc += (d0 * d0 + d1 * d1 + d2 * d2) as f64;
        }
        if scale * acc >= cap {
            return acc;
        }
    }
    acc
}

/// A loss resolved to concrete frames for one resolution. The first term is
/// always `alpha * ||source[F(x,y)] - target[x,y]||^2`; the optional second
/// term compares another source-side frame at the same candidate against a
/// reference patch.
pub(crate) struct EvalLoss<'a> {
    pub alpha: f32,
    pub source: &'a Frame,
    pub target: &'a Frame,
    pub second: Option<SecondTerm<'a>>,
}

pub(crate) struct SecondTerm<'a> {
    /// Read at the candidate coordinate.
    pub source: &'a Frame,
    /// Read at the reference position.
    pub target: &'a Frame,
    /// Where the reference patch sits: the evaluated position itself, or a
    /// counterpart field's cell at that position.
    pub through: Option<&'a Nnf>,
}

impl<'a> EvalLoss<'a> {
    pub fn base(source: &'a Frame, target: &'a Frame) -> Self {
        Self {
            alpha: 1.0,
            source,
            target,
            second: None,
        }
    }

    #[inline]
    pub fn eval(&self, x: u32, y: u32, candidate: (u32, u32), p: usize) -> f32 {
        self.eval_capped(x, y, candidate, p, f32::INFINITY)
    }

    /// [`eval`](Self::eval) for callers that reject any value `>= cap`.
    /// Returns the exact loss when it is below `cap`; beyond that it may
    /// stop early, returning some value at or above `cap`. Both branches
    /// leave a strict `< cap` acceptance test and the accepted value itself
    /// bit-identical to the uncapped evaluation.
    #[inline]
    pub fn eval_capped(&self, x: u32, y: u32, candidate: (u32, u32), p: usize, cap: f32) -> f32 {
        let cap = cap as f64;
        let a = self.alpha as f64;
        let mut e = a * patch_ssd_capped(self.source, candidate, self.target, (x, y), p, a, cap);
        if e < cap {
            if let Some(s) = &self.second {
                let at = match s.through {
                    None => (x, y),
                    Some(field) => field.get(x as usize, y as usize),
                };
                e += patch_ssd_capped(s.source, candidate, s.target, at, p, 1.0, cap - e);
            }
        }
        e as f32
    }
}

/// Evaluates a whole field under the loss, one entry per target pixel.
pub(crate) fn eval_field_errors(loss: &EvalLoss<'_>, field: &Nnf, p: usize) -> ErrorMap {
    let (h, w) = field.dims();
    let mut data = vec![0f32; h * w];
    data.par_chunks_mut(w).enumerate().for_each(|(x, row)| {
        for (y, out) in row.iter_mut().enumerate() {
            *out = loss.eval(x as u32, y as u32, field.get(x, y), p);
        }
    });
    ErrorMap::new(h, w, data)
}

/// Patch error of `candidate` for the chosen loss. For the guide-style loss
/// with a self-remapped style target, the target estimate is computed from
/// the candidate field itself before evaluation.
pub fn patch_error(
    source: &Frame,
    target: &Frame,
    candidate: &Nnf,
    loss: &LossSpec,
    patch_radius: usize,
) -> Result<ErrorMap> {
    check_field(source, target, candidate)?;
    loss.validate(source, target)?;
    let p = patch_radius;
    let computed_style;
    let view = match loss {
        LossSpec::Base => EvalLoss::base(source, target),
        LossSpec::GuideStyle {
            alpha,
            style_source,
            style_target,
        } => {
            let style_tgt = match style_target {
                StyleTarget::Fixed(f) => f,
                StyleTarget::SelfRemap => {
                    computed_style = remap(style_source, candidate, p)?;
                    &computed_style
                }
            };
            EvalLoss {
                alpha: *alpha,
                source,
                target,
                second: Some(SecondTerm {
                    source: style_source,
                    target: style_tgt,
                    through: None,
                }),
            }
        }
        LossSpec::AverageAlign { alpha, average } => EvalLoss {
            alpha: *alpha,
            source,
            target,
            second: Some(SecondTerm {
                source,
                target: average,
                through: None,
            }),
        },
        LossSpec::PairwiseAlign {
            alpha,
            counterpart_key,
            counterpart_nnf,
        } => EvalLoss {
            alpha: *alpha,
            source,
            target,
            second: Some(SecondTerm {
                source,
                target: counterpart_key,
                through: Some(counterpart_nnf),
            }),
        },
    };
    Ok(eval_field_errors(&view, candidate, p))
}

/// Joint pairwise error of two fields mapping two keyframes onto one
/// target. Each map combines its own fidelity term with the cross term
/// `||key_l[f_l(x,y)] - key_r[f_r(x,y)]||^2` shared by both.
pub fn pairwise_patch_error(
    key_l: &Frame,
    key_r: &Frame,
    target: &Frame,
    f_l: &Nnf,
    f_r: &Nnf,
    alpha: f32,
    patch_radius: usize,
) -> Result<(ErrorMap, ErrorMap)> {
    check_field(key_l, target, f_l)?;
    check_field(key_r, target, f_r)?;
    let p = patch_radius;
    let (h, w) = target.dims();
    let mut left = vec![0f32; h * w];
    let mut right = vec![0f32; h * w];
    left.par_chunks_mut(w)
        .zip(right.par_chunks_mut(w))
        .enumerate()
        .for_each(|(x, (lrow, rrow))| {
            for y in 0..w {
                let cl = f_l.get(x, y);
                let cr = f_r.get(x, y);
                let cross = patch_ssd(key_l, cl, key_r, cr, p);
                let fid_l = patch_ssd(key_l, cl, target, (x as u32, y as u32), p);
                let fid_r = patch_ssd(key_r, cr, target, (x as u32, y as u32), p);
                lrow[y] = (alpha as f64 * fid_l + cross) as f32;
                rrow[y] = (alpha as f64 * fid_r + cross) as f32;
            }
        });
    Ok((ErrorMap::new(h, w, left), ErrorMap::new(h, w, right)))
}

fn check_field(source: &Frame, target: &Frame, field: &Nnf) -> Result<()> {
    if field.dims() != target.dims() {
        return Err(crate::error::Error::DimensionMismatch {
            context: "field vs target",
            left_h: field.dims().0,
            left_w: field.dims().1,
            right_h: target.dims().0,
            right_w: target.dims().1,
        });
    }
    if field.source_dims() != source.dims() {
        return Err(crate::error::Error::DimensionMismatch {
            context: "field source bounds vs source frame",
            left_h: field.source_dims().0,
            left_w: field.source_dims().1,
            right_h: source.dims().0,
            right_w: source.dims().1,
        });
    }
    Ok(())
}
