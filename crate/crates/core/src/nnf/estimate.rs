//! Field estimation: random init, coarse-to-fine sweeps, propagation and
//! shrinking random search, plus the warm-start and joint-pair variants the
//! higher layers build on.

use rayon::prelude::*;

use super::kernels::{clamp_add, eval_field_errors, EvalLoss, SecondTerm};
use super::{init_random, upsample_nnf, ErrorMap, LossSpec, MatchConfig, Nnf, SearchRadius, StyleTarget};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::pyramid::{level_dims, resize_area};
use crate::remap::remap;
use crate::rng;

/// State handed to an estimation observer after every update step.
/// `before` and `after` are the error maps around the step; candidate steps
/// never increase any entry, refresh steps may.
pub struct StepSnapshot<'a> {
    pub level: usize,
    pub iteration: usize,
    pub label: &'static str,
    pub before: &'a ErrorMap,
    pub after: &'a ErrorMap,
    pub field: &'a Nnf,
}

type Observer<'o> = Option<&'o mut dyn FnMut(&StepSnapshot<'_>)>;

/// Estimates the field mapping `target` pixels onto `source` patches.
/// Returns the field and the error map of its final state.
pub fn estimate_nnf(
    source: &Frame,
    target: &Frame,
    loss: &LossSpec,
    cfg: &MatchConfig,
) -> Result<(Nnf, ErrorMap)> {
    estimate_impl(source, target, loss, cfg, &[], &mut None)
}

/// [`estimate_nnf`] with an observer that sees every update step. Intended
/// for diagnostics and tests; the returned result is identical to the plain
/// call.
pub fn estimate_nnf_traced(
    source: &Frame,
    target: &Frame,
    loss: &LossSpec,
    cfg: &MatchConfig,
    observer: &mut dyn FnMut(&StepSnapshot<'_>),
) -> Result<(Nnf, ErrorMap)> {
    estimate_impl(source, target, loss, cfg, &[], &mut Some(observer))
}

/// Estimates one field per (source, target) pair. Pair `i` runs with seed
/// `cfg.rng_seed ^ i`, so each result equals the corresponding single call;
/// batching only changes throughput.
pub fn estimate_nnf_batch(
    pairs: &[(&Frame, &Frame)],
    loss: &LossSpec,
    cfg: &MatchConfig,
) -> Result<Vec<(Nnf, ErrorMap)>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, (source, target))| {
            let cfg = MatchConfig {
                rng_seed: cfg.rng_seed ^ i as u64,
                ..cfg.clone()
            };
            estimate_nnf(source, target, loss, &cfg)
        })
        .collect()
}

/// Warm-started refinement: runs the per-iteration sweeps at full resolution
/// only, starting from `init`, with `extras` injected as whole-field
/// candidates in every iteration.
pub(crate) fn refine_nnf(
    source: &Frame,
    target: &Frame,
    loss: &LossSpec,
    cfg: &MatchConfig,
    init: Nnf,
    extras: &[&Nnf],
) -> Result<(Nnf, ErrorMap)> {
    check_inputs(source, target, cfg)?;
    loss.validate(source, target)?;
    if init.dims() != target.dims() || init.source_dims() != source.dims() {
        return Err(Error::InvalidConfig("warm-start field does not match the frames".into()));
    }
    let mut field = init;
    let mut resolved = ResolvedLoss::resolve(loss, target.dims(), source.dims())?;
    let err = run_level(
        source,
        target,
        &mut resolved,
        &mut field,
        cfg,
        0,
        extras,
        &mut None,
    )?;
    Ok((field, err))
}

pub(crate) fn estimate_impl(
    source: &Frame,
    target: &Frame,
    loss: &LossSpec,
    cfg: &MatchConfig,
    extras: &[&Nnf],
    observer: &mut Observer<'_>,
) -> Result<(Nnf, ErrorMap)> {
    check_inputs(source, target, cfg)?;
    loss.validate(source, target)?;
    let (th, tw) = target.dims();
    let (sh, sw) = source.dims();
    let t_levels = level_dims(th, tw, cfg.pyramid_min_side);
    let s_levels = level_dims(sh, sw, cfg.pyramid_min_side);
    let depth = t_levels.len().min(s_levels.len());
    let t_levels = &t_levels[t_levels.len() - depth..];
    let s_levels = &s_levels[s_levels.len() - depth..];

    let mut field = init_random(t_levels[0], s_levels[0], cfg.rng_seed);
    let mut err = None;
    for (j, (&td, &sd)) in t_levels.iter().zip(s_levels).enumerate() {
        if j > 0 {
            field = upsample_nnf(&field, td, sd)?;
        }
        let src = resize_area(source, sd.0, sd.1);
        let tgt = resize_area(target, td.0, td.1);
        let mut resolved = ResolvedLoss::resolve(loss, td, sd)?;
        let level_extras: Vec<Nnf> = extras
            .iter()
            .map(|e| {
                if e.dims() == td && e.source_dims() == sd {
                    (*e).clone()
                } else {
                    downsample_nnf(e, td, sd)
                }
            })
            .collect();
        let extra_refs: Vec<&Nnf> = level_extras.iter().collect();
        err = Some(run_level(
            &src,
            &tgt,
            &mut resolved,
            &mut field,
            cfg,
            j,
            &extra_refs,
            observer,
        )?);
    }
    Ok((field, err.expect("at least one pyramid level")))
}

fn check_inputs(source: &Frame, target: &Frame, cfg: &MatchConfig) -> Result<()> {
    cfg.validate()?;
    let side = cfg.patch_side();
    for f in [source, target] {
        let (h, w) = f.dims();
        if h < side || w < side {
            return Err(Error::FrameTooSmall { h, w, side });
        }
    }
    Ok(())
}

/// Loss auxiliaries resized to one pyramid level.
struct ResolvedLoss {
    alpha: f32,
    /// Source-side frame of the second term; `None` means the main source.
    second_src: Option<Frame>,
    /// Reference frame of the second term; `None` means no second term.
    second_tgt: Option<Frame>,
    /// Counterpart field the reference is read through (pairwise loss).
    cp_field: Option<Nnf>,
    /// Recompute `second_tgt` by remapping `second_src` through the current
    /// field at the start of every iteration.
    refresh: bool,
}

impl ResolvedLoss {
    fn resolve(loss: &LossSpec, t_dims: (usize, usize), s_dims: (usize, usize)) -> Result<Self> {
        Ok(match loss {
            LossSpec::Base => ResolvedLoss {
                alpha: 1.0,
                second_src: None,
                second_tgt: None,
                cp_field: None,
                refresh: false,
            },
            LossSpec::GuideStyle {
                alpha,
                style_source,
                style_target,
            } => {
                let src = resize_area(style_source, s_dims.0, s_dims.1);
                let (tgt, refresh) = match style_target {
                    StyleTarget::Fixed(f) => (Some(resize_area(f, t_dims.0, t_dims.1)), false),
                    StyleTarget::SelfRemap => (None, true),
                };
                ResolvedLoss {
                    alpha: *alpha,
                    second_src: Some(src),
                    second_tgt: tgt,
                    cp_field: None,
                    refresh,
                }
            }
            LossSpec::AverageAlign { alpha, average } => ResolvedLoss {
                alpha: *alpha,
                second_src: None,
                second_tgt: Some(resize_area(average, t_dims.0, t_dims.1)),
                cp_field: None,
                refresh: false,
            },
            LossSpec::PairwiseAlign {
                alpha,
                counterpart_key,
                counterpart_nnf,
            } => {
                // the counterpart key scales with the source side of the
                // pyramid, which requires matching full-resolution sizes
                if counterpart_key.dims() != counterpart_nnf.source_dims() {
                    return Err(Error::InvalidConfig(
                        "counterpart key does not match counterpart field bounds".into(),
                    ));
                }
                let key = resize_area(counterpart_key, s_dims.0, s_dims.1);
                let cp = if counterpart_nnf.dims() == t_dims && counterpart_nnf.source_dims() == key.dims() {
                    counterpart_nnf.clone()
                } else {
                    downsample_nnf(counterpart_nnf, t_dims, key.dims())
                };
                ResolvedLoss {
                    alpha: *alpha,
                    second_src: None,
                    second_tgt: Some(key),
                    cp_field: Some(cp),
                    refresh: false,
                }
            }
        })
    }

    fn view<'a>(&'a self, source: &'a Frame, target: &'a Frame) -> EvalLoss<'a> {
        EvalLoss {
            alpha: self.alpha,
            source,
            target,
            second: self.second_tgt.as_ref().map(|tgt| SecondTerm {
                source: self.second_src.as_ref().unwrap_or(source),
                target: tgt,
                through: self.cp_field.as_ref(),
            }),
        }
    }
}

/// Runs `cfg.iterations` update sweeps on one pyramid level.
#[allow(clippy::too_many_arguments)]
fn run_level(
    source: &Frame,
    target: &Frame,
    resolved: &mut ResolvedLoss,
    field: &mut Nnf,
    cfg: &MatchConfig,
    level: usize,
    extras: &[&Nnf],
    observer: &mut Observer<'_>,
) -> Result<ErrorMap> {
    let p = cfg.patch_radius;
    let mut scratch = Scratch::new(field.dims());
    let mut err = if resolved.refresh {
        None
    } else {
        let e = eval_field_errors(&resolved.view(source, target), field, p);
        notify(observer, level, 0, "init", &e, &e, field);
        Some(e)
    };

    for iter in 0..cfg.iterations {
        if resolved.refresh {
            let style_src = resolved.second_src.as_ref().expect("refresh implies a style source");
            resolved.second_tgt = Some(remap(style_src, field, p)?);
            let e = eval_field_errors(&resolved.view(source, target), field, p);
            if let Some(prev) = &err {
                notify(observer, level, iter, "refresh", prev, &e, field);
            } else {
                notify(observer, level, iter, "refresh", &e, &e, field);
            }
            err = Some(e);
        }
        let view = resolved.view(source, target);
        let e = err.as_mut().expect("error map initialized");
        sweep_once(&view, p, cfg, level, iter, field, e, &mut scratch, extras, observer);
    }
    Ok(err.expect("at least one iteration"))
}

fn radius_schedule(initial: SearchRadius, source_dims: (usize, usize)) -> Vec<u32> {
    let mut r = match initial {
        SearchRadius::LevelMax => source_dims.0.max(source_dims.1) as u32,
        SearchRadius::Fixed(r) => r,
    };
    let mut out = Vec::new();
    while r >= 1 {
        out.push(r);
        r /= 2;
    }
    out
}

struct Scratch {
    cells: Vec<(u32, u32)>,
    errs: Vec<f32>,
}

impl Scratch {
    fn new(dims: (usize, usize)) -> Self {
        Self {
            cells: vec![(0, 0); dims.0 * dims.1],
            errs: vec![0f32; dims.0 * dims.1],
        }
    }
}

/// One data-parallel update step: every pixel evaluates its candidate
/// against a frozen snapshot of the field and error map, and the candidate
/// replaces the incumbent only on strictly smaller error.
#[allow(clippy::too_many_arguments)]
fn candidate_pass(
    view: &EvalLoss<'_>,
    p: usize,
    field: &mut Nnf,
    err: &mut ErrorMap,
    scratch: &mut Scratch,
    gen: &(dyn Fn(usize, usize, &Nnf) -> (u32, u32) + Sync),
    label: &'static str,
    level: usize,
    iteration: usize,
    observer: &mut Observer<'_>,
) {
    let (h, w) = field.dims();
    debug_assert_eq!(err.dims(), (h, w));
    let before = observer.as_ref().map(|_| err.clone());
    {
        let frozen_field: &Nnf = field;
        let frozen_err: &ErrorMap = err;
        scratch
            .cells
            .par_chunks_mut(w)
            .zip(scratch.errs.par_chunks_mut(w))
            .enumerate()
            .for_each(|(x, (crow, erow))| {
                for y in 0..w {
                    let cur = frozen_field.get(x, y);
                    let cur_e = frozen_err.get(x, y);
                    let cand = gen(x, y, frozen_field);
                    if cand == cur {
                        crow[y] = cur;
                        erow[y] = cur_e;
                        continue;
                    }
                    let e = view.eval_capped(x as u32, y as u32, cand, p, cur_e);
                    if e < cur_e {
                        crow[y] = cand;
                        erow[y] = e;
                    } else {
                        crow[y] = cur;
                        erow[y] = cur_e;
                    }
                }
            });
    }
    field.swap_cells(&mut scratch.cells);
    err.swap_data(&mut scratch.errs);
    if let Some(b) = before {
        notify(observer, level, iteration, label, &b, err, field);
    }
}

fn notify(
    observer: &mut Observer<'_>,
    level: usize,
    iteration: usize,
    label: &'static str,
    before: &ErrorMap,
    after: &ErrorMap,
    field: &Nnf,
) {
    if let Some(cb) = observer {
        cb(&StepSnapshot {
            level,
            iteration,
            label,
            before,
            after,
            field,
        });
    }
}

/// Nearest-cell reduction of a field to coarser dimensions, with source
/// coordinates rescaled into the new source bounds.
pub(crate) fn downsample_nnf(field: &Nnf, new_dims: (usize, usize), new_source_dims: (usize, usize)) -> Nnf {
    let (h, w) = field.dims();
    let (sh, sw) = field.source_dims();
    let (nh, nw) = new_dims;
    let (nsh, nsw) = new_source_dims;
    let mut cells = Vec::with_capacity(nh * nw);
    for x in 0..nh {
        let fx = (x * h / nh).min(h - 1);
        for y in 0..nw {
            let fy = (y * w / nw).min(w - 1);
            let (vx, vy) = field.get(fx, fy);
            let sx = ((vx as usize * nsh + sh / 2) / sh).min(nsh - 1);
            let sy = ((vy as usize * nsw + sw / 2) / sw).min(nsw - 1);
            cells.push((sx as u32, sy as u32));
        }
    }
    Nnf::from_cells(new_dims, new_source_dims, cells)
}

/// Inputs for joint optimization of two fields mapping two keyframes onto
/// one intermediate position: each field's loss is its alpha-weighted guide
/// fidelity plus the cross term tying the two remapped keyframes together.
pub(crate) struct PairProblem<'a> {
    pub guide_l: &'a Frame,
    pub guide_r: &'a Frame,
    pub guide_target: &'a Frame,
    pub key_l: &'a Frame,
    pub key_r: &'a Frame,
    pub alpha: f32,
}

/// Alternating optimization of the pair. Within each iteration both fields
/// are updated against the counterpart's state from the start of that
/// iteration, so two identical problems produce two identical fields.
/// `warm` skips the pyramid and refines at full resolution.
pub(crate) fn optimize_pair(
    prob: &PairProblem<'_>,
    cfg: &MatchConfig,
    warm: Option<(Nnf, Nnf)>,
    extras_l: &[&Nnf],
    extras_r: &[&Nnf],
) -> Result<(Nnf, Nnf)> {
    check_inputs(prob.guide_l, prob.guide_target, cfg)?;
    check_inputs(prob.guide_r, prob.guide_target, cfg)?;
    if prob.key_l.dims() != prob.guide_l.dims() || prob.key_r.dims() != prob.guide_r.dims() {
        return Err(Error::InvalidConfig("keyframe and guide dimensions differ".into()));
    }
    let (th, tw) = prob.guide_target.dims();
    let (lh, lw) = prob.guide_l.dims();
    let (rh, rw) = prob.guide_r.dims();

    let levels: Vec<((usize, usize), (usize, usize), (usize, usize))> = if warm.is_some() {
        vec![((th, tw), (lh, lw), (rh, rw))]
    } else {
        let t = level_dims(th, tw, cfg.pyramid_min_side);
        let l = level_dims(lh, lw, cfg.pyramid_min_side);
        let r = level_dims(rh, rw, cfg.pyramid_min_side);
        let depth = t.len().min(l.len()).min(r.len());
        (0..depth)
            .map(|j| {
                (
                    t[t.len() - depth + j],
                    l[l.len() - depth + j],
                    r[r.len() - depth + j],
                )
            })
            .collect()
    };

    let (mut f_l, mut f_r) = match warm {
        Some((a, b)) => {
            if a.dims() != (th, tw) || b.dims() != (th, tw) {
                return Err(Error::InvalidConfig("warm-start pair does not match the target".into()));
            }
            (a, b)
        }
        None => (
            init_random(levels[0].0, levels[0].1, cfg.rng_seed),
            init_random(levels[0].0, levels[0].2, cfg.rng_seed),
        ),
    };

    let p = cfg.patch_radius;
    for (j, &(td, ld, rd)) in levels.iter().enumerate() {
        if j > 0 {
            f_l = upsample_nnf(&f_l, td, ld)?;
            f_r = upsample_nnf(&f_r, td, rd)?;
        }
        let g_l = resize_area(prob.guide_l, ld.0, ld.1);
        let g_r = resize_area(prob.guide_r, rd.0, rd.1);
        let g_t = resize_area(prob.guide_target, td.0, td.1);
        let k_l = resize_area(prob.key_l, ld.0, ld.1);
        let k_r = resize_area(prob.key_r, rd.0, rd.1);
        let lvl_extras_l: Vec<Nnf> = level_extras(extras_l, td, ld);
        let lvl_extras_r: Vec<Nnf> = level_extras(extras_r, td, rd);

        let mut scratch = Scratch::new(td);
        for iter in 0..cfg.iterations {
            // counterpart snapshots from the start of the iteration
            let snap_l = f_l.clone();
            let snap_r = f_r.clone();

            let view_l = EvalLoss {
                alpha: prob.alpha,
                source: &g_l,
                target: &g_t,
                second: Some(SecondTerm {
                    source: &k_l,
                    target: &k_r,
                    through: Some(&snap_r),
                }),
            };
            let mut err_l = eval_field_errors(&view_l, &f_l, p);
            sweep_once(
                &view_l,
                p,
                cfg,
                j,
                iter,
                &mut f_l,
                &mut err_l,
                &mut scratch,
                &lvl_extras_l.iter().collect::<Vec<_>>(),
                &mut None,
            );

            let view_r = EvalLoss {
                alpha: prob.alpha,
                source: &g_r,
                target: &g_t,
                second: Some(SecondTerm {
                    source: &k_r,
                    target: &k_l,
                    through: Some(&snap_l),
                }),
            };
            let mut err_r = eval_field_errors(&view_r, &f_r, p);
            sweep_once(
                &view_r,
                p,
                cfg,
                j,
                iter,
                &mut f_r,
                &mut err_r,
                &mut scratch,
                &lvl_extras_r.iter().collect::<Vec<_>>(),
                &mut None,
            );
        }
    }
    Ok((f_l, f_r))
}

fn level_extras(extras: &[&Nnf], t_dims: (usize, usize), s_dims: (usize, usize)) -> Vec<Nnf> {
    extras
        .iter()
        .map(|e| {
            if e.dims() == t_dims && e.source_dims() == s_dims {
                (*e).clone()
            } else {
                downsample_nnf(e, t_dims, s_dims)
            }
        })
        .collect()
}

/// The per-iteration updating sequence (injected fields, propagation,
/// random search) against a fixed loss view.
#[allow(clippy::too_many_arguments)]
fn sweep_once(
    view: &EvalLoss<'_>,
    p: usize,
    cfg: &MatchConfig,
    level: usize,
    iter: usize,
    field: &mut Nnf,
    err: &mut ErrorMap,
    scratch: &mut Scratch,
    extras: &[&Nnf],
    observer: &mut Observer<'_>,
) {
    for extra in extras {
        let gen = |x: usize, y: usize, _f: &Nnf| extra.get(x, y);
        candidate_pass(view, p, field, err, scratch, &gen, "tracked-candidate", level, iter, observer);
    }
    let (h, w) = field.dims();
    let (sh, sw) = field.source_dims();
    for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
        let gen = move |x: usize, y: usize, f: &Nnf| {
            let qx = clamp_add(x as u32, dx, h);
            let qy = clamp_add(y as u32, dy, w);
            let (fx, fy) = f.get(qx, qy);
            (clamp_add(fx, -dx, sh) as u32, clamp_add(fy, -dy, sw) as u32)
        };
        candidate_pass(view, p, field, err, scratch, &gen, "propagation", level, iter, observer);
    }
    let seed = cfg.rng_seed;
    let mut ordinal = 0u32;
    for r in radius_schedule(cfg.initial_radius, (sh, sw)) {
        for _ in 0..cfg.candidates_per_radius {
            let o = ordinal;
            let gen = move |x: usize, y: usize, f: &Nnf| {
                let (fx, fy) = f.get(x, y);
                let dx = rng::offset_in(rng::draw(seed, level as u32, iter as u32, x as u32, y as u32, 2 * o), r);
                let dy = rng::offset_in(
                    rng::draw(seed, level as u32, iter as u32, x as u32, y as u32, 2 * o + 1),
                    r,
                );
                (clamp_add(fx, dx as isize, sh) as u32, clamp_add(fy, dy as isize, sw) as u32)
            };
            candidate_pass(view, p, field, err, scratch, &gen, "random-search", level, iter, observer);
            ordinal += 1;
        }
    }
}
