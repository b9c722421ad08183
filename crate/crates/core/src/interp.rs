//! Keyframe interpolation: renders every frame of a guide video from one or
//! more styled keyframes.
//!
//! Between two keyframes l and r, frame i is the convex combination
//! ((r-i)/(r-l)) (S_l -> S_i) + ((i-l)/(r-l)) (S_r -> S_i), where each remap
//! follows a field estimated on the guide frames. Frames outside the
//! keyframe span extend outward from the nearest keyframe. Two optional
//! mechanisms improve temporal coherence: tracking (neighbor fields join
//! each frame's candidate sequence, with warm starts along the index order)
//! and pairwise alignment (the two fields of an interval are optimized
//! jointly so their remaps agree).

use crate::error::{Error, Result};
use crate::frame::{Frame, Role, Video};
use crate::nnf::estimate::PairProblem;
use crate::nnf::{LossSpec, MatchConfig, Matcher, Nnf, StyleTarget};
use crate::remap::remap;
use crate::rng;
use crate::track;

/// Styled keyframes, ordered by frame index.
#[derive(Debug, Clone)]
pub struct KeyframeSet {
    entries: Vec<(usize, Frame)>,
}

impl KeyframeSet {
    /// Requires at least one entry and strictly increasing indices. Index
    /// range and frame dimensions are checked against the guide video when
    /// the set is used.
    pub fn new(entries: Vec<(usize, Frame)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::BadKeyframes);
        }
        if entries.windows(2).any(|pair| pair[1].0 <= pair[0].0) {
            return Err(Error::BadKeyframes);
        }
        Ok(KeyframeSet { entries })
    }

    pub fn entries(&self) -> &[(usize, Frame)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Settings for interpolation runs.
#[derive(Debug, Clone)]
pub struct InterpConfig {
    /// Chain fields along the frame order so motion is followed smoothly.
    pub tracking: bool,
    /// Jointly optimize the two fields of each keyframe interval. Ignored
    /// for single-keyframe runs, which have nothing to align.
    pub alignment: bool,
    /// Weight of the guide fidelity term relative to the style term.
    pub alpha: f32,
    pub match_cfg: MatchConfig,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig {
            tracking: true,
            alignment: true,
            alpha: 2.0,
            match_cfg: MatchConfig::default(),
        }
    }
}

impl InterpConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig("alpha must be finite and non-negative".into()));
        }
        self.match_cfg.validate()
    }
}

/// Renders the whole video from the keyframes. Keyframe positions copy the
/// styled frames verbatim; frames between two keyframes blend both remaps
/// with convex weights; frames before the first or after the last keyframe
/// extend from that keyframe alone.
pub fn interpolate(
    guide: &Video,
    keys: &KeyframeSet,
    cfg: &InterpConfig,
    matcher: &Matcher,
) -> Result<Video> {
    cfg.validate()?;
    check_keys(guide, keys)?;
    let entries = keys.entries();
    if entries.len() == 1 {
        return extend_single_keyframe(guide, entries[0].0, &entries[0].1, cfg, matcher);
    }

    let n = guide.len();
    let mut out: Vec<Option<Frame>> = vec![None; n];
    for (idx, styled) in entries {
        out[*idx] = Some(styled.clone());
    }

    let (first_idx, first_styled) = &entries[0];
    if *first_idx > 0 {
        let targets: Vec<&Frame> = (0..*first_idx).map(|i| guide.frame(i)).collect();
        let rendered = extend_outputs(
            guide.frame(*first_idx),
            first_styled,
            &targets,
            targets.len() - 1,
            cfg,
            matcher,
            1,
        )?;
        for (i, frame) in rendered.into_iter().enumerate() {
            out[i] = Some(frame);
        }
    }
    let (last_idx, last_styled) = entries.last().expect("non-empty keys");
    if *last_idx + 1 < n {
        let targets: Vec<&Frame> = (*last_idx + 1..n).map(|i| guide.frame(i)).collect();
        let rendered = extend_outputs(guide.frame(*last_idx), last_styled, &targets, 0, cfg, matcher, 2)?;
        for (k, frame) in rendered.into_iter().enumerate() {
            out[*last_idx + 1 + k] = Some(frame);
        }
    }

    for pair in entries.windows(2) {
        let (l, styled_l) = (&pair[0].0, &pair[0].1);
        let (r, styled_r) = (&pair[1].0, &pair[1].1);
        if r - l < 2 {
            continue;
        }
        let (fields_l, fields_r) = interval_fields(guide, *l, *r, styled_l, styled_r, cfg, matcher)?;
        for (k, (f_l, f_r)) in fields_l.iter().zip(&fields_r).enumerate() {
            let i = l + 1 + k;
            let (w_l, w_r) = pair_weights(*l, *r, i);
            let left = remap(styled_l, f_l, cfg.match_cfg.patch_radius)?;
            let right = remap(styled_r, f_r, cfg.match_cfg.patch_radius)?;
            out[i] = Some(combine_weighted(&left, w_l, &right, w_r));
        }
    }

    let frames: Vec<Frame> = out.into_iter().map(|f| f.expect("every slot rendered")).collect();
    Video::new(frames, Role::Style)
}

/// Renders the whole video from one styled keyframe: frame i is
/// (S_key -> S_i) through a field on the guide frames, and the keyframe
/// position is copied verbatim. With tracking on, fields are computed in
/// index order outward from the keyframe.
pub fn extend_single_keyframe(
    guide: &Video,
    key_index: usize,
    styled: &Frame,
    cfg: &InterpConfig,
    matcher: &Matcher,
) -> Result<Video> {
    cfg.validate()?;
    let n = guide.len();
    if key_index >= n {
        return Err(Error::KeyframeOutOfRange { index: key_index, len: n });
    }
    if styled.dims() != guide.dims() {
        return Err(dims_error("keyframe vs guide", styled.dims(), guide.dims()));
    }

    let mut frames: Vec<Option<Frame>> = vec![None; n];
    frames[key_index] = Some(styled.clone());
    if cfg.tracking {
        // the keyframe's own slot participates in the chain as its anchor
        let targets: Vec<&Frame> = guide.frames().iter().collect();
        let loss = guide_style_loss(cfg.alpha, styled);
        let fields = track::anchored_fields(guide.frame(key_index), &targets, key_index, &loss, &cfg.match_cfg, matcher)?;
        for (i, field) in fields.iter().enumerate() {
            if i != key_index {
                frames[i] = Some(remap(styled, field, cfg.match_cfg.patch_radius)?);
            }
        }
    } else {
        let loss = guide_style_loss(cfg.alpha, styled);
        for i in 0..n {
            if i == key_index {
                continue;
            }
            let cfg_i = MatchConfig {
                rng_seed: rng::job_seed(cfg.match_cfg.rng_seed, 3, i as u64, 0),
                ..cfg.match_cfg.clone()
            };
            let (field, _) = matcher.estimate(guide.frame(key_index), guide.frame(i), &loss, &cfg_i)?;
            frames[i] = Some(remap(styled, &field, cfg.match_cfg.patch_radius)?);
        }
    }
    let frames: Vec<Frame> = frames.into_iter().map(|f| f.expect("every slot rendered")).collect();
    Video::new(frames, Role::Style)
}

/// Estimates one field per target for a fixed source frame, injecting each
/// frame's already-computed neighbor fields as whole-field candidates and
/// warm-starting from the nearest neighbor. Runs one forward and one
/// backward pass; a single target is identical to a plain estimation.
pub fn tracked_nnf_sequence(
    source_guide: &Frame,
    targets: &[Frame],
    cfg: &MatchConfig,
    matcher: &Matcher,
) -> Result<Vec<Nnf>> {
    let refs: Vec<&Frame> = targets.iter().collect();
    track::anchored_fields(source_guide, &refs, 0, &LossSpec::Base, cfg, matcher)
}

/// Jointly optimizes the two fields remapping S_l and S_r onto one target.
/// Each alternating iteration updates F_l against F_r's state from the
/// start of that iteration, then F_r symmetrically, so the cross term
/// ||S_l[F_l] - S_r[F_r]||^2 shrinks without either side chasing a moving
/// counterpart.
pub fn aligned_pair_nnfs(
    key_l: &Frame,
    key_r: &Frame,
    guide_l: &Frame,
    guide_r: &Frame,
    guide_i: &Frame,
    cfg: &InterpConfig,
    matcher: &Matcher,
) -> Result<(Nnf, Nnf)> {
    cfg.validate()?;
    let prob = PairProblem {
        guide_l,
        guide_r,
        guide_target: guide_i,
        key_l,
        key_r,
        alpha: cfg.alpha,
    };
    matcher.optimize_pair(&prob, &cfg.match_cfg, None, &[], &[])
}

fn check_keys(guide: &Video, keys: &KeyframeSet) -> Result<()> {
    let n = guide.len();
    for (idx, styled) in keys.entries() {
        if *idx >= n {
            return Err(Error::KeyframeOutOfRange { index: *idx, len: n });
        }
        if styled.dims() != guide.dims() {
            return Err(dims_error("keyframe vs guide", styled.dims(), guide.dims()));
        }
    }
    Ok(())
}

fn dims_error(context: &'static str, left: (usize, usize), right: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        context,
        left_h: left.0,
        left_w: left.1,
        right_h: right.0,
        right_w: right.1,
    }
}

fn guide_style_loss(alpha: f32, styled: &Frame) -> LossSpec {
    LossSpec::GuideStyle {
        alpha,
        style_source: styled.clone(),
        style_target: StyleTarget::SelfRemap,
    }
}

/// Convex weights of Eq-style linear interpolation between keyframes l and
/// r at frame i: both in [0, 1] and summing to one.
fn pair_weights(l: usize, r: usize, i: usize) -> (f64, f64) {
    debug_assert!(l < r && l <= i && i <= r);
    let span = (r - l) as f64;
    let w_r = (i - l) as f64 / span;
    (1.0 - w_r, w_r)
}

fn combine_weighted(a: &Frame, wa: f64, b: &Frame, wb: f64) -> Frame {
    debug_assert_eq!(a.dims(), b.dims());
    let data: Vec<f32> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (wa * x as f64 + wb * y as f64) as f32)
        .collect();
    Frame::new(a.height(), a.width(), data).expect("dims preserved")
}

/// Renders the frames of one extension span (all on one side of a
/// keyframe). `anchor` indexes into `targets` at the frame nearest the
/// keyframe; `salt` decorrelates seeds across spans.
fn extend_outputs(
    source_guide: &Frame,
    styled: &Frame,
    targets: &[&Frame],
    anchor: usize,
    cfg: &InterpConfig,
    matcher: &Matcher,
    salt: u64,
) -> Result<Vec<Frame>> {
    let loss = guide_style_loss(cfg.alpha, styled);
    let fields: Vec<Nnf> = if cfg.tracking {
        track::anchored_fields(source_guide, targets, anchor, &loss, &cfg.match_cfg, matcher)?
    } else {
        let mut fields = Vec::with_capacity(targets.len());
        for (i, target) in targets.iter().enumerate() {
            let cfg_i = MatchConfig {
                rng_seed: rng::job_seed(cfg.match_cfg.rng_seed, 8 + salt, i as u64, 0),
                ..cfg.match_cfg.clone()
            };
            let (field, _) = matcher.estimate(source_guide, target, &loss, &cfg_i)?;
            fields.push(field);
        }
        fields
    };
    fields
        .iter()
        .map(|f| remap(styled, f, cfg.match_cfg.patch_radius))
        .collect()
}

/// Fields for the interior frames of one keyframe interval, left side and
/// right side, in interior order l+1..r.
fn interval_fields(
    guide: &Video,
    l: usize,
    r: usize,
    styled_l: &Frame,
    styled_r: &Frame,
    cfg: &InterpConfig,
    matcher: &Matcher,
) -> Result<(Vec<Nnf>, Vec<Nnf>)> {
    let interior: Vec<&Frame> = (l + 1..r).map(|i| guide.frame(i)).collect();
    let g_l = guide.frame(l);
    let g_r = guide.frame(r);
    let base = &cfg.match_cfg;
    let seed = |phase: u64, i: usize| rng::job_seed(base.rng_seed, phase, i as u64, 0);

    if !cfg.alignment {
        let loss_l = guide_style_loss(cfg.alpha, styled_l);
        let loss_r = guide_style_loss(cfg.alpha, styled_r);
        if cfg.tracking {
            let fields_l = track::anchored_fields(g_l, &interior, 0, &loss_l, base, matcher)?;
            let fields_r = track::anchored_fields(g_r, &interior, interior.len() - 1, &loss_r, base, matcher)?;
            return Ok((fields_l, fields_r));
        }
        let mut fields_l = Vec::with_capacity(interior.len());
        let mut fields_r = Vec::with_capacity(interior.len());
        for (i, target) in interior.iter().enumerate() {
            let cfg_l = MatchConfig { rng_seed: seed(4, i), ..base.clone() };
            let cfg_r = MatchConfig { rng_seed: seed(5, i), ..base.clone() };
            fields_l.push(matcher.estimate(g_l, target, &loss_l, &cfg_l)?.0);
            fields_r.push(matcher.estimate(g_r, target, &loss_r, &cfg_r)?.0);
        }
        return Ok((fields_l, fields_r));
    }

    fn make_prob<'a>(
        g_l: &'a Frame,
        g_r: &'a Frame,
        target: &'a Frame,
        key_l: &'a Frame,
        key_r: &'a Frame,
        alpha: f32,
    ) -> PairProblem<'a> {
        PairProblem {
            guide_l: g_l,
            guide_r: g_r,
            guide_target: target,
            key_l,
            key_r,
            alpha,
        }
    }
    let prob = |target| make_prob(g_l, g_r, target, styled_l, styled_r, cfg.alpha);

    if !cfg.tracking {
        let mut fields_l = Vec::with_capacity(interior.len());
        let mut fields_r = Vec::with_capacity(interior.len());
        for (i, target) in interior.iter().enumerate() {
            let cfg_i = MatchConfig { rng_seed: seed(6, i), ..base.clone() };
            let (f_l, f_r) = matcher.optimize_pair(&prob(target), &cfg_i, None, &[], &[])?;
            fields_l.push(f_l);
            fields_r.push(f_r);
        }
        return Ok((fields_l, fields_r));
    }

    // tracking and alignment together: a forward pass walks away from l
    // with warm starts, then a backward pass lets the far neighbor in
    let mut fields_l: Vec<Nnf> = Vec::with_capacity(interior.len());
    let mut fields_r: Vec<Nnf> = Vec::with_capacity(interior.len());
    for (i, target) in interior.iter().enumerate() {
        let cfg_i = MatchConfig { rng_seed: seed(6, i), ..base.clone() };
        let (f_l, f_r) = if i == 0 {
            matcher.optimize_pair(&prob(target), &cfg_i, None, &[], &[])?
        } else {
            let warm = Some((fields_l[i - 1].clone(), fields_r[i - 1].clone()));
            matcher.optimize_pair(&prob(target), &cfg_i, warm, &[&fields_l[i - 1]], &[&fields_r[i - 1]])?
        };
        fields_l.push(f_l);
        fields_r.push(f_r);
    }
    if interior.len() > 1 {
        for i in (0..interior.len() - 1).rev() {
            let cfg_i = MatchConfig { rng_seed: seed(7, i), ..base.clone() };
            let mut extras_l: Vec<&Nnf> = vec![&fields_l[i + 1]];
            let mut extras_r: Vec<&Nnf> = vec![&fields_r[i + 1]];
            if i > 0 {
                extras_l.push(&fields_l[i - 1]);
                extras_r.push(&fields_r[i - 1]);
            }
            let warm = Some((fields_l[i].clone(), fields_r[i].clone()));
            let (f_l, f_r) = matcher.optimize_pair(&prob(&interior[i]), &cfg_i, warm, &extras_l, &extras_r)?;
            fields_l[i] = f_l;
            fields_r[i] = f_r;
        }
    }
    Ok((fields_l, fields_r))
}
