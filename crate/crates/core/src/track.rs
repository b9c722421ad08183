//! Tracked field sequences: one source frame matched onto a run of
//! temporally adjacent targets, with each frame's neighbors injected into
//! the updating sequence so the fields stay stable over time.

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::nnf::{LossSpec, MatchConfig, Matcher, Nnf};
use crate::rng;

/// Estimates one field per target, visiting targets outward from `anchor`
/// and then in reverse, so both temporal neighbors influence every frame.
///
/// The anchor frame runs the full pyramid from random initialization; every
/// other visit is a full-resolution refinement warm-started from the nearest
/// already-computed neighbor, with the neighbor fields re-injected as
/// whole-field candidates in every iteration. A single target reduces to a
/// plain estimation.
pub(crate) fn anchored_fields(
    source_guide: &Frame,
    targets: &[&Frame],
    anchor: usize,
    loss: &LossSpec,
    cfg: &MatchConfig,
    matcher: &Matcher,
) -> Result<Vec<Nnf>> {
    if targets.is_empty() {
        return Err(Error::InvalidConfig("tracked sequence needs at least one target".into()));
    }
    if anchor >= targets.len() {
        return Err(Error::InvalidConfig(format!(
            "anchor {anchor} outside the {} targets",
            targets.len()
        )));
    }
    let n = targets.len();
    let mut fields: Vec<Option<Nnf>> = vec![None; n];

    // first pass, outward from the anchor; the anchor keeps the caller's
    // seed so a one-target sequence equals a plain estimation exactly
    let seed = |pass: u64, i: usize| rng::job_seed(cfg.rng_seed, pass, i as u64, 0);
    let (f, _) = matcher.estimate(source_guide, targets[anchor], loss, cfg)?;
    fields[anchor] = Some(f);
    for i in anchor + 1..n {
        let prev = fields[i - 1].clone().expect("previous field computed");
        let cfg_i = MatchConfig {
            rng_seed: seed(0, i),
            ..cfg.clone()
        };
        let (f, _) = matcher.refine(source_guide, targets[i], loss, &cfg_i, prev.clone(), &[&prev])?;
        fields[i] = Some(f);
    }
    for i in (0..anchor).rev() {
        let next = fields[i + 1].clone().expect("next field computed");
        let cfg_i = MatchConfig {
            rng_seed: seed(0, i),
            ..cfg.clone()
        };
        let (f, _) = matcher.refine(source_guide, targets[i], loss, &cfg_i, next.clone(), &[&next])?;
        fields[i] = Some(f);
    }

    let mut fields: Vec<Nnf> = fields.into_iter().map(|f| f.expect("all fields computed")).collect();
    if n == 1 {
        return Ok(fields);
    }

    // second pass, reverse visiting order, both neighbors as candidates
    let first_pass: Vec<usize> = (anchor..n).chain((0..anchor).rev()).collect();
    for &i in first_pass.iter().rev() {
        let mut extras: Vec<Nnf> = Vec::new();
        if i + 1 < n {
            extras.push(fields[i + 1].clone());
        }
        if i > 0 {
            extras.push(fields[i - 1].clone());
        }
        let extra_refs: Vec<&Nnf> = extras.iter().collect();
        let cfg_i = MatchConfig {
            rng_seed: seed(1, i),
            ..cfg.clone()
        };
        let (f, _) = matcher.refine(
            source_guide,
            targets[i],
            loss,
            &cfg_i,
            fields[i].clone(),
            &extra_refs,
        )?;
        fields[i] = f;
    }
    Ok(fields)
}
