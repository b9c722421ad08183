//! Estimation backends behind one handle: the real matcher, and an identity
//! stub that lets the surrounding machinery be tested exactly.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::frame::Frame;

use super::estimate::{self, PairProblem};
use super::{ErrorMap, LossSpec, MatchConfig, Nnf};

/// Which backend a [`Matcher`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcherKind {
    /// Full pyramid estimation.
    PatchMatch,
    /// Returns the identity field and a zero error map without searching.
    /// Every query is still counted, so call-count behavior is unchanged.
    IdentityStub,
}

/// Estimation handle shared by the blending and interpolation layers.
/// Counts every field it produces and optionally pins work to a thread pool
/// of a fixed size.
pub struct Matcher {
    kind: MatcherKind,
    count: AtomicU64,
    pool: Option<rayon::ThreadPool>,
}

impl Matcher {
    pub fn patch_match() -> Self {
        Self::new(MatcherKind::PatchMatch)
    }

    pub fn identity_stub() -> Self {
        Self::new(MatcherKind::IdentityStub)
    }

    pub fn new(kind: MatcherKind) -> Self {
        Matcher {
            kind,
            count: AtomicU64::new(0),
            pool: None,
        }
    }

    /// Restricts all estimation work to `workers` threads. The produced
    /// fields do not depend on the worker count.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("worker count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn kind(&self) -> MatcherKind {
        self.kind
    }

    /// Fields produced since construction or the last [`Matcher::reset_count`].
    pub fn nnf_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.count.store(0, Ordering::Relaxed);
    }

    fn install<T>(&self, job: impl FnOnce() -> T + Send) -> T
    where
        T: Send,
    {
        match &self.pool {
            Some(pool) => pool.install(job),
            None => job(),
        }
    }

    /// Runs `job` on this matcher's thread pool (or inline when none is
    /// pinned). Lets callers fan independent estimation jobs out under the
    /// same worker budget.
    pub fn run<T>(&self, job: impl FnOnce() -> T + Send) -> T
    where
        T: Send,
    {
        self.install(job)
    }

    /// Estimates one field; counts one query.
    pub fn estimate(
        &self,
        source: &Frame,
        target: &Frame,
        loss: &LossSpec,
        cfg: &MatchConfig,
    ) -> Result<(Nnf, ErrorMap)> {
        self.count.fetch_add(1, Ordering::Relaxed);
        match self.kind {
            MatcherKind::PatchMatch => self.install(|| estimate::estimate_nnf(source, target, loss, cfg)),
            MatcherKind::IdentityStub => stub_result(source, target, cfg),
        }
    }

    /// Estimates one field per pair with decorrelated seeds; counts one
    /// query per pair.
    pub fn estimate_batch(
        &self,
        pairs: &[(&Frame, &Frame)],
        loss: &LossSpec,
        cfg: &MatchConfig,
    ) -> Result<Vec<(Nnf, ErrorMap)>> {
        self.count.fetch_add(pairs.len() as u64, Ordering::Relaxed);
        match self.kind {
            MatcherKind::PatchMatch => self.install(|| estimate::estimate_nnf_batch(pairs, loss, cfg)),
            MatcherKind::IdentityStub => pairs.iter().map(|(s, t)| stub_result(s, t, cfg)).collect(),
        }
    }

    /// Full-resolution refinement from a warm start, with `extras` injected
    /// as whole-field candidates; counts one query.
    pub(crate) fn refine(
        &self,
        source: &Frame,
        target: &Frame,
        loss: &LossSpec,
        cfg: &MatchConfig,
        init: Nnf,
        extras: &[&Nnf],
    ) -> Result<(Nnf, ErrorMap)> {
        self.count.fetch_add(1, Ordering::Relaxed);
        match self.kind {
            MatcherKind::PatchMatch => self.install(|| estimate::refine_nnf(source, target, loss, cfg, init, extras)),
            MatcherKind::IdentityStub => stub_result(source, target, cfg),
        }
    }

    /// Joint alternating optimization of a keyframe pair; counts two
    /// queries.
    pub(crate) fn optimize_pair(
        &self,
        prob: &PairProblem<'_>,
        cfg: &MatchConfig,
        warm: Option<(Nnf, Nnf)>,
        extras_l: &[&Nnf],
        extras_r: &[&Nnf],
    ) -> Result<(Nnf, Nnf)> {
        self.count.fetch_add(2, Ordering::Relaxed);
        match self.kind {
            MatcherKind::PatchMatch => {
                self.install(|| estimate::optimize_pair(prob, cfg, warm, extras_l, extras_r))
            }
            MatcherKind::IdentityStub => {
                let l = Nnf::identity(prob.guide_target.dims(), prob.guide_l.dims());
                let r = Nnf::identity(prob.guide_target.dims(), prob.guide_r.dims());
                Ok((l, r))
            }
        }
    }
}

fn stub_result(source: &Frame, target: &Frame, cfg: &MatchConfig) -> Result<(Nnf, ErrorMap)> {
    cfg.validate()?;
    let field = Nnf::identity(target.dims(), source.dims());
    let (h, w) = target.dims();
    Ok((field, ErrorMap::new(h, w, vec![0.0; h * w])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(h: usize, w: usize, v: f32) -> Frame {
        Frame::filled(h, w, [v, v, v]).unwrap()
    }

    #[test]
    fn stub_returns_identity_and_counts() {
        let m = Matcher::identity_stub();
        let s = flat(40, 40, 0.25);
        let t = flat(40, 40, 0.75);
        let (f, e) = m.estimate(&s, &t, &LossSpec::Base, &MatchConfig::default()).unwrap();
        assert_eq!(f.get(7, 9), (7, 9));
        assert_eq!(e.get(3, 3), 0.0);
        assert_eq!(m.nnf_count(), 1);
        m.reset_count();
        assert_eq!(m.nnf_count(), 0);
    }

    #[test]
    fn batch_counts_pairs() {
        let m = Matcher::identity_stub();
        let s = flat(40, 40, 0.5);
        let t = flat(40, 40, 0.5);
        let pairs = vec![(&s, &t), (&s, &t), (&s, &t)];
        let out = m.estimate_batch(&pairs, &LossSpec::Base, &MatchConfig::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(m.nnf_count(), 3);
    }
}
