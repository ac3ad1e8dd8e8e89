use std::collections::VecDeque;
use std::sync::Arc;

use super::config::PipelineConfig;
use super::detection::{canonical_key, CascadeStats, Detection, Verifier};
use crate::ctc_search::{is_suppressed_by, CandidateSegment, CandidateTracker, DecodeSession};
use crate::error::{Error, Result};
use crate::matcher::{EnrollmentPrototype, MatcherModel};
use crate::posterior::{EmbeddingMatrix, PosteriorGram};

struct KeywordState {
    session: DecodeSession,
    tracker: CandidateTracker,
    /// Closed candidates waiting for their crop, with the frame it completes at.
    waiting: Vec<(CandidateSegment, usize)>,
    /// Keywords this one is a proper prefix of.
    longer: Vec<usize>,
    suppresses_others: bool,
}

/// Frame-synchronous cascade.
///
/// Detections are released in the same order as [`run_pipeline`](super::run_pipeline)
/// produces them: a detection is held until no keyword can still produce one
/// that sorts before it and, with prefix suppression on, until no longer
/// keyword can still produce an overlapping detection.
pub struct StreamingPipeline<'a> {
    verifier: Verifier<'a>,
    vocab: usize,
    dim: Option<usize>,
    t: usize,
    keywords: Vec<KeywordState>,
    emb: VecDeque<Vec<f64>>,
    /// Frame number of `emb[0]`.
    emb_base: usize,
    held: Vec<Detection>,
    suppressors: Vec<Detection>,
    stats: CascadeStats,
    closed: bool,
}

impl<'a> StreamingPipeline<'a> {
    /// `embed_dim` is required when stage 2 runs and ignored otherwise.
    pub fn new(
        cfg: &'a PipelineConfig,
        model: Option<&'a MatcherModel>,
        protos: &'a [EnrollmentPrototype],
        vocab: usize,
        embed_dim: Option<usize>,
        frame_period: f64,
    ) -> Result<Self> {
        let verifier = Verifier::new(cfg, model, protos, embed_dim, frame_period)?;
        let keywords = cfg
            .keywords
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let session = DecodeSession::new(Arc::new(k.spec.clone()), vocab, cfg.search)?;
                let tokens = k.spec.tokens();
                let longer = cfg
                    .keywords
                    .iter()
                    .enumerate()
                    .filter(|(j, o)| {
                        *j != i
                            && o.spec.tokens().len() > tokens.len()
                            && o.spec.tokens().starts_with(tokens)
                    })
                    .map(|(j, _)| j)
                    .collect();
                let suppresses_others = cfg.keywords.iter().any(|o| {
                    tokens.len() > o.spec.tokens().len() && tokens.starts_with(o.spec.tokens())
                });
                Ok(KeywordState {
                    session,
                    tracker: CandidateTracker::new(k.spec.threshold(), cfg.candidate_options()),
                    waiting: Vec::new(),
                    longer,
                    suppresses_others,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: embed_dim.filter(|_| cfg.stage2_runs()),
            verifier,
            vocab,
            t: 0,
            keywords,
            emb: VecDeque::new(),
            emb_base: 1,
            held: Vec::new(),
            suppressors: Vec::new(),
            stats: CascadeStats::default(),
            closed: false,
        })
    }

    pub fn frames(&self) -> usize {
        self.t
    }

    pub fn stats(&self) -> CascadeStats {
        self.stats
    }

    /// Feeds one frame and returns the detections released by it.
    ///
    /// Any error aborts the stream; later calls fail.
    pub fn push(&mut self, posterior: &[f64], embedding: Option<&[f64]>) -> Result<Vec<Detection>> {
        if self.closed {
            return Err(Error::Config("stream already finished or aborted".into()));
        }
        let result = self.push_inner(posterior, embedding);
        if result.is_err() {
            self.closed = true;
        }
        result
    }

    fn push_inner(&mut self, posterior: &[f64], embedding: Option<&[f64]>) -> Result<Vec<Detection>> {
        let frame_no = self.t + 1;
        if posterior.len() != self.vocab {
            return Err(Error::Dimension(format!(
                "frame {frame_no}: posterior row has {} entries, expected {}",
                posterior.len(),
                self.vocab
            )));
        }
        if let Some(d) = self.dim {
            match embedding {
                Some(row) if row.len() == d => self.emb.push_back(row.to_vec()),
                Some(row) => {
                    return Err(Error::Dimension(format!(
                        "frame {frame_no}: embedding row has {} entries, expected {d}",
                        row.len()
                    )))
                }
                None => {
                    return Err(Error::Dimension(format!(
                        "frame {frame_no}: stage 2 needs an embedding row"
                    )))
                }
            }
        }
        self.t = frame_no;
        self.stats.frames = frame_no;

        for k in 0..self.keywords.len() {
            let state = &mut self.keywords[k];
            let fs = state.session.step(posterior)?;
            if let Some(seg) = state.tracker.push(fs.frame, fs.score, fs.origin) {
                let ready = self.verifier.ready_frame(&seg, fs.frame);
                state.waiting.push((seg, ready));
            }
        }
        self.resolve(false)?;
        let out = self.release(false);
        self.trim();
        Ok(out)
    }

    /// Closes open candidates and releases everything still held.
    pub fn finish(&mut self) -> Result<Vec<Detection>> {
        if self.closed {
            return Err(Error::Config("stream already finished or aborted".into()));
        }
        self.closed = true;
        let t = self.t;
        for state in &mut self.keywords {
            if let Some(seg) = state.tracker.finish() {
                let ready = self.verifier.ready_frame(&seg, t);
                state.waiting.push((seg, ready));
            }
        }
        self.resolve(true)?;
        Ok(self.release(true))
    }

    fn crop(&self, seg: &CandidateSegment) -> EmbeddingMatrix {
        let margin = self.verifier.cfg.crop_margin;
        let first = seg.start_frame.saturating_sub(margin).max(1).min(self.t);
        let last = (seg.end_frame + margin).clamp(first, self.t);
        debug_assert!(first >= self.emb_base, "crop start was trimmed");
        let rows: Vec<Vec<f64>> = (first..=last)
            .map(|f| self.emb[f - self.emb_base].clone())
            .collect();
        EmbeddingMatrix::from_rows(&rows).expect("buffered rows share a dimension")
    }

    fn resolve(&mut self, at_end: bool) -> Result<()> {
        let t = self.t;
        for k in 0..self.keywords.len() {
            let waiting = std::mem::take(&mut self.keywords[k].waiting);
            let (ready, not_ready): (Vec<_>, Vec<_>) =
                waiting.into_iter().partition(|&(_, r)| at_end || r <= t);
            self.keywords[k].waiting = not_ready;
            for (seg, ready_at) in ready {
                let crop = self.dim.map(|_| self.crop(&seg));
                let frame = ready_at.min(t);
                if let Some(d) = self.verifier.decide(k, seg, crop.as_ref(), frame, &mut self.stats)? {
                    if self.keywords[k].suppresses_others {
                        self.suppressors.push(d.clone());
                    }
                    self.held.push(d);
                }
            }
        }
        Ok(())
    }

    /// Lower bound on the start frame of any detection keyword `k` may still emit.
    fn future_start_bound(&self, k: usize) -> usize {
        let state = &self.keywords[k];
        let origin_bound = if state.session.keyword().threshold() > 0.0 {
            state.session.earliest_live_origin()
        } else {
            state.session.origins().iter().skip(1).copied().min().unwrap_or(self.t + 1)
        };
        state
            .waiting
            .iter()
            .map(|(s, _)| s.start_frame)
            .chain(state.tracker.pending().map(|s| s.start_frame))
            .chain([origin_bound, self.t + 1])
            .min()
            .expect("non-empty")
    }

    /// Lower bound on the end frame of any detection keyword `k` may still emit.
    fn future_end_bound(&self, k: usize) -> usize {
        let state = &self.keywords[k];
        state
            .waiting
            .iter()
            .map(|(s, _)| s.end_frame)
            .chain(state.tracker.pending().map(|s| s.end_frame))
            .chain([self.t + 1])
            .min()
            .expect("non-empty")
    }

    fn is_safe(&self, d: &Detection) -> bool {
        let key = (d.segment.end_frame, d.keyword_index);
        let ordered = (0..self.keywords.len()).all(|k| (self.future_end_bound(k), k) > key);
        if !ordered {
            return false;
        }
        !self.verifier.cfg.suppress_prefixes
            || self.keywords[d.keyword_index]
                .longer
                .iter()
                .all(|&k| self.future_start_bound(k) > d.segment.end_frame)
    }

    fn release(&mut self, at_end: bool) -> Vec<Detection> {
        self.held.sort_by_key(canonical_key);
        let mut out = Vec::new();
        let mut released = 0;
        while released < self.held.len() && (at_end || self.is_safe(&self.held[released])) {
            released += 1;
        }
        for d in self.held.drain(..released) {
            let suppressed = self.verifier.cfg.suppress_prefixes
                && self.suppressors.iter().any(|s| is_suppressed_by(&d, s));
            if !suppressed {
                out.push(d);
            }
        }
        self.stats.detections += out.len();
        out
    }

    fn trim(&mut self) {
        let bound = (0..self.keywords.len())
            .map(|k| self.future_start_bound(k))
            .chain(self.held.iter().map(|d| d.segment.start_frame))
            .min()
            .unwrap_or(self.t + 1);
        self.suppressors.retain(|s| s.segment.end_frame >= bound);
        let keep_from = bound.saturating_sub(self.verifier.cfg.crop_margin).max(1);
        while self.emb_base < keep_from && !self.emb.is_empty() {
            self.emb.pop_front();
            self.emb_base += 1;
        }
    }
}

/// Feeds an utterance frame by frame; equals [`run_pipeline`](super::run_pipeline).
pub fn run_streaming(
    p: &PosteriorGram,
    e: Option<&EmbeddingMatrix>,
    cfg: &PipelineConfig,
    model: Option<&MatcherModel>,
    protos: &[EnrollmentPrototype],
) -> Result<(Vec<Detection>, CascadeStats)> {
    if let Some(e) = e {
        if e.frames() != p.frames() {
            return Err(Error::Dimension(format!(
                "{} embedding frames for {} posterior frames",
                e.frames(),
                p.frames()
            )));
        }
    }
    let mut stream = StreamingPipeline::new(
        cfg,
        model,
        protos,
        p.vocab(),
        e.map(EmbeddingMatrix::dim),
        p.frame_period(),
    )?;
    let mut out = Vec::new();
    for (t, row) in p.rows().enumerate() {
        out.extend(stream.push(row, e.map(|e| e.row(t)))?);
    }
    out.extend(stream.finish()?);
    Ok((out, stream.stats()))
}
