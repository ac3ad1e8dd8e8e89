use super::config::PipelineConfig;
use super::detection::{canonical_key, CascadeStats, Detection, Verifier};
use crate::ctc_search::{score_sequence, suppress_prefix, CandidateTracker};
use crate::error::{Error, Result};
use crate::matcher::{crop_embeddings, EnrollmentPrototype, MatcherModel};
use crate::posterior::{EmbeddingMatrix, PosteriorGram};

/// Runs both stages over a whole utterance.
///
/// Detections come out ordered by end frame, then keyword order.
pub fn run_pipeline(
    p: &PosteriorGram,
    e: Option<&EmbeddingMatrix>,
    cfg: &PipelineConfig,
    model: Option<&MatcherModel>,
    protos: &[EnrollmentPrototype],
) -> Result<(Vec<Detection>, CascadeStats)> {
    let verifier = Verifier::new(cfg, model, protos, e.map(EmbeddingMatrix::dim), p.frame_period())?;
    if let Some(e) = e {
        if e.frames() != p.frames() {
            return Err(Error::Dimension(format!(
                "{} embedding frames for {} posterior frames",
                e.frames(),
                p.frames()
            )));
        }
    }
    let total = p.frames();
    let mut stats = CascadeStats {
        frames: total,
        ..CascadeStats::default()
    };
    if total == 0 {
        return Ok((Vec::new(), stats));
    }

    let mut accepted = Vec::new();
    for (k, kw) in cfg.keywords.iter().enumerate() {
        let trace = score_sequence(p, &kw.spec, cfg.search)?;
        let mut tracker = CandidateTracker::new(kw.spec.threshold(), cfg.candidate_options());
        let mut closed = Vec::new();
        for (i, (&score, &origin)) in trace.scores.iter().zip(&trace.origins).enumerate() {
            if let Some(seg) = tracker.push(i + 1, score, origin) {
                closed.push((seg, i + 1));
            }
        }
        closed.extend(tracker.finish().map(|seg| (seg, total)));

        for (seg, closed_at) in closed {
            let frame = verifier.ready_frame(&seg, closed_at).min(total);
            let crop = e
                .filter(|_| cfg.stage2_runs())
                .map(|e| crop_embeddings(e, &seg, cfg.crop_margin));
            if let Some(d) = verifier.decide(k, seg, crop.as_ref(), frame, &mut stats)? {
                accepted.push(d);
            }
        }
    }

    let mut out = if cfg.suppress_prefixes {
        suppress_prefix(&accepted)
    } else {
        accepted
    };
    out.sort_by_key(canonical_key);
    stats.detections = out.len();
    Ok((out, stats))
}
