use serde::Serialize;

use super::config::{PipelineConfig, Stage2Mode};
use crate::ctc_search::{CandidateSegment, PrefixCandidate};
use crate::error::{Error, Result};
use crate::matcher::{matcher_forward, prototype_match, EnrollmentPrototype, MatcherModel};
use crate::phoneme::TokenSequence;
use crate::posterior::EmbeddingMatrix;

/// A keyword decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub keyword: String,
    pub keyword_index: usize,
    pub tokens: TokenSequence,
    pub segment: CandidateSegment,
    pub s1: f64,
    pub s2: Option<f64>,
    pub final_score: f64,
    /// 1-based frame at which the decision was made.
    pub frame: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Serialize)]
struct Record<'a> {
    keyword: &'a str,
    start_frame: usize,
    end_frame: usize,
    start_s: f64,
    end_s: f64,
    s1: f64,
    s2: Option<f64>,
    #[serde(rename = "final")]
    final_score: f64,
}

impl Detection {
    /// One JSON object, no trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Record {
            keyword: &self.keyword,
            start_frame: self.segment.start_frame,
            end_frame: self.segment.end_frame,
            start_s: self.start_s,
            end_s: self.end_s,
            s1: self.s1,
            s2: self.s2,
            final_score: self.final_score,
        })
        .expect("plain struct serializes")
    }
}

impl PrefixCandidate for Detection {
    fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    fn segment(&self) -> &CandidateSegment {
        &self.segment
    }

    fn score(&self) -> f64 {
        self.final_score
    }
}

/// JSON-lines rendering of detections.
pub fn detections_to_jsonl(detections: &[Detection]) -> String {
    detections.iter().map(|d| d.to_json() + "\n").collect()
}

/// Canonical output order: decision end frame, then keyword order.
pub(crate) fn canonical_key(d: &Detection) -> (usize, usize, usize) {
    (d.segment.end_frame, d.keyword_index, d.segment.start_frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CascadeStats {
    pub frames: usize,
    pub stage2_activations: usize,
    pub detections: usize,
    #[serde(skip)]
    pub candidates: usize,
}

impl CascadeStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

/// Stage-2 scoring shared by the batch and streaming pipelines.
pub(crate) struct Verifier<'a> {
    pub cfg: &'a PipelineConfig,
    pub model: Option<&'a MatcherModel>,
    pub protos: &'a [EnrollmentPrototype],
    pub frame_period: f64,
}

impl<'a> Verifier<'a> {
    pub fn new(
        cfg: &'a PipelineConfig,
        model: Option<&'a MatcherModel>,
        protos: &'a [EnrollmentPrototype],
        embed_dim: Option<usize>,
        frame_period: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        match cfg.stage2_mode {
            Stage2Mode::Off => {}
            mode => {
                if mode == Stage2Mode::Learned && model.is_none() {
                    return Err(Error::Config("learned stage 2 needs a matcher model".into()));
                }
                let dim = embed_dim.ok_or_else(|| {
                    Error::Config(format!("{mode:?} stage 2 needs embeddings"))
                })?;
                if protos.len() != cfg.keywords.len() {
                    return Err(Error::Config(format!(
                        "{} enrollment prototypes for {} keywords",
                        protos.len(),
                        cfg.keywords.len()
                    )));
                }
                if let Some(m) = model.filter(|_| mode == Stage2Mode::Learned) {
                    if m.dim() != dim {
                        return Err(Error::Dimension(format!(
                            "embeddings have d={dim}, matcher expects d={}",
                            m.dim()
                        )));
                    }
                }
                if let Some(p) = protos.iter().find(|p| p.fused.cols() != dim) {
                    return Err(Error::Dimension(format!(
                        "prototype has d={}, embeddings have d={dim}",
                        p.fused.cols()
                    )));
                }
            }
        }
        Ok(Self {
            cfg,
            model,
            protos,
            frame_period,
        })
    }

    /// Frame by which the candidate's crop is fully available.
    pub fn ready_frame(&self, seg: &CandidateSegment, closed_at: usize) -> usize {
        if self.cfg.stage2_runs() {
            closed_at.max(seg.end_frame + self.cfg.crop_margin)
        } else {
            closed_at
        }
    }

    /// Scores a candidate; `crop` must be present when stage 2 runs.
    pub fn decide(
        &self,
        k: usize,
        seg: CandidateSegment,
        crop: Option<&EmbeddingMatrix>,
        frame: usize,
        stats: &mut CascadeStats,
    ) -> Result<Option<Detection>> {
        stats.candidates += 1;
        let kw = &self.cfg.keywords[k].spec;
        let s2 = match self.cfg.stage2_mode {
            Stage2Mode::Off => None,
            mode => {
                let crop = crop.expect("crop provided when stage 2 runs");
                stats.stage2_activations += 1;
                let proto = &self.protos[k];
                Some(match mode {
                    Stage2Mode::Learned => {
                        matcher_forward(crop, proto, self.model.expect("checked in new"))?.0
                    }
                    _ => prototype_match(crop, proto)?,
                })
            }
        };
        let (final_score, accepted) = match s2 {
            None => (seg.s1, seg.s1 >= kw.threshold()),
            Some(s2) => {
                let f = if self.cfg.fuse_scores {
                    (seg.s1 * s2).sqrt()
                } else {
                    s2
                };
                (f, f >= self.cfg.keyword_tau2_or_default(k))
            }
        };
        if !accepted {
            return Ok(None);
        }
        Ok(Some(Detection {
            keyword: kw.text().to_string(),
            keyword_index: k,
            tokens: kw.tokens().clone(),
            segment: seg,
            s1: seg.s1,
            s2,
            final_score,
            frame,
            start_s: (seg.start_frame - 1) as f64 * self.frame_period,
            end_s: seg.end_frame as f64 * self.frame_period,
        }))
    }
}
