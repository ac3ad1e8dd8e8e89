use serde::{Deserialize, Serialize};

use crate::ctc_search::{CandidateOptions, KeywordSpec, SearchOptions, DEFAULT_MAX_SEGMENT};
use crate::error::{Error, Result};
use crate::matcher::{fuse_enrollment, EnrollMode, EnrollmentPrototype, MatcherModel};
use crate::posterior::EmbeddingMatrix;

/// Stage-2 decision threshold used unless overridden.
pub const DEFAULT_STAGE2_THRESHOLD: f64 = 0.5;

/// Frames added on each side of a candidate before stage 2.
pub const DEFAULT_CROP_MARGIN: usize = 2;

/// How candidates are verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Mode {
    /// The matcher network's utterance probability.
    Learned,
    /// Alignment score against the enrollment prototype.
    Prototype,
    /// Stage-1 decisions only.
    Off,
}

impl std::str::FromStr for Stage2Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(Stage2Mode::Learned),
            "prototype" => Ok(Stage2Mode::Prototype),
            "off" => Ok(Stage2Mode::Off),
            other => Err(Error::Config(format!("unknown stage-2 mode `{other}`"))),
        }
    }
}

/// A keyword with an optional per-keyword stage-2 threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineKeyword {
    pub spec: KeywordSpec,
    pub tau2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub keywords: Vec<PipelineKeyword>,
    pub tau2: f64,
    pub stage2_mode: Stage2Mode,
    pub enroll_mode: EnrollMode,
    /// Extra frames kept on each side of a candidate for stage 2.
    pub crop_margin: usize,
    pub min_gap: usize,
    pub max_len: usize,
    pub suppress_prefixes: bool,
    /// Use `√(s1·s2)` instead of `s2` as the final score.
    pub fuse_scores: bool,
    pub search: SearchOptions,
}

impl PipelineConfig {
    pub fn new(keywords: Vec<KeywordSpec>) -> Self {
        Self {
            keywords: keywords
                .into_iter()
                .map(|spec| PipelineKeyword { spec, tau2: None })
                .collect(),
            tau2: DEFAULT_STAGE2_THRESHOLD,
            stage2_mode: Stage2Mode::Prototype,
            enroll_mode: EnrollMode::Text,
            crop_margin: DEFAULT_CROP_MARGIN,
            min_gap: 0,
            max_len: DEFAULT_MAX_SEGMENT,
            suppress_prefixes: true,
            fuse_scores: false,
            search: SearchOptions::default(),
        }
    }

    pub fn stage2_mode(mut self, mode: Stage2Mode) -> Self {
        self.stage2_mode = mode;
        self
    }

    pub fn enroll_mode(mut self, mode: EnrollMode) -> Self {
        self.enroll_mode = mode;
        self
    }

    pub fn tau2(mut self, tau2: f64) -> Self {
        self.tau2 = tau2;
        self
    }

    pub fn crop_margin(mut self, frames: usize) -> Self {
        self.crop_margin = frames;
        self
    }

    pub fn min_gap(mut self, frames: usize) -> Self {
        self.min_gap = frames;
        self
    }

    pub fn max_len(mut self, frames: usize) -> Self {
        self.max_len = frames;
        self
    }

    pub fn suppress_prefixes(mut self, on: bool) -> Self {
        self.suppress_prefixes = on;
        self
    }

    pub fn fuse_scores(mut self, on: bool) -> Self {
        self.fuse_scores = on;
        self
    }

    pub fn search(mut self, options: SearchOptions) -> Self {
        self.search = options;
        self
    }

    /// Sets the stage-2 threshold of keyword `index`.
    pub fn keyword_tau2(mut self, index: usize, tau2: f64) -> Self {
        if let Some(k) = self.keywords.get_mut(index) {
            k.tau2 = Some(tau2);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::Config("at least one keyword is required".into()));
        }
        let check = |what: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {v} not in [0, 1]")))
            }
        };
        check("stage-2 threshold", self.tau2)?;
        for k in &self.keywords {
            if let Some(t) = k.tau2 {
                check(&format!("stage-2 threshold of `{}`", k.spec.text()), t)?;
            }
        }
        if self.max_len == 0 {
            return Err(Error::Config("max segment length must be positive".into()));
        }
        Ok(())
    }

    pub fn keyword_tau2_or_default(&self, index: usize) -> f64 {
        self.keywords[index].tau2.unwrap_or(self.tau2)
    }

    pub fn candidate_options(&self) -> CandidateOptions {
        CandidateOptions {
            min_gap: self.min_gap,
            max_len: self.max_len,
        }
    }

    pub(crate) fn stage2_runs(&self) -> bool {
        self.stage2_mode != Stage2Mode::Off
    }
}

/// Enrollment prototypes for every keyword of `cfg`.
///
/// Learned mode fuses with the model in the configured enrollment mode. The
/// prototype scorer uses the model's embeddings when a model is given and the
/// fixed synthetic phoneme prototypes otherwise; audio fusion modes always need
/// the model. `references` is indexed like the keywords.
pub fn prepare_prototypes(
    cfg: &PipelineConfig,
    model: Option<&MatcherModel>,
    references: &[Option<EmbeddingMatrix>],
    dim: usize,
) -> Result<Vec<EnrollmentPrototype>> {
    if !references.is_empty() && references.len() != cfg.keywords.len() {
        return Err(Error::Config(format!(
            "{} reference embeddings for {} keywords",
            references.len(),
            cfg.keywords.len()
        )));
    }
    if cfg.stage2_mode == Stage2Mode::Off {
        return Ok(Vec::new());
    }
    cfg.keywords
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let reference = references.get(i).and_then(Option::as_ref);
            match (cfg.stage2_mode, model) {
                (_, Some(m)) => fuse_enrollment(cfg.enroll_mode, k.spec.tokens(), reference, m),
                (Stage2Mode::Prototype, None) if cfg.enroll_mode == EnrollMode::Text => {
                    EnrollmentPrototype::analytic(k.spec.tokens(), dim)
                }
                _ => Err(Error::Config(format!(
                    "{:?} stage 2 with {:?} enrollment needs a matcher model",
                    cfg.stage2_mode, cfg.enroll_mode
                ))),
            }
        })
        .collect()
}
