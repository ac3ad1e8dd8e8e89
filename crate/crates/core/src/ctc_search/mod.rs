//! Stage-1 keyword search: the streaming CTC trellis, candidate extraction,
//! the CTC forward probability, and detection post-processing.

mod candidates;
mod forward;
mod keyword;
mod trellis;

pub use candidates::{
    extract_candidates, is_suppressed_by, perturb_timestamps, shift_segment, suppress_prefix,
    CandidateOptions, CandidateSegment, CandidateTracker, PrefixCandidate, DEFAULT_MAX_SEGMENT,
};
pub use forward::{ctc_forward_logprob, ForwardLogProb};
pub use keyword::{
    expand_with_blanks, parse_keyword_config, KeywordEntry, KeywordSpec,
    DEFAULT_STAGE1_THRESHOLD,
};
pub use trellis::{
    score_sequence, score_sequence_in, DecodeSession, FrameScore, LinearDomain, LogDomain,
    ScoreDomain, ScoreTrace, SearchOptions,
};
