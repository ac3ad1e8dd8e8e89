use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::phoneme::TokenSequence;

/// Default cap on a candidate's length in frames.
pub const DEFAULT_MAX_SEGMENT: usize = 400;

/// A stage-1 hit: 1-based inclusive frame range and its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSegment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub s1: f64,
}

impl CandidateSegment {
    pub fn len(&self) -> usize {
        self.end_frame + 1 - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame < self.start_frame
    }

    pub fn overlaps(&self, other: &CandidateSegment) -> bool {
        self.start_frame <= other.end_frame && other.start_frame <= self.end_frame
    }
}

/// How score runs become candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateOptions {
    /// Runs separated by fewer than this many sub-threshold frames are merged.
    pub min_gap: usize,
    /// A run is closed once it spans this many frames.
    pub max_len: usize,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            min_gap: 0,
            max_len: DEFAULT_MAX_SEGMENT,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenRun {
    start: usize,
    best_frame: usize,
    best_score: f64,
    best_origin: usize,
    /// consecutive sub-threshold frames since the run last crossed
    gap: usize,
}

impl OpenRun {
    fn segment(&self) -> CandidateSegment {
        CandidateSegment {
            start_frame: self.best_origin.min(self.best_frame),
            end_frame: self.best_frame,
            s1: self.best_score,
        }
    }
}

/// Incremental run detector over a frame-score stream.
///
/// Batch extraction feeds every frame through the same state machine, so
/// streaming and batch candidates agree exactly.
#[derive(Debug, Clone)]
pub struct CandidateTracker {
    threshold: f64,
    options: CandidateOptions,
    open: Option<OpenRun>,
}

impl CandidateTracker {
    pub fn new(threshold: f64, options: CandidateOptions) -> Self {
        Self {
            threshold,
            options: CandidateOptions {
                max_len: options.max_len.max(1),
                ..options
            },
            open: None,
        }
    }

    /// Feeds 1-based frame `frame`; returns a candidate when one closes.
    pub fn push(&mut self, frame: usize, score: f64, origin: usize) -> Option<CandidateSegment> {
        let above = score >= self.threshold;
        match self.open.as_mut() {
            None => {
                if above {
                    self.open = Some(OpenRun {
                        start: frame,
                        best_frame: frame,
                        best_score: score,
                        best_origin: origin,
                        gap: 0,
                    });
                    return self.close_if_full(frame);
                }
                None
            }
            Some(run) => {
                if above {
                    run.gap = 0;
                    if score > run.best_score {
                        run.best_frame = frame;
                        run.best_score = score;
                        run.best_origin = origin;
                    }
                    self.close_if_full(frame)
                } else {
                    run.gap += 1;
                    if run.gap >= self.options.min_gap.max(1) {
                        return self.open.take().map(|r| r.segment());
                    }
                    self.close_if_full(frame)
                }
            }
        }
    }

    fn close_if_full(&mut self, frame: usize) -> Option<CandidateSegment> {
        let run = self.open.as_ref()?;
        if frame + 1 - run.start >= self.options.max_len {
            self.open.take().map(|r| r.segment())
        } else {
            None
        }
    }

    /// Closes any open run at end of input.
    pub fn finish(&mut self) -> Option<CandidateSegment> {
        self.open.take().map(|r| r.segment())
    }

    /// Segment the open run would yield if closed now.
    pub fn pending(&self) -> Option<CandidateSegment> {
        self.open.as_ref().map(OpenRun::segment)
    }

    /// First frame of the open run.
    pub fn open_run_start(&self) -> Option<usize> {
        self.open.as_ref().map(|r| r.start)
    }
}

/// Candidates from maximal runs of `scores >= threshold`.
///
/// Each run ends at its highest-scoring frame (earliest on ties) and starts at
/// that frame's origin. Frames are 1-based; `scores[0]` is frame 1.
pub fn extract_candidates(
    scores: &[f64],
    origins: &[usize],
    threshold: f64,
    options: CandidateOptions,
) -> Vec<CandidateSegment> {
    assert_eq!(scores.len(), origins.len(), "scores and origins differ in length");
    let mut tracker = CandidateTracker::new(threshold, options);
    let mut out: Vec<CandidateSegment> = scores
        .iter()
        .zip(origins)
        .enumerate()
        .filter_map(|(i, (&s, &o))| tracker.push(i + 1, s, o))
        .collect();
    out.extend(tracker.finish());
    out
}

/// What [`suppress_prefix`] needs from a detection.
pub trait PrefixCandidate {
    fn tokens(&self) -> &TokenSequence;
    fn segment(&self) -> &CandidateSegment;
    fn score(&self) -> f64;
}

/// True when `short`'s keyword is a proper prefix of `long`'s, their segments
/// overlap, and `long` scores strictly higher.
pub fn is_suppressed_by<T: PrefixCandidate + ?Sized, U: PrefixCandidate + ?Sized>(
    short: &T,
    long: &U,
) -> bool {
    long.tokens().len() > short.tokens().len()
        && long.tokens().starts_with(short.tokens())
        && long.segment().overlaps(short.segment())
        && long.score() > short.score()
}

/// Drops a shorter keyword's detection when an overlapping detection of a
/// longer keyword it prefixes has a strictly higher score.
pub fn suppress_prefix<T: PrefixCandidate + Clone>(detections: &[T]) -> Vec<T> {
    detections
        .iter()
        .filter(|d| !detections.iter().any(|other| is_suppressed_by(*d, other)))
        .cloned()
        .collect()
}

/// Moves both ends by the given frame offsets, clamped to `[1, total_frames]`
/// with the start never after the end.
pub fn shift_segment(
    segment: &CandidateSegment,
    start_shift: i64,
    end_shift: i64,
    total_frames: usize,
) -> CandidateSegment {
    let total = total_frames.max(1) as i64;
    let end = (segment.end_frame as i64 + end_shift).clamp(1, total);
    let start = (segment.start_frame as i64 + start_shift).clamp(1, total).min(end);
    CandidateSegment {
        start_frame: start as usize,
        end_frame: end as usize,
        s1: segment.s1,
    }
}

/// Shifts each end by an independent uniform draw in `±fraction·len`, rounded.
pub fn perturb_timestamps(
    segment: &CandidateSegment,
    fraction: f64,
    total_frames: usize,
    seed: u64,
) -> CandidateSegment {
    let fraction = fraction.clamp(0.0, 1.0);
    let reach = fraction * segment.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        if reach > 0.0 {
            rng.gen_range(-reach..=reach).round() as i64
        } else {
            0
        }
    };
    let ds = draw();
    let de = draw();
    shift_segment(segment, ds, de, total_frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: usize, end: usize, s1: f64) -> CandidateSegment {
        CandidateSegment {
            start_frame: start,
            end_frame: end,
            s1,
        }
    }

    #[test]
    fn single_run() {
        let c = extract_candidates(&[0.1, 0.7, 0.9, 0.3], &[1, 1, 1, 3], 0.5, Default::default());
        assert_eq!(c, [seg(1, 3, 0.9)]);
    }

    #[test]
    fn nothing_crosses() {
        assert!(extract_candidates(&[0.1, 0.2], &[1, 1], 0.5, Default::default()).is_empty());
    }

    #[test]
    fn gap_merging() {
        let scores = [0.9, 0.1, 0.1, 0.8, 0.1];
        let origins = [1, 1, 1, 4, 4];
        let two = extract_candidates(
            &scores,
            &origins,
            0.5,
            CandidateOptions {
                min_gap: 2,
                max_len: 400,
            },
        );
        assert_eq!(two, [seg(1, 1, 0.9), seg(4, 4, 0.8)]);
        let merged = extract_candidates(
            &scores,
            &origins,
            0.5,
            CandidateOptions {
                min_gap: 3,
                max_len: 400,
            },
        );
        assert_eq!(merged, [seg(1, 1, 0.9)]);
    }

    #[test]
    fn ties_pick_earliest_and_run_reaches_end() {
        let c = extract_candidates(&[0.6, 0.6, 0.6], &[1, 1, 2], 0.5, Default::default());
        assert_eq!(c, [seg(1, 1, 0.6)]);
    }

    #[test]
    fn length_cap_splits() {
        let c = extract_candidates(
            &[0.6, 0.7, 0.6, 0.8],
            &[1, 1, 1, 1],
            0.5,
            CandidateOptions {
                min_gap: 0,
                max_len: 2,
            },
        );
        assert_eq!(c, [seg(1, 2, 0.7), seg(1, 4, 0.8)]);
    }

    #[derive(Clone, Debug, PartialEq)]
    struct Hit(TokenSequence, CandidateSegment, f64);

    impl PrefixCandidate for Hit {
        fn tokens(&self) -> &TokenSequence {
            &self.0
        }
        fn segment(&self) -> &CandidateSegment {
            &self.1
        }
        fn score(&self) -> f64 {
            self.2
        }
    }

    #[test]
    fn prefix_suppression_rules() {
        let rain = TokenSequence::new(vec![1, 2, 3]);
        let rainbow = TokenSequence::new(vec![1, 2, 3, 4, 5]);
        let a = Hit(rain.clone(), seg(10, 40, 0.8), 0.8);
        let b = Hit(rainbow.clone(), seg(10, 70, 0.9), 0.9);
        assert_eq!(suppress_prefix(&[a.clone(), b.clone()]), std::slice::from_ref(&b));

        let a_hi = Hit(rain.clone(), seg(10, 40, 0.95), 0.95);
        assert_eq!(suppress_prefix(&[a_hi.clone(), b.clone()]).len(), 2);

        let far = Hit(rainbow, seg(100, 170, 0.9), 0.9);
        assert_eq!(suppress_prefix(&[a.clone(), far]).len(), 2);

        let once = suppress_prefix(&[a, b, a_hi]);
        assert_eq!(suppress_prefix(&once), once);
    }

    #[test]
    fn timestamp_perturbation() {
        let s = seg(5, 14, 0.7);
        assert_eq!(perturb_timestamps(&s, 0.0, 100, 3), s);
        assert_eq!(perturb_timestamps(&s, 0.5, 100, 9), perturb_timestamps(&s, 0.5, 100, 9));
        // extreme draws for fraction 1 and length 10
        assert_eq!(shift_segment(&s, -10, 10, 100), seg(1, 24, 0.7));
        assert_eq!(shift_segment(&s, 10, -10, 100), seg(4, 4, 0.7));
        assert_eq!(shift_segment(&s, 0, 10, 20), seg(5, 20, 0.7));
        for seed in 0..200 {
            let p = perturb_timestamps(&s, 1.0, 30, seed);
            assert!(1 <= p.start_frame && p.start_frame <= p.end_frame && p.end_frame <= 30);
            assert!(p.start_frame as i64 >= 5 - 10 && p.end_frame <= 24);
        }
    }
}
