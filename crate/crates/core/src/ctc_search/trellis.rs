//! Streaming max-product trellis over a blank-interleaved keyword.
//!
//! Frame 1 only initializes the trellis: the leading blank and the first
//! keyword token both start with probability 1 and frame 1's emissions are
//! not multiplied in. From frame 2 on, a blank node takes the best of itself
//! and its left neighbour, a token node additionally the node two to the left,
//! and the frame score is the better of the last token and the trailing blank.

use std::collections::VecDeque;
use std::marker::PhantomData;
use std::sync::Arc;

use super::keyword::KeywordSpec;
use crate::error::{Error, Result};
use crate::posterior::PosteriorGram;

/// Arithmetic used for path scores.
pub trait ScoreDomain: Copy + Default + std::fmt::Debug {
    const ONE: f64;
    const ZERO: f64;
    fn from_prob(p: f64) -> f64;
    fn mul(a: f64, b: f64) -> f64;
    fn to_prob(x: f64) -> f64;
}

/// Log probabilities; path products become sums. Does not underflow on long inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogDomain;

/// Plain probabilities. Bit-exact against a direct product oracle, but underflows.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearDomain;

impl ScoreDomain for LogDomain {
    const ONE: f64 = 0.0;
    const ZERO: f64 = f64::NEG_INFINITY;
    fn from_prob(p: f64) -> f64 {
        p.ln()
    }
    fn mul(a: f64, b: f64) -> f64 {
        a + b
    }
    fn to_prob(x: f64) -> f64 {
        x.exp()
    }
}

impl ScoreDomain for LinearDomain {
    const ONE: f64 = 1.0;
    const ZERO: f64 = 0.0;
    fn from_prob(p: f64) -> f64 {
        p
    }
    fn mul(a: f64, b: f64) -> f64 {
        a * b
    }
    fn to_prob(x: f64) -> f64 {
        x
    }
}

/// Trellis behaviour switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Forbid the two-node skip between identical tokens (standard CTC).
    pub repeat_guard: bool,
    /// Pin the leading-blank node at probability 1 so a keyword may start at
    /// any frame; frame 1 then also pays for the first token's emission.
    pub free_start: bool,
    /// Restart the search after a score run above the keyword threshold ends.
    pub rearm_on_close: bool,
    /// Restart the search when every node's probability is at or below this value.
    pub rearm_floor: f64,
}

impl SearchOptions {
    /// The bare recurrence: no repeat guard, never restarts.
    pub const fn literal() -> Self {
        Self {
            repeat_guard: false,
            free_start: false,
            rearm_on_close: false,
            rearm_floor: -1.0,
        }
    }
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            repeat_guard: false,
            free_start: true,
            rearm_on_close: false,
            rearm_floor: -1.0,
        }
    }
}

/// Score of one frame, with the start frame of the best terminal path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    /// 1-based frame index.
    pub frame: usize,
    /// Linear-domain score in `[0, 1]`.
    pub score: f64,
    /// 1-based frame where the best terminal path entered the first keyword token.
    pub origin: usize,
}

/// Per-keyword streaming search state.
#[derive(Debug, Clone)]
pub struct DecodeSession<D: ScoreDomain = LogDomain> {
    keyword: Arc<KeywordSpec>,
    vocab: usize,
    options: SearchOptions,
    t: usize,
    delta: Vec<f64>,
    origin: Vec<usize>,
    next_delta: Vec<f64>,
    next_origin: Vec<usize>,
    prev_score: f64,
    history: Option<VecDeque<FrameScore>>,
    history_cap: usize,
    _domain: PhantomData<D>,
}

impl<D: ScoreDomain> DecodeSession<D> {
    pub fn new(keyword: Arc<KeywordSpec>, vocab: usize, options: SearchOptions) -> Result<Self> {
        if let Some(&bad) = keyword.interleaved().iter().find(|&&id| id >= vocab) {
            return Err(Error::TokenOutOfRange { id: bad, vocab });
        }
        let n = keyword.interleaved().len();
        Ok(Self {
            keyword,
            vocab,
            options,
            t: 0,
            delta: vec![D::ZERO; n],
            origin: vec![0; n],
            next_delta: vec![D::ZERO; n],
            next_origin: vec![0; n],
            prev_score: 0.0,
            history: None,
            history_cap: 0,
            _domain: PhantomData,
        })
    }

    /// Keeps the last `cap` frame scores.
    pub fn with_history(mut self, cap: usize) -> Self {
        self.history = Some(VecDeque::with_capacity(cap));
        self.history_cap = cap;
        self
    }

    pub fn keyword(&self) -> &Arc<KeywordSpec> {
        &self.keyword
    }

    /// Number of frames consumed.
    pub fn frame(&self) -> usize {
        self.t
    }

    /// Path scores in the session's domain.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Path scores as probabilities.
    pub fn delta_linear(&self) -> Vec<f64> {
        self.delta.iter().map(|&x| D::to_prob(x)).collect()
    }

    pub fn origins(&self) -> &[usize] {
        &self.origin
    }

    pub fn history(&self) -> Option<&VecDeque<FrameScore>> {
        self.history.as_ref()
    }

    /// Earliest start frame among live paths, or the next frame when none is live.
    pub fn earliest_live_origin(&self) -> usize {
        self.delta
            .iter()
            .zip(&self.origin)
            .skip(1)
            .filter(|(d, _)| **d != D::ZERO)
            .map(|(_, &o)| o)
            .min()
            .unwrap_or(self.t + 1)
            .min(self.t + 1)
    }

    fn initialize(&mut self, frame_no: usize, first_token: f64) {
        self.delta.fill(D::ZERO);
        self.delta[0] = D::ONE;
        self.delta[1] = first_token;
        self.origin.fill(frame_no);
    }

    /// Consumes one posterior row and returns its score.
    pub fn step(&mut self, frame: &[f64]) -> Result<FrameScore> {
        if frame.len() != self.vocab {
            return Err(Error::Dimension(format!(
                "frame has {} entries, session expects {}",
                frame.len(),
                self.vocab
            )));
        }
        self.t += 1;
        let t = self.t;
        if t == 1 {
            let first = if self.options.free_start {
                D::from_prob(frame[self.keyword.interleaved()[1]])
            } else {
                D::ONE
            };
            self.initialize(1, first);
            // frame 1 only seeds the trellis and is not scored
            let fs = FrameScore {
                frame: 1,
                score: 0.0,
                origin: 1,
            };
            self.prev_score = 0.0;
            self.record(fs);
            return Ok(fs);
        }

        let labels = self.keyword.interleaved();
        let blank = self.keyword.blank();
        let n = labels.len();
        for u in 0..n {
            let label = labels[u];
            let mut best = self.delta[u];
            let mut best_pred = u;
            // scan predecessors from the largest index down so ties keep the smaller one
            if u >= 1 && self.delta[u - 1] >= best {
                best = self.delta[u - 1];
                best_pred = u - 1;
            }
            if label != blank
                && u >= 2
                && !(self.options.repeat_guard && labels[u - 2] == label)
                && self.delta[u - 2] >= best
            {
                best = self.delta[u - 2];
                best_pred = u - 2;
            }
            self.next_delta[u] = if best == D::ZERO {
                D::ZERO
            } else {
                D::mul(best, D::from_prob(frame[label]))
            };
            self.next_origin[u] = if u == 0 || (u == 1 && best_pred == 0) {
                t
            } else {
                self.origin[best_pred]
            };
        }
        if self.options.free_start {
            self.next_delta[0] = D::ONE;
        }
        std::mem::swap(&mut self.delta, &mut self.next_delta);
        std::mem::swap(&mut self.origin, &mut self.next_origin);

        let (last_tok, last_blank) = (n - 2, n - 1);
        let (best, node) = if self.delta[last_tok] >= self.delta[last_blank] {
            (self.delta[last_tok], last_tok)
        } else {
            (self.delta[last_blank], last_blank)
        };
        let score = D::to_prob(best).clamp(0.0, 1.0);
        let fs = FrameScore {
            frame: t,
            score,
            origin: self.origin[node],
        };

        let threshold = self.keyword.threshold();
        let closed =
            self.options.rearm_on_close && self.prev_score >= threshold && score < threshold;
        let dead = self
            .delta
            .iter()
            .all(|&d| D::to_prob(d) <= self.options.rearm_floor);
        if closed || dead {
            // restart as a fresh search whose first token may begin at this frame
            self.initialize(t, D::from_prob(frame[labels[1]]));
        }
        self.prev_score = score;
        self.record(fs);
        Ok(fs)
    }

    fn record(&mut self, fs: FrameScore) {
        if let Some(h) = self.history.as_mut() {
            if h.len() == self.history_cap {
                h.pop_front();
            }
            if self.history_cap > 0 {
                h.push_back(fs);
            }
        }
    }
}

/// Frame scores and best-path start frames for a whole posteriorgram.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTrace {
    pub scores: Vec<f64>,
    pub origins: Vec<usize>,
}

impl ScoreTrace {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    /// `frame,score,origin` CSV with 1-based frames.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,score,origin\n");
        for (i, (s, o)) in self.scores.iter().zip(&self.origins).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, s, o));
        }
        out
    }
}

/// Runs a fresh session over every frame of `p`.
pub fn score_sequence_in<D: ScoreDomain>(
    p: &PosteriorGram,
    keyword: &KeywordSpec,
    options: SearchOptions,
) -> Result<ScoreTrace> {
    if p.frames() == 0 {
        return Err(Error::Empty("posteriorgram frames"));
    }
    let mut session = DecodeSession::<D>::new(Arc::new(keyword.clone()), p.vocab(), options)?;
    let mut trace = ScoreTrace {
        scores: Vec::with_capacity(p.frames()),
        origins: Vec::with_capacity(p.frames()),
    };
    for row in p.rows() {
        let fs = session.step(row)?;
        trace.scores.push(fs.score);
        trace.origins.push(fs.origin);
    }
    Ok(trace)
}

/// Log-domain [`score_sequence_in`].
pub fn score_sequence(
    p: &PosteriorGram,
    keyword: &KeywordSpec,
    options: SearchOptions,
) -> Result<ScoreTrace> {
    score_sequence_in::<LogDomain>(p, keyword, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw_a() -> Arc<KeywordSpec> {
        Arc::new(KeywordSpec::new("a", vec![1].into(), 0, 0.5).unwrap())
    }

    #[test]
    fn worked_three_frame_example_linear() {
        let mut s = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::literal()).unwrap();
        s.step(&[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(s.delta(), [1.0, 1.0, 0.0]);
        let f2 = s.step(&[0.7, 0.2, 0.1]).unwrap();
        assert_eq!(s.delta(), [0.7, 0.2, 0.7]);
        assert_eq!(f2.score, 0.7);
        let f3 = s.step(&[0.1, 0.8, 0.1]).unwrap();
        let expect = [0.1 * 0.7, 0.8 * 0.7, 0.1 * 0.7];
        assert_eq!(s.delta(), expect);
        assert_eq!(f3.score, 0.8 * 0.7);
        for (x, y) in s.delta().iter().zip([0.07, 0.56, 0.07]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn worked_example_log_domain() {
        let mut s = DecodeSession::<LogDomain>::new(kw_a(), 3, SearchOptions::literal()).unwrap();
        s.step(&[0.2, 0.5, 0.3]).unwrap();
        s.step(&[0.7, 0.2, 0.1]).unwrap();
        let f3 = s.step(&[0.1, 0.8, 0.1]).unwrap();
        assert!((f3.score - 0.56).abs() < 1e-12);
        for (x, y) in s.delta_linear().iter().zip([0.07, 0.56, 0.07]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(s.delta().iter().all(|&d| d <= 0.0));
    }

    #[test]
    fn blank_only_frames_never_raise_token_state() {
        let mut s = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::literal()).unwrap();
        s.step(&[1.0, 0.0, 0.0]).unwrap();
        for _ in 0..20 {
            let fs = s.step(&[1.0, 0.0, 0.0]).unwrap();
            assert_eq!(s.delta()[1], 0.0);
            assert!(fs.score <= 1.0);
        }
    }

    #[test]
    fn vocab_mismatch_is_error() {
        let mut s = DecodeSession::<LogDomain>::new(kw_a(), 3, SearchOptions::default()).unwrap();
        assert!(matches!(s.step(&[1.0, 0.0]), Err(Error::Dimension(_))));
        assert!(DecodeSession::<LogDomain>::new(kw_a(), 1, SearchOptions::default()).is_err());
    }

    #[test]
    fn origin_marks_entry_into_first_token() {
        // blank, blank, a, a, blank
        let rows = [
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ];
        let mut s = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::literal()).unwrap();
        let scores: Vec<FrameScore> = rows.iter().map(|r| s.step(r).unwrap()).collect();
        assert_eq!(scores[2].score, 1.0);
        assert_eq!(scores[2].origin, 3);
        assert_eq!(scores[4].origin, 3);
    }

    #[test]
    fn history_ring_buffer() {
        let mut s = DecodeSession::<LogDomain>::new(kw_a(), 3, SearchOptions::default())
            .unwrap()
            .with_history(2);
        for _ in 0..5 {
            s.step(&[0.5, 0.25, 0.25]).unwrap();
        }
        let h = s.history().unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.back().unwrap().frame, 5);
    }

    #[test]
    fn trace_csv() {
        let p = PosteriorGram::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
        ])
        .unwrap();
        let trace = score_sequence_in::<LinearDomain>(&p, &kw_a(), SearchOptions::literal()).unwrap();
        assert_eq!(trace.scores, [0.0, 0.7, 0.8 * 0.7]);
        assert!(trace.to_csv().starts_with("frame,score,origin\n1,0,1\n2,0.7,"));
        assert!(score_sequence(&PosteriorGram::empty(3), &kw_a(), SearchOptions::default()).is_err());
    }

    #[test]
    fn free_start_finds_keyword_after_speech() {
        // b, b, a, blank with keyword [a]; literal search is killed by the b frames
        let rows = [
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ];
        let mut literal = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::literal()).unwrap();
        let mut free = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::default()).unwrap();
        let lit: Vec<FrameScore> = rows.iter().map(|r| literal.step(r).unwrap()).collect();
        let fre: Vec<FrameScore> = rows.iter().map(|r| free.step(r).unwrap()).collect();
        assert_eq!(lit[2].score, 0.0);
        assert_eq!((fre[2].score, fre[2].origin), (1.0, 3));
        assert_eq!((fre[3].score, fre[3].origin), (1.0, 3));
        assert_eq!(fre[1].score, 0.0);
    }

    #[test]
    fn free_start_charges_first_frame() {
        // a blank at frame 2 must not complete a keyword never spoken
        let mut s = DecodeSession::<LinearDomain>::new(kw_a(), 3, SearchOptions::default()).unwrap();
        s.step(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.step(&[1.0, 0.0, 0.0]).unwrap().score, 0.0);
        assert_eq!(s.earliest_live_origin(), 3);
    }
}
