use super::keyword::expand_with_blanks;
use crate::error::Result;
use crate::phoneme::TokenSequence;
use crate::posterior::PosteriorGram;

/// Outcome of the CTC forward computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardLogProb {
    /// `log P(tokens | posteriors)`, at most 0.
    Feasible(f64),
    /// No alignment of the tokens fits in the available frames.
    Infeasible,
}

impl ForwardLogProb {
    /// The log-probability, `-inf` when infeasible.
    pub fn value(self) -> f64 {
        match self {
            ForwardLogProb::Feasible(v) => v,
            ForwardLogProb::Infeasible => f64::NEG_INFINITY,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, ForwardLogProb::Feasible(_))
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Sum over all frame-level alignments that collapse to `tokens` (standard CTC).
///
/// Unlike the keyword trellis, frame 1 emissions are included and the skip
/// between identical neighbouring tokens is forbidden.
pub fn ctc_forward_logprob(
    p: &PosteriorGram,
    tokens: &TokenSequence,
    blank: usize,
) -> Result<ForwardLogProb> {
    let labels = expand_with_blanks(tokens, blank)?;
    let frames = p.frames();
    if frames < tokens.len() {
        return Ok(ForwardLogProb::Infeasible);
    }
    let n = labels.len();
    let ln = |t: usize, u: usize| p.row(t)[labels[u]].ln();

    let mut alpha = vec![f64::NEG_INFINITY; n];
    alpha[0] = ln(0, 0);
    alpha[1] = ln(0, 1);
    let mut next = vec![f64::NEG_INFINITY; n];
    for t in 1..frames {
        for u in 0..n {
            let mut acc = alpha[u];
            if u >= 1 {
                acc = log_add(acc, alpha[u - 1]);
            }
            if u >= 2 && labels[u] != blank && labels[u] != labels[u - 2] {
                acc = log_add(acc, alpha[u - 2]);
            }
            next[u] = if acc == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                acc + ln(t, u)
            };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let total = log_add(alpha[n - 1], alpha[n - 2]);
    if total == f64::NEG_INFINITY {
        Ok(ForwardLogProb::Infeasible)
    } else {
        Ok(ForwardLogProb::Feasible(total.min(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_frame_single_path() {
        let p = PosteriorGram::from_rows(&[vec![0.1, 0.8, 0.1]]).unwrap();
        let lp = ctc_forward_logprob(&p, &vec![1].into(), 0).unwrap();
        assert!((lp.value() - 0.8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_frames_three_paths() {
        let p = PosteriorGram::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0]]).unwrap();
        let lp = ctc_forward_logprob(&p, &vec![1].into(), 0).unwrap();
        assert!((lp.value().exp() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn too_many_tokens_is_infeasible() {
        let p = PosteriorGram::from_rows(&[vec![0.5, 0.5, 0.0]]).unwrap();
        assert_eq!(
            ctc_forward_logprob(&p, &vec![1, 2].into(), 0).unwrap(),
            ForwardLogProb::Infeasible
        );
        // repeats need a blank between them
        let p2 = PosteriorGram::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(!ctc_forward_logprob(&p2, &vec![1, 1].into(), 0).unwrap().is_feasible());
    }
}
