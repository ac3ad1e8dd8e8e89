use rand::Rng;

use super::inventory::TokenSequence;
use crate::error::{Error, Result};

/// Substitution/insertion/deletion counts of a minimal alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Unit-cost Levenshtein alignment of `hyp` against `reference`.
///
/// When several alignments share the minimal cost the backtrace prefers a
/// diagonal step (match or substitution), then an insertion, then a deletion.
pub fn edit_distance(reference: &[usize], hyp: &[usize]) -> EditCounts {
    let n = reference.len();
    let m = hyp.len();
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for (j, c) in cost.iter_mut().take(width).enumerate() {
        *c = j;
    }
    for i in 1..=n {
        cost[i * width] = i;
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let ins = cost[i * width + j - 1] + 1;
            let del = cost[(i - 1) * width + j] + 1;
            cost[i * width + j] = diag.min(ins).min(del);
        }
    }

    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if cost[(i - 1) * width + j - 1] + usize::from(!same) == here {
                if !same {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && cost[i * width + j - 1] + 1 == here {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// Corpus-level phoneme error rate: total edits over total reference length.
pub fn p_wer(pairs: &[(TokenSequence, TokenSequence)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("p_wer pairs"));
    }
    let (edits, ref_len) = pairs.iter().fold((0usize, 0usize), |(e, n), (r, h)| {
        (e + edit_distance(r.ids(), h.ids()).total(), n + r.len())
    });
    if ref_len == 0 {
        return Err(Error::Empty("p_wer reference tokens"));
    }
    Ok(edits as f64 / ref_len as f64)
}

/// True when `needle` occurs in `hay` as a contiguous run.
pub fn contains_run(hay: &[usize], needle: &[usize]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

/// A confusable of `tokens`: exactly `k` edits away and not containing
/// `tokens` as a contiguous run. Inserted and substituted symbols are drawn
/// from `symbols`.
pub fn hard_negative<R: Rng + ?Sized>(
    tokens: &TokenSequence,
    k: usize,
    symbols: &[usize],
    rng: &mut R,
) -> Result<TokenSequence> {
    if k == 0 {
        return Err(Error::OutOfRange("hard negatives need at least one edit".into()));
    }
    if symbols.len() < 2 {
        return Err(Error::OutOfRange("need at least two symbols to draw edits from".into()));
    }
    for _ in 0..10_000 {
        let mut seq = tokens.ids().to_vec();
        for _ in 0..k {
            match rng.gen_range(0..3) {
                0 if !seq.is_empty() => {
                    let i = rng.gen_range(0..seq.len());
                    seq[i] = symbols[rng.gen_range(0..symbols.len())];
                }
                1 if seq.len() > 1 => {
                    seq.remove(rng.gen_range(0..seq.len()));
                }
                _ => {
                    let i = rng.gen_range(0..=seq.len());
                    seq.insert(i, symbols[rng.gen_range(0..symbols.len())]);
                }
            }
        }
        if edit_distance(tokens.ids(), &seq).total() == k && !contains_run(&seq, tokens.ids()) {
            return Ok(TokenSequence::new(seq));
        }
    }
    Err(Error::OutOfRange(format!(
        "no sequence at exactly {k} edits from {tokens} found"
    )))
}
