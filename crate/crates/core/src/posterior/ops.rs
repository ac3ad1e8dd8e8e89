use super::gram::PosteriorGram;
use crate::error::{Error, Result};
use crate::phoneme::{PhonemeInventory, TokenSequence};

/// Interpolates every row with the uniform distribution: `(1-α)·row + α/V`.
pub fn perturb_uniform(p: &PosteriorGram, alpha: f64) -> Result<PosteriorGram> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha {alpha} not in [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(p.clone());
    }
    let uniform = alpha / p.vocab() as f64;
    let probs = p
        .as_slice()
        .iter()
        .map(|&x| (1.0 - alpha) * x + uniform)
        .collect();
    Ok(PosteriorGram::from_parts_unchecked(p.frames(), p.vocab(), probs)
        .with_frame_period(p.frame_period()))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Collapses repeats and drops blanks from a frame-level label path.
pub fn ctc_collapse(path: impl IntoIterator<Item = usize>, blank: usize) -> TokenSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for id in path {
        if Some(id) != prev && id != blank {
            out.push(id);
        }
        prev = Some(id);
    }
    TokenSequence::new(out)
}

/// Best-path decoding: per-frame argmax, then CTC collapse.
pub fn greedy_decode(p: &PosteriorGram, inventory: &PhonemeInventory) -> TokenSequence {
    ctc_collapse(p.rows().map(argmax), inventory.blank_id())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::synth::{synth, SynthSpec};
    use proptest::prelude::*;

    fn one_hot_path(path: &[usize], vocab: usize) -> PosteriorGram {
        let rows: Vec<Vec<f64>> = path
            .iter()
            .map(|&i| {
                let mut r = vec![0.0; vocab];
                r[i] = 1.0;
                r
            })
            .collect();
        PosteriorGram::from_rows(&rows).unwrap()
    }

    fn small_inventory() -> PhonemeInventory {
        PhonemeInventory::parse("<blk>\na\nb\n").unwrap()
    }

    #[test]
    fn collapse_examples() {
        let inv = small_inventory();
        assert_eq!(greedy_decode(&one_hot_path(&[0, 1, 1, 0, 2], 3), &inv).ids(), [1, 2]);
        assert!(greedy_decode(&one_hot_path(&[0, 0, 0], 3), &inv).is_empty());
        assert_eq!(greedy_decode(&one_hot_path(&[1, 0, 1], 3), &inv).ids(), [1, 1]);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.25, 0.5, 0.25]), 1);
        assert_eq!(argmax(&[0.4, 0.2, 0.4]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn perturb_examples() {
        let p = PosteriorGram::from_rows(&[vec![0.8, 0.2]]).unwrap();
        assert_eq!(perturb_uniform(&p, 0.0).unwrap(), p);
        let q = perturb_uniform(&p, 0.5).unwrap();
        assert!((q.row(0)[0] - 0.65).abs() < 1e-15);
        assert!((q.row(0)[1] - 0.35).abs() < 1e-15);
        let u = perturb_uniform(&p, 1.0).unwrap();
        assert_eq!(u.row(0), [0.5, 0.5]);
        assert!(perturb_uniform(&p, 1.5).is_err());
        assert!(perturb_uniform(&p, -0.1).is_err());
    }

    fn random_gram() -> impl Strategy<Value = PosteriorGram> {
        (1usize..6, 2usize..7).prop_flat_map(|(t, v)| {
            prop::collection::vec(0.001f64..1.0, t * v).prop_map(move |raw| {
                let rows: Vec<Vec<f64>> = raw
                    .chunks(v)
                    .map(|c| {
                        let s: f64 = c.iter().sum();
                        c.iter().map(|x| x / s).collect()
                    })
                    .collect();
                PosteriorGram::from_rows(&rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn perturb_keeps_rows_stochastic(p in random_gram(), a in 0.0f64..=1.0) {
            let q = perturb_uniform(&p, a).unwrap();
            for row in q.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn perturb_composes_affinely(p in random_gram(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let twice = perturb_uniform(&perturb_uniform(&p, a).unwrap(), b).unwrap();
            let once = perturb_uniform(&p, a + b - a * b).unwrap();
            for (x, y) in twice.as_slice().iter().zip(once.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn clean_synth_decodes_to_its_tokens(
            tokens in prop::collection::vec(1usize..71, 1..8),
            fpt in 1usize..5,
            blanks in 0usize..3,
            pad in 0usize..3,
        ) {
            let inv = PhonemeInventory::default();
            let spec = SynthSpec::new(TokenSequence::new(tokens.clone()))
                .frames_per_token(fpt)
                .blank_frames(blanks)
                .pad_frames(pad);
            let (p, _) = synth(&spec, &inv).unwrap();
            let decoded = greedy_decode(&p, &inv);
            prop_assert_eq!(decoded.ids(), tokens.as_slice());
        }
    }
}
