use super::forward::EnrollmentPrototype;
use super::tensor::{dot, Matrix};
use crate::error::{Error, Result};
use crate::posterior::EmbeddingMatrix;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Clone, Copy)]
struct Cell {
    cost: f64,
    len: usize,
}

impl Cell {
    fn better_than(self, other: Cell) -> bool {
        self.cost < other.cost || (self.cost == other.cost && self.len < other.len)
    }
}

/// Monotonic-alignment score of a clip against the prototype's fused vectors.
///
/// Local cost is `1 − cos`; the path with the least total cost wins (shorter
/// path on ties) and the score is `1 − cost/len`, clamped to `[0, 1]`. Every
/// clip frame and every prototype position is covered at least once.
pub fn prototype_match(clip: &EmbeddingMatrix, proto: &EnrollmentPrototype) -> Result<f64> {
    alignment_score(clip, &proto.fused)
}

pub(crate) fn alignment_score(clip: &EmbeddingMatrix, reference: &Matrix) -> Result<f64> {
    if clip.frames() == 0 || reference.rows() == 0 {
        return Err(Error::Empty("embedding sequence for prototype match"));
    }
    if clip.dim() != reference.cols() {
        return Err(Error::Dimension(format!(
            "clip d={} vs prototype d={}",
            clip.dim(),
            reference.cols()
        )));
    }
    let (n, m) = (clip.frames(), reference.rows());
    let inf = Cell {
        cost: f64::INFINITY,
        len: usize::MAX,
    };
    let mut prev = vec![inf; m];
    let mut cur = vec![inf; m];
    for i in 0..n {
        for j in 0..m {
            let local = 1.0 - cosine(clip.row(i), reference.row(j));
            let best = if i == 0 && j == 0 {
                Cell { cost: 0.0, len: 0 }
            } else {
                let mut best = inf;
                if i > 0 && j > 0 {
                    best = prev[j - 1];
                }
                for cand in [(i > 0).then(|| prev[j]), (j > 0).then(|| cur[j - 1])]
                    .into_iter()
                    .flatten()
                {
                    if cand.better_than(best) {
                        best = cand;
                    }
                }
                best
            };
            cur[j] = Cell {
                cost: best.cost + local,
                len: best.len + 1,
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let end = prev[m - 1];
    Ok((1.0 - end.cost / end.len as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::TokenSequence;
    use proptest::prelude::*;

    fn emb(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn proto(e: &EmbeddingMatrix) -> EnrollmentPrototype {
        let fused = Matrix::from_vec(e.frames(), e.dim(), e.as_slice().to_vec()).unwrap();
        EnrollmentPrototype::from_vectors(TokenSequence::new(vec![1; e.frames()]), fused)
    }

    fn prototype_match(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<f64> {
        super::prototype_match(a, &proto(b))
    }

    #[test]
    fn identical_sequences_score_one() {
        let a = emb(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]]);
        assert!((prototype_match(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stretched_copy_scores_one() {
        let a = emb(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = emb(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], &[0.0, 1.0]]);
        assert!((prototype_match(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_and_opposite() {
        let a = emb(&[&[1.0, 0.0]]);
        assert_eq!(prototype_match(&a, &emb(&[&[0.0, 1.0]])).unwrap(), 0.0);
        assert_eq!(prototype_match(&a, &emb(&[&[-1.0, 0.0]])).unwrap(), 0.0);
        assert_eq!(prototype_match(&a, &emb(&[&[0.0, 0.0]])).unwrap(), 0.0);
    }

    #[test]
    fn single_frame_against_many_takes_average() {
        let a = emb(&[&[1.0, 0.0]]);
        let b = emb(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((prototype_match(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = emb(&[&[1.0, 0.0]]);
        assert!(alignment_score(&a, &Matrix::zeros(0, 2)).is_err());
        assert!(prototype_match(&a, &emb(&[&[1.0, 0.0, 0.0]])).is_err());
    }

    fn brute_force(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> f64 {
        fn walk(a: &EmbeddingMatrix, b: &EmbeddingMatrix, i: usize, j: usize, cost: f64, len: usize, best: &mut (f64, usize)) {
            let cost = cost + 1.0 - cosine(a.row(i), b.row(j));
            let len = len + 1;
            if i + 1 == a.frames() && j + 1 == b.frames() {
                if cost < best.0 || (cost == best.0 && len < best.1) {
                    *best = (cost, len);
                }
                return;
            }
            if i + 1 < a.frames() && j + 1 < b.frames() {
                walk(a, b, i + 1, j + 1, cost, len, best);
            }
            if i + 1 < a.frames() {
                walk(a, b, i + 1, j, cost, len, best);
            }
            if j + 1 < b.frames() {
                walk(a, b, i, j + 1, cost, len, best);
            }
        }
        let mut best = (f64::INFINITY, usize::MAX);
        walk(a, b, 0, 0, 0.0, 0, &mut best);
        (1.0 - best.0 / best.1 as f64).clamp(0.0, 1.0)
    }

    fn seq() -> impl Strategy<Value = EmbeddingMatrix> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..5)
            .prop_map(|rows| EmbeddingMatrix::from_rows(&rows).unwrap())
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(a in seq(), b in seq()) {
            let fast = prototype_match(&a, &b).unwrap();
            let slow = brute_force(&a, &b);
            prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn clip_scale_invariant(a in seq(), b in seq(), lambda in 0.01f64..100.0) {
            let scaled = a.scaled(lambda);
            let x = prototype_match(&a, &b).unwrap();
            let y = prototype_match(&scaled, &b).unwrap();
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
