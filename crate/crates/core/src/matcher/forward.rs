use super::model::{AttentionBlock, Gru, MatcherModel};
use super::tensor::{dot, sigmoid, softmax_in_place, vec_mat, Matrix};
use crate::ctc_search::CandidateSegment;
use crate::error::{Error, Result};
use crate::phoneme::TokenSequence;
use crate::posterior::{prototype_vector, EmbeddingMatrix};

/// How the enrollment prototype is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrollMode {
    /// Phoneme embeddings only.
    Text,
    /// Phoneme embeddings followed by the reference audio frames.
    Concat,
    /// Phoneme embeddings attending over the reference audio frames.
    CrossAttention,
}

impl std::str::FromStr for EnrollMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(EnrollMode::Text),
            "concat" => Ok(EnrollMode::Concat),
            "cross_attention" | "cross-attention" | "xattn" => Ok(EnrollMode::CrossAttention),
            other => Err(Error::Config(format!("unknown enrollment mode `{other}`"))),
        }
    }
}

/// Fused keyword representation that clips are verified against.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentPrototype {
    pub mode: EnrollMode,
    pub tokens: TokenSequence,
    pub ref_embeddings: Option<EmbeddingMatrix>,
    /// One d-vector per prototype position.
    pub fused: Matrix,
}

impl EnrollmentPrototype {
    /// Text-mode prototype with explicit position vectors.
    pub fn from_vectors(tokens: TokenSequence, fused: Matrix) -> Self {
        Self {
            mode: EnrollMode::Text,
            tokens,
            ref_embeddings: None,
            fused,
        }
    }

    /// Text-mode prototype built from the fixed synthetic phoneme prototypes.
    pub fn analytic(tokens: &TokenSequence, dim: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("tokens to embed"));
        }
        let rows: Vec<Vec<f64>> = tokens.iter().map(|id| prototype_vector(id, dim)).collect();
        Ok(Self::from_vectors(tokens.clone(), Matrix::from_rows(&rows)?))
    }

    pub fn len(&self) -> usize {
        self.fused.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.fused.rows() == 0
    }
}

/// Sinusoidal encoding of position `pos`: `sin` on even, `cos` on odd channels.
pub fn positional_encoding(pos: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Embedding-table rows for `tokens`, in order.
pub fn embed_tokens(tokens: &TokenSequence, model: &MatcherModel) -> Result<Matrix> {
    if tokens.is_empty() {
        return Err(Error::Empty("tokens to embed"));
    }
    let mut out = Matrix::zeros(tokens.len(), model.dim());
    for (i, id) in tokens.iter().enumerate() {
        if id >= model.vocab() {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: model.vocab(),
            });
        }
        out.row_mut(i).copy_from_slice(model.embed.row(id));
    }
    Ok(out)
}

/// Frames `[start − margin, end + margin]` (1-based, inclusive), clamped to the matrix.
pub fn crop_embeddings(e: &EmbeddingMatrix, seg: &CandidateSegment, margin: usize) -> EmbeddingMatrix {
    let total = e.frames();
    if total == 0 {
        return e.clone();
    }
    let first = seg.start_frame.saturating_sub(margin).max(1).min(total);
    let last = (seg.end_frame + margin).clamp(first, total);
    e.slice_rows(first - 1, last)
}

fn matrix_of(e: &EmbeddingMatrix) -> Matrix {
    Matrix::from_vec(e.frames(), e.dim(), e.as_slice().to_vec()).expect("shape matches")
}

/// `softmax(Q·Kᵀ/√d)·V`; also returns the attention weights.
fn attend(q: &Matrix, k: &Matrix, v: &Matrix) -> (Matrix, Matrix) {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut weights = q.matmul(&k.transpose());
    weights.data_mut().iter_mut().for_each(|x| *x *= scale);
    for r in 0..weights.rows() {
        softmax_in_place(weights.row_mut(r));
    }
    (weights.matmul(v), weights)
}

/// Builds the enrollment prototype for `mode`.
pub fn fuse_enrollment(
    mode: EnrollMode,
    tokens: &TokenSequence,
    reference: Option<&EmbeddingMatrix>,
    model: &MatcherModel,
) -> Result<EnrollmentPrototype> {
    let text = embed_tokens(tokens, model)?;
    let d = model.dim();
    let reference = match (mode, reference) {
        (EnrollMode::Text, r) => r,
        (_, None) => {
            return Err(Error::Config(format!(
                "{mode:?} enrollment needs reference audio embeddings"
            )))
        }
        (_, Some(r)) => {
            if r.dim() != d {
                return Err(Error::Dimension(format!(
                    "reference dimension {} does not match model dimension {d}",
                    r.dim()
                )));
            }
            if r.frames() == 0 {
                return Err(Error::Empty("reference embeddings"));
            }
            Some(r)
        }
    };
    let fused = match mode {
        EnrollMode::Text => text,
        EnrollMode::Concat => {
            let r = reference.expect("checked above");
            let mut rows = Vec::with_capacity(text.rows() + r.frames());
            for (i, row) in text.iter_rows().enumerate() {
                let pe = positional_encoding(i, d);
                rows.push(add3(row, &pe, &model.mark_text));
            }
            for (j, row) in r.rows().enumerate() {
                let pe = positional_encoding(j, d);
                rows.push(add3(row, &pe, &model.mark_audio));
            }
            Matrix::from_rows(&rows)?
        }
        EnrollMode::CrossAttention => {
            let r = matrix_of(reference.expect("checked above"));
            let q = text.matmul(&model.xattn.wq);
            let k = r.matmul(&model.xattn.wk);
            let v = r.matmul(&model.xattn.wv);
            attend(&q, &k, &v).0
        }
    };
    Ok(EnrollmentPrototype {
        mode,
        tokens: tokens.clone(),
        ref_embeddings: reference.cloned(),
        fused,
    })
}

fn add3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x + y + z).collect()
}

fn block_forward(x: &Matrix, block: &AttentionBlock) -> (Matrix, Matrix) {
    let q = x.matmul(&block.wq);
    let k = x.matmul(&block.wk);
    let v = x.matmul(&block.wv);
    let (ctx, weights) = attend(&q, &k, &v);
    let mut h = x.clone();
    h.add_scaled(&ctx.matmul(&block.wo), 1.0);

    let mut hidden = h.matmul(&block.ff1);
    for r in 0..hidden.rows() {
        for (v, b) in hidden.row_mut(r).iter_mut().zip(&block.b1) {
            *v = (*v + b).max(0.0);
        }
    }
    let mut ff = hidden.matmul(&block.ff2);
    for r in 0..ff.rows() {
        for (v, b) in ff.row_mut(r).iter_mut().zip(&block.b2) {
            *v += b;
        }
    }
    h.add_scaled(&ff, 1.0);
    (h, weights)
}

fn gru_final_state(x: &Matrix, gru: &Gru) -> Vec<f64> {
    let d = x.cols();
    let mut h = vec![0.0; d];
    for row in x.iter_rows() {
        let gi = vec_mat(row, &gru.w_ih);
        let gh = vec_mat(&h, &gru.w_hh);
        let mut next = vec![0.0; d];
        for j in 0..d {
            let r = sigmoid(gi[j] + gru.b_ih[j] + gh[j] + gru.b_hh[j]);
            let z = sigmoid(gi[d + j] + gru.b_ih[d + j] + gh[d + j] + gru.b_hh[d + j]);
            let n = (gi[2 * d + j] + gru.b_ih[2 * d + j] + r * (gh[2 * d + j] + gru.b_hh[2 * d + j]))
                .tanh();
            next[j] = (1.0 - z) * n + z * h[j];
        }
        h = next;
    }
    h
}

/// Utterance- and position-level match probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MatcherOutput {
    pub p_utt: f64,
    /// One value per prototype position.
    pub p_phon: Vec<f64>,
    /// Attention weights of each block, rows summing to 1.
    pub attention: Vec<Matrix>,
}

/// Runs the matcher on a clip against a prototype.
///
/// The input sequence is the clip frames (plus the audio mark) followed by the
/// prototype positions (plus the text mark), each with a sinusoidal position
/// code. After the attention blocks a GRU pools the whole sequence; its final
/// state gives `p_utt`, and the prototype positions give `p_phon`.
pub fn matcher_forward_traced(
    clip: &EmbeddingMatrix,
    proto: &EnrollmentPrototype,
    model: &MatcherModel,
) -> Result<MatcherOutput> {
    let d = model.dim();
    if clip.dim() != d || proto.fused.cols() != d {
        return Err(Error::Dimension(format!(
            "clip d={} and prototype d={} must equal model d={d}",
            clip.dim(),
            proto.fused.cols()
        )));
    }
    if proto.is_empty() {
        return Err(Error::Empty("enrollment prototype"));
    }
    let n_clip = clip.frames();
    let mut rows = Vec::with_capacity(n_clip + proto.len());
    for (i, row) in clip.rows().enumerate() {
        rows.push(add3(row, &model.mark_audio, &positional_encoding(i, d)));
    }
    for (j, row) in proto.fused.iter_rows().enumerate() {
        rows.push(add3(row, &model.mark_text, &positional_encoding(n_clip + j, d)));
    }
    let mut x = Matrix::from_rows(&rows)?;
    let mut attention = Vec::with_capacity(model.blocks.len());
    for block in &model.blocks {
        let (next, weights) = block_forward(&x, block);
        x = next;
        attention.push(weights);
    }
    let h = gru_final_state(&x, &model.recur);
    let p_utt = sigmoid(dot(&h, &model.head_utt.w) + model.head_utt.b);
    let p_phon = (n_clip..x.rows())
        .map(|r| sigmoid(dot(x.row(r), &model.head_phon.w) + model.head_phon.b))
        .collect();
    Ok(MatcherOutput {
        p_utt,
        p_phon,
        attention,
    })
}

/// `(p_utt, p_phon)` of [`matcher_forward_traced`].
pub fn matcher_forward(
    clip: &EmbeddingMatrix,
    proto: &EnrollmentPrototype,
    model: &MatcherModel,
) -> Result<(f64, Vec<f64>)> {
    let out = matcher_forward_traced(clip, proto, model)?;
    Ok((out.p_utt, out.p_phon))
}
