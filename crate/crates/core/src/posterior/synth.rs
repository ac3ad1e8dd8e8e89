use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gram::{EmbeddingMatrix, PosteriorGram};
use crate::error::{Error, Result};
use crate::phoneme::{PhonemeInventory, TokenSequence};

/// Desk-scale embedding dimension.
pub const DEFAULT_EMBED_DIM: usize = 16;

const PROTOTYPE_SEED: u64 = 0x6b77_7370_726f_746f;

/// Parameters of a synthetic keyword utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tokens: TokenSequence,
    pub frames_per_token: usize,
    /// Blank frames between consecutive tokens. Identical neighbours always get at least one.
    pub blank_frames: usize,
    /// Blank frames before the first and after the last token.
    pub pad_frames: usize,
    /// Interpolation weight towards the uniform distribution, and embedding noise amplitude.
    pub alpha: f64,
    pub seed: u64,
    pub dim: usize,
}

impl SynthSpec {
    pub fn new(tokens: TokenSequence) -> Self {
        Self {
            tokens,
            frames_per_token: 1,
            blank_frames: 0,
            pad_frames: 0,
            alpha: 0.0,
            seed: 0,
            dim: DEFAULT_EMBED_DIM,
        }
    }

    pub fn frames_per_token(mut self, n: usize) -> Self {
        self.frames_per_token = n;
        self
    }

    pub fn blank_frames(mut self, n: usize) -> Self {
        self.blank_frames = n;
        self
    }

    pub fn pad_frames(mut self, n: usize) -> Self {
        self.pad_frames = n;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    fn validate(&self, inventory: &PhonemeInventory) -> Result<()> {
        if self.frames_per_token == 0 {
            return Err(Error::OutOfRange("frames_per_token must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::OutOfRange(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if self.dim == 0 {
            return Err(Error::Dimension("embedding dimension must be positive".into()));
        }
        inventory.validate_target(&self.tokens)
    }

    /// Per-frame label ids of the synthesized utterance.
    pub fn frame_labels(&self, blank: usize) -> Vec<usize> {
        let mut labels = vec![blank; self.pad_frames];
        let ids = self.tokens.ids();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                let gap = if ids[i - 1] == id {
                    self.blank_frames.max(1)
                } else {
                    self.blank_frames
                };
                labels.extend(std::iter::repeat_n(blank, gap));
            }
            labels.extend(std::iter::repeat_n(id, self.frames_per_token));
        }
        labels.extend(std::iter::repeat_n(blank, self.pad_frames));
        labels
    }
}

/// Unit prototype embedding of token `id` in `dim` dimensions.
///
/// One-hot at `id` when `id < dim`. Larger ids, which a one-hot cannot
/// represent, get a fixed pseudo-random unit vector derived from the id.
pub fn prototype_vector(id: usize, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if id < dim {
        v[id] = 1.0;
        return v;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED ^ id as u64);
    loop {
        v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Row-major `vocab × dim` table of [`prototype_vector`]s.
pub fn prototype_table(vocab: usize, dim: usize) -> Vec<f64> {
    (0..vocab).flat_map(|id| prototype_vector(id, dim)).collect()
}

/// Deterministic posteriorgram and embeddings for a token sequence.
///
/// Each frame puts `(1-α) + α/V` on its label and `α/V` elsewhere. Embedding
/// rows are the label's prototype plus uniform noise in `[-α, α]`.
pub fn synth(
    spec: &SynthSpec,
    inventory: &PhonemeInventory,
) -> Result<(PosteriorGram, EmbeddingMatrix)> {
    spec.validate(inventory)?;
    let vocab = inventory.len();
    let labels = spec.frame_labels(inventory.blank_id());
    let floor = spec.alpha / vocab as f64;
    let peak = (1.0 - spec.alpha) + floor;

    let mut probs = vec![floor; labels.len() * vocab];
    for (t, &label) in labels.iter().enumerate() {
        probs[t * vocab + label] = peak;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(labels.len() * spec.dim);
    for &label in &labels {
        for x in prototype_vector(label, spec.dim) {
            let noise = if spec.alpha > 0.0 {
                rng.gen_range(-spec.alpha..=spec.alpha)
            } else {
                0.0
            };
            values.push(x + noise);
        }
    }

    let frames = labels.len();
    let posteriors = PosteriorGram::new(frames, vocab, probs)?;
    let embeddings = EmbeddingMatrix::new(frames, spec.dim, values)?;
    Ok((posteriors, embeddings))
}
