use crate::error::{Error, Result};

/// Row sums must be within this distance of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Default frame hop in seconds (10 ms).
pub const DEFAULT_FRAME_PERIOD: f64 = 0.01;

/// T×V matrix of per-frame label probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGram {
    frames: usize,
    vocab: usize,
    probs: Vec<f64>,
    frame_period: f64,
}

impl PosteriorGram {
    /// Validates entries in `[0, 1]` and rows summing to 1 within [`ROW_SUM_TOLERANCE`].
    pub fn new(frames: usize, vocab: usize, probs: Vec<f64>) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::Dimension("vocabulary size must be positive".into()));
        }
        if probs.len() != frames * vocab {
            return Err(Error::Dimension(format!(
                "{} values for {frames}x{vocab} posteriorgram",
                probs.len()
            )));
        }
        for (row, chunk) in probs.chunks_exact(vocab).enumerate() {
            if let Some(v) = chunk.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::OutOfRange(format!("row {row} has entry {v}")));
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSum { row, sum });
            }
        }
        Ok(Self {
            frames,
            vocab,
            probs,
            frame_period: DEFAULT_FRAME_PERIOD,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let vocab = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != vocab) {
            return Err(Error::Dimension("ragged posterior rows".into()));
        }
        Self::new(rows.len(), vocab, rows.concat())
    }

    /// Zero-frame posteriorgram over `vocab` labels.
    pub fn empty(vocab: usize) -> Self {
        Self {
            frames: 0,
            vocab,
            probs: Vec::new(),
            frame_period: DEFAULT_FRAME_PERIOD,
        }
    }

    pub fn with_frame_period(mut self, seconds: f64) -> Self {
        self.frame_period = seconds;
        self
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames as f64 * self.frame_period
    }

    /// Row `t` (0-based).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.probs.chunks_exact(self.vocab)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Appends the frames of `other` after this one's.
    pub fn concat(&self, other: &PosteriorGram) -> Result<Self> {
        if other.vocab != self.vocab {
            return Err(Error::Dimension(format!(
                "cannot concatenate V={} with V={}",
                self.vocab, other.vocab
            )));
        }
        let mut probs = self.probs.clone();
        probs.extend_from_slice(&other.probs);
        Ok(Self {
            frames: self.frames + other.frames,
            vocab: self.vocab,
            probs,
            frame_period: self.frame_period,
        })
    }

    pub(crate) fn from_parts_unchecked(frames: usize, vocab: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), frames * vocab);
        Self {
            frames,
            vocab,
            probs,
            frame_period: DEFAULT_FRAME_PERIOD,
        }
    }
}

/// T×d matrix of frame embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    frames: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(frames: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("embedding dimension must be positive".into()));
        }
        if values.len() != frames * dim {
            return Err(Error::Dimension(format!(
                "{} values for {frames}x{dim} embedding matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("non-finite embedding value".into()));
        }
        Ok(Self {
            frames,
            dim,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged embedding rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            frames: 0,
            dim,
            values: Vec::new(),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies 0-based rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            frames: end - start,
            dim: self.dim,
            values: self.values[start * self.dim..end * self.dim].to_vec(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension(format!(
                "embedding row of length {} for dimension {}",
                row.len(),
                self.dim
            )));
        }
        self.values.extend_from_slice(row);
        self.frames += 1;
        Ok(())
    }

    pub fn concat(&self, other: &EmbeddingMatrix) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::Dimension(format!(
                "cannot concatenate d={} with d={}",
                self.dim, other.dim
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self {
            frames: self.frames + other.frames,
            dim: self.dim,
            values,
        })
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            frames: self.frames,
            dim: self.dim,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}
