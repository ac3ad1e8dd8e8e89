use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Matrix;
use super::weights::{Tensor, WeightFile};
use crate::error::{Error, Result};

/// Number of attention blocks used unless configured otherwise.
pub const DEFAULT_BLOCKS: usize = 2;

/// Self-attention with a residual, then a residual two-layer feed-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    /// d × 4d
    pub ff1: Matrix,
    pub b1: Vec<f64>,
    /// 4d × d
    pub ff2: Matrix,
    pub b2: Vec<f64>,
}

/// Query/key/value projections of the enrollment cross-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

/// Gated recurrent unit. Gates are stacked along columns as reset, update, candidate:
///
/// ```text
/// r  = σ(x·Wi_r + bi_r + h·Wh_r + bh_r)
/// z  = σ(x·Wi_z + bi_z + h·Wh_z + bh_z)
/// n  = tanh(x·Wi_n + bi_n + r ⊙ (h·Wh_n + bh_n))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    /// d × 3d
    pub w_ih: Matrix,
    /// d × 3d
    pub w_hh: Matrix,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

/// Affine map to a single logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Weights of the stage-2 phoneme matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct MatcherModel {
    pub embed: Matrix,
    pub blocks: Vec<AttentionBlock>,
    pub xattn: CrossAttention,
    pub recur: Gru,
    pub head_utt: Head,
    pub head_phon: Head,
    pub mark_audio: Vec<f64>,
    pub mark_text: Vec<f64>,
}

impl MatcherModel {
    /// All parameters zero.
    pub fn zeros(vocab: usize, dim: usize, blocks: usize) -> Self {
        Self::filled(vocab, dim, blocks, &mut |_| 0.0)
    }

    /// Uniform initialization in `±1/√fan_in`, deterministic per seed.
    pub fn random(vocab: usize, dim: usize, blocks: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::filled(vocab, dim, blocks, &mut |fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-bound..=bound)
        })
    }

    fn filled(vocab: usize, dim: usize, blocks: usize, init: &mut dyn FnMut(usize) -> f64) -> Self {
        let mut mat = |r: usize, c: usize, fan_in: usize| {
            let data = (0..r * c).map(|_| init(fan_in)).collect();
            Matrix::from_vec(r, c, data).expect("shape matches")
        };
        let embed = mat(vocab, dim, dim);
        let blocks = (0..blocks)
            .map(|_| AttentionBlock {
                wq: mat(dim, dim, dim),
                wk: mat(dim, dim, dim),
                wv: mat(dim, dim, dim),
                wo: mat(dim, dim, dim),
                ff1: mat(dim, 4 * dim, dim),
                b1: mat(1, 4 * dim, dim).data().to_vec(),
                ff2: mat(4 * dim, dim, 4 * dim),
                b2: mat(1, dim, 4 * dim).data().to_vec(),
            })
            .collect();
        let xattn = CrossAttention {
            wq: mat(dim, dim, dim),
            wk: mat(dim, dim, dim),
            wv: mat(dim, dim, dim),
        };
        let recur = Gru {
            w_ih: mat(dim, 3 * dim, dim),
            w_hh: mat(dim, 3 * dim, dim),
            b_ih: mat(1, 3 * dim, dim).data().to_vec(),
            b_hh: mat(1, 3 * dim, dim).data().to_vec(),
        };
        let head_utt = Head {
            w: mat(1, dim, dim).data().to_vec(),
            b: mat(1, 1, dim).data()[0],
        };
        let head_phon = Head {
            w: mat(1, dim, dim).data().to_vec(),
            b: mat(1, 1, dim).data()[0],
        };
        let mark_audio = mat(1, dim, dim).data().to_vec();
        let mark_text = mat(1, dim, dim).data().to_vec();
        Self {
            embed,
            blocks,
            xattn,
            recur,
            head_utt,
            head_phon,
            mark_audio,
            mark_text,
        }
    }

    pub fn with_embedding(mut self, embed: Matrix) -> Result<Self> {
        if embed.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "embedding table has {} columns, model dimension is {}",
                embed.cols(),
                self.dim()
            )));
        }
        self.embed = embed;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.embed.cols()
    }

    pub fn vocab(&self) -> usize {
        self.embed.rows()
    }

    /// Names of the projections a low-rank adapter may patch.
    pub fn adaptable_targets(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.blocks.len() {
            for p in ["wq", "wk", "wv"] {
                out.push(format!("blk{i}.{p}"));
            }
        }
        for p in ["wq", "wk", "wv"] {
            out.push(format!("xattn.{p}"));
        }
        out
    }

    /// Mutable access to a QKV projection by canonical name.
    pub fn projection_mut(&mut self, target: &str) -> Result<&mut Matrix> {
        let unknown = || Error::UnknownWeight(target.to_string());
        let (owner, proj) = target.split_once('.').ok_or_else(unknown)?;
        if owner == "xattn" {
            return match proj {
                "wq" => Ok(&mut self.xattn.wq),
                "wk" => Ok(&mut self.xattn.wk),
                "wv" => Ok(&mut self.xattn.wv),
                _ => Err(unknown()),
            };
        }
        let idx: usize = owner
            .strip_prefix("blk")
            .and_then(|s| s.parse().ok())
            .ok_or_else(unknown)?;
        let block = self.blocks.get_mut(idx).ok_or_else(unknown)?;
        match proj {
            "wq" => Ok(&mut block.wq),
            "wk" => Ok(&mut block.wk),
            "wv" => Ok(&mut block.wv),
            _ => Err(unknown()),
        }
    }

    pub fn projection(&self, target: &str) -> Result<&Matrix> {
        let unknown = || Error::UnknownWeight(target.to_string());
        let (owner, proj) = target.split_once('.').ok_or_else(unknown)?;
        let (wq, wk, wv) = if owner == "xattn" {
            (&self.xattn.wq, &self.xattn.wk, &self.xattn.wv)
        } else {
            let idx: usize = owner
                .strip_prefix("blk")
                .and_then(|s| s.parse().ok())
                .ok_or_else(unknown)?;
            let b = self.blocks.get(idx).ok_or_else(unknown)?;
            (&b.wq, &b.wk, &b.wv)
        };
        match proj {
            "wq" => Ok(wq),
            "wk" => Ok(wk),
            "wv" => Ok(wv),
            _ => Err(unknown()),
        }
    }

    /// Every parameter under its canonical name.
    pub fn to_weights(&self) -> WeightFile {
        let mut w = WeightFile::new();
        w.insert("embed", Tensor::from_matrix(&self.embed));
        for (i, b) in self.blocks.iter().enumerate() {
            w.insert(format!("blk{i}.wq"), Tensor::from_matrix(&b.wq));
            w.insert(format!("blk{i}.wk"), Tensor::from_matrix(&b.wk));
            w.insert(format!("blk{i}.wv"), Tensor::from_matrix(&b.wv));
            w.insert(format!("blk{i}.wo"), Tensor::from_matrix(&b.wo));
            w.insert(format!("blk{i}.ff1"), Tensor::from_matrix(&b.ff1));
            w.insert(format!("blk{i}.b1"), Tensor::vector(b.b1.clone()));
            w.insert(format!("blk{i}.ff2"), Tensor::from_matrix(&b.ff2));
            w.insert(format!("blk{i}.b2"), Tensor::vector(b.b2.clone()));
        }
        w.insert("xattn.wq", Tensor::from_matrix(&self.xattn.wq));
        w.insert("xattn.wk", Tensor::from_matrix(&self.xattn.wk));
        w.insert("xattn.wv", Tensor::from_matrix(&self.xattn.wv));
        w.insert("recur.w_ih", Tensor::from_matrix(&self.recur.w_ih));
        w.insert("recur.w_hh", Tensor::from_matrix(&self.recur.w_hh));
        w.insert("recur.b_ih", Tensor::vector(self.recur.b_ih.clone()));
        w.insert("recur.b_hh", Tensor::vector(self.recur.b_hh.clone()));
        w.insert("head_utt.w", Tensor::vector(self.head_utt.w.clone()));
        w.insert("head_utt.b", Tensor::scalar(self.head_utt.b));
        w.insert("head_phon.w", Tensor::vector(self.head_phon.w.clone()));
        w.insert("head_phon.b", Tensor::scalar(self.head_phon.b));
        w.insert("mark.audio", Tensor::vector(self.mark_audio.clone()));
        w.insert("mark.text", Tensor::vector(self.mark_text.clone()));
        w
    }

    /// Rebuilds a model from canonical names, checking every shape.
    pub fn from_weights(w: &WeightFile) -> Result<Self> {
        let embed = w.require("embed")?.to_matrix()?;
        let d = embed.cols();
        if d == 0 {
            return Err(Error::Dimension("model dimension is zero".into()));
        }
        let matrix = |name: &str, r: usize, c: usize| -> Result<Matrix> {
            let m = w.require(name)?.to_matrix()?;
            if m.shape() != (r, c) {
                return Err(Error::Dimension(format!(
                    "`{name}` has shape {:?}, expected ({r}, {c})",
                    m.shape()
                )));
            }
            Ok(m)
        };
        let vector = |name: &str, n: usize| -> Result<Vec<f64>> {
            let t = w.require(name)?;
            if t.data.len() != n {
                return Err(Error::Dimension(format!(
                    "`{name}` has {} values, expected {n}",
                    t.data.len()
                )));
            }
            Ok(t.data.clone())
        };
        let mut blocks = Vec::new();
        while w.get(&format!("blk{}.wq", blocks.len())).is_some() {
            let i = blocks.len();
            blocks.push(AttentionBlock {
                wq: matrix(&format!("blk{i}.wq"), d, d)?,
                wk: matrix(&format!("blk{i}.wk"), d, d)?,
                wv: matrix(&format!("blk{i}.wv"), d, d)?,
                wo: matrix(&format!("blk{i}.wo"), d, d)?,
                ff1: matrix(&format!("blk{i}.ff1"), d, 4 * d)?,
                b1: vector(&format!("blk{i}.b1"), 4 * d)?,
                ff2: matrix(&format!("blk{i}.ff2"), 4 * d, d)?,
                b2: vector(&format!("blk{i}.b2"), d)?,
            });
        }
        let model = Self {
            embed,
            blocks,
            xattn: CrossAttention {
                wq: matrix("xattn.wq", d, d)?,
                wk: matrix("xattn.wk", d, d)?,
                wv: matrix("xattn.wv", d, d)?,
            },
            recur: Gru {
                w_ih: matrix("recur.w_ih", d, 3 * d)?,
                w_hh: matrix("recur.w_hh", d, 3 * d)?,
                b_ih: vector("recur.b_ih", 3 * d)?,
                b_hh: vector("recur.b_hh", 3 * d)?,
            },
            head_utt: Head {
                w: vector("head_utt.w", d)?,
                b: vector("head_utt.b", 1)?[0],
            },
            head_phon: Head {
                w: vector("head_phon.w", d)?,
                b: vector("head_phon.b", 1)?[0],
            },
            mark_audio: vector("mark.audio", d)?,
            mark_text: vector("mark.text", d)?,
        };
        if !model.is_finite() {
            return Err(Error::OutOfRange("non-finite model weight".into()));
        }
        Ok(model)
    }

    pub fn is_finite(&self) -> bool {
        self.to_weights()
            .iter()
            .all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}
