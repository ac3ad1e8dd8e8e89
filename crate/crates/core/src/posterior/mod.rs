//! Posteriorgrams, frame embeddings, their file formats, and the synthetic-utterance generator.

mod gram;
mod io;
mod ops;
mod synth;

pub use gram::{EmbeddingMatrix, PosteriorGram, DEFAULT_FRAME_PERIOD, ROW_SUM_TOLERANCE};
pub use io::{
    decode_embeddings, decode_posteriors, encode_embeddings, encode_posteriors, load_embeddings,
    load_posteriors, save_embeddings, save_posteriors, EMBEDDING_MAGIC, FORMAT_VERSION,
    LOAD_ROW_SUM_TOLERANCE, POSTERIOR_MAGIC,
};
pub use ops::{argmax, ctc_collapse, greedy_decode, perturb_uniform};
pub use synth::{prototype_table, prototype_vector, synth, SynthSpec, DEFAULT_EMBED_DIM};
