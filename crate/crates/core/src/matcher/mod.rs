//! Stage-2 verification: phoneme embeddings, enrollment fusion, the matcher
//! network, an analytic prototype scorer, loss evaluation and adapter merging.

mod forward;
mod lora;
mod loss;
mod model;
mod prototype;
mod tensor;
mod weights;

pub use forward::{
    crop_embeddings, embed_tokens, fuse_enrollment, matcher_forward, matcher_forward_traced,
    positional_encoding, EnrollMode, EnrollmentPrototype, MatcherOutput,
};
pub use lora::{adapters_from_weights, adapters_to_weights, lora_merge, merge_weight_files, LoraAdapter};
pub use loss::{bce, joint_loss, JointLoss, BCE_EPSILON};
pub use model::{AttentionBlock, CrossAttention, Gru, Head, MatcherModel, DEFAULT_BLOCKS};
pub use prototype::prototype_match;
pub use tensor::{dot, sigmoid, softmax_in_place, vec_mat, Matrix};
pub use weights::{Tensor, WeightFile, WEIGHTS_MAGIC, WEIGHTS_VERSION};
