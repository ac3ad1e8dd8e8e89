//! Two-stage pipeline: trellis candidates gated at τ1, verified at τ2.

mod batch;
mod config;
mod detection;
mod streaming;

pub use batch::run_pipeline;
pub use config::{
    prepare_prototypes, PipelineConfig, PipelineKeyword, Stage2Mode, DEFAULT_CROP_MARGIN,
    DEFAULT_STAGE2_THRESHOLD,
};
pub use detection::{detections_to_jsonl, CascadeStats, Detection};
pub use streaming::{run_streaming, StreamingPipeline};
