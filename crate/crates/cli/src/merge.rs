use std::path::PathBuf;

use clap::Args;
use kws_core::matcher::{adapters_from_weights, merge_weight_files, WeightFile};
use serde::Serialize;

use crate::common::{self, RunManifest};
use crate::error::CliResult;
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct MergeLoraArgs {
    /// Base weight file (.kwsw).
    #[arg(long)]
    pub base: PathBuf,
    /// Adapter weight file holding `lora.<target>.A|B[|scale]` tensors.
    #[arg(long)]
    pub adapter: PathBuf,
    /// Output path; defaults to `merged.kwsw` in --out-dir.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(global: &GlobalArgs, args: &MergeLoraArgs) -> CliResult<()> {
    let base = WeightFile::load(&args.base)?;
    let adapters = adapters_from_weights(&WeightFile::load(&args.adapter)?)?;
    let merged = merge_weight_files(&base, &adapters)?;

    common::create_dir(&global.out_dir)?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| global.out_dir.join("merged.kwsw"));
    common::guard_overwrite(&output, &[args.base.clone(), args.adapter.clone()])?;
    merged.save(&output)?;

    let mut manifest = RunManifest::new("merge-lora", global, args);
    manifest.inputs.extend([args.base.clone(), args.adapter.clone()]);
    manifest.outputs.push(output.clone());
    manifest.write(&global.out_dir)?;
    println!("merged {} adapter(s) into {}", adapters.len(), output.display());
    Ok(())
}
