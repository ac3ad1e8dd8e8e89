use std::path::PathBuf;

use clap::Args;
use kws_core::ctc_search::{perturb_timestamps, CandidateSegment};
use kws_core::posterior::{encode_posteriors, load_posteriors, perturb_uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::common::{self, RunManifest};
use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    /// Posteriorgram files (.kwsp).
    #[arg(long, num_args = 1.., required = true)]
    pub posteriors: Vec<PathBuf>,
    /// Blend every frame with the uniform distribution at this weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Detection files, paired with --posteriors by position.
    #[arg(long, num_args = 1.., requires = "fraction")]
    pub detections: Vec<PathBuf>,
    /// Move each detection end by up to this fraction of its length.
    #[arg(long, requires = "detections")]
    pub fraction: Option<f64>,
}

fn field(v: &Value, key: &str) -> Option<usize> {
    v.get(key)?.as_u64().map(|n| n as usize)
}

pub fn run(global: &GlobalArgs, args: &PerturbArgs) -> CliResult<()> {
    if args.alpha.is_none() && args.fraction.is_none() {
        return Err(CliError::usage("nothing to do: give --alpha and/or --detections with --fraction"));
    }
    if !args.detections.is_empty() && args.detections.len() != args.posteriors.len() {
        return Err(CliError::usage(format!(
            "{} detection files for {} posteriorgrams",
            args.detections.len(),
            args.posteriors.len()
        )));
    }
    let stems = common::unique_stems(&args.posteriors)?;
    let inputs: Vec<PathBuf> = args.posteriors.iter().chain(&args.detections).cloned().collect();
    common::create_dir(&global.out_dir)?;
    let mut manifest = RunManifest::new("perturb", global, args);
    manifest.inputs.extend(inputs.iter().cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);

    for (i, (path, stem)) in args.posteriors.iter().zip(&stems).enumerate() {
        let p = load_posteriors(path)?;
        if let Some(alpha) = args.alpha {
            let out = global.out_dir.join(format!("{stem}.kwsp"));
            common::guard_overwrite(&out, &inputs)?;
            common::write_file(&out, &encode_posteriors(&perturb_uniform(&p, alpha)?))?;
            manifest.outputs.push(out);
        }
        let (Some(fraction), Some(det_path)) = (args.fraction, args.detections.get(i)) else {
            continue;
        };
        let mut text = String::new();
        for (n, line) in common::read_text(det_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || CliError::usage(format!("{} line {}: not a detection record", det_path.display(), n + 1));
            let mut record: Value = serde_json::from_str(line).map_err(|_| bad())?;
            let (start, end) = field(&record, "start_frame")
                .zip(field(&record, "end_frame"))
                .filter(|(s, e)| 1 <= *s && s <= e && *e <= p.frames())
                .ok_or_else(bad)?;
            let s1 = record.get("s1").and_then(Value::as_f64).unwrap_or(0.0);
            let seg = CandidateSegment { start_frame: start, end_frame: end, s1 };
            let moved = perturb_timestamps(&seg, fraction, p.frames(), rng.gen());
            let period = p.frame_period();
            record["start_frame"] = moved.start_frame.into();
            record["end_frame"] = moved.end_frame.into();
            record["start_s"] = ((moved.start_frame - 1) as f64 * period).into();
            record["end_s"] = (moved.end_frame as f64 * period).into();
            text.push_str(&record.to_string());
            text.push('\n');
        }
        let out = global.out_dir.join(format!("{stem}.detections.jsonl"));
        common::guard_overwrite(&out, &inputs)?;
        common::write_file(&out, text.as_bytes())?;
        manifest.outputs.push(out);
    }
    manifest.write(&global.out_dir)?;
    println!("perturbed {} file(s) into {}", stems.len(), global.out_dir.display());
    Ok(())
}
