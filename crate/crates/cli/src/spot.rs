use std::path::PathBuf;

use clap::Args;
use kws_core::cascade::{
    detections_to_jsonl, prepare_prototypes, run_pipeline, run_streaming, PipelineConfig,
    Stage2Mode, DEFAULT_CROP_MARGIN, DEFAULT_STAGE2_THRESHOLD,
};
use kws_core::ctc_search::{parse_keyword_config, KeywordSpec, DEFAULT_MAX_SEGMENT};
use kws_core::matcher::EnrollMode;
use kws_core::posterior::{load_embeddings, load_posteriors, EmbeddingMatrix, DEFAULT_EMBED_DIM};
use serde::Serialize;

use crate::common::{self, RunManifest};
use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct SpotArgs {
    /// Posteriorgram files (.kwsp).
    #[arg(long, num_args = 1.., required = true)]
    pub posteriors: Vec<PathBuf>,
    /// Embedding files (.kwse), paired with --posteriors by position.
    #[arg(long, num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
    /// Keyword config: `keyword[<TAB>threshold]` per line.
    #[arg(long)]
    pub keywords: PathBuf,
    /// Verification stage: learned, prototype or off.
    #[arg(long, default_value = "prototype")]
    pub stage2: String,
    /// Enrollment: text, concat or cross_attention.
    #[arg(long, default_value = "text")]
    pub enroll: String,
    /// Matcher weights (.kwsw); required for learned mode and audio enrollment.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Adapter weight files merged into --weights before use.
    #[arg(long)]
    pub lora: Vec<PathBuf>,
    /// Reference recording for a keyword, as `KEYWORD=PATH.kwse`.
    #[arg(long = "reference", value_name = "KEYWORD=PATH")]
    pub references: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_STAGE2_THRESHOLD)]
    pub tau2: f64,
    #[arg(long, default_value_t = DEFAULT_CROP_MARGIN)]
    pub crop_margin: usize,
    #[arg(long, default_value_t = 0)]
    pub min_gap: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_SEGMENT)]
    pub max_len: usize,
    /// Keep detections of keywords that are prefixes of an overlapping longer detection.
    #[arg(long)]
    pub no_suppress: bool,
    /// Final score is the geometric mean of both stage scores.
    #[arg(long)]
    pub fuse: bool,
    /// Feed frames one at a time through the streaming pipeline.
    #[arg(long)]
    pub streaming: bool,
}

fn keywords(global: &GlobalArgs, args: &SpotArgs) -> CliResult<Vec<KeywordSpec>> {
    let inventory = common::inventory(global)?;
    let lexicon = common::lexicon(global, &inventory)?;
    let entries = parse_keyword_config(&common::read_text(&args.keywords)?)?;
    if entries.is_empty() {
        return Err(CliError::usage(format!("{} lists no keywords", args.keywords.display())));
    }
    entries
        .iter()
        .map(|e| Ok(KeywordSpec::from_text(&e.text, &lexicon, inventory.blank_id(), e.threshold)?))
        .collect()
}

fn references(args: &SpotArgs, keywords: &[KeywordSpec]) -> CliResult<Vec<Option<EmbeddingMatrix>>> {
    if args.references.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = vec![None; keywords.len()];
    for r in &args.references {
        let (word, path) = r
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--reference expects KEYWORD=PATH, got `{r}`")))?;
        let index = keywords
            .iter()
            .position(|k| k.text() == word.trim())
            .ok_or_else(|| CliError::usage(format!("--reference names unknown keyword `{word}`")))?;
        out[index] = Some(load_embeddings(path)?);
    }
    Ok(out)
}

pub fn run(global: &GlobalArgs, args: &SpotArgs) -> CliResult<()> {
    let stage2: Stage2Mode = args.stage2.parse()?;
    let enroll: EnrollMode = args.enroll.parse()?;
    if stage2 != Stage2Mode::Off && args.embeddings.is_empty() {
        return Err(CliError::usage(format!(
            "--stage2 {} needs --embeddings for every posteriorgram",
            args.stage2
        )));
    }
    if !args.embeddings.is_empty() && args.embeddings.len() != args.posteriors.len() {
        return Err(CliError::usage(format!(
            "{} embedding files for {} posteriorgrams",
            args.embeddings.len(),
            args.posteriors.len()
        )));
    }
    if !args.lora.is_empty() && args.weights.is_none() {
        return Err(CliError::usage("--lora needs --weights"));
    }
    let stems = common::unique_stems(&args.posteriors)?;

    let keywords = keywords(global, args)?;
    let references = references(args, &keywords)?;
    let cfg = PipelineConfig::new(keywords)
        .stage2_mode(stage2)
        .enroll_mode(enroll)
        .tau2(args.tau2)
        .crop_margin(args.crop_margin)
        .min_gap(args.min_gap)
        .max_len(args.max_len)
        .suppress_prefixes(!args.no_suppress)
        .fuse_scores(args.fuse);
    cfg.validate()?;
    let model = args
        .weights
        .as_deref()
        .map(|w| common::load_model(w, &args.lora))
        .transpose()?;
    let model = model.as_ref().filter(|_| stage2 != Stage2Mode::Off);

    let posteriors = args
        .posteriors
        .iter()
        .map(load_posteriors)
        .collect::<Result<Vec<_>, _>>()?;
    let embeddings = args
        .embeddings
        .iter()
        .map(load_embeddings)
        .collect::<Result<Vec<_>, _>>()?;
    let dim = embeddings
        .first()
        .map(EmbeddingMatrix::dim)
        .or(model.map(|m| m.dim()))
        .unwrap_or(DEFAULT_EMBED_DIM);
    let protos = prepare_prototypes(&cfg, model, &references, dim)?;

    common::create_dir(&global.out_dir)?;
    let mut manifest = RunManifest::new("spot", global, args);
    manifest.inputs.extend(args.posteriors.iter().cloned());
    manifest.inputs.extend(args.embeddings.iter().cloned());
    manifest.inputs.push(args.keywords.clone());
    let mut total = 0;
    for (i, (p, stem)) in posteriors.iter().zip(&stems).enumerate() {
        let e = embeddings.get(i);
        let run = if args.streaming { run_streaming } else { run_pipeline };
        let (detections, stats) = run(p, e, &cfg, model, &protos).map_err(|err| {
            CliError::usage(format!("{}: {err}", args.posteriors[i].display()))
        })?;
        total += detections.len();
        let jsonl = global.out_dir.join(format!("{stem}.detections.jsonl"));
        let stats_path = global.out_dir.join(format!("{stem}.stats.json"));
        common::write_file(&jsonl, detections_to_jsonl(&detections).as_bytes())?;
        common::write_file(&stats_path, format!("{}\n", stats.to_json()).as_bytes())?;
        manifest.outputs.extend([jsonl, stats_path]);
    }
    manifest.write(&global.out_dir)?;
    println!(
        "{total} detections in {} file(s); outputs in {}",
        posteriors.len(),
        global.out_dir.display()
    );
    Ok(())
}
