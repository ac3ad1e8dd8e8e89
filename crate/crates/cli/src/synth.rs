use clap::Args;
use kws_core::ctc_search::DEFAULT_STAGE1_THRESHOLD;
use kws_core::phoneme::{contains_run, hard_negative, PhonemeInventory, TokenSequence};
use kws_core::posterior::{encode_embeddings, encode_posteriors, synth, SynthSpec, DEFAULT_EMBED_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::common::{self, RunManifest};
use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Keyword text, looked up in the lexicon.
    #[arg(long)]
    pub keyword: String,
    /// Number of positive utterances.
    #[arg(long, default_value_t = 10)]
    pub pos: usize,
    /// Number of negative utterances.
    #[arg(long, default_value_t = 10)]
    pub neg: usize,
    /// Make negatives exactly this many phoneme edits away from the keyword.
    #[arg(long, value_name = "K")]
    pub hard_negatives: Option<usize>,
    /// Weight of the uniform distribution mixed into every frame.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub frames_per_token: usize,
    #[arg(long, default_value_t = 1)]
    pub blank_frames: usize,
    #[arg(long, default_value_t = 5)]
    pub pad_frames: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = DEFAULT_EMBED_DIM)]
    pub dim: usize,
}

/// A random phoneme string of the keyword's length that never contains it.
fn random_negative(keyword: &TokenSequence, symbols: &[usize], rng: &mut ChaCha8Rng) -> TokenSequence {
    loop {
        let ids: Vec<usize> = (0..keyword.len())
            .map(|_| symbols[rng.gen_range(0..symbols.len())])
            .collect();
        if !contains_run(&ids, keyword.ids()) {
            return TokenSequence::new(ids);
        }
    }
}

fn phones(inventory: &PhonemeInventory, tokens: &TokenSequence) -> String {
    inventory.labels(tokens).join(" ")
}

pub fn run(global: &GlobalArgs, args: &SynthArgs) -> CliResult<()> {
    if args.hard_negatives == Some(0) {
        return Err(CliError::usage("--hard-negatives needs at least one edit"));
    }
    let inventory = common::inventory(global)?;
    let lexicon = common::lexicon(global, &inventory)?;
    let keyword = lexicon.g2p(&args.keyword)?;
    let symbols: Vec<usize> = (0..inventory.len()).filter(|&i| i != inventory.blank_id()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);

    let mut utterances = Vec::with_capacity(args.pos + args.neg);
    for i in 0..args.pos {
        utterances.push((format!("pos_{i:04}"), true, keyword.clone()));
    }
    for i in 0..args.neg {
        let tokens = match args.hard_negatives {
            Some(k) => hard_negative(&keyword, k, &symbols, &mut rng)?,
            None => random_negative(&keyword, &symbols, &mut rng),
        };
        utterances.push((format!("neg_{i:04}"), false, tokens));
    }

    common::create_dir(&global.out_dir)?;
    let mut manifest = RunManifest::new("synth", global, args);
    let mut labels = String::from("utterance,label,phones\n");
    for (name, positive, tokens) in &utterances {
        let spec = SynthSpec::new(tokens.clone())
            .frames_per_token(args.frames_per_token)
            .blank_frames(args.blank_frames)
            .pad_frames(args.pad_frames)
            .alpha(args.alpha)
            .seed(rng.gen())
            .dim(args.dim);
        let (p, e) = synth(&spec, &inventory)?;
        let kwsp = global.out_dir.join(format!("{name}.kwsp"));
        let kwse = global.out_dir.join(format!("{name}.kwse"));
        common::write_file(&kwsp, &encode_posteriors(&p))?;
        common::write_file(&kwse, &encode_embeddings(&e))?;
        labels.push_str(&format!("{name},{},{}\n", u8::from(*positive), phones(&inventory, tokens)));
        manifest.outputs.extend([kwsp, kwse]);
    }
    let labels_path = global.out_dir.join("labels.csv");
    common::write_file(&labels_path, labels.as_bytes())?;
    let keywords_path = global.out_dir.join("keywords.txt");
    common::write_file(
        &keywords_path,
        format!("{}\t{DEFAULT_STAGE1_THRESHOLD}\n", args.keyword.trim()).as_bytes(),
    )?;
    manifest.outputs.extend([labels_path, keywords_path]);
    manifest.write(&global.out_dir)?;
    println!(
        "{} positive and {} negative utterances for `{}` ({}) in {}",
        args.pos,
        args.neg,
        args.keyword,
        phones(&inventory, &keyword),
        global.out_dir.display()
    );
    Ok(())
}
