use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use kws_core::phoneme::{edit_distance, p_wer, TokenSequence};
use kws_core::posterior::{greedy_decode, load_posteriors};
use serde::Serialize;

use crate::common::{self, RunManifest};
use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct DecodeArgs {
    /// Posteriorgram files (.kwsp).
    #[arg(long, num_args = 1.., required = true)]
    pub posteriors: Vec<PathBuf>,
    /// Labels CSV whose third column holds each utterance's reference phones.
    #[arg(long)]
    pub references: Option<PathBuf>,
}

pub fn run(global: &GlobalArgs, args: &DecodeArgs) -> CliResult<()> {
    let inventory = common::inventory(global)?;
    let stems = common::unique_stems(&args.posteriors)?;
    let references: Option<HashMap<String, TokenSequence>> = args
        .references
        .as_deref()
        .map(|path| -> CliResult<_> {
            let rows = common::parse_labels(&common::read_text(path)?)?;
            rows.into_iter()
                .map(|r| {
                    let phones = r.phones.ok_or_else(|| {
                        CliError::usage(format!("{}: no reference phones for `{}`", path.display(), r.utterance))
                    })?;
                    let labels: Vec<&str> = phones.split_whitespace().collect();
                    Ok((r.utterance, inventory.tokenize(&labels)?))
                })
                .collect()
        })
        .transpose()?;

    let mut table = String::from("utterance\thypothesis\tedits\n");
    let mut pairs = Vec::new();
    for (path, stem) in args.posteriors.iter().zip(&stems) {
        let hyp = greedy_decode(&load_posteriors(path)?, &inventory);
        let edits = match &references {
            Some(refs) => {
                let reference = refs
                    .get(stem)
                    .ok_or_else(|| CliError::usage(format!("no reference for `{stem}`")))?;
                let n = edit_distance(reference.ids(), hyp.ids()).total();
                pairs.push((reference.clone(), hyp.clone()));
                n.to_string()
            }
            None => "-".into(),
        };
        table.push_str(&format!("{stem}\t{}\t{edits}\n", inventory.labels(&hyp).join(" ")));
    }

    common::create_dir(&global.out_dir)?;
    let mut manifest = RunManifest::new("decode", global, args);
    manifest.inputs.extend(args.posteriors.iter().cloned());
    manifest.inputs.extend(args.references.iter().cloned());
    let out = global.out_dir.join("decode.tsv");
    common::write_file(&out, table.as_bytes())?;
    manifest.outputs.push(out);
    if !pairs.is_empty() {
        let rate = p_wer(&pairs)?;
        println!("P-WER {:.2} over {} utterances", 100.0 * rate, pairs.len());
        let report = global.out_dir.join("p_wer.json");
        let text = serde_json::json!({ "utterances": pairs.len(), "p_wer": rate });
        common::write_file(&report, format!("{text}\n").as_bytes())?;
        manifest.outputs.push(report);
    } else {
        println!("decoded {} utterances", stems.len());
    }
    manifest.write(&global.out_dir)
}
