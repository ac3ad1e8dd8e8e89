use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use kws_core::matcher::{adapters_from_weights, lora_merge, MatcherModel, WeightFile};
use kws_core::phoneme::{Lexicon, PhonemeInventory};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

/// Everything needed to reproduce a run, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub inventory: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub options: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &'static str, global: &GlobalArgs, options: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: global.seed,
            inventory: global.inventory.clone(),
            lexicon: global.lexicon.clone(),
            options: serde_json::to_value(options).expect("arguments serialize"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file(&out_dir.join("manifest.json"), text.as_bytes())
    }
}

pub fn inventory(global: &GlobalArgs) -> CliResult<PhonemeInventory> {
    match &global.inventory {
        Some(path) => Ok(PhonemeInventory::load(path)?),
        None => Ok(PhonemeInventory::default()),
    }
}

pub fn lexicon(global: &GlobalArgs, inventory: &PhonemeInventory) -> CliResult<Lexicon> {
    match &global.lexicon {
        Some(path) => Ok(Lexicon::load(path, inventory)?),
        None => Ok(Lexicon::builtin(inventory)?),
    }
}

pub fn load_model(weights: &Path, adapters: &[PathBuf]) -> CliResult<MatcherModel> {
    let model = MatcherModel::from_weights(&WeightFile::load(weights)?)?;
    let mut all = Vec::new();
    for path in adapters {
        all.extend(adapters_from_weights(&WeightFile::load(path)?)?);
    }
    Ok(lora_merge(&model, &all)?)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// File name up to the first dot, used to name per-input outputs.
pub fn stem(path: &Path) -> CliResult<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| CliError::usage(format!("cannot derive a name from {}", path.display())))
}

/// Stems of `paths`, rejecting duplicates that would overwrite each other.
pub fn unique_stems(paths: &[PathBuf]) -> CliResult<Vec<String>> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .map(|p| {
            let s = stem(p)?;
            if !seen.insert(s.clone()) {
                return Err(CliError::usage(format!("two inputs are both named `{s}`")));
            }
            Ok(s)
        })
        .collect()
}

/// Refuses to write over one of the inputs.
pub fn guard_overwrite(output: &Path, inputs: &[PathBuf]) -> CliResult<()> {
    let Ok(out) = output.canonicalize() else {
        return Ok(());
    };
    if inputs.iter().any(|i| i.canonicalize().is_ok_and(|i| i == out)) {
        return Err(CliError::usage(format!(
            "output {} would overwrite an input; choose another --out-dir",
            output.display()
        )));
    }
    Ok(())
}

/// One row of a labels CSV: `utterance,label[,phones]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub utterance: String,
    pub positive: bool,
    pub phones: Option<String>,
}

pub fn parse_labels(text: &str) -> CliResult<Vec<LabelRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
        if i == 0 && fields.get(1).is_some_and(|l| *l != "0" && *l != "1") {
            continue;
        }
        let bad = |msg: String| CliError::usage(format!("labels line {}: {msg}", i + 1));
        if fields.len() < 2 || fields[0].is_empty() {
            return Err(bad(format!("expected `utterance,label[,phones]`, got `{line}`")));
        }
        let positive = match fields[1] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 1 or 0, got `{other}`"))),
        };
        rows.push(LabelRow {
            utterance: fields[0].to_string(),
            positive,
            phones: fields.get(2).map(|s| s.to_string()),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_with_header_and_phones() {
        let rows = parse_labels("utterance,label,phones\npos_0000,1,HH AY1\nneg_0000,0\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].positive);
        assert_eq!(rows[0].phones.as_deref(), Some("HH AY1"));
        assert_eq!(rows[1].phones, None);
    }

    #[test]
    fn bad_label_is_usage_error() {
        let err = parse_labels("a,1\nb,yes\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stems() {
        assert_eq!(stem(Path::new("dir/pos_0001.kwsp")).unwrap(), "pos_0001");
        assert_eq!(stem(Path::new("a.detections.jsonl")).unwrap(), "a");
        assert!(unique_stems(&[PathBuf::from("x/a.kwsp"), PathBuf::from("y/a.kwsp")]).is_err());
    }
}
