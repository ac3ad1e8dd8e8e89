use std::path::{Path, PathBuf};

use clap::Args;
use kws_core::metrics::{auroc, det_curve, det_to_csv, eer, parse_trials, recall_at_far, trials_from_scores, Trial};
use serde::Serialize;

use crate::common::{self, RunManifest};
use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Trial CSV with `label,score` rows.
    #[arg(long, conflicts_with_all = ["labels", "detections_dir"])]
    pub trials: Option<PathBuf>,
    /// Labels CSV (`utterance,label[,phones]`) scored from --detections-dir.
    #[arg(long, requires = "detections_dir")]
    pub labels: Option<PathBuf>,
    /// Directory of `<utterance>.detections.jsonl` files written by `spot`.
    #[arg(long, requires = "labels")]
    pub detections_dir: Option<PathBuf>,
    /// Hours of negative audio behind the trials.
    #[arg(long, default_value_t = 1.0)]
    pub hours: f64,
    /// False-alarm rates per hour at which to report recall.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.5, 1.0])]
    pub far: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Report {
    positives: usize,
    negatives: usize,
    auroc: f64,
    eer: f64,
    recall_at_far: Vec<RecallPoint>,
}

#[derive(Debug, Serialize)]
struct RecallPoint {
    far_per_hour: f64,
    recall: f64,
}

/// Highest `final` score in a detections file, `None` when it has no detections.
fn best_detection(path: &Path) -> CliResult<Option<f64>> {
    let text = common::read_text(path)?;
    let mut best: Option<f64> = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::usage(format!("{} line {}: not a detection record", path.display(), i + 1));
        let value: serde_json::Value = serde_json::from_str(line).map_err(|_| bad())?;
        let score = value.get("final").and_then(serde_json::Value::as_f64).ok_or_else(bad)?;
        best = Some(best.map_or(score, |b| b.max(score)));
    }
    Ok(best)
}

/// Trials, the scores of positives and negatives that fired, and the positive count.
type Scored = (Vec<Trial>, Vec<f64>, Vec<f64>, usize);

fn detection_trials(labels: &Path, dir: &Path) -> CliResult<Scored> {
    let rows = common::parse_labels(&common::read_text(labels)?)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    let (mut pos_hits, mut neg_hits) = (Vec::new(), Vec::new());
    for row in &rows {
        let best = best_detection(&dir.join(format!("{}.detections.jsonl", row.utterance)))?;
        let (scores, hits) = if row.positive {
            (&mut pos, &mut pos_hits)
        } else {
            (&mut neg, &mut neg_hits)
        };
        scores.push(best.unwrap_or(0.0));
        hits.extend(best);
    }
    let positives = pos.len();
    let trials = trials_from_scores(&pos, &neg);
    Ok((trials, pos_hits, neg_hits, positives))
}

pub fn run(global: &GlobalArgs, args: &EvalArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("eval", global, args);
    // recall counts only scores that fired; missed positives never pass
    let (trials, pos_fired, neg_fired, positives) = match (&args.trials, &args.labels, &args.detections_dir) {
        (Some(path), _, _) => {
            manifest.inputs.push(path.clone());
            let trials = parse_trials(&common::read_text(path)?)?;
            let pos: Vec<f64> = trials.iter().filter(|t| t.is_positive()).map(|t| t.score).collect();
            let neg: Vec<f64> = trials.iter().filter(|t| !t.is_positive()).map(|t| t.score).collect();
            let n = pos.len();
            (trials, pos, neg, n)
        }
        (None, Some(labels), Some(dir)) => {
            manifest.inputs.extend([labels.clone(), dir.clone()]);
            detection_trials(labels, dir)?
        }
        _ => return Err(CliError::usage("give --trials, or --labels with --detections-dir")),
    };

    let auc = auroc(&trials)?;
    let err = eer(&trials)?;
    let recalls = if pos_fired.is_empty() {
        args.far.iter().map(|&f| (f, 0.0)).collect()
    } else {
        let fired = pos_fired.len() as f64 / positives as f64;
        recall_at_far(&pos_fired, &neg_fired, args.hours, &args.far)?
            .into_iter()
            .map(|(f, r)| (f, r * fired))
            .collect::<Vec<_>>()
    };
    let (pos, neg): (Vec<&Trial>, Vec<&Trial>) = trials.iter().partition(|t| t.is_positive());
    let det = det_curve(
        &pos.iter().map(|t| t.score).collect::<Vec<_>>(),
        &neg.iter().map(|t| t.score).collect::<Vec<_>>(),
        args.hours,
    )?;

    println!("trials    {} positive, {} negative", pos.len(), neg.len());
    println!("AUROC     {:.2}", 100.0 * auc);
    println!("EER       {:.2}", 100.0 * err);
    println!("FAR/h     recall");
    for (f, r) in &recalls {
        println!("{f:<9} {:.2}", 100.0 * r);
    }

    common::create_dir(&global.out_dir)?;
    let det_path = global.out_dir.join("det.csv");
    common::write_file(&det_path, det_to_csv(&det).as_bytes())?;
    let report = Report {
        positives: pos.len(),
        negatives: neg.len(),
        auroc: auc,
        eer: err,
        recall_at_far: recalls
            .iter()
            .map(|&(far_per_hour, recall)| RecallPoint { far_per_hour, recall })
            .collect(),
    };
    let report_path = global.out_dir.join("metrics.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    common::write_file(&report_path, text.as_bytes())?;
    manifest.outputs.extend([det_path, report_path]);
    manifest.write(&global.out_dir)
}
