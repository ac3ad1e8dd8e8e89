//! Detection-quality metrics over scored trials.
//!
//! Every metric accepts a trial when `score ≥ threshold`.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trial {
    pub label: Label,
    pub score: f64,
}

impl Trial {
    pub fn positive(score: f64) -> Self {
        Self {
            label: Label::Positive,
            score,
        }
    }

    pub fn negative(score: f64) -> Self {
        Self {
            label: Label::Negative,
            score,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

/// Builds trials from separate positive and negative score lists.
pub fn trials_from_scores(pos: &[f64], neg: &[f64]) -> Vec<Trial> {
    pos.iter()
        .map(|&s| Trial::positive(s))
        .chain(neg.iter().map(|&s| Trial::negative(s)))
        .collect()
}

fn split(trials: &[Trial]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for t in trials {
        if !t.score.is_finite() {
            return Err(Error::OutOfRange(format!("non-finite trial score {}", t.score)));
        }
        match t.label {
            Label::Positive => pos.push(t.score),
            Label::Negative => neg.push(t.score),
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::MissingClass);
    }
    Ok((pos, neg))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Number of entries of ascending `v` that are `< x` and `≤ x`.
fn rank_bounds(v: &[f64], x: f64) -> (usize, usize) {
    let below = v.partition_point(|&s| s < x);
    let at_most = v.partition_point(|&s| s <= x);
    (below, at_most)
}

/// Probability that a random positive outscores a random negative; ties count ½.
pub fn auroc(trials: &[Trial]) -> Result<f64> {
    let (pos, neg) = split(trials)?;
    let neg = sorted(neg);
    let mut doubled: u128 = 0;
    for &p in &pos {
        let (below, at_most) = rank_bounds(&neg, p);
        doubled += (2 * below + (at_most - below)) as u128;
    }
    Ok(doubled as f64 / (2.0 * pos.len() as f64 * neg.len() as f64))
}

/// False-accept and false-reject rates at threshold `tau`.
pub fn error_rates(pos_sorted: &[f64], neg_sorted: &[f64], tau: f64) -> (f64, f64) {
    let accepted_neg = neg_sorted.len() - neg_sorted.partition_point(|&s| s < tau);
    let rejected_pos = pos_sorted.partition_point(|&s| s < tau);
    (
        accepted_neg as f64 / neg_sorted.len() as f64,
        rejected_pos as f64 / pos_sorted.len() as f64,
    )
}

/// Equal error rate, interpolating linearly between the two operating points
/// that bracket the FAR/FRR crossing.
pub fn eer(trials: &[Trial]) -> Result<f64> {
    let (pos, neg) = split(trials)?;
    let pos = sorted(pos);
    let neg = sorted(neg);
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let mut prev: Option<(f64, f64)> = None;
    for tau in thresholds {
        let (far, frr) = error_rates(&pos, &neg, tau);
        let diff = far - frr;
        if diff <= 0.0 {
            return Ok(match prev {
                Some((pfar, pfrr)) if diff < 0.0 => {
                    let pdiff = pfar - pfrr;
                    let s = pdiff / (pdiff - diff);
                    pfar + s * (far - pfar)
                }
                _ => far,
            });
        }
        prev = Some((far, frr));
    }
    unreachable!("FRR reaches 1 at the +inf threshold")
}

/// Allowed false alarms for a rate budget; never exceeds `rate · hours`.
pub fn allowed_false_alarms(rate_per_hour: f64, hours: f64) -> usize {
    (rate_per_hour * hours * (1.0 + 1e-12)).floor() as usize
}

/// Recall at each false-alarm-rate target.
///
/// For a budget of `k` false alarms the threshold sits just above the
/// `(k+1)`-th highest negative score, so at most `k` negatives pass; with at
/// least as many allowed as there are negatives every positive passes.
pub fn recall_at_far(
    pos_scores: &[f64],
    neg_scores: &[f64],
    negative_hours: f64,
    far_targets: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(negative_hours > 0.0 && negative_hours.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "negative hours must be positive, got {negative_hours}"
        )));
    }
    if pos_scores.is_empty() {
        return Err(Error::MissingClass);
    }
    let mut neg = neg_scores.to_vec();
    neg.sort_by(|a, b| b.total_cmp(a));
    far_targets
        .iter()
        .map(|&f| {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::OutOfRange(format!("invalid FAR target {f}")));
            }
            let allowed = allowed_false_alarms(f, negative_hours);
            let passed = match neg.get(allowed) {
                None => pos_scores.len(),
                Some(&bar) => pos_scores.iter().filter(|&&s| s > bar).count(),
            };
            Ok((f, passed as f64 / pos_scores.len() as f64))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far_per_hour: f64,
    pub recall: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// One operating point per distinct observed score, highest threshold first.
pub fn det_curve(pos_scores: &[f64], neg_scores: &[f64], negative_hours: f64) -> Result<Vec<DetPoint>> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::MissingClass);
    }
    if !(negative_hours > 0.0 && negative_hours.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "negative hours must be positive, got {negative_hours}"
        )));
    }
    let pos = sorted(pos_scores.to_vec());
    let neg = sorted(neg_scores.to_vec());
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    Ok(thresholds
        .into_iter()
        .map(|tau| {
            let (fpr, fnr) = error_rates(&pos, &neg, tau);
            let accepted_neg = neg.len() - neg.partition_point(|&s| s < tau);
            DetPoint {
                threshold: tau,
                far_per_hour: accepted_neg as f64 / negative_hours,
                recall: 1.0 - fnr,
                fpr,
                fnr,
            }
        })
        .collect())
}

/// `threshold,far_per_hour,recall` with a header line.
pub fn det_to_csv(points: &[DetPoint]) -> String {
    let mut out = String::from("threshold,far_per_hour,recall\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.far_per_hour, p.recall));
    }
    out
}

/// Parses `label,score` lines (label 1 or 0). A non-numeric first line is a header.
pub fn parse_trials(text: &str) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let (label, score) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected `label,score`, got `{line}`")))?;
        let (label, score) = (label.trim(), score.trim());
        if i == 0 && score.parse::<f64>().is_err() {
            continue;
        }
        let label = match label {
            "1" => Label::Positive,
            "0" => Label::Negative,
            other => return Err(parse_err(format!("label must be 1 or 0, got `{other}`"))),
        };
        let score: f64 = score
            .parse()
            .map_err(|e| parse_err(format!("bad score `{score}`: {e}")))?;
        if !score.is_finite() {
            return Err(parse_err(format!("non-finite score {score}")));
        }
        out.push(Trial { label, score });
    }
    Ok(out)
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trials(&text)
}

pub fn trials_to_csv(trials: &[Trial]) -> String {
    let mut out = String::from("label,score\n");
    for t in trials {
        out.push_str(&format!("{},{}\n", u8::from(t.is_positive()), t.score));
    }
    out
}
