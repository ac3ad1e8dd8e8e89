use crate::error::{Error, Result};
use crate::phoneme::{Lexicon, TokenSequence};

/// Stage-1 threshold used when a keyword line does not give one.
pub const DEFAULT_STAGE1_THRESHOLD: f64 = 0.04;

/// Interleaves blanks around and between tokens: `[φ, w1, φ, …, φ, wU, φ]`.
pub fn expand_with_blanks(tokens: &TokenSequence, blank: usize) -> Result<Vec<usize>> {
    if tokens.is_empty() {
        return Err(Error::Empty("keyword tokens"));
    }
    let mut out = Vec::with_capacity(2 * tokens.len() + 1);
    out.push(blank);
    for id in tokens.iter() {
        if id == blank {
            return Err(Error::BlankInTarget);
        }
        out.push(id);
        out.push(blank);
    }
    Ok(out)
}

/// A registered keyword: its phoneme targets and stage-1 threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSpec {
    text: String,
    tokens: TokenSequence,
    interleaved: Vec<usize>,
    blank: usize,
    threshold: f64,
}

impl KeywordSpec {
    pub fn new(
        text: impl Into<String>,
        tokens: TokenSequence,
        blank: usize,
        threshold: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::OutOfRange(format!(
                "stage-1 threshold {threshold} not in [0, 1]"
            )));
        }
        let interleaved = expand_with_blanks(&tokens, blank)?;
        Ok(Self {
            text: text.into(),
            tokens,
            interleaved,
            blank,
            threshold,
        })
    }

    /// Looks the text up in `lexicon`.
    pub fn from_text(text: &str, lexicon: &Lexicon, blank: usize, threshold: f64) -> Result<Self> {
        let tokens = lexicon.g2p(text)?;
        Self::new(text.trim(), tokens, blank, threshold)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn interleaved(&self) -> &[usize] {
        &self.interleaved
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::OutOfRange(format!(
                "stage-1 threshold {threshold} not in [0, 1]"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }
}

/// One line of a keyword config file.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordEntry {
    pub text: String,
    pub threshold: f64,
}

/// Parses `text<TAB>threshold` lines; the threshold column is optional.
pub fn parse_keyword_config(text: &str) -> Result<Vec<KeywordEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (kw, thr) = match line.split_once('\t') {
            Some((kw, thr)) => {
                let v = thr.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 1,
                    message: format!("bad threshold {thr:?}: {e}"),
                })?;
                (kw, v)
            }
            None => (line, DEFAULT_STAGE1_THRESHOLD),
        };
        if !(0.0..=1.0).contains(&thr) {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("threshold {thr} not in [0, 1]"),
            });
        }
        let kw = kw.trim();
        if kw.is_empty() {
            return Err(Error::Parse {
                line: n + 1,
                message: "empty keyword".into(),
            });
        }
        out.push(KeywordEntry {
            text: kw.to_string(),
            threshold: thr,
        });
    }
    Ok(out)
}
