use std::collections::HashMap;
use std::path::Path;

use super::inventory::{PhonemeInventory, TokenSequence};
use crate::error::{Error, Result};

const BUILTIN_LEXICON: &str = include_str!("../../assets/lexicon.txt");

/// Lowercases a word and strips leading/trailing non-alphanumeric characters.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Word to phoneme-sequence dictionary bound to an inventory.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    labels: Vec<String>,
    tokens: TokenSequence,
}

impl Lexicon {
    pub fn empty() -> Self {
        Self {
            entries: HashMap::new(),
        }
    }

    /// Loads a `word<TAB>PH1 PH2 ...` file. Lines starting with `#` are skipped.
    pub fn load(path: impl AsRef<Path>, inventory: &PhonemeInventory) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, inventory)
    }

    /// Small English lexicon shipped with the crate, used for demos and fixtures.
    pub fn builtin(inventory: &PhonemeInventory) -> Result<Self> {
        Self::parse(BUILTIN_LEXICON, inventory)
    }

    pub fn parse(text: &str, inventory: &PhonemeInventory) -> Result<Self> {
        let mut lex = Self::empty();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (word, phones) = raw.split_once('\t').ok_or_else(|| Error::Parse {
                line,
                message: "expected `word<TAB>phonemes`".into(),
            })?;
            let key = normalize_word(word);
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("empty word {word:?}"),
                });
            }
            let labels: Vec<String> = phones.split_whitespace().map(str::to_owned).collect();
            if labels.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("no phonemes for `{key}`"),
                });
            }
            let tokens = inventory.tokenize(&labels)?;
            // first pronunciation wins
            lex.entries.entry(key).or_insert(Entry { labels, tokens });
        }
        Ok(lex)
    }

    pub fn insert(
        &mut self,
        word: &str,
        labels: &[&str],
        inventory: &PhonemeInventory,
    ) -> Result<()> {
        let tokens = inventory.tokenize(labels)?;
        self.entries.insert(
            normalize_word(word),
            Entry {
                labels: labels.iter().map(|s| s.to_string()).collect(),
                tokens,
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self, word: &str) -> Option<&[String]> {
        self.entries
            .get(&normalize_word(word))
            .map(|e| e.labels.as_slice())
    }

    pub fn tokens(&self, word: &str) -> Option<&TokenSequence> {
        self.entries.get(&normalize_word(word)).map(|e| &e.tokens)
    }

    /// Sorted list of the dictionary's words.
    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }

    /// Converts text to phoneme tokens by per-word lookup. Every OOV word is reported.
    pub fn g2p(&self, text: &str) -> Result<TokenSequence> {
        let words: Vec<String> = text
            .split_whitespace()
            .map(normalize_word)
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::Empty("keyword text"));
        }
        let mut ids = Vec::new();
        let mut oov = Vec::new();
        for w in &words {
            match self.entries.get(w) {
                Some(e) => ids.extend(e.tokens.iter()),
                None => {
                    if !oov.contains(w) {
                        oov.push(w.clone());
                    }
                }
            }
        }
        if !oov.is_empty() {
            return Err(Error::OutOfVocabulary(oov));
        }
        Ok(TokenSequence::new(ids))
    }
}

/// Free-function form of [`Lexicon::g2p`].
pub fn g2p(text: &str, lexicon: &Lexicon) -> Result<TokenSequence> {
    lexicon.g2p(text)
}
