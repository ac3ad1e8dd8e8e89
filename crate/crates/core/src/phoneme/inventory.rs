use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved label of the CTC blank symbol.
pub const BLANK_LABEL: &str = "<blk>";

const VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];

const CONSONANTS: [&str; 24] = [
    "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N", "NG", "P", "R", "S", "SH", "T",
    "TH", "V", "W", "Y", "Z", "ZH",
];

/// Ordered phoneme label set with a reserved blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    blank_id: usize,
}

impl PhonemeInventory {
    /// Builds an inventory whose first symbol is the blank.
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.first().map(String::as_str) != Some(BLANK_LABEL) {
            return Err(Error::Inventory(format!(
                "first symbol must be the blank label `{BLANK_LABEL}`"
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::Inventory(format!("invalid label {s:?} at index {i}")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Inventory(format!("duplicate label `{s}`")));
            }
        }
        Ok(Self {
            symbols,
            index,
            blank_id: 0,
        })
    }

    /// Reads an inventory file: one label per line, line 1 must be `<blk>`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let symbols: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        Self::new(symbols)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = self.symbols.join("\n");
        out.push('\n');
        out
    }

    /// Blank plus 70 phonemes: stressed ARPAbet vowels, consonants and spoken noise.
    pub fn arpabet() -> Self {
        let mut symbols = vec![BLANK_LABEL.to_string()];
        for v in VOWELS {
            for stress in 0..3 {
                symbols.push(format!("{v}{stress}"));
            }
        }
        symbols.extend(CONSONANTS.iter().map(|c| c.to_string()));
        symbols.push("SPN".to_string());
        Self::new(symbols).expect("built-in inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_id(&self) -> usize {
        self.blank_id
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    /// Maps labels to ids, failing on the first unknown label.
    pub fn tokenize<S: AsRef<str>>(&self, labels: &[S]) -> Result<TokenSequence> {
        let ids = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                match self.id(l) {
                    Some(id) if id == self.blank_id => Err(Error::BlankInTarget),
                    Some(id) => Ok(id),
                    None => Err(Error::UnknownPhoneme(l.to_string())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TokenSequence::new(ids))
    }

    pub fn labels(&self, tokens: &TokenSequence) -> Vec<&str> {
        tokens
            .iter()
            .map(|id| self.label(id).unwrap_or("?"))
            .collect()
    }

    /// Checks every id is in range and none is the blank.
    pub fn validate_target(&self, tokens: &TokenSequence) -> Result<()> {
        for id in tokens.iter() {
            if id >= self.len() {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab: self.len(),
                });
            }
            if id == self.blank_id {
                return Err(Error::BlankInTarget);
            }
        }
        Ok(())
    }
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::arpabet()
    }
}

/// Sequence of token indices into a [`PhonemeInventory`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn starts_with(&self, prefix: &TokenSequence) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl From<Vec<usize>> for TokenSequence {
    fn from(ids: Vec<usize>) -> Self {
        Self(ids)
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}
