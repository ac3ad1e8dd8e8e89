//! Phoneme inventory, lexicon lookup, and phoneme-level error rates.

mod edit;
mod inventory;
mod lexicon;

pub use edit::{contains_run, edit_distance, hard_negative, p_wer, EditCounts};
pub use inventory::{PhonemeInventory, TokenSequence, BLANK_LABEL};
pub use lexicon::{g2p, normalize_word, Lexicon};
