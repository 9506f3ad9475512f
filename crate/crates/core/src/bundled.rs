//! Data files shipped with the crate: the two lexicon variants, a synthetic
//! confusion matrix and a small evaluation corpus.

use crate::category::parse_category;
use crate::error::Result;
use crate::grammar::Grammar;
use crate::lexicon::{load_lexicon, Lexicon};
use crate::sim::{load_confusion, load_corpus, ConfusionMatrix, CorpusSentence};

pub const LEXICON_UASC: &str = include_str!("../data/lexicon_uasc.lex");
pub const LEXICON_UA: &str = include_str!("../data/lexicon_ua.lex");
pub const CONFUSION: &str = include_str!("../data/confusion.cm");
pub const CORPUS: &str = include_str!("../data/corpus.txt");

/// Root categories accepted when no per-sentence target is given.
pub const SENTENCE_CATEGORIES: [&str; 5] = ["s[DEC]", "np", "np[subj]", "np[obj]", "np[dat]"];

pub fn lexicon_uasc() -> Result<Lexicon> {
    load_lexicon(LEXICON_UASC)
}

pub fn lexicon_ua() -> Result<Lexicon> {
    load_lexicon(LEXICON_UA)
}

pub fn confusion(lex: &Lexicon) -> Result<ConfusionMatrix> {
    load_confusion(CONFUSION, Some(&lex.phonemes))
}

pub fn corpus(lex: &Lexicon) -> Result<Vec<CorpusSentence>> {
    load_corpus(CORPUS, lex)
}

/// Grammar covering both bundled lexicons.
pub fn grammar(lex: &Lexicon) -> Result<Grammar> {
    let cats = SENTENCE_CATEGORIES
        .iter()
        .map(|c| parse_category(c))
        .collect::<Result<Vec<_>>>()?;
    Grammar::for_lexicon(lex, cats, "bundled")
}
