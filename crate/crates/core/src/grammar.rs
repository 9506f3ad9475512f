use std::collections::BTreeSet;

use crate::category::{unify, Category};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Grammar-level data outside the lexicon: basic category names and the
/// categories accepted at the root. Cancellation is [`crate::category::combine`]
/// and the assignment function lives in the lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub basic_category_names: BTreeSet<String>,
    pub sentence_categories: Vec<Category>,
    pub lexicon_ref: String,
}

impl Grammar {
    pub fn new(
        basic_category_names: BTreeSet<String>,
        sentence_categories: Vec<Category>,
        lexicon_ref: &str,
    ) -> Result<Grammar> {
        if sentence_categories.is_empty() {
            return Err(Error::Params("grammar needs at least one sentence category".into()));
        }
        Ok(Grammar {
            basic_category_names,
            sentence_categories,
            lexicon_ref: lexicon_ref.to_string(),
        })
    }

    /// Grammar whose basic categories are exactly those the lexicon uses.
    pub fn for_lexicon(lex: &Lexicon, sentence_categories: Vec<Category>, lexicon_ref: &str) -> Result<Grammar> {
        let g = Grammar::new(lex.basic_category_names(), sentence_categories, lexicon_ref)?;
        g.check_lexicon(lex)?;
        Ok(g)
    }

    pub fn check_lexicon(&self, lex: &Lexicon) -> Result<()> {
        let used = lex.basic_category_names();
        let mut sentence = BTreeSet::new();
        for s in &self.sentence_categories {
            s.collect_basic_names(&mut sentence);
        }
        match used.union(&sentence).find(|n| !self.basic_category_names.contains(*n)) {
            Some(n) => Err(Error::Params(format!("basic category `{n}` is not declared"))),
            None => Ok(()),
        }
    }

    pub fn accepts(&self, c: &Category) -> bool {
        self.sentence_categories.iter().any(|s| unify(s, c).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;

    #[test]
    fn accepts_declared_sentence_categories() {
        let names = ["s", "np"].iter().map(|s| s.to_string()).collect();
        let g = Grammar::new(names, vec![parse_category("s[DEC]").unwrap()], "test").unwrap();
        assert!(g.accepts(&parse_category("s[DEC]").unwrap()));
        assert!(!g.accepts(&parse_category("s").unwrap()));
        assert!(Grammar::new(BTreeSet::new(), vec![], "x").is_err());
    }
}
