//! Exhaustive dynamic-programming chart parser. Every derivation of every
//! span is materialized, so the result is the full (unranked) forest that
//! relaxation parses are checked against.

use std::collections::{BTreeMap, BTreeSet};

use crate::category::{combine, unify, Category};
use crate::chart::lexical_assignments;
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::lattice::{MorphemeLattice, Span};
use crate::lexicon::Lexicon;
use crate::tree::ParseTree;

pub const DEFAULT_AMBIGUITY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleForest {
    /// Full-span trees accepted at the root, sorted by text, no duplicates.
    pub trees: Vec<ParseTree>,
    pub ambiguity_cap: usize,
    texts: BTreeSet<String>,
}

impl OracleForest {
    fn from_trees(trees: Vec<ParseTree>, cap: usize) -> OracleForest {
        let mut by_text: BTreeMap<String, ParseTree> = BTreeMap::new();
        for t in trees {
            by_text.entry(t.to_text()).or_insert(t);
        }
        OracleForest {
            texts: by_text.keys().cloned().collect(),
            trees: by_text.into_values().collect(),
            ambiguity_cap: cap,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.texts.iter().map(String::as_str)
    }
}

/// Membership by canonical text form.
pub fn forest_contains(f: &OracleForest, t: &ParseTree) -> bool {
    f.texts.contains(&t.to_text())
}

/// Every derivation per span, keyed by span. Cells are filled in order of
/// increasing span length.
#[derive(Debug, Clone, Default)]
pub struct OracleChart {
    pub cells: BTreeMap<Span, Vec<ParseTree>>,
}

impl OracleChart {
    pub fn cell(&self, span: Span) -> &[ParseTree] {
        self.cells.get(&span).map_or(&[], Vec::as_slice)
    }

    /// Distinct categories derivable over a span.
    pub fn categories(&self, span: Span) -> BTreeSet<Category> {
        self.cell(span).iter().map(|t| t.category().clone()).collect()
    }
}

pub fn fill_oracle_chart(ml: &MorphemeLattice, lex: &Lexicon, cap: usize) -> Result<OracleChart> {
    let mut chart = OracleChart::default();
    let assignment = lexical_assignments(ml, lex);
    for (i, category) in assignment.items {
        let e = &ml.edges[i];
        chart.cells.entry(e.span()).or_default().push(ParseTree::Leaf {
            category,
            span: e.span(),
            entry_id: e.label.clone(),
        });
    }
    let n = ml.vertex_count;
    for len in 2..n {
        for i in 0..n - len {
            let j = i + len;
            let span = Span::new(i, j);
            let mut built = Vec::new();
            for k in i + 1..j {
                let left = chart.cell(Span::new(i, k));
                let right = chart.cell(Span::new(k, j));
                for l in left {
                    for r in right {
                        for (category, rule) in combine(l.category(), r.category()) {
                            built.push(ParseTree::Branch {
                                category,
                                span,
                                rule,
                                left: Box::new(l.clone()),
                                right: Box::new(r.clone()),
                            });
                            if built.len() + chart.cell(span).len() > cap {
                                return Err(Error::AmbiguityCap { cap, span });
                            }
                        }
                    }
                }
            }
            if !built.is_empty() {
                chart.cells.entry(span).or_default().extend(built);
            }
        }
    }
    Ok(chart)
}

/// All full-span derivations whose root matches `target`, or any of the
/// grammar's sentence categories when no target is given.
pub fn exhaustive_parse(
    ml: &MorphemeLattice,
    lex: &Lexicon,
    g: &Grammar,
    target: Option<&Category>,
    cap: usize,
) -> Result<OracleForest> {
    g.check_lexicon(lex)?;
    let chart = fill_oracle_chart(ml, lex, cap)?;
    let full = Span::new(0, ml.last());
    let trees = chart
        .cell(full)
        .iter()
        .filter(|t| match target {
            Some(c) => unify(c, t.category()).is_some(),
            None => g.accepts(t.category()),
        })
        .cloned()
        .collect();
    Ok(OracleForest::from_trees(trees, cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;
    use crate::lattice::Edge;
    use crate::lexicon::load_lexicon;
    use crate::tree::parse_tree_text;

    const LEX: &str = "\
phonemes a b c d
class n
class f
connect n n
connect f n
connect n f
boundary start n f
boundary end n f
morpheme x n /a/
  variant left=ANY right=ANY cat=np
morpheme y f /b/
  variant left=ANY right=ANY cat=np/np
morpheme z f /c/
  variant left=ANY right=ANY cat=s\\np
morpheme w n /d/
  variant left=ANY right=ANY cat=np\\np
";

    fn lattice(labels: &[&str]) -> MorphemeLattice {
        let edges = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Edge::new(i, i + 1, l, 1.0))
            .collect();
        MorphemeLattice::new(labels.len() + 1, edges)
    }

    fn grammar() -> Grammar {
        let names = ["np", "s"].iter().map(|s| s.to_string()).collect();
        Grammar::new(names, vec![parse_category("s").unwrap()], "test").unwrap()
    }

    #[test]
    fn counts_bracketings() {
        let lex = load_lexicon(LEX).unwrap();
        let ml = lattice(&["y", "y", "x", "z"]);
        let f = exhaustive_parse(&ml, &lex, &grammar(), None, DEFAULT_AMBIGUITY_CAP).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(
            f.trees[0].to_text(),
            "(s[0,4] (np[0,3] (np/np[0,1] y) (np[1,3] (np/np[1,2] y) (np[2,3] x))) (s\\np[3,4] z))"
        );
        assert!(forest_contains(&f, &f.trees[0]));
    }

    #[test]
    fn membership_is_textual() {
        let lex = load_lexicon(LEX).unwrap();
        let ml = lattice(&["y", "x"]);
        let np = parse_category("np").unwrap();
        let f = exhaustive_parse(&ml, &lex, &grammar(), Some(&np), DEFAULT_AMBIGUITY_CAP).unwrap();
        let good = parse_tree_text("(np[0,2] (np/np[0,1] y) (np[1,2] x))").unwrap();
        let wrong_split = parse_tree_text("(np[0,2] (np/np[0,2] y) (np[2,2] x))");
        assert!(forest_contains(&f, &good));
        assert!(wrong_split.is_err() || !forest_contains(&f, &wrong_split.unwrap()));
        let moved = parse_tree_text("(np[0,3] (np/np[0,1] y) (np[1,3] x))").unwrap();
        assert!(!forest_contains(&f, &moved));
        assert!(!forest_contains(&OracleForest::default(), &good));
    }

    #[test]
    fn cap_names_span() {
        let lex = load_lexicon(LEX).unwrap();
        let ml = lattice(&["y", "x", "w"]);
        let np = parse_category("np").unwrap();
        let f = exhaustive_parse(&ml, &lex, &grammar(), Some(&np), 2).unwrap();
        assert_eq!(f.len(), 2);
        let err = exhaustive_parse(&ml, &lex, &grammar(), Some(&np), 1).unwrap_err();
        assert!(matches!(err, Error::AmbiguityCap { cap: 1, .. }));
    }

    #[test]
    fn empty_forest_is_not_an_error() {
        let lex = load_lexicon(LEX).unwrap();
        let ml = lattice(&["x", "x"]);
        let f = exhaustive_parse(&ml, &lex, &grammar(), None, DEFAULT_AMBIGUITY_CAP).unwrap();
        assert!(f.is_empty());
    }
}
