//! Binary derivation trees and their canonical text form
//! `(CAT[from,to] left right)`, leaves `(CAT[from,to] entry_id)`.

use std::fmt;

use crate::category::{combine, parse_category, Category, Rule};
use crate::error::{Error, Result};
use crate::lattice::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseTree {
    Leaf {
        category: Category,
        span: Span,
        entry_id: String,
    },
    Branch {
        category: Category,
        span: Span,
        rule: Rule,
        left: Box<ParseTree>,
        right: Box<ParseTree>,
    },
}

impl ParseTree {
    pub fn category(&self) -> &Category {
        match self {
            ParseTree::Leaf { category, .. } | ParseTree::Branch { category, .. } => category,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            ParseTree::Leaf { span, .. } | ParseTree::Branch { span, .. } => *span,
        }
    }

    /// Number of tree nodes, leaves included.
    pub fn size(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Branch { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    pub fn leaves(&self) -> Vec<(&str, Span)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, Span)>) {
        match self {
            ParseTree::Leaf { entry_id, span, .. } => out.push((entry_id, *span)),
            ParseTree::Branch { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    pub fn leaf_ids(&self) -> Vec<&str> {
        self.leaves().into_iter().map(|(id, _)| id).collect()
    }

    /// Leaf spans tile the root span and every branch joins adjacent children.
    pub fn is_well_formed(&self) -> bool {
        match self {
            ParseTree::Leaf { span, .. } => span.from < span.to,
            ParseTree::Branch { span, left, right, .. } => {
                left.span().from == span.from
                    && left.span().to == right.span().from
                    && right.span().to == span.to
                    && left.is_well_formed()
                    && right.is_well_formed()
            }
        }
    }

    /// Same tree with suppression marks erased from every label.
    pub fn erase_suppression(&self) -> ParseTree {
        match self {
            ParseTree::Leaf {
                category,
                span,
                entry_id,
            } => ParseTree::Leaf {
                category: category.erase_suppression(),
                span: *span,
                entry_id: entry_id.clone(),
            },
            ParseTree::Branch {
                category,
                span,
                rule,
                left,
                right,
            } => ParseTree::Branch {
                category: category.erase_suppression(),
                span: *span,
                rule: *rule,
                left: Box::new(left.erase_suppression()),
                right: Box::new(right.erase_suppression()),
            },
        }
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Leaf {
                category,
                span,
                entry_id,
            } => write!(f, "({category}{span} {entry_id})"),
            ParseTree::Branch {
                category,
                span,
                left,
                right,
                ..
            } => write!(f, "({category}{span} {left} {right})"),
        }
    }
}

struct TreeReader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> TreeReader<'a> {
    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::TreeText(format!("{msg} at byte {}", self.pos)))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn token(&mut self) -> &'a str {
        let rest = &self.src[self.pos..];
        let end = rest.find(|c: char| c.is_whitespace() || c == ')').unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn node(&mut self) -> Result<ParseTree> {
        self.skip_ws();
        if !self.src[self.pos..].starts_with('(') {
            return self.err("expected `(`");
        }
        // a category may itself start with `(`, so the label runs to the next space
        self.pos += 1;
        let rest = &self.src[self.pos..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let label = &rest[..end];
        self.pos += end;
        let open = label
            .rfind('[')
            .ok_or_else(|| Error::TreeText(format!("label `{label}` lacks a span")))?;
        let (cat_text, span_text) = label.split_at(open);
        let inner = span_text
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| Error::TreeText(format!("bad span in `{label}`")))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::TreeText(format!("bad span in `{label}`")))?;
        let from: usize = a
            .parse()
            .map_err(|_| Error::TreeText(format!("bad span in `{label}`")))?;
        let to: usize = b
            .parse()
            .map_err(|_| Error::TreeText(format!("bad span in `{label}`")))?;
        if from >= to {
            return Err(Error::TreeText(format!("empty span in `{label}`")));
        }
        let span = Span::new(from, to);
        let category = parse_category(cat_text)?;
        self.skip_ws();
        let tree = if self.src[self.pos..].starts_with('(') {
            let left = self.node()?;
            let right = self.node()?;
            let rule = combine(left.category(), right.category())
                .into_iter()
                .find(|(c, _)| *c == category)
                .map_or(Rule::LeftCancel, |(_, r)| r);
            ParseTree::Branch {
                category,
                span,
                rule,
                left: Box::new(left),
                right: Box::new(right),
            }
        } else {
            let id = self.token();
            if id.is_empty() {
                return self.err("expected an entry id");
            }
            ParseTree::Leaf {
                category,
                span,
                entry_id: id.to_string(),
            }
        };
        self.skip_ws();
        if !self.src[self.pos..].starts_with(')') {
            return self.err("expected `)`");
        }
        self.pos += 1;
        Ok(tree)
    }
}

/// Reads the canonical text form back into a tree. Rules are not part of the
/// text; they are recovered from the labels where possible.
pub fn parse_tree_text(text: &str) -> Result<ParseTree> {
    let mut r = TreeReader { src: text, pos: 0 };
    let tree = r.node()?;
    r.skip_ws();
    if r.pos != text.len() {
        return r.err("trailing input");
    }
    if !tree.is_well_formed() {
        return Err(Error::TreeText("spans do not tile".into()));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let text = "(np[obj][0,10] (np|[0,8] (np|[0,5] pha-il) (np|\\(np|)[5,8] tul)) (np[obj]\\(np|)[8,10] ul))";
        let t = parse_tree_text(text).unwrap();
        assert_eq!(t.to_text(), text);
        assert_eq!(t.size(), 5);
        assert_eq!(t.leaf_ids(), ["pha-il", "tul", "ul"]);
        let ParseTree::Branch { rule, .. } = &t else { panic!() };
        assert_eq!(*rule, Rule::LeftCancel);
    }

    #[test]
    fn rejects_broken_text() {
        assert!(parse_tree_text("(np[0,1] a").is_err());
        assert!(parse_tree_text("(np a)").is_err());
        assert!(parse_tree_text("(np[0,2] (np[0,1] a) (np[2,3] b))").is_err());
        assert!(parse_tree_text("(np[0,1] a) x").is_err());
    }

    #[test]
    fn erasure_touches_only_labels() {
        let t = parse_tree_text("(np[0,8] (np|[0,5] pha-il) (np\\(np|)[5,8] tul))").unwrap();
        assert_eq!(
            t.erase_suppression().to_text(),
            "(np[0,8] (np[0,5] pha-il) (np\\np[5,8] tul))"
        );
    }
}
