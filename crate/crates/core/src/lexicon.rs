//! Morpheme lexicon: surfaces, morphological classes, context-conditioned
//! category variants, the class connectivity matrix and the phoneme trie.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::category::{parse_category, Category, CategoryKind};
use crate::error::{Error, Result};

/// A neighbouring position as seen from a morpheme: another morpheme's class
/// or the utterance edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    Boundary,
    Class(String),
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Boundary => f.write_str("BOUNDARY"),
            Context::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Any,
    Boundary,
    Classes(BTreeSet<String>),
}

impl Condition {
    pub fn matches(&self, ctx: &Context) -> bool {
        match (self, ctx) {
            (Condition::Any, _) => true,
            (Condition::Boundary, Context::Boundary) => true,
            (Condition::Classes(set), Context::Class(c)) => set.contains(c),
            _ => false,
        }
    }

    fn parse(text: &str) -> Condition {
        match text {
            "ANY" => Condition::Any,
            "BOUNDARY" => Condition::Boundary,
            _ => Condition::Classes(text.split(',').map(str::to_string).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub left: Condition,
    pub right: Condition,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphemeEntry {
    pub id: String,
    pub surface: Vec<String>,
    pub class: String,
    pub variants: Vec<Variant>,
}

impl MorphemeEntry {
    /// Category for one neighbour context; the first matching variant wins.
    pub fn category_in(&self, left: &Context, right: &Context) -> Option<&Category> {
        self.variants
            .iter()
            .find(|v| v.left.matches(left) && v.right.matches(right))
            .map(|v| &v.category)
    }
}

/// Categories of `entry` in the given neighbour context. Returns at most one
/// category (ordered matching); empty means the entry is unusable there.
pub fn assign_categories(entry: &MorphemeEntry, left: &Context, right: &Context) -> Vec<Category> {
    entry.category_in(left, right).cloned().into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConnectivityMatrix {
    classes: BTreeSet<String>,
    pairs: BTreeSet<(String, String)>,
    pub start_classes: BTreeSet<String>,
    pub end_classes: BTreeSet<String>,
}

impl ConnectivityMatrix {
    pub fn new(classes: impl IntoIterator<Item = String>) -> Self {
        ConnectivityMatrix {
            classes: classes.into_iter().collect(),
            ..Default::default()
        }
    }

    fn check(&self, class: &str) -> Result<()> {
        if self.classes.contains(class) {
            Ok(())
        } else {
            Err(Error::UndeclaredClass(class.to_string()))
        }
    }

    pub fn allow(&mut self, left: &str, right: &str) -> Result<()> {
        self.check(left)?;
        self.check(right)?;
        self.pairs.insert((left.to_string(), right.to_string()));
        Ok(())
    }

    pub fn connectable(&self, left: &str, right: &str) -> Result<bool> {
        self.check(left)?;
        self.check(right)?;
        Ok(self.is_connectable(left, right))
    }

    /// Unchecked lookup; undeclared classes are never connectable.
    pub fn is_connectable(&self, left: &str, right: &str) -> bool {
        self.pairs.contains(&(left.to_string(), right.to_string()))
    }

    pub fn can_start(&self, class: &str) -> bool {
        self.start_classes.contains(class)
    }

    pub fn can_end(&self, class: &str) -> bool {
        self.end_classes.contains(class)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(l, r)| (l.as_str(), r.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub phonemes: BTreeSet<String>,
    pub classes: BTreeSet<String>,
    pub entries: BTreeMap<String, MorphemeEntry>,
    pub connectivity: ConnectivityMatrix,
}

impl Lexicon {
    pub fn entry(&self, id: &str) -> Option<&MorphemeEntry> {
        self.entries.get(id)
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.entries.get(id).map(|e| e.class.as_str())
    }

    /// The same lexicon with every suppression mark erased from its
    /// categories: the unordered-argument-only grammar.
    pub fn erase_suppression(&self) -> Lexicon {
        let mut out = self.clone();
        for entry in out.entries.values_mut() {
            for v in &mut entry.variants {
                v.category = v.category.erase_suppression();
            }
        }
        out
    }

    pub fn basic_category_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        for e in self.entries.values() {
            for v in &e.variants {
                v.category.collect_basic_names(&mut names);
            }
        }
        names
    }

    /// Data-level check on suppression placement: a variant conditioned on a
    /// bound class to its right must carry a suppressed (or suppressed-result)
    /// category; a variant conditioned on the right utterance edge must be
    /// ordinary or an activator. Returns one message per offending variant.
    pub fn suppression_violations(&self, bound_classes: &[&str]) -> Vec<String> {
        let mut out = Vec::new();
        for e in self.entries.values() {
            for v in &e.variants {
                let kind = v.category.classify();
                match &v.right {
                    Condition::Classes(set) if set.iter().any(|c| bound_classes.contains(&c.as_str())) => {
                        let suppressed_result = matches!(
                            &v.category,
                            Category::Functor { result, .. } if result.is_suppressed()
                        );
                        if kind != CategoryKind::Suppressed && !suppressed_result {
                            out.push(format!(
                                "{}: `{}` before a bound class is not suppressed",
                                e.id, v.category
                            ));
                        }
                    }
                    Condition::Boundary if kind == CategoryKind::Suppressed => {
                        out.push(format!("{}: `{}` at the right edge is suppressed", e.id, v.category));
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

fn lex_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Lexicon { line, msg: msg.into() })
}

fn parse_surface(text: &str, line: usize) -> Result<Vec<String>> {
    let inner = text
        .strip_prefix('/')
        .and_then(|t| t.strip_suffix('/'))
        .ok_or_else(|| Error::Lexicon {
            line,
            msg: format!("surface `{text}` must be written /a,b,c/"),
        })?;
    let syms: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
    if syms.iter().any(String::is_empty) {
        return lex_err(line, format!("empty phoneme in surface `{text}`"));
    }
    Ok(syms)
}

/// Parses a lexicon file. See the crate README for the format.
pub fn load_lexicon(text: &str) -> Result<Lexicon> {
    let mut phonemes = BTreeSet::new();
    let mut classes = BTreeSet::new();
    let mut connects: Vec<(usize, String, String)> = Vec::new();
    let mut starts: Vec<(usize, String)> = Vec::new();
    let mut ends: Vec<(usize, String)> = Vec::new();
    let mut entries: BTreeMap<String, MorphemeEntry> = BTreeMap::new();
    let mut entry_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut current: Option<MorphemeEntry> = None;
    let mut pending_classes: Vec<(usize, String)> = Vec::new();

    let finish =
        |cur: Option<MorphemeEntry>, entries: &mut BTreeMap<String, MorphemeEntry>, line: usize| -> Result<()> {
            if let Some(e) = cur {
                if e.variants.is_empty() {
                    return lex_err(line, format!("morpheme `{}` has no variants", e.id));
                }
                entries.insert(e.id.clone(), e);
            }
            Ok(())
        };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indented = content.starts_with(' ') || content.starts_with('\t');
        let words: Vec<&str> = content.split_whitespace().collect();
        if indented {
            if words[0] != "variant" {
                return lex_err(line, format!("unexpected indented `{}`", words[0]));
            }
            let Some(entry) = current.as_mut() else {
                return lex_err(line, "variant without a preceding morpheme");
            };
            let mut left = None;
            let mut right = None;
            let mut cat = None;
            for w in &words[1..] {
                let (k, v) = w.split_once('=').ok_or_else(|| Error::Lexicon {
                    line,
                    msg: format!("expected key=value, got `{w}`"),
                })?;
                match k {
                    "left" => left = Some(Condition::parse(v)),
                    "right" => right = Some(Condition::parse(v)),
                    "cat" => {
                        cat = Some(parse_category(v).map_err(|e| Error::Lexicon {
                            line,
                            msg: format!("category `{v}`: {e}"),
                        })?)
                    }
                    _ => return lex_err(line, format!("unknown variant key `{k}`")),
                }
            }
            let (Some(left), Some(right), Some(category)) = (left, right, cat) else {
                return lex_err(line, "variant needs left=, right= and cat=");
            };
            for cond in [&left, &right] {
                if let Condition::Classes(set) = cond {
                    for c in set {
                        pending_classes.push((line, c.clone()));
                    }
                }
            }
            entry.variants.push(Variant { left, right, category });
            continue;
        }
        match words[0] {
            "phonemes" => phonemes.extend(words[1..].iter().map(|s| s.to_string())),
            "class" => {
                if words.len() != 2 {
                    return lex_err(line, "expected `class <name>`");
                }
                if !classes.insert(words[1].to_string()) {
                    return lex_err(line, format!("duplicate class `{}`", words[1]));
                }
            }
            "connect" => {
                if words.len() != 3 {
                    return lex_err(line, "expected `connect <left> <right>`");
                }
                connects.push((line, words[1].to_string(), words[2].to_string()));
            }
            "boundary" => {
                let target = match words.get(1) {
                    Some(&"start") => &mut starts,
                    Some(&"end") => &mut ends,
                    _ => return lex_err(line, "expected `boundary start|end <class>...`"),
                };
                target.extend(words[2..].iter().map(|c| (line, c.to_string())));
            }
            "morpheme" => {
                finish(current.take(), &mut entries, line)?;
                if words.len() != 4 {
                    return lex_err(line, "expected `morpheme <id> <class> /<sym>,...,<sym>/`");
                }
                let id = words[1].to_string();
                if entries.contains_key(&id) {
                    return lex_err(line, format!("duplicate morpheme id `{id}`"));
                }
                let surface = parse_surface(words[3], line)?;
                for s in &surface {
                    if !phonemes.contains(s) {
                        return lex_err(line, format!("unknown phoneme symbol `{s}` in `{id}`"));
                    }
                }
                pending_classes.push((line, words[2].to_string()));
                entry_lines.insert(id.clone(), line);
                current = Some(MorphemeEntry {
                    id,
                    surface,
                    class: words[2].to_string(),
                    variants: Vec::new(),
                });
            }
            other => return lex_err(line, format!("unknown directive `{other}`")),
        }
    }
    let last_line = text.lines().count();
    finish(current.take(), &mut entries, last_line)?;

    if entries.is_empty() {
        return lex_err(last_line.max(1), "no entries");
    }
    for (line, c) in &pending_classes {
        if !classes.contains(c) {
            return lex_err(*line, format!("undeclared class `{c}`"));
        }
    }
    let mut connectivity = ConnectivityMatrix::new(classes.iter().cloned());
    for (line, l, r) in &connects {
        connectivity.allow(l, r).map_err(|e| Error::Lexicon {
            line: *line,
            msg: e.to_string(),
        })?;
    }
    for (list, target) in [
        (&starts, &mut connectivity.start_classes),
        (&ends, &mut connectivity.end_classes),
    ] {
        for (line, c) in list {
            if !classes.contains(c) {
                return lex_err(*line, format!("undeclared class `{c}`"));
            }
            target.insert(c.clone());
        }
    }
    Ok(Lexicon {
        phonemes,
        classes,
        entries,
        connectivity,
    })
}

/// Deterministic phoneme trie over entry surfaces.
#[derive(Debug, Clone, Default)]
pub struct PhonemeTrie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
pub struct TrieNode {
    pub children: BTreeMap<String, usize>,
    pub entries: BTreeSet<String>,
}

impl PhonemeTrie {
    pub const ROOT: usize = 0;

    pub fn node(&self, idx: usize) -> &TrieNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn child(&self, node: usize, phoneme: &str) -> Option<usize> {
        self.nodes[node].children.get(phoneme).copied()
    }

    /// Depth of every node, root = 0.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        let mut stack = vec![Self::ROOT];
        while let Some(n) = stack.pop() {
            for &c in self.nodes[n].children.values() {
                depth[c] = depth[n] + 1;
                stack.push(c);
            }
        }
        depth
    }
}

pub fn build_trie(lex: &Lexicon) -> PhonemeTrie {
    let mut trie = PhonemeTrie {
        nodes: vec![TrieNode::default()],
    };
    for entry in lex.entries.values() {
        let mut node = PhonemeTrie::ROOT;
        for sym in &entry.surface {
            node = match trie.nodes[node].children.get(sym) {
                Some(&next) => next,
                None => {
                    let next = trie.nodes.len();
                    trie.nodes.push(TrieNode::default());
                    trie.nodes[node].children.insert(sym.clone(), next);
                    next
                }
            };
        }
        trie.nodes[node].entries.insert(entry.id.clone());
    }
    trie
}

pub fn trie_lookup<S: AsRef<str>>(trie: &PhonemeTrie, seq: &[S]) -> BTreeSet<String> {
    if seq.is_empty() {
        return BTreeSet::new();
    }
    let mut node = PhonemeTrie::ROOT;
    for sym in seq {
        match trie.child(node, sym.as_ref()) {
            Some(next) => node = next,
            None => return BTreeSet::new(),
        }
    }
    trie.node(node).entries.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = "\
phonemes s a y p h i l t u
class prenoun
class noun
class noun-suffix
class noun-ending
connect prenoun noun
connect noun noun-suffix
connect noun noun-ending
connect noun-suffix noun-ending
boundary start prenoun noun
boundary end noun noun-suffix noun-ending
morpheme say prenoun /s,a,y/
  variant left=ANY right=ANY cat=np/np
morpheme pha-il noun /p,h,a,i,l/
  variant left=ANY right=noun-suffix,noun-ending cat=np|
  variant left=ANY right=ANY cat=np
morpheme tul noun-suffix /t,u,l/   # plural
  variant left=ANY right=noun-ending cat=np|\\(np|)
  variant left=ANY right=ANY cat=np\\(np|)
morpheme ul noun-ending /u,l/
  variant left=ANY right=ANY cat=np[obj]\\(np|)
";

    fn ctx(c: &str) -> Context {
        Context::Class(c.to_string())
    }

    #[test]
    fn loads_suppression_lexicon() {
        let lex = load_lexicon(FIG4).unwrap();
        assert_eq!(lex.entries.len(), 4);
        assert_eq!(lex.entry("pha-il").unwrap().surface, ["p", "h", "a", "i", "l"]);
        assert!(lex.suppression_violations(&["noun-suffix", "noun-ending"]).is_empty());
    }

    #[test]
    fn load_errors() {
        let no_entries = "phonemes a\nclass noun\n";
        assert!(matches!(load_lexicon(no_entries), Err(Error::Lexicon { msg, .. }) if msg == "no entries"));

        let bad_sym = "phonemes a\nclass noun\nmorpheme x noun /a,z/\n  variant left=ANY right=ANY cat=np\n";
        match load_lexicon(bad_sym) {
            Err(Error::Lexicon { line: 3, msg }) => assert!(msg.contains("`z`"), "{msg}"),
            other => panic!("{other:?}"),
        }

        let dup = "phonemes a\nclass noun\nmorpheme x noun /a/\n  variant left=ANY right=ANY cat=np\nmorpheme x noun /a/\n  variant left=ANY right=ANY cat=np\n";
        assert!(matches!(load_lexicon(dup), Err(Error::Lexicon { line: 5, .. })));

        let bad_cat = "phonemes a\nclass noun\nmorpheme x noun /a/\n  variant left=ANY right=ANY cat=np/\n";
        assert!(matches!(load_lexicon(bad_cat), Err(Error::Lexicon { line: 4, .. })));

        let bad_class = "phonemes a\nclass noun\nmorpheme x noun /a/\n  variant left=verb right=ANY cat=np\n";
        assert!(matches!(load_lexicon(bad_class), Err(Error::Lexicon { line: 4, .. })));

        let no_variant = "phonemes a\nclass noun\nmorpheme x noun /a/\n";
        assert!(load_lexicon(no_variant).is_err());
    }

    #[test]
    fn assigns_context_conditioned_categories() {
        let lex = load_lexicon(FIG4).unwrap();
        let pha = lex.entry("pha-il").unwrap();
        let tul = lex.entry("tul").unwrap();
        let c = |s: &str| parse_category(s).unwrap();
        assert_eq!(
            assign_categories(pha, &Context::Boundary, &ctx("noun-suffix")),
            vec![c("np|")]
        );
        assert_eq!(
            assign_categories(pha, &ctx("prenoun"), &Context::Boundary),
            vec![c("np")]
        );
        assert_eq!(
            assign_categories(tul, &ctx("noun"), &ctx("noun-ending")),
            vec![c("np|\\(np|)")]
        );
        assert_eq!(
            assign_categories(tul, &ctx("noun"), &Context::Boundary),
            vec![c("np\\(np|)")]
        );
    }

    #[test]
    fn boundary_condition_matches_only_boundary() {
        assert!(Condition::Boundary.matches(&Context::Boundary));
        assert!(!Condition::Boundary.matches(&ctx("noun")));
        assert!(Condition::Any.matches(&Context::Boundary));
        assert!(!Condition::parse("noun").matches(&Context::Boundary));
    }

    #[test]
    fn connectivity_lookup() {
        let lex = load_lexicon(FIG4).unwrap();
        let m = &lex.connectivity;
        assert!(m.connectable("noun", "noun-suffix").unwrap());
        assert!(!m.connectable("noun-ending", "noun-suffix").unwrap());
        assert!(!m.connectable("noun", "noun").unwrap());
        assert!(matches!(m.connectable("verb", "noun"), Err(Error::UndeclaredClass(_))));
    }

    #[test]
    fn trie_shapes() {
        let text = "phonemes p h a i l\nclass noun\n\
            morpheme pha-il noun /p,h,a,i,l/\n  variant left=ANY right=ANY cat=np\n\
            morpheme pha noun /p,h,a/\n  variant left=ANY right=ANY cat=np\n\
            morpheme pha2 noun /p,h,a/\n  variant left=ANY right=ANY cat=np\n";
        let lex = load_lexicon(text).unwrap();
        let trie = build_trie(&lex);
        // shared prefix: one chain of five nodes below the root
        assert_eq!(trie.len(), 6);
        let depths = trie.depths();
        for (i, depth) in depths.iter().enumerate() {
            let ids = &trie.node(i).entries;
            match depth {
                3 => assert_eq!(ids.iter().map(String::as_str).collect::<Vec<_>>(), ["pha", "pha2"]),
                5 => assert_eq!(ids.iter().map(String::as_str).collect::<Vec<_>>(), ["pha-il"]),
                _ => assert!(ids.is_empty()),
            }
        }
        assert_eq!(trie_lookup(&trie, &["p", "h", "a", "i", "l"]).len(), 1);
        assert!(trie_lookup(&trie, &["z"]).is_empty());
        assert!(trie_lookup::<&str>(&trie, &[]).is_empty());
    }

    #[test]
    fn single_entry_trie_is_a_chain() {
        let text = "phonemes k u\nclass noun\nmorpheme ku noun /k,u/\n  variant left=ANY right=ANY cat=np\n";
        let trie = build_trie(&load_lexicon(text).unwrap());
        assert_eq!(trie.len(), 3);
        assert_eq!(trie.depths(), vec![0, 1, 2]);
    }
}
