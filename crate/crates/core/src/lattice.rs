//! Phoneme and morpheme lattices, lexical decoding through the phoneme trie
//! and pairwise connectivity filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PhonemeTrie};

/// Half-open vertex span `[from, to]` over lattice vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub from: usize,
    pub to: usize,
}

impl Span {
    pub fn new(from: usize, to: usize) -> Span {
        debug_assert!(from < to, "span {from}..{to} is not forward");
        Span { from, to }
    }

    pub fn len(&self) -> usize {
        self.to - self.from
    }

    pub fn is_empty(&self) -> bool {
        self.to <= self.from
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.from, self.to)
    }
}

pub trait LatticeKind {
    const NAME: &'static str;
    /// Morpheme lattices keep the phoneme time axis, so interior vertices
    /// with no incident edge are legal there.
    const ALLOW_UNUSED_VERTICES: bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhonemeKind {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MorphemeKind {}

impl LatticeKind for PhonemeKind {
    const NAME: &'static str = "phoneme";
    const ALLOW_UNUSED_VERTICES: bool = false;
}

impl LatticeKind for MorphemeKind {
    const NAME: &'static str = "morpheme";
    const ALLOW_UNUSED_VERTICES: bool = true;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Phoneme symbol or morpheme entry id.
    pub label: String,
    pub score: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, label: &str, score: f64) -> Edge {
        Edge {
            from,
            to,
            label: label.to_string(),
            score,
        }
    }

    pub fn span(&self) -> Span {
        Span {
            from: self.from,
            to: self.to,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<K> {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    kind: PhantomData<K>,
}

pub type PhonemeLattice = Lattice<PhonemeKind>;
pub type MorphemeLattice = Lattice<MorphemeKind>;

impl<K: LatticeKind> Lattice<K> {
    /// Edges are stored sorted by `(from, to, label)`.
    pub fn new(vertex_count: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by(|a, b| {
            (a.from, a.to, &a.label)
                .cmp(&(b.from, b.to, &b.label))
                .then(a.score.total_cmp(&b.score))
        });
        Lattice {
            vertex_count,
            edges,
            kind: PhantomData,
        }
    }

    /// Final vertex `T`.
    pub fn last(&self) -> usize {
        self.vertex_count.saturating_sub(1)
    }

    pub fn has_edge(&self, from: usize, to: usize, label: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.from == from && e.to == to && e.label == label)
    }

    /// `(forward-reachable from 0, backward-reachable from T)` per vertex.
    fn reachability(&self) -> (Vec<bool>, Vec<bool>) {
        let n = self.vertex_count;
        let mut fwd = vec![false; n];
        let mut bwd = vec![false; n];
        if n == 0 {
            return (fwd, bwd);
        }
        fwd[0] = true;
        bwd[n - 1] = true;
        let mut by_from: Vec<&Edge> = self.edges.iter().filter(|e| e.from < e.to && e.to < n).collect();
        by_from.sort_by_key(|e| e.from);
        for e in &by_from {
            if fwd[e.from] {
                fwd[e.to] = true;
            }
        }
        for e in by_from.iter().rev() {
            if bwd[e.to] {
                bwd[e.from] = true;
            }
        }
        (fwd, bwd)
    }

    /// Drops every edge that does not lie on a complete `0 → T` path.
    pub fn trimmed(&self) -> Self {
        let (fwd, bwd) = self.reachability();
        let edges = self
            .edges
            .iter()
            .filter(|e| e.from < e.to && e.to < self.vertex_count && fwd[e.from] && bwd[e.to])
            .cloned()
            .collect();
        Lattice::new(self.vertex_count, edges)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl<K: LatticeKind> fmt::Display for Lattice<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lattice {} kind={}", self.vertex_count, K::NAME)?;
        for e in &self.edges {
            writeln!(f, "edge {} {} {} {}", e.from, e.to, e.label, e.score)?;
        }
        Ok(())
    }
}

fn fmt_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::LatticeFormat { line, msg: msg.into() })
}

/// Reads the line-oriented lattice format. A `kind=` on the header must match
/// the requested kind.
pub fn parse_lattice<K: LatticeKind>(text: &str) -> Result<Lattice<K>> {
    let mut vertex_count = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "lattice" => {
                if vertex_count.is_some() {
                    return fmt_err(line, "duplicate header");
                }
                let n = words
                    .get(1)
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::LatticeFormat {
                        line,
                        msg: "expected `lattice <vertex_count>`".into(),
                    })?;
                for w in &words[2..] {
                    match w.strip_prefix("kind=") {
                        Some(k) if k == K::NAME => {}
                        Some(k) => return fmt_err(line, format!("expected kind={}, found kind={k}", K::NAME)),
                        None => return fmt_err(line, format!("unexpected `{w}`")),
                    }
                }
                vertex_count = Some(n);
            }
            "edge" => {
                if vertex_count.is_none() {
                    return fmt_err(line, "edge before header");
                }
                if words.len() != 5 {
                    return fmt_err(line, "expected `edge <from> <to> <label> <score>`");
                }
                let num = |w: &str| {
                    w.parse::<usize>().map_err(|_| Error::LatticeFormat {
                        line,
                        msg: format!("bad vertex `{w}`"),
                    })
                };
                let from = num(words[1])?;
                let to = num(words[2])?;
                let score = words[4].parse::<f64>().map_err(|_| Error::LatticeFormat {
                    line,
                    msg: format!("bad score `{}`", words[4]),
                })?;
                edges.push(Edge::new(from, to, words[3], score));
            }
            other => return fmt_err(line, format!("unknown directive `{other}`")),
        }
    }
    let n = vertex_count.ok_or_else(|| Error::LatticeFormat {
        line: 1,
        msg: "missing header".into(),
    })?;
    Ok(Lattice::new(n, edges))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVertices,
    VertexOutOfRange { edge: usize },
    NonForwardEdge { edge: usize },
    BadScore { edge: usize },
    DeadVertex { vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "lattice has no vertices"),
            Violation::VertexOutOfRange { edge } => write!(f, "vertex out of range on edge #{edge}"),
            Violation::NonForwardEdge { edge } => write!(f, "non-forward edge #{edge}"),
            Violation::BadScore { edge } => write!(f, "score outside (0,1] on edge #{edge}"),
            Violation::DeadVertex { vertex } => write!(f, "dead vertex {vertex}"),
        }
    }
}

pub fn validate_lattice<K: LatticeKind>(l: &Lattice<K>) -> Vec<Violation> {
    let mut out = Vec::new();
    if l.vertex_count == 0 {
        out.push(Violation::NoVertices);
        return out;
    }
    let mut used = vec![false; l.vertex_count];
    for (i, e) in l.edges.iter().enumerate() {
        if e.from >= l.vertex_count || e.to >= l.vertex_count {
            out.push(Violation::VertexOutOfRange { edge: i });
            continue;
        }
        if e.from >= e.to {
            out.push(Violation::NonForwardEdge { edge: i });
        }
        if !(e.score > 0.0 && e.score <= 1.0) {
            out.push(Violation::BadScore { edge: i });
        }
        used[e.from] = true;
        used[e.to] = true;
    }
    if l.edges.is_empty() {
        return out;
    }
    let (fwd, bwd) = l.reachability();
    for v in 0..l.vertex_count {
        let on_path = fwd[v] && bwd[v];
        if !on_path && (used[v] || !K::ALLOW_UNUSED_VERTICES) {
            out.push(Violation::DeadVertex { vertex: v });
        }
    }
    out
}

/// A lattice carrying exactly the given phonemes, each scored 1.0.
pub fn single_candidate_lattice<S: AsRef<str>>(phonemes: &[S]) -> PhonemeLattice {
    let edges = phonemes
        .iter()
        .enumerate()
        .map(|(t, p)| Edge::new(t, t + 1, p.as_ref(), 1.0))
        .collect();
    Lattice::new(phonemes.len() + 1, edges)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Replace each morpheme score by its geometric mean per phoneme.
    pub length_normalize: bool,
}

pub fn decode_lattice(pl: &PhonemeLattice, trie: &PhonemeTrie) -> MorphemeLattice {
    decode_lattice_with(pl, trie, DecodeOptions::default())
}

/// Viterbi lexical decoding: a morpheme edge `(i, j, m)` exists iff some
/// phoneme path from `i` to `j` spells the surface of `m`; its score is the
/// best product of phoneme scores over such paths.
pub fn decode_lattice_with(pl: &PhonemeLattice, trie: &PhonemeTrie, opts: DecodeOptions) -> MorphemeLattice {
    let n = pl.vertex_count;
    let mut out_edges: Vec<Vec<&Edge>> = vec![Vec::new(); n];
    for e in &pl.edges {
        if e.from < e.to && e.to < n {
            out_edges[e.from].push(e);
        }
    }
    let mut best: BTreeMap<(usize, usize, String), (f64, usize)> = BTreeMap::new();
    for start in 0..n {
        // (vertex, trie node) -> (best score, depth)
        let mut frontier: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        frontier.insert((start, PhonemeTrie::ROOT), (1.0, 0));
        while let Some(((v, node), (score, depth))) = frontier.pop_first() {
            for e in &out_edges[v] {
                let Some(child) = trie.child(node, &e.label) else {
                    continue;
                };
                let s = score * e.score;
                let slot = frontier.entry((e.to, child)).or_insert((0.0, depth + 1));
                if s > slot.0 {
                    slot.0 = s;
                }
                for id in &trie.node(child).entries {
                    let rec = best.entry((start, e.to, id.clone())).or_insert((0.0, depth + 1));
                    if s > rec.0 {
                        rec.0 = s;
                    }
                }
            }
        }
    }
    let edges = best
        .into_iter()
        .map(|((from, to, id), (score, len))| {
            let score = if opts.length_normalize {
                score.powf(1.0 / len as f64)
            } else {
                score
            };
            Edge {
                from,
                to,
                label: id,
                score,
            }
        })
        .collect();
    Lattice::<MorphemeKind>::new(n, edges).trimmed()
}

/// Removes morpheme edges lacking a connectable neighbour on either side (or
/// an admissible class at an utterance edge), iterated to a fixpoint.
pub fn filter_lattice(ml: &MorphemeLattice, lex: &Lexicon) -> MorphemeLattice {
    let n = ml.vertex_count;
    if n == 0 {
        return ml.clone();
    }
    let last = n - 1;
    let m = &lex.connectivity;
    let classes: Vec<Option<&str>> = ml.edges.iter().map(|e| lex.class_of(&e.label)).collect();
    let mut alive: Vec<bool> = classes.iter().map(Option::is_some).collect();
    let mut ending_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut starting_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in ml.edges.iter().enumerate() {
        if e.from < e.to && e.to < n {
            ending_at[e.to].push(i);
            starting_at[e.from].push(i);
        } else {
            alive[i] = false;
        }
    }
    loop {
        let mut changed = false;
        for (i, e) in ml.edges.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let class = classes[i].expect("alive edges have a class");
            let left_ok = if e.from == 0 {
                m.can_start(class)
            } else {
                ending_at[e.from]
                    .iter()
                    .any(|&p| alive[p] && m.is_connectable(classes[p].unwrap(), class))
            };
            let right_ok = if e.to == last {
                m.can_end(class)
            } else {
                starting_at[e.to]
                    .iter()
                    .any(|&s| alive[s] && m.is_connectable(class, classes[s].unwrap()))
            };
            if !(left_ok && right_ok) {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let edges = ml
        .edges
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(e, _)| e.clone())
        .collect();
    Lattice::new(n, edges)
}

/// Reference morpheme segmentation of an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldPath {
    pub steps: Vec<(String, Span)>,
}

impl GoldPath {
    pub fn from_morphemes<S: AsRef<str>>(lex: &Lexicon, ids: &[S]) -> Result<GoldPath> {
        let mut steps = Vec::new();
        let mut at = 0;
        for id in ids {
            let entry = lex
                .entry(id.as_ref())
                .ok_or_else(|| Error::Simulation(format!("unknown morpheme `{}`", id.as_ref())))?;
            let next = at + entry.surface.len();
            steps.push((entry.id.clone(), Span::new(at, next)));
            at = next;
        }
        Ok(GoldPath { steps })
    }

    pub fn phonemes(&self, lex: &Lexicon) -> Vec<String> {
        self.steps
            .iter()
            .flat_map(|(id, _)| lex.entry(id).map(|e| e.surface.clone()).unwrap_or_default())
            .collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.steps.iter().map(|(id, _)| id.as_str()).collect()
    }

    /// True when the spans tile `0..end` contiguously.
    pub fn tiles(&self, end: usize) -> bool {
        let mut at = 0;
        for (_, span) in &self.steps {
            if span.from != at || span.to <= span.from {
                return false;
            }
            at = span.to;
        }
        at == end
    }
}

pub fn contains_path(ml: &MorphemeLattice, gold: &GoldPath) -> bool {
    let edges: BTreeSet<(usize, usize, &str)> = ml.edges.iter().map(|e| (e.from, e.to, e.label.as_str())).collect();
    gold.steps
        .iter()
        .all(|(id, span)| edges.contains(&(span.from, span.to, id.as_str())))
}
