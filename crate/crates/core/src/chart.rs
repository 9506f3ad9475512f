//! Chart-driven interactive relaxation parsing.
//!
//! The chart is a triangular table over lattice vertices. Every cell holds
//! activation-bearing nodes; each relaxation cycle runs three steps:
//!
//! 1. **add nodes**: nodes above the generation threshold combine with
//!    nodes in abutting cells and post expectations on their functor side;
//! 2. **spread**: bottom-up flow `n·ρ·a·aᵢ²/Σaⱼ²` to parents, top-down flow
//!    `ρ′·a/m` to each of `m` constituents;
//! 3. **decay**: phrasal nodes scale by `d·Ca/Cr` and drop below the
//!    removal threshold.
//!
//! Lexical nodes are clamped sources: they never decay and are restored to
//! their initial activation after each spread.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::category::{combine, unify, Category, Direction, Rule};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::lattice::{MorphemeLattice, Span};
use crate::lexicon::{assign_categories, Context, Lexicon};
use crate::tree::ParseTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// `a·d·Ca/Cr`: `d` is the fraction retained per cycle.
    Retention,
    /// `a·(1−d)·Ca/Cr` as printed.
    Literal,
}

impl FromStr for DecayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "retention" => Ok(DecayMode::Retention),
            "literal" => Ok(DecayMode::Literal),
            _ => Err(Error::Params(format!("unknown decay mode `{s}`"))),
        }
    }
}

impl fmt::Display for DecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayMode::Retention => f.write_str("retention"),
            DecayMode::Literal => f.write_str("literal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationParams {
    /// Upward portion ρ.
    pub rho: f64,
    /// Downward portion ρ′.
    pub rho_prime: f64,
    /// Decay ratio d.
    pub d: f64,
    /// Generation threshold Θ.
    pub theta: f64,
    /// Removal threshold Φ.
    pub phi: f64,
    pub init_gamma: f64,
    pub epsilon: f64,
    pub max_cycles: usize,
    pub decay_mode: DecayMode,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        RelaxationParams {
            rho: 0.05,
            rho_prime: 0.03,
            d: 0.87,
            theta: 0.51,
            phi: 0.066,
            init_gamma: 1.0,
            epsilon: 1e-4,
            max_cycles: 200,
            decay_mode: DecayMode::Retention,
        }
    }
}

impl RelaxationParams {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.rho) || !open(self.rho_prime) {
            return Err(Error::Params("rho and rho_prime must lie in (0,1)".into()));
        }
        if !open(self.d) {
            return Err(Error::Params("d must lie in (0,1)".into()));
        }
        if !(0.0 <= self.phi && self.phi < self.theta && self.theta <= 1.0) {
            return Err(Error::Params("need 0 <= phi < theta <= 1".into()));
        }
        if self.max_cycles < 1 {
            return Err(Error::Params("max_cycles must be at least 1".into()));
        }
        if [self.init_gamma, self.epsilon].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::Params("init_gamma and epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Params(format!("bad value `{value}` for {key}")))
        };
        match key {
            "rho" => self.rho = num()?,
            "rho_prime" => self.rho_prime = num()?,
            "d" => self.d = num()?,
            "theta" => self.theta = num()?,
            "phi" => self.phi = num()?,
            "init_gamma" => self.init_gamma = num()?,
            "epsilon" => self.epsilon = num()?,
            "max_cycles" => {
                self.max_cycles = value
                    .parse()
                    .map_err(|_| Error::Params(format!("bad value `{value}` for {key}")))?
            }
            "decay_mode" => self.decay_mode = value.parse()?,
            _ => return Err(Error::Params(format!("unknown parameter `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key value` override file on top of `self`.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Params(format!("expected `key value`, got `{line}`")));
            };
            self.set(k, v)?;
        }
        self.validate()?;
        Ok(self)
    }

    /// Echo of every parameter as `key value` lines, in override-file format.
    pub fn to_text(&self) -> String {
        format!(
            "rho {}\nrho_prime {}\nd {}\ntheta {}\nphi {}\ninit_gamma {}\nepsilon {}\nmax_cycles {}\ndecay_mode {}\n",
            self.rho,
            self.rho_prime,
            self.d,
            self.theta,
            self.phi,
            self.init_gamma,
            self.epsilon,
            self.max_cycles,
            self.decay_mode
        )
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Lexical { entry_id: String, source_score: f64 },
    Phrasal(Rule),
}

/// One way a phrasal node is supported. A support with only the functor
/// linked is an expectation waiting for its argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Support {
    pub functor: Option<NodeId>,
    pub argument: Option<NodeId>,
}

impl Support {
    fn linked(&self) -> usize {
        self.functor.is_some() as usize + self.argument.is_some() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum KindKey {
    Lexical(String),
    Phrasal(Rule),
}

type NodeKey = (Span, String, KindKey);

#[derive(Debug, Clone)]
pub struct ChartNode {
    pub id: NodeId,
    pub category: Category,
    /// Rendered category, cached for ordering.
    pub label: String,
    pub span: Span,
    pub activation: f64,
    pub kind: NodeKind,
    pub supports: Vec<Support>,
    pub parents: BTreeSet<NodeId>,
    removed: bool,
}

impl ChartNode {
    fn key(&self) -> NodeKey {
        let kind = match &self.kind {
            NodeKind::Lexical { entry_id, .. } => KindKey::Lexical(entry_id.clone()),
            NodeKind::Phrasal(rule) => KindKey::Phrasal(*rule),
        };
        (self.span, self.label.clone(), kind)
    }

    pub fn is_lexical(&self) -> bool {
        matches!(self.kind, NodeKind::Lexical { .. })
    }

    pub fn is_removed(&self) -> bool {
        self.removed
    }

    /// Cr.
    pub fn required(&self) -> usize {
        if self.is_lexical() {
            0
        } else {
            2
        }
    }

    /// Ca: live links of the best-supported alternative.
    pub fn actual(&self) -> usize {
        self.supports.iter().map(Support::linked).max().unwrap_or(0)
    }

    pub fn is_complete(&self) -> bool {
        self.actual() == self.required()
    }

    /// Distinct live constituents over all supports.
    pub fn constituents(&self) -> BTreeSet<NodeId> {
        self.supports
            .iter()
            .flat_map(|s| s.functor.into_iter().chain(s.argument))
            .collect()
    }

    fn lexical_source(&self) -> Option<f64> {
        match self.kind {
            NodeKind::Lexical { source_score, .. } => Some(source_score),
            NodeKind::Phrasal(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    vertex_count: usize,
    nodes: Vec<ChartNode>,
    index: BTreeMap<NodeKey, NodeId>,
    cells: BTreeMap<Span, Vec<NodeId>>,
    cycle: usize,
    converged: bool,
    pub warnings: Vec<String>,
}

impl Chart {
    pub fn new(vertex_count: usize) -> Chart {
        Chart {
            vertex_count,
            nodes: Vec::new(),
            index: BTreeMap::new(),
            cells: BTreeMap::new(),
            cycle: 0,
            converged: false,
            warnings: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn full_span(&self) -> Span {
        Span::new(0, self.vertex_count.saturating_sub(1).max(1))
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn node(&self, id: NodeId) -> &ChartNode {
        &self.nodes[id]
    }

    /// Every node ever created, removed ones included.
    pub fn all_nodes(&self) -> &[ChartNode] {
        &self.nodes
    }

    /// Live nodes in canonical `(span, category text, kind)` order.
    pub fn live_ids(&self) -> Vec<NodeId> {
        self.index.values().copied().collect()
    }

    pub fn live_count(&self) -> usize {
        self.index.len()
    }

    /// Live node ids in a cell, in canonical order.
    pub fn cell(&self, span: Span) -> &[NodeId] {
        self.cells.get(&span).map_or(&[], Vec::as_slice)
    }

    pub fn find(&self, category: &Category, span: Span) -> Vec<NodeId> {
        self.cell(span)
            .iter()
            .copied()
            .filter(|&id| self.nodes[id].category == *category)
            .collect()
    }

    pub fn set_activation(&mut self, id: NodeId, a: f64) {
        self.nodes[id].activation = a.clamp(0.0, 1.0);
    }

    fn insert(&mut self, node: ChartNode) -> NodeId {
        let id = node.id;
        let key = node.key();
        let span = node.span;
        self.nodes.push(node);
        self.index.insert(key.clone(), id);
        let cell = self.cells.entry(span).or_default();
        let nodes = &self.nodes;
        let pos = cell.partition_point(|&other| nodes[other].key() < key);
        cell.insert(pos, id);
        id
    }

    /// Adds (or finds) the lexical node for an entry/category/span.
    pub fn add_lexical(&mut self, entry_id: &str, category: Category, span: Span, activation: f64) -> NodeId {
        let a = activation.clamp(0.0, 1.0);
        let label = category.to_string();
        let key = (span, label.clone(), KindKey::Lexical(entry_id.to_string()));
        if let Some(&id) = self.index.get(&key) {
            let node = &mut self.nodes[id];
            node.activation = node.activation.max(a);
            node.kind = NodeKind::Lexical {
                entry_id: entry_id.to_string(),
                source_score: node.activation,
            };
            return id;
        }
        let id = self.nodes.len();
        self.insert(ChartNode {
            id,
            category,
            label,
            span,
            activation: a,
            kind: NodeKind::Lexical {
                entry_id: entry_id.to_string(),
                source_score: a,
            },
            supports: Vec::new(),
            parents: BTreeSet::new(),
            removed: false,
        })
    }

    /// Creates a phrasal node or merges a support into the existing node with
    /// the same category, span and rule. The node's activation becomes
    /// `max(current, birth)`. Returns the node and whether anything new (node
    /// or link) was added.
    pub fn create_or_merge(
        &mut self,
        category: Category,
        span: Span,
        rule: Rule,
        support: Support,
        birth: f64,
    ) -> (NodeId, bool) {
        let birth = birth.clamp(0.0, 1.0);
        let label = category.to_string();
        let key = (span, label.clone(), KindKey::Phrasal(rule));
        let (id, mut changed) = match self.index.get(&key) {
            Some(&id) => (id, false),
            None => {
                let id = self.nodes.len();
                self.insert(ChartNode {
                    id,
                    category,
                    label,
                    span,
                    activation: 0.0,
                    kind: NodeKind::Phrasal(rule),
                    supports: Vec::new(),
                    parents: BTreeSet::new(),
                    removed: false,
                });
                (id, true)
            }
        };
        let node = &mut self.nodes[id];
        let dominated = node.supports.iter().any(|s| {
            *s == support || (support.argument.is_none() && s.functor == support.functor && s.argument.is_some())
        });
        if !dominated {
            if support.argument.is_some() {
                node.supports
                    .retain(|s| !(s.argument.is_none() && s.functor == support.functor));
            }
            node.supports.push(support);
            node.supports.sort();
            changed = true;
            for child in support.functor.into_iter().chain(support.argument) {
                self.nodes[child].parents.insert(id);
            }
        }
        let node = &mut self.nodes[id];
        node.activation = node.activation.max(birth);
        (id, changed)
    }

    /// Removes a phrasal node and drops every link into it; parents left
    /// without any support are removed too. Returns the number removed.
    pub fn remove(&mut self, id: NodeId) -> usize {
        let mut removed = 0;
        let mut work = vec![id];
        while let Some(x) = work.pop() {
            if self.nodes[x].removed || self.nodes[x].is_lexical() {
                continue;
            }
            removed += 1;
            let key = self.nodes[x].key();
            self.index.remove(&key);
            let span = self.nodes[x].span;
            if let Some(cell) = self.cells.get_mut(&span) {
                cell.retain(|&o| o != x);
                if cell.is_empty() {
                    self.cells.remove(&span);
                }
            }
            self.nodes[x].removed = true;
            for child in self.nodes[x].constituents() {
                self.nodes[child].parents.remove(&x);
            }
            let parents = std::mem::take(&mut self.nodes[x].parents);
            for p in parents {
                let node = &mut self.nodes[p];
                for s in &mut node.supports {
                    if s.functor == Some(x) {
                        s.functor = None;
                    }
                    if s.argument == Some(x) {
                        s.argument = None;
                    }
                }
                node.supports.retain(|s| s.linked() > 0);
                node.supports.sort();
                node.supports.dedup();
                if node.supports.is_empty() {
                    work.push(p);
                }
            }
        }
        removed
    }

    /// Nodes with a complete derivation down to lexical leaves.
    pub fn grounded(&self) -> Vec<bool> {
        let mut order: Vec<NodeId> = self.live_ids();
        order.sort_by_key(|&id| self.nodes[id].span.len());
        let mut grounded = vec![false; self.nodes.len()];
        for id in order {
            let node = &self.nodes[id];
            grounded[id] = node.is_lexical()
                || node.supports.iter().any(|s| match (s.functor, s.argument) {
                    (Some(f), Some(a)) => grounded[f] && grounded[a],
                    _ => false,
                });
        }
        grounded
    }

    fn usable(&self, id: NodeId) -> bool {
        let n = &self.nodes[id];
        !n.removed && n.is_complete()
    }
}

/// Context-conditioned lexical categories for every edge of a morpheme
/// lattice: each edge is assigned under every combination of neighbour
/// classes present at its end vertices (BOUNDARY at `0` and `T`).
#[derive(Debug, Clone, Default)]
pub struct LexicalAssignment {
    /// `(edge index, category)` pairs in edge order.
    pub items: Vec<(usize, Category)>,
    /// Edges with no applicable variant in any context.
    pub unassigned: Vec<usize>,
}

pub fn lexical_assignments(ml: &MorphemeLattice, lex: &Lexicon) -> LexicalAssignment {
    let last = ml.last();
    let contexts_at = |vertex: usize, ending: bool| -> BTreeSet<Context> {
        let edge_vertex = |e: &&crate::lattice::Edge| if ending { e.to } else { e.from };
        ml.edges
            .iter()
            .filter(|e| edge_vertex(e) == vertex)
            .filter_map(|e| lex.class_of(&e.label))
            .map(|c| Context::Class(c.to_string()))
            .collect()
    };
    let mut out = LexicalAssignment::default();
    for (i, e) in ml.edges.iter().enumerate() {
        let Some(entry) = lex.entry(&e.label) else {
            out.unassigned.push(i);
            continue;
        };
        let lefts = if e.from == 0 {
            BTreeSet::from([Context::Boundary])
        } else {
            contexts_at(e.from, true)
        };
        let rights = if e.to == last {
            BTreeSet::from([Context::Boundary])
        } else {
            contexts_at(e.to, false)
        };
        let mut cats = BTreeSet::new();
        for l in &lefts {
            for r in &rights {
                cats.extend(assign_categories(entry, l, r));
            }
        }
        if cats.is_empty() {
            out.unassigned.push(i);
        }
        out.items.extend(cats.into_iter().map(|c| (i, c)));
    }
    out
}

/// One lexical node per (edge, applicable category). Activations are edge
/// scores scaled so that the best lexical score is 1.0.
pub fn init_chart(ml: &MorphemeLattice, lex: &Lexicon, g: &Grammar) -> Result<Chart> {
    if ml.edges.is_empty() {
        return Err(Error::ChartInit("lattice has no edges".into()));
    }
    g.check_lexicon(lex)?;
    let assignment = lexical_assignments(ml, lex);
    let mut chart = Chart::new(ml.vertex_count);
    for &i in &assignment.unassigned {
        let e = &ml.edges[i];
        chart.warnings.push(format!(
            "edge {} {} {} has no applicable variant; skipped",
            e.from, e.to, e.label
        ));
    }
    let max = assignment
        .items
        .iter()
        .map(|(i, _)| ml.edges[*i].score)
        .fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Err(Error::ChartInit("no edge received a category".into()));
    }
    for (i, cat) in assignment.items {
        let e = &ml.edges[i];
        chart.add_lexical(&e.label, cat, e.span(), e.score / max);
    }
    Ok(chart)
}

/// Parent spans a node may help build, each with the abutting partner cell:
/// leftward `([k,j], [k,i])` and rightward `([i,k], [j,k])` for occupied cells.
pub fn allowed_parent_spans(chart: &Chart, id: NodeId) -> Vec<(Span, Span)> {
    let span = chart.node(id).span;
    let mut out = Vec::new();
    for k in 0..span.from {
        let partner = Span::new(k, span.from);
        if !chart.cell(partner).is_empty() {
            out.push((Span::new(k, span.to), partner));
        }
    }
    for k in span.to + 1..chart.vertex_count() {
        let partner = Span::new(span.to, k);
        if !chart.cell(partner).is_empty() {
            out.push((Span::new(span.from, k), partner));
        }
    }
    out
}

fn snapshot(chart: &Chart) -> Vec<f64> {
    chart.nodes.iter().map(|n| n.activation).collect()
}

/// Node generation. Returns the number of nodes or links created.
pub fn add_nodes_step(chart: &mut Chart, p: &RelaxationParams) -> usize {
    let snap = snapshot(chart);
    let triggers: Vec<NodeId> = chart
        .live_ids()
        .into_iter()
        .filter(|&id| chart.usable(id) && snap[id] > p.theta)
        .collect();
    let mut created = 0;
    for n in triggers {
        let n_span = chart.node(n).span;
        for (parent, partner_cell) in allowed_parent_spans(chart, n) {
            let partner_on_left = partner_cell.to == n_span.from;
            let partners: Vec<NodeId> = chart
                .cell(partner_cell)
                .iter()
                .copied()
                .filter(|&q| q < snap.len() && chart.usable(q))
                .collect();
            for q in partners {
                let (l, r) = if partner_on_left { (q, n) } else { (n, q) };
                let results = combine(&chart.node(l).category, &chart.node(r).category);
                for (cat, rule) in results {
                    let (functor, argument) = match rule {
                        Rule::RightCancel => (l, r),
                        Rule::LeftCancel => (r, l),
                    };
                    let birth = p.init_gamma * (snap[l] + snap[r]) / 2.0;
                    let support = Support {
                        functor: Some(functor),
                        argument: Some(argument),
                    };
                    if chart.create_or_merge(cat, parent, rule, support, birth).1 {
                        created += 1;
                    }
                }
            }
            // expectations only on the side the functor consumes from
            let rule = match chart.node(n).category.direction() {
                Some(Direction::Rightward) if !partner_on_left => Rule::RightCancel,
                Some(Direction::Leftward) if partner_on_left => Rule::LeftCancel,
                _ => continue,
            };
            for cat in chart.node(n).category.slot_results() {
                let support = Support {
                    functor: Some(n),
                    argument: None,
                };
                if chart
                    .create_or_merge(cat, parent, rule, support, p.init_gamma * snap[n])
                    .1
                {
                    created += 1;
                }
            }
        }
    }
    created
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpreadStats {
    /// Net activation gained by phrasal nodes.
    pub injected: f64,
    /// `Σ n_c·ρ·a_c + Σ ρ′·a_p`: the most one spread can inject.
    pub bound: f64,
}

pub fn spread_step(chart: &mut Chart, p: &RelaxationParams) -> SpreadStats {
    let snap = snapshot(chart);
    let mut incoming = vec![0.0; chart.nodes.len()];
    let mut stats = SpreadStats::default();
    let live = chart.live_ids();
    for &c in &live {
        let node = &chart.nodes[c];
        let n = node.parents.len();
        if n > 0 {
            let a = snap[c];
            let sumsq: f64 = node.parents.iter().map(|&q| snap[q] * snap[q]).sum();
            for &q in &node.parents {
                let share = if sumsq > 0.0 {
                    snap[q] * snap[q] / sumsq
                } else {
                    1.0 / n as f64
                };
                incoming[q] += n as f64 * p.rho * a * share;
            }
            stats.bound += n as f64 * p.rho * a;
        }
        let children = node.constituents();
        if !children.is_empty() {
            let each = p.rho_prime * snap[c] / children.len() as f64;
            for child in children {
                incoming[child] += each;
            }
            stats.bound += p.rho_prime * snap[c];
        }
    }
    for &id in &live {
        let node = &mut chart.nodes[id];
        match node.lexical_source() {
            Some(source) => node.activation = source,
            None => {
                node.activation = (snap[id] + incoming[id]).clamp(0.0, 1.0);
                stats.injected += node.activation - snap[id];
            }
        }
    }
    stats
}

/// Decays phrasal nodes and removes those below Φ. Returns the number removed.
pub fn decay_step(chart: &mut Chart, p: &RelaxationParams) -> usize {
    let live = chart.live_ids();
    for &id in &live {
        let node = &mut chart.nodes[id];
        if node.is_lexical() {
            continue;
        }
        let ratio = node.actual() as f64 / node.required() as f64;
        let factor = match p.decay_mode {
            DecayMode::Retention => p.d,
            DecayMode::Literal => 1.0 - p.d,
        };
        node.activation *= factor * ratio;
    }
    let mut removed = 0;
    for id in live {
        let node = &chart.nodes[id];
        if !node.removed && !node.is_lexical() && node.activation < p.phi {
            removed += chart.remove(id);
        }
    }
    removed
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleStats {
    pub cycle: usize,
    pub created: usize,
    pub removed: usize,
    pub live: usize,
    pub max_delta: f64,
    pub spread: SpreadStats,
}

/// Full-span roots of a relaxation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseForest {
    pub roots: Vec<NodeId>,
}

impl ParseForest {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }
}

/// Runs relaxation cycles until activations settle (max change below ε for
/// three consecutive cycles) or `max_cycles` is reached. Roots must match
/// `target` when given, otherwise one of the grammar's sentence categories.
pub fn run_relaxation(chart: &mut Chart, g: &Grammar, p: &RelaxationParams, target: Option<&Category>) -> ParseForest {
    run_relaxation_traced(chart, g, p, target, |_| {})
}

pub fn run_relaxation_traced(
    chart: &mut Chart,
    g: &Grammar,
    p: &RelaxationParams,
    target: Option<&Category>,
    mut observe: impl FnMut(&CycleStats),
) -> ParseForest {
    let mut calm = 0;
    while chart.cycle < p.max_cycles {
        let before = snapshot(chart);
        let created = add_nodes_step(chart, p);
        let spread = spread_step(chart, p);
        let removed = decay_step(chart, p);
        chart.cycle += 1;
        let max_delta = chart
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let prev = before.get(id).copied().unwrap_or(0.0);
                let now = if n.removed { 0.0 } else { n.activation };
                if n.removed && prev == 0.0 {
                    0.0
                } else {
                    (now - prev).abs()
                }
            })
            .fold(0.0, f64::max);
        // removed nodes keep their last activation; count them once
        for (id, n) in chart.nodes.iter_mut().enumerate() {
            if n.removed && before.get(id).is_some_and(|&a| a > 0.0) {
                n.activation = 0.0;
            }
        }
        observe(&CycleStats {
            cycle: chart.cycle,
            created,
            removed,
            live: chart.live_count(),
            max_delta,
            spread,
        });
        if max_delta < p.epsilon && created == 0 && removed == 0 {
            calm += 1;
            if calm >= 3 {
                chart.converged = true;
                break;
            }
        } else {
            calm = 0;
        }
    }
    collect_forest(chart, g, target)
}

pub fn collect_forest(chart: &Chart, g: &Grammar, target: Option<&Category>) -> ParseForest {
    let grounded = chart.grounded();
    let full = chart.full_span();
    let roots = chart
        .cell(full)
        .iter()
        .copied()
        .filter(|&id| grounded[id])
        .filter(|&id| {
            let c = &chart.node(id).category;
            match target {
                Some(t) => unify(t, c).is_some(),
                None => g.accepts(c),
            }
        })
        .collect();
    ParseForest { roots }
}

type SupportChoice = (f64, (String, String), Span, NodeId, NodeId);

fn extract(chart: &Chart, id: NodeId, grounded: &[bool]) -> Result<ParseTree> {
    let node = chart.node(id);
    if let NodeKind::Lexical { entry_id, .. } = &node.kind {
        return Ok(ParseTree::Leaf {
            category: node.category.clone(),
            span: node.span,
            entry_id: entry_id.clone(),
        });
    }
    let NodeKind::Phrasal(rule) = node.kind else {
        unreachable!()
    };
    // (summed activation, child labels, left span, left, right)
    let mut best: Option<SupportChoice> = None;
    for s in &node.supports {
        let (Some(f), Some(a)) = (s.functor, s.argument) else {
            continue;
        };
        if !grounded[f] || !grounded[a] {
            continue;
        }
        let (l, r) = if chart.node(f).span.from < chart.node(a).span.from {
            (f, a)
        } else {
            (a, f)
        };
        let (ln, rn) = (chart.node(l), chart.node(r));
        if ln.span.from != node.span.from || ln.span.to != rn.span.from || rn.span.to != node.span.to {
            return Err(Error::LinkCycle(id));
        }
        let score = ln.activation + rn.activation;
        let labels = (ln.label.clone(), rn.label.clone());
        let better = match &best {
            None => true,
            Some((bs, bl, bspan, _, _)) => {
                score > *bs || (score == *bs && (labels < *bl || (labels == *bl && ln.span < *bspan)))
            }
        };
        if better {
            best = Some((score, labels, ln.span, l, r));
        }
    }
    let (_, _, _, l, r) = best.ok_or(Error::LinkCycle(id))?;
    Ok(ParseTree::Branch {
        category: node.category.clone(),
        span: node.span,
        rule,
        left: Box::new(extract(chart, l, grounded)?),
        right: Box::new(extract(chart, r, grounded)?),
    })
}

/// Follows constituent links from `root`, choosing at each node the support
/// pair with the highest summed activation.
pub fn extract_tree(chart: &Chart, root: NodeId) -> Result<ParseTree> {
    let grounded = chart.grounded();
    if !grounded.get(root).copied().unwrap_or(false) {
        return Err(Error::LinkCycle(root));
    }
    extract(chart, root, &grounded)
}

/// The tree of the most active root; ties go to the smaller tree, then to
/// the lexicographically smaller text.
pub fn best_parse(forest: &ParseForest, chart: &Chart) -> Option<ParseTree> {
    let mut best: Option<(f64, usize, String, ParseTree)> = None;
    for &root in &forest.roots {
        let Ok(tree) = extract_tree(chart, root) else {
            continue;
        };
        let a = chart.node(root).activation;
        let size = tree.size();
        let text = tree.to_text();
        let better = match &best {
            None => true,
            Some((ba, bsize, btext, _)) => {
                a > *ba || (a == *ba && (size < *bsize || (size == *bsize && text < *btext)))
            }
        };
        if better {
            best = Some((a, size, text, tree));
        }
    }
    best.map(|(_, _, _, t)| t)
}
