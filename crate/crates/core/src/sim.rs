//! Recognition-error simulation and the four-configuration experiment:
//! confusion-driven phoneme lattices, corpus loading, per-item evaluation
//! and the tab-separated accuracy report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::category::{parse_category, unify, Category};
use crate::chart::{best_parse, init_chart, run_relaxation, RelaxationParams};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::lattice::{
    contains_path, decode_lattice_with, filter_lattice, single_candidate_lattice, DecodeOptions, Edge, GoldPath,
    MorphemeLattice, PhonemeLattice,
};
use crate::lexicon::{build_trie, Lexicon};
use crate::tree::{parse_tree_text, ParseTree};

const ROW_TOLERANCE: f64 = 1e-9;

/// Row-stochastic map from a true phoneme to its recognition candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    rows: BTreeMap<String, Vec<(String, f64)>>,
}

impl ConfusionMatrix {
    pub fn identity<S: AsRef<str>>(phonemes: &[S]) -> ConfusionMatrix {
        let rows = phonemes
            .iter()
            .map(|p| (p.as_ref().to_string(), vec![(p.as_ref().to_string(), 1.0)]))
            .collect();
        ConfusionMatrix { rows }
    }

    pub fn row(&self, phoneme: &str) -> Option<&[(String, f64)]> {
        self.rows.get(phoneme).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn prob(&self, truth: &str, candidate: &str) -> f64 {
        self.row(truth)
            .and_then(|r| r.iter().find(|(c, _)| c == candidate))
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn phonemes(&self) -> BTreeSet<&str> {
        self.rows.keys().map(String::as_str).collect()
    }

    /// Off-diagonal probabilities of a row.
    fn others(&self, truth: &str) -> impl Iterator<Item = (&str, f64)> + '_ {
        let truth = truth.to_string();
        self.rows
            .get(&truth)
            .into_iter()
            .flatten()
            .filter(move |(c, _)| *c != truth)
            .map(|(c, p)| (c.as_str(), *p))
    }

    /// Expected candidates per position for inclusion scale `lambda`,
    /// averaged over rows.
    pub fn expected_candidates(&self, lambda: f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .rows
            .keys()
            .map(|t| 1.0 + self.others(t).map(|(_, p)| (lambda * p).min(1.0)).sum::<f64>())
            .sum();
        total / self.rows.len() as f64
    }

    /// The scale λ at which the expected number of candidates per position
    /// equals `avg`.
    pub fn inclusion_scale(&self, avg: f64) -> Result<f64> {
        if avg < 1.0 {
            return Err(Error::Simulation(format!("avg_candidates {avg} is below 1")));
        }
        let top: f64 = self
            .rows
            .keys()
            .map(|t| 1.0 + self.others(t).filter(|(_, p)| *p > 0.0).count() as f64)
            .sum::<f64>()
            / self.rows.len().max(1) as f64;
        if avg > top + 1e-12 {
            return Err(Error::Simulation(format!(
                "avg_candidates {avg} unachievable: at most {top:.4} candidates per position"
            )));
        }
        if avg <= 1.0 {
            return Ok(0.0);
        }
        let min_p = self
            .rows
            .keys()
            .flat_map(|t| self.others(t).map(|(_, p)| p))
            .filter(|p| *p > 0.0)
            .fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi) = (0.0, 1.0 / min_p);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if self.expected_candidates(mid) < avg {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

fn cm_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Confusion { line, msg: msg.into() })
}

/// Reads `confusion <n>` followed by `row <phoneme> <cand>:<p> ...` lines.
/// When `inventory` is given every row and candidate must belong to it and
/// every inventory phoneme needs a row.
pub fn load_confusion(text: &str, inventory: Option<&BTreeSet<String>>) -> Result<ConfusionMatrix> {
    let mut declared = None;
    let mut rows = BTreeMap::new();
    let known = |line: usize, p: &str| -> Result<()> {
        match inventory {
            Some(inv) if !inv.contains(p) => cm_err(line, format!("unknown phoneme `{p}`")),
            _ => Ok(()),
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "confusion" => {
                let n = words
                    .get(1)
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::Confusion {
                        line,
                        msg: "expected `confusion <n>`".into(),
                    })?;
                declared = Some(n);
            }
            "row" => {
                if declared.is_none() {
                    return cm_err(line, "row before `confusion` header");
                }
                let Some(&truth) = words.get(1) else {
                    return cm_err(line, "row needs a phoneme");
                };
                known(line, truth)?;
                let mut cands: Vec<(String, f64)> = Vec::new();
                for w in &words[2..] {
                    let Some((c, p)) = w.split_once(':') else {
                        return cm_err(line, format!("expected `cand:prob`, got `{w}`"));
                    };
                    known(line, c)?;
                    let p: f64 = p.parse().map_err(|_| Error::Confusion {
                        line,
                        msg: format!("bad probability `{p}`"),
                    })?;
                    if p.is_nan() || p < 0.0 {
                        return cm_err(line, format!("negative probability for `{c}` in row `{truth}`"));
                    }
                    if cands.iter().any(|(x, _)| x == c) {
                        return cm_err(line, format!("duplicate candidate `{c}` in row `{truth}`"));
                    }
                    cands.push((c.to_string(), p));
                }
                if !cands.iter().any(|(c, _)| c == truth) {
                    return cm_err(line, format!("row `{truth}` lacks its diagonal entry"));
                }
                let sum: f64 = cands.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return cm_err(line, format!("row `{truth}` sums to {sum}, not 1"));
                }
                if rows.insert(truth.to_string(), cands).is_some() {
                    return cm_err(line, format!("duplicate row `{truth}`"));
                }
            }
            other => return cm_err(line, format!("unknown directive `{other}`")),
        }
    }
    let Some(n) = declared else {
        return cm_err(0, "missing `confusion <n>` header");
    };
    if n != rows.len() {
        return cm_err(0, format!("header declares {n} rows, found {}", rows.len()));
    }
    if let Some(inv) = inventory {
        if let Some(missing) = inv.iter().find(|p| !rows.contains_key(*p)) {
            return cm_err(0, format!("no row for phoneme `{missing}`"));
        }
    }
    Ok(ConfusionMatrix { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub avg_candidates: f64,
    pub lattices_per_sentence: usize,
    pub seed: u64,
    /// Decoding used by the experiment pipeline. Length normalization keeps
    /// lexical activations independent of morpheme length, so Baseline and
    /// Lattice inputs differ only in their distractor edges.
    pub decode: DecodeOptions,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            avg_candidates: 2.2,
            lattices_per_sentence: 10,
            seed: 1,
            decode: DecodeOptions { length_normalize: true },
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.avg_candidates.is_nan() || self.avg_candidates < 1.0 {
            return Err(Error::Simulation("avg_candidates must be at least 1".into()));
        }
        if self.lattices_per_sentence < 1 {
            return Err(Error::Simulation("lattices_per_sentence must be at least 1".into()));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a, used to derive a stable per-draw stream.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn draw_rng(seed: u64, sentence_id: &str, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(format!("{sentence_id}\u{0}{draw}").as_bytes()));
    rng
}

/// Position-synchronous phoneme lattice for one simulated recognition of
/// `gold`. The gold phoneme is always present; every other candidate enters
/// independently with probability `λ·p`.
pub fn generate_phoneme_lattice<S: AsRef<str>>(
    gold: &[S],
    cm: &ConfusionMatrix,
    sp: &SimParams,
    sentence_id: &str,
    draw: usize,
) -> Result<PhonemeLattice> {
    sp.validate()?;
    let lambda = cm.inclusion_scale(sp.avg_candidates)?;
    let mut rng = draw_rng(sp.seed, sentence_id, draw);
    let mut edges = Vec::new();
    for (t, g) in gold.iter().enumerate() {
        let g = g.as_ref();
        let row = cm
            .row(g)
            .ok_or_else(|| Error::Simulation(format!("no confusion row for `{g}`")))?;
        for (c, p) in row {
            if c == g {
                edges.push(Edge::new(t, t + 1, c, *p));
            } else {
                let keep: f64 = rng.gen();
                if keep < (lambda * p).min(1.0) && *p > 0.0 {
                    edges.push(Edge::new(t, t + 1, c, *p));
                }
            }
        }
    }
    Ok(PhonemeLattice::new(gold.len() + 1, edges))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSentence {
    pub id: String,
    pub morphemes: Vec<String>,
    pub phonemes: Vec<String>,
    pub target: Category,
    pub tree: Option<String>,
}

impl CorpusSentence {
    pub fn gold_path(&self, lex: &Lexicon) -> Result<GoldPath> {
        GoldPath::from_morphemes(lex, &self.morphemes)
    }
}

fn corpus_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Corpus { line, msg: msg.into() })
}

/// Reads `sentence <id> target=<cat> morphemes=<id,...> [tree=<text>]`
/// lines; the tree runs to the end of the line.
pub fn load_corpus(text: &str, lex: &Lexicon) -> Result<Vec<CorpusSentence>> {
    let mut out: Vec<CorpusSentence> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (head, tree) = match trimmed.split_once(" tree=") {
            Some((h, t)) => (h, Some(t.trim().to_string())),
            None => (trimmed, None),
        };
        let words: Vec<&str> = head.split_whitespace().collect();
        if words.first() != Some(&"sentence") || words.len() < 2 {
            return corpus_err(line, "expected `sentence <id> ...`");
        }
        let id = words[1].to_string();
        let mut target = None;
        let mut morphemes = None;
        for w in &words[2..] {
            match w.split_once('=') {
                Some(("target", v)) => {
                    target = Some(parse_category(v).map_err(|e| Error::Corpus {
                        line,
                        msg: e.to_string(),
                    })?)
                }
                Some(("morphemes", v)) => morphemes = Some(v.split(',').map(str::to_string).collect::<Vec<_>>()),
                _ => return corpus_err(line, format!("unknown field `{w}`")),
            }
        }
        let (Some(target), Some(morphemes)) = (target, morphemes) else {
            return corpus_err(line, "sentence needs target= and morphemes=");
        };
        if out.iter().any(|s| s.id == id) {
            return corpus_err(line, format!("duplicate sentence id `{id}`"));
        }
        let mut phonemes = Vec::new();
        for m in &morphemes {
            match lex.entry(m) {
                Some(e) => phonemes.extend(e.surface.iter().cloned()),
                None => return corpus_err(line, format!("unknown morpheme `{m}`")),
            }
        }
        if let Some(t) = &tree {
            parse_tree_text(t).map_err(|e| Error::Corpus {
                line,
                msg: e.to_string(),
            })?;
        }
        out.push(CorpusSentence {
            id,
            morphemes,
            phonemes,
            target,
            tree,
        });
    }
    Ok(out)
}

/// True iff the leaves spell the gold morphemes, the root matches the
/// target and, when a gold tree is given, the trees agree once suppression
/// marks are erased on both sides.
pub fn score_parse(predicted: &ParseTree, item: &CorpusSentence) -> bool {
    if predicted.leaf_ids() != item.morphemes {
        return false;
    }
    let root = predicted.category();
    if unify(&item.target, root).is_none() && unify(&item.target.erase_suppression(), root).is_none() {
        return false;
    }
    match &item.tree {
        None => true,
        Some(text) => match parse_tree_text(text) {
            Ok(gold) => gold.erase_suppression().to_text() == predicted.erase_suppression().to_text(),
            Err(_) => false,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GrammarVariant {
    Ua,
    UaSc,
}

impl fmt::Display for GrammarVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrammarVariant::Ua => "UA",
            GrammarVariant::UaSc => "UA+SC",
        })
    }
}

impl FromStr for GrammarVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UA" => Ok(GrammarVariant::Ua),
            "UA+SC" => Ok(GrammarVariant::UaSc),
            _ => Err(Error::Params(format!("unknown grammar variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InputMode {
    Baseline,
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentConfig {
    Uab,
    Uap,
    UaScb,
    UaScp,
}

impl ExperimentConfig {
    pub const ALL: [ExperimentConfig; 4] = [
        ExperimentConfig::Uab,
        ExperimentConfig::Uap,
        ExperimentConfig::UaScb,
        ExperimentConfig::UaScp,
    ];

    pub fn grammar_variant(self) -> GrammarVariant {
        match self {
            ExperimentConfig::Uab | ExperimentConfig::Uap => GrammarVariant::Ua,
            ExperimentConfig::UaScb | ExperimentConfig::UaScp => GrammarVariant::UaSc,
        }
    }

    pub fn input_mode(self) -> InputMode {
        match self {
            ExperimentConfig::Uab | ExperimentConfig::UaScb => InputMode::Baseline,
            ExperimentConfig::Uap | ExperimentConfig::UaScp => InputMode::Lattice,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentConfig::Uab => "UAB",
            ExperimentConfig::Uap => "UAP",
            ExperimentConfig::UaScb => "UA+SCB",
            ExperimentConfig::UaScp => "UA+SCP",
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentConfig::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Params(format!("unknown configuration `{s}`")))
    }
}

/// Result of one (item, draw) evaluation.
#[derive(Debug, Clone)]
pub struct ItemOutcome {
    pub item_id: String,
    pub draw: usize,
    pub lattice: MorphemeLattice,
    pub best: Option<ParseTree>,
    pub morph_hit: bool,
    pub syn_hit: bool,
    pub error: Option<String>,
}

/// Runs the whole pipeline on one phoneme lattice.
pub fn evaluate_lattice(
    pl: &PhonemeLattice,
    item: &CorpusSentence,
    lex: &Lexicon,
    g: &Grammar,
    p: &RelaxationParams,
    decode: DecodeOptions,
    draw: usize,
) -> ItemOutcome {
    let trie = build_trie(lex);
    let ml = filter_lattice(&decode_lattice_with(pl, &trie, decode), lex);
    let morph_hit = item.gold_path(lex).is_ok_and(|gold| contains_path(&ml, &gold));
    let mut outcome = ItemOutcome {
        item_id: item.id.clone(),
        draw,
        lattice: ml.clone(),
        best: None,
        morph_hit,
        syn_hit: false,
        error: None,
    };
    match init_chart(&ml, lex, g) {
        Ok(mut chart) => {
            let forest = run_relaxation(&mut chart, g, p, Some(&item.target));
            outcome.best = best_parse(&forest, &chart);
            outcome.syn_hit = outcome.best.as_ref().is_some_and(|t| score_parse(t, item));
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// The lattices one configuration feeds to the parser for an item.
pub fn item_lattices(
    item: &CorpusSentence,
    mode: InputMode,
    sp: &SimParams,
    cm: &ConfusionMatrix,
) -> Result<Vec<PhonemeLattice>> {
    match mode {
        InputMode::Baseline => Ok(vec![single_candidate_lattice(&item.phonemes)]),
        InputMode::Lattice => (0..sp.lattices_per_sentence)
            .map(|d| generate_phoneme_lattice(&item.phonemes, cm, sp, &item.id, d))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResult {
    pub config: ExperimentConfig,
    pub morph_hits: usize,
    pub syn_hits: usize,
    pub items: usize,
    pub errors: Vec<String>,
    pub seed: u64,
}

impl ConfigResult {
    pub fn morph_acc(&self) -> f64 {
        self.morph_hits as f64 / self.items.max(1) as f64
    }

    pub fn syn_acc(&self) -> f64 {
        self.syn_hits as f64 / self.items.max(1) as f64
    }
}

/// Evaluates one configuration over the corpus, keeping every outcome.
#[allow(clippy::too_many_arguments)]
pub fn run_config_outcomes(
    corpus: &[CorpusSentence],
    lex_ua: &Lexicon,
    lex_uasc: &Lexicon,
    g: &Grammar,
    cfg: ExperimentConfig,
    p: &RelaxationParams,
    sp: &SimParams,
    cm: &ConfusionMatrix,
) -> Result<Vec<ItemOutcome>> {
    let lex = match cfg.grammar_variant() {
        GrammarVariant::Ua => lex_ua,
        GrammarVariant::UaSc => lex_uasc,
    };
    let mut out = Vec::new();
    for item in corpus {
        for (draw, pl) in item_lattices(item, cfg.input_mode(), sp, cm)?.iter().enumerate() {
            out.push(evaluate_lattice(pl, item, lex, g, p, sp.decode, draw));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    corpus: &[CorpusSentence],
    lex_ua: &Lexicon,
    lex_uasc: &Lexicon,
    g: &Grammar,
    cfg: ExperimentConfig,
    p: &RelaxationParams,
    sp: &SimParams,
    cm: &ConfusionMatrix,
) -> Result<ConfigResult> {
    let outcomes = run_config_outcomes(corpus, lex_ua, lex_uasc, g, cfg, p, sp, cm)?;
    Ok(ConfigResult {
        config: cfg,
        morph_hits: outcomes.iter().filter(|o| o.morph_hit).count(),
        syn_hits: outcomes.iter().filter(|o| o.syn_hit).count(),
        items: outcomes.len(),
        errors: outcomes
            .iter()
            .filter_map(|o| o.error.as_ref().map(|e| format!("{}#{}: {e}", o.item_id, o.draw)))
            .collect(),
        seed: sp.seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ConfigResult>,
    pub params: RelaxationParams,
    pub sim: SimParams,
}

impl Report {
    /// Tab-separated table preceded by `#` lines echoing the parameters.
    /// Contains nothing run-dependent, so equal inputs give equal bytes.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for line in self.params.to_text().lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str(&format!(
            "# avg_candidates {}\n# lattices_per_sentence {}\n# length_normalize {}\n",
            self.sim.avg_candidates, self.sim.lattices_per_sentence, self.sim.decode.length_normalize
        ));
        s.push_str("config\tmorph_acc\tmorph_frac\tsyn_acc\tsyn_frac\titems\tseed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{:.4}\t{}/{}\t{:.4}\t{}/{}\t{}\t{}\n",
                r.config,
                r.morph_acc(),
                r.morph_hits,
                r.items,
                r.syn_acc(),
                r.syn_hits,
                r.items,
                r.items,
                r.seed
            ));
        }
        s
    }
}
