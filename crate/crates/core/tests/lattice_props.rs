use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use morphochart::lattice::{
    decode_lattice, filter_lattice, parse_lattice, Edge, MorphemeKind, MorphemeLattice, PhonemeKind, PhonemeLattice,
};
use morphochart::lexicon::{build_trie, load_lexicon, trie_lookup, Lexicon};

const SYMBOLS: [&str; 5] = ["a", "b", "c", "d", "e"];
const CLASSES: [&str; 3] = ["k0", "k1", "k2"];

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(256)
}

#[derive(Debug, Clone)]
pub struct LexSpec {
    entries: Vec<(usize, Vec<usize>)>,
    connect: Vec<(usize, usize)>,
    start: Vec<usize>,
    end: Vec<usize>,
}

impl LexSpec {
    fn text(&self) -> String {
        let mut s = format!("phonemes {}\n", SYMBOLS.join(" "));
        for c in CLASSES {
            s.push_str(&format!("class {c}\n"));
        }
        for (l, r) in &self.connect {
            s.push_str(&format!("connect {} {}\n", CLASSES[*l], CLASSES[*r]));
        }
        let names = |v: &[usize]| v.iter().map(|&i| CLASSES[i]).collect::<Vec<_>>().join(" ");
        if !self.start.is_empty() {
            s.push_str(&format!("boundary start {}\n", names(&self.start)));
        }
        if !self.end.is_empty() {
            s.push_str(&format!("boundary end {}\n", names(&self.end)));
        }
        for (i, (class, surface)) in self.entries.iter().enumerate() {
            let surface: Vec<&str> = surface.iter().map(|&p| SYMBOLS[p]).collect();
            s.push_str(&format!("morpheme m{i} {} /{}/\n", CLASSES[*class], surface.join(",")));
            s.push_str("  variant left=ANY right=ANY cat=np\n");
        }
        s
    }

    fn lexicon(&self) -> Lexicon {
        load_lexicon(&self.text()).unwrap()
    }
}

pub fn lex_spec(max_entries: usize, max_len: usize) -> impl Strategy<Value = LexSpec> {
    (
        prop::collection::vec(
            (0..3usize, prop::collection::vec(0..5usize, 1..=max_len)),
            1..=max_entries,
        ),
        prop::collection::vec((0..3usize, 0..3usize), 0..=9),
        prop::collection::vec(0..3usize, 0..=3),
        prop::collection::vec(0..3usize, 0..=3),
    )
        .prop_map(|(entries, connect, mut start, mut end)| {
            start.sort();
            start.dedup();
            end.sort();
            end.dedup();
            LexSpec {
                entries,
                connect,
                start,
                end,
            }
        })
}

/// Phoneme lattice over `n` vertices with forward edges only.
pub fn phoneme_lattice(max_vertices: usize) -> impl Strategy<Value = PhonemeLattice> {
    (2..=max_vertices).prop_flat_map(|n| {
        prop::collection::vec((0..n - 1, 1..=3usize, 0..5usize, 1..=20u32), 1..=14).prop_map(move |raw| {
            let mut seen = BTreeSet::new();
            let edges = raw
                .into_iter()
                .filter_map(|(from, step, sym, score)| {
                    let to = (from + step).min(n - 1);
                    seen.insert((from, to, sym))
                        .then(|| Edge::new(from, to, SYMBOLS[sym], score as f64 / 20.0))
                })
                .collect();
            PhonemeLattice::new(n, edges)
        })
    })
}

/// Morpheme lattice over entry ids `m0..m{k}`.
pub fn morpheme_lattice(entries: usize) -> impl Strategy<Value = MorphemeLattice> {
    (2..=7usize).prop_flat_map(move |n| {
        prop::collection::vec((0..n - 1, 1..=3usize, 0..entries), 1..=12).prop_map(move |raw| {
            let mut seen = BTreeSet::new();
            let edges = raw
                .into_iter()
                .filter_map(|(from, step, id)| {
                    let to = (from + step).min(n - 1);
                    seen.insert((from, to, id))
                        .then(|| Edge::new(from, to, &format!("m{id}"), 0.5))
                })
                .collect();
            MorphemeLattice::new(n, edges)
        })
    })
}

/// Every phoneme path from `from`, as (end vertex, symbols, score product).
fn paths_from(pl: &PhonemeLattice, from: usize, out: &mut Vec<(usize, Vec<String>, f64)>, prefix: (Vec<String>, f64)) {
    for e in pl.edges.iter().filter(|e| e.from == from) {
        let mut syms = prefix.0.clone();
        syms.push(e.label.clone());
        let score = prefix.1 * e.score;
        out.push((e.to, syms.clone(), score));
        paths_from(pl, e.to, out, (syms, score));
    }
}

/// Edges of `ml` lying on some full path, by enumerating all full paths.
fn edges_on_full_paths<F>(ml: &MorphemeLattice, ok: F) -> BTreeSet<usize>
where
    F: Fn(&[usize]) -> bool,
{
    fn walk<F: Fn(&[usize]) -> bool>(
        ml: &MorphemeLattice,
        v: usize,
        path: &mut Vec<usize>,
        ok: &F,
        out: &mut BTreeSet<usize>,
    ) {
        if v == ml.last() {
            if ok(path) {
                out.extend(path.iter().copied());
            }
            return;
        }
        for (i, e) in ml.edges.iter().enumerate().filter(|(_, e)| e.from == v) {
            path.push(i);
            walk(ml, e.to, path, ok, out);
            path.pop();
        }
    }
    let mut out = BTreeSet::new();
    walk(ml, 0, &mut Vec::new(), &ok, &mut out);
    out
}

fn brute_decode(pl: &PhonemeLattice, lex: &Lexicon) -> BTreeMap<(usize, usize, String), f64> {
    let mut best: BTreeMap<(usize, usize, String), f64> = BTreeMap::new();
    for start in 0..pl.vertex_count {
        let mut paths = Vec::new();
        paths_from(pl, start, &mut paths, (Vec::new(), 1.0));
        for (end, syms, score) in paths {
            for entry in lex.entries.values() {
                if entry.surface == syms {
                    let slot = best.entry((start, end, entry.id.clone())).or_insert(0.0);
                    *slot = slot.max(score);
                }
            }
        }
    }
    let raw = MorphemeLattice::new(
        pl.vertex_count,
        best.iter().map(|((f, t, id), s)| Edge::new(*f, *t, id, *s)).collect(),
    );
    let keep = edges_on_full_paths(&raw, |_| true);
    raw.edges
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, e)| ((e.from, e.to, e.label.clone()), e.score))
        .collect()
}

fn as_map(ml: &MorphemeLattice) -> BTreeMap<(usize, usize, String), f64> {
    ml.edges
        .iter()
        .map(|e| ((e.from, e.to, e.label.clone()), e.score))
        .collect()
}

pub fn check_decode_matches_brute_force(spec: LexSpec, pl: PhonemeLattice) -> Result<(), TestCaseError> {
    let lex = spec.lexicon();
    let got = as_map(&decode_lattice(&pl, &build_trie(&lex)));
    let want = brute_decode(&pl, &lex);
    prop_assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
    for (k, s) in &want {
        prop_assert!((got[k] - s).abs() < 1e-12, "{:?}: {} vs {}", k, got[k], s);
    }
    Ok(())
}

pub fn check_filter_is_a_fixpoint(spec: LexSpec, ml: MorphemeLattice) -> Result<(), TestCaseError> {
    let lex = spec.lexicon();
    let ml = MorphemeLattice::new(
        ml.vertex_count,
        ml.edges.into_iter().filter(|e| lex.entry(&e.label).is_some()).collect(),
    );
    let once = filter_lattice(&ml, &lex);
    prop_assert_eq!(filter_lattice(&once, &lex), once.clone());
    prop_assert!(once.edges.iter().all(|e| ml.has_edge(e.from, e.to, &e.label)));
    Ok(())
}

pub fn check_filter_keeps_exactly_the_legal_path_edges(
    spec: LexSpec,
    ml: MorphemeLattice,
) -> Result<(), TestCaseError> {
    let lex = spec.lexicon();
    let ml = MorphemeLattice::new(
        ml.vertex_count,
        ml.edges.into_iter().filter(|e| lex.entry(&e.label).is_some()).collect(),
    );
    let class = |i: usize| lex.class_of(&ml.edges[i].label).unwrap().to_string();
    let legal = edges_on_full_paths(&ml, |path| {
        let Some((&first, _)) = path.split_first() else {
            return false;
        };
        let last = *path.last().unwrap();
        spec.start.iter().any(|&c| CLASSES[c] == class(first))
            && spec.end.iter().any(|&c| CLASSES[c] == class(last))
            && path.windows(2).all(|w| {
                spec.connect
                    .iter()
                    .any(|&(l, r)| CLASSES[l] == class(w[0]) && CLASSES[r] == class(w[1]))
            })
    });
    let want: BTreeSet<(usize, usize, String)> = legal
        .iter()
        .map(|&i| (ml.edges[i].from, ml.edges[i].to, ml.edges[i].label.clone()))
        .collect();
    let got: BTreeSet<(usize, usize, String)> = filter_lattice(&ml, &lex)
        .edges
        .iter()
        .map(|e| (e.from, e.to, e.label.clone()))
        .collect();
    prop_assert_eq!(got, want);
    Ok(())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn trie_lookup_matches_scan(spec in lex_spec(6, 4), seq in prop::collection::vec(0..5usize, 0..=8)) {
        let lex = spec.lexicon();
        let trie = build_trie(&lex);
        let seq: Vec<&str> = seq.iter().map(|&i| SYMBOLS[i]).collect();
        let scan: BTreeSet<String> = lex
            .entries
            .values()
            .filter(|e| !seq.is_empty() && e.surface == seq)
            .map(|e| e.id.clone())
            .collect();
        prop_assert_eq!(trie_lookup(&trie, &seq), scan);
    }

    #[test]
    fn decode_matches_brute_force(spec in lex_spec(6, 3), pl in phoneme_lattice(8)) {
        check_decode_matches_brute_force(spec, pl)?;
    }

    #[test]
    fn decode_of_a_sublattice_is_a_sublattice(spec in lex_spec(6, 3), pl in phoneme_lattice(8), mask in prop::collection::vec(any::<bool>(), 14)) {
        let lex = spec.lexicon();
        let trie = build_trie(&lex);
        let sub = PhonemeLattice::new(
            pl.vertex_count,
            pl.edges.iter().zip(mask.iter().cycle()).filter(|(_, k)| **k).map(|(e, _)| e.clone()).collect(),
        );
        let full = as_map(&decode_lattice(&pl, &trie));
        for (k, s) in as_map(&decode_lattice(&sub, &trie)) {
            prop_assert!(full.get(&k).is_some_and(|f| *f >= s - 1e-12));
        }
    }

    #[test]
    fn filter_is_a_fixpoint(spec in lex_spec(5, 2), ml in morpheme_lattice(5)) {
        check_filter_is_a_fixpoint(spec, ml)?;
    }

    #[test]
    fn filter_keeps_exactly_the_legal_path_edges(spec in lex_spec(5, 2), ml in morpheme_lattice(5)) {
        check_filter_keeps_exactly_the_legal_path_edges(spec, ml)?;
    }

    #[test]
    fn lattice_text_round_trip(pl in phoneme_lattice(8), ml in morpheme_lattice(4)) {
        prop_assert_eq!(parse_lattice::<PhonemeKind>(&pl.to_text()).unwrap(), pl);
        prop_assert_eq!(parse_lattice::<MorphemeKind>(&ml.to_text()).unwrap(), ml);
    }
}
