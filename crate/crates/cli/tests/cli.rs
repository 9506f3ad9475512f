use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn morphochart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphochart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// One phoneme per position, spelled from space-separated symbols.
fn phoneme_file(dir: &TempDir, name: &str, phonemes: &str) -> PathBuf {
    let ps: Vec<&str> = phonemes.split_whitespace().collect();
    let mut text = format!("lattice {} kind=phoneme\n", ps.len() + 1);
    for (i, p) in ps.iter().enumerate() {
        text.push_str(&format!("edge {i} {} {p} 1\n", i + 1));
    }
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PHA_IL_TUL_UL: &str = "p h a i l t u l u l";
const SAY_PHA_IL_TUL: &str = "s a y p h a i l t u l";

#[test]
fn parse_prints_the_best_tree() {
    let dir = TempDir::new().unwrap();
    let input = phoneme_file(&dir, "in.lat", PHA_IL_TUL_UL);
    let lex = data("lexicon_uasc.lex");
    let o = morphochart(&[
        "parse",
        "--lexicon",
        s(&lex),
        "--input",
        s(&input),
        "--target",
        "np[obj]",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        stdout(&o).trim(),
        "(np[obj][0,10] (np|[0,8] (np|[0,5] pha-il) (np|\\(np|)[5,8] tul)) (np[obj]\\(np|)[8,10] ul))"
    );
}

#[test]
fn parse_without_a_result_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let input = phoneme_file(&dir, "in.lat", PHA_IL_TUL_UL);
    let lex = data("lexicon_uasc.lex");
    let o = morphochart(&[
        "parse",
        "--lexicon",
        s(&lex),
        "--input",
        s(&input),
        "--target",
        "s[DEC]",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.lat");
    fs::write(&bad, "lattice 3 kind=phoneme\nedge 0 1\n").unwrap();
    let lex = data("lexicon_uasc.lex");
    let o = morphochart(&["parse", "--lexicon", s(&lex), "--input", s(&bad), "--target", "np"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let missing = dir.path().join("missing.lat");
    let o = morphochart(&["decode", "--lexicon", s(&lex), "--input", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    let good = phoneme_file(&dir, "in.lat", PHA_IL_TUL_UL);
    let o = morphochart(&[
        "parse",
        "--lexicon",
        s(&lex),
        "--input",
        s(&good),
        "--target",
        "np",
        "--theta",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_counts_bracketings_per_grammar_variant() {
    let dir = TempDir::new().unwrap();
    let input = phoneme_file(&dir, "in.lat", SAY_PHA_IL_TUL);
    let count = |lex: &str| {
        let o = morphochart(&[
            "oracle",
            "--lexicon",
            s(&data(lex)),
            "--input",
            s(&input),
            "--target",
            "np",
        ]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o).lines().last().unwrap().to_string()
    };
    assert_eq!(count("lexicon_ua.lex"), "parses 2");
    assert_eq!(count("lexicon_uasc.lex"), "parses 1");
}

#[test]
fn oracle_reports_the_ambiguity_cap() {
    let dir = TempDir::new().unwrap();
    let input = phoneme_file(&dir, "in.lat", SAY_PHA_IL_TUL);
    let lex = data("lexicon_ua.lex");
    let o = morphochart(&[
        "oracle",
        "--lexicon",
        s(&lex),
        "--input",
        s(&input),
        "--target",
        "np",
        "--cap",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decode_emits_a_morpheme_lattice() {
    let dir = TempDir::new().unwrap();
    let input = phoneme_file(&dir, "in.lat", PHA_IL_TUL_UL);
    let o = morphochart(&[
        "decode",
        "--lexicon",
        s(&data("lexicon_uasc.lex")),
        "--input",
        s(&input),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("lattice 11 kind=morpheme\n"), "{out}");
    for edge in ["edge 0 5 pha-il 1", "edge 5 8 tul 1", "edge 8 10 ul 1"] {
        assert!(out.contains(edge), "{out}");
    }
}

#[test]
fn simulate_is_seeded() {
    let args = |seed: &str| {
        let o = morphochart(&[
            "simulate",
            "--lexicon",
            s(&data("lexicon_uasc.lex")),
            "--confusion",
            s(&data("confusion.cm")),
            "--sentence",
            "mek-so",
            "--draws",
            "3",
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    assert_eq!(args("7"), args("7"));
    assert_ne!(args("7"), args("8"));
}

#[test]
fn experiment_writes_the_report_it_prints() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.tsv");
    let o = morphochart(&[
        "experiment",
        "--corpus",
        s(&data("corpus.txt")),
        "--lexicon-ua",
        s(&data("lexicon_ua.lex")),
        "--lexicon-uasc",
        s(&data("lexicon_uasc.lex")),
        "--confusion",
        s(&data("confusion.cm")),
        "--configs",
        "UAB,UA+SCB",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(&out).unwrap();
    assert_eq!(stdout(&o), report);
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "config\tmorph_acc\tmorph_frac\tsyn_acc\tsyn_frac\titems\tseed");
    assert!(rows[1].starts_with("UAB\t1.0000\t12/12\t"), "{}", rows[1]);
    assert!(
        rows[2].starts_with("UA+SCB\t1.0000\t12/12\t1.0000\t12/12\t12\t1"),
        "{}",
        rows[2]
    );
}
