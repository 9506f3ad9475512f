use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use morphochart::chart::{run_relaxation_traced, DecayMode};
use morphochart::lattice::{parse_lattice, validate_lattice, DecodeOptions, LatticeKind, MorphemeKind, PhonemeKind};
use morphochart::oracle::DEFAULT_AMBIGUITY_CAP;
use morphochart::sim::{generate_phoneme_lattice, load_confusion, load_corpus, GrammarVariant};
use morphochart::{
    best_parse, build_trie, bundled, decode_lattice, exhaustive_parse, filter_lattice, init_chart, load_lexicon,
    parse_category, run_experiment, Category, Error, ExperimentConfig, Grammar, Lexicon, MorphemeLattice,
    RelaxationParams, Report, SimParams,
};

#[derive(Parser)]
#[command(
    name = "morphochart",
    version,
    about = "Lattice morphology and relaxation chart parsing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a morpheme or phoneme lattice with the relaxation parser.
    Parse {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value = "UA+SC")]
        grammar_variant: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Print per-cycle statistics to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Decode a phoneme lattice into a filtered morpheme lattice.
    Decode {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate simulated phoneme lattices for one corpus sentence.
    Simulate {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        confusion: PathBuf,
        /// Corpus file; the bundled corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        sentence: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2.2)]
        avg_candidates: f64,
        #[arg(long, default_value_t = 1)]
        draws: usize,
    },
    /// Run the accuracy experiment and write a tab-separated report.
    Experiment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon_ua: PathBuf,
        #[arg(long)]
        lexicon_uasc: PathBuf,
        #[arg(long)]
        confusion: PathBuf,
        #[arg(long, default_value = "UAB,UAP,UA+SCB,UA+SCP")]
        configs: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2.2)]
        avg_candidates: f64,
        #[arg(long, default_value_t = 10)]
        draws: usize,
        #[arg(long)]
        out: PathBuf,
        /// Score morpheme edges by raw phoneme-score products instead of
        /// per-phoneme geometric means.
        #[arg(long)]
        raw_scores: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Enumerate every parse of a lattice exhaustively.
    Oracle {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = DEFAULT_AMBIGUITY_CAP)]
        cap: usize,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Parameter override file of `key value` lines.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rho_prime: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long)]
    decay_mode: Option<DecayMode>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<RelaxationParams, Failure> {
        let mut p = RelaxationParams::default();
        if let Some(path) = &self.params {
            p = p.with_overrides(&read(path)?)?;
        }
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut p.rho, self.rho);
        set(&mut p.rho_prime, self.rho_prime);
        set(&mut p.d, self.decay);
        set(&mut p.theta, self.theta);
        set(&mut p.phi, self.phi);
        if let Some(m) = self.max_cycles {
            p.max_cycles = m;
        }
        if let Some(m) = self.decay_mode {
            p.decay_mode = m;
        }
        p.validate()?;
        Ok(p)
    }
}

enum Failure {
    /// Input could not be read or was malformed.
    Input(String),
    /// Input was fine but no parse was found.
    NoParse(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn lexicon(path: &Path) -> Result<Lexicon, Failure> {
    load_lexicon(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn grammar_for(lex: &Lexicon, target: &Category) -> Result<Grammar, Failure> {
    Ok(Grammar::for_lexicon(lex, vec![target.clone()], "cli")?)
}

/// Reads either lattice kind; phoneme lattices are decoded and filtered.
fn morpheme_input(path: &Path, lex: &Lexicon) -> Result<MorphemeLattice, Failure> {
    let text = read(path)?;
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let ml = if header.is_some_and(|h| h.contains(&format!("kind={}", PhonemeKind::NAME))) {
        let pl = parse_lattice::<PhonemeKind>(&text)?;
        check(&validate_lattice(&pl))?;
        decode_lattice(&pl, &build_trie(lex))
    } else {
        let ml = parse_lattice::<MorphemeKind>(&text)?;
        check(&validate_lattice(&ml))?;
        ml
    };
    Ok(filter_lattice(&ml, lex))
}

fn check(violations: &[morphochart::lattice::Violation]) -> Result<(), Failure> {
    if violations.is_empty() {
        return Ok(());
    }
    let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
    Err(Failure::Input(format!("invalid lattice: {}", msgs.join("; "))))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Parse {
            lexicon: lex_path,
            grammar_variant,
            input,
            target,
            params,
            trace,
        } => {
            let variant: GrammarVariant = grammar_variant.parse()?;
            let mut lex = lexicon(&lex_path)?;
            if variant == GrammarVariant::Ua {
                lex = lex.erase_suppression();
            }
            let target = parse_category(&target)?;
            let g = grammar_for(&lex, &target)?;
            let p = params.resolve()?;
            let ml = morpheme_input(&input, &lex)?;
            let mut chart = init_chart(&ml, &lex, &g)?;
            for w in &chart.warnings {
                eprintln!("warning: {w}");
            }
            let forest = run_relaxation_traced(&mut chart, &g, &p, Some(&target), |s| {
                if trace {
                    eprintln!(
                        "cycle {} created {} removed {} live {} max_delta {:.6} injected {:.6} bound {:.6}",
                        s.cycle, s.created, s.removed, s.live, s.max_delta, s.spread.injected, s.spread.bound
                    );
                }
            });
            match best_parse(&forest, &chart) {
                Some(tree) => {
                    println!("{tree}");
                    Ok(())
                }
                None => Err(Failure::NoParse(format!(
                    "no parse with root {target} after {} cycles",
                    chart.cycle()
                ))),
            }
        }
        Command::Decode {
            lexicon: lex_path,
            input,
        } => {
            let lex = lexicon(&lex_path)?;
            let pl = parse_lattice::<PhonemeKind>(&read(&input)?)?;
            check(&validate_lattice(&pl))?;
            let ml = filter_lattice(&decode_lattice(&pl, &build_trie(&lex)), &lex);
            print!("{ml}");
            Ok(())
        }
        Command::Simulate {
            lexicon: lex_path,
            confusion,
            corpus,
            sentence,
            seed,
            avg_candidates,
            draws,
        } => {
            let lex = lexicon(&lex_path)?;
            let cm = load_confusion(&read(&confusion)?, Some(&lex.phonemes))?;
            let corpus_text = match &corpus {
                Some(path) => read(path)?,
                None => bundled::CORPUS.to_string(),
            };
            let items = load_corpus(&corpus_text, &lex)?;
            let item = items
                .iter()
                .find(|s| s.id == sentence)
                .ok_or_else(|| Failure::Input(format!("no sentence `{sentence}` in corpus")))?;
            let sp = SimParams {
                avg_candidates,
                lattices_per_sentence: draws,
                seed,
                ..SimParams::default()
            };
            sp.validate()?;
            for d in 0..draws {
                let pl = generate_phoneme_lattice(&item.phonemes, &cm, &sp, &item.id, d)?;
                println!("# {} draw {d}", item.id);
                print!("{pl}");
            }
            Ok(())
        }
        Command::Experiment {
            corpus,
            lexicon_ua,
            lexicon_uasc,
            confusion,
            configs,
            seed,
            avg_candidates,
            draws,
            out,
            raw_scores,
            params,
        } => {
            let started = Instant::now();
            let lex_ua = lexicon(&lexicon_ua)?;
            let lex_uasc = lexicon(&lexicon_uasc)?;
            let items = load_corpus(&read(&corpus)?, &lex_uasc)?;
            let cm = load_confusion(&read(&confusion)?, Some(&lex_uasc.phonemes))?;
            let configs = configs
                .split(',')
                .map(|c| c.trim().parse::<ExperimentConfig>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut cats: Vec<Category> = items.iter().map(|s| s.target.clone()).collect();
            cats.sort();
            cats.dedup();
            let mut g = Grammar::for_lexicon(&lex_uasc, cats, "experiment")?;
            g.basic_category_names.extend(lex_ua.basic_category_names());
            let p = params.resolve()?;
            let sp = SimParams {
                avg_candidates,
                lattices_per_sentence: draws,
                seed,
                decode: DecodeOptions {
                    length_normalize: !raw_scores,
                },
            };
            sp.validate()?;
            let mut rows = Vec::new();
            for cfg in configs {
                let row = run_experiment(&items, &lex_ua, &lex_uasc, &g, cfg, &p, &sp, &cm)?;
                for e in &row.errors {
                    eprintln!("{cfg}: {e}");
                }
                rows.push(row);
            }
            let report = Report {
                rows,
                params: p,
                sim: sp,
            };
            let tsv = report.to_tsv();
            fs::write(&out, &tsv).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
            print!("{tsv}");
            eprintln!("wall time {:.3}s", started.elapsed().as_secs_f64());
            Ok(())
        }
        Command::Oracle {
            lexicon: lex_path,
            input,
            target,
            cap,
        } => {
            let lex = lexicon(&lex_path)?;
            let target = parse_category(&target)?;
            let g = grammar_for(&lex, &target)?;
            let ml = morpheme_input(&input, &lex)?;
            let forest = exhaustive_parse(&ml, &lex, &g, Some(&target), cap)?;
            for t in &forest.trees {
                println!("{t}");
            }
            println!("parses {}", forest.len());
            if forest.is_empty() {
                return Err(Failure::NoParse(format!("no parse with root {target}")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NoParse(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
