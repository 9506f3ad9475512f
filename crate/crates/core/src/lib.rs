//! Lattice-based morphological and syntactic parsing for agglutinative
//! languages with an extended categorial grammar and an interactive
//! relaxation chart parser.

pub mod bundled;
pub mod category;
pub mod chart;
pub mod error;
pub mod grammar;
pub mod lattice;
pub mod lexicon;
pub mod oracle;
pub mod sim;
pub mod tree;

pub use category::{combine, normalize, parse_category, render_category, unify, Category, Rule};
pub use chart::{best_parse, init_chart, run_relaxation, Chart, ParseForest, RelaxationParams};
pub use error::{Error, Result};
pub use grammar::Grammar;
pub use lattice::{decode_lattice, filter_lattice, MorphemeLattice, PhonemeLattice, Span};
pub use lexicon::{build_trie, load_lexicon, Lexicon};
pub use oracle::{exhaustive_parse, forest_contains, OracleForest};
pub use sim::{run_experiment, ConfusionMatrix, CorpusSentence, ExperimentConfig, Report, SimParams};
pub use tree::{parse_tree_text, ParseTree};
