use thiserror::Error;

use crate::lattice::Span;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("category syntax error at {pos}: {msg}")]
    CategorySyntax { pos: usize, msg: String },

    #[error("double suppression in category `{0}`")]
    DoubleSuppression(String),

    #[error("unbound variable ${0}")]
    UnboundVariable(String),

    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },

    #[error("undeclared class `{0}`")]
    UndeclaredClass(String),

    #[error("lattice line {line}: {msg}")]
    LatticeFormat { line: usize, msg: String },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("chart initialization: {0}")]
    ChartInit(String),

    #[error("link cycle detected at node {0}")]
    LinkCycle(usize),

    #[error("ambiguity cap {cap} exceeded in span {span}")]
    AmbiguityCap { cap: usize, span: Span },

    #[error("parameter error: {0}")]
    Params(String),

    #[error("confusion matrix line {line}: {msg}")]
    Confusion { line: usize, msg: String },

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("corpus line {line}: {msg}")]
    Corpus { line: usize, msg: String },

    #[error("tree text: {0}")]
    TreeText(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
