//! Hierarchical evaluation of multi-label predictions over ICD-9.
//!
//! Three regimes are computed side by side from the same pair of label files:
//!
//! * flat precision, recall and F1 over leaf codes,
//! * set-based hierarchical scores, where each ancestor is present or absent,
//! * count-preserving hierarchical evaluation (CoPHE), where each ancestor
//!   carries how many of its descendant leaves were predicted or assigned, so
//!   over- and under-prediction inside a code family is visible.
//!
//! The hierarchy is represented by depth levels (`e2`, `e1`, `e0`, chapter)
//! rather than by parent/grandparent hops.
//!
//! ```
//! use cophe::{evaluate, EvalOptions, Hierarchy, LabelSet, Level, Regime};
//!
//! let pred = LabelSet::parse("doc", &["364.11", "364.21", "364.3", "364.41"]).unwrap();
//! let gold = LabelSet::parse("doc", &["364.11", "364.24", "364.9"]).unwrap();
//! let hierarchy = Hierarchy::icd9(Level::E0);
//! let report = evaluate(&[(pred, gold)], &hierarchy, &EvalOptions::default()).unwrap();
//! let cophe = report.regime(Regime::Cophe).unwrap();
//! assert_eq!((cophe.overall.counts.tp, cophe.overall.counts.fp, cophe.overall.counts.fn_), (6, 5, 2));
//! ```

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod ontology;
pub mod report;

pub use augment::{augment, LabelError, LabelSet, LevelCounts, Propagation};
pub use corpus::{read_corpus, read_corpus_from, Corpus, CorpusError, CorpusFormat};
pub use metrics::{
    align, confusion_counts, document_confusion, evaluate, flat_confusion, micro_prf, ConfusionCounts, EvalError,
    EvalOptions, EvalReport, LevelReport, NodeConfusion, Prf, Ratio, Regime, RegimeReport, Scores,
};
pub use ontology::{
    parse_code, ChapterEntry, ChapterTable, CodeId, Family, Hierarchy, Level, NodeId, OntologyError, UNKNOWN_CHAPTER,
};
pub use report::{ReportConfig, ReportDocument};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
