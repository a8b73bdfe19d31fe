//! ICD-9 code grammar and the depth-level view of the label space.
//!
//! A code such as `364.11` splits into a *category* (`364`) and an *etiology*
//! (`11`). The number of etiology digits fixes the code's depth level:
//! two digits is [`Level::E2`], one is [`Level::E1`], none is [`Level::E0`].
//! Above `E0` sits [`Level::Chapter`], the ICD-9 block (`360-379`), which is
//! looked up in a [`ChapterTable`].
//!
//! Ancestry is syntactic. The `E1` ancestor of `364.11` is `364.1`, its `E0`
//! ancestor is `364`, and no stored tree is needed below the chapter level.
//! Every node belongs to exactly one level, so a category can never be both a
//! parent and a grandparent of different leaves.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chapter assigned to categories the table does not cover (non-strict mode).
pub const UNKNOWN_CHAPTER: &str = "UNKNOWN";

/// Block table shipped with the crate.
pub const DEFAULT_CHAPTER_TABLE: &str = include_str!("../data/icd9_blocks.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("malformed code {code:?}: {reason}")]
    MalformedCode { code: String, reason: &'static str },

    #[error("category {category} is not covered by the chapter table")]
    UnknownChapter { category: String },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("line {line}: range {range} overlaps {other_range} (line {other_line})")]
    Overlap {
        line: usize,
        range: String,
        other_line: usize,
        other_range: String,
    },

    #[error("chapter level requested but the chapter table is empty")]
    EmptyChapterTable,

    #[error("maximum level must be e1, e0 or chapter, got {0}")]
    InvalidMaxLevel(Level),

    #[error("failed to read chapter table: {0}")]
    Io(String),
}

/// Depth stratum of the label space, ordered from the deepest (`E2`) upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    E2,
    E1,
    E0,
    Chapter,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::E2, Level::E1, Level::E0, Level::Chapter];

    /// Levels from `E2` up to and including `max`.
    pub fn up_to(max: Level) -> impl Iterator<Item = Level> {
        Level::ALL.into_iter().take_while(move |l| *l <= max)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::E2 => "e2",
            Level::E1 => "e1",
            Level::E0 => "e0",
            Level::Chapter => "chapter",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e2" => Ok(Level::E2),
            "e1" => Ok(Level::E1),
            "e0" => Ok(Level::E0),
            "chapter" | "c" => Ok(Level::Chapter),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

/// Code family. Ranges in a chapter table are only comparable within one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Three-digit diagnosis categories (`001`-`999`).
    Diagnosis,
    /// Two-digit procedure categories (`00`-`99`).
    Procedure,
    /// Supplementary classification of factors influencing health status (`V01`-`V91`).
    V,
    /// Supplementary classification of external causes (`E000`-`E999`).
    E,
}

/// Identifier of a node at some level: a code, a truncated code or a chapter id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

/// A parsed ICD-9 code.
///
/// Equality and ordering consider the normalized code only, so `" 364.11"` and
/// `"364.11"` are the same label.
#[derive(Debug, Clone)]
pub struct CodeId {
    raw: String,
    category: String,
    etiology: String,
    native_level: Level,
}

impl CodeId {
    pub fn parse(text: &str) -> Result<CodeId, OntologyError> {
        let trimmed = text.trim();
        let malformed = |reason| OntologyError::MalformedCode {
            code: text.to_owned(),
            reason,
        };
        if trimmed.is_empty() {
            return Err(malformed("empty code"));
        }
        let (category, etiology) = match trimmed.split_once('.') {
            Some((c, e)) => {
                if e.contains('.') {
                    return Err(malformed("more than one decimal point"));
                }
                if e.is_empty() {
                    return Err(malformed("decimal point without etiology digits"));
                }
                (c, e)
            }
            None => (trimmed, ""),
        };
        category_family(category).map_err(malformed)?;
        if etiology.len() > 2 {
            return Err(malformed("etiology has more than two digits"));
        }
        if !etiology.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed("etiology must be digits"));
        }
        let native_level = match etiology.len() {
            0 => Level::E0,
            1 => Level::E1,
            _ => Level::E2,
        };
        Ok(CodeId {
            raw: trimmed.to_owned(),
            category: category.to_owned(),
            etiology: etiology.to_owned(),
            native_level,
        })
    }

    /// Input text with surrounding whitespace removed.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn etiology(&self) -> &str {
        &self.etiology
    }

    pub fn native_level(&self) -> Level {
        self.native_level
    }

    pub fn family(&self) -> Family {
        // validated in parse
        category_family(&self.category).expect("category validated at parse time")
    }

    /// The code's own node at its native level.
    pub fn node(&self) -> NodeId {
        NodeId(self.to_string())
    }

    /// Ancestor (or self) at a syntactic level. `None` when `level` lies below
    /// the native level or is `Chapter`, which needs a table.
    pub fn truncated(&self, level: Level) -> Option<NodeId> {
        if level < self.native_level {
            return None;
        }
        match level {
            Level::E2 => Some(self.node()),
            Level::E1 => Some(NodeId(format!("{}.{}", self.category, &self.etiology[..1]))),
            Level::E0 => Some(NodeId(self.category.clone())),
            Level::Chapter => None,
        }
    }
}

impl PartialEq for CodeId {
    fn eq(&self, other: &Self) -> bool {
        self.category == other.category && self.etiology == other.etiology
    }
}

impl Eq for CodeId {}

impl std::hash::Hash for CodeId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.category.hash(state);
        self.etiology.hash(state);
    }
}

impl PartialOrd for CodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.category, &self.etiology).cmp(&(&other.category, &other.etiology))
    }
}

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.etiology.is_empty() {
            f.write_str(&self.category)
        } else {
            write!(f, "{}.{}", self.category, self.etiology)
        }
    }
}

impl FromStr for CodeId {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodeId::parse(s)
    }
}

/// Parse an ICD-9 code string.
pub fn parse_code(text: &str) -> Result<CodeId, OntologyError> {
    CodeId::parse(text)
}

fn all_digits(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_digit())
}

fn category_family(category: &str) -> Result<Family, &'static str> {
    let bytes = category.as_bytes();
    match bytes.first() {
        Some(b'V') => {
            if bytes.len() == 3 && all_digits(&category[1..]) {
                Ok(Family::V)
            } else {
                Err("V category must be V followed by two digits")
            }
        }
        Some(b'E') => {
            if bytes.len() == 4 && all_digits(&category[1..]) {
                Ok(Family::E)
            } else {
                Err("E category must be E followed by three digits")
            }
        }
        Some(b) if b.is_ascii_digit() => match (bytes.len(), all_digits(category)) {
            (3, true) => Ok(Family::Diagnosis),
            (2, true) => Ok(Family::Procedure),
            (_, false) => Err("category must be digits, or prefixed with V or E"),
            _ => Err("numeric category must have two or three digits"),
        },
        Some(_) => Err("category must be digits, or prefixed with V or E"),
        None => Err("empty category"),
    }
}

/// Family and position of a category within its family.
fn category_key(category: &str) -> Result<(Family, u16), &'static str> {
    let family = category_family(category)?;
    let digits = match family {
        Family::V | Family::E => &category[1..],
        Family::Diagnosis | Family::Procedure => category,
    };
    // at most three ASCII digits
    Ok((family, digits.parse().expect("validated digits")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChapterEntry {
    pub range_start: String,
    pub range_end: String,
    pub chapter_id: String,
    pub description: String,
}

/// Block ranges keyed by family-local category order.
#[derive(Debug, Clone, Default)]
pub struct ChapterTable {
    entries: Vec<ChapterEntry>,
    // (family, start) -> (end, entry index)
    index: BTreeMap<(Family, u16), (u16, usize)>,
}

impl ChapterTable {
    /// Read a tab-separated table: `range_start`, `range_end`, `chapter_id`,
    /// `description`. Blank lines and lines starting with `#` are skipped.
    pub fn load<R: Read>(source: R) -> Result<ChapterTable, OntologyError> {
        let reader = BufReader::new(source);
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| OntologyError::Io(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(OntologyError::Format {
                    line: line_no,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            entries.push(ChapterEntry {
                range_start: fields[0].trim().to_owned(),
                range_end: fields[1].trim().to_owned(),
                chapter_id: fields[2].trim().to_owned(),
                description: fields[3].trim().to_owned(),
            });
            lines.push(line_no);
        }
        Self::build(entries, &lines)
    }

    pub fn from_entries(entries: Vec<ChapterEntry>) -> Result<ChapterTable, OntologyError> {
        let lines: Vec<usize> = (1..=entries.len()).collect();
        Self::build(entries, &lines)
    }

    /// The table shipped in `data/icd9_blocks.tsv`.
    pub fn icd9_default() -> ChapterTable {
        ChapterTable::load(DEFAULT_CHAPTER_TABLE.as_bytes()).expect("bundled chapter table is valid")
    }

    fn build(entries: Vec<ChapterEntry>, lines: &[usize]) -> Result<ChapterTable, OntologyError> {
        let mut index: BTreeMap<(Family, u16), (u16, usize)> = BTreeMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let line = lines[i];
            let bound = |s: &str| {
                category_key(s).map_err(|reason| OntologyError::Format {
                    line,
                    message: format!("unparseable range bound {s:?}: {reason}"),
                })
            };
            let (start_family, start) = bound(&entry.range_start)?;
            let (end_family, end) = bound(&entry.range_end)?;
            if start_family != end_family {
                return Err(OntologyError::Format {
                    line,
                    message: format!(
                        "range {}-{} spans two code families",
                        entry.range_start, entry.range_end
                    ),
                });
            }
            if start > end {
                return Err(OntologyError::Format {
                    line,
                    message: format!("range start {} is after end {}", entry.range_start, entry.range_end),
                });
            }
            if entry.chapter_id.is_empty() || entry.chapter_id == UNKNOWN_CHAPTER {
                return Err(OntologyError::Format {
                    line,
                    message: format!("invalid chapter id {:?}", entry.chapter_id),
                });
            }
            // a chapter id spelled like a code would alias a node on a lower level
            if CodeId::parse(&entry.chapter_id).is_ok() {
                return Err(OntologyError::Format {
                    line,
                    message: format!("chapter id {:?} is indistinguishable from a code", entry.chapter_id),
                });
            }

            let overlapping = index
                .range(..=(start_family, end))
                .rev()
                .take_while(|((family, _), _)| *family == start_family)
                .find(|(_, (other_end, _))| *other_end >= start)
                .map(|(_, (_, j))| *j);
            if let Some(j) = overlapping {
                let other = &entries[j];
                return Err(OntologyError::Overlap {
                    line,
                    range: format!("{}-{}", entry.range_start, entry.range_end),
                    other_line: lines[j],
                    other_range: format!("{}-{}", other.range_start, other.range_end),
                });
            }
            index.insert((start_family, start), (end, i));
        }
        Ok(ChapterTable { entries, index })
    }

    pub fn entries(&self) -> &[ChapterEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entry whose range covers `category`, if any.
    pub fn lookup(&self, category: &str) -> Option<&ChapterEntry> {
        let (family, key) = category_key(category).ok()?;
        let (&(found_family, _), &(end, i)) = self.index.range(..=(family, key)).next_back()?;
        (found_family == family && key <= end).then(|| &self.entries[i])
    }
}

/// Depth-level ontology used for augmentation.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    chapter_table: ChapterTable,
    max_level: Level,
    strict: bool,
}

impl Hierarchy {
    pub fn new(chapter_table: ChapterTable, max_level: Level, strict: bool) -> Result<Hierarchy, OntologyError> {
        if max_level < Level::E1 {
            return Err(OntologyError::InvalidMaxLevel(max_level));
        }
        if max_level == Level::Chapter && chapter_table.is_empty() {
            return Err(OntologyError::EmptyChapterTable);
        }
        Ok(Hierarchy {
            chapter_table,
            max_level,
            strict,
        })
    }

    /// Bundled ICD-9 table, non-strict.
    pub fn icd9(max_level: Level) -> Hierarchy {
        Hierarchy::new(ChapterTable::icd9_default(), max_level, false).expect("valid default hierarchy")
    }

    pub fn chapter_table(&self) -> &ChapterTable {
        &self.chapter_table
    }

    pub fn max_level(&self) -> Level {
        self.max_level
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    /// Levels that augmentation fills, `E2` through `max_level`.
    pub fn levels(&self) -> impl Iterator<Item = Level> {
        Level::up_to(self.max_level)
    }

    /// Chapter id for a category. Uncovered categories fail in strict mode
    /// and map to [`UNKNOWN_CHAPTER`] otherwise.
    pub fn chapter_of(&self, category: &str) -> Result<&str, OntologyError> {
        match self.chapter_table.lookup(category) {
            Some(entry) => Ok(&entry.chapter_id),
            None if self.strict => Err(OntologyError::UnknownChapter {
                category: category.to_owned(),
            }),
            None => Ok(UNKNOWN_CHAPTER),
        }
    }

    /// The node representing `code` at `level`: itself at its native level,
    /// its unique ancestor above it, nothing below it.
    pub fn ancestor_at(&self, code: &CodeId, level: Level) -> Result<Option<NodeId>, OntologyError> {
        if level < code.native_level() {
            return Ok(None);
        }
        match level {
            Level::Chapter => self.chapter_of(code.category()).map(|c| Some(NodeId::new(c))),
            _ => Ok(code.truncated(level)),
        }
    }
}
