//! Report document and its table / JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{EvalReport, Ratio, Regime, Scores};
use crate::ontology::Level;

pub const TOOL_NAME: &str = "cophe";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub max_level: Level,
    pub regimes: Vec<Regime>,
    pub strict: bool,
    /// Path of the chapter table, or `"bundled"`.
    pub chapter_table: String,
    pub chapter_table_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub config: ReportConfig,
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn new(config: ReportConfig, report: EvalReport, mut warnings: Vec<String>) -> ReportDocument {
        warnings.extend(
            report
                .unmapped_categories
                .iter()
                .map(|c| format!("category {c} is not covered by the chapter table; counted under UNKNOWN")),
        );
        ReportDocument {
            tool: TOOL_NAME.to_owned(),
            version: VERSION.to_owned(),
            config,
            report,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Plain-text table: one row per regime and level with TP, FP, FN and
    /// P/R/F1 percentages. Level rows need `per_level`; node rows are shown
    /// whenever the report carries them.
    pub fn to_table(&self, per_level: bool) -> String {
        let mut out = String::new();
        let c = &self.config;
        let regimes: Vec<&str> = c.regimes.iter().map(|r| r.as_str()).collect();
        let _ = writeln!(
            out,
            "# {} {}  documents={}  max_level={}  regimes={}  strict={}  chapters={} (sha256 {})",
            self.tool,
            self.version,
            self.report.documents,
            c.max_level,
            regimes.join(","),
            c.strict,
            c.chapter_table,
            c.chapter_table_sha256,
        );
        let _ = writeln!(
            out,
            "{:<10} {:<12} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}",
            "regime", "level", "TP", "FP", "FN", "P", "R", "F1"
        );
        let _ = writeln!(out, "{}", "-".repeat(74));
        for r in &self.report.regimes {
            let name = r.regime.as_str();
            if r.regime == Regime::Flat {
                row(&mut out, name, "leaf", &r.overall);
                for (code, scores) in r.codes.iter().flatten() {
                    row(&mut out, "", &format!("  {code}"), scores);
                }
                continue;
            }
            if per_level {
                for level in &r.levels {
                    row(&mut out, name, level.level.as_str(), &level.scores);
                    for (node, scores) in level.nodes.iter().flatten() {
                        row(&mut out, "", &format!("  {node}"), scores);
                    }
                }
            }
            row(&mut out, name, "overall", &r.overall);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn row(out: &mut String, regime: &str, label: &str, s: &Scores) {
    let _ = writeln!(
        out,
        "{:<10} {:<12} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}",
        regime,
        label,
        s.counts.tp,
        s.counts.fp,
        s.counts.fn_,
        pct(&s.prf.precision),
        pct(&s.prf.recall),
        pct(&s.prf.f1)
    );
}

fn pct(r: &Ratio) -> String {
    if r.defined {
        format!("{:.1}", r.percent)
    } else {
        "n/a".to_owned()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
