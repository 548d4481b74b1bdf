use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use super::{EvalError, Qrels};
use crate::corpus::DocumentRecord;

/// Overlap between two sets of judgments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    /// (topic, doc) pairs judged in both.
    pub common: usize,
    pub agreed: usize,
    pub disagreed: usize,
    /// Pairs judged only in the first / second qrels.
    pub only_a: usize,
    pub only_b: usize,
}

impl Agreement {
    pub fn pct_agree(&self) -> f64 {
        100.0 * self.agreed as f64 / self.common as f64
    }

    pub fn pct_disagree(&self) -> f64 {
        100.0 * self.disagreed as f64 / self.common as f64
    }
}

/// Compares grades on the pairs judged in both `a` and `b`. With `binary`,
/// grades 1 and 2 count as the same label.
pub fn agreement(a: &Qrels, b: &Qrels, binary: bool) -> Result<Agreement, EvalError> {
    let label = |g: u8| if binary { u8::from(g >= 1) } else { g };
    let mut out = Agreement {
        common: 0,
        agreed: 0,
        disagreed: 0,
        only_a: 0,
        only_b: 0,
    };
    for (topic, doc, ga) in a.iter() {
        match b.get(topic, doc) {
            Some(gb) => {
                out.common += 1;
                if label(ga) == label(gb) {
                    out.agreed += 1;
                } else {
                    out.disagreed += 1;
                }
            }
            None => out.only_a += 1,
        }
    }
    out.only_b = b.len() - out.common;
    if out.common == 0 {
        return Err(EvalError::NoOverlap);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceRow {
    pub source: String,
    /// Unique documents graded 1 in any topic.
    pub partially_relevant: usize,
    pub partially_relevant_pct: f64,
    /// Unique documents graded 2 in any topic.
    pub relevant: usize,
    pub relevant_pct: f64,
    /// Corpus documents from this source.
    pub docs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceTable {
    pub rows: Vec<SourceRow>,
    pub total: SourceRow,
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        (10000.0 * n as f64 / total as f64).round() / 100.0
    }
}

/// Breakdown of judged documents by corpus source. A document graded 1 in
/// one topic and 2 in another appears in both columns. Judged ids not in
/// `records` are grouped under `unknown`. Percentages are rounded to two
/// decimals.
pub fn source_stats(qrels: &Qrels, records: &[DocumentRecord]) -> SourceTable {
    let source_of: HashMap<&str, &str> = records.iter().map(|r| (r.doc_id.as_str(), r.source.as_str())).collect();
    let mut docs: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *docs.entry(r.source.as_str()).or_default() += 1;
    }
    let mut grade_docs: [HashSet<&str>; 2] = [HashSet::new(), HashSet::new()];
    for (_, doc, g) in qrels.iter() {
        if g >= 1 {
            grade_docs[usize::from(g - 1)].insert(doc);
        }
    }
    let mut counts: BTreeMap<&str, [usize; 2]> = docs.keys().map(|s| (*s, [0, 0])).collect();
    for (i, set) in grade_docs.iter().enumerate() {
        for doc in set {
            let src = source_of.get(doc).copied().unwrap_or("unknown");
            counts.entry(src).or_default()[i] += 1;
        }
    }
    let totals = [grade_docs[0].len(), grade_docs[1].len()];
    let mut rows: Vec<SourceRow> = counts
        .into_iter()
        .map(|(src, [p, r])| SourceRow {
            source: src.to_string(),
            partially_relevant: p,
            partially_relevant_pct: pct(p, totals[0]),
            relevant: r,
            relevant_pct: pct(r, totals[1]),
            docs: docs.get(src).copied().unwrap_or(0),
        })
        .collect();
    rows.sort_by_key(|r| (r.source == "unknown", r.source.to_lowercase(), r.source.clone()));
    let total = SourceRow {
        source: "Total".to_string(),
        partially_relevant: totals[0],
        partially_relevant_pct: if totals[0] > 0 { 100.0 } else { 0.0 },
        relevant: totals[1],
        relevant_pct: if totals[1] > 0 { 100.0 } else { 0.0 },
        docs: records.len(),
    };
    SourceTable { rows, total }
}

impl SourceTable {
    pub fn to_text(&self) -> String {
        let header = ["Source", "Partially relevant", "Relevant", "Docs"].map(String::from);
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .chain([&self.total])
            .map(|r| {
                [
                    r.source.clone(),
                    format!("{} ({:.2}%)", r.partially_relevant, r.partially_relevant_pct),
                    format!("{} ({:.2}%)", r.relevant, r.relevant_pct),
                    r.docs.to_string(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..4)
            .map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in std::iter::once(&header).chain(&cells) {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                line[0],
                line[1],
                line[2],
                line[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "partially_relevant", "partially_relevant_pct", "relevant", "relevant_pct", "docs"])
            .expect("in-memory write");
        for r in self.rows.iter().chain([&self.total]) {
            w.write_record([
                r.source.clone(),
                r.partially_relevant.to_string(),
                format!("{:.2}", r.partially_relevant_pct),
                r.relevant.to_string(),
                format!("{:.2}", r.relevant_pct),
                r.docs.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}
