use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalError, Qrels};
use crate::run::{Run, RunEntry};
use crate::util::write_atomic;

/// Reads a TREC run: `topic Q0 docid rank score tag` per line.
///
/// Lines may come in any order; within a topic, ranks must be exactly
/// 1..n. The run takes the tag of its first line.
pub fn read_run(path: &Path) -> Result<Run, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    parse_run_str(&text)
}

pub fn parse_run_str(text: &str) -> Result<Run, EvalError> {
    let mut by_topic: BTreeMap<u32, Vec<RunEntry>> = BTreeMap::new();
    let mut seen: HashSet<(u32, String)> = HashSet::new();
    let mut tag = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::MalformedLine { line: lineno, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let topic: u32 = fields[0].parse().map_err(|_| bad(format!("bad topic `{}`", fields[0])))?;
        let rank: usize = fields[3].parse().map_err(|_| bad(format!("bad rank `{}`", fields[3])))?;
        let score: f64 = fields[4].parse().map_err(|_| bad(format!("bad score `{}`", fields[4])))?;
        if !score.is_finite() {
            return Err(bad(format!("non-finite score `{}`", fields[4])));
        }
        let doc = fields[2].to_string();
        if !seen.insert((topic, doc.clone())) {
            return Err(bad(format!("document `{doc}` listed twice for topic {topic}")));
        }
        tag.get_or_insert_with(|| fields[5].to_string());
        by_topic.entry(topic).or_default().push(RunEntry {
            topic,
            surrogate_id: doc.clone(),
            original_id: doc,
            rank,
            score,
            tag: fields[5].to_string(),
        });
    }
    let mut run = Run::new(tag.unwrap_or_default());
    for (topic, mut entries) in by_topic {
        entries.sort_by_key(|e| e.rank);
        for (i, e) in entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(EvalError::RankGap {
                    topic,
                    expected: i + 1,
                    found: e.rank,
                });
            }
        }
        run.insert_raw(topic, entries);
    }
    Ok(run)
}

/// Run file contents, sorted by topic then rank. The document column holds
/// the surrogate id. Scores are printed in the shortest form that parses
/// back to the same value: rounding could turn distinct scores into ties,
/// and trec_eval would then reorder them by docid.
pub fn format_run(run: &Run) -> String {
    let mut out = String::new();
    for (topic, entries) in run.iter() {
        let mut sorted: Vec<&RunEntry> = entries.iter().collect();
        sorted.sort_by_key(|e| e.rank);
        for e in sorted {
            let _ = writeln!(out, "{topic} Q0 {} {} {} {}", e.surrogate_id, e.rank, e.score, e.tag);
        }
    }
    out
}

pub fn write_run(run: &Run, path: &Path) -> Result<(), EvalError> {
    write_atomic(path, format_run(run).as_bytes()).map_err(|e| EvalError::io(path, e))
}

/// Reads qrels: `topic iteration docid grade` per line. The iteration
/// column is ignored.
pub fn read_qrels(path: &Path) -> Result<Qrels, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    parse_qrels_str(&text)
}

pub fn parse_qrels_str(text: &str) -> Result<Qrels, EvalError> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(EvalError::MalformedLine {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let topic: u32 = fields[0].parse().map_err(|_| EvalError::MalformedLine {
            line: lineno,
            reason: format!("bad topic `{}`", fields[0]),
        })?;
        let grade = match fields[3] {
            "0" => 0,
            "1" => 1,
            "2" => 2,
            g => {
                return Err(EvalError::InvalidGrade {
                    line: lineno,
                    grade: g.to_string(),
                })
            }
        };
        qrels.insert(topic, fields[2], grade)?;
    }
    Ok(qrels)
}

/// Qrels contents, sorted by topic then document id, iteration column 0.
pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (topic, doc, grade) in qrels.iter() {
        let _ = writeln!(out, "{topic} 0 {doc} {grade}");
    }
    out
}

pub fn write_qrels(qrels: &Qrels, path: &Path) -> Result<(), EvalError> {
    write_atomic(path, format_qrels(qrels).as_bytes()).map_err(|e| EvalError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{RunIssue, Scored, MAX_RESULTS};

    #[test]
    fn parses_one_line() {
        let run = parse_run_str("1 Q0 abc 1 5.250000 myrun\n").unwrap();
        let e = &run.entries(1)[0];
        assert_eq!((e.topic, e.surrogate_id.as_str(), e.rank, e.score, e.tag.as_str()), (1, "abc", 1, 5.25, "myrun"));
        assert_eq!(run.tag(), "myrun");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = "1 Q0 b 1 2.5 r\n1 Q0 a 2 1 r\n3 Q0 c 1 0.333333 r\n";
        assert_eq!(format_run(&parse_run_str(text).unwrap()), text);
        // input order does not matter
        let shuffled = "3 Q0 c 1 0.333333 r\n1 Q0 a 2 1 r\n1 Q0 b 1 2.5 r\n";
        assert_eq!(format_run(&parse_run_str(shuffled).unwrap()), text);
    }

    #[test]
    fn close_scores_survive_writing() {
        let mut run = Run::new("r");
        let s = 1.0 / 61.0 + 1.0 / 62.0;
        run.insert_scored(
            1,
            vec![Scored::new("a", "a", s), Scored::new("b", "b", s - 1e-9)],
            MAX_RESULTS,
        );
        let back = parse_run_str(&format_run(&run)).unwrap();
        assert_eq!(back.entries(1), run.entries(1));
        assert!(back.validate().is_empty());
    }

    #[test]
    fn malformed_and_gaps() {
        assert!(matches!(parse_run_str("1 Q0 a 1 x r\n"), Err(EvalError::MalformedLine { line: 1, .. })));
        assert!(matches!(parse_run_str("\n1 Q0 a 1\n"), Err(EvalError::MalformedLine { line: 2, .. })));
        assert!(matches!(
            parse_run_str("1 Q0 a 1 2 r\n1 Q0 a 2 1 r\n"),
            Err(EvalError::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_run_str("1 Q0 a 1 2 r\n1 Q0 b 3 1 r\n"),
            Err(EvalError::RankGap { topic: 1, expected: 2, found: 3 })
        ));
    }

    #[test]
    fn over_cap_is_read_but_flagged() {
        let text: String = (1..=1001).map(|r| format!("7 Q0 d{r} {r} {} t\n", 2000 - r)).collect();
        let run = parse_run_str(&text).unwrap();
        assert_eq!(run.entries(7).len(), 1001);
        assert!(run
            .validate()
            .contains(&RunIssue::CapExceeded { topic: 7, count: MAX_RESULTS + 1 }));
    }

    #[test]
    fn qrels_parsing() {
        let q = parse_qrels_str("1 0 d1 2\n1 0 d2 0\n2 1 d1 1\n").unwrap();
        assert_eq!(q.get(1, "d1"), Some(2));
        assert_eq!(q.get(2, "d1"), Some(1));
        assert_eq!(q.len(), 3);
        assert_eq!(q.num_relevant(1), 1);
        assert_eq!(format_qrels(&q), "1 0 d1 2\n1 0 d2 0\n2 0 d1 1\n");
        assert!(matches!(
            parse_qrels_str("1 0 d1 3\n"),
            Err(EvalError::InvalidGrade { line: 1, .. })
        ));
        assert!(matches!(
            parse_qrels_str("1 0 d1 -1\n"),
            Err(EvalError::InvalidGrade { .. })
        ));
        assert!(matches!(
            parse_qrels_str("1 0 d1 1\n1 0 d1 2\n"),
            Err(EvalError::DuplicateJudgment { topic: 1, .. })
        ));
        assert!(matches!(parse_qrels_str("1 0 d1\n"), Err(EvalError::MalformedLine { line: 1, .. })));
    }
}
