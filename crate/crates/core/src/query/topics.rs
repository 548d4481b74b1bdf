use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{QueryError, Topic};

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses a TREC topics file:
///
/// ```xml
/// <topics>
///   <topic number="1">
///     <query>coronavirus origin</query>
///     <question>what is the origin of COVID-19</question>
///     <narrative>seeking range of information ...</narrative>
///   </topic>
/// </topics>
/// ```
///
/// A bare `<topic>` root is accepted too.
pub fn parse_topics(path: &Path) -> Result<Vec<Topic>, QueryError> {
    let text = fs::read_to_string(path).map_err(|e| QueryError::io(path, e))?;
    parse_topics_str(&text)
}

pub fn parse_topics_str(xml: &str) -> Result<Vec<Topic>, QueryError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| QueryError::MalformedXml(e.to_string()))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("topic")) {
        let number: u32 = node
            .attribute("number")
            .ok_or_else(|| QueryError::MalformedXml("topic without a number attribute".into()))?
            .trim()
            .parse()
            .map_err(|_| QueryError::MalformedXml("topic number is not a positive integer".into()))?;
        if number == 0 {
            return Err(QueryError::MalformedXml("topic number must be positive".into()));
        }
        let field = |name: &'static str| -> Result<String, QueryError> {
            let child = node
                .children()
                .find(|c| c.has_tag_name(name))
                .ok_or(QueryError::MissingField { topic: number, field: name })?;
            let text: String = child
                .descendants()
                .filter(|d| d.is_text())
                .filter_map(|d| d.text())
                .collect();
            Ok(normalize_ws(&text))
        };
        let query = field("query")?;
        if query.is_empty() {
            return Err(QueryError::MissingField { topic: number, field: "query" });
        }
        let topic = Topic {
            number,
            query,
            question: field("question")?,
            narrative: field("narrative")?,
        };
        if !seen.insert(number) {
            return Err(QueryError::DuplicateTopic(number));
        }
        out.push(topic);
    }
    Ok(out)
}
