//! Topics, dictionary-based entity tagging, ontology expansion, and the
//! two ways queries are built from a topic: one origin-weighted term bag,
//! or four plain-text variations.

mod lexicon;
mod ontology;
mod topics;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::index::simple_tokens;

pub use lexicon::{extract_entities, Entity, EntityLexicon};
pub use ontology::{expand_with_ontology, Concept, Ontology};
pub use topics::{parse_topics, parse_topics_str};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed topics XML: {0}")]
    MalformedXml(String),
    #[error("topic {topic}: missing or empty <{field}>")]
    MissingField { topic: u32, field: &'static str },
    #[error("duplicate topic number {0}")]
    DuplicateTopic(u32),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

impl QueryError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Topic {
    pub number: u32,
    pub query: String,
    pub question: String,
    pub narrative: String,
}

/// Where an expanded query term came from. The origin alone fixes the
/// term's weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TermOrigin {
    Original,
    OntologyAlternative,
    EntityLabel,
    EntityType,
}

impl TermOrigin {
    pub fn weight(self) -> f64 {
        match self {
            Self::Original => 1.0,
            Self::OntologyAlternative => 0.7,
            Self::EntityLabel => 0.4,
            Self::EntityType => 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedTerm {
    /// Lowercased, whitespace-joined alphanumeric tokens.
    pub text: String,
    pub origin: TermOrigin,
}

impl WeightedTerm {
    pub fn weight(&self) -> f64 {
        self.origin.weight()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct WeightedQuery {
    pub terms: Vec<WeightedTerm>,
}

impl WeightedQuery {
    /// Adds a term, or upgrades an existing one if `origin` carries a
    /// higher weight.
    fn push(&mut self, text: &str, origin: TermOrigin, positions: &mut HashMap<String, usize>) {
        let text = simple_tokens(text).join(" ");
        if text.is_empty() {
            return;
        }
        match positions.get(&text) {
            Some(&i) => {
                if origin.weight() > self.terms[i].weight() {
                    self.terms[i].origin = origin;
                }
            }
            None => {
                positions.insert(text.clone(), self.terms.len());
                self.terms.push(WeightedTerm { text, origin });
            }
        }
    }

    pub fn get(&self, text: &str) -> Option<&WeightedTerm> {
        self.terms.iter().find(|t| t.text == text)
    }

    /// Indri-style rendering, `#weight( 1.0 coronavirus 0.7 #1(coronavirus infection) )`.
    pub fn to_indri(&self) -> String {
        let mut s = String::from("#weight(");
        for t in &self.terms {
            if t.text.contains(' ') {
                s.push_str(&format!(" {:.1} #1({})", t.weight(), t.text));
            } else {
                s.push_str(&format!(" {:.1} {}", t.weight(), t.text));
            }
        }
        s.push_str(" )");
        s
    }
}

/// Query tokens at 1.0, ontology neighbours of the query at 0.7, entity
/// labels found in query and question at 0.4, and their types at 0.1. A
/// term reachable through several origins keeps the highest weight.
pub fn build_weighted_query(topic: &Topic, ontology: &Ontology, lexicon: &EntityLexicon) -> WeightedQuery {
    let mut wq = WeightedQuery::default();
    let mut pos = HashMap::new();
    for tok in simple_tokens(&topic.query) {
        wq.push(&tok, TermOrigin::Original, &mut pos);
    }
    for alt in expand_with_ontology(&topic.query, ontology) {
        wq.push(&alt, TermOrigin::OntologyAlternative, &mut pos);
    }
    let entities = extract_entities(&format!("{} {}", topic.query, topic.question), lexicon);
    for e in &entities {
        wq.push(&e.label, TermOrigin::EntityLabel, &mut pos);
    }
    for e in &entities {
        wq.push(&e.entity_type, TermOrigin::EntityType, &mut pos);
    }
    wq
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VariationId {
    V1,
    V2,
    V3,
    V4,
}

impl VariationId {
    pub const ALL: [VariationId; 4] = [Self::V1, Self::V2, Self::V3, Self::V4];
}

impl fmt::Display for VariationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryVariation {
    pub id: VariationId,
    pub text: String,
}

fn named_entities(text: &str, lexicon: &EntityLexicon) -> String {
    extract_entities(text, lexicon)
        .into_iter()
        .map(|e| e.label)
        .collect::<Vec<_>>()
        .join(" ")
}

fn concat(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

/// The four variations:
///
/// | id | text |
/// |----|------|
/// | V1 | query, NE(question) |
/// | V2 | query, NE(question), NE(narrative) |
/// | V3 | question, NE(query) |
/// | V4 | question, NE(query), NE(narrative) |
///
/// where NE(x) is the space-joined labels of the entities found in x.
pub fn generate_variations(topic: &Topic, lexicon: &EntityLexicon) -> [QueryVariation; 4] {
    let ne_query = named_entities(&topic.query, lexicon);
    let ne_question = named_entities(&topic.question, lexicon);
    let ne_narrative = named_entities(&topic.narrative, lexicon);
    let q = topic.query.as_str();
    let w = topic.question.as_str();
    [
        (VariationId::V1, concat(&[q, &ne_question])),
        (VariationId::V2, concat(&[q, &ne_question, &ne_narrative])),
        (VariationId::V3, concat(&[w, &ne_query])),
        (VariationId::V4, concat(&[w, &ne_query, &ne_narrative])),
    ]
    .map(|(id, text)| QueryVariation { id, text })
}
