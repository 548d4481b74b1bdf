use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::QueryError;
use crate::index::simple_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Concept {
    pub label: String,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub synonyms: Vec<String>,
}

#[derive(Deserialize)]
struct ConceptLine {
    label: String,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default)]
    children: Vec<String>,
    #[serde(default)]
    synonyms: Vec<String>,
}

/// A disease hierarchy. Parent/child links are made symmetric at load:
/// listing B as a parent of A also makes A a child of B.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    concepts: Vec<Concept>,
    by_label: HashMap<String, usize>,
    // normalised label or synonym -> concept
    surfaces: HashMap<String, usize>,
    max_len: usize,
    dropped_references: usize,
}

fn key(s: &str) -> String {
    simple_tokens(s).join(" ")
}

impl Ontology {
    /// Builds from concepts in order. References to labels that are not
    /// concepts themselves are dropped and counted.
    pub fn from_concepts(concepts: Vec<Concept>) -> Self {
        let mut by_label = HashMap::new();
        let mut kept = Vec::new();
        for c in concepts {
            if c.label.trim().is_empty() || by_label.contains_key(&c.label) {
                continue;
            }
            by_label.insert(c.label.clone(), kept.len());
            kept.push(c);
        }
        let mut dropped = 0;
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
        let push = |v: &mut Vec<usize>, x: usize| {
            if !v.contains(&x) {
                v.push(x);
            }
        };
        for (i, c) in kept.iter().enumerate() {
            for p in &c.parents {
                match by_label.get(p) {
                    Some(&j) if j != i => {
                        push(&mut parents[i], j);
                        push(&mut children[j], i);
                    }
                    _ => dropped += 1,
                }
            }
            for ch in &c.children {
                match by_label.get(ch) {
                    Some(&j) if j != i => {
                        push(&mut children[i], j);
                        push(&mut parents[j], i);
                    }
                    _ => dropped += 1,
                }
            }
        }
        let labels: Vec<String> = kept.iter().map(|c| c.label.clone()).collect();
        for (i, c) in kept.iter_mut().enumerate() {
            c.parents = parents[i].iter().map(|&j| labels[j].clone()).collect();
            c.children = children[i].iter().map(|&j| labels[j].clone()).collect();
        }
        let mut surfaces = HashMap::new();
        let mut max_len = 0;
        for (i, c) in kept.iter().enumerate() {
            for s in std::iter::once(&c.label).chain(&c.synonyms) {
                let k = key(s);
                if k.is_empty() {
                    continue;
                }
                max_len = max_len.max(k.split(' ').count());
                surfaces.entry(k).or_insert(i);
            }
        }
        Self {
            concepts: kept,
            by_label,
            surfaces,
            max_len,
            dropped_references: dropped,
        }
    }

    /// Reads JSONL, one `{"label", "parents", "children", "synonyms"}`
    /// object per line.
    pub fn load(path: &Path) -> Result<Self, QueryError> {
        let text = fs::read_to_string(path).map_err(|e| QueryError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let mut concepts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let c: ConceptLine = serde_json::from_str(line).map_err(|e| QueryError::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            concepts.push(Concept {
                label: c.label,
                parents: c.parents,
                children: c.children,
                synonyms: c.synonyms,
            });
        }
        Ok(Self::from_concepts(concepts))
    }

    pub fn concept(&self, label: &str) -> Option<&Concept> {
        self.by_label.get(label).map(|&i| &self.concepts[i])
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Number of parent/child references dropped at load because they
    /// named no concept.
    pub fn dropped_references(&self) -> usize {
        self.dropped_references
    }
}

/// Parent and child labels of every concept mentioned in `query`. Concept
/// mentions are found by greedy longest match on labels and synonyms.
/// Only direct neighbours are returned, never grandparents. Labels that
/// normalise to a query token or a matched mention are left out.
pub fn expand_with_ontology(query: &str, ontology: &Ontology) -> Vec<String> {
    let tokens = simple_tokens(query);
    let mut originals: HashSet<String> = tokens.iter().cloned().collect();
    originals.insert(tokens.join(" "));
    let mut matched = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = ontology.max_len.min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|len| {
            let k = tokens[i..i + len].join(" ");
            ontology.surfaces.get(&k).map(|&c| (len, k, c))
        });
        match hit {
            Some((len, k, c)) => {
                originals.insert(k);
                matched.push(c);
                i += len;
            }
            None => i += 1,
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in matched {
        let concept = &ontology.concepts[c];
        for alt in concept.parents.iter().chain(&concept.children) {
            let k = key(alt);
            if originals.contains(&k) || !seen.insert(k) {
                continue;
            }
            out.push(alt.clone());
        }
    }
    out
}
