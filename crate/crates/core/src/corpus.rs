//! CORD-19 style corpus ingestion and construction of the documents that
//! go into each index variant.
//!
//! Metadata comes from `metadata.csv` (CORD-19 column names) or an
//! equivalent JSON-lines file. Full text lives in a JSON-lines sidecar,
//! one `{"doc_id": ..., "paragraphs": [...]}` object per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate doc id `{0}`")]
    DuplicateDocId(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetadataFormat {
    Csv,
    Jsonl,
}

impl MetadataFormat {
    /// Guesses from the file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Self::Jsonl,
            _ => Self::Csv,
        }
    }
}

/// One corpus article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    pub paragraphs: Vec<String>,
    pub publish_year: Option<u16>,
    pub source: String,
    /// Remaining metadata columns (doi, url, pmcid, authors, ...).
    pub extra: BTreeMap<String, String>,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            paragraphs: Vec::new(),
            publish_year: None,
            source: String::new(),
            extra: BTreeMap::new(),
        }
    }
}

const ID_COLUMNS: [&str; 2] = ["cord_uid", "doc_id"];
const SOURCE_COLUMNS: [&str; 2] = ["source_x", "source"];
const TITLE: &str = "title";
const ABSTRACT: &str = "abstract";
const PUBLISH_TIME: &str = "publish_time";

/// Leading 4-digit year token of a date string: `"2020-03-01"` gives 2020,
/// `"2019 Dec"` gives 2019, `""` gives `None`.
pub fn extract_year(date: &str) -> Option<u16> {
    let bytes = date.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 4 {
                return date[start..i].parse().ok();
            }
        } else {
            i += 1;
        }
    }
    None
}

fn record_from_fields(
    row: usize,
    mut fields: BTreeMap<String, String>,
) -> Result<DocumentRecord, CorpusError> {
    let mut take_first = |names: &[&str]| -> Option<String> {
        let mut found = None;
        for n in names {
            if let Some(v) = fields.remove(*n) {
                found.get_or_insert(v);
            }
        }
        found
    };
    let doc_id = take_first(&ID_COLUMNS).unwrap_or_default().trim().to_string();
    if doc_id.is_empty() {
        return Err(CorpusError::MalformedRow {
            row,
            reason: "empty doc id".into(),
        });
    }
    let source = take_first(&SOURCE_COLUMNS).unwrap_or_default();
    let title = take_first(&[TITLE]).unwrap_or_default();
    let abstract_text = take_first(&[ABSTRACT]).unwrap_or_default();
    let publish_year = take_first(&[PUBLISH_TIME]).and_then(|t| extract_year(&t));
    fields.retain(|_, v| !v.is_empty());
    Ok(DocumentRecord {
        doc_id,
        title,
        abstract_text,
        paragraphs: Vec::new(),
        publish_year,
        source,
        extra: fields,
    })
}

fn check_columns<'a>(mut has: impl FnMut(&str) -> bool) -> Result<(), CorpusError> {
    if !ID_COLUMNS.iter().any(|c| has(c)) {
        return Err(CorpusError::MissingColumn("cord_uid".into()));
    }
    for c in [TITLE, ABSTRACT] {
        if !has(c) {
            return Err(CorpusError::MissingColumn(c.into()));
        }
    }
    Ok(())
}

/// Parses a metadata file into records, one per row, in file order.
pub fn parse_metadata(path: &Path, format: MetadataFormat) -> Result<Vec<DocumentRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let records = match format {
        MetadataFormat::Csv => parse_csv(BufReader::new(file))?,
        MetadataFormat::Jsonl => parse_jsonl(BufReader::new(file))?,
    };
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDocId(r.doc_id.clone()));
        }
    }
    Ok(records)
}

fn parse_csv<R: io::Read>(reader: R) -> Result<Vec<DocumentRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    check_columns(|c| headers.iter().any(|h| h == c))?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // header is row 1
        let row_no = i + 2;
        let row = row.map_err(|e| CorpusError::MalformedRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        let fields = headers
            .iter()
            .zip(row.iter())
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        out.push(record_from_fields(row_no, fields)?);
    }
    Ok(out)
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<DocumentRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row_no = i + 1;
        let line = line.map_err(|e| CorpusError::MalformedRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
                row: row_no,
                reason: e.to_string(),
            })?;
        check_columns(|c| obj.contains_key(c))?;
        let fields = obj
            .into_iter()
            .map(|(k, v)| {
                let v = match v {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, v)
            })
            .collect();
        out.push(record_from_fields(row_no, fields)?);
    }
    Ok(out)
}

/// Writes records back in the given format. Parsing the output yields the
/// same records (with `publish_year` written as `publish_time`).
pub fn write_metadata(records: &[DocumentRecord], path: &Path, format: MetadataFormat) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = io::BufWriter::new(file);
    let extra_keys: Vec<&str> = records
        .iter()
        .flat_map(|r| r.extra.keys().map(String::as_str))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let fixed = |r: &DocumentRecord| {
        [
            ("cord_uid", r.doc_id.clone()),
            ("source_x", r.source.clone()),
            (TITLE, r.title.clone()),
            (ABSTRACT, r.abstract_text.clone()),
            (PUBLISH_TIME, r.publish_year.map(|y| y.to_string()).unwrap_or_default()),
        ]
    };
    match format {
        MetadataFormat::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            let mut header: Vec<&str> = vec!["cord_uid", "source_x", TITLE, ABSTRACT, PUBLISH_TIME];
            header.extend(&extra_keys);
            cw.write_record(&header).map_err(csv_io(path))?;
            for r in records {
                let mut row: Vec<String> = fixed(r).into_iter().map(|(_, v)| v).collect();
                row.extend(extra_keys.iter().map(|k| r.extra.get(*k).cloned().unwrap_or_default()));
                cw.write_record(&row).map_err(csv_io(path))?;
            }
            cw.flush().map_err(|e| CorpusError::io(path, e))?;
        }
        MetadataFormat::Jsonl => {
            for r in records {
                let mut obj = serde_json::Map::new();
                for (k, v) in fixed(r) {
                    obj.insert(k.to_string(), v.into());
                }
                for (k, v) in &r.extra {
                    obj.insert(k.clone(), v.clone().into());
                }
                serde_json::to_writer(&mut w, &obj).map_err(|e| CorpusError::io(path, e.into()))?;
                w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> CorpusError + '_ {
    move |e| CorpusError::io(path, io::Error::new(io::ErrorKind::Other, e))
}

#[derive(Deserialize)]
struct FullTextLine {
    doc_id: String,
    paragraphs: Vec<String>,
}

/// Attaches paragraphs from a full-text sidecar. Lines whose `doc_id` is not
/// among `records` are skipped; the number of attached documents is returned.
pub fn attach_fulltext(records: &mut [DocumentRecord], path: &Path) -> Result<usize, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let by_id: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.doc_id.clone(), i))
        .collect();
    let mut attached = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ft: FullTextLine = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            row: i + 1,
            reason: e.to_string(),
        })?;
        if let Some(&idx) = by_id.get(&ft.doc_id) {
            records[idx].paragraphs = ft.paragraphs;
            attached += 1;
        }
    }
    Ok(attached)
}

/// Records with an id lookup table.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<DocumentRecord>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(records: Vec<DocumentRecord>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.doc_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateDocId(r.doc_id.clone()));
            }
        }
        Ok(Self { records, by_id })
    }

    /// Loads metadata and, optionally, the full-text sidecar.
    pub fn load(metadata: &Path, fulltext: Option<&Path>) -> Result<Self, CorpusError> {
        let mut records = parse_metadata(metadata, MetadataFormat::from_path(metadata))?;
        if let Some(ft) = fulltext {
            attach_fulltext(&mut records, ft)?;
        }
        Self::new(records)
    }

    pub fn get(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.by_id.get(doc_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexVariant {
    TitleAbstract,
    FullText,
    Paragraph,
}

impl IndexVariant {
    pub const ALL: [IndexVariant; 3] = [Self::TitleAbstract, Self::FullText, Self::Paragraph];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TitleAbstract => "title_abstract",
            Self::FullText => "full_text",
            Self::Paragraph => "paragraph",
        }
    }
}

impl fmt::Display for IndexVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "title_abstract" => Ok(Self::TitleAbstract),
            "full_text" => Ok(Self::FullText),
            "paragraph" => Ok(Self::Paragraph),
            other => Err(format!("unknown index variant `{other}`")),
        }
    }
}

/// A unit of indexing. For the paragraph variant one record becomes several
/// of these, each identified by `<doc_id>.<paragraph>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexableDoc {
    pub surrogate_id: String,
    pub original_id: String,
    pub text: String,
    pub variant: IndexVariant,
    pub paragraph_index: Option<usize>,
}

pub fn paragraph_surrogate_id(original_id: &str, paragraph: usize) -> String {
    format!("{original_id}.{paragraph}")
}

/// Inverse of [`paragraph_surrogate_id`].
pub fn split_surrogate_id(surrogate_id: &str) -> Option<(&str, usize)> {
    let (orig, idx) = surrogate_id.rsplit_once('.')?;
    if orig.is_empty() || idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // reject non-canonical forms like "01"
    if idx.len() > 1 && idx.starts_with('0') {
        return None;
    }
    Some((orig, idx.parse().ok()?))
}

fn join_text<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for p in parts.into_iter().filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(p);
    }
    out
}

pub fn build_indexable_docs(records: &[DocumentRecord], variant: IndexVariant) -> Vec<IndexableDoc> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let head = [r.title.as_str(), r.abstract_text.as_str()];
        match variant {
            IndexVariant::TitleAbstract | IndexVariant::FullText => {
                let text = if variant == IndexVariant::TitleAbstract {
                    join_text(head)
                } else {
                    join_text(head.into_iter().chain(r.paragraphs.iter().map(String::as_str)))
                };
                out.push(IndexableDoc {
                    surrogate_id: r.doc_id.clone(),
                    original_id: r.doc_id.clone(),
                    text,
                    variant,
                    paragraph_index: None,
                });
            }
            IndexVariant::Paragraph => {
                if r.paragraphs.is_empty() {
                    out.push(IndexableDoc {
                        surrogate_id: paragraph_surrogate_id(&r.doc_id, 0),
                        original_id: r.doc_id.clone(),
                        text: join_text(head),
                        variant,
                        paragraph_index: Some(0),
                    });
                }
                for (i, p) in r.paragraphs.iter().enumerate() {
                    out.push(IndexableDoc {
                        surrogate_id: paragraph_surrogate_id(&r.doc_id, i),
                        original_id: r.doc_id.clone(),
                        text: join_text(head.into_iter().chain([p.as_str()])),
                        variant,
                        paragraph_index: Some(i),
                    });
                }
            }
        }
    }
    out
}
