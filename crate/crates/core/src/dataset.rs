//! Interchange files: documents, records, schema, questions, ground
//! truth, submissions and reports. All files are UTF-8 JSON written with
//! stable key order, so a load/save cycle of a canonical file is
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{AnswerList, MetricReport, RankedDoc};
use crate::records::{normalize_record, QueryEngine, RawRecord, RecordDoc, Schema, StructuredQuery};
use crate::textspot::{DocumentOcr, KeywordSet};

pub const DOCUMENTS_FILE: &str = "documents.json";
pub const RECORDS_FILE: &str = "records.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const QUESTIONS_FILE: &str = "questions.json";
pub const GT_FILE: &str = "gt.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub text: String,
    pub query: StructuredQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub question_id: String,
    pub answers: AnswerList,
    /// Evidence documents; never empty.
    pub relevant: BTreeSet<String>,
}

/// One question's answers plus the evidence ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub question_id: String,
    pub answers: AnswerList,
    pub ranking: Vec<RankedDoc<f64>>,
}

/// A loaded and validated document collection.
#[derive(Debug, Clone, Default)]
pub struct Collection {
    pub schema: Schema,
    pub documents: Vec<DocumentOcr>,
    pub raw_records: Vec<RawRecord>,
    pub records: Vec<RecordDoc>,
    /// Non-fatal findings (flagged field values, id mismatches).
    pub warnings: Vec<String>,
}

impl Collection {
    /// Validates and normalizes in-memory inputs.
    pub fn from_parts(schema: Schema, documents: Vec<DocumentOcr>, raw_records: Vec<RawRecord>) -> Result<Self> {
        schema.validate()?;
        let mut seen = HashSet::new();
        for d in &documents {
            d.validate()?;
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::validation(format!("duplicate doc_id {} in documents", d.doc_id)));
            }
        }
        let mut warnings = Vec::new();
        let mut records = Vec::with_capacity(raw_records.len());
        let mut seen = HashSet::new();
        for raw in &raw_records {
            if !seen.insert(raw.doc_id.as_str()) {
                return Err(Error::validation(format!("duplicate doc_id {} in records", raw.doc_id)));
            }
            let (rec, w) = normalize_record(raw, &schema)?;
            warnings.extend(w);
            records.push(rec);
        }
        if !documents.is_empty() && !records.is_empty() {
            let doc_ids: BTreeSet<&str> = documents.iter().map(|d| d.doc_id.as_str()).collect();
            let rec_ids: BTreeSet<&str> = records.iter().map(|r| r.doc_id.as_str()).collect();
            for id in doc_ids.symmetric_difference(&rec_ids) {
                warnings.push(format!("doc_id {id} is present in only one of documents and records"));
            }
        }
        Ok(Collection {
            schema,
            documents,
            raw_records,
            records,
            warnings,
        })
    }

    /// Every doc_id known to the collection, sorted.
    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.documents
            .iter()
            .map(|d| d.doc_id.as_str())
            .chain(self.records.iter().map(|r| r.doc_id.as_str()))
            .collect()
    }

    pub fn document(&self, id: &str) -> Option<&DocumentOcr> {
        self.documents.iter().find(|d| d.doc_id == id)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        file: path.to_path_buf(),
        path: match e.path().to_string() {
            p if p == "." => "(root)".to_string(),
            p => p,
        },
        reason: e.into_inner().to_string(),
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, to_canonical_json(value)?).map_err(|e| Error::io(path, e))
}

fn optional<T: DeserializeOwned>(path: PathBuf) -> Result<Option<T>> {
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Loads `documents.json`, `records.json` and `schema.json` from a
/// directory. Either data file may be absent, but not both; the bundled
/// candidate-registration schema is used when no schema file exists.
pub fn load_collection(dir: &Path) -> Result<Collection> {
    if !dir.is_dir() {
        return Err(Error::validation(format!("{} is not a directory", dir.display())));
    }
    let schema = optional(dir.join(SCHEMA_FILE))?.unwrap_or_default();
    let documents: Option<Vec<DocumentOcr>> = optional(dir.join(DOCUMENTS_FILE))?;
    let records: Option<Vec<RawRecord>> = optional(dir.join(RECORDS_FILE))?;
    if documents.is_none() && records.is_none() {
        return Err(Error::validation(format!(
            "{} contains neither {DOCUMENTS_FILE} nor {RECORDS_FILE}",
            dir.display()
        )));
    }
    Collection::from_parts(schema, documents.unwrap_or_default(), records.unwrap_or_default())
}

pub fn validate_questions(questions: &[Question], schema: &Schema) -> Result<()> {
    let engine = QueryEngine::new(schema);
    let mut seen = HashSet::new();
    for q in questions {
        if q.question_id.trim().is_empty() {
            return Err(Error::validation("question with empty question_id"));
        }
        if !seen.insert(q.question_id.as_str()) {
            return Err(Error::validation(format!("duplicate question_id {}", q.question_id)));
        }
        if q.text.trim().is_empty() {
            return Err(Error::validation(format!("question {} has empty text", q.question_id)));
        }
        engine
            .validate_query(&q.query)
            .map_err(|e| Error::validation(format!("question {}: {e}", q.question_id)))?;
    }
    Ok(())
}

pub fn load_questions(path: &Path, schema: &Schema) -> Result<Vec<Question>> {
    let questions: Vec<Question> = read_json(path)?;
    validate_questions(&questions, schema)?;
    Ok(questions)
}

/// Checks ground-truth invariants and, when a collection is given, that
/// every evidence id exists in it.
pub fn validate_gt(gt: &[GroundTruthEntry], collection: Option<&Collection>) -> Result<()> {
    let known = collection.map(Collection::doc_ids);
    let mut seen = HashSet::new();
    for g in gt {
        if !seen.insert(g.question_id.as_str()) {
            return Err(Error::validation(format!("duplicate question_id {} in ground truth", g.question_id)));
        }
        if g.relevant.is_empty() {
            return Err(Error::validation(format!("question {} has no relevant documents", g.question_id)));
        }
        if let Some(known) = &known {
            let dangling: Vec<&str> = g
                .relevant
                .iter()
                .map(String::as_str)
                .filter(|id| !known.contains(id))
                .collect();
            if !dangling.is_empty() {
                return Err(Error::validation(format!(
                    "question {} references unknown doc_id(s) {}",
                    g.question_id,
                    dangling.join(", ")
                )));
            }
        }
    }
    Ok(())
}

pub fn load_gt(path: &Path, collection: Option<&Collection>) -> Result<Vec<GroundTruthEntry>> {
    let gt: Vec<GroundTruthEntry> = read_json(path)?;
    validate_gt(&gt, collection)?;
    Ok(gt)
}

pub fn load_submissions(path: &Path) -> Result<Vec<Submission>> {
    read_json(path)
}

/// Per-question keyword lists, `{question_id: [keyword, ...]}`.
pub fn load_keyword_overrides(path: &Path) -> Result<BTreeMap<String, KeywordSet>> {
    read_json(path)
}

pub fn load_report(path: &Path) -> Result<MetricReport> {
    read_json(path)
}

/// Writes the collection's source files (schema, documents, raw records).
pub fn save_collection(dir: &Path, collection: &Collection) -> Result<()> {
    write_json(&dir.join(SCHEMA_FILE), &collection.schema)?;
    if !collection.documents.is_empty() {
        write_json(&dir.join(DOCUMENTS_FILE), &collection.documents)?;
    }
    if !collection.raw_records.is_empty() {
        write_json(&dir.join(RECORDS_FILE), &collection.raw_records)?;
    }
    Ok(())
}
