use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::schema::{FieldKind, FieldSpec, Schema, SNAP_THRESHOLD};
use crate::error::{Error, Result};
use crate::similarity::nls;

/// A field as read from a records file, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawField {
    pub raw: String,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
}

impl RawField {
    pub fn text(raw: impl Into<String>) -> Self {
        RawField {
            raw: raw.into(),
            kind: FieldKind::Text,
            checked: None,
        }
    }

    pub fn date(raw: impl Into<String>) -> Self {
        RawField {
            raw: raw.into(),
            kind: FieldKind::Date,
            checked: None,
        }
    }

    pub fn checkbox(label: impl Into<String>, checked: bool) -> Self {
        RawField {
            raw: label.into(),
            kind: FieldKind::Checkbox,
            checked: Some(checked),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub doc_id: String,
    pub fields: BTreeMap<String, RawField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldStatus {
    Valid,
    /// Closed-vocabulary field whose value matched no entry closely
    /// enough; the cleaned raw text is kept.
    OffVocabulary,
    /// Empty value, unparseable date, or checkbox without a state.
    /// Excluded from positive constraints.
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub raw: String,
    pub normalized: String,
    pub kind: FieldKind,
    pub checked: Option<bool>,
    pub date: Option<NaiveDate>,
    pub status: FieldStatus,
}

impl FieldValue {
    pub fn is_valid(&self) -> bool {
        self.status != FieldStatus::Invalid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDoc {
    pub doc_id: String,
    pub fields: BTreeMap<String, FieldValue>,
}

impl RecordDoc {
    pub fn field(&self, name: &str) -> Option<&FieldValue> {
        self.fields.get(name)
    }

    /// Rebuilds a raw record from the normalized values.
    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            doc_id: self.doc_id.clone(),
            fields: self
                .fields
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        RawField {
                            raw: v.normalized.clone(),
                            kind: v.kind,
                            checked: v.checked,
                        },
                    )
                })
                .collect(),
        }
    }
}

const DATE_FORMATS: [&str; 4] = ["%m/%d/%Y", "%Y-%m-%d", "%B %d, %Y", "%b %d, %Y"];

/// Parses `MM/DD/YYYY`, `M/D/YYYY`, `YYYY-MM-DD` and `Month D, YYYY`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Uppercases the first character of every word and lowercases the rest.
pub fn title_case(s: &str) -> String {
    s.split_whitespace()
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Nearest vocabulary entry by case-folded NLS, first entry winning ties.
fn snap<'a>(value: &str, vocabulary: &'a [String]) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for entry in vocabulary {
        let s: f64 = nls(value, entry, true);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((entry, s));
        }
    }
    best.filter(|(_, s)| *s >= SNAP_THRESHOLD).map(|(e, _)| e)
}

fn normalize_field(spec: &FieldSpec, raw: &RawField) -> FieldValue {
    let cleaned = collapse_ws(&raw.raw);
    let mut value = FieldValue {
        raw: raw.raw.clone(),
        normalized: cleaned.clone(),
        kind: spec.kind,
        checked: None,
        date: None,
        status: FieldStatus::Valid,
    };
    if cleaned.is_empty() {
        value.status = FieldStatus::Invalid;
        return value;
    }
    match spec.kind {
        FieldKind::Date => match parse_date(&cleaned) {
            Some(d) => {
                value.normalized = d.format("%Y-%m-%d").to_string();
                value.date = Some(d);
            }
            None => value.status = FieldStatus::Invalid,
        },
        FieldKind::Text | FieldKind::Checkbox => {
            if spec.vocabulary.is_empty() {
                value.normalized = title_case(&cleaned);
            } else if let Some(entry) = snap(&cleaned, &spec.vocabulary) {
                value.normalized = entry.to_string();
            } else {
                value.normalized = title_case(&cleaned);
                value.status = FieldStatus::OffVocabulary;
            }
            if spec.kind == FieldKind::Checkbox {
                value.checked = raw.checked;
                if raw.checked.is_none() {
                    value.status = FieldStatus::Invalid;
                }
            }
        }
    }
    value
}

/// Normalizes one raw record against the schema.
///
/// Returns the record and a warning per field that was kept but flagged
/// (unparseable date, off-vocabulary value, missing checkbox state).
pub fn normalize_record(raw: &RawRecord, schema: &Schema) -> Result<(RecordDoc, Vec<String>)> {
    if raw.doc_id.trim().is_empty() {
        return Err(Error::validation("record with empty doc_id"));
    }
    let mut fields = BTreeMap::new();
    let mut warnings = Vec::new();
    for (name, field) in &raw.fields {
        let spec = schema.get(name).ok_or_else(|| {
            Error::validation(format!("record {}: unknown field {name:?}", raw.doc_id))
        })?;
        if spec.kind != field.kind {
            return Err(Error::validation(format!(
                "record {}: field {name:?} declared {:?} but schema says {:?}",
                raw.doc_id, field.kind, spec.kind
            )));
        }
        let value = normalize_field(spec, field);
        match value.status {
            FieldStatus::Valid => {}
            FieldStatus::OffVocabulary => warnings.push(format!(
                "record {}: {name:?} value {:?} not in vocabulary",
                raw.doc_id, field.raw
            )),
            FieldStatus::Invalid => warnings.push(format!(
                "record {}: {name:?} value {:?} is invalid",
                raw.doc_id, field.raw
            )),
        }
        fields.insert(name.clone(), value);
    }
    Ok((
        RecordDoc {
            doc_id: raw.doc_id.clone(),
            fields,
        },
        warnings,
    ))
}
