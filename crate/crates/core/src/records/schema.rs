use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum case-folded NLS for snapping a value onto a closed vocabulary.
pub const SNAP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Text,
    Date,
    Checkbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Closed value list; empty for free-text fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub fields: Vec<FieldSpec>,
}

pub(crate) const CANDIDATE_NAME: &str = "candidate name";
pub(crate) const PARTY: &str = "party";
pub(crate) const OFFICE: &str = "office";
pub(crate) const CANDIDATE_CITY: &str = "candidate city";
pub(crate) const CANDIDATE_COUNTY: &str = "candidate county";
pub(crate) const ELECTION_DATE: &str = "election date";
pub(crate) const REPORTING_OPTION: &str = "reporting option";
pub(crate) const TREASURER_NAME: &str = "treasurer name";

pub(crate) const PARTIES: [&str; 10] = [
    "Democrat",
    "Republican",
    "Libertarian",
    "Independent",
    "Green",
    "Constitution",
    "Socialist Workers",
    "Progressive",
    "Reform",
    "Non Partisan",
];

pub(crate) const REPORTING_OPTIONS: [&str; 2] = ["Mini", "Full"];

impl Schema {
    /// Candidate-registration form fields.
    pub fn candidate_registration() -> Self {
        let text = |name: &str| FieldSpec {
            name: name.into(),
            kind: FieldKind::Text,
            vocabulary: Vec::new(),
        };
        Schema {
            fields: vec![
                text(CANDIDATE_NAME),
                FieldSpec {
                    name: PARTY.into(),
                    kind: FieldKind::Text,
                    vocabulary: PARTIES.iter().map(|s| s.to_string()).collect(),
                },
                text(OFFICE),
                text(CANDIDATE_CITY),
                text(CANDIDATE_COUNTY),
                FieldSpec {
                    name: ELECTION_DATE.into(),
                    kind: FieldKind::Date,
                    vocabulary: Vec::new(),
                },
                FieldSpec {
                    name: REPORTING_OPTION.into(),
                    kind: FieldKind::Checkbox,
                    vocabulary: REPORTING_OPTIONS.iter().map(|s| s.to_string()).collect(),
                },
                text(TREASURER_NAME),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&FieldSpec> {
        self.get(name)
            .ok_or_else(|| Error::validation(format!("unknown field {name:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for f in &self.fields {
            if f.name.trim().is_empty() {
                return Err(Error::validation("schema field with empty name"));
            }
            if !names.insert(f.name.as_str()) {
                return Err(Error::validation(format!("duplicate schema field {:?}", f.name)));
            }
            if f.kind == FieldKind::Date && !f.vocabulary.is_empty() {
                return Err(Error::validation(format!("date field {:?} cannot have a vocabulary", f.name)));
            }
            let mut seen = HashSet::new();
            for v in &f.vocabulary {
                if !seen.insert(v.to_lowercase()) {
                    return Err(Error::validation(format!(
                        "vocabulary of {:?} repeats {v:?}",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for Schema {
    fn default() -> Self {
        Schema::candidate_registration()
    }
}
