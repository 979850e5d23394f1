use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::{parse_date, FieldValue, RecordDoc};
use super::schema::{FieldKind, Schema};
use crate::error::{Error, Result};
use crate::metrics::{sort_ranking, AnswerList, RankedDoc};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintOp {
    Eq,
    Neq,
    In,
    NotIn,
    DateBefore,
    DateAfter,
    DateBetween,
    DateYearEq,
    CheckedEq,
}

impl ConstraintOp {
    pub const ALL: [ConstraintOp; 9] = [
        ConstraintOp::Eq,
        ConstraintOp::Neq,
        ConstraintOp::In,
        ConstraintOp::NotIn,
        ConstraintOp::DateBefore,
        ConstraintOp::DateAfter,
        ConstraintOp::DateBetween,
        ConstraintOp::DateYearEq,
        ConstraintOp::CheckedEq,
    ];

    /// Negative ops are satisfied by absent values.
    pub fn is_negative(self) -> bool {
        matches!(self, ConstraintOp::Neq | ConstraintOp::NotIn)
    }
}

fn both_inclusive() -> [bool; 2] {
    [true, true]
}

fn is_both_inclusive(b: &[bool; 2]) -> bool {
    *b == [true, true]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub field: String,
    pub op: ConstraintOp,
    pub values: Vec<String>,
    /// Lower/upper bound inclusivity for `date_between`.
    #[serde(default = "both_inclusive", skip_serializing_if = "is_both_inclusive")]
    pub inclusive: [bool; 2],
}

impl Constraint {
    pub fn new<S: Into<String>>(field: impl Into<String>, op: ConstraintOp, values: impl IntoIterator<Item = S>) -> Self {
        Constraint {
            field: field.into(),
            op,
            values: values.into_iter().map(Into::into).collect(),
            inclusive: both_inclusive(),
        }
    }
}

/// What a query asks for: the values of one field, or a yes/no verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum AnswerField {
    Field(String),
    YesNo,
}

impl From<String> for AnswerField {
    fn from(s: String) -> Self {
        if s == "yes_no" {
            AnswerField::YesNo
        } else {
            AnswerField::Field(s)
        }
    }
}

impl From<AnswerField> for String {
    fn from(a: AnswerField) -> Self {
        match a {
            AnswerField::Field(s) => s,
            AnswerField::YesNo => "yes_no".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerFormat {
    /// Date answers as the four-digit year.
    Year,
    /// Date answers as `YYYY-MM-DD`.
    Iso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredQuery {
    /// Retrieval constraints, all of which must hold. Empty matches all.
    pub constraints: Vec<Constraint>,
    pub answer_field: AnswerField,
    /// For yes/no queries: the condition checked on the retrieved records.
    /// Without one, the answer is "Yes" whenever anything is retrieved.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicate: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_format: Option<AnswerFormat>,
}

/// How negative constraints treat a missing or invalid field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingFieldPolicy {
    /// Absent values satisfy `neq` / `not_in`.
    #[default]
    Lenient,
    /// Every constraint fails on an absent value.
    Strict,
}

enum Compiled<'q> {
    Text(&'q ConstraintOp, Vec<String>),
    Date(&'q ConstraintOp, Vec<NaiveDate>),
    Between(NaiveDate, NaiveDate, [bool; 2]),
    Year(i32),
    Checked(bool),
}

struct CompiledConstraint<'q> {
    field: &'q str,
    op: ConstraintOp,
    test: Compiled<'q>,
}

fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_lowercase().as_str() {
        "true" | "yes" | "checked" | "1" => Some(true),
        "false" | "no" | "unchecked" | "0" => Some(false),
        _ => None,
    }
}

/// Evaluates structured queries over normalized records.
#[derive(Debug, Clone)]
pub struct QueryEngine<'s> {
    schema: &'s Schema,
    pub missing: MissingFieldPolicy,
    /// Reproduce the baseline that can only ever answer "Yes".
    pub paper_literal: bool,
}

impl<'s> QueryEngine<'s> {
    pub fn new(schema: &'s Schema) -> Self {
        QueryEngine {
            schema,
            missing: MissingFieldPolicy::Lenient,
            paper_literal: false,
        }
    }

    pub fn schema(&self) -> &Schema {
        self.schema
    }

    fn compile<'q>(&self, c: &'q Constraint) -> Result<CompiledConstraint<'q>> {
        let spec = self.schema.require(&c.field)?;
        let bad = |why: &str| Error::validation(format!("constraint {:?} on {:?}: {why}", c.op, c.field));
        let dates = || -> Result<Vec<NaiveDate>> {
            c.values
                .iter()
                .map(|v| parse_date(v).ok_or_else(|| bad(&format!("unparseable date {v:?}"))))
                .collect()
        };
        let arity_one = || if c.values.len() == 1 { Ok(()) } else { Err(bad("expects exactly one value")) };
        use ConstraintOp::*;
        let test = match c.op {
            Eq | Neq | In | NotIn => {
                if matches!(c.op, Eq | Neq) {
                    arity_one()?;
                } else if c.values.is_empty() {
                    return Err(bad("expects at least one value"));
                }
                match spec.kind {
                    FieldKind::Date => Compiled::Date(&c.op, dates()?),
                    FieldKind::Text | FieldKind::Checkbox => {
                        Compiled::Text(&c.op, c.values.iter().map(|v| fold(v)).collect())
                    }
                }
            }
            DateBefore | DateAfter | DateBetween | DateYearEq => {
                if spec.kind != FieldKind::Date {
                    return Err(bad("date operator on a non-date field"));
                }
                match c.op {
                    DateBetween => {
                        let d = dates()?;
                        if d.len() != 2 {
                            return Err(bad("expects two bounds"));
                        }
                        if d[0] > d[1] {
                            return Err(bad("lower bound after upper bound"));
                        }
                        Compiled::Between(d[0], d[1], c.inclusive)
                    }
                    DateYearEq => {
                        arity_one()?;
                        let y = c.values[0].trim().parse::<i32>().map_err(|_| bad("year is not an integer"))?;
                        Compiled::Year(y)
                    }
                    _ => {
                        arity_one()?;
                        Compiled::Date(&c.op, dates()?)
                    }
                }
            }
            CheckedEq => {
                if spec.kind != FieldKind::Checkbox {
                    return Err(bad("checkbox operator on a non-checkbox field"));
                }
                arity_one()?;
                Compiled::Checked(parse_bool(&c.values[0]).ok_or_else(|| bad("value is not a boolean"))?)
            }
        };
        Ok(CompiledConstraint {
            field: &c.field,
            op: c.op,
            test,
        })
    }

    fn holds(&self, record: &RecordDoc, c: &CompiledConstraint<'_>) -> bool {
        let value: Option<&FieldValue> = record.field(c.field).filter(|v| v.is_valid());
        let Some(value) = value else {
            return c.op.is_negative() && self.missing == MissingFieldPolicy::Lenient;
        };
        match &c.test {
            Compiled::Text(op, wanted) => {
                let have = fold(&value.normalized);
                let hit = wanted.contains(&have);
                if op.is_negative() { !hit } else { hit }
            }
            Compiled::Date(op, wanted) => {
                let Some(d) = value.date else { return op.is_negative() };
                match op {
                    ConstraintOp::DateBefore => d < wanted[0],
                    ConstraintOp::DateAfter => d > wanted[0],
                    ConstraintOp::Neq | ConstraintOp::NotIn => !wanted.contains(&d),
                    _ => wanted.contains(&d),
                }
            }
            Compiled::Between(lo, hi, [lo_inc, hi_inc]) => value.date.is_some_and(|d| {
                let above = if *lo_inc { d >= *lo } else { d > *lo };
                let below = if *hi_inc { d <= *hi } else { d < *hi };
                above && below
            }),
            Compiled::Year(y) => value.date.is_some_and(|d| d.year() == *y),
            Compiled::Checked(want) => value.checked == Some(*want),
        }
    }

    /// Checks a constraint against the schema (field, arity, kinds).
    pub fn validate_constraint(&self, c: &Constraint) -> Result<()> {
        self.compile(c).map(|_| ())
    }

    pub fn validate_query(&self, q: &StructuredQuery) -> Result<()> {
        for c in q.constraints.iter().chain(&q.predicate) {
            self.validate_constraint(c)?;
        }
        match &q.answer_field {
            AnswerField::Field(f) => {
                self.schema.require(f)?;
                if !q.predicate.is_empty() {
                    return Err(Error::validation("predicate is only meaningful for yes_no queries"));
                }
            }
            AnswerField::YesNo => {}
        }
        Ok(())
    }

    pub fn eval_constraint(&self, record: &RecordDoc, c: &Constraint) -> Result<bool> {
        let compiled = self.compile(c)?;
        Ok(self.holds(record, &compiled))
    }

    fn matches_all(&self, record: &RecordDoc, constraints: &[CompiledConstraint<'_>]) -> bool {
        constraints.iter().all(|c| self.holds(record, c))
    }

    /// Records satisfying every retrieval constraint.
    pub fn matching<'r>(&self, q: &StructuredQuery, records: &'r [RecordDoc]) -> Result<Vec<&'r RecordDoc>> {
        self.validate_query(q)?;
        let compiled = q.constraints.iter().map(|c| self.compile(c)).collect::<Result<Vec<_>>>()?;
        Ok(records
            .par_iter()
            .filter(|r| self.matches_all(r, &compiled))
            .collect())
    }

    /// Binary-confidence ranking of the whole collection.
    pub fn query_collection<T: Scalar>(&self, q: &StructuredQuery, records: &[RecordDoc]) -> Result<Vec<RankedDoc<T>>> {
        self.validate_query(q)?;
        let mut ids = BTreeSet::new();
        for r in records {
            if !ids.insert(r.doc_id.as_str()) {
                return Err(Error::validation(format!("duplicate doc_id {} in records", r.doc_id)));
            }
        }
        let compiled = q.constraints.iter().map(|c| self.compile(c)).collect::<Result<Vec<_>>>()?;
        let mut ranking: Vec<RankedDoc<T>> = records
            .par_iter()
            .map(|r| {
                let conf = if self.matches_all(r, &compiled) { T::one() } else { T::zero() };
                RankedDoc::new(r.doc_id.clone(), conf)
            })
            .collect();
        sort_ranking(&mut ranking);
        Ok(ranking)
    }

    fn render(&self, q: &StructuredQuery, v: &FieldValue) -> String {
        match (v.kind, v.date, q.answer_format) {
            (FieldKind::Date, Some(d), Some(AnswerFormat::Year)) => d.year().to_string(),
            _ => v.normalized.clone(),
        }
    }

    /// Answers a query from the records judged relevant to it.
    ///
    /// Field answers are the distinct rendered values, sorted. Yes/no
    /// answers are "Yes" when a relevant record satisfies the predicate
    /// (or, without a predicate, when any record is relevant) and "No"
    /// otherwise; in paper-literal mode the engine answers "Yes" for any
    /// non-empty relevant set and nothing at all for an empty one.
    pub fn extract_answers(&self, q: &StructuredQuery, relevant: &[&RecordDoc]) -> Result<AnswerList> {
        match &q.answer_field {
            AnswerField::Field(name) => {
                self.schema.require(name)?;
                let mut values = BTreeSet::new();
                for r in relevant {
                    match r.field(name).filter(|v| v.is_valid()) {
                        Some(v) => {
                            values.insert(self.render(q, v));
                        }
                        None => log::debug!("record {} has no usable {name:?}", r.doc_id),
                    }
                }
                Ok(values.into_iter().collect())
            }
            AnswerField::YesNo => {
                if self.paper_literal {
                    return Ok(if relevant.is_empty() {
                        AnswerList::default()
                    } else {
                        AnswerList::new(["Yes"])
                    });
                }
                let predicate = q.predicate.iter().map(|c| self.compile(c)).collect::<Result<Vec<_>>>()?;
                let yes = relevant.iter().any(|r| self.matches_all(r, &predicate));
                Ok(AnswerList::new([if yes { "Yes" } else { "No" }]))
            }
        }
    }
}
