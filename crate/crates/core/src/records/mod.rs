//! Structured-record baseline: normalized key-value form fields, a
//! conjunctive constraint query engine with binary confidences, and
//! answer extraction from matching records.

mod normalize;
mod query;
pub(crate) mod schema;

pub use normalize::{normalize_record, parse_date, title_case, FieldStatus, FieldValue, RawField, RawRecord, RecordDoc};
pub use query::{
    AnswerField, AnswerFormat, Constraint, ConstraintOp, QueryEngine, StructuredQuery, MissingFieldPolicy,
};
pub use schema::{FieldKind, FieldSpec, Schema, SNAP_THRESHOLD};
