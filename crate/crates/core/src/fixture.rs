//! Seeded synthetic candidate-registration collections with known answers.
//!
//! Every document gets a raw key-value record and an OCR token layout that
//! prints each field label next to its value. Questions are instantiated
//! from templates anchored on a random document (so each has evidence),
//! and ground truth is obtained by filtering the normalized records.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_json, Collection, GroundTruthEntry, Question, DOCUMENTS_FILE, GT_FILE, QUESTIONS_FILE, RECORDS_FILE, SCHEMA_FILE};
use crate::error::{Error, Result};
use crate::records::schema::{
    CANDIDATE_CITY, CANDIDATE_COUNTY, CANDIDATE_NAME, ELECTION_DATE, OFFICE, PARTIES, PARTY, REPORTING_OPTION,
    REPORTING_OPTIONS, TREASURER_NAME,
};
use crate::records::{
    normalize_record, AnswerField, AnswerFormat, Constraint, ConstraintOp, FieldKind, FieldSpec, QueryEngine, RawField,
    RawRecord, RecordDoc, Schema, StructuredQuery,
};
use crate::textspot::{BBox, DocumentOcr, Token};

// Annotation counts of the real collection, used to scale name fields.
const REFERENCE_DOCS: f64 = 14362.0;
const REFERENCE_CANDIDATE_NAMES: f64 = 9309.0;
const REFERENCE_TREASURER_NAMES: f64 = 10197.0;
const REFERENCE_CITIES: f64 = 476.0;

const FIRST_NAMES: [&str; 40] = [
    "Anna", "Dean", "Gary", "Danielle", "Valerie", "Suzanne", "Stanley", "Douglas", "Maria", "James", "Linda",
    "Robert", "Karen", "Michael", "Susan", "David", "Nancy", "Thomas", "Laura", "Daniel", "Helen", "Mark",
    "Sandra", "Paul", "Donna", "Steven", "Carol", "Kevin", "Ruth", "Brian", "Sharon", "George", "Diane",
    "Edward", "Julie", "Ronald", "Joyce", "Kenneth", "Teresa", "Jason",
];

const LAST_NAMES: [&str; 40] = [
    "Rivers", "Takko", "Schoessler", "Westbrook", "Quill", "Skaar", "Rumbaugh", "Fair", "Hansen", "Olsen",
    "Larson", "Nguyen", "Peterson", "Carlson", "Morgan", "Bennett", "Foster", "Sullivan", "Brooks", "Hayes",
    "Warren", "Fleming", "Barker", "Holt", "Lindgren", "Dalton", "Mercer", "Whitaker", "Conley", "Baxter",
    "Sorensen", "Pruitt", "Kessler", "Ambrose", "Greer", "Hollis", "Vance", "Rowland", "Tate", "Yoder",
];

const OFFICES: [&str; 43] = [
    "State Representative", "State Senator", "County Commissioner", "Superior Court Judge",
    "District Court Judge", "City Council Member", "Mayor", "School Director", "Port Commissioner",
    "Fire Commissioner", "County Sheriff", "County Assessor", "County Auditor", "County Clerk",
    "County Treasurer", "County Coroner", "Prosecuting Attorney", "Public Utility Commissioner",
    "Hospital Commissioner", "Water Commissioner", "Sewer Commissioner", "Park Commissioner",
    "Cemetery Commissioner", "Library Trustee", "Governor", "Lieutenant Governor", "Secretary Of State",
    "State Treasurer", "State Auditor", "Attorney General", "Commissioner Of Public Lands",
    "Insurance Commissioner", "Superintendent Of Public Instruction", "Supreme Court Justice",
    "Court Of Appeals Judge", "Municipal Court Judge", "Transit Commissioner", "Airport Commissioner",
    "Irrigation Commissioner", "Flood Control Commissioner", "Town Council Member", "County Executive",
    "County Council Member",
];

const COUNTIES: [&str; 39] = [
    "Adams", "Asotin", "Benton", "Chelan", "Clallam", "Clark", "Columbia", "Cowlitz", "Douglas", "Ferry",
    "Franklin", "Garfield", "Grant", "Grays Harbor", "Island", "Jefferson", "King", "Kitsap", "Kittitas",
    "Klickitat", "Lewis", "Lincoln", "Mason", "Okanogan", "Pacific", "Pend Oreille", "Pierce", "San Juan",
    "Skagit", "Skamania", "Snohomish", "Spokane", "Stevens", "Thurston", "Wahkiakum", "Walla Walla",
    "Whatcom", "Whitman", "Yakima",
];

const CITIES: [&str; 40] = [
    "Seattle", "Spokane", "Tacoma", "Vancouver", "Bellevue", "Kent", "Everett", "Renton", "Yakima",
    "Federal Way", "Spokane Valley", "Bellingham", "Kennewick", "Auburn", "Pasco", "Marysville", "Lakewood",
    "Redmond", "Shoreline", "Richland", "Kirkland", "Burien", "Sammamish", "Olympia", "Lacey", "Edmonds",
    "Bremerton", "Puyallup", "Lynnwood", "Bothell", "Longview", "Issaquah", "Wenatchee", "Mount Vernon",
    "University Place", "Walla Walla", "Pullman", "Des Moines", "Lake Stevens", "North Bonneville",
];

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

/// Parameters of a synthetic collection. Fields not listed in
/// `field_cardinalities` / `missing_rates` take defaults derived from the
/// reference collection's annotation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_docs: usize,
    pub seed: u64,
    #[serde(default)]
    pub field_cardinalities: BTreeMap<String, usize>,
    #[serde(default)]
    pub missing_rates: BTreeMap<String, f64>,
}

impl FixtureSpec {
    pub fn new(n_docs: usize, seed: u64) -> Self {
        let scaled = |reference: f64| ((n_docs as f64) * reference / REFERENCE_DOCS).round().max(1.0) as usize;
        let field_cardinalities = [
            (CANDIDATE_NAME, scaled(REFERENCE_CANDIDATE_NAMES)),
            (PARTY, 10),
            (OFFICE, 43),
            (CANDIDATE_CITY, scaled(REFERENCE_CITIES).max(CITIES.len().min(n_docs.max(1)))),
            (CANDIDATE_COUNTY, 39),
            (ELECTION_DATE, 27),
            (REPORTING_OPTION, 2),
            (TREASURER_NAME, scaled(REFERENCE_TREASURER_NAMES)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let missing_rates = [
            (PARTY, 1.0 - 14161.0 / REFERENCE_DOCS),
            (CANDIDATE_CITY, 1.0 - 14361.0 / REFERENCE_DOCS),
            (CANDIDATE_COUNTY, 1.0 - 14343.0 / REFERENCE_DOCS),
            (REPORTING_OPTION, 1.0 - 14357.0 / REFERENCE_DOCS),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        FixtureSpec {
            n_docs,
            seed,
            field_cardinalities,
            missing_rates,
        }
    }

    fn cardinality(&self, field: &str) -> usize {
        self.field_cardinalities
            .get(field)
            .copied()
            .unwrap_or_else(|| FixtureSpec::new(self.n_docs, self.seed).field_cardinalities[field])
    }

    fn missing_rate(&self, field: &str) -> f64 {
        self.missing_rates.get(field).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 {
            return Err(Error::validation("fixture needs at least one document"));
        }
        let schema = Schema::candidate_registration();
        for (field, &card) in &self.field_cardinalities {
            schema.require(field)?;
            if card == 0 {
                return Err(Error::validation(format!("cardinality of {field:?} must be at least 1")));
            }
        }
        for (field, &rate) in &self.missing_rates {
            schema.require(field)?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::validation(format!("missing rate of {field:?} outside [0, 1]")));
            }
        }
        if self.cardinality(REPORTING_OPTION) > REPORTING_OPTIONS.len() {
            return Err(Error::validation("reporting option has at most two values"));
        }
        let name_space = FIRST_NAMES.len() * 26 * LAST_NAMES.len();
        for f in [CANDIDATE_NAME, TREASURER_NAME] {
            if self.cardinality(f) > name_space {
                return Err(Error::validation(format!("cardinality of {f:?} exceeds {name_space}")));
            }
        }
        Ok(())
    }
}

/// A generated collection with its questions and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub schema: Schema,
    pub documents: Vec<DocumentOcr>,
    pub raw_records: Vec<RawRecord>,
    pub questions: Vec<Question>,
    pub gt: Vec<GroundTruthEntry>,
}

impl Fixture {
    pub fn collection(&self) -> Result<Collection> {
        Collection::from_parts(self.schema.clone(), self.documents.clone(), self.raw_records.clone())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(SCHEMA_FILE), &self.schema)?;
        write_json(&dir.join(DOCUMENTS_FILE), &self.documents)?;
        write_json(&dir.join(RECORDS_FILE), &self.raw_records)?;
        write_json(&dir.join(QUESTIONS_FILE), &self.questions)?;
        write_json(&dir.join(GT_FILE), &self.gt)
    }
}

fn pool(base: &[&str], n: usize, suffix: impl Fn(&str, usize) -> String) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < base.len() {
                base[i].to_string()
            } else {
                suffix(base[i % base.len()], i / base.len() + 1)
            }
        })
        .collect()
}

fn first_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    let mut d = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    while d.weekday() != wd {
        d = d + Days::new(1);
    }
    d
}

/// General elections (Tuesday after the first Monday of November) and
/// August primaries, alternating from 2008 onwards.
fn election_dates(n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut year = 2008;
    while out.len() < n {
        out.push(first_weekday(year, 11, Weekday::Mon) + Days::new(1));
        if out.len() < n {
            out.push(first_weekday(year, 8, Weekday::Tue));
        }
        year += 1;
    }
    out.sort();
    out
}

fn name_pool(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let space = FIRST_NAMES.len() * 26 * LAST_NAMES.len();
    rand::seq::index::sample(rng, space, n)
        .into_iter()
        .map(|i| {
            let first = FIRST_NAMES[i % FIRST_NAMES.len()];
            let middle = (b'A' + ((i / FIRST_NAMES.len()) % 26) as u8) as char;
            let last = LAST_NAMES[i / (FIRST_NAMES.len() * 26)];
            format!("{first} {middle}. {last}")
        })
        .collect()
}

/// Value index per document, `None` when missing. Each of the first
/// `card` present documents (in shuffled order) gets a distinct value so
/// every value occurs at least once when enough documents are present.
fn assign(rng: &mut ChaCha8Rng, n_docs: usize, card: usize, missing_rate: f64) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = (0..n_docs)
        .map(|_| if rng.gen_bool(missing_rate) { None } else { Some(0) })
        .collect();
    let mut present: Vec<usize> = (0..n_docs).filter(|&i| out[i].is_some()).collect();
    present.shuffle(rng);
    for (k, doc) in present.into_iter().enumerate() {
        out[doc] = Some(if k < card { k } else { rng.gen_range(0..card) });
    }
    out
}

fn render_date(rng: &mut ChaCha8Rng, d: NaiveDate) -> String {
    match rng.gen_range(0..10) {
        0..=5 => d.format("%m/%d/%Y").to_string(),
        6 => format!("{}/{}/{}", d.month(), d.day(), d.year()),
        7 | 8 => format!("{} {}, {}", MONTHS[d.month0() as usize], d.day(), d.year()),
        _ => d.format("%Y-%m-%d").to_string(),
    }
}

fn us_date(d: NaiveDate) -> String {
    d.format("%m/%d/%Y").to_string()
}

fn label(field: &str) -> Vec<String> {
    let words: Vec<&str> = field.split(' ').collect();
    let last = words.len() - 1;
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut s = w.to_uppercase();
            if i == last {
                s.push(':');
            }
            s
        })
        .collect()
}

const LINE_HEIGHT: f64 = 20.0;
const LINE_PITCH: f64 = 40.0;
const CHAR_WIDTH: f64 = 10.0;
const PAGE: [f64; 2] = [850.0, 1100.0];

fn layout(doc_id: &str, record: &RawRecord, schema: &Schema) -> DocumentOcr {
    let mut lines: Vec<Vec<String>> = vec![vec!["CANDIDATE".into(), "REGISTRATION".into()]];
    for spec in &schema.fields {
        let Some(field) = record.fields.get(&spec.name) else { continue };
        let mut line = label(&spec.name);
        match spec.kind {
            FieldKind::Checkbox => {
                for option in &spec.vocabulary {
                    let ticked = field.checked == Some(true) && option.eq_ignore_ascii_case(field.raw.trim());
                    line.push(if ticked { "[X]".into() } else { "[ ]".into() });
                    line.push(option.clone());
                }
            }
            _ => line.extend(field.raw.split_whitespace().map(str::to_string)),
        }
        lines.push(line);
    }
    let mut tokens = Vec::new();
    for (row, words) in lines.iter().enumerate() {
        let y1 = 40.0 + row as f64 * LINE_PITCH;
        let mut x = 40.0;
        for w in words {
            let width = w.chars().count() as f64 * CHAR_WIDTH;
            tokens.push(Token {
                text: w.clone(),
                bbox: BBox::new(x, y1, x + width, y1 + LINE_HEIGHT),
                conf: Some(1.0),
            });
            x += width + CHAR_WIDTH;
        }
    }
    DocumentOcr {
        doc_id: doc_id.to_string(),
        page_size: Some(PAGE),
        tokens,
    }
}

fn value<'r>(r: &'r RecordDoc, field: &str) -> Option<&'r str> {
    r.field(field).filter(|v| v.is_valid()).map(|v| v.normalized.as_str())
}

fn date_of(r: &RecordDoc) -> Option<NaiveDate> {
    r.field(ELECTION_DATE).filter(|v| v.is_valid()).and_then(|v| v.date)
}

fn c<S: Into<String>>(field: &str, op: ConstraintOp, values: impl IntoIterator<Item = S>) -> Constraint {
    Constraint::new(field, op, values)
}

fn iso(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn field_query(constraints: Vec<Constraint>, answer: &str) -> StructuredQuery {
    StructuredQuery {
        constraints,
        answer_field: AnswerField::Field(answer.into()),
        predicate: Vec::new(),
        answer_format: None,
    }
}

struct Pools {
    parties: Vec<String>,
    options: Vec<String>,
}

type Template = fn(&RecordDoc, &mut ChaCha8Rng, &Pools) -> Option<(String, StructuredQuery)>;

fn templates() -> Vec<Template> {
    vec![
        // party + year
        |r, _, _| {
            let (p, d) = (value(r, PARTY)?, date_of(r)?);
            Some((
                format!("Which candidates in {} were from the {p} party?", d.year()),
                field_query(
                    vec![c(PARTY, ConstraintOp::Eq, [p]), c(ELECTION_DATE, ConstraintOp::DateYearEq, [d.year().to_string()])],
                    CANDIDATE_NAME,
                ),
            ))
        },
        // office + date range
        |r, rng, _| {
            let (o, d) = (value(r, OFFICE)?, date_of(r)?);
            let lo = d - Days::new(rng.gen_range(0..240));
            let hi = d + Days::new(rng.gen_range(0..240));
            Some((
                format!("Which candidates ran for the {o} office between {} and {}?", us_date(lo), us_date(hi)),
                field_query(
                    vec![c(OFFICE, ConstraintOp::Eq, [o]), c(ELECTION_DATE, ConstraintOp::DateBetween, [iso(lo), iso(hi)])],
                    CANDIDATE_NAME,
                ),
            ))
        },
        // candidate + office -> county
        |r, _, _| {
            let (n, o) = (value(r, CANDIDATE_NAME)?, value(r, OFFICE)?);
            value(r, CANDIDATE_COUNTY)?;
            Some((
                format!("In which counties did {n} run for {o}?"),
                field_query(vec![c(CANDIDATE_NAME, ConstraintOp::Eq, [n]), c(OFFICE, ConstraintOp::Eq, [o])], CANDIDATE_COUNTY),
            ))
        },
        // treasurer -> candidate
        |r, _, _| {
            let t = value(r, TREASURER_NAME)?;
            value(r, CANDIDATE_NAME)?;
            Some((
                format!("For which candidates was {t} the treasurer?"),
                field_query(vec![c(TREASURER_NAME, ConstraintOp::Eq, [t])], CANDIDATE_NAME),
            ))
        },
        // city + party exclusion
        |r, _, _| {
            let city = value(r, CANDIDATE_CITY)?;
            if matches!(value(r, PARTY), Some("Republican" | "Democrat")) {
                return None;
            }
            Some((
                format!("Which candidates ran for election in {city} who were from neither the Republican nor Democrat parties?"),
                field_query(
                    vec![
                        c(CANDIDATE_CITY, ConstraintOp::Eq, [city]),
                        c(PARTY, ConstraintOp::NotIn, ["Republican", "Democrat"]),
                    ],
                    CANDIDATE_NAME,
                ),
            ))
        },
        // yes/no about the option the candidate did not select
        |r, _, p| yes_no_option(r, &p.options, false),
        // party set + city
        |r, rng, pools| {
            let (p, city) = (value(r, PARTY)?, value(r, CANDIDATE_CITY)?);
            let mut others: Vec<&String> = pools.parties.iter().filter(|x| x.as_str() != p).collect();
            others.shuffle(rng);
            let mut set: Vec<String> = std::iter::once(p.to_string()).chain(others.into_iter().take(2).cloned()).collect();
            set.shuffle(rng);
            let listed = match set.as_slice() {
                [a, b, last] => format!("{a}, {b}, or {last}"),
                [a, b] => format!("{a} or {b}"),
                [a] => a.clone(),
                _ => return None,
            };
            Some((
                format!("Which candidates from the {listed} parties ran for election in {city}?"),
                field_query(vec![c(PARTY, ConstraintOp::In, set), c(CANDIDATE_CITY, ConstraintOp::Eq, [city])], CANDIDATE_NAME),
            ))
        },
        // ever ran for office
        |r, _, _| {
            let (n, o) = (value(r, CANDIDATE_NAME)?, value(r, OFFICE)?);
            Some((
                format!("Did {n} ever run for {o}?"),
                StructuredQuery {
                    constraints: vec![c(CANDIDATE_NAME, ConstraintOp::Eq, [n]), c(OFFICE, ConstraintOp::Eq, [o])],
                    answer_field: AnswerField::YesNo,
                    predicate: Vec::new(),
                    answer_format: None,
                },
            ))
        },
        // election year for candidate + office
        |r, _, _| {
            let (n, o) = (value(r, CANDIDATE_NAME)?, value(r, OFFICE)?);
            date_of(r)?;
            let mut q = field_query(vec![c(CANDIDATE_NAME, ConstraintOp::Eq, [n]), c(OFFICE, ConstraintOp::Eq, [o])], ELECTION_DATE);
            q.answer_format = Some(AnswerFormat::Year);
            Some((format!("In which election year did {n} run for {o}?"), q))
        },
        // all years for a candidate
        |r, _, _| {
            let n = value(r, CANDIDATE_NAME)?;
            date_of(r)?;
            let mut q = field_query(vec![c(CANDIDATE_NAME, ConstraintOp::Eq, [n])], ELECTION_DATE);
            q.answer_format = Some(AnswerFormat::Year);
            Some((format!("In which years did {n} run for office?"), q))
        },
        // after a date + party
        |r, rng, _| {
            let (p, d) = (value(r, PARTY)?, date_of(r)?);
            let after = d - Days::new(rng.gen_range(1..400));
            Some((
                format!("Which candidates running after {} were from the {p} party?", us_date(after)),
                field_query(vec![c(ELECTION_DATE, ConstraintOp::DateAfter, [iso(after)]), c(PARTY, ConstraintOp::Eq, [p])], CANDIDATE_NAME),
            ))
        },
        // which option was selected
        |r, _, _| {
            let (n, o, city) = (value(r, CANDIDATE_NAME)?, value(r, OFFICE)?, value(r, CANDIDATE_CITY)?);
            value(r, REPORTING_OPTION)?;
            Some((
                format!("Which reporting option did {n} select when running for {o} in {city}? Mini or full?"),
                field_query(
                    vec![
                        c(CANDIDATE_NAME, ConstraintOp::Eq, [n]),
                        c(OFFICE, ConstraintOp::Eq, [o]),
                        c(CANDIDATE_CITY, ConstraintOp::Eq, [city]),
                    ],
                    REPORTING_OPTION,
                ),
            ))
        },
        // before a date + office -> city
        |r, rng, _| {
            let (o, d) = (value(r, OFFICE)?, date_of(r)?);
            value(r, CANDIDATE_CITY)?;
            let before = d + Days::new(rng.gen_range(1..400));
            Some((
                format!("In which cities did candidates run for {o} before {}?", us_date(before)),
                field_query(vec![c(OFFICE, ConstraintOp::Eq, [o]), c(ELECTION_DATE, ConstraintOp::DateBefore, [iso(before)])], CANDIDATE_CITY),
            ))
        },
        // office + year, excluding one party
        |r, _, pools| {
            let (o, d) = (value(r, OFFICE)?, date_of(r)?);
            let own = value(r, PARTY);
            let excluded = pools.parties.iter().find(|p| Some(p.as_str()) != own)?;
            Some((
                format!("Which candidates for {o} in {} were not from the {excluded} party?", d.year()),
                field_query(
                    vec![
                        c(OFFICE, ConstraintOp::Eq, [o]),
                        c(ELECTION_DATE, ConstraintOp::DateYearEq, [d.year().to_string()]),
                        c(PARTY, ConstraintOp::Neq, [excluded.as_str()]),
                    ],
                    CANDIDATE_NAME,
                ),
            ))
        },
        // county + option tick state
        |r, _, _| {
            let county = value(r, CANDIDATE_COUNTY)?;
            let field = r.field(REPORTING_OPTION).filter(|v| v.is_valid())?;
            let (opt, ticked) = (field.normalized.as_str(), field.checked?);
            let verb = if ticked { "ticked" } else { "left unticked" };
            Some((
                format!("Which candidates from {county} county {verb} the {opt} reporting option?"),
                field_query(
                    vec![
                        c(CANDIDATE_COUNTY, ConstraintOp::Eq, [county]),
                        c(REPORTING_OPTION, ConstraintOp::Eq, [opt]),
                        c(REPORTING_OPTION, ConstraintOp::CheckedEq, [ticked.to_string()]),
                    ],
                    CANDIDATE_NAME,
                ),
            ))
        },
        // yes/no about the option the candidate did select
        |r, _, p| yes_no_option(r, &p.options, true),
    ]
}

fn yes_no_option(r: &RecordDoc, options: &[String], selected: bool) -> Option<(String, StructuredQuery)> {
    let (n, d) = (value(r, CANDIDATE_NAME)?, date_of(r)?);
    let field = r.field(REPORTING_OPTION).filter(|v| v.is_valid() && v.checked == Some(true))?;
    let asked = if selected {
        field.normalized.clone()
    } else {
        options.iter().find(|o| **o != field.normalized)?.clone()
    };
    Some((
        format!(
            "Did {n} select the {} reporting option when running in the {} elections?",
            asked.to_lowercase(),
            us_date(d)
        ),
        StructuredQuery {
            constraints: vec![c(CANDIDATE_NAME, ConstraintOp::Eq, [n]), c(ELECTION_DATE, ConstraintOp::Eq, [iso(d)])],
            answer_field: AnswerField::YesNo,
            predicate: vec![
                c(REPORTING_OPTION, ConstraintOp::Eq, [asked.as_str()]),
                c(REPORTING_OPTION, ConstraintOp::CheckedEq, ["true"]),
            ],
            answer_format: None,
        },
    ))
}

/// Ground truth for a question by filtering the normalized records.
pub fn ground_truth_for(engine: &QueryEngine<'_>, q: &Question, records: &[RecordDoc]) -> Result<GroundTruthEntry> {
    let matching = engine.matching(&q.query, records)?;
    let answers = engine.extract_answers(&q.query, &matching)?;
    Ok(GroundTruthEntry {
        question_id: q.question_id.clone(),
        answers,
        relevant: matching.iter().map(|r| r.doc_id.clone()).collect(),
    })
}

/// Generates a collection, questions and ground truth. The output is a
/// pure function of the spec.
pub fn generate_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_docs;

    let parties = pool(&PARTIES, spec.cardinality(PARTY), |b, k| format!("{b} {k}"));
    let options: Vec<String> = REPORTING_OPTIONS[..spec.cardinality(REPORTING_OPTION)].iter().map(|s| s.to_string()).collect();
    let offices = pool(&OFFICES, spec.cardinality(OFFICE), |b, k| format!("{b} District {k}"));
    let cities = pool(&CITIES, spec.cardinality(CANDIDATE_CITY), |b, k| format!("{b} {k}"));
    let counties = pool(&COUNTIES, spec.cardinality(CANDIDATE_COUNTY), |b, k| format!("{b} {k}"));
    let dates = election_dates(spec.cardinality(ELECTION_DATE));
    let candidates = name_pool(&mut rng, spec.cardinality(CANDIDATE_NAME));
    let treasurers = name_pool(&mut rng, spec.cardinality(TREASURER_NAME));

    let mut schema = Schema::candidate_registration();
    for f in &mut schema.fields {
        if f.name == PARTY {
            f.vocabulary = parties.clone();
        } else if f.name == REPORTING_OPTION {
            f.vocabulary = options.clone();
        }
    }

    let mut columns: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
    for FieldSpec { name, .. } in &schema.fields {
        let card = match name.as_str() {
            PARTY => parties.len(),
            REPORTING_OPTION => options.len(),
            OFFICE => offices.len(),
            CANDIDATE_CITY => cities.len(),
            CANDIDATE_COUNTY => counties.len(),
            ELECTION_DATE => dates.len(),
            CANDIDATE_NAME => candidates.len(),
            _ => treasurers.len(),
        };
        let col = assign(&mut rng, n, card, spec.missing_rate(name));
        columns.insert(name.as_str(), col);
    }

    let width = (n.saturating_sub(1)).to_string().len().max(4);
    let mut raw_records = Vec::with_capacity(n);
    let mut documents = Vec::with_capacity(n);
    for i in 0..n {
        let doc_id = format!("{:0width$}", i + 1);
        let mut fields = BTreeMap::new();
        for spec_field in &schema.fields {
            let name = spec_field.name.as_str();
            let Some(k) = columns[name][i] else { continue };
            let raw = match name {
                CANDIDATE_NAME | TREASURER_NAME => {
                    let v = if name == CANDIDATE_NAME { &candidates[k] } else { &treasurers[k] };
                    RawField::text(if rng.gen_bool(0.1) { v.to_uppercase() } else { v.clone() })
                }
                PARTY => RawField::text(parties[k].clone()),
                OFFICE => RawField::text(offices[k].clone()),
                CANDIDATE_CITY => RawField::text(cities[k].clone()),
                CANDIDATE_COUNTY => RawField::text(counties[k].clone()),
                ELECTION_DATE => RawField::date(render_date(&mut rng, dates[k])),
                _ => RawField::checkbox(options[k].clone(), !rng.gen_bool(0.03)),
            };
            fields.insert(name.to_string(), raw);
        }
        let record = RawRecord { doc_id: doc_id.clone(), fields };
        documents.push(layout(&doc_id, &record, &schema));
        raw_records.push(record);
    }

    let records: Vec<RecordDoc> = raw_records
        .iter()
        .map(|r| normalize_record(r, &schema).map(|(doc, _)| doc))
        .collect::<Result<_>>()?;
    let engine = QueryEngine::new(&schema);

    let pools = Pools { parties, options };
    let mut questions = Vec::new();
    let mut gt = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for template in templates() {
        order.shuffle(&mut rng);
        let found = order.iter().find_map(|&i| template(&records[i], &mut rng, &pools));
        let Some((text, query)) = found else { continue };
        let question = Question {
            question_id: format!("q{:02}", questions.len() + 1),
            text,
            query,
        };
        let entry = ground_truth_for(&engine, &question, &records)?;
        if entry.relevant.is_empty() {
            continue;
        }
        questions.push(question);
        gt.push(entry);
    }
    Ok(Fixture {
        schema,
        documents,
        raw_records,
        questions,
        gt,
    })
}

/// Replaces one letter with a different one, the way a single OCR
/// misread would.
fn substitute_letter(s: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_alphabetic()).collect();
    let Some(&at) = letters.choose(rng) else { return s.to_string() };
    let old = chars[at].to_ascii_lowercase();
    let mut new = old;
    while new == old {
        new = rng.gen_range(b'a'..=b'z') as char;
    }
    chars[at] = if chars[at].is_ascii_uppercase() { new.to_ascii_uppercase() } else { new };
    chars.into_iter().collect()
}

/// Misreads one letter of the stored answer value in roughly `fraction`
/// of the documents that contribute answers. A field is only altered on
/// documents whose relevance to some question does not depend on it, so
/// every question's relevant set is unchanged. Returns the modified
/// records and the number of documents changed.
pub fn inject_answer_noise(
    raw_records: &[RawRecord],
    questions: &[Question],
    schema: &Schema,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<RawRecord>, usize)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::validation("noise fraction outside [0, 1]"));
    }
    let records: Vec<RecordDoc> = raw_records
        .iter()
        .map(|r| normalize_record(r, schema).map(|(doc, _)| doc))
        .collect::<Result<_>>()?;
    let engine = QueryEngine::new(schema);
    // (doc, field) pairs that some question's relevance depends on
    let mut pinned: BTreeSet<(String, String)> = BTreeSet::new();
    let mut targets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for q in questions {
        let matching = engine.matching(&q.query, &records)?;
        for c in q.query.constraints.iter().chain(&q.query.predicate) {
            pinned.extend(matching.iter().map(|r| (r.doc_id.clone(), c.field.clone())));
        }
        let AnswerField::Field(field) = &q.query.answer_field else { continue };
        if schema.require(field)?.kind != FieldKind::Text {
            continue;
        }
        for r in matching {
            targets.entry(r.doc_id.clone()).or_default().insert(field.clone());
        }
    }
    for (doc, fields) in &mut targets {
        fields.retain(|f| !pinned.contains(&(doc.clone(), f.clone())));
    }
    targets.retain(|_, fields| !fields.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = raw_records.to_vec();
    let mut changed = 0;
    for rec in &mut out {
        let Some(fields) = targets.get(&rec.doc_id) else { continue };
        if !rng.gen_bool(fraction) {
            continue;
        }
        for f in fields {
            if let Some(raw) = rec.fields.get_mut(f) {
                raw.raw = substitute_letter(&raw.raw, &mut rng);
            }
        }
        changed += 1;
    }
    Ok((out, changed))
}
