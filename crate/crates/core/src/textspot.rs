//! Word-spotting evidence retrieval: question keywords are matched against
//! each document's OCR tokens by minimum normalized edit distance.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{sort_ranking, RankedDoc};
use crate::scalar::Scalar;
use crate::similarity::nld;

/// Relevance threshold applied to text-spotting confidences.
pub const DEFAULT_THETA: f64 = 0.9;

/// Axis-aligned box in pixels, serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center_y(&self) -> f64 {
        (self.y1 + self.y2) / 2.0
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        BBox { x1, y1, x2, y2 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conf: Option<f64>,
}

impl Token {
    pub fn new(text: impl Into<String>, bbox: BBox) -> Self {
        Token {
            text: text.into(),
            bbox,
            conf: None,
        }
    }
}

/// OCR output for one document image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentOcr {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_size: Option<[f64; 2]>,
    pub tokens: Vec<Token>,
}

impl DocumentOcr {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        DocumentOcr {
            doc_id: doc_id.into(),
            page_size: None,
            tokens,
        }
    }

    /// Checks token geometry and text against the document invariants.
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::validation("document with empty doc_id"));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            let b = &t.bbox;
            let here = || format!("document {} token {i}", self.doc_id);
            if t.text.trim().is_empty() {
                return Err(Error::validation(format!("{}: empty text", here())));
            }
            if ![b.x1, b.y1, b.x2, b.y2].iter().all(|v| v.is_finite()) || b.x2 < b.x1 || b.y2 < b.y1 {
                return Err(Error::validation(format!("{}: malformed bbox {:?}", here(), b)));
            }
            if let Some(c) = t.conf {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::validation(format!("{}: conf {c} outside [0, 1]", here())));
                }
            }
            if let Some([w, h]) = self.page_size {
                if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > w || b.y2 > h {
                    return Err(Error::validation(format!(
                        "{}: bbox {:?} outside page {w}x{h}",
                        here(),
                        b
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Lowercased, deduplicated, non-empty list of query words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct KeywordSet(Vec<String>);

impl KeywordSet {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            if !w.is_empty() && seen.insert(w.clone()) {
                out.push(w);
            }
        }
        if out.is_empty() {
            return Err(Error::validation("keyword set is empty"));
        }
        Ok(KeywordSet(out))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.iter().any(|w| w == word)
    }
}

impl TryFrom<Vec<String>> for KeywordSet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        KeywordSet::new(v)
    }
}

impl From<KeywordSet> for Vec<String> {
    fn from(k: KeywordSet) -> Self {
        k.0
    }
}

/// Source of query words for a question.
pub trait KeywordExtractor: Send + Sync {
    fn extract(&self, question_id: &str, question_text: &str) -> Result<KeywordSet>;
}

// Function words plus frequent verbs that rarely appear on the form itself.
const LEXICON: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "between", "both", "but", "by", "can", "could", "did",
    "do", "does", "doing", "done", "during", "each", "either", "ever", "every", "few", "for",
    "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i",
    "if", "in", "into", "is", "it", "its", "just", "many", "may", "me", "might", "more", "most",
    "much", "must", "my", "neither", "never", "no", "nor", "not", "of", "off", "on", "once",
    "only", "or", "other", "our", "out", "over", "own", "same", "shall", "she", "should", "so",
    "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "yes", "you", "your",
    // verbs
    "appear", "appeared", "ask", "asked", "became", "become", "chose", "choose", "chosen",
    "elect", "elected", "file", "filed", "files", "find", "found", "get", "gets", "give", "gave",
    "go", "goes", "going", "gone", "got", "list", "listed", "make", "made", "mark", "marked",
    "pick", "picked", "ran", "register", "registered", "represent", "represented", "represents",
    "run", "running", "runs", "say", "said", "select", "selected", "selects", "serve", "served",
    "serves", "show", "shown", "sign", "signed", "take", "taken", "took", "tell", "use", "used",
    "want", "went", "win", "won",
];

/// Deterministic stand-in for a part-of-speech filter.
///
/// A word is kept when it contains a digit, is capitalized after the first
/// word of the question, or is absent from the bundled function-word and
/// common-verb lexicon.
#[derive(Debug, Clone)]
pub struct LexiconExtractor {
    lexicon: HashSet<String>,
}

impl Default for LexiconExtractor {
    fn default() -> Self {
        LexiconExtractor {
            lexicon: LEXICON.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl LexiconExtractor {
    pub fn with_extra_words<S: AsRef<str>>(mut self, words: impl IntoIterator<Item = S>) -> Self {
        self.lexicon
            .extend(words.into_iter().map(|w| w.as_ref().to_lowercase()));
        self
    }

    pub fn extract_text(&self, question_text: &str) -> Result<KeywordSet> {
        let mut kept = Vec::new();
        let mut sentence_start = true;
        for raw in question_text.split_whitespace() {
            let ends_sentence = raw.ends_with(['?', '!']);
            for piece in raw.split('-') {
                let word = strip_punctuation(piece);
                if word.is_empty() {
                    continue;
                }
                let has_digit = word.chars().any(|c| c.is_ascii_digit());
                let capitalized = !sentence_start && word.chars().next().is_some_and(char::is_uppercase);
                let lower = word.to_lowercase();
                if has_digit || capitalized || !self.lexicon.contains(&lower) {
                    kept.push(lower);
                }
                sentence_start = false;
            }
            if ends_sentence {
                sentence_start = true;
            }
        }
        KeywordSet::new(kept).map_err(|_| Error::NoKeywords {
            question: question_text.to_string(),
        })
    }
}

impl KeywordExtractor for LexiconExtractor {
    fn extract(&self, _question_id: &str, question_text: &str) -> Result<KeywordSet> {
        self.extract_text(question_text)
    }
}

/// Strips surrounding punctuation, keeping the period of initials ("M.").
fn strip_punctuation(word: &str) -> &str {
    let trimmed = word.trim_matches(|c: char| !c.is_alphanumeric() && c != '.');
    let trimmed = trimmed.trim_start_matches('.');
    let mut chars = trimmed.chars();
    let is_initial = matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic());
    if is_initial {
        trimmed
    } else {
        trimmed.trim_end_matches('.')
    }
}

/// Pre-extracted keywords per question id, falling back to another
/// extractor for questions that are not listed.
pub struct KeywordOverrides<E> {
    pub overrides: BTreeMap<String, KeywordSet>,
    pub fallback: E,
}

impl<E: KeywordExtractor> KeywordExtractor for KeywordOverrides<E> {
    fn extract(&self, question_id: &str, question_text: &str) -> Result<KeywordSet> {
        match self.overrides.get(question_id) {
            Some(k) => Ok(k.clone()),
            None => self.fallback.extract(question_id, question_text),
        }
    }
}

/// `1 - mean over keywords of the minimum NLD to any document token`.
/// A document without tokens scores 0.
pub fn doc_confidence<T: Scalar>(keywords: &KeywordSet, doc: &DocumentOcr, case_fold: bool) -> T {
    if doc.tokens.is_empty() || keywords.is_empty() {
        return T::zero();
    }
    let words: Vec<String> = doc
        .tokens
        .iter()
        .map(|t| if case_fold { t.text.to_lowercase() } else { t.text.clone() })
        .collect();
    let total: T = keywords
        .as_slice()
        .iter()
        .map(|kw| {
            let mut best = T::one();
            for w in &words {
                let d: T = nld(kw, w, false);
                if d < best {
                    best = d;
                    if best == T::zero() {
                        break;
                    }
                }
            }
            best
        })
        .sum();
    T::one() - total / T::from_usize_lossy(keywords.len())
}

/// Scores every document and returns them sorted by confidence descending,
/// ties broken by doc_id.
pub fn rank_collection<T: Scalar>(
    keywords: &KeywordSet,
    docs: &[DocumentOcr],
    case_fold: bool,
) -> Result<Vec<RankedDoc<T>>> {
    let mut seen = HashSet::with_capacity(docs.len());
    for d in docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(Error::validation(format!("duplicate doc_id {} in collection", d.doc_id)));
        }
    }
    let mut ranking: Vec<RankedDoc<T>> = docs
        .par_iter()
        .map(|d| RankedDoc::new(d.doc_id.clone(), doc_confidence(keywords, d, case_fold)))
        .collect();
    sort_ranking(&mut ranking);
    Ok(ranking)
}

/// Ids of documents whose confidence is strictly greater than `theta`.
pub fn threshold_relevant<T: Scalar>(ranking: &[RankedDoc<T>], theta: T) -> BTreeSet<String> {
    ranking
        .iter()
        .filter(|d| d.confidence > theta)
        .map(|d| d.doc_id.clone())
        .collect()
}
