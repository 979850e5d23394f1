//! Reading-order serialization of OCR tokens into a single context string.

use std::cmp::Ordering;

use crate::textspot::{DocumentOcr, Token};

/// Default fraction of the median token height within which two vertical
/// centers are considered the same line.
pub const DEFAULT_LINE_TOLERANCE: f64 = 0.5;

fn token_order(a: &Token, b: &Token) -> Ordering {
    a.bbox
        .center_y()
        .total_cmp(&b.bbox.center_y())
        .then(a.bbox.x1.total_cmp(&b.bbox.x1))
        .then(a.bbox.y1.total_cmp(&b.bbox.y1))
        .then_with(|| a.text.cmp(&b.text))
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Groups tokens into lines and returns them as rows of token references,
/// top to bottom, each row left to right.
///
/// Tokens sorted by vertical center are chained into the same line while
/// consecutive centers differ by less than `tolerance_factor` times the
/// median token height.
pub fn reading_lines(doc: &DocumentOcr, tolerance_factor: f64) -> Vec<Vec<&Token>> {
    if doc.tokens.is_empty() {
        return Vec::new();
    }
    let tolerance = tolerance_factor * median(doc.tokens.iter().map(|t| t.bbox.height()).collect());
    let mut sorted: Vec<&Token> = doc.tokens.iter().collect();
    sorted.sort_by(|a, b| token_order(a, b));

    let mut lines: Vec<Vec<&Token>> = Vec::new();
    let mut last_center = f64::NEG_INFINITY;
    for tok in sorted {
        let c = tok.bbox.center_y();
        match lines.last_mut() {
            Some(line) if c - last_center < tolerance => line.push(tok),
            _ => lines.push(vec![tok]),
        }
        last_center = c;
    }

    let mean_center = |line: &[&Token]| line.iter().map(|t| t.bbox.center_y()).sum::<f64>() / line.len() as f64;
    lines.sort_by(|a, b| mean_center(a).total_cmp(&mean_center(b)));
    for line in &mut lines {
        line.sort_by(|a, b| {
            a.bbox
                .x1
                .total_cmp(&b.bbox.x1)
                .then(a.bbox.y1.total_cmp(&b.bbox.y1))
                .then_with(|| a.text.cmp(&b.text))
        });
    }
    lines
}

/// Token texts in top-left to bottom-right order, joined by single spaces.
pub fn serialize_context(doc: &DocumentOcr, tolerance_factor: f64) -> String {
    reading_lines(doc, tolerance_factor)
        .into_iter()
        .flatten()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
