//! Answer and evidence metrics: list-aware ANLS (ANLSL) and MAP.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruthEntry, Submission};
use crate::error::{Error, Result};
use crate::hungarian::hungarian_match;
use crate::scalar::Scalar;
use crate::similarity::nls;

/// Default per-pair similarity threshold below which a matched pair
/// contributes nothing.
pub const DEFAULT_TAU: f64 = 0.5;

/// Unordered collection of answer strings. Order is kept for display only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerList(pub Vec<String>);

impl AnswerList {
    pub fn new<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        AnswerList(items.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl<S: Into<String>> FromIterator<S> for AnswerList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        AnswerList::new(iter)
    }
}

/// A document with the retriever's confidence that it holds evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc<T> {
    pub doc_id: String,
    pub confidence: T,
}

impl<T: Scalar> RankedDoc<T> {
    pub fn new(doc_id: impl Into<String>, confidence: T) -> Self {
        RankedDoc {
            doc_id: doc_id.into(),
            confidence,
        }
    }
}

/// Sorts by confidence descending, then doc_id ascending.
pub fn sort_ranking<T: Scalar>(ranking: &mut [RankedDoc<T>]) {
    ranking.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}

/// Average normalized Levenshtein similarity between two answer lists.
///
/// Pairs are chosen by maximum-total-NLS assignment; each matched pair
/// whose NLS falls below `tau` then counts as 0, and the sum is divided by
/// the longer list's length. `tau = 0` gives the unthresholded score.
pub fn anlsl<T: Scalar>(gt: &AnswerList, pred: &AnswerList, tau: T, case_fold: bool) -> T {
    debug_assert!(tau >= T::zero() && tau <= T::one(), "tau outside [0, 1]");
    match (gt.is_empty(), pred.is_empty()) {
        (true, true) => return T::one(),
        (true, false) | (false, true) => return T::zero(),
        _ => {}
    }
    let matrix: Vec<Vec<T>> = gt
        .iter()
        .map(|g| pred.iter().map(|p| nls(g, p, case_fold)).collect())
        .collect();
    let assignment = hungarian_match(&matrix).expect("non-empty finite NLS matrix");
    let kept: T = assignment
        .pairs
        .iter()
        .map(|p| if p.score < tau { T::zero() } else { p.score })
        .sum();
    kept / T::from_usize_lossy(gt.len().max(pred.len()))
}

/// Mean over relevant documents of the precision at each one's rank.
/// Relevant documents that are missing from the ranking count as 0.
pub fn average_precision<T: Scalar>(ranking: &[RankedDoc<T>], relevant: &BTreeSet<String>) -> Result<T> {
    if relevant.is_empty() {
        return Err(Error::validation("average precision undefined for an empty relevant set"));
    }
    check_ranking(ranking)?;
    let mut sorted = ranking.to_vec();
    sort_ranking(&mut sorted);
    let mut hits = 0usize;
    let mut sum = T::zero();
    for (rank0, doc) in sorted.iter().enumerate() {
        if relevant.contains(&doc.doc_id) {
            hits += 1;
            sum = sum + T::ratio(hits, rank0 + 1);
        }
    }
    Ok(sum / T::from_usize_lossy(relevant.len()))
}

pub(crate) fn check_ranking<T: Scalar>(ranking: &[RankedDoc<T>]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ranking.len());
    for doc in ranking {
        if doc.doc_id.is_empty() {
            return Err(Error::validation("ranking contains an empty doc_id"));
        }
        if !doc.confidence.is_finite() {
            return Err(Error::validation(format!(
                "non-finite confidence for document {}",
                doc.doc_id
            )));
        }
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::validation(format!("duplicate doc_id {} in ranking", doc.doc_id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub ap: f64,
    pub anlsl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// MAP scaled to `[0, 100]`.
    pub map_percent: f64,
    pub anlsl: f64,
    pub per_question: Vec<QuestionScore>,
}

impl MetricReport {
    /// Fixed-width per-question table followed by the overall row.
    pub fn render_table(&self) -> String {
        let width = self
            .per_question
            .iter()
            .map(|q| q.question_id.len())
            .max()
            .unwrap_or(0)
            .max("question".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>7}", "question", "AP", "ANLSL");
        for q in &self.per_question {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.4}  {:>7.4}",
                q.question_id, q.ap, q.anlsl
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>7.4}",
            "MAP/ANLSL", self.map_percent, self.anlsl
        );
        out
    }
}

/// Scores a set of submissions against ground truth.
///
/// Every ground-truth question must have exactly one submission and no
/// submission may name an unknown question.
pub fn evaluate(
    submissions: &[Submission],
    gt: &[GroundTruthEntry],
    tau: f64,
    case_fold: bool,
) -> Result<MetricReport> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::validation(format!("tau {tau} outside [0, 1]")));
    }
    let mut by_id: BTreeMap<&str, Vec<&Submission>> = BTreeMap::new();
    for s in submissions {
        by_id.entry(s.question_id.as_str()).or_default().push(s);
    }
    let gt_ids: BTreeSet<&str> = gt.iter().map(|g| g.question_id.as_str()).collect();
    if gt_ids.len() != gt.len() {
        return Err(Error::validation("duplicate question_id in ground truth"));
    }

    let missing: Vec<&str> = gt_ids.iter().copied().filter(|id| !by_id.contains_key(id)).collect();
    let duplicated: Vec<&str> = by_id
        .iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(k, _)| *k)
        .collect();
    let unknown: Vec<&str> = by_id.keys().copied().filter(|id| !gt_ids.contains(id)).collect();
    if !(missing.is_empty() && duplicated.is_empty() && unknown.is_empty()) {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing submissions for [{}]", missing.join(", ")));
        }
        if !duplicated.is_empty() {
            parts.push(format!("duplicate submissions for [{}]", duplicated.join(", ")));
        }
        if !unknown.is_empty() {
            parts.push(format!("submissions for unknown questions [{}]", unknown.join(", ")));
        }
        return Err(Error::Validation(parts.join("; ")));
    }

    let mut per_question = gt
        .par_iter()
        .map(|entry| {
            let sub = by_id[entry.question_id.as_str()][0];
            let ap = average_precision(&sub.ranking, &entry.relevant)?;
            let score = anlsl(&entry.answers, &sub.answers, tau, case_fold);
            Ok(QuestionScore {
                question_id: entry.question_id.clone(),
                ap,
                anlsl: score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    per_question.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let n = per_question.len().max(1) as f64;
    let map = per_question.iter().map(|q| q.ap).sum::<f64>() / n;
    let mean_anlsl = per_question.iter().map(|q| q.anlsl).sum::<f64>() / n;
    Ok(MetricReport {
        map_percent: 100.0 * map,
        anlsl: mean_anlsl,
        per_question,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(items: &[&str]) -> AnswerList {
        AnswerList::new(items.iter().copied())
    }

    fn rel(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn ranking(items: &[(&str, f64)]) -> Vec<RankedDoc<f64>> {
        items.iter().map(|(d, c)| RankedDoc::new(*d, *c)).collect()
    }

    // Enumerates every injective pairing of the shorter list into the longer.
    fn brute_anlsl(gt: &[String], pred: &[String]) -> f64 {
        if gt.is_empty() && pred.is_empty() {
            return 1.0;
        }
        if gt.is_empty() || pred.is_empty() {
            return 0.0;
        }
        let (short, long) = if gt.len() <= pred.len() { (gt, pred) } else { (pred, gt) };
        fn go(short: &[String], long: &[String], i: usize, used: &mut [bool]) -> f64 {
            if i == short.len() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for j in 0..long.len() {
                if !used[j] {
                    used[j] = true;
                    let s: f64 = nls(&short[i], &long[j], true);
                    best = best.max(s + go(short, long, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(short, long, 0, &mut vec![false; long.len()]) / long.len() as f64
    }

    // Thresholded scores of every pairing whose raw total is optimal.
    fn optimal_thresholded(gt: &[String], pred: &[String], tau: f64) -> Vec<f64> {
        if gt.is_empty() || pred.is_empty() {
            return vec![if gt.is_empty() && pred.is_empty() { 1.0 } else { 0.0 }];
        }
        let (short, long) = if gt.len() <= pred.len() { (gt, pred) } else { (pred, gt) };
        let mut all = Vec::new();
        fn go(short: &[String], long: &[String], i: usize, used: &mut [bool], acc: Vec<f64>, out: &mut Vec<Vec<f64>>) {
            if i == short.len() {
                out.push(acc);
                return;
            }
            for j in 0..long.len() {
                if !used[j] {
                    used[j] = true;
                    let mut next = acc.clone();
                    next.push(nls(&short[i], &long[j], true));
                    go(short, long, i + 1, used, next, out);
                    used[j] = false;
                }
            }
        }
        go(short, long, 0, &mut vec![false; long.len()], Vec::new(), &mut all);
        let best = all.iter().map(|v| v.iter().sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        let mut vals: Vec<f64> = all
            .iter()
            .filter(|v| (v.iter().sum::<f64>() - best).abs() < 1e-9)
            .map(|v| v.iter().map(|&x| if x < tau { 0.0 } else { x }).sum::<f64>() / long.len() as f64)
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        vals
    }

    #[test]
    fn anlsl_hand_cases() {
        let g = list(&["2016", "2020"]);
        assert_eq!(anlsl(&g, &list(&["2016", "2020"]), 0.5, true), 1.0);
        assert_eq!(anlsl(&g, &list(&["2020"]), 0.5, true), 0.5);
        let v: f64 = anlsl(&g, &list(&["2016", "2020", "1999"]), 0.5, true);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn anlsl_empty_lists() {
        assert_eq!(anlsl(&list(&[]), &list(&[]), 0.5, true), 1.0);
        assert_eq!(anlsl(&list(&["a"]), &list(&[]), 0.5, true), 0.0);
        assert_eq!(anlsl(&list(&[]), &list(&["a"]), 0.5, true), 0.0);
    }

    #[test]
    fn tau_applies_after_matching() {
        // NLS("abcd","abxy") = 0.5, NLS("abcd","wxyz") = 0
        let g = list(&["abcd"]);
        assert_eq!(anlsl(&g, &list(&["abxy"]), 0.5, true), 0.5);
        assert_eq!(anlsl(&g, &list(&["abxz"]), 0.5, true), 0.5);
        assert_eq!(anlsl(&g, &list(&["axyz"]), 0.5, true), 0.0);
        assert_eq!(anlsl(&g, &list(&["axyz"]), 0.0, true), 0.25);
    }

    #[test]
    fn case_sensitivity_flag() {
        let g = list(&["Seattle"]);
        assert_eq!(anlsl(&g, &list(&["SEATTLE"]), 0.5, true), 1.0);
        assert_eq!(anlsl(&g, &list(&["SEATTLE"]), 0.5, false), 0.0);
    }

    #[test]
    fn ap_hand_cases() {
        let r = ranking(&[("d1", 0.9), ("d2", 0.8), ("d3", 0.7)]);
        let ap: f64 = average_precision(&r, &rel(&["d1", "d3"])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);

        let perfect = ranking(&[("d3", 0.2), ("d1", 0.9), ("d2", 0.1)]);
        assert_eq!(average_precision(&perfect, &rel(&["d1", "d3"])).unwrap(), 1.0);

        let partial = ranking(&[("d2", 0.9), ("d1", 0.5)]);
        assert_eq!(average_precision(&partial, &rel(&["d1", "d3"])).unwrap(), 0.25);
    }

    #[test]
    fn ap_ties_break_by_doc_id() {
        let r = ranking(&[("b", 1.0), ("a", 1.0), ("c", 0.0)]);
        assert_eq!(average_precision(&r, &rel(&["a"])).unwrap(), 1.0);
        assert_eq!(average_precision(&r, &rel(&["b"])).unwrap(), 0.5);
    }

    #[test]
    fn ap_errors() {
        let r = ranking(&[("d1", 0.9)]);
        assert!(average_precision(&r, &rel(&[])).is_err());
        let dup = ranking(&[("d1", 0.9), ("d1", 0.2)]);
        assert!(matches!(
            average_precision(&dup, &rel(&["d1"])),
            Err(Error::Validation(_))
        ));
    }

    fn sub(id: &str, answers: &[&str], r: &[(&str, f64)]) -> Submission {
        Submission {
            question_id: id.into(),
            answers: list(answers),
            ranking: ranking(r),
        }
    }

    fn gt(id: &str, answers: &[&str], relevant: &[&str]) -> GroundTruthEntry {
        GroundTruthEntry {
            question_id: id.into(),
            answers: list(answers),
            relevant: rel(relevant),
        }
    }

    #[test]
    fn evaluate_perfect_single_question() {
        let report = evaluate(
            &[sub("q1", &["2016", "2020"], &[("454", 1.0), ("10901", 1.0), ("7", 0.0)])],
            &[gt("q1", &["2016", "2020"], &["454", "10901"])],
            0.5,
            true,
        )
        .unwrap();
        assert_eq!(report.map_percent, 100.0);
        assert_eq!(report.anlsl, 1.0);
    }

    #[test]
    fn evaluate_means() {
        let report = evaluate(
            &[
                sub("q1", &["x"], &[("a", 0.9)]),
                sub("q2", &["zzz"], &[("b", 0.9), ("a", 0.5)]),
            ],
            &[gt("q1", &["x"], &["a"]), gt("q2", &["abc"], &["a"])],
            0.5,
            true,
        )
        .unwrap();
        assert_eq!(report.per_question[0].ap, 1.0);
        assert_eq!(report.per_question[1].ap, 0.5);
        assert_eq!(report.map_percent, 75.0);
        assert_eq!(report.anlsl, 0.5);
    }

    #[test]
    fn evaluate_reports_offending_ids() {
        let err = evaluate(
            &[sub("q1", &[], &[]), sub("q1", &[], &[]), sub("q9", &[], &[])],
            &[gt("q1", &["x"], &["a"]), gt("q2", &["x"], &["a"])],
            0.5,
            true,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("q2"), "{err}");
        assert!(err.contains("duplicate submissions for [q1]"), "{err}");
        assert!(err.contains("q9"), "{err}");
    }

    #[test]
    fn table_has_one_row_per_question() {
        let report = evaluate(
            &[sub("q1", &["x"], &[("a", 0.9)])],
            &[gt("q1", &["x"], &["a"])],
            0.5,
            true,
        )
        .unwrap();
        let table = report.render_table();
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("100.00"));
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-c]{0,4}", 0..5)
    }

    proptest! {
        #[test]
        fn unthresholded_matches_brute_force(g in words(), p in words()) {
            let got: f64 = anlsl(&AnswerList(g.clone()), &AnswerList(p.clone()), 0.0, true);
            prop_assert!((got - brute_anlsl(&g, &p)).abs() < 1e-9);
        }

        #[test]
        fn order_independent(g in words(), p in words(), rot in 0usize..5) {
            let mut g2 = g.clone();
            let mut p2 = p.clone();
            g2.reverse();
            if !p2.is_empty() {
                let k = rot % p2.len();
                p2.rotate_left(k);
            }
            let raw: f64 = anlsl(&AnswerList(g.clone()), &AnswerList(p.clone()), 0.0, true);
            let raw_permuted: f64 = anlsl(&AnswerList(g2.clone()), &AnswerList(p2.clone()), 0.0, true);
            prop_assert!((raw - raw_permuted).abs() < 1e-9);
            // with tau > 0 only tied optimal matchings may disagree
            let allowed = optimal_thresholded(&g, &p, 0.5);
            let base: f64 = anlsl(&AnswerList(g), &AnswerList(p), 0.5, true);
            let permuted: f64 = anlsl(&AnswerList(g2), &AnswerList(p2), 0.5, true);
            prop_assert!(allowed.iter().any(|v| (v - base).abs() < 1e-9));
            prop_assert!(allowed.iter().any(|v| (v - permuted).abs() < 1e-9));
            if allowed.len() == 1 {
                prop_assert!((base - permuted).abs() < 1e-9);
            }
        }

        #[test]
        fn self_match_is_perfect(g in proptest::collection::vec("[a-z]{0,6}", 1..6)) {
            prop_assert_eq!(anlsl::<f64>(&AnswerList(g.clone()), &AnswerList(g), 0.5, true), 1.0);
        }

        #[test]
        fn extra_prediction_never_helps(g in words(), p in words(), extra in "[x-z]{1,4}") {
            prop_assume!(!g.is_empty() && p.len() >= g.len());
            let before: f64 = anlsl(&AnswerList(g.clone()), &AnswerList(p.clone()), 0.5, true);
            let mut longer = p;
            longer.push(extra);
            let after: f64 = anlsl(&AnswerList(g), &AnswerList(longer), 0.5, true);
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn ap_matches_definitional_loop(
            n in 1usize..50,
            conf in proptest::collection::vec(0u8..5, 50),
            is_rel in proptest::collection::vec(any::<bool>(), 50),
            extra_missing in 0usize..3,
        ) {
            let docs: Vec<RankedDoc<f64>> = (0..n)
                .map(|i| RankedDoc::new(format!("d{i:02}"), f64::from(conf[i]) / 4.0))
                .collect();
            let mut relevant: BTreeSet<String> = (0..n).filter(|&i| is_rel[i]).map(|i| format!("d{i:02}")).collect();
            for k in 0..extra_missing {
                relevant.insert(format!("absent{k}"));
            }
            prop_assume!(!relevant.is_empty());
            // precision@k for each relevant doc, counting its rank directly
            let mut order = docs.clone();
            order.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap().then(a.doc_id.cmp(&b.doc_id)));
            let mut total = 0.0;
            for r in &relevant {
                if let Some(pos) = order.iter().position(|d| &d.doc_id == r) {
                    let above = order[..=pos].iter().filter(|d| relevant.contains(&d.doc_id)).count();
                    total += above as f64 / (pos + 1) as f64;
                }
            }
            let expected = total / relevant.len() as f64;
            prop_assert!((average_precision(&docs, &relevant).unwrap() - expected).abs() < 1e-12);
        }
    }
}
