//! Normalized Levenshtein similarity and distance over Unicode scalar values.

use std::borrow::Cow;

use crate::scalar::Scalar;

fn fold(s: &str, case_fold: bool) -> Cow<'_, str> {
    if case_fold && s.chars().any(char::is_uppercase) {
        Cow::Owned(s.to_lowercase())
    } else {
        Cow::Borrowed(s)
    }
}

/// Unit-cost edit distance between two strings, counted in chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// `1 - lev(a, b) / max(|a|, |b|)`, or 1 when both strings are empty.
pub fn nls<T: Scalar>(a: &str, b: &str, case_fold: bool) -> T {
    T::one() - nld(a, b, case_fold)
}

/// Normalized Levenshtein distance, in `[0, 1]`.
pub fn nld<T: Scalar>(a: &str, b: &str, case_fold: bool) -> T {
    let a = fold(a, case_fold);
    let b = fold(b, case_fold);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return T::zero();
    }
    T::ratio(levenshtein(&a, &b), longest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Plain Wagner-Fischer table, kept separate from the crate-backed path.
    fn dp_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in table.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            table[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = table[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                table[i][j] = sub.min(table[i - 1][j] + 1).min(table[i][j - 1] + 1);
            }
        }
        table[a.len()][b.len()]
    }

    #[test]
    fn hand_cases() {
        assert_eq!(nls::<f64>("2016", "2016", true), 1.0);
        assert_eq!(nls::<f64>("", "abc", true), 0.0);
        assert_eq!(nls::<f64>("", "", true), 1.0);
        assert_eq!(nls::<f64>("Republican", "Republlican", true), 1.0 - 1.0 / 11.0);
        assert!((nls::<f64>("Republican", "Republlican", true) - 0.9091).abs() < 1e-4);
    }

    #[test]
    fn case_folding_flag() {
        assert_eq!(nls::<f64>("Seattle", "SEATTLE", true), 1.0);
        assert_eq!(nls::<f64>("ab", "AB", false), 0.0);
    }

    #[test]
    fn counts_chars_not_bytes() {
        assert_eq!(levenshtein("café", "cafe"), 1);
        assert_eq!(nld::<f64>("é", "e", false), 1.0);
    }

    #[test]
    fn single_precision() {
        let s: f32 = nls("abc", "abd", true);
        assert!((s - 2.0 / 3.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn matches_dp_oracle(a in "\\PC{0,12}", b in "\\PC{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), dp_distance(&a, &b));
        }

        #[test]
        fn symmetric_and_bounded(a in "[a-zA-Z0-9 ]{0,16}", b in "[a-zA-Z0-9 ]{0,16}") {
            let ab: f64 = nls(&a, &b, true);
            let ba: f64 = nls(&b, &a, true);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(nls::<f64>(&a, &a, false), 1.0);
        }
    }
}
