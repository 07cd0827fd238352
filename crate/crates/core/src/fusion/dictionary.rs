use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::{KeySet, KeyboardLayout};
use crate::thermal::{keyset_distance, TypingStyle};

const SHIFTED: &str = "!@#$%^&*()_+{}|:\"<>?";
const UNSHIFTED: &str = "1234567890-=[]\\;',./";

/// The key pressed to type `c`, ignoring shift.
pub fn key_for_char(c: char) -> char {
    if c.is_ascii_uppercase() {
        return c.to_ascii_lowercase();
    }
    match SHIFTED.chars().position(|s| s == c) {
        Some(i) => UNSHIFTED.chars().nth(i).expect("tables align"),
        None => c,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub password: String,
    /// 1 for the most popular entry.
    pub popularity_rank: usize,
    pub key_set: KeySet,
    pub length: usize,
}

impl DictEntry {
    pub fn new(password: impl Into<String>, popularity_rank: usize) -> Self {
        let password = password.into();
        Self {
            key_set: password.chars().map(key_for_char).collect(),
            length: password.chars().count(),
            password,
            popularity_rank,
        }
    }
}

/// Passwords in decreasing popularity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    entries: Vec<DictEntry>,
}

impl Dictionary {
    /// Ranks follow iteration order; repeated passwords keep their first rank.
    pub fn from_passwords<I, S>(passwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::new();
        for p in passwords {
            let p = p.into();
            if p.is_empty() || !seen.insert(p.clone()) {
                continue;
            }
            entries.push(DictEntry::new(p, entries.len() + 1));
        }
        Self { entries }
    }

    /// One password per line, most popular first. Blank lines are skipped.
    pub fn from_reader(reader: impl BufRead) -> std::io::Result<Self> {
        let lines = reader.lines().collect::<std::io::Result<Vec<String>>>()?;
        Ok(Self::from_passwords(
            lines.into_iter().map(|l| l.trim_end_matches('\r').to_owned()),
        ))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub password: String,
    pub popularity_rank: usize,
    pub distance: usize,
}

/// Key set compared against dictionary entries. A touch typist's resting
/// fingers warm the home row, so those keys are assumed present.
pub fn attack_target(observed: &KeySet, typist: TypingStyle, layout: &KeyboardLayout) -> KeySet {
    match typist {
        TypingStyle::HuntAndPeck => observed.clone(),
        TypingStyle::TouchTyping => observed.union(layout.home_row()).copied().collect(),
    }
}

/// Entries of the given length, nearest key set first, then by popularity.
pub fn dictionary_attack(
    dictionary: &Dictionary,
    observed: &KeySet,
    length: usize,
    typist: TypingStyle,
    layout: &KeyboardLayout,
) -> Vec<RankedEntry> {
    let target = attack_target(observed, typist, layout);
    let mut ranked: Vec<RankedEntry> = dictionary
        .entries
        .iter()
        .filter(|e| e.length == length)
        .map(|e| RankedEntry {
            password: e.password.clone(),
            popularity_rank: e.popularity_rank,
            distance: keyset_distance(&e.key_set, &target),
        })
        .collect();
    ranked.sort_by_key(|e| (e.distance, e.popularity_rank));
    ranked
}

/// 1-based position of `truth` in a ranking.
pub fn position_of(ranking: &[RankedEntry], truth: &str) -> Option<usize> {
    ranking.iter().position(|e| e.password == truth).map(|i| i + 1)
}

/// Accumulates Top-N hits over many attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNEvaluator {
    pub cutoffs: Vec<usize>,
    pub hits: Vec<usize>,
    pub attempts: usize,
}

impl TopNEvaluator {
    pub fn new(cutoffs: Vec<usize>) -> Self {
        Self {
            hits: vec![0; cutoffs.len()],
            cutoffs,
            attempts: 0,
        }
    }

    pub fn record(&mut self, ranking: &[RankedEntry], truth: &str) {
        self.attempts += 1;
        if let Some(pos) = position_of(ranking, truth) {
            for (n, hit) in self.cutoffs.iter().zip(&mut self.hits) {
                if pos <= *n {
                    *hit += 1;
                }
            }
        }
    }

    /// `(N, accuracy)` for each cutoff.
    pub fn accuracy(&self) -> Vec<(usize, f64)> {
        self.cutoffs
            .iter()
            .zip(&self.hits)
            .map(|(&n, &h)| (n, if self.attempts == 0 { 0.0 } else { h as f64 / self.attempts as f64 }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout() -> KeyboardLayout {
        KeyboardLayout::us_qwerty()
    }

    fn keys(s: &str) -> KeySet {
        s.chars().collect()
    }

    #[test]
    fn shift_is_ignored() {
        assert_eq!(DictEntry::new("Pa$$", 1).key_set, keys("pa4"));
        assert_eq!(key_for_char('?'), '/');
        assert_eq!(key_for_char('"'), '\'');
    }

    #[test]
    fn unique_match_ranks_first() {
        let d = Dictionary::from_passwords(["password", "letmein", "dragon", "monkey", "qwerty"]);
        let r = dictionary_attack(&d, &keys("dragon"), 6, TypingStyle::HuntAndPeck, &layout());
        assert_eq!(r[0].password, "dragon");
        assert_eq!(r[0].distance, 0);
        assert_eq!(r.len(), 3);
        assert!(r[1].distance > 0);
    }

    #[test]
    fn parsing_skips_blanks_and_duplicates() {
        let d = Dictionary::from_reader("abc\r\n\nabc\nxyz\n".as_bytes()).unwrap();
        let words: Vec<(&str, usize)> = d.entries().iter().map(|e| (e.password.as_str(), e.popularity_rank)).collect();
        assert_eq!(words, [("abc", 1), ("xyz", 2)]);
        assert!(dictionary_attack(&d, &keys("abc"), 9, TypingStyle::HuntAndPeck, &layout()).is_empty());
    }

    #[test]
    fn equal_distances_keep_popularity_order() {
        let d = Dictionary::from_passwords(["abd", "abe", "abf", "abc"]);
        let r = dictionary_attack(&d, &keys("abz"), 3, TypingStyle::HuntAndPeck, &layout());
        let order: Vec<&str> = r.iter().map(|e| e.password.as_str()).collect();
        assert_eq!(order, ["abd", "abe", "abf", "abc"]);
    }

    #[test]
    fn touch_typing_adds_home_row() {
        let target = attack_target(&keys("xyz"), TypingStyle::TouchTyping, &layout());
        assert_eq!(target, keys("xyzasdfjkl;"));
        let d = Dictionary::from_passwords(["zxcv", "xyzz"]);
        let r = dictionary_attack(&d, &keys("xyz"), 4, TypingStyle::TouchTyping, &layout());
        let xyzz = r.iter().find(|e| e.password == "xyzz").unwrap();
        // Every home-row key is absent from the password.
        assert_eq!(xyzz.distance, layout().home_row().len());
    }

    // Random lowercase words; the oracle recomputes distances and sorts by
    // (distance, rank) from scratch.
    #[test]
    fn touch_typing_ranking_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let letters: Vec<char> = "qwertyuiopzxcvbnmasdfghjkl".chars().collect();
        let words: Vec<String> = (0..1000)
            .map(|_| {
                let n = rng.random_range(4..=8);
                (0..n).map(|_| letters[rng.random_range(0..letters.len())]).collect()
            })
            .collect();
        let d = Dictionary::from_passwords(words.clone());
        let lay = layout();
        let home = lay.home_row().clone();
        let mut tested = 0;
        for truth in d.entries().iter().filter(|e| e.key_set.is_disjoint(&home)).take(20) {
            let r = dictionary_attack(&d, &truth.key_set, truth.length, TypingStyle::TouchTyping, &lay);
            let target: KeySet = truth.key_set.union(&home).copied().collect();
            let mut oracle: Vec<(usize, usize, String)> = d
                .entries()
                .iter()
                .filter(|e| e.length == truth.length)
                .map(|e| (e.key_set.symmetric_difference(&target).count(), e.popularity_rank, e.password.clone()))
                .collect();
            oracle.sort();
            let got: Vec<(usize, usize, String)> =
                r.iter().map(|e| (e.distance, e.popularity_rank, e.password.clone())).collect();
            assert_eq!(got, oracle);
            let own = r.iter().find(|e| e.password == truth.password).unwrap();
            assert_eq!(own.distance, home.len());
            tested += 1;
        }
        assert!(tested > 0);
    }

    #[test]
    fn evaluator_counts_hits() {
        let d = Dictionary::from_passwords(["aaa", "aab", "abc"]);
        let mut eval = TopNEvaluator::new(vec![1, 2, 3]);
        let r = dictionary_attack(&d, &keys("ab"), 3, TypingStyle::HuntAndPeck, &layout());
        assert_eq!(position_of(&r, "aab"), Some(1));
        eval.record(&r, "aab");
        eval.record(&r, "abc");
        eval.record(&r, "zzz");
        assert_eq!(eval.hits, vec![1, 1, 2]);
        assert_eq!(eval.accuracy()[2], (3, 2.0 / 3.0));
    }
}
