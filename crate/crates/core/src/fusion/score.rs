use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::space::{generate_search_space, search_space_size, SearchSpaceSpec};
use crate::classify::PredictionList;
use crate::error::{Error, Result};
use crate::keys::ALPHABET_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Sum,
    Multiply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyScore {
    /// The classifier's probability for the key.
    Probability,
    /// Points by rank: the top guess earns 46, the next 45, and so on.
    Ldv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoringMethod {
    pub combiner: Combiner,
    pub key_score: KeyScore,
}

impl ScoringMethod {
    pub const MULTIPLY_PROBABILITY: Self = Self::new(Combiner::Multiply, KeyScore::Probability);
    pub const SUM_PROBABILITY: Self = Self::new(Combiner::Sum, KeyScore::Probability);
    pub const MULTIPLY_LDV: Self = Self::new(Combiner::Multiply, KeyScore::Ldv);
    pub const SUM_LDV: Self = Self::new(Combiner::Sum, KeyScore::Ldv);

    pub const fn new(combiner: Combiner, key_score: KeyScore) -> Self {
        Self { combiner, key_score }
    }
}

impl Default for ScoringMethod {
    fn default() -> Self {
        Self::MULTIPLY_PROBABILITY
    }
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.combiner {
            Combiner::Sum => "sum",
            Combiner::Multiply => "mult",
        };
        let k = match self.key_score {
            KeyScore::Probability => "prob",
            KeyScore::Ldv => "ldv",
        };
        write!(f, "{c}-{k}")
    }
}

impl FromStr for ScoringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (c, k) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("scoring method {s:?} is not <sum|mult>-<prob|ldv>")))?;
        let combiner = match c {
            "sum" => Combiner::Sum,
            "mult" | "multiply" => Combiner::Multiply,
            _ => return Err(Error::invalid(format!("unknown combiner {c:?}"))),
        };
        let key_score = match k {
            "prob" | "probability" => KeyScore::Probability,
            "ldv" => KeyScore::Ldv,
            _ => return Err(Error::invalid(format!("unknown key score {k:?}"))),
        };
        Ok(Self { combiner, key_score })
    }
}

impl Serialize for ScoringMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScoringMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How repeats confirmed by timing change a combined score.
pub trait BonusRule: fmt::Debug + Send + Sync {
    fn apply(&self, score: f64, repeats: usize, method: ScoringMethod) -> f64;
}

/// Adds a fixed increment per confirmed repeat to the final score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditiveBonus {
    pub ldv_increment: f64,
    pub probability_increment: f64,
}

impl Default for AdditiveBonus {
    fn default() -> Self {
        Self {
            ldv_increment: ALPHABET_SIZE as f64,
            probability_increment: 1.0,
        }
    }
}

impl BonusRule for AdditiveBonus {
    fn apply(&self, score: f64, repeats: usize, method: ScoringMethod) -> f64 {
        let step = match method.key_score {
            KeyScore::Ldv => self.ldv_increment,
            KeyScore::Probability => self.probability_increment,
        };
        score + step * repeats as f64
    }
}

pub const SAME_KEY_THRESHOLD: f64 = 0.15;

/// Same-key bonus: a repeated character earns the bonus when the observed
/// gap between the two keystrokes is at most `threshold` seconds.
#[derive(Debug, Clone)]
pub struct TimingBonus {
    /// Gap before keystroke `i + 1`, one per adjacent pair.
    pub timings: Vec<f64>,
    pub threshold: f64,
    pub rule: Arc<dyn BonusRule>,
}

impl TimingBonus {
    pub fn new(timings: Vec<f64>) -> Self {
        Self {
            timings,
            threshold: SAME_KEY_THRESHOLD,
            rule: Arc::new(AdditiveBonus::default()),
        }
    }

    fn check(&self, length: usize) -> Result<()> {
        if self.timings.len() + 1 != length {
            return Err(Error::invalid(format!(
                "{} timings for a {length}-character password",
                self.timings.len()
            )));
        }
        Ok(())
    }

    /// Positions `i` where the repeat `c[i] == c[i+1]` is confirmed.
    fn repeats<T: PartialEq>(&self, chars: &[T]) -> usize {
        chars
            .windows(2)
            .zip(&self.timings)
            .filter(|(w, &dt)| w[0] == w[1] && dt <= self.threshold)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassword {
    pub candidate: String,
    pub score: f64,
    pub method: ScoringMethod,
    pub bonus_applied: usize,
}

fn key_score(list: &PredictionList, key: char, kind: KeyScore) -> Result<f64> {
    match kind {
        KeyScore::Probability => list.probability_of(key),
        KeyScore::Ldv => list.rank_of(key).map(|r| (ALPHABET_SIZE - r) as f64),
    }
    .ok_or(Error::MissingPrediction(key))
}

fn combine(scores: impl Iterator<Item = f64>, combiner: Combiner) -> f64 {
    match combiner {
        Combiner::Sum => scores.fold(0.0, |a, s| a + s),
        Combiner::Multiply => scores.fold(1.0, |a, s| a * s),
    }
}

pub fn score_password(
    candidate: &str,
    predictions: &[PredictionList],
    method: ScoringMethod,
    bonus: Option<&TimingBonus>,
) -> Result<ScoredPassword> {
    let chars: Vec<char> = candidate.chars().collect();
    if chars.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} prediction lists for a {}-character candidate",
            predictions.len(),
            chars.len()
        )));
    }
    let per_key = chars
        .iter()
        .zip(predictions)
        .map(|(&c, list)| key_score(list, c, method.key_score))
        .collect::<Result<Vec<f64>>>()?;
    let mut score = combine(per_key.into_iter(), method.combiner);
    let mut bonus_applied = 0;
    if let Some(b) = bonus {
        b.check(chars.len())?;
        bonus_applied = b.repeats(&chars);
        score = b.rule.apply(score, bonus_applied, method);
    }
    Ok(ScoredPassword {
        candidate: candidate.to_owned(),
        score,
        method,
        bonus_applied,
    })
}

/// Per-position key scores for the keys of one search space.
struct ScoreTable {
    rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    fn new(keys: &[char], predictions: &[PredictionList], kind: KeyScore) -> Result<Self> {
        let rows = predictions
            .iter()
            .map(|list| keys.iter().map(|&k| key_score(list, k, kind)).collect())
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    fn score(&self, indices: &[usize], method: ScoringMethod, bonus: Option<&TimingBonus>) -> (f64, usize) {
        let base = combine(indices.iter().zip(&self.rows).map(|(&i, row)| row[i]), method.combiner);
        match bonus {
            Some(b) => {
                let repeats = b.repeats(indices);
                (b.rule.apply(base, repeats, method), repeats)
            }
            None => (base, 0),
        }
    }
}

/// Ranking of a search space against the true password.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// 1-based position of the truth; absent when the truth is outside the space.
    pub rank: Option<u128>,
    pub space_size: u128,
    /// `1 − rank / space_size`.
    pub reduction: Option<f64>,
    pub top_k: Vec<ScoredPassword>,
}

impl Ranking {
    pub fn truth_in_space(&self) -> bool {
        self.rank.is_some()
    }
}

// Orders candidates worst-first so a max-heap evicts the weakest entry.
struct Entry {
    score: f64,
    candidate: String,
    bonus: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.candidate.cmp(&other.candidate))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

fn check_predictions(spec: &SearchSpaceSpec, predictions: &[PredictionList], bonus: Option<&TimingBonus>) -> Result<()> {
    if predictions.len() != spec.length() {
        return Err(Error::invalid(format!(
            "{} prediction lists for password length {}",
            predictions.len(),
            spec.length()
        )));
    }
    if let Some(b) = bonus {
        b.check(spec.length())?;
    }
    Ok(())
}

/// Scores every candidate in the space and ranks `truth` among them.
///
/// Candidates are streamed; only the best `top_k` are kept in memory.
/// Higher scores rank first, equal scores in lexicographic order.
pub fn rank_passwords(
    spec: &SearchSpaceSpec,
    predictions: &[PredictionList],
    method: ScoringMethod,
    bonus: Option<&TimingBonus>,
    truth: &str,
    top_k: usize,
) -> Result<Ranking> {
    check_predictions(spec, predictions, bonus)?;
    let space_size = search_space_size(spec)?;
    let mut space = generate_search_space(spec);
    let keys = space.keys().to_vec();
    let table = ScoreTable::new(&keys, predictions, method.key_score)?;

    let truth_score = if spec.contains(truth) {
        let indices: Vec<usize> = truth
            .chars()
            .map(|c| keys.binary_search(&c).expect("truth uses space keys"))
            .collect();
        Some(table.score(&indices, method, bonus).0)
    } else {
        None
    };

    let mut ahead: u128 = 0;
    let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(top_k + 1);
    while let Some(indices) = space.next_indices() {
        let (score, repeats) = table.score(indices, method, bonus);
        if let Some(t) = truth_score {
            if score > t || (score == t && spell(&keys, indices).as_str() < truth) {
                ahead += 1;
            }
        }
        if top_k == 0 {
            continue;
        }
        if heap.len() == top_k {
            let worst = heap.peek().expect("heap is full");
            if score < worst.score || (score == worst.score && spell(&keys, indices) > worst.candidate) {
                continue;
            }
        }
        heap.push(Entry {
            score,
            candidate: spell(&keys, indices),
            bonus: repeats,
        });
        if heap.len() > top_k {
            heap.pop();
        }
    }

    let top_k = heap
        .into_sorted_vec()
        .into_iter()
        .map(|e| ScoredPassword {
            candidate: e.candidate,
            score: e.score,
            method,
            bonus_applied: e.bonus,
        })
        .collect();
    let rank = truth_score.map(|_| ahead + 1);
    Ok(Ranking {
        rank,
        space_size,
        reduction: rank.map(|l| 1.0 - l as f64 / space_size as f64),
        top_k,
    })
}

fn spell(keys: &[char], indices: &[usize]) -> String {
    indices.iter().map(|&i| keys[i]).collect()
}

/// Every candidate with its score, in generation (lexicographic) order.
pub fn score_space<'a>(
    spec: &SearchSpaceSpec,
    predictions: &'a [PredictionList],
    method: ScoringMethod,
    bonus: Option<&'a TimingBonus>,
) -> Result<impl Iterator<Item = ScoredPassword> + 'a> {
    check_predictions(spec, predictions, bonus)?;
    let mut space = generate_search_space(spec);
    let keys = space.keys().to_vec();
    let table = ScoreTable::new(&keys, predictions, method.key_score)?;
    Ok(std::iter::from_fn(move || {
        let indices = space.next_indices()?;
        let (score, bonus_applied) = table.score(indices, method, bonus);
        Some(ScoredPassword {
            candidate: spell(&keys, indices),
            score,
            method,
            bonus_applied,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::KeyProbability;
    use crate::keys::alphabet;
    use proptest::prelude::*;

    fn list(pairs: &[(char, f64)]) -> PredictionList {
        let mut entries: Vec<KeyProbability> = pairs
            .iter()
            .map(|&(key, probability)| KeyProbability { key, probability })
            .collect();
        let rest = (1.0 - pairs.iter().map(|p| p.1).sum::<f64>()).max(0.0);
        let others: Vec<char> = alphabet().into_iter().filter(|k| !pairs.iter().any(|p| p.0 == *k)).collect();
        for &key in &others {
            entries.push(KeyProbability {
                key,
                probability: rest / others.len() as f64,
            });
        }
        PredictionList::new(entries).unwrap()
    }

    // Probability-at-index table of the three-keystroke example.
    fn example_predictions() -> Vec<PredictionList> {
        vec![
            list(&[('a', 0.7), ('b', 0.2), ('c', 0.1)]),
            list(&[('a', 0.4), ('b', 0.5), ('c', 0.1)]),
            list(&[('a', 0.8), ('b', 0.1), ('c', 0.1)]),
        ]
    }

    fn spec(keys: &str, n: usize) -> SearchSpaceSpec {
        SearchSpaceSpec::new(keys.chars().collect(), n).unwrap()
    }

    #[test]
    fn product_of_probabilities() {
        let s = score_password("aba", &example_predictions(), ScoringMethod::MULTIPLY_PROBABILITY, None).unwrap();
        assert!((s.score - 0.28).abs() < 1e-12);
        assert_eq!(s.bonus_applied, 0);
    }

    #[test]
    fn certain_predictions_score_one() {
        let keys = alphabet();
        let preds: Vec<_> = "hello".chars().map(|c| PredictionList::one_hot(&keys, c)).collect();
        let s = score_password("hello", &preds, ScoringMethod::MULTIPLY_PROBABILITY, None).unwrap();
        assert_eq!(s.score, 1.0);
    }

    #[test]
    fn ldv_sum_with_repeat_bonus() {
        let keys = alphabet();
        let preds = vec![PredictionList::one_hot(&keys, 'a'); 2];
        let bonus = TimingBonus::new(vec![0.1]);
        let s = score_password("aa", &preds, ScoringMethod::SUM_LDV, Some(&bonus)).unwrap();
        assert_eq!(s.score, 138.0);
        assert_eq!(s.bonus_applied, 1);
        let slow = TimingBonus::new(vec![0.4]);
        assert_eq!(score_password("aa", &preds, ScoringMethod::SUM_LDV, Some(&slow)).unwrap().score, 92.0);
        // The threshold itself counts as a repeat.
        let edge = TimingBonus::new(vec![SAME_KEY_THRESHOLD]);
        let p = score_password("aa", &preds, ScoringMethod::MULTIPLY_PROBABILITY, Some(&edge)).unwrap();
        assert_eq!(p.score, 2.0);
    }

    #[test]
    fn malformed_inputs() {
        let preds = example_predictions();
        assert!(score_password("ab", &preds, ScoringMethod::SUM_PROBABILITY, None).is_err());
        let partial = vec![PredictionList::uniform(&['a', 'b']); 3];
        assert!(matches!(
            score_password("abc", &partial, ScoringMethod::SUM_PROBABILITY, None),
            Err(Error::MissingPrediction('c'))
        ));
        let bonus = TimingBonus::new(vec![0.1]);
        assert!(score_password("aba", &preds, ScoringMethod::SUM_PROBABILITY, Some(&bonus)).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            ScoringMethod::MULTIPLY_PROBABILITY,
            ScoringMethod::SUM_PROBABILITY,
            ScoringMethod::MULTIPLY_LDV,
            ScoringMethod::SUM_LDV,
        ] {
            assert_eq!(m.to_string().parse::<ScoringMethod>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<ScoringMethod>(&json).unwrap(), m);
        }
        assert!("div-prob".parse::<ScoringMethod>().is_err());
    }

    // Oracle: score all candidates, sort, find the truth.
    fn oracle_rank(spec: &SearchSpaceSpec, preds: &[PredictionList], method: ScoringMethod, truth: &str) -> usize {
        let mut all: Vec<ScoredPassword> = generate_search_space(spec)
            .map(|c| score_password(&c, preds, method, None).unwrap())
            .collect();
        all.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.candidate.cmp(&b.candidate)));
        all.iter().position(|s| s.candidate == truth).unwrap() + 1
    }

    #[test]
    fn example_rank_matches_oracle() {
        let s = spec("ab", 3);
        for method in [ScoringMethod::MULTIPLY_PROBABILITY, ScoringMethod::SUM_LDV] {
            let r = rank_passwords(&s, &example_predictions(), method, None, "aba", 6).unwrap();
            assert_eq!(r.rank, Some(oracle_rank(&s, &example_predictions(), method, "aba") as u128));
            assert_eq!(r.space_size, 6);
            assert_eq!(r.top_k.len(), 6);
        }
        let r = rank_passwords(&s, &example_predictions(), ScoringMethod::MULTIPLY_PROBABILITY, None, "aba", 2).unwrap();
        assert_eq!(r.rank, Some(1));
        assert_eq!(r.top_k[0].candidate, "aba");
        assert!((r.reduction.unwrap() - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn truth_outside_space() {
        let s = spec("ab", 3);
        let r = rank_passwords(&s, &example_predictions(), ScoringMethod::SUM_PROBABILITY, None, "abc", 3).unwrap();
        assert!(!r.truth_in_space());
        assert_eq!(r.reduction, None);
        assert_eq!(r.top_k.len(), 3);
    }

    #[test]
    fn uniform_predictions_rank_lexicographically() {
        let s = spec("abc", 4);
        let preds = vec![PredictionList::uniform(&alphabet()); 4];
        let all: Vec<String> = generate_search_space(&s).collect();
        for (i, truth) in all.iter().enumerate().step_by(7) {
            let r = rank_passwords(&s, &preds, ScoringMethod::MULTIPLY_PROBABILITY, None, truth, 0).unwrap();
            assert_eq!(r.rank, Some(i as u128 + 1));
        }
    }

    #[test]
    fn score_space_lists_everything() {
        let s = spec("ab", 3);
        let scores: Vec<ScoredPassword> =
            score_space(&s, &example_predictions(), ScoringMethod::SUM_PROBABILITY, None).unwrap().collect();
        assert_eq!(scores.len(), 6);
        assert!((scores[1].score - 2.0).abs() < 1e-12);
    }

    fn random_list(weights: &[f64]) -> PredictionList {
        let keys = alphabet();
        let total: f64 = weights.iter().sum();
        PredictionList::new(
            keys.iter()
                .zip(weights)
                .map(|(&key, w)| KeyProbability { key, probability: w / total })
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn ranking_matches_oracle(
            weights in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 46), 4),
            truth_idx in 0usize..36,
            ldv in any::<bool>(),
            top in 0usize..40,
        ) {
            let s = spec("e3k;", 4);
            let preds: Vec<_> = weights.iter().map(|w| random_list(w)).collect();
            let method = if ldv { ScoringMethod::SUM_LDV } else { ScoringMethod::MULTIPLY_PROBABILITY };
            let all: Vec<String> = generate_search_space(&s).collect();
            let truth = &all[truth_idx % all.len()];
            let r = rank_passwords(&s, &preds, method, None, truth, top).unwrap();
            prop_assert_eq!(r.rank, Some(oracle_rank(&s, &preds, method, truth) as u128));
            prop_assert_eq!(r.top_k.len(), top.min(all.len()));
            for w in r.top_k.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].candidate < w[1].candidate));
            }
        }

        #[test]
        fn one_hot_predictions_rank_first(truth_idx in 0usize..1000, n in 3usize..6) {
            let s = spec("q1;", n);
            let all: Vec<String> = generate_search_space(&s).collect();
            let truth = &all[truth_idx % all.len()];
            let preds: Vec<_> = truth.chars().map(|c| PredictionList::one_hot(&alphabet(), c)).collect();
            let r = rank_passwords(&s, &preds, ScoringMethod::MULTIPLY_PROBABILITY, None, truth, 1).unwrap();
            prop_assert_eq!(r.rank, Some(1));
            prop_assert_eq!(&r.top_k[0].candidate, truth);
        }

        #[test]
        fn multiply_scores_follow_position_permutations(
            weights in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 46), 3),
            perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            let preds: Vec<_> = weights.iter().map(|w| random_list(w)).collect();
            let permuted: Vec<_> = perm.iter().map(|&i| preds[i].clone()).collect();
            for candidate in generate_search_space(&spec("xyz", 3)) {
                let chars: Vec<char> = candidate.chars().collect();
                let moved: String = perm.iter().map(|&i| chars[i]).collect();
                let a = score_password(&candidate, &preds, ScoringMethod::MULTIPLY_PROBABILITY, None).unwrap().score;
                let b = score_password(&moved, &permuted, ScoringMethod::MULTIPLY_PROBABILITY, None).unwrap().score;
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
