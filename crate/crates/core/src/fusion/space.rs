use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::KeySet;

/// Which strings over the key set count as candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceMode {
    /// Every key appears at least once.
    #[default]
    Exact,
    /// Any string over the key set. An extension for key sets inflated by
    /// thermal false positives, where the exact space would be empty.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceSpec {
    key_set: KeySet,
    length: usize,
    #[serde(default)]
    mode: SpaceMode,
}

impl SearchSpaceSpec {
    pub fn new(key_set: KeySet, length: usize) -> Result<Self> {
        Self::with_mode(key_set, length, SpaceMode::Exact)
    }

    pub fn with_mode(key_set: KeySet, length: usize, mode: SpaceMode) -> Result<Self> {
        if key_set.is_empty() {
            return Err(Error::invalid("key set is empty"));
        }
        if length == 0 {
            return Err(Error::invalid("password length must be positive"));
        }
        Ok(Self { key_set, length, mode })
    }

    pub fn key_set(&self) -> &KeySet {
        &self.key_set
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn mode(&self) -> SpaceMode {
        self.mode
    }

    /// Whether `candidate` belongs to the space.
    pub fn contains(&self, candidate: &str) -> bool {
        let chars: Vec<char> = candidate.chars().collect();
        if chars.len() != self.length || !chars.iter().all(|c| self.key_set.contains(c)) {
            return false;
        }
        match self.mode {
            SpaceMode::Exact => self.key_set.iter().all(|k| chars.contains(k)),
            SpaceMode::AtMost => true,
        }
    }
}

fn binomial(n: u32, k: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(i128::from(n - i))? / i128::from(i + 1);
    }
    Some(acc)
}

/// Number of candidates: `Σ_k (−1)^k·C(m,k)·(m−k)^n` for the exact space,
/// `m^n` for the at-most space.
pub fn search_space_size(spec: &SearchSpaceSpec) -> Result<u128> {
    let m = spec.key_set.len() as u32;
    let n = u32::try_from(spec.length).map_err(|_| Error::SpaceOverflow)?;
    if spec.mode == SpaceMode::AtMost {
        return u128::from(m).checked_pow(n).ok_or(Error::SpaceOverflow);
    }
    if m > n {
        return Ok(0);
    }
    let mut total: i128 = 0;
    for k in 0..=m {
        let term = binomial(m, k)
            .and_then(|c| i128::from(m - k).checked_pow(n).and_then(|p| c.checked_mul(p)))
            .ok_or(Error::SpaceOverflow)?;
        total = if k % 2 == 0 { total.checked_add(term) } else { total.checked_sub(term) }
            .ok_or(Error::SpaceOverflow)?;
    }
    u128::try_from(total).map_err(|_| Error::SpaceOverflow)
}

/// Lexicographic stream of the candidates in a search space.
///
/// Advances like an odometer over key indices, skipping any prefix that can
/// no longer cover the missing keys in the positions left.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    keys: Vec<char>,
    mode: SpaceMode,
    digits: Vec<usize>,
    counts: Vec<usize>,
    missing: usize,
    started: bool,
    done: bool,
}

pub fn generate_search_space(spec: &SearchSpaceSpec) -> SearchSpace {
    SearchSpace::new(spec)
}

impl SearchSpace {
    pub fn new(spec: &SearchSpaceSpec) -> Self {
        let keys: Vec<char> = spec.key_set.iter().copied().collect();
        let m = keys.len();
        Self {
            counts: vec![0; m],
            missing: m,
            digits: vec![0; spec.length],
            keys,
            mode: spec.mode,
            started: false,
            done: false,
        }
    }

    pub fn keys(&self) -> &[char] {
        &self.keys
    }

    fn feasible(&self, position: usize, digit: usize) -> bool {
        if self.mode == SpaceMode::AtMost {
            return true;
        }
        let missing = self.missing - usize::from(self.counts[digit] == 0);
        missing <= self.digits.len() - position - 1
    }

    fn place(&mut self, position: usize, digit: usize) {
        if self.counts[digit] == 0 {
            self.missing -= 1;
        }
        self.counts[digit] += 1;
        self.digits[position] = digit;
    }

    fn remove(&mut self, position: usize) {
        let digit = self.digits[position];
        self.counts[digit] -= 1;
        if self.counts[digit] == 0 {
            self.missing += 1;
        }
    }

    /// Smallest valid suffix from `from` onward.
    fn complete(&mut self, from: usize) -> bool {
        for position in from..self.digits.len() {
            match (0..self.keys.len()).find(|&d| self.feasible(position, d)) {
                Some(d) => self.place(position, d),
                None => return false,
            }
        }
        true
    }

    fn advance(&mut self) -> bool {
        for position in (0..self.digits.len()).rev() {
            self.remove(position);
            let current = self.digits[position];
            if let Some(d) = (current + 1..self.keys.len()).find(|&d| self.feasible(position, d)) {
                self.place(position, d);
                return self.complete(position + 1);
            }
        }
        false
    }

    /// Key indices of the next candidate, without building a string.
    pub fn next_indices(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        let ok = if self.started {
            self.advance()
        } else {
            self.started = true;
            self.complete(0)
        };
        if ok {
            Some(&self.digits)
        } else {
            self.done = true;
            None
        }
    }

    pub fn spell(&self, indices: &[usize]) -> String {
        indices.iter().map(|&i| self.keys[i]).collect()
    }
}

impl Iterator for SearchSpace {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        self.next_indices()?;
        Some(self.spell(&self.digits))
    }
}
