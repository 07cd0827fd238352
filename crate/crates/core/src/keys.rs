//! Key alphabet and physical keyboard layout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of keys, ordered by character for deterministic iteration.
pub type KeySet = BTreeSet<char>;

/// Number of keys the acoustic classifier distinguishes.
pub const ALPHABET_SIZE: usize = 46;

const ROWS: [&str; 4] = ["1234567890-=", "qwertyuiop[]\\", "asdfghjkl;'", "zxcvbnm,./"];
const HOME_ROW: &str = "asdfjkl;";
const NEAR_HOME: &str = "qwertgvcxz][poiuhnm,./";

/// The 46 characters (letters, digits, `.=-,;'[]/\`) in sorted order.
pub fn alphabet() -> Vec<char> {
    let mut keys: Vec<char> = ROWS.iter().flat_map(|row| row.chars()).collect();
    keys.sort_unstable();
    keys
}

/// Spellings usable in file names for keys that cannot appear there.
pub fn key_name(key: char) -> String {
    match key {
        '.' => "period".into(),
        '=' => "equal".into(),
        '-' => "minus".into(),
        ',' => "comma".into(),
        ';' => "semicolon".into(),
        '\'' => "quote".into(),
        '[' => "lbracket".into(),
        ']' => "rbracket".into(),
        '/' => "slash".into(),
        '\\' => "backslash".into(),
        other => other.to_string(),
    }
}

/// Inverse of [`key_name`]; also accepts the bare character.
pub fn parse_key_name(name: &str) -> Option<char> {
    let key = match name {
        "period" => '.',
        "equal" => '=',
        "minus" => '-',
        "comma" => ',',
        "semicolon" => ';',
        "quote" => '\'',
        "lbracket" => '[',
        "rbracket" => ']',
        "slash" => '/',
        "backslash" => '\\',
        _ => {
            let mut chars = name.chars();
            let c = chars.next()?;
            if chars.next().is_some() {
                return None;
            }
            c
        }
    };
    Some(key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPosition {
    pub label: char,
    pub row: usize,
    pub col: usize,
}

/// Keys on a grid plus the rows a touch typist rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardLayout {
    keys: Vec<KeyPosition>,
    home_row: KeySet,
    near_home: KeySet,
}

impl KeyboardLayout {
    pub fn new(keys: Vec<KeyPosition>, home_row: KeySet, near_home: KeySet) -> Result<Self> {
        let mut labels = KeySet::new();
        for key in &keys {
            if !labels.insert(key.label) {
                return Err(Error::invalid(format!("duplicate key label {:?}", key.label)));
            }
        }
        if let Some(&k) = home_row.iter().find(|k| !labels.contains(k)) {
            return Err(Error::UnknownKey(k));
        }
        if let Some(&k) = near_home.iter().find(|k| !labels.contains(k)) {
            return Err(Error::UnknownKey(k));
        }
        if let Some(k) = home_row.intersection(&near_home).next() {
            return Err(Error::invalid(format!("{k:?} is both home row and near home")));
        }
        Ok(Self {
            keys,
            home_row,
            near_home,
        })
    }

    /// US layout restricted to the 46-key alphabet.
    pub fn us_qwerty() -> Self {
        let keys = ROWS
            .iter()
            .enumerate()
            .flat_map(|(row, chars)| {
                chars
                    .chars()
                    .enumerate()
                    .map(move |(col, label)| KeyPosition { label, row, col })
            })
            .collect();
        Self::new(keys, HOME_ROW.chars().collect(), NEAR_HOME.chars().collect())
            .expect("built-in layout is consistent")
    }

    pub fn keys(&self) -> &[KeyPosition] {
        &self.keys
    }

    pub fn home_row(&self) -> &KeySet {
        &self.home_row
    }

    pub fn near_home(&self) -> &KeySet {
        &self.near_home
    }

    pub fn contains(&self, key: char) -> bool {
        self.position(key).is_some()
    }

    pub fn position(&self, key: char) -> Option<&KeyPosition> {
        self.keys.iter().find(|k| k.label == key)
    }
}

impl Default for KeyboardLayout {
    fn default() -> Self {
        Self::us_qwerty()
    }
}
