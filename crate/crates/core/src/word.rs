use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_ALPHABET: usize = 36;

pub fn symbol_char(a: u8) -> char {
    std::char::from_digit(a as u32, MAX_ALPHABET as u32).expect("symbol out of range")
}

pub fn parse_symbol(c: char) -> Option<u8> {
    c.to_digit(MAX_ALPHABET as u32).map(|d| d as u8)
}

/// A finite word over `{0, ..., k-1}`, written as a digit string (`0-9a-z`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn concat(&self, other: &[u8]) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(other);
        Word(v)
    }

    pub fn max_symbol(&self) -> Option<u8> {
        self.0.iter().copied().max()
    }

    pub fn check_alphabet(&self, k: usize) -> Result<()> {
        match self.0.iter().find(|&&a| a as usize >= k) {
            Some(&a) => Err(Error::Malformed(format!(
                "symbol {} of word {} outside alphabet of size {}",
                a, self, k
            ))),
            None => Ok(()),
        }
    }

    /// True when `self` occurs in the bi-infinite periodic sequence `...ccc...`.
    pub fn occurs_in_periodic(&self, cycle: &[u8]) -> bool {
        if cycle.is_empty() {
            return false;
        }
        let p = cycle.len();
        (0..p).any(|start| {
            self.0
                .iter()
                .enumerate()
                .all(|(i, &a)| cycle[(start + i) % p] == a)
        })
    }
}

impl From<&[u8]> for Word {
    fn from(s: &[u8]) -> Self {
        Word(s.to_vec())
    }
}

impl From<Vec<u8>> for Word {
    fn from(s: Vec<u8>) -> Self {
        Word(s)
    }
}

impl AsRef<[u8]> for Word {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.0 {
            write!(f, "{}", symbol_char(a))?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| parse_symbol(c).ok_or_else(|| Error::Malformed(format!("bad symbol {c:?} in word {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lyndon words of length at most `max_len` over `k` symbols, in lexicographic order (Duval).
pub fn lyndon_words(k: u8, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if k == 0 || max_len == 0 {
        return out;
    }
    let mut w: Vec<u8> = vec![0];
    loop {
        out.push(Word(w.clone()));
        let m = w.len();
        while w.len() < max_len {
            let c = w[w.len() - m];
            w.push(c);
        }
        while let Some(&last) = w.last() {
            if last == k - 1 {
                w.pop();
            } else {
                break;
            }
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out
}

/// Rotation of `w` that is lexicographically least.
pub fn least_rotation(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    (0..n)
        .map(|i| w[i..].iter().chain(&w[..i]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Shortest `u` with `w = u^j`.
pub fn primitive_root(w: &[u8]) -> &[u8] {
    let n = w.len();
    for p in 1..=n {
        if n.is_multiple_of(p) && (p..n).all(|i| w[i] == w[i - p]) {
            return &w[..p];
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let w: Word = "01a9".parse().unwrap();
        assert_eq!(w.symbols(), &[0, 1, 10, 9]);
        assert_eq!(w.to_string(), "01a9");
        assert!("0-1".parse::<Word>().is_err());
    }

    #[test]
    fn lyndon_counts_match_necklace_formula() {
        // number of binary Lyndon words of length n: 2, 1, 2, 3, 6, 9
        let words = lyndon_words(2, 6);
        let mut counts = [0usize; 7];
        for w in &words {
            counts[w.len()] += 1;
        }
        assert_eq!(&counts[1..], &[2, 1, 2, 3, 6, 9]);
        for w in &words {
            assert_eq!(least_rotation(w.symbols()), w.0);
            assert_eq!(primitive_root(w.symbols()).len(), w.len());
        }
    }

    #[test]
    fn periodic_occurrence_wraps() {
        let w: Word = "101".parse().unwrap();
        assert!(w.occurs_in_periodic(&[0, 1]));
        assert!(!w.occurs_in_periodic(&[0, 0, 1]));
        assert_eq!(primitive_root(&[0, 1, 0, 1]), &[0, 1]);
    }
}
