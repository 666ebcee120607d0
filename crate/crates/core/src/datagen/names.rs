//! Pseudo-word names that never collide with question wording.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::prelude::*;

use super::noise::synonym_words;
use super::templates::template_words;

pub const YEAR_RANGE: RangeInclusive<u32> = 1920..=2019;

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "dr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ei"];
const CODAS: [&str; 5] = ["", "", "n", "r", "s"];

const GENRES: [&str; 20] = [
    "drama", "comedy", "thriller", "horror", "romance", "western", "documentary", "animation", "fantasy", "mystery",
    "musical", "adventure", "crime", "war", "biography", "noir", "satire", "family", "sport", "history",
];
const LANGUAGES: [&str; 16] = [
    "english", "french", "german", "spanish", "italian", "japanese", "korean", "hindi", "russian", "mandarin",
    "swedish", "danish", "polish", "turkish", "greek", "dutch",
];

/// Hands out names whose words are unique across the graph, except for
/// person first names, which are shared.
pub struct NamePool {
    used_words: BTreeSet<String>,
    first_names: Vec<String>,
}

impl NamePool {
    pub fn new() -> Self {
        let mut used_words: BTreeSet<String> = template_words().into_iter().collect();
        used_words.extend(synonym_words().into_iter().map(str::to_owned));
        used_words.extend(GENRES.iter().chain(&LANGUAGES).map(|s| s.to_string()));
        Self { used_words, first_names: Vec::new() }
    }

    /// A fresh pseudo-word of 2-3 syllables.
    fn word(&mut self, rng: &mut impl Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for i in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
                if i + 1 == syllables {
                    w.push_str(CODAS.choose(rng).unwrap());
                }
            }
            if self.used_words.insert(w.clone()) {
                return w;
            }
        }
    }

    /// Movie title: 2-3 fresh words.
    pub fn title(&mut self, rng: &mut impl Rng) -> String {
        let k = rng.gen_range(2..=3);
        (0..k).map(|_| self.word(rng)).collect::<Vec<_>>().join(" ")
    }

    /// Person: a first name plus a fresh surname. The first `pool` people get
    /// fresh first names; later people reuse one of those. `pool == 0`
    /// makes every first name fresh.
    pub fn person(&mut self, pool: usize, rng: &mut impl Rng) -> String {
        let first = if pool == 0 || self.first_names.len() < pool {
            let w = self.word(rng);
            self.first_names.push(w.clone());
            w
        } else {
            self.first_names.choose(rng).unwrap().clone()
        };
        format!("{first} {}", self.word(rng))
    }

    fn listed(&mut self, list: &[&str], n: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut out: Vec<String> = list.iter().take(n).map(|s| s.to_string()).collect();
        while out.len() < n {
            let w = self.word(rng);
            out.push(w);
        }
        out
    }

    pub fn genres(&mut self, n: usize, rng: &mut impl Rng) -> Vec<String> {
        self.listed(&GENRES, n, rng)
    }

    pub fn languages(&mut self, n: usize, rng: &mut impl Rng) -> Vec<String> {
        self.listed(&LANGUAGES, n, rng)
    }
}

/// `n` distinct four-digit years in increasing order.
pub fn years(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let all: Vec<u32> = YEAR_RANGE.collect();
    let mut picked: Vec<u32> = all.choose_multiple(rng, n).copied().collect();
    picked.sort_unstable();
    picked.into_iter().map(|y| y.to_string()).collect()
}

pub fn max_years() -> usize {
    (YEAR_RANGE.end() - YEAR_RANGE.start() + 1) as usize
}
