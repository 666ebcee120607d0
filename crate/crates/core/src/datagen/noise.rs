//! Word-level perturbation of question text. Entity mentions are untouched.

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use super::QAItem;
use crate::error::{Result, VrnError};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub synonym_probability: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { synonym_probability: 0.0, drop_probability: 0.0, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (p, name) in [(self.synonym_probability, "synonym_probability"), (self.drop_probability, "drop_probability")] {
            if !(0.0..=1.0).contains(&p) {
                return Err(VrnError::Config(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.synonym_probability == 0.0 && self.drop_probability == 0.0
    }
}

const SYNONYMS: &[(&str, &[&str])] = &[
    ("films", &["movies", "pictures"]),
    ("movies", &["films", "pictures"]),
    ("film", &["movie", "picture"]),
    ("movie", &["film", "picture"]),
    ("directed", &["helmed"]),
    ("wrote", &["authored"]),
    ("starred", &["featured"]),
    ("acted", &["performed"]),
    ("what", &["which"]),
    ("which", &["what"]),
    ("released", &["issued"]),
    ("name", &["list"]),
    ("list", &["name"]),
    ("writers", &["screenwriters"]),
    ("actors", &["performers"]),
    ("kind", &["sort", "type"]),
    ("type", &["kind"]),
    ("genres", &["categories"]),
];

/// Every word that can appear through a synonym swap.
pub fn synonym_words() -> Vec<&'static str> {
    SYNONYMS.iter().flat_map(|(w, alts)| std::iter::once(*w).chain(alts.iter().copied())).collect()
}

fn synonyms(word: &str) -> Option<&'static [&'static str]> {
    SYNONYMS.iter().find(|(w, _)| *w == word).map(|(_, alts)| *alts)
}

/// Perturbs one item. Without a known mention every word may change.
/// `index` selects the item's random stream so the result does not depend
/// on how many other items are noised.
pub fn apply_noise(item: &QAItem, cfg: &NoiseConfig, index: u64) -> QAItem {
    if cfg.is_identity() {
        return item.clone();
    }
    let mut r = rng::child(cfg.seed, rng::stream::NOISE, index);
    let (ms, ml) = item.mention.unwrap_or((0, 0));
    let mut tokens = Vec::with_capacity(item.tokens.len());
    let mut new_start = ms;
    for (i, tok) in item.tokens.iter().enumerate() {
        if (ms..ms + ml).contains(&i) {
            if i == ms {
                new_start = tokens.len();
            }
            tokens.push(tok.clone());
            continue;
        }
        if r.gen_bool(cfg.drop_probability) {
            continue;
        }
        match synonyms(tok) {
            Some(alts) if r.gen_bool(cfg.synonym_probability) => tokens.push(alts.choose(&mut r).unwrap().to_string()),
            _ => tokens.push(tok.clone()),
        }
    }
    QAItem { tokens, mention: item.mention.map(|_| (new_start, ml)), ..item.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;

    fn item() -> QAItem {
        QAItem {
            tokens: "which films did lo vek direct".split(' ').map(String::from).collect(),
            mention: Some((3, 2)),
            source: Some(EntityId(4)),
            topic: Some(EntityId(4)),
            answers: vec![EntityId(1)],
            hops: 1,
            type_id: "director_to_movie".into(),
        }
    }

    #[test]
    fn zero_probabilities_are_identity() {
        assert_eq!(apply_noise(&item(), &NoiseConfig::default(), 0), item());
    }

    #[test]
    fn full_drop_keeps_only_entity() {
        let cfg = NoiseConfig { drop_probability: 1.0, ..Default::default() };
        let out = apply_noise(&item(), &cfg, 0);
        assert_eq!(out.tokens, vec!["lo", "vek"]);
        assert_eq!(out.mention, Some((0, 2)));
        assert_eq!(out.answers, item().answers);
    }

    #[test]
    fn seeded() {
        let cfg = NoiseConfig { synonym_probability: 0.5, drop_probability: 0.2, seed: 11 };
        assert_eq!(apply_noise(&item(), &cfg, 3), apply_noise(&item(), &cfg, 3));
        let swapped = apply_noise(&item(), &NoiseConfig { synonym_probability: 1.0, drop_probability: 0.0, seed: 11 }, 3);
        assert_eq!(swapped.tokens[0], "what");
        assert_ne!(swapped.tokens[1], "films");
        assert_eq!(&swapped.tokens[3..5], &["lo", "vek"]);
    }
}
