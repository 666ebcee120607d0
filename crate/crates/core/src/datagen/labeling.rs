//! Greedy entity bracketing: scanning left to right, the longest entity name
//! starting at the current word is consumed first, otherwise a plain word.

use std::collections::HashMap;

use crate::kg::{tokenize, EntityId, KnowledgeGraph};

/// Tokenized entity names indexed by their first word.
#[derive(Clone, Debug, Default)]
pub struct EntityMatcher {
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

/// Result of bracketing one text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeled {
    /// Words with every matched name wrapped in square brackets.
    pub text: String,
    /// Index (into the name list) of each bracketed name, left to right.
    pub matches: Vec<usize>,
    /// Word span `(start, len)` of each match.
    pub spans: Vec<(usize, usize)>,
}

impl Labeled {
    /// More than one entity was bracketed.
    pub fn ambiguous(&self) -> bool {
        self.matches.len() > 1
    }
}

impl EntityMatcher {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        let mut by_first: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            let toks = tokenize(n.as_ref());
            if let Some(first) = toks.first() {
                by_first.entry(first.clone()).or_default().push((toks, i));
            }
        }
        for list in by_first.values_mut() {
            // longest first; equal lengths keep the lower index
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        }
        Self { by_first }
    }

    /// Matcher over every entity of a graph; match indices are entity ids.
    pub fn for_graph(g: &KnowledgeGraph) -> Self {
        let names: Vec<&str> = g.entities().map(|e| g.entity_name(e)).collect();
        Self::new(&names)
    }

    pub fn label_tokens<S: AsRef<str>>(&self, words: &[S]) -> Labeled {
        let mut out = Vec::with_capacity(words.len());
        let mut matches = Vec::new();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let hit = self.by_first.get(words[i].as_ref()).and_then(|cands| {
                cands.iter().find(|(toks, _)| {
                    toks.len() <= words.len() - i && toks.iter().zip(&words[i..]).all(|(a, b)| a == b.as_ref())
                })
            });
            match hit {
                Some((toks, idx)) => {
                    out.push(format!("[{}]", toks.join(" ")));
                    matches.push(*idx);
                    spans.push((i, toks.len()));
                    i += toks.len();
                }
                None => {
                    out.push(words[i].as_ref().to_owned());
                    i += 1;
                }
            }
        }
        Labeled { text: out.join(" "), matches, spans }
    }

    pub fn label(&self, text: &str) -> Labeled {
        self.label_tokens(&tokenize(text))
    }

    /// The single entity found in `words`, if exactly one is.
    pub fn unique_entity<S: AsRef<str>>(&self, words: &[S]) -> Option<(EntityId, (usize, usize))> {
        let l = self.label_tokens(words);
        (l.matches.len() == 1).then(|| (EntityId(l.matches[0]), l.spans[0]))
    }
}

/// Brackets entity mentions in `text` using the given names.
pub fn label_entities<S: AsRef<str>>(text: &str, names: &[S]) -> Labeled {
    EntityMatcher::new(names).label(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins() {
        let l = label_entities("who directed the road", &["the road", "road"]);
        assert_eq!(l.text, "who directed [the road]");
        assert_eq!(l.matches, vec![0]);
        assert!(!l.ambiguous());
    }

    #[test]
    fn no_name_leaves_text_unchanged() {
        let l = label_entities("who directed it", &["the road"]);
        assert_eq!(l.text, "who directed it");
        assert!(l.matches.is_empty());
    }

    #[test]
    fn two_names_are_ambiguous() {
        let l = label_entities("did alma pike meet bo ren", &["alma pike", "bo ren"]);
        assert_eq!(l.text, "did [alma pike] meet [bo ren]");
        assert!(l.ambiguous());
        assert_eq!(l.spans, vec![(1, 2), (4, 2)]);
    }

    #[test]
    fn greedy_left_to_right() {
        // the earlier start wins even though a longer name begins later
        let l = label_entities("x y z w", &["x y", "y z w"]);
        assert_eq!(l.text, "[x y] z w");
    }
}
