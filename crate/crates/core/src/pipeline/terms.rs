//! Rule-based semantic term extraction: stoplist, lemma table, suffix tags.

use std::collections::{HashMap, HashSet};

use crate::term_gen::TermSequence;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "in", "on", "at", "of", "to", "with", "and", "or", "is", "are", "was", "were", "be", "been",
    "it", "its", "this", "that", "these", "those", "there", "their", "his", "her", "he", "she", "they", "them", "some",
    "for", "from", "by", "as", "into", "onto", "near", "next", "beside", "behind", "over", "under", "up", "down",
    "while", "very", "has", "have", "had", "who", "which", "what", "out", "off", "top", "front", "side",
];

const VERBS: &[&str] = &[
    "sit", "sits", "stand", "stands", "run", "runs", "ride", "rides", "eat", "eats", "hold", "holds", "walk", "walks",
    "play", "plays", "fly", "flies", "lay", "lays", "lie", "lies", "look", "looks", "swim", "swims", "jump", "jumps",
    "throw", "throws", "catch", "catches", "wear", "wears", "drive", "drives",
];

#[derive(Debug, Clone)]
pub struct TermExtractor {
    pub stoplist: HashSet<String>,
    pub lemmas: HashMap<String, String>,
    pub verbs: HashSet<String>,
    pub max_terms: usize,
}

impl TermExtractor {
    pub fn new(max_terms: usize) -> Self {
        Self {
            stoplist: STOPWORDS.iter().map(|s| s.to_string()).collect(),
            lemmas: HashMap::new(),
            verbs: VERBS.iter().map(|s| s.to_string()).collect(),
            max_terms,
        }
    }

    pub fn with_stoplist<I: IntoIterator<Item = S>, S: Into<String>>(mut self, words: I) -> Self {
        self.stoplist = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_extra_stopwords(mut self, words: &[String]) -> Self {
        self.stoplist.extend(words.iter().map(|w| w.to_lowercase()));
        self
    }

    pub fn with_lemmas(mut self, lemmas: HashMap<String, String>) -> Self {
        self.lemmas = lemmas;
        self
    }

    fn tag(&self, word: &str) -> &'static str {
        let suffixed = word.len() >= 5 && (word.ends_with("ing") || word.ends_with("ed"));
        if suffixed || self.verbs.contains(word) {
            "VERB"
        } else {
            "NOUN"
        }
    }

    /// May return an empty sequence when every token is filtered out.
    pub fn extract(&self, tokens: &[String]) -> TermSequence {
        let terms = tokens
            .iter()
            .map(|t| t.to_lowercase())
            .filter(|t| t.chars().all(char::is_alphanumeric) && !t.is_empty())
            .filter(|t| !self.stoplist.contains(t))
            .map(|t| self.lemmas.get(&t).cloned().unwrap_or(t))
            .map(|t| {
                let tag = self.tag(&t);
                format!("{t}_{tag}")
            })
            .take(self.max_terms)
            .collect();
        TermSequence(terms)
    }

    /// Dataset terms pass through untouched; otherwise they are extracted.
    pub fn terms_for(&self, given: Option<&[String]>, caption: &[String]) -> TermSequence {
        match given {
            Some(terms) => TermSequence(terms.to_vec()),
            None => self.extract(caption),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    #[test]
    fn traces_the_kitchen_example() {
        let ex = TermExtractor::new(20).with_stoplist(["a", "in", "beside"]);
        let t = ex.extract(&tokenize("A girl standing in a kitchen beside a refrigerator."));
        assert_eq!(
            t.0,
            vec!["girl_NOUN", "standing_VERB", "kitchen_NOUN", "refrigerator_NOUN"]
        );
    }

    #[test]
    fn only_stopwords_is_empty() {
        let ex = TermExtractor::new(20);
        assert!(ex.extract(&tokenize("a the in on")).is_empty());
    }

    #[test]
    fn passthrough_and_lemmas_and_cap() {
        let ex = TermExtractor::new(2).with_lemmas([("dogs".to_string(), "dog".to_string())].into());
        let given = vec!["x_NOUN".to_string()];
        assert_eq!(ex.terms_for(Some(&given), &tokenize("ignored words")).0, given);
        assert_eq!(
            ex.extract(&tokenize("dogs sits red car")).0,
            vec!["dog_NOUN", "sits_VERB"]
        );
        assert_eq!(ex.extract(&tokenize("bed")).0, vec!["bed_NOUN"]);
    }
}
