use std::collections::HashSet;

use super::Vocabulary;

const ENGLISH_STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "s", "same", "she",
    "should", "so", "some", "such", "t", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

/// Stop-word set applied before vocabulary lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn english() -> Self {
        Self::from_words(ENGLISH_STOP_WORDS.iter().copied())
    }

    pub fn none() -> Self {
        Self {
            words: HashSet::new(),
        }
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            words: words.into_iter().map(str::to_lowercase).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

impl Default for StopWords {
    fn default() -> Self {
        Self::english()
    }
}

/// Which cleaned tokens count as keywords.
#[derive(Clone, Copy, Debug)]
pub enum TokenPolicy<'a> {
    /// Every alphabetic token that is not a stop word (vocabulary counting).
    Open(&'a StopWords),
    /// Only tokens present in the vocabulary.
    Vocabulary(&'a Vocabulary),
}

impl TokenPolicy<'_> {
    fn accepts(&self, word: &str) -> bool {
        match self {
            TokenPolicy::Open(stop) => !stop.contains(word),
            TokenPolicy::Vocabulary(v) => v.id(word).is_some(),
        }
    }
}

/// A selected keyword and its index in the unfiltered token stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub position: u32,
}

/// Splits `text` into raw tokens (runs of alphanumerics and apostrophes),
/// each of which consumes one position. A raw token becomes a keyword when
/// its lowercased, apostrophe-free form is purely alphabetic and accepted by
/// `policy`. Dropped tokens still advance the position counter, so keyword
/// distances reflect the original text.
pub fn tokenize(text: &str, policy: TokenPolicy<'_>) -> Vec<Token> {
    let mut out = Vec::new();
    let raw = text
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| t.chars().any(char::is_alphanumeric));
    for (pos, tok) in raw.enumerate() {
        let word: String = tok
            .chars()
            .filter(|&c| c != '\'')
            .flat_map(char::to_lowercase)
            .collect();
        if word.is_empty() || !word.chars().all(char::is_alphabetic) {
            continue;
        }
        if policy.accepts(&word) {
            out.push(Token {
                word,
                position: pos as u32,
            });
        }
    }
    out
}
