use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use super::{tokenize, IngestError, StopWords, TokenPolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct VocabConfig {
    /// Minimum number of documents a word must appear in.
    pub min_count: u64,
    pub max_size: usize,
    pub stop_words: StopWords,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            max_size: 20_000,
            stop_words: StopWords::english(),
        }
    }
}

/// Retained keywords with contiguous ids `0..len`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    freq: Vec<u64>,
    index: HashMap<String, u32>,
}

const VOCAB_HEADER: &str = "#rgnn-vocab\tv1";

impl Vocabulary {
    pub fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let (words, freq) = entries.into_iter().unzip();
        Self { words, freq, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// Corpus frequency of a word id.
    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.freq.get(id as usize).copied()
    }

    pub fn write_tsv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{VOCAB_HEADER}")?;
        for (i, (word, f)) in self.words.iter().zip(&self.freq).enumerate() {
            writeln!(w, "{word}\t{i}\t{f}")?;
        }
        Ok(())
    }

    pub fn read_tsv(r: impl BufRead) -> Result<Self, IngestError> {
        let bad = |reason: String| IngestError::BadFile {
            file: "vocab.tsv".into(),
            reason,
        };
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h == VOCAB_HEADER => {}
            other => return Err(bad(format!("unexpected header {other:?}"))),
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let mut cols = line.split('\t');
            let (Some(word), Some(id), Some(freq)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad(format!("line {}: expected 3 columns", n + 2)));
            };
            let id: usize = id.parse().map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
            if id != entries.len() {
                return Err(bad(format!("line {}: ids must be contiguous", n + 2)));
            }
            let freq: u64 = freq.parse().map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
            entries.push((word.to_string(), freq));
        }
        Ok(Self::from_entries(entries))
    }
}

/// Counts keywords over training texts and keeps those whose document
/// frequency reaches `min_count`, ranked by corpus frequency (ties broken
/// lexicographically) and truncated to `max_size`.
pub fn build_vocabulary<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    cfg: &VocabConfig,
) -> Result<Vocabulary, IngestError> {
    let mut corpus_freq: HashMap<String, u64> = HashMap::new();
    let mut doc_freq: HashMap<String, u64> = HashMap::new();
    let mut any = false;
    for text in texts {
        any = true;
        let mut seen = HashSet::new();
        for tok in tokenize(text, TokenPolicy::Open(&cfg.stop_words)) {
            *corpus_freq.entry(tok.word.clone()).or_default() += 1;
            if seen.insert(tok.word.clone()) {
                *doc_freq.entry(tok.word).or_default() += 1;
            }
        }
    }
    if !any {
        return Err(IngestError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, u64)> = corpus_freq
        .into_iter()
        .filter(|(w, _)| doc_freq[w] >= cfg.min_count)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cfg.max_size);
    if ranked.is_empty() {
        return Err(IngestError::EmptyVocabulary {
            min_count: cfg.min_count,
        });
    }
    Ok(Vocabulary::from_entries(ranked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn cfg(min_count: u64, max_size: usize) -> VocabConfig {
        VocabConfig {
            min_count,
            max_size,
            stop_words: StopWords::none(),
        }
    }

    /// Independent count: split on spaces, tally, rank, truncate.
    fn brute_force(corpus: &[&str], min_count: u64, max: usize) -> Vec<(String, u64)> {
        let mut cf: BTreeMap<&str, u64> = BTreeMap::new();
        let mut df: BTreeMap<&str, u64> = BTreeMap::new();
        for doc in corpus {
            let mut uniq: Vec<&str> = doc.split(' ').collect();
            for w in &uniq {
                *cf.entry(w).or_default() += 1;
            }
            uniq.sort();
            uniq.dedup();
            for w in uniq {
                *df.entry(w).or_default() += 1;
            }
        }
        let mut v: Vec<(String, u64)> = cf
            .into_iter()
            .filter(|(w, _)| df[w] >= min_count)
            .map(|(w, c)| (w.to_string(), c))
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(max);
        v
    }

    #[test]
    fn small_corpus_counts() {
        let corpus = ["a b", "a c"];
        let v = build_vocabulary(corpus, &cfg(1, 10)).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.frequency(v.id("a").unwrap()), Some(2));
        let expect = brute_force(&corpus, 1, 10);
        let got: Vec<(String, u64)> = (0..v.len() as u32)
            .map(|i| (v.word(i).unwrap().to_string(), v.frequency(i).unwrap()))
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn threshold_excluding_everything_is_fatal() {
        let err = build_vocabulary(["a b", "a c"], &cfg(3, 10)).unwrap_err();
        assert!(matches!(err, IngestError::EmptyVocabulary { min_count: 3 }));
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let v = build_vocabulary(["a b", "a c"], &cfg(1, 1)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.word(0), Some("a"));
        assert_eq!(brute_force(&["a b", "a c"], 1, 1), vec![("a".to_string(), 2)]);
    }

    #[test]
    fn empty_corpus_is_fatal() {
        let none: [&str; 0] = [];
        assert!(matches!(build_vocabulary(none, &cfg(1, 1)), Err(IngestError::EmptyCorpus)));
    }

    #[test]
    fn tsv_round_trip() {
        let v = build_vocabulary(["x y y z", "y z w"], &cfg(1, 10)).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("#rgnn-vocab\tv1\ny\t0\t3\n"));
        assert_eq!(Vocabulary::read_tsv(buf.as_slice()).unwrap(), v);
    }
}
