use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{tokenize, IngestError, InteractionRecord, SplitAssignment, SplitLabel, TokenPolicy, Vocabulary};

/// Default cap on keywords kept per user or item, most recent reviews first.
pub const DEFAULT_KEYWORD_CAP: usize = 500;

/// Keyword ids of one review with their original token positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Review {
    pub words: Vec<u32>,
    pub positions: Vec<u32>,
}

impl Review {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Reverses word order; positions are mirrored so gaps are preserved.
    pub fn reversed(&self) -> Review {
        let last = self.positions.last().copied().unwrap_or(0);
        Review {
            words: self.words.iter().rev().copied().collect(),
            positions: self.positions.iter().rev().map(|p| last - p).collect(),
        }
    }
}

/// Per-user and per-item review keyword lists built from training records
/// only, oldest review first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocumentSet {
    pub users: BTreeMap<String, Vec<Review>>,
    pub items: BTreeMap<String, Vec<Review>>,
}

const DOCS_HEADER: &str = "#rgnn-docs\tv1";

impl DocumentSet {
    pub fn user(&self, id: &str) -> &[Review] {
        self.users.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn item(&self, id: &str) -> &[Review] {
        self.items.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{DOCS_HEADER}")?;
        for (kind, map) in [("U", &self.users), ("I", &self.items)] {
            for (id, reviews) in map {
                write!(w, "{kind}\t{id}\t")?;
                for (ri, r) in reviews.iter().enumerate() {
                    if ri > 0 {
                        w.write_all(b"|")?;
                    }
                    for (k, (word, pos)) in r.words.iter().zip(&r.positions).enumerate() {
                        if k > 0 {
                            w.write_all(b",")?;
                        }
                        write!(w, "{word}:{pos}")?;
                    }
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self, IngestError> {
        let bad = |n: usize, reason: &str| IngestError::BadFile {
            file: "documents.tsv".into(),
            reason: format!("line {n}: {reason}"),
        };
        let mut lines = r.lines();
        if lines.next().transpose()?.as_deref() != Some(DOCS_HEADER) {
            return Err(bad(1, "missing header"));
        }
        let mut out = DocumentSet::default();
        for (n, line) in lines.enumerate() {
            let n = n + 2;
            let line = line?;
            let mut cols = line.splitn(3, '\t');
            let (Some(kind), Some(id), Some(body)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad(n, "expected 3 columns"));
            };
            let mut reviews = Vec::new();
            for rtext in body.split('|') {
                let mut review = Review::default();
                for pair in rtext.split(',').filter(|p| !p.is_empty()) {
                    let (w, p) = pair.split_once(':').ok_or_else(|| bad(n, "expected word:pos"))?;
                    review.words.push(w.parse().map_err(|_| bad(n, "bad word id"))?);
                    review.positions.push(p.parse().map_err(|_| bad(n, "bad position"))?);
                }
                reviews.push(review);
            }
            let map = match kind {
                "U" => &mut out.users,
                "I" => &mut out.items,
                _ => return Err(bad(n, "entity kind must be U or I")),
            };
            map.insert(id.to_string(), reviews);
        }
        Ok(out)
    }
}

/// Builds documents from the training split. Each entity's reviews are
/// sorted by timestamp and only the most recent ones are kept, up to
/// `keyword_cap` keywords in total (a single over-long latest review is
/// truncated to the cap).
pub fn build_documents(
    records: &[InteractionRecord],
    split: &SplitAssignment,
    vocab: &Vocabulary,
    keyword_cap: usize,
) -> DocumentSet {
    type Timed = Vec<(i64, usize, Review)>;
    let mut users: BTreeMap<String, Timed> = BTreeMap::new();
    let mut items: BTreeMap<String, Timed> = BTreeMap::new();
    for (idx, (rec, label)) in records.iter().zip(&split.labels).enumerate() {
        if *label != SplitLabel::Train {
            continue;
        }
        let toks = tokenize(&rec.review_text, TokenPolicy::Vocabulary(vocab));
        let review = Review {
            words: toks.iter().map(|t| vocab.id(&t.word).expect("vocab word")).collect(),
            positions: toks.iter().map(|t| t.position).collect(),
        };
        let ts = rec.timestamp.unwrap_or(0);
        users
            .entry(rec.user_id.clone())
            .or_default()
            .push((ts, idx, review.clone()));
        items
            .entry(rec.item_id.clone())
            .or_default()
            .push((ts, idx, review));
    }
    let finish = |map: BTreeMap<String, Timed>| {
        map.into_iter()
            .map(|(id, mut reviews)| {
                reviews.sort_by_key(|(ts, idx, _)| (*ts, *idx));
                (id, cap_recent(reviews.into_iter().map(|(_, _, r)| r).collect(), keyword_cap))
            })
            .collect()
    };
    DocumentSet {
        users: finish(users),
        items: finish(items),
    }
}

fn cap_recent(reviews: Vec<Review>, cap: usize) -> Vec<Review> {
    let mut kept = Vec::new();
    let mut total = 0;
    for mut r in reviews.into_iter().rev() {
        if total + r.len() > cap {
            if kept.is_empty() {
                r.words.truncate(cap);
                r.positions.truncate(cap);
                kept.push(r);
            }
            break;
        }
        total += r.len();
        kept.push(r);
    }
    kept.reverse();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_vocabulary, StopWords, VocabConfig};

    fn rec(u: &str, i: &str, text: &str, ts: i64) -> InteractionRecord {
        InteractionRecord {
            user_id: u.into(),
            item_id: i.into(),
            rating: 4.0,
            review_text: text.into(),
            timestamp: Some(ts),
        }
    }

    #[test]
    fn only_training_text_enters() {
        let records = vec![
            rec("u1", "i1", "alpha beta", 2),
            rec("u1", "i2", "gamma delta", 1),
            rec("u2", "i1", "secret leak", 3),
        ];
        let split = SplitAssignment {
            seed: 0,
            labels: vec![SplitLabel::Train, SplitLabel::Train, SplitLabel::Test],
        };
        let vocab = build_vocabulary(
            ["alpha beta", "gamma delta", "secret leak"],
            &VocabConfig {
                min_count: 1,
                max_size: 100,
                stop_words: StopWords::none(),
            },
        )
        .unwrap();
        let docs = build_documents(&records, &split, &vocab, 500);
        let leak = [vocab.id("secret").unwrap(), vocab.id("leak").unwrap()];
        for reviews in docs.users.values().chain(docs.items.values()) {
            for r in reviews {
                assert!(r.words.iter().all(|w| !leak.contains(w)));
            }
        }
        assert!(!docs.users.contains_key("u2"));
        // Oldest first.
        assert_eq!(docs.user("u1")[0].words[0], vocab.id("gamma").unwrap());
        let mut buf = Vec::new();
        docs.write(&mut buf).unwrap();
        assert_eq!(DocumentSet::read(buf.as_slice()).unwrap(), docs);
    }

    #[test]
    fn cap_prefers_recent_reviews() {
        let r = |n: u32| Review {
            words: (0..n).collect(),
            positions: (0..n).collect(),
        };
        let kept = cap_recent(vec![r(3), r(4), r(2)], 6);
        assert_eq!(kept.iter().map(Review::len).collect::<Vec<_>>(), vec![4, 2]);
        let kept = cap_recent(vec![r(3), r(9)], 5);
        assert_eq!(kept.iter().map(Review::len).collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn reversal_mirrors_positions() {
        let r = Review {
            words: vec![7, 8, 9],
            positions: vec![1, 2, 5],
        };
        let rev = r.reversed();
        assert_eq!(rev.words, vec![9, 8, 7]);
        assert_eq!(rev.positions, vec![0, 3, 4]);
    }
}
