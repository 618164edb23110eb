use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{
    build_documents, build_vocabulary, dedup_latest, split_dataset, DocumentSet, IngestError,
    InteractionRecord, SplitAssignment, SplitLabel, VocabConfig, Vocabulary, DEFAULT_KEYWORD_CAP,
};
use crate::seeds::fingerprint;

pub const FORMAT_TAG: &str = "rgnn-corpus v1";

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub vocab: VocabConfig,
    pub keyword_cap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            vocab: VocabConfig::default(),
            keyword_cap: DEFAULT_KEYWORD_CAP,
        }
    }
}

/// Dense row index for users or items seen in training.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityIndex {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl EntityIndex {
    pub fn from_ids(ids: impl IntoIterator<Item = String>) -> Self {
        let mut out = Self::default();
        for id in ids {
            if !out.index.contains_key(&id) {
                out.index.insert(id.clone(), out.ids.len());
                out.ids.push(id);
            }
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// A preprocessed dataset: deduplicated records, split, vocabulary and
/// training documents.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub records: Vec<InteractionRecord>,
    pub split: SplitAssignment,
    pub vocab: Vocabulary,
    pub documents: DocumentSet,
    pub users: EntityIndex,
    pub items: EntityIndex,
}

impl Corpus {
    /// Dedup, split with `split_seed`, then build vocabulary and documents
    /// from training records only.
    pub fn preprocess(
        records: Vec<InteractionRecord>,
        cfg: &CorpusConfig,
        split_seed: u64,
    ) -> Result<Self, IngestError> {
        let records = dedup_latest(records);
        let split = split_dataset(&records, split_seed)?;
        let train_texts = records
            .iter()
            .zip(&split.labels)
            .filter(|(_, l)| **l == SplitLabel::Train)
            .map(|(r, _)| r.review_text.as_str());
        let vocab = build_vocabulary(train_texts, &cfg.vocab)?;
        let documents = build_documents(&records, &split, &vocab, cfg.keyword_cap);
        Ok(Self::assemble(records, split, vocab, documents))
    }

    fn assemble(
        records: Vec<InteractionRecord>,
        split: SplitAssignment,
        vocab: Vocabulary,
        documents: DocumentSet,
    ) -> Self {
        let train = || {
            records
                .iter()
                .zip(&split.labels)
                .filter(|(_, l)| **l == SplitLabel::Train)
                .map(|(r, _)| r)
        };
        let users = EntityIndex::from_ids(train().map(|r| r.user_id.clone()));
        let items = EntityIndex::from_ids(train().map(|r| r.item_id.clone()));
        Self {
            records,
            split,
            vocab,
            documents,
            users,
            items,
        }
    }

    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        self.split.indices(label)
    }

    fn file_bytes(&self) -> std::io::Result<[(&'static str, Vec<u8>); 4]> {
        let mut records = Vec::new();
        writeln!(records, "#rgnn-records\tv1")?;
        for r in &self.records {
            let ts = r.timestamp.map(|t| t.to_string()).unwrap_or_default();
            writeln!(records, "{}\t{}\t{}\t{ts}", r.user_id, r.item_id, r.rating)?;
        }
        let mut split = Vec::new();
        self.split.write_tsv(&self.records, &mut split)?;
        let mut vocab = Vec::new();
        self.vocab.write_tsv(&mut vocab)?;
        let mut docs = Vec::new();
        self.documents.write(&mut docs)?;
        Ok([
            ("records.tsv", records),
            ("split.tsv", split),
            ("vocab.tsv", vocab),
            ("documents.tsv", docs),
        ])
    }

    /// Content hash over the serialized corpus files.
    pub fn fingerprint(&self) -> String {
        let files = self.file_bytes().expect("in-memory write");
        let joined: Vec<u8> = files.iter().flat_map(|(_, b)| b.iter().copied()).collect();
        fingerprint(&joined)
    }

    pub fn save(&self, dir: &Path) -> Result<(), IngestError> {
        fs::create_dir_all(dir)?;
        let files = self.file_bytes()?;
        let joined: Vec<u8> = files.iter().flat_map(|(_, b)| b.iter().copied()).collect();
        for (name, bytes) in &files {
            fs::write(dir.join(name), bytes)?;
        }
        let meta = format!(
            "format={FORMAT_TAG}\nfingerprint={}\nrecords={}\nusers={}\nitems={}\nvocab={}\n",
            fingerprint(&joined),
            self.records.len(),
            self.users.len(),
            self.items.len(),
            self.vocab.len()
        );
        fs::write(dir.join("corpus.txt"), meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, IngestError> {
        let meta = fs::read_to_string(dir.join("corpus.txt"))?;
        let bad = |file: &str, reason: String| IngestError::BadFile {
            file: file.into(),
            reason,
        };
        if !meta.lines().any(|l| l == format!("format={FORMAT_TAG}")) {
            return Err(bad("corpus.txt", "missing or unsupported format tag".into()));
        }
        let open = |name: &str| -> Result<BufReader<fs::File>, IngestError> {
            Ok(BufReader::new(fs::File::open(dir.join(name))?))
        };

        let mut records = Vec::new();
        let mut lines = open("records.tsv")?.lines();
        if lines.next().transpose()?.as_deref() != Some("#rgnn-records\tv1") {
            return Err(bad("records.tsv", "missing header".into()));
        }
        for (n, line) in lines.enumerate() {
            let line = line?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("records.tsv", format!("line {}: expected 4 columns", n + 2)));
            }
            records.push(InteractionRecord {
                user_id: cols[0].to_string(),
                item_id: cols[1].to_string(),
                rating: cols[2]
                    .parse()
                    .map_err(|e| bad("records.tsv", format!("line {}: {e}", n + 2)))?,
                review_text: String::new(),
                timestamp: if cols[3].is_empty() {
                    None
                } else {
                    Some(
                        cols[3]
                            .parse()
                            .map_err(|e| bad("records.tsv", format!("line {}: {e}", n + 2)))?,
                    )
                },
            });
        }
        let split = SplitAssignment::read_tsv(&records, open("split.tsv")?)?;
        let vocab = Vocabulary::read_tsv(open("vocab.tsv")?)?;
        let documents = DocumentSet::read(open("documents.tsv")?)?;
        let corpus = Self::assemble(records, split, vocab, documents);

        if let Some(expected) = meta.lines().find_map(|l| l.strip_prefix("fingerprint=")) {
            let actual = corpus.fingerprint();
            if actual != expected {
                return Err(bad(
                    "corpus.txt",
                    format!("fingerprint mismatch: files hash to {actual}, manifest says {expected}"),
                ));
            }
        }
        Ok(corpus)
    }
}
