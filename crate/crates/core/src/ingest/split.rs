use std::fmt;
use std::io::{BufRead, Write};

use super::{IngestError, InteractionRecord};
use crate::seeds::stable_hash;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitLabel {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Train => "train",
            SplitLabel::Val => "val",
            SplitLabel::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "val" | "validation" => Ok(SplitLabel::Val),
            "test" => Ok(SplitLabel::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Per-record split labels, aligned with the record sequence they were
/// computed from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub labels: Vec<SplitLabel>,
}

const SPLIT_HEADER: &str = "#rgnn-split\tv1";

impl SplitAssignment {
    pub fn count(&self, label: SplitLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn write_tsv(&self, records: &[InteractionRecord], w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{SPLIT_HEADER}\tseed={}", self.seed)?;
        for (r, l) in records.iter().zip(&self.labels) {
            writeln!(w, "{}\t{l}", r.key())?;
        }
        Ok(())
    }

    /// Reads a manifest and checks that its keys line up with `records`.
    pub fn read_tsv(records: &[InteractionRecord], r: impl BufRead) -> Result<Self, IngestError> {
        let bad = |reason: String| IngestError::BadFile {
            file: "split.tsv".into(),
            reason,
        };
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let seed = header
            .strip_prefix(SPLIT_HEADER)
            .and_then(|rest| rest.trim().strip_prefix("seed="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("unexpected header {header:?}")))?;
        let mut labels = Vec::with_capacity(records.len());
        for (n, line) in lines.enumerate() {
            let line = line?;
            let (key, label) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(format!("line {}: missing label", n + 2)))?;
            let rec = records
                .get(n)
                .ok_or_else(|| bad("more labels than records".into()))?;
            if rec.key() != key {
                return Err(bad(format!("line {}: key {key} does not match record", n + 2)));
            }
            labels.push(label.parse().map_err(bad)?);
        }
        if labels.len() != records.len() {
            return Err(bad("fewer labels than records".into()));
        }
        Ok(Self { seed, labels })
    }
}

/// Seeded random 72/8/20 train/validation/test split.
///
/// Records are ordered by a seeded hash of their (user, item) key; the first
/// `round(0.2·N)` go to test, the next `round(0.1·0.8·N)` to validation and
/// the rest to training. The result depends only on the record keys and the
/// seed, not on record order.
pub fn split_dataset(records: &[InteractionRecord], seed: u64) -> Result<SplitAssignment, IngestError> {
    let n = records.len();
    if n < 10 {
        return Err(IngestError::TooFewRecords(n));
    }
    let n_test = (0.2 * n as f64).round() as usize;
    let n_val = (0.1 * 0.8 * n as f64).round() as usize;

    let mut order: Vec<(u64, String, usize)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let h = stable_hash(seed, &[r.user_id.as_bytes(), r.item_id.as_bytes()]);
            (h, r.key(), i)
        })
        .collect();
    order.sort();

    let mut labels = vec![SplitLabel::Train; n];
    for (rank, (_, _, i)) in order.into_iter().enumerate() {
        labels[i] = if rank < n_test {
            SplitLabel::Test
        } else if rank < n_test + n_val {
            SplitLabel::Val
        } else {
            SplitLabel::Train
        };
    }
    Ok(SplitAssignment { seed, labels })
}
