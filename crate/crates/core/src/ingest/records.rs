use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use serde::Deserialize;

use super::IngestError;

/// One observed (user, item, rating, review) interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub review_text: String,
    pub timestamp: Option<i64>,
}

impl InteractionRecord {
    /// Key identifying the (user, item) pair.
    pub fn key(&self) -> String {
        format!("{}|{}", self.user_id, self.item_id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    /// Amazon 5-core JSON lines: reviewerID, asin, overall, reviewText,
    /// unixReviewTime.
    AmazonJsonLines,
    /// CSV with header `user_id,item_id,rating,review_text,timestamp`.
    Csv,
}

impl std::str::FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "amazon" | "amazon_json_lines" | "json" => Ok(Self::AmazonJsonLines),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format `{other}` (amazon|csv)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<InteractionRecord>,
    pub malformed: usize,
}

pub const RATING_RANGE: (f64, f64) = (1.0, 5.0);

#[derive(Deserialize)]
struct AmazonLine {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(rename = "reviewText", default)]
    review_text: Option<String>,
    #[serde(rename = "unixReviewTime", default)]
    unix_review_time: Option<i64>,
}

#[derive(Deserialize)]
struct CsvLine {
    user_id: String,
    item_id: String,
    rating: f64,
    #[serde(default)]
    review_text: Option<String>,
    #[serde(default)]
    timestamp: Option<i64>,
}

fn valid_rating(r: f64) -> bool {
    r.is_finite() && (RATING_RANGE.0..=RATING_RANGE.1).contains(&r)
}

/// Parses a line-delimited stream. Malformed lines are skipped and counted;
/// if more than 10% of non-blank lines are malformed the whole stream is
/// rejected.
pub fn parse_records(input: impl Read, format: RecordFormat) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    let mut total = 0usize;
    match format {
        RecordFormat::AmazonJsonLines => {
            for line in BufReader::new(input).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                total += 1;
                match serde_json::from_str::<AmazonLine>(&line) {
                    Ok(a) if valid_rating(a.overall) => out.records.push(InteractionRecord {
                        user_id: a.reviewer_id,
                        item_id: a.asin,
                        rating: a.overall,
                        review_text: a.review_text.unwrap_or_default(),
                        timestamp: a.unix_review_time,
                    }),
                    _ => out.malformed += 1,
                }
            }
        }
        RecordFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .from_reader(input);
            for row in reader.deserialize::<CsvLine>() {
                total += 1;
                match row {
                    Ok(c) if valid_rating(c.rating) => out.records.push(InteractionRecord {
                        user_id: c.user_id,
                        item_id: c.item_id,
                        rating: c.rating,
                        review_text: c.review_text.unwrap_or_default(),
                        timestamp: c.timestamp,
                    }),
                    Err(e) if e.is_io_error() => {
                        return Err(match e.into_kind() {
                            csv::ErrorKind::Io(io) => IngestError::Io(io),
                            _ => unreachable!(),
                        })
                    }
                    _ => out.malformed += 1,
                }
            }
        }
    }
    if out.malformed * 10 > total {
        return Err(IngestError::TooManyMalformed {
            malformed: out.malformed,
            total,
        });
    }
    Ok(out)
}

/// Keeps one record per (user, item): the one with the latest timestamp,
/// later lines winning ties. Surviving records keep their first-seen order.
pub fn dedup_latest(records: Vec<InteractionRecord>) -> Vec<InteractionRecord> {
    let mut slot: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<InteractionRecord> = Vec::with_capacity(records.len());
    for r in records {
        let key = (r.user_id.clone(), r.item_id.clone());
        match slot.get(&key) {
            Some(&i) => {
                if r.timestamp.unwrap_or(i64::MIN) >= out[i].timestamp.unwrap_or(i64::MIN) {
                    out[i] = r;
                }
            }
            None => {
                slot.insert(key, out.len());
                out.push(r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amazon_line_maps_fields() {
        let line = r#"{"reviewerID":"A1","asin":"B1","overall":5.0,"reviewText":"great strings","unixReviewTime":1400000000}"#;
        let out = parse_records(line.as_bytes(), RecordFormat::AmazonJsonLines).unwrap();
        assert_eq!(out.malformed, 0);
        assert_eq!(
            out.records,
            vec![InteractionRecord {
                user_id: "A1".into(),
                item_id: "B1".into(),
                rating: 5.0,
                review_text: "great strings".into(),
                timestamp: Some(1_400_000_000),
            }]
        );
    }

    #[test]
    fn empty_stream_is_empty() {
        let out = parse_records(&b""[..], RecordFormat::AmazonJsonLines).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.malformed, 0);
        let out = parse_records(&b"user_id,item_id,rating,review_text,timestamp\n"[..], RecordFormat::Csv).unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn tolerates_few_malformed_lines() {
        let mut text = String::new();
        for i in 0..19 {
            text.push_str(&format!(
                "{{\"reviewerID\":\"u{i}\",\"asin\":\"i\",\"overall\":3.0}}\n"
            ));
        }
        text.push_str("not json\n");
        let out = parse_records(text.as_bytes(), RecordFormat::AmazonJsonLines).unwrap();
        assert_eq!(out.records.len(), 19);
        assert_eq!(out.malformed, 1);
        assert_eq!(out.records[3].user_id, "u3");
    }

    #[test]
    fn too_many_malformed_is_fatal() {
        let text = "a,b\n1,2\n";
        let err = parse_records(text.as_bytes(), RecordFormat::AmazonJsonLines).unwrap_err();
        assert!(matches!(err, IngestError::TooManyMalformed { malformed: 2, total: 2 }));
    }

    #[test]
    fn csv_with_quotes_and_missing_timestamp() {
        let text = "user_id,item_id,rating,review_text,timestamp\nu1,i1,4,\"nice, really\",\nu2,i1,9,bad rating,5\n";
        let err = parse_records(text.as_bytes(), RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::TooManyMalformed { malformed: 1, total: 2 }));
        let text = "user_id,item_id,rating,review_text,timestamp\nu1,i1,4,\"nice, really\",\n";
        let out = parse_records(text.as_bytes(), RecordFormat::Csv).unwrap();
        assert_eq!(out.records[0].review_text, "nice, really");
        assert_eq!(out.records[0].timestamp, None);
    }

    #[test]
    fn dedup_keeps_latest() {
        let rec = |u: &str, i: &str, r: f64, t: i64| InteractionRecord {
            user_id: u.into(),
            item_id: i.into(),
            rating: r,
            review_text: String::new(),
            timestamp: Some(t),
        };
        let out = dedup_latest(vec![rec("u", "i", 1.0, 5), rec("v", "i", 2.0, 1), rec("u", "i", 4.0, 9), rec("u", "i", 3.0, 7)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].rating, 4.0);
        assert_eq!(out[1].user_id, "v");
    }
}
