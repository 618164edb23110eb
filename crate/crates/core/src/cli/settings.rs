use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use rgnn::ingest::{CorpusConfig, RecordFormat, StopWords};
use rgnn::model::ModelConfig;
use rgnn::par::ExecMode;
use rgnn::trainer::TrainConfig;

/// Every configurable value of a run. Defaults, then a key=value config
/// file, then command-line flags, each overriding the previous.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub format: RecordFormat,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub corpus: CorpusConfig,
    pub stop_words: String,
    pub sequential: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: None,
            format: RecordFormat::AmazonJsonLines,
            out: None,
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            corpus: CorpusConfig::default(),
            stop_words: "english".to_string(),
            sequential: false,
        }
    }
}

/// Keys accepted in config files and as `--flags`, in snapshot order.
pub const KEYS: &[&str] = &[
    "data",
    "format",
    "out",
    "seed",
    "d0",
    "d1",
    "d2",
    "layers",
    "alpha",
    "omega",
    "fm-factors",
    "leaky-slope",
    "no-edge-types",
    "shared-theta",
    "no-diversity-term",
    "no-pooling",
    "no-graph",
    "dot-product-head",
    "drop-forward",
    "drop-backward",
    "drop-self-loop",
    "epochs",
    "batch-size",
    "learning-rate",
    "lambda",
    "patience",
    "min-count",
    "max-vocab",
    "keyword-cap",
    "stop-words",
    "sequential",
];

/// Keys that only locate files; they do not change results.
const LOCATION_KEYS: &[&str] = &["data", "out", "format", "sequential"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("bad value `{value}` for `{key}`: expected true or false"),
    }
}

pub fn canonical_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key(key);
        let value = value.trim();
        let m = &mut self.model;
        let ab = &mut m.ablations;
        let t = &mut self.train;
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(value)),
            "format" => self.format = parse(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(&key, value)?,
            "d0" => m.d0 = parse(&key, value)?,
            "d1" => m.d1 = parse(&key, value)?,
            "d2" => m.d2 = parse(&key, value)?,
            "layers" => m.layers = parse(&key, value)?,
            "alpha" => m.alpha = parse(&key, value)?,
            "omega" => m.omega = parse(&key, value)?,
            "fm-factors" => {
                m.fm_factors = match value {
                    "auto" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            "leaky-slope" => m.leaky_slope = parse(&key, value)?,
            "no-edge-types" => ab.no_edge_types = parse_bool(&key, value)?,
            "shared-theta" => ab.shared_theta = parse_bool(&key, value)?,
            "no-diversity-term" => ab.no_diversity_term = parse_bool(&key, value)?,
            "no-pooling" => ab.no_pooling = parse_bool(&key, value)?,
            "no-graph" => ab.no_graph = parse_bool(&key, value)?,
            "dot-product-head" => ab.dot_product_head = parse_bool(&key, value)?,
            "drop-forward" => ab.drop_forward = parse_bool(&key, value)?,
            "drop-backward" => ab.drop_backward = parse_bool(&key, value)?,
            "drop-self-loop" => ab.drop_self_loop = parse_bool(&key, value)?,
            "epochs" => t.max_epochs = parse(&key, value)?,
            "batch-size" => t.batch_size = parse(&key, value)?,
            "learning-rate" => t.learning_rate = parse(&key, value)?,
            "lambda" => t.lambda = parse(&key, value)?,
            "patience" => t.patience = parse(&key, value)?,
            "min-count" => self.corpus.vocab.min_count = parse(&key, value)?,
            "max-vocab" => self.corpus.vocab.max_size = parse(&key, value)?,
            "keyword-cap" => self.corpus.keyword_cap = parse(&key, value)?,
            "stop-words" => {
                self.corpus.vocab.stop_words = match value {
                    "english" => StopWords::english(),
                    "none" => StopWords::none(),
                    _ => bail!("bad value `{value}` for `stop-words`: expected english or none"),
                };
                self.stop_words = value.to_string();
            }
            "sequential" => self.sequential = parse_bool(&key, value)?,
            _ => bail!("unknown setting `{key}`"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.model;
        let ab = &m.ablations;
        let t = &self.train;
        let v = match canonical_key(key).as_str() {
            "data" => self.data.as_ref()?.display().to_string(),
            "format" => match self.format {
                RecordFormat::AmazonJsonLines => "amazon".to_string(),
                RecordFormat::Csv => "csv".to_string(),
            },
            "out" => self.out.as_ref()?.display().to_string(),
            "seed" => self.seed.to_string(),
            "d0" => m.d0.to_string(),
            "d1" => m.d1.to_string(),
            "d2" => m.d2.to_string(),
            "layers" => m.layers.to_string(),
            "alpha" => m.alpha.to_string(),
            "omega" => m.omega.to_string(),
            "fm-factors" => m.fm_factors.map_or("auto".to_string(), |k| k.to_string()),
            "leaky-slope" => m.leaky_slope.to_string(),
            "no-edge-types" => ab.no_edge_types.to_string(),
            "shared-theta" => ab.shared_theta.to_string(),
            "no-diversity-term" => ab.no_diversity_term.to_string(),
            "no-pooling" => ab.no_pooling.to_string(),
            "no-graph" => ab.no_graph.to_string(),
            "dot-product-head" => ab.dot_product_head.to_string(),
            "drop-forward" => ab.drop_forward.to_string(),
            "drop-backward" => ab.drop_backward.to_string(),
            "drop-self-loop" => ab.drop_self_loop.to_string(),
            "epochs" => t.max_epochs.to_string(),
            "batch-size" => t.batch_size.to_string(),
            "learning-rate" => t.learning_rate.to_string(),
            "lambda" => t.lambda.to_string(),
            "patience" => t.patience.to_string(),
            "min-count" => self.corpus.vocab.min_count.to_string(),
            "max-vocab" => self.corpus.vocab.max_size.to_string(),
            "keyword-cap" => self.corpus.keyword_cap.to_string(),
            "stop-words" => self.stop_words.clone(),
            "sequential" => self.sequential.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value, got `{line}`", n + 1))?;
            self.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut s = Self::default();
        s.apply_text(text)?;
        Ok(s)
    }

    /// Every result-affecting setting as `key=value` lines.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .filter(|k| !LOCATION_KEYS.contains(k))
            .filter_map(|k| Some((k.to_string(), self.get(k)?)))
            .collect()
    }

    pub fn snapshot_text(&self) -> String {
        KEYS.iter()
            .filter(|k| !LOCATION_KEYS.contains(k))
            .filter_map(|k| Some(format!("{k}={}\n", self.get(k)?)))
            .collect()
    }

    pub fn mode(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let s = Settings::default();
        for key in KEYS {
            if let Some(v) = s.get(key) {
                let mut t = Settings::default();
                t.set(key, &v).unwrap();
                assert_eq!(t, s, "{key}");
            }
        }
    }

    #[test]
    fn config_text_then_snapshot() {
        let s = Settings::from_text("# comment\nd2 = 4\nno_edge_types=true\nfm-factors=3\n\nstop-words=none\n").unwrap();
        assert_eq!(s.model.d2, 4);
        assert!(s.model.ablations.no_edge_types);
        assert_eq!(s.model.fm_factors, Some(3));
        assert_eq!(Settings::from_text(&s.snapshot_text()).unwrap(), s);
    }

    #[test]
    fn errors_name_the_key() {
        let e = Settings::from_text("alpha=abc").unwrap_err();
        assert!(format!("{e:#}").contains("alpha"), "{e:#}");
        let e = Settings::from_text("nonsense=1").unwrap_err();
        assert!(format!("{e:#}").contains("unknown setting `nonsense`"), "{e:#}");
        assert!(Settings::from_text("no-graph=maybe").is_err());
        assert!(Settings::from_text("just a line").is_err());
    }
}
