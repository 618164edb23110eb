use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{EdgeType, GraphBuilder, GraphError, ReviewGraph};
use crate::ingest::DocumentSet;
use crate::par::{self, ExecMode};

/// Everything that determines graph contents besides the documents. Model
/// dimensions are deliberately absent: changing them reuses the cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphCacheKey {
    pub omega: u32,
    pub coin_seed: u64,
    pub max_nodes: usize,
}

impl From<GraphBuilder> for GraphCacheKey {
    fn from(b: GraphBuilder) -> Self {
        Self {
            omega: b.omega,
            coin_seed: b.coin_seed,
            max_nodes: b.max_nodes,
        }
    }
}

impl GraphCacheKey {
    pub fn builder(&self) -> GraphBuilder {
        GraphBuilder {
            omega: self.omega,
            coin_seed: self.coin_seed,
            max_nodes: self.max_nodes,
        }
    }

    pub fn file_name(&self) -> String {
        format!("graphs-w{}-n{}-{:016x}.txt", self.omega, self.max_nodes, self.coin_seed)
    }
}

/// Review graphs for every user and item of a corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphCache {
    pub key: GraphCacheKey,
    pub users: BTreeMap<String, ReviewGraph>,
    pub items: BTreeMap<String, ReviewGraph>,
}

const HEADER: &str = "#rgnn-graphs\tv1";

impl GraphCache {
    /// Builds all graphs; entities are independent and processed with `mode`.
    pub fn build(docs: &DocumentSet, builder: GraphBuilder, mode: ExecMode) -> Result<Self, GraphError> {
        let build_side = |map: &BTreeMap<String, Vec<crate::ingest::Review>>| {
            let entries: Vec<(&String, &Vec<crate::ingest::Review>)> = map.iter().collect();
            par::try_map(mode, &entries, |(id, reviews)| {
                builder.build(reviews).map(|g| ((*id).clone(), g))
            })
            .map(|v| v.into_iter().collect::<BTreeMap<_, _>>())
        };
        Ok(Self {
            key: builder.into(),
            users: build_side(&docs.users)?,
            items: build_side(&docs.items)?,
        })
    }

    pub fn user(&self, id: &str) -> Option<&ReviewGraph> {
        self.users.get(id)
    }

    pub fn item(&self, id: &str) -> Option<&ReviewGraph> {
        self.items.get(id)
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{HEADER}\tomega={}\tmax_nodes={}\tseed={}",
            self.key.omega, self.key.max_nodes, self.key.coin_seed
        )?;
        for (kind, map) in [("U", &self.users), ("I", &self.items)] {
            for (id, g) in map {
                let nodes: Vec<String> = g.nodes.iter().map(u32::to_string).collect();
                let edges: Vec<String> = g
                    .edges()
                    .map(|(a, b, t)| format!("{a}:{b}:{}", t.code()))
                    .collect();
                writeln!(w, "{kind}\t{id}\t{}\t{}", nodes.join(","), edges.join(";"))?;
            }
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self, GraphError> {
        let bad = |line: usize, reason: &str| GraphError::BadFile {
            line,
            reason: reason.to_string(),
        };
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or_else(|| bad(1, "empty file"))?;
        let fields: BTreeMap<&str, &str> = header
            .strip_prefix(HEADER)
            .ok_or_else(|| bad(1, "missing header"))?
            .split('\t')
            .filter_map(|f| f.split_once('='))
            .collect();
        let field = |k: &str| fields.get(k).ok_or_else(|| bad(1, "missing header field"));
        let key = GraphCacheKey {
            omega: field("omega")?.parse().map_err(|_| bad(1, "omega"))?,
            max_nodes: field("max_nodes")?.parse().map_err(|_| bad(1, "max_nodes"))?,
            coin_seed: field("seed")?.parse().map_err(|_| bad(1, "seed"))?,
        };
        let mut out = Self {
            key,
            users: BTreeMap::new(),
            items: BTreeMap::new(),
        };
        for (n, line) in lines.enumerate() {
            let n = n + 2;
            let line = line?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad(n, "expected 4 columns"));
            }
            let nodes = cols[2]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| bad(n, "node id")))
                .collect::<Result<Vec<u32>, _>>()?;
            let mut edges = BTreeMap::new();
            for e in cols[3].split(';').filter(|s| !s.is_empty()) {
                let parts: Vec<&str> = e.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad(n, "edge must be from:to:type"));
                }
                let a: u32 = parts[0].parse().map_err(|_| bad(n, "edge head"))?;
                let b: u32 = parts[1].parse().map_err(|_| bad(n, "edge tail"))?;
                let t = parts[2]
                    .parse()
                    .ok()
                    .and_then(EdgeType::from_code)
                    .ok_or_else(|| bad(n, "edge type code"))?;
                if a as usize >= nodes.len() || b as usize >= nodes.len() {
                    return Err(bad(n, "edge endpoint out of range"));
                }
                edges.insert((a, b), t);
            }
            let g = ReviewGraph {
                nodes,
                edges,
                omega: key.omega,
            };
            match cols[0] {
                "U" => out.users.insert(cols[1].to_string(), g),
                "I" => out.items.insert(cols[1].to_string(), g),
                _ => return Err(bad(n, "entity kind must be U or I")),
            };
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Review;

    fn docs() -> DocumentSet {
        let r = |w: &[u32]| Review {
            words: w.to_vec(),
            positions: (0..w.len() as u32).map(|p| p * 2).collect(),
        };
        let mut d = DocumentSet::default();
        d.users.insert("u1".into(), vec![r(&[1, 2, 3]), r(&[3, 2])]);
        d.users.insert("u2".into(), vec![r(&[])]);
        d.items.insert("i1".into(), vec![r(&[4, 1, 4, 2])]);
        d
    }

    #[test]
    fn round_trip_is_lossless() {
        let cache = GraphCache::build(&docs(), GraphBuilder::new(4, 77), ExecMode::Parallel).unwrap();
        assert!(cache.user("u2").unwrap().is_empty());
        let mut buf = Vec::new();
        cache.write(&mut buf).unwrap();
        assert_eq!(GraphCache::read(buf.as_slice()).unwrap(), cache);
    }

    #[test]
    fn modes_agree() {
        let a = GraphCache::build(&docs(), GraphBuilder::new(3, 1), ExecMode::Sequential).unwrap();
        let b = GraphCache::build(&docs(), GraphBuilder::new(3, 1), ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_key_ignores_model_dimensions() {
        let k1 = GraphCacheKey::from(GraphBuilder::new(3, 5));
        let k2 = GraphCacheKey::from(GraphBuilder::new(4, 5));
        assert_ne!(k1.file_name(), k2.file_name());
    }
}
