use crate::ingest::{Corpus, SplitLabel};
use crate::model::{Ablations, EntityGraph, EntityInput, ModelSizes};
use crate::wordgraph::GraphCache;

/// One rated pair with table rows resolved; `None` marks an entity absent
/// from training.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// `user|item`, used in error messages and exports.
    pub key: String,
    pub user: Option<usize>,
    pub item: Option<usize>,
    pub rating: f64,
}

impl Example {
    pub fn is_fallback(&self) -> bool {
        self.user.is_none() || self.item.is_none()
    }
}

/// Everything the trainer reads: prepared graphs per entity row and the
/// three example lists.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub users: Vec<EntityGraph>,
    pub items: Vec<EntityGraph>,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    pub num_words: usize,
    empty: EntityGraph,
}

impl TrainingData {
    pub fn new(
        users: Vec<EntityGraph>,
        items: Vec<EntityGraph>,
        num_words: usize,
        train: Vec<Example>,
        val: Vec<Example>,
        test: Vec<Example>,
    ) -> Self {
        Self {
            users,
            items,
            train,
            val,
            test,
            num_words,
            empty: EntityGraph::empty(),
        }
    }

    /// Resolves corpus records against the entity index and attaches each
    /// training entity's graph with `ablations`' edge filter applied.
    pub fn from_corpus(corpus: &Corpus, graphs: &GraphCache, ablations: &Ablations) -> Self {
        let prepare = |g: Option<&crate::wordgraph::ReviewGraph>| match g {
            Some(g) => EntityGraph::prepare(g, ablations),
            None => EntityGraph::empty(),
        };
        let users = corpus.users.ids().iter().map(|id| prepare(graphs.user(id))).collect();
        let items = corpus.items.ids().iter().map(|id| prepare(graphs.item(id))).collect();
        let examples = |label: SplitLabel| {
            corpus
                .indices(label)
                .into_iter()
                .map(|i| {
                    let r = &corpus.records[i];
                    Example {
                        key: r.key(),
                        user: corpus.users.get(&r.user_id),
                        item: corpus.items.get(&r.item_id),
                        rating: r.rating,
                    }
                })
                .collect()
        };
        Self::new(
            users,
            items,
            corpus.vocab.len(),
            examples(SplitLabel::Train),
            examples(SplitLabel::Val),
            examples(SplitLabel::Test),
        )
    }

    pub fn sizes(&self) -> ModelSizes {
        ModelSizes {
            words: self.num_words,
            users: self.users.len(),
            items: self.items.len(),
        }
    }

    pub fn inputs(&self, ex: &Example) -> (EntityInput<'_>, EntityInput<'_>) {
        (self.input(&self.users, ex.user), self.input(&self.items, ex.item))
    }

    fn input<'s>(&'s self, graphs: &'s [EntityGraph], row: Option<usize>) -> EntityInput<'s> {
        EntityInput {
            row,
            graph: row.map_or(&self.empty, |r| &graphs[r]),
        }
    }
}
