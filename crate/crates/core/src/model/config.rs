use std::fmt;

use super::ModelError;

/// Independent switches that turn the full model into one of its ablated
/// variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ablations {
    /// Drop the edge-type term from the attention logit.
    pub no_edge_types: bool,
    /// One learnable measurement vector per layer shared by all entities.
    pub shared_theta: bool,
    /// Importance score without the neighborhood-diversity term.
    pub no_diversity_term: bool,
    /// Attention layers only; each layer's full output is read out.
    pub no_pooling: bool,
    /// Replace graph readouts by a max-pool over keyword embeddings.
    pub no_graph: bool,
    /// Predict with `p·qᵀ` instead of the FM head.
    pub dot_product_head: bool,
    pub drop_forward: bool,
    pub drop_backward: bool,
    pub drop_self_loop: bool,
}

/// The named model variants compared in the ablation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    NoEdgeTypes,
    SharedTheta,
    NoDiversity,
    NoPooling,
    NoGraph,
    DotProduct,
    NoForward,
    NoBackward,
    NoSelfLoop,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Full,
        Variant::NoEdgeTypes,
        Variant::SharedTheta,
        Variant::NoDiversity,
        Variant::NoPooling,
        Variant::NoGraph,
        Variant::DotProduct,
        Variant::NoForward,
        Variant::NoBackward,
        Variant::NoSelfLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "RGNN",
            Variant::NoEdgeTypes => "RGNN-T",
            Variant::SharedTheta => "RGNN-P",
            Variant::NoDiversity => "RGNN-S",
            Variant::NoPooling => "RGNN-PL",
            Variant::NoGraph => "RGNN-RG",
            Variant::DotProduct => "RGNN-FM",
            Variant::NoForward => "RGNN-f",
            Variant::NoBackward => "RGNN-b",
            Variant::NoSelfLoop => "RGNN-s",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Applies this variant's single switch on top of `base`.
    pub fn apply(self, base: Ablations) -> Ablations {
        let mut a = base;
        match self {
            Variant::Full => {}
            Variant::NoEdgeTypes => a.no_edge_types = true,
            Variant::SharedTheta => a.shared_theta = true,
            Variant::NoDiversity => a.no_diversity_term = true,
            Variant::NoPooling => a.no_pooling = true,
            Variant::NoGraph => a.no_graph = true,
            Variant::DotProduct => a.dot_product_head = true,
            Variant::NoForward => a.drop_forward = true,
            Variant::NoBackward => a.drop_backward = true,
            Variant::NoSelfLoop => a.drop_self_loop = true,
        }
        a
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Word embedding size.
    pub d0: usize,
    /// User/item embedding and readout size.
    pub d1: usize,
    /// Hidden size of the graph layers.
    pub d2: usize,
    /// Number of attention + pooling layers.
    pub layers: usize,
    /// Pooling ratio in `(0, 1]`.
    pub alpha: f64,
    /// Sliding-window size used to build the review graphs.
    pub omega: u32,
    /// FM factor size; `None` means `d2`.
    pub fm_factors: Option<usize>,
    pub leaky_slope: f64,
    pub ablations: Ablations,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d0: 16,
            d1: 16,
            d2: 8,
            layers: 2,
            alpha: 0.5,
            omega: 3,
            fm_factors: None,
            leaky_slope: 0.2,
            ablations: Ablations::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.d0 == 0 || self.d1 == 0 || self.d2 == 0 {
            return fail("dimensions must be positive");
        }
        if self.layers == 0 {
            return fail("need at least one layer");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail("alpha must lie in (0, 1]");
        }
        if self.omega < 2 {
            return fail("omega must be at least 2");
        }
        if self.fm_factors == Some(0) {
            return fail("fm factor size must be positive");
        }
        Ok(())
    }

    /// Number of `d1`-sized blocks in an entity representation.
    pub fn blocks(&self) -> usize {
        if self.ablations.no_graph {
            2
        } else {
            self.layers + 1
        }
    }

    /// Length of one entity representation.
    pub fn representation_dim(&self) -> usize {
        self.blocks() * self.d1
    }

    /// Length of the concatenated FM input, `2·(L+1)·d1` for the full model.
    pub fn fm_dim(&self) -> usize {
        2 * self.representation_dim()
    }

    pub fn fm_k(&self) -> usize {
        self.fm_factors.unwrap_or(self.d2)
    }

    /// Input width of layer `l` (1-based).
    pub fn layer_input_dim(&self, l: usize) -> usize {
        if l == 1 {
            self.d0
        } else {
            self.d2
        }
    }

    pub fn with_variant(&self, v: Variant) -> Self {
        let mut c = self.clone();
        c.ablations = v.apply(self.ablations);
        c
    }
}

/// `⌈α·K⌉`, treating products within rounding noise of an integer as that
/// integer (so `0.3·10` keeps 3 nodes, not 4).
pub fn pooled_size(alpha: f64, k: usize) -> usize {
    if k == 0 {
        return 0;
    }
    let x = alpha * k as f64;
    let r = x.round();
    let n = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (n as usize).clamp(1, k)
}
