use indexmap::IndexMap;
use rand::Rng;

use super::{NumError, Tensor};

/// Named trainable tensors. Iteration follows declaration order, which
/// fixes the order of regularization sums and optimizer updates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: IndexMap<String, Tensor>,
}

/// How a freshly declared parameter is filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform in `(-bound, bound)`.
    Uniform(f64),
    /// Uniform in `±1/sqrt(fan_in)` with fan-in taken as the row count.
    FanIn,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize, NumError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(NumError::DuplicateParam(name));
        }
        let (idx, _) = self.params.insert_full(name, value);
        Ok(idx)
    }

    pub fn declare<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<usize, NumError> {
        let mut t = Tensor::zeros(rows, cols);
        let bound = match init {
            Init::Zeros => 0.0,
            Init::Uniform(b) => b,
            Init::FanIn => 1.0 / (rows.max(1) as f64).sqrt(),
        };
        if bound > 0.0 {
            for v in t.data_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        self.insert(name, t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, NumError> {
        self.get(name)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.get_index_of(name)
    }

    pub fn by_index(&self, idx: usize) -> (&str, &Tensor) {
        let (k, v) = self.params.get_index(idx).expect("parameter index in range");
        (k.as_str(), v)
    }

    pub(crate) fn by_index_mut(&mut self, idx: usize) -> &mut Tensor {
        self.params
            .get_index_mut(idx)
            .expect("parameter index in range")
            .1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Total number of scalar coordinates.
    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// `‖Θ‖²_F` summed over every tensor in declaration order.
    pub fn squared_norm(&self) -> f64 {
        self.params.values().map(Tensor::sum_of_squares).sum()
    }

    pub fn same_layout(&self, other: &ParameterStore) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn declaration_order_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::new();
        for name in ["z", "a", "m"] {
            store.declare(name, 2, 2, Init::Uniform(0.1), &mut rng).unwrap();
        }
        assert_eq!(store.names().collect::<Vec<_>>(), vec!["z", "a", "m"]);
        assert!(store
            .declare("a", 1, 1, Init::Zeros, &mut rng)
            .is_err());
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParameterStore::new();
        store.declare("w", 16, 4, Init::FanIn, &mut rng).unwrap();
        store.declare("b", 1, 4, Init::Zeros, &mut rng).unwrap();
        assert!(store.get("w").unwrap().data().iter().all(|v| v.abs() < 0.25));
        assert!(store.get("b").unwrap().data().iter().all(|&v| v == 0.0));
    }
}
