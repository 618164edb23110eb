use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DenseGradients, NumError, ParameterStore};

/// Result of evaluating an objective at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Branch pattern of non-smooth ops; `None` when not tracked.
    pub kink_signature: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdOptions {
    pub epsilon: f64,
    /// Number of coordinates to probe (all of them when the store is smaller).
    pub coordinates: usize,
    pub seed: u64,
    /// Coordinates whose kink signature changes within this distance are
    /// skipped. `None` disables the check.
    pub kink_radius: Option<f64>,
    /// Lower bound on the relative-error denominator, in units of
    /// `max(1, |f(θ)|)`, so that gradients lost in the rounding noise of the
    /// difference quotient do not blow up the ratio.
    pub denominator_floor: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            coordinates: 200,
            seed: 0,
            kink_radius: Some(1e-3),
            denominator_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub max_relative_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
    pub skipped_near_kink: usize,
}

/// Compares `analytic` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` on a seeded subset of coordinates.
///
/// Every parameter contributes at least a few coordinates before the
/// remainder is drawn uniformly, so small tensors are never skipped.
pub fn fd_check<F, E>(
    f: F,
    store: &ParameterStore,
    analytic: &DenseGradients,
    opts: &FdOptions,
) -> Result<FdReport, E>
where
    F: Fn(&ParameterStore) -> Result<Evaluation, E>,
    E: From<NumError>,
{
    if analytic.len() != store.len() {
        return Err(NumError::LayoutMismatch.into());
    }
    let coords = pick_coordinates(store, opts.coordinates, opts.seed);
    let base = f(store)?;
    let floor = opts.denominator_floor * base.value.abs().max(1.0);
    let mut probe = store.clone();
    let mut report = FdReport {
        max_relative_error: 0.0,
        worst_param: None,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
        skipped_near_kink: 0,
    };

    for (pidx, i) in coords {
        let original = store.by_index(pidx).1.data()[i];
        let mut eval_at = |x: f64| -> Result<Evaluation, E> {
            probe.by_index_mut(pidx).data_mut()[i] = x;
            let e = f(&probe);
            probe.by_index_mut(pidx).data_mut()[i] = original;
            e
        };

        if let (Some(r), Some(sig)) = (opts.kink_radius, base.kink_signature) {
            let lo = eval_at(original - r)?.kink_signature;
            let hi = eval_at(original + r)?.kink_signature;
            if lo != Some(sig) || hi != Some(sig) {
                report.skipped_near_kink += 1;
                continue;
            }
        }

        let plus = eval_at(original + opts.epsilon)?.value;
        let minus = eval_at(original - opts.epsilon)?.value;
        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let a = analytic.by_index(pidx).data()[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        let rel = (a - numeric).abs() / denom;
        report.checked += 1;
        if report.worst_param.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_param = Some(store.by_index(pidx).0.to_string());
            report.worst_index = i;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}

fn pick_coordinates(store: &ParameterStore, wanted: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = store.num_values();
    let mut all = Vec::with_capacity(total.min(wanted.max(1) * 2));
    if total <= wanted {
        for (p, (_, t)) in store.iter().enumerate() {
            all.extend((0..t.len()).map(|i| (p, i)));
        }
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const PER_PARAM: usize = 3;
    let mut chosen = std::collections::BTreeSet::new();
    for (p, (_, t)) in store.iter().enumerate() {
        let take = PER_PARAM.min(t.len());
        for i in sample(&mut rng, t.len(), take) {
            chosen.insert((p, i));
        }
    }
    // Flattened offsets for the uniform remainder.
    let offsets: Vec<usize> = store
        .iter()
        .scan(0, |acc, (_, t)| {
            let o = *acc;
            *acc += t.len();
            Some(o)
        })
        .collect();
    let target = wanted.max(chosen.len());
    while chosen.len() < target {
        let flat = sample(&mut rng, total, 1).index(0);
        let p = offsets.partition_point(|&o| o <= flat) - 1;
        chosen.insert((p, flat - offsets[p]));
    }
    all.extend(chosen);
    all
}
