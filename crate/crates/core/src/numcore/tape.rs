use std::collections::BTreeMap;
use std::sync::Arc;

use super::{NumError, ParameterStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Const,
    Param(usize),
    ParamRows(usize, Arc<[usize]>),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulColumn(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    Exp(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    SegmentSoftmax(Var, Arc<[usize]>),
    ColMax(Var, Vec<usize>),
    Sum(Var),
    RowDot(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records one forward evaluation against an immutable [`ParameterStore`].
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction and [`Tape::backward`] is a single reverse sweep.
pub struct Tape<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    kinks: Option<u64>,
}

/// Gradient of one parameter produced by a single backward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamGrad {
    Dense(Tensor),
    /// Only the listed rows are nonzero (embedding lookups).
    Rows(BTreeMap<usize, Vec<f64>>),
}

/// Sparse map from parameter index to gradient. Parameters never touched by
/// the pass are absent and read back as zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    entries: BTreeMap<usize, ParamGrad>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = (usize, &ParamGrad)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense gradient for `name`, zero-filled when the parameter was not
    /// reached.
    pub fn dense(&self, store: &ParameterStore, name: &str) -> Result<Tensor, NumError> {
        let idx = store
            .index_of(name)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))?;
        let (_, param) = store.by_index(idx);
        let mut out = Tensor::zeros(param.rows(), param.cols());
        if let Some(g) = self.entries.get(&idx) {
            add_param_grad(&mut out, g);
        }
        Ok(out)
    }

    fn accumulate_dense(&mut self, idx: usize, g: &Tensor) {
        match self.entries.get_mut(&idx) {
            Some(ParamGrad::Dense(t)) => t.add_assign(g),
            Some(ParamGrad::Rows(rows)) => {
                let mut t = g.clone();
                for (&r, vals) in rows.iter() {
                    for (o, v) in t.row_mut(r).iter_mut().zip(vals) {
                        *o += v;
                    }
                }
                self.entries.insert(idx, ParamGrad::Dense(t));
            }
            None => {
                self.entries.insert(idx, ParamGrad::Dense(g.clone()));
            }
        }
    }

    fn accumulate_rows(&mut self, idx: usize, rows: &[usize], g: &Tensor) {
        let entry = self
            .entries
            .entry(idx)
            .or_insert_with(|| ParamGrad::Rows(BTreeMap::new()));
        match entry {
            ParamGrad::Dense(t) => {
                for (i, &r) in rows.iter().enumerate() {
                    for (o, v) in t.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }
            ParamGrad::Rows(map) => {
                for (i, &r) in rows.iter().enumerate() {
                    let slot = map.entry(r).or_insert_with(|| vec![0.0; g.cols()]);
                    for (o, v) in slot.iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }
        }
    }
}

pub(crate) fn add_param_grad(out: &mut Tensor, g: &ParamGrad) {
    match g {
        ParamGrad::Dense(t) => out.add_assign(t),
        ParamGrad::Rows(rows) => {
            for (&r, vals) in rows {
                for (o, v) in out.row_mut(r).iter_mut().zip(vals) {
                    *o += v;
                }
            }
        }
    }
}

fn mix(state: u64, v: u64) -> u64 {
    // FNV-1a style fold; only compared within one process.
    (state ^ v).wrapping_mul(0x0100_0000_01b3)
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            kinks: None,
        }
    }

    pub fn store(&self) -> &'s ParameterStore {
        self.store
    }

    /// Start folding the branch pattern of every non-smooth op (relu signs,
    /// abs signs, max selections, explicit selections) into a signature.
    pub fn track_kinks(&mut self) {
        self.kinks = Some(0xcbf2_9ce4_8422_2325);
    }

    /// Signature of all branch decisions taken so far, if tracking is on.
    pub fn kink_signature(&self) -> Option<u64> {
        self.kinks
    }

    /// Fold a discrete choice made outside the tape (e.g. a top-k index set)
    /// into the kink signature.
    pub fn note_selection(&mut self, indices: &[usize]) {
        if let Some(state) = self.kinks.as_mut() {
            *state = mix(*state, u64::MAX);
            for &i in indices {
                *state = mix(*state, i as u64);
            }
        }
    }

    fn note_signs(&mut self, values: &[f64]) {
        if let Some(state) = self.kinks.as_mut() {
            for &v in values {
                let s = if v > 0.0 {
                    1
                } else if v < 0.0 {
                    2
                } else {
                    3
                };
                *state = mix(*state, s);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64, NumError> {
        let t = self.value(v);
        t.item().ok_or(NumError::NonScalarRoot(t.shape()))
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var, NumError> {
        self.push("constant", value, Op::Const)
    }

    pub fn param(&mut self, name: &str) -> Result<Var, NumError> {
        let idx = self
            .store
            .index_of(name)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))?;
        let value = self.store.by_index(idx).1.clone();
        self.push("param", value, Op::Param(idx))
    }

    /// Lookup of selected rows of a parameter table. The gradient is kept
    /// sparse over the looked-up rows.
    pub fn param_rows(&mut self, name: &str, rows: impl Into<Arc<[usize]>>) -> Result<Var, NumError> {
        let rows: Arc<[usize]> = rows.into();
        let idx = self
            .store
            .index_of(name)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))?;
        let table = self.store.by_index(idx).1;
        let mut out = Tensor::zeros(rows.len(), table.cols());
        for (i, &r) in rows.iter().enumerate() {
            if r >= table.rows() {
                return Err(NumError::IndexOutOfRange {
                    op: "param_rows",
                    index: r,
                    bound: table.rows(),
                });
            }
            out.row_mut(i).copy_from_slice(table.row(r));
        }
        self.push("param_rows", out, Op::ParamRows(idx, rows))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NumError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                left: ta.shape(),
                right: tb.shape(),
            });
        }
        let out = ta.matmul_unchecked(tb);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(ta.rows(), ta.cols(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        Tensor::from_vec(ta.rows(), ta.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b))
    }

    /// Adds a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumError> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(NumError::ShapeMismatch {
                op: "add_row",
                left: ta.shape(),
                right: tr.shape(),
            });
        }
        let mut out = ta.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(tr.data()) {
                *o += b;
            }
        }
        self.push("add_row", out, Op::AddRow(a, row))
    }

    /// Scales row `i` of `a` by `s[i]`, where `s` is a `K×1` column.
    pub fn mul_column(&mut self, a: Var, s: Var) -> Result<Var, NumError> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.cols() != 1 || ts.rows() != ta.rows() {
            return Err(NumError::ShapeMismatch {
                op: "mul_column",
                left: ta.shape(),
                right: ts.shape(),
            });
        }
        let mut out = ta.clone();
        for r in 0..out.rows() {
            let k = ts.data()[r];
            for o in out.row_mut(r) {
                *o *= k;
            }
        }
        self.push("mul_column", out, Op::MulColumn(a, s))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, NumError> {
        let out = self.map(a, |x| x * k);
        self.push("scale", out, Op::Scale(a, k))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, NumError> {
        let out = self.map(a, |x| if x > 0.0 { x } else { slope * x });
        let signs = self.value(a).data().to_vec();
        self.note_signs(&signs);
        self.push("leaky_relu", out, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, |x| x.max(0.0));
        if self.kinks.is_some() {
            let signs = self.value(a).data().to_vec();
            self.note_signs(&signs);
        }
        self.push("relu", out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, f64::abs);
        if self.kinks.is_some() {
            let signs = self.value(a).data().to_vec();
            self.note_signs(&signs);
        }
        self.push("abs", out, Op::Abs(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, f64::exp);
        self.push("exp", out, Op::Exp(a))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    left: (rows, cols),
                    right: t.shape(),
                });
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let t = self.value(p);
                out.row_mut(r)[c0..c0 + t.cols()].copy_from_slice(t.row(r));
                c0 += t.cols();
            }
        }
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let cols = parts.first().map_or(0, |&p| self.value(p).cols());
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(NumError::ShapeMismatch {
                    op: "concat_rows",
                    left: (rows, cols),
                    right: t.shape(),
                });
            }
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()))
    }

    /// Row `i` of the output is row `index[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: impl Into<Arc<[usize]>>) -> Result<Var, NumError> {
        let index: Arc<[usize]> = index.into();
        let ta = self.value(a);
        let mut out = Tensor::zeros(index.len(), ta.cols());
        for (i, &r) in index.iter().enumerate() {
            if r >= ta.rows() {
                return Err(NumError::IndexOutOfRange {
                    op: "gather_rows",
                    index: r,
                    bound: ta.rows(),
                });
            }
            out.row_mut(i).copy_from_slice(ta.row(r));
        }
        self.push("gather_rows", out, Op::GatherRows(a, index))
    }

    /// Adds row `i` of `a` into output row `index[i]`; the output has
    /// `out_rows` rows, and rows that receive nothing stay zero.
    pub fn scatter_add_rows(
        &mut self,
        a: Var,
        index: impl Into<Arc<[usize]>>,
        out_rows: usize,
    ) -> Result<Var, NumError> {
        let index: Arc<[usize]> = index.into();
        let ta = self.value(a);
        if index.len() != ta.rows() {
            return Err(NumError::ShapeMismatch {
                op: "scatter_add_rows",
                left: ta.shape(),
                right: (index.len(), 1),
            });
        }
        let mut out = Tensor::zeros(out_rows, ta.cols());
        for (i, &r) in index.iter().enumerate() {
            if r >= out_rows {
                return Err(NumError::IndexOutOfRange {
                    op: "scatter_add_rows",
                    index: r,
                    bound: out_rows,
                });
            }
            for (o, v) in out.row_mut(r).iter_mut().zip(ta.row(i)) {
                *o += v;
            }
        }
        self.push("scatter_add_rows", out, Op::ScatterAddRows(a, index))
    }

    /// Softmax of an `E×1` column within contiguous segments
    /// `offsets[s]..offsets[s+1]`. Empty segments are allowed.
    pub fn segment_softmax(&mut self, a: Var, offsets: impl Into<Arc<[usize]>>) -> Result<Var, NumError> {
        let offsets: Arc<[usize]> = offsets.into();
        let ta = self.value(a);
        let n = ta.rows();
        if ta.cols() != 1 || offsets.first() != Some(&0) || offsets.last() != Some(&n) {
            return Err(NumError::ShapeMismatch {
                op: "segment_softmax",
                left: ta.shape(),
                right: (offsets.last().copied().unwrap_or(0), 1),
            });
        }
        let x = ta.data();
        let mut out = vec![0.0; n];
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi < lo {
                return Err(NumError::IndexOutOfRange {
                    op: "segment_softmax",
                    index: lo,
                    bound: hi,
                });
            }
            if lo == hi {
                continue;
            }
            let m = x[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in lo..hi {
                out[i] = (x[i] - m).exp();
                z += out[i];
            }
            for v in &mut out[lo..hi] {
                *v /= z;
            }
        }
        let out = Tensor::from_vec(n, 1, out)?;
        self.push("segment_softmax", out, Op::SegmentSoftmax(a, offsets))
    }

    /// Column-wise maximum over rows, giving a `1×c` row. A matrix with no
    /// rows reduces to a zero row. Ties go to the first row.
    pub fn col_max(&mut self, a: Var) -> Result<Var, NumError> {
        let ta = self.value(a);
        let mut out = Tensor::zeros(1, ta.cols());
        let mut arg = vec![usize::MAX; ta.cols()];
        if ta.rows() > 0 {
            for (c, slot) in arg.iter_mut().enumerate() {
                let mut best = 0;
                for r in 1..ta.rows() {
                    if ta.get(r, c) > ta.get(best, c) {
                        best = r;
                    }
                }
                *slot = best;
                out.set(0, c, ta.get(best, c));
            }
        }
        self.note_selection(&arg);
        self.push("col_max", out, Op::ColMax(a, arg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumError> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a))
    }

    /// Per-row inner products of two same-shape matrices, giving `K×1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("row_dot", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = (0..ta.rows())
            .map(|r| ta.row(r).iter().zip(tb.row(r)).map(|(x, y)| x * y).sum())
            .collect();
        let out = Tensor::from_vec(ta.rows(), 1, data)?;
        self.push("row_dot", out, Op::RowDot(a, b))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients, NumError> {
        let root_shape = self.value(root).shape();
        if root_shape != (1, 1) {
            return Err(NumError::NonScalarRoot(root_shape));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Const => {}
                Op::Param(p) => out.accumulate_dense(*p, &g),
                Op::ParamRows(p, rows) => out.accumulate_rows(*p, rows, &g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = g.matmul_t_unchecked(tb);
                    let gb = ta.t_matmul_unchecked(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    let neg = scaled(&g, -1.0);
                    accumulate(&mut grads, *b, neg);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = hadamard(&g, self.value(*b));
                    let gb = hadamard(&g, self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g);
                }
                Op::MulColumn(a, s) => {
                    let (ta, ts) = (self.value(*a), self.value(*s));
                    let mut ga = g.clone();
                    let mut gs = Tensor::zeros(ts.rows(), 1);
                    for r in 0..g.rows() {
                        let k = ts.data()[r];
                        gs.data_mut()[r] = g.row(r).iter().zip(ta.row(r)).map(|(x, y)| x * y).sum();
                        for v in ga.row_mut(r) {
                            *v *= k;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *s, gs);
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, scaled(&g, *k)),
                Op::LeakyRelu(a, slope) => {
                    let ga = zip_map(&g, self.value(*a), |gv, x| if x > 0.0 { gv } else { slope * gv });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = zip_map(&g, self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&g, &node.value, |gv, y| gv * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Abs(a) => {
                    let ga = zip_map(&g, self.value(*a), |gv, x| {
                        if x > 0.0 {
                            gv
                        } else if x < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Exp(a) => {
                    let ga = hadamard(&g, &node.value);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        let mut gp = Tensor::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + cols]);
                        }
                        c0 += cols;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let data = g.data()[r0 * g.cols()..(r0 + rows) * g.cols()].to_vec();
                        r0 += rows;
                        accumulate(&mut grads, p, Tensor::from_vec(rows, g.cols(), data)?);
                    }
                }
                Op::GatherRows(a, index) => {
                    let ta = self.value(*a);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    for (i, &r) in index.iter().enumerate() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ScatterAddRows(a, index) => {
                    let mut ga = Tensor::zeros(index.len(), g.cols());
                    for (i, &r) in index.iter().enumerate() {
                        ga.row_mut(i).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, offsets) => {
                    let y = node.value.data();
                    let gy = g.data();
                    let mut ga = vec![0.0; y.len()];
                    for w in offsets.windows(2) {
                        let (lo, hi) = (w[0], w[1]);
                        let dot: f64 = (lo..hi).map(|i| y[i] * gy[i]).sum();
                        for i in lo..hi {
                            ga[i] = y[i] * (gy[i] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::from_vec(y.len(), 1, ga)?);
                }
                Op::ColMax(a, arg) => {
                    let ta = self.value(*a);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    for (c, &r) in arg.iter().enumerate() {
                        if r != usize::MAX {
                            ga.set(r, c, g.data()[c]);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Tensor::filled(r, c, g.data()[0]));
                }
                Op::RowDot(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let mut ga = tb.clone();
                    let mut gb = ta.clone();
                    for r in 0..ta.rows() {
                        let k = g.data()[r];
                        for v in ga.row_mut(r) {
                            *v *= k;
                        }
                        for v in gb.row_mut(r) {
                            *v *= k;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(t) => t.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn scaled(g: &Tensor, k: f64) -> Tensor {
    let data = g.data().iter().map(|v| v * k).collect();
    Tensor::from_vec(g.rows(), g.cols(), data).expect("same shape")
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_map(a, b, |x, y| x * y)
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}
