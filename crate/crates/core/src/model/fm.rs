use crate::numcore::{NumError, Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct FmWeights {
    /// `1×1` global bias.
    pub b0: Var,
    /// `1×d′` linear weights.
    pub w: Var,
    /// `d′×k` factor matrix.
    pub v: Var,
}

/// `½ Σ_f [(z V)_f² − (z²)(V²)_f]`, the sum of `⟨v_i, v_j⟩ z_i z_j` over
/// `i < j` in linear time.
pub fn pairwise_interaction(tape: &mut Tape, z: Var, v: Var) -> Result<Var, NumError> {
    let zv = tape.matmul(z, v)?;
    let zv2 = tape.mul(zv, zv)?;
    let z2 = tape.mul(z, z)?;
    let v2 = tape.mul(v, v)?;
    let cross = tape.matmul(z2, v2)?;
    let diff = tape.sub(zv2, cross)?;
    let total = tape.sum(diff)?;
    tape.scale(total, 0.5)
}

/// `b0 + bu + bi + z wᵀ + pairwise(z)`; missing entity biases count as zero.
pub fn fm_predict(
    tape: &mut Tape,
    z: Var,
    weights: &FmWeights,
    user_bias: Option<Var>,
    item_bias: Option<Var>,
) -> Result<Var, NumError> {
    let mut y = tape.row_dot(z, weights.w)?;
    y = tape.add(y, weights.b0)?;
    for b in [user_bias, item_bias].into_iter().flatten() {
        y = tape.add(y, b)?;
    }
    let pair = pairwise_interaction(tape, z, weights.v)?;
    tape.add(y, pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{ParameterStore, Tensor};

    #[test]
    fn two_feature_example() {
        let mut s = ParameterStore::new();
        s.insert("b0", Tensor::scalar(0.0)).unwrap();
        s.insert("w", Tensor::row_vector(&[0.5, 0.5])).unwrap();
        // ⟨v1, v2⟩ = 3
        s.insert("v", Tensor::from_rows(&[&[1.0, 1.0], &[1.0, 2.0]])).unwrap();
        let mut t = Tape::new(&s);
        let fw = FmWeights {
            b0: t.param("b0").unwrap(),
            w: t.param("w").unwrap(),
            v: t.param("v").unwrap(),
        };
        let z = t.constant(Tensor::row_vector(&[1.0, 2.0])).unwrap();
        let y = fm_predict(&mut t, z, &fw, None, None).unwrap();
        assert!((t.scalar(y).unwrap() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn biases_add() {
        let mut s = ParameterStore::new();
        s.insert("b0", Tensor::scalar(3.5)).unwrap();
        s.insert("w", Tensor::zeros(1, 2)).unwrap();
        s.insert("v", Tensor::zeros(2, 1)).unwrap();
        s.insert("bu", Tensor::scalar(0.25)).unwrap();
        let mut t = Tape::new(&s);
        let fw = FmWeights {
            b0: t.param("b0").unwrap(),
            w: t.param("w").unwrap(),
            v: t.param("v").unwrap(),
        };
        let bu = t.param("bu").unwrap();
        let z = t.constant(Tensor::row_vector(&[4.0, -1.0])).unwrap();
        let y = fm_predict(&mut t, z, &fw, Some(bu), None).unwrap();
        assert_eq!(t.scalar(y).unwrap(), 3.75);
    }
}
