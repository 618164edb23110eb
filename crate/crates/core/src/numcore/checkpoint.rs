//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "RGNNCKPT" | u32 version
//! u32 meta_len | meta bytes (UTF-8, free-form key=value lines)
//! u32 n_params | n × (u32 name_len | name | u64 rows | u64 cols | rows·cols × f64)
//! u8 has_optimizer
//!   [u64 step | f64 lr | f64 beta1 | f64 beta2 | f64 eps
//!    | n × first-moment values | n × second-moment values]
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{AdamConfig, AdamState, ParameterStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RGNNCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub params: ParameterStore,
    pub optimizer: Option<AdamState>,
}

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, vals: &[f64]) -> io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| get_f64(r)).collect()
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, ckpt.metadata.len() as u32)?;
    w.write_all(ckpt.metadata.as_bytes())?;
    put_u32(w, ckpt.params.len() as u32)?;
    for (name, t) in ckpt.params.iter() {
        put_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u64(w, t.rows() as u64)?;
        put_u64(w, t.cols() as u64)?;
        put_f64s(w, t.data())?;
    }
    match &ckpt.optimizer {
        None => w.write_all(&[0])?,
        Some(state) => {
            if state.first.len() != ckpt.params.len() {
                return Err(CheckpointError::Malformed(
                    "optimizer state does not mirror parameters".into(),
                ));
            }
            w.write_all(&[1])?;
            put_u64(w, state.step)?;
            let c = state.config;
            put_f64s(w, &[c.learning_rate, c.beta1, c.beta2, c.epsilon])?;
            for m in state.first.iter().chain(&state.second) {
                put_f64s(w, m.data())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = get_u32(r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let metadata =
        String::from_utf8(meta).map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    let n = get_u32(r)? as usize;
    let mut params = ParameterStore::new();
    for _ in 0..n {
        let name_len = get_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let rows = get_u64(r)? as usize;
        let cols = get_u64(r)? as usize;
        let data = get_f64s(r, rows * cols)?;
        let t = Tensor::from_vec(rows, cols, data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        params
            .insert(name, t)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    }

    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let optimizer = match flag[0] {
        0 => None,
        1 => {
            let step = get_u64(r)?;
            let config = AdamConfig {
                learning_rate: get_f64(r)?,
                beta1: get_f64(r)?,
                beta2: get_f64(r)?,
                epsilon: get_f64(r)?,
            };
            let mut moments = Vec::with_capacity(2 * n);
            for _ in 0..2 {
                for (_, t) in params.iter() {
                    let data = get_f64s(r, t.len())?;
                    moments.push(Tensor::from_vec(t.rows(), t.cols(), data).expect("sized"));
                }
            }
            let second = moments.split_off(n);
            Some(AdamState::from_parts(config, step, moments, second))
        }
        other => {
            return Err(CheckpointError::Malformed(format!(
                "optimizer flag {other}"
            )))
        }
    };
    Ok(Checkpoint {
        metadata,
        params,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{adam_step, DenseGradients, Init};
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, with_opt in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParameterStore::new();
            store.declare("a", rows, cols, Init::Uniform(1e3), &mut rng).unwrap();
            store.declare("b.bias", 1, cols, Init::FanIn, &mut rng).unwrap();
            let optimizer = with_opt.then(|| {
                let mut st = AdamState::new(&store, AdamConfig::default());
                let mut s2 = store.clone();
                let mut g = DenseGradients::zeros_like(&s2);
                g.add_scaled_params(&store, 0.5);
                adam_step(&mut s2, &g, &mut st).unwrap();
                st
            });
            let ckpt = Checkpoint { metadata: "d0=4\nseed=1\n".into(), params: store, optimizer };
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &ckpt).unwrap();
            let back = read_checkpoint(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, ckpt);
        }
    }

    #[test]
    fn rejects_foreign_bytes() {
        let err = read_checkpoint(&mut &b"NOTACKPTxxxx"[..]).unwrap_err();
        assert!(matches!(err, CheckpointError::BadMagic));
    }
}
