//! Binary weight checkpoints: little-endian, header {magic "ABDP1",
//! architecture hash, tensor count}, then per tensor {name, shape, f32
//! data}. Normalization statistics ride along as two extra tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net;
use super::tensor::{ParamStore, Tensor};
use super::{ActionNorm, ACTION_DIM};
use crate::config::PolicyConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"ABDP1";
const NORM_MEAN: &str = "norm/mean";
const NORM_STD: &str = "norm/std";

pub fn save(path: &Path, cfg: &PolicyConfig, params: &ParamStore, norm: &ActionNorm) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&cfg.shape_hash().to_le_bytes())?;
    let count = (params.len() + 2) as u32;
    w.write_all(&count.to_le_bytes())?;
    for (name, t) in params.iter() {
        write_tensor(&mut w, name, t)?;
    }
    write_tensor(&mut w, NORM_MEAN, &Tensor::row_vec(norm.mean.to_vec()))?;
    write_tensor(&mut w, NORM_STD, &Tensor::row_vec(norm.std.to_vec()))?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path, cfg: &PolicyConfig) -> Result<(ParamStore, ActionNorm)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Policy(format!(
            "bad checkpoint magic {magic:?} in {}",
            path.display()
        )));
    }
    let hash = read_u64(&mut r)?;
    if hash != cfg.shape_hash() {
        return Err(Error::Policy(
            "checkpoint was written under a different architecture".into(),
        ));
    }
    let count = read_u32(&mut r)? as usize;

    // Shapes come from a freshly built store; values are then overwritten.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = net::build_params(cfg, &mut rng);
    let mut filled = vec![false; params.len()];
    let mut norm = ActionNorm::identity();
    let mut saw_norm = (false, false);

    for _ in 0..count {
        let (name, t) = read_tensor(&mut r)?;
        match name.as_str() {
            NORM_MEAN => {
                norm.mean = to_array(&t)?;
                saw_norm.0 = true;
            }
            NORM_STD => {
                norm.std = to_array(&t)?;
                saw_norm.1 = true;
            }
            _ => {
                let id = params
                    .iter()
                    .position(|(n, _)| n == name)
                    .ok_or_else(|| Error::Policy(format!("unknown tensor {name}")))?;
                let dst = params.get_mut(id);
                if (dst.rows, dst.cols) != (t.rows, t.cols) {
                    return Err(Error::Policy(format!(
                        "tensor {name} has shape {}x{}, expected {}x{}",
                        t.rows, t.cols, dst.rows, dst.cols
                    )));
                }
                *dst = t;
                filled[id] = true;
            }
        }
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        let name = params.iter().nth(missing).map(|(n, _)| n.to_string());
        return Err(Error::Policy(format!(
            "checkpoint missing tensor {}",
            name.unwrap_or_default()
        )));
    }
    if !(saw_norm.0 && saw_norm.1) {
        return Err(Error::Policy("checkpoint missing normalization stats".into()));
    }
    Ok((params, norm))
}

fn to_array(t: &Tensor) -> Result<[f64; ACTION_DIM]> {
    if t.len() != ACTION_DIM {
        return Err(Error::Policy(format!(
            "normalization tensor has {} entries, expected {ACTION_DIM}",
            t.len()
        )));
    }
    let mut a = [0.0; ACTION_DIM];
    a.copy_from_slice(&t.data);
    Ok(a)
}

fn write_tensor(w: &mut impl Write, name: &str, t: &Tensor) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(t.rows as u32).to_le_bytes())?;
    w.write_all(&(t.cols as u32).to_le_bytes())?;
    for &v in &t.data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor(r: &mut impl Read) -> Result<(String, Tensor)> {
    let name_len = read_u32(r)? as usize;
    if name_len > 4096 {
        return Err(Error::Policy(format!("tensor name length {name_len}")));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|_| Error::Policy("tensor name is not utf-8".into()))?;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    if rows.saturating_mul(cols) > 64 << 20 {
        return Err(Error::Policy(format!("tensor {name} too large")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 4];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf)?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    Ok((name, Tensor::from_vec(rows, cols, data)))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
