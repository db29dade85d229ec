use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ArchSpec, DecoderModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"TSWT";

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchSpec,
    input_dim: usize,
    width: usize,
    seed: u64,
    step: u64,
    n_params: usize,
    n_running: usize,
}

/// JSON header line, then `TSWT`, a little-endian u32 value count and the
/// parameters followed by the running statistics as little-endian f32.
pub fn to_bytes<T: Real>(model: &DecoderModel<T>) -> Vec<u8> {
    let header = Header {
        arch: model.arch.clone(),
        input_dim: model.input_dim(),
        width: model.output_width(),
        seed: model.seed,
        step: model.step,
        n_params: model.params.len(),
        n_running: model.running.len(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(MAGIC);
    let count = model.params.len() + model.running.len();
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for v in model.params.iter().chain(&model.running) {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn from_bytes<T: Real>(bytes: &[u8], name: &str) -> Result<DecoderModel<T>> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::format(name, "missing header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::format(name, e.to_string()))?;
    let rest = &bytes[nl + 1..];
    if rest.len() < 8 || &rest[..4] != MAGIC {
        return Err(Error::format(name, "missing TSWT block"));
    }
    let count = u32::from_le_bytes(rest[4..8].try_into().unwrap()) as usize;
    if count != header.n_params + header.n_running || rest.len() != 8 + 4 * count {
        return Err(Error::format(name, "parameter count disagrees with header"));
    }
    let mut model = DecoderModel::<T>::new(header.arch, header.seed)?;
    if model.params.len() != header.n_params || model.running.len() != header.n_running {
        return Err(Error::format(name, "architecture disagrees with parameter counts"));
    }
    if model.input_dim() != header.input_dim || model.output_width() != header.width {
        return Err(Error::format(name, "architecture disagrees with header dimensions"));
    }
    let vals: Vec<T> =
        rest[8..].chunks_exact(4).map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(name, "non-finite parameter"));
    }
    let (p, r) = vals.split_at(header.n_params);
    model.params = p.to_vec();
    model.running = r.to_vec();
    model.step = header.step;
    Ok(model)
}

pub fn save<T: Real>(model: &DecoderModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<DecoderModel<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, &path.display().to_string())
}
