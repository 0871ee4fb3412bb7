use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use autodiff::Tensor;
use sha2::{Digest, Sha256};

use super::Module;
use crate::error::{Error, IoContext, Result};

const MAGIC: &[u8; 8] = b"EMOFACEW";

/// Serialises every parameter as `name, shape, little-endian f64 data`.
pub fn write_weights(module: &dyn Module, out: &mut impl Write) -> std::io::Result<()> {
    let params = module.named_parameters();
    out.write_all(MAGIC)?;
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for (name, t) in params {
        out.write_all(&(name.len() as u64).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.ndim() as u64).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_weights(module: &dyn Module, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_weights(module, &mut buf).at(path)?;
    std::fs::write(path, buf).at(path)
}

/// Parses a weight file into `name -> tensor`.
pub fn read_weights(mut input: impl Read) -> Result<HashMap<String, Tensor>> {
    let bad = |m: &str| Error::Config(format!("weight file: {m}"));
    let u64_at = |input: &mut dyn Read| -> Result<u64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b).map_err(|_| bad("truncated"))?;
        Ok(u64::from_le_bytes(b))
    };
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| bad("truncated"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let count = u64_at(&mut input)?;
    let mut out = HashMap::new();
    for _ in 0..count {
        let len = u64_at(&mut input)? as usize;
        if len > 4096 {
            return Err(bad("name too long"));
        }
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(|_| bad("truncated"))?;
        let name = String::from_utf8(name).map_err(|_| bad("name is not utf-8"))?;
        let ndim = u64_at(&mut input)? as usize;
        if ndim > 8 {
            return Err(bad("too many dimensions"));
        }
        let shape = (0..ndim)
            .map(|_| u64_at(&mut input).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        input.read_exact(&mut raw).map_err(|_| bad("truncated"))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.insert(name, Tensor::param(data, &shape));
    }
    Ok(out)
}

/// Loads `path` into `module`, which must have exactly the same parameter
/// names and shapes.
pub fn load_weights(module: &mut dyn Module, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).at(path)?;
    let mut stored = read_weights(bytes.as_slice())?;
    let mut err = None;
    module.visit_mut("", &mut |name, p| {
        if err.is_some() {
            return;
        }
        match stored.remove(name) {
            Some(t) if t.shape() == p.shape() => *p = t,
            Some(t) => {
                err = Some(Error::Config(format!(
                    "{}: {name} has shape {:?}, model expects {:?}",
                    path.display(),
                    t.shape(),
                    p.shape()
                )))
            }
            None => err = Some(Error::Config(format!("{}: missing parameter {name}", path.display()))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if let Some(extra) = stored.keys().next() {
        return Err(Error::Config(format!("{}: unexpected parameter {extra}", path.display())));
    }
    Ok(())
}

/// SHA-256 of a file, hex encoded.
pub fn weights_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path).at(path)?)))
}
