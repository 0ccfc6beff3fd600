//! Binary checkpoint format.
//!
//! Layout: magic bytes "GCMP", format version u16 (little-endian), a
//! length-prefixed UTF-8 metadata block with one `<name> <dim> <dim> ...`
//! line per parameter, then the raw little-endian f32 values of every
//! parameter in declaration order.

use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GCMP";
pub const VERSION: u16 = 1;

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        kind: "checkpoint",
        detail: detail.into(),
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &[(String, &Tensor<f32>)]) -> Result<()> {
    let mut meta = String::new();
    for (name, t) in params {
        if name.contains(char::is_whitespace) {
            return Err(format_err(format!("parameter name {name:?} contains whitespace")));
        }
        meta.push_str(name);
        for d in t.shape() {
            meta.push(' ');
            meta.push_str(&d.to_string());
        }
        meta.push('\n');
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())?;
    for (_, t) in params {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let meta_len = u32::from_le_bytes(len) as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta = String::from_utf8(meta).map_err(|e| format_err(format!("metadata not UTF-8: {e}")))?;

    let mut out = Vec::new();
    for line in meta.lines() {
        let mut fields = line.split(' ');
        let name = fields
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format_err("empty parameter name"))?;
        let shape: Vec<usize> = fields
            .map(|f| {
                f.parse::<usize>()
                    .map_err(|_| format_err(format!("bad dim {f:?} for {name}")))
            })
            .collect::<Result<_>>()?;
        if shape.is_empty() || shape.contains(&0) {
            return Err(format_err(format!("parameter {name} has invalid shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        let mut buf = vec![0u8; numel * 4];
        r.read_exact(&mut buf)?;
        let data: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::from_vec(&shape, data)?;
        t.check_finite(&format!("checkpoint parameter {name}"))?;
        out.push((name.to_string(), t));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err("trailing bytes after parameters"));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &[(String, &Tensor<f32>)]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(f), params)
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}
