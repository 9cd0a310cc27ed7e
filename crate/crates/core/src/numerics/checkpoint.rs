//! Parameter checkpoints: a text manifest plus a raw little-endian blob.
//!
//! ```text
//! wavediff-checkpoint 1
//! data lfd.bin
//! tensor blocks.0.conv1.w 192 64
//! ...
//! sha256 <hex digest of the blob>
//! ```
//!
//! The blob holds every tensor's values as `f64` little-endian, row-major,
//! in manifest order.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::ParameterSet;
use super::Tensor2D;
use crate::error::{Error, Result};

const MAGIC: &str = "wavediff-checkpoint 1";

fn blob(ps: &ParameterSet) -> Vec<u8> {
    ps.slots()
        .iter()
        .flat_map(|s| s.value.to_le_bytes())
        .collect()
}

/// Hex SHA-256 of the parameter blob.
pub fn checksum(ps: &ParameterSet) -> String {
    hex::encode(Sha256::digest(blob(ps)))
}

/// Writes `<dir>/<stem>.manifest` and `<dir>/<stem>.bin`.
pub fn save(ps: &ParameterSet, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let data = blob(ps);
    let mut manifest = format!("{MAGIC}\ndata {stem}.bin\n");
    for s in ps.slots() {
        manifest.push_str(&format!(
            "tensor {} {} {}\n",
            s.name,
            s.value.rows(),
            s.value.cols()
        ));
    }
    manifest.push_str(&format!("sha256 {}\n", hex::encode(Sha256::digest(&data))));
    fs::write(dir.join(format!("{stem}.bin")), &data)?;
    fs::write(dir.join(format!("{stem}.manifest")), manifest)?;
    Ok(())
}

/// Reads a checkpoint into a fresh set (optimizer state zeroed).
pub fn load(dir: &Path, stem: &str) -> Result<ParameterSet> {
    let text = fs::read_to_string(dir.join(format!("{stem}.manifest")))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!("{stem}: bad header")));
    }
    let mut data_file = None;
    let mut shapes = Vec::new();
    let mut digest = None;
    for (n, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["data", f] => data_file = Some(f.to_string()),
            ["tensor", name, r, c] => {
                let parse = |v: &str| {
                    v.parse::<usize>().map_err(|_| Error::Parse {
                        line: n + 2,
                        message: format!("bad dimension `{v}`"),
                    })
                };
                shapes.push((name.to_string(), parse(r)?, parse(c)?));
            }
            ["sha256", h] => digest = Some(h.to_string()),
            [] => {}
            _ => {
                return Err(Error::Parse {
                    line: n + 2,
                    message: format!("unrecognised manifest line `{line}`"),
                })
            }
        }
    }
    let data_file =
        data_file.ok_or_else(|| Error::Checkpoint(format!("{stem}: missing data line")))?;
    let digest = digest.ok_or_else(|| Error::Checkpoint(format!("{stem}: missing checksum")))?;
    let bytes = fs::read(dir.join(data_file))?;
    if hex::encode(Sha256::digest(&bytes)) != digest {
        return Err(Error::Checkpoint(format!("{stem}: checksum mismatch")));
    }
    let expected: usize = shapes.iter().map(|(_, r, c)| r * c * 8).sum();
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "{stem}: blob has {} bytes, manifest needs {expected}",
            bytes.len()
        )));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut ps = ParameterSet::new();
    for (name, r, c) in shapes {
        let v: Vec<f64> = values.by_ref().take(r * c).collect();
        ps.add(name, Tensor2D::from_vec(r, c, v)?);
    }
    Ok(ps)
}

/// Copies values from `src` into `dst`, requiring identical names and shapes.
pub fn restore_into(dst: &mut ParameterSet, src: &ParameterSet) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, checkpoint has {}",
            dst.len(),
            src.len()
        )));
    }
    for id in dst.ids().collect::<Vec<_>>() {
        let name = dst.name(id).to_string();
        let sid = src
            .find(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
        if src.value(sid).shape() != dst.value(id).shape() {
            return Err(Error::Checkpoint(format!("shape mismatch for `{name}`")));
        }
        *dst.value_mut(id) = src.value(sid).clone();
    }
    Ok(())
}
