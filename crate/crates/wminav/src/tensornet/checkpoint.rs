//! Versioned text container for parameter checkpoints.
//!
//! Layout (whitespace-delimited):
//!
//! ```text
//! tnck 1
//! meta <key> <value>
//! tensor <name> <rank> <d0> <d1> ...
//! <numel values, shortest round-trip decimal, 8 per line>
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every f64 bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::tensor::Tensor;

pub const FORMAT_TAG: &str = "tnck";
pub const FORMAT_VERSION: u32 = 1;

/// Metadata plus named tensors, as stored in a checkpoint.
pub type CheckpointContents = (BTreeMap<String, String>, Vec<(String, Tensor)>);

/// Writes named tensors plus metadata key/value pairs.
pub fn write_checkpoint<W: Write>(
    writer: W,
    meta: &BTreeMap<String, String>,
    tensors: &[(String, &Tensor)],
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io_err = |e: std::io::Error| Error::io("<checkpoint stream>", e);
    writeln!(w, "{FORMAT_TAG} {FORMAT_VERSION}").map_err(io_err)?;
    for (k, v) in meta {
        if k.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("meta key {k:?} contains whitespace")));
        }
        writeln!(w, "meta {k} {v}").map_err(io_err)?;
    }
    for (name, t) in tensors {
        if name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "tensor name {name:?} contains whitespace"
            )));
        }
        write!(w, "tensor {name} {}", t.shape().len()).map_err(io_err)?;
        for d in t.shape() {
            write!(w, " {d}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
        for chunk in t.data().chunks(8) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" ")).map_err(io_err)?;
        }
    }
    writeln!(w, "end").map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads a checkpoint stream back into metadata and named tensors.
pub fn read_checkpoint<R: Read>(
    reader: R,
) -> Result<CheckpointContents> {
    let r = BufReader::new(reader);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty checkpoint".into()))?
        .map_err(|e| Error::io("<checkpoint stream>", e))?;
    let mut hp = header.split_whitespace();
    if hp.next() != Some(FORMAT_TAG) {
        return Err(Error::Parse(format!("bad checkpoint header {header:?}")));
    }
    let version: u32 = hp
        .next()
        .ok_or_else(|| Error::Parse("missing checkpoint version".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad checkpoint version: {e}")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }

    let mut meta = BTreeMap::new();
    let mut tensors = Vec::new();
    let mut saw_end = false;
    while let Some(line) = lines.next() {
        let line = line.map_err(|e| Error::io("<checkpoint stream>", e))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            None => continue,
            Some("meta") => {
                let key = parts
                    .next()
                    .ok_or_else(|| Error::Parse("meta line without key".into()))?
                    .to_string();
                let value: Vec<&str> = parts.collect();
                meta.insert(key, value.join(" "));
            }
            Some("tensor") => {
                let name = parts
                    .next()
                    .ok_or_else(|| Error::Parse("tensor line without name".into()))?
                    .to_string();
                let rank: usize = parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("tensor {name}: missing rank")))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("tensor {name}: bad rank: {e}")))?;
                let mut shape = Vec::with_capacity(rank);
                for _ in 0..rank {
                    let d: usize = parts
                        .next()
                        .ok_or_else(|| Error::Parse(format!("tensor {name}: missing extent")))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("tensor {name}: bad extent: {e}")))?;
                    shape.push(d);
                }
                let numel: usize = shape.iter().product();
                let mut data = Vec::with_capacity(numel);
                while data.len() < numel {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::Parse(format!("tensor {name}: truncated payload")))?
                        .map_err(|e| Error::io("<checkpoint stream>", e))?;
                    for tok in line.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|e| Error::Parse(format!("tensor {name}: bad value: {e}")))?;
                        data.push(v);
                    }
                }
                if data.len() != numel {
                    return Err(Error::Parse(format!(
                        "tensor {name}: {} values for {numel} elements",
                        data.len()
                    )));
                }
                tensors.push((name, Tensor::new(shape, data)?));
            }
            Some("end") => {
                saw_end = true;
                break;
            }
            Some(other) => {
                return Err(Error::Parse(format!("unexpected checkpoint record {other:?}")));
            }
        }
    }
    if !saw_end {
        return Err(Error::Parse("checkpoint missing end marker".into()));
    }
    Ok((meta, tensors))
}

pub fn write_checkpoint_file(
    path: &Path,
    meta: &BTreeMap<String, String>,
    tensors: &[(String, &Tensor)],
) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(f, meta, tensors)
}

pub fn read_checkpoint_file(
    path: &Path,
) -> Result<CheckpointContents> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(f)
}
