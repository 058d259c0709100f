//! Model checkpoint format.
//!
//! ```text
//! magic        8 bytes   "TS2IMGNN"
//! version      u32 LE    1
//! header_len   u32 LE
//! header       JSON      {"spec": NetworkSpec, "classes": [..]}
//! param_count  u64 LE
//! params       f32 LE × param_count
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TS2IMGNN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    classes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network,
    pub classes: Vec<String>,
}

pub fn write_checkpoint<W: Write>(mut out: W, net: &Network, classes: &[String]) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        spec: net.spec().clone(),
        classes: classes.to_vec(),
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&(net.num_params() as u64).to_le_bytes())?;
    for &p in net.params() {
        out.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a model checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let header_len = read_u32(&mut input)? as usize;
    let mut header = vec![0u8; header_len];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut network = Network::zeroed(header.spec)?;
    let mut count = [0u8; 8];
    input.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != network.num_params() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {count} parameters, its spec needs {}",
            network.num_params()
        )));
    }
    let mut blob = vec![0u8; count * 4];
    input
        .read_exact(&mut blob)
        .map_err(|e| Error::Checkpoint(format!("truncated parameter blob: {e}")))?;
    for (p, bytes) in network.params_mut().iter_mut().zip(blob.chunks_exact(4)) {
        *p = f32::from_le_bytes(bytes.try_into().expect("4-byte chunk")) as f64;
    }
    Ok(Checkpoint {
        network,
        classes: header.classes,
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &Network, classes: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut out, net, classes)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
