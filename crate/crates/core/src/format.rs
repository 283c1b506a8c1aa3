//! `SRT1` binary tensor files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SRT1" | rank: u32 | extents: rank × u32 | payload: len × f64, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, MAX_RANK};

pub const MAGIC: &[u8; 4] = b"SRT1";

pub fn write_tensor<T: Scalar, W: Write>(t: &Tensor<T>, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &extent in t.shape() {
        let extent = u32::try_from(extent)
            .map_err(|_| Error::Format(format!("extent {extent} does not fit in u32")))?;
        out.write_all(&extent.to_le_bytes())?;
    }
    let mut payload = Vec::with_capacity(t.len() * 8);
    for &v in t.data() {
        payload.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out.write_all(&payload)?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_tensor<T: Scalar, R: Read>(mut input: R) -> Result<Tensor<T>> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let rank = read_u32(&mut input)? as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::Format(format!("unsupported rank {rank}")));
    }
    let shape = (0..rank)
        .map(|_| read_u32(&mut input).map(|e| e as usize))
        .collect::<Result<Vec<_>>>()?;
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::Format(format!("shape {shape:?} overflows")))?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != len * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, shape {shape:?} needs {}",
            payload.len(),
            len * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Tensor::new(&shape, data)
}

pub fn to_bytes<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tensor(t, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    read_tensor(bytes)
}

pub fn save<T: Scalar>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(t))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    from_bytes(&fs::read(path)?)
}
