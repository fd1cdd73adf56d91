//! Binary weight checkpoints.
//!
//! Layout, all integers little endian:
//!   magic "AMCW" | version u16 | tensor count u32
//! then per tensor:
//!   name length u16 | name bytes (UTF-8) | rank u8 | extent u32 per axis
//!   | payload, one f64 per element, row major.
//!
//! Writing the same tensors twice produces identical bytes, so saved models
//! can be compared with a plain byte diff.

use super::Tensor;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"AMCW";
const VERSION: u16 = 1;
const MAX_NAME: usize = 4096;
const MAX_NUMEL: u64 = 1 << 28;

pub fn write_checkpoint<W: Write>(w: &mut W, tensors: &[(&str, &Tensor)]) -> Result<()> {
    if tensors.len() > u32::MAX as usize {
        return Err(Error::Data("too many tensors for one checkpoint".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        let nb = name.as_bytes();
        if nb.is_empty() || nb.len() > MAX_NAME {
            return Err(Error::Data(format!("bad tensor name length {}", nb.len())));
        }
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&[t.shape.len() as u8])?;
        for &e in &t.shape {
            w.write_all(&(e as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 8);
        for &v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    read_all(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("not a weight checkpoint (magic {magic:02x?})")));
    }
    let version = read_u16(r)?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = read_u16(r)? as usize;
        if name_len == 0 || name_len > MAX_NAME {
            return Err(Error::Data(format!("bad tensor name length {name_len}")));
        }
        let mut nb = vec![0u8; name_len];
        read_all(r, &mut nb)?;
        let name = String::from_utf8(nb).map_err(|_| Error::Data("tensor name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        read_all(r, &mut rank)?;
        let rank = rank[0] as usize;
        if rank > 4 {
            return Err(Error::Data(format!("tensor '{name}' has rank {rank}, expected at most 4")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut numel: u64 = 1;
        for _ in 0..rank {
            let e = read_u32(r)? as u64;
            numel = numel.saturating_mul(e);
            shape.push(e as usize);
        }
        if numel > MAX_NUMEL {
            return Err(Error::Data(format!("tensor '{name}' payload is implausibly large ({numel} elements)")));
        }
        let mut payload = vec![0u8; numel as usize * 8];
        read_all(r, &mut payload)?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
            .collect();
        out.push((name, Tensor::from_vec(&shape, data)));
    }
    // Trailing garbage means the file is not what the header claims.
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(out),
        Ok(_) => Err(Error::Data("trailing bytes after final tensor".into())),
        Err(e) => Err(e.into()),
    }
}

pub fn save_checkpoint<P: AsRef<Path>>(path: P, tensors: &[(&str, &Tensor)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Vec<(String, Tensor)>> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

fn read_all<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Data("checkpoint truncated".into())
        } else {
            e.into()
        }
    })
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    read_all(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_all(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
