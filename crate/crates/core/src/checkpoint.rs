//! Checkpoint file format.
//!
//! Layout: magic bytes `SDDRV1`, version u32 LE, entry count u32 LE, then per
//! entry: name length u32, name bytes (UTF-8), dtype tag u8 (0=f32, 1=f64),
//! rank u32, extents as u64 each, raw little-endian values. Unknown versions
//! and dtype tags are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dtype, Scalar, Tensor};

pub const MAGIC: &[u8; 6] = b"SDDRV1";
pub const VERSION: u32 = 1;

fn corrupt(detail: impl Into<String>) -> Error {
    Error::Corrupt {
        what: "checkpoint".into(),
        detail: detail.into(),
    }
}

pub fn save_named_tensors<T: Scalar>(path: &Path, entries: &[(String, &Tensor<T>)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[T::DTYPE as u8])?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes_vec())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| corrupt("unexpected end of file"))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Load all entries, converting values to scalar type `T`.
pub fn load_named_tensors<T: Scalar>(path: &Path) -> Result<Vec<(String, Tensor<T>)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(corrupt(format!("unknown version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(corrupt(format!("implausible name length {name_len}")));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes)?;
        let name = String::from_utf8(name_bytes).map_err(|_| corrupt("name is not UTF-8"))?;
        let mut tag = [0u8; 1];
        read_exact(&mut r, &mut tag)?;
        let dtype = Dtype::from_tag(tag[0])?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(corrupt(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        if n > 1 << 30 {
            return Err(corrupt(format!("implausible tensor size {n}")));
        }
        let width = match dtype {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        };
        let mut raw = vec![0u8; n * width];
        read_exact(&mut r, &mut raw)?;
        let data: Vec<T> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| T::c(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| T::c(f64::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        };
        out.push((name, Tensor::new(shape, data)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_f32_and_f64() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.sddrv");
        let a = Tensor::<f64>::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-7, 42.0]);
        let b = Tensor::<f64>::new(vec![4], vec![9.0, 8.0, 7.0, 6.0]);
        save_named_tensors(&p, &[("enc.w".into(), &a), ("enc.b".into(), &b)]).unwrap();
        let loaded = load_named_tensors::<f64>(&p).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "enc.w");
        assert_eq!(loaded[0].1, a);
        assert_eq!(loaded[1].1, b);
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.sddrv");
        let t = Tensor::<f32>::new(vec![1], vec![1.0]);
        save_named_tensors(&p, &[("x".into(), &t)]).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[6] = 99; // version field
        std::fs::write(&p, bytes).unwrap();
        let err = load_named_tensors::<f32>(&p).unwrap_err();
        assert!(err.to_string().contains("unknown version"));
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.sddrv");
        std::fs::write(&p, b"NOTFMT\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(load_named_tensors::<f32>(&p).is_err());
    }

    #[test]
    fn rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.sddrv");
        let t = Tensor::<f32>::new(vec![8], vec![1.0; 8]);
        save_named_tensors(&p, &[("x".into(), &t)]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load_named_tensors::<f32>(&p).is_err());
    }
}
