//! Binary parameter container.
//!
//! Layout: magic `FKT1`, then one record per parameter in set order:
//! name length (u64 LE), name bytes (UTF-8), rank (u64 LE), extents
//! (u64 LE each), values (f64 LE bit patterns). Records run to EOF.
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

const MAGIC: &[u8; 4] = b"FKT1";

pub fn save_checkpoint(path: &Path, params: &ParamSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for p in params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name)?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u64).to_le_bytes())?;
        for &e in shape {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for &v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(format!("{}: shorter than its magic", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::format(format!(
            "{}: bad magic {:?}, expected {:?}",
            path.display(),
            magic,
            MAGIC
        )));
    }
    let mut params = ParamSet::new();
    while let Some(len) = read_u64_or_eof(&mut r)? {
        let name_len = len as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact_or_format(&mut r, &mut name_bytes, path, "parameter name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::format(format!("{}: parameter name is not UTF-8", path.display())))?;
        let rank = read_u64_or_format(&mut r, path, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64_or_format(&mut r, path, "extent")? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            read_exact_or_format(&mut r, &mut buf, path, "values")?;
            data.push(f64::from_le_bytes(buf));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        params
            .add(name, tensor)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    }
    Ok(params)
}

fn read_u64_or_eof(r: &mut impl Read) -> Result<Option<u64>> {
    let mut buf = [0u8; 8];
    let mut filled = 0;
    while filled < 8 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(Error::format("truncated record header"));
        }
        filled += n;
    }
    Ok(Some(u64::from_le_bytes(buf)))
}

fn read_u64_or_format(r: &mut impl Read, path: &Path, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact_or_format(r, &mut buf, path, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(format!("{}: truncated while reading {what}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_params() -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add(
            "layer/weight",
            Tensor::new(vec![2, 3], vec![1.5, -2.25, 0.0, f64::MIN_POSITIVE, 1e300, -0.1]).unwrap(),
        )
        .unwrap();
        ps.add("layer/bias", Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap())
            .unwrap();
        ps
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fkt");
        let ps = sample_params();
        save_checkpoint(&path, &ps).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), ps.len());
        for (a, b) in ps.iter().zip(loaded.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.shape(), b.value.shape());
            let bits_a: Vec<u64> = a.value.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.fkt");
        std::fs::write(&path, b"NOPE somepayload").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn truncated_record_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fkt");
        save_checkpoint(&path, &sample_params()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn empty_set_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.fkt");
        save_checkpoint(&path, &ParamSet::new()).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().len(), 0);
    }
}
