//! Binary container for preprocessed datasets: the encoded samples plus
//! the frozen embedding tables the extractors will read.
//!
//! Layout: magic `FKP1`, version, extents, token ids (u64 LE), pixels
//! (f64 LE bit patterns), labels, length-prefixed UTF-8 ids, then the
//! tables (dim, row count, values each). Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::CHANNELS;
use crate::models::PreparedDataset;
use crate::text::EmbeddingTable;

const MAGIC: &[u8; 4] = b"FKP1";
const VERSION: u64 = 1;

pub fn save_prepared(
    path: &Path,
    data: &PreparedDataset,
    tables: &[EmbeddingTable],
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u64(&mut buf, VERSION);
    push_u64(&mut buf, data.seq_len() as u64);
    push_u64(&mut buf, data.image_height() as u64);
    push_u64(&mut buf, data.image_width() as u64);
    push_u64(&mut buf, data.n_samples() as u64);
    for i in 0..data.n_samples() {
        for &t in data.token_row(i) {
            push_u64(&mut buf, t as u64);
        }
    }
    for i in 0..data.n_samples() {
        for &v in data.image_row(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &label in data.labels() {
        push_u64(&mut buf, label as u64);
    }
    for id in data.ids() {
        push_u64(&mut buf, id.len() as u64);
        buf.extend_from_slice(id.as_bytes());
    }
    push_u64(&mut buf, tables.len() as u64);
    for table in tables {
        push_u64(&mut buf, table.dim as u64);
        push_u64(&mut buf, table.vocab_size() as u64);
        for row in 0..table.vocab_size() {
            for &v in table.row(row) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_prepared(path: &Path) -> Result<(PreparedDataset, Vec<EmbeddingTable>)> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::format(format!(
            "{}: bad magic {magic:?}, expected {MAGIC:?}",
            path.display()
        )));
    }
    let version = r.u64()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let seq_len = r.u64()? as usize;
    let height = r.u64()? as usize;
    let width = r.u64()? as usize;
    let n = r.u64()? as usize;
    let mut token_ids = Vec::with_capacity(n * seq_len);
    for _ in 0..n * seq_len {
        token_ids.push(r.u64()? as usize);
    }
    let mut images = Vec::with_capacity(n * height * width * CHANNELS);
    for _ in 0..n * height * width * CHANNELS {
        images.push(r.f64()?);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.u64()? as usize);
    }
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.u64()? as usize;
        let bytes = r.take(len)?;
        ids.push(String::from_utf8(bytes.to_vec()).map_err(|_| {
            Error::format(format!("{}: sample id is not UTF-8", path.display()))
        })?);
    }
    let n_tables = r.u64()? as usize;
    let mut tables = Vec::with_capacity(n_tables);
    for _ in 0..n_tables {
        let dim = r.u64()? as usize;
        let rows = r.u64()? as usize;
        let mut values = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            values.push(r.f64()?);
        }
        tables.push(EmbeddingTable::from_rows(dim, values)?);
    }
    if r.pos != buf.len() {
        return Err(Error::format(format!(
            "{}: {} trailing bytes",
            path.display(),
            buf.len() - r.pos
        )));
    }
    let data = PreparedDataset::new(seq_len, height, width, token_ids, images, labels, ids)?;
    Ok((data, tables))
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(format!(
                "truncated file: needed {n} bytes at offset {}",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        let bytes = self.take(8)?;
        Ok(u64::from_le_bytes(bytes.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (PreparedDataset, Vec<EmbeddingTable>) {
        let data = PreparedDataset::new(
            2,
            2,
            2,
            vec![2, 3, 4, 0],
            (0..24).map(|i| i as f64 / 24.0).collect(),
            vec![0, 2],
            vec!["alpha".into(), "bêta".into()],
        )
        .unwrap();
        let tables = vec![
            EmbeddingTable::from_rows(2, vec![0.0, 0.0, 0.1, -0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
                .unwrap(),
            EmbeddingTable::from_rows(1, vec![0.0, 0.5, -0.25]).unwrap(),
        ];
        (data, tables)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("prepared.fkp");
        let (data, tables) = sample();
        save_prepared(&path, &data, &tables).unwrap();
        let (data2, tables2) = load_prepared(&path).unwrap();
        assert_eq!(data, data2);
        assert_eq!(tables.len(), tables2.len());
        for (a, b) in tables.iter().zip(&tables2) {
            assert_eq!(a.dim, b.dim);
            assert_eq!(a.vocab_size(), b.vocab_size());
            for row in 0..a.vocab_size() {
                assert_eq!(a.row(row), b.row(row));
            }
        }
    }

    #[test]
    fn bad_magic_and_truncation_are_format_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("prepared.fkp");
        let (data, tables) = sample();
        save_prepared(&path, &data, &tables).unwrap();

        let good = fs::read(&path).unwrap();
        fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_prepared(&path).unwrap_err(), Error::Format(_)));

        fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_prepared(&path).unwrap_err(), Error::Format(_)));

        let mut padded = good;
        padded.push(0);
        fs::write(&path, &padded).unwrap();
        let err = load_prepared(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }
}
