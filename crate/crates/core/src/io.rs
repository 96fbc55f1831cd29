//! Dataset file formats.
//!
//! * `fvecs`: per record a little-endian `i32` dimension followed by that
//!   many `f32` values.
//! * `ivecs`: same layout with `i32` payload (ground-truth id lists).
//! * `MANN`: magic `"MANN"`, `u32` version, `u32` dim, `u64` count, then the
//!   raw row-major `f32` payload.
//!
//! Readers report the byte offset of the first malformed field.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::vectors::{NeighborList, NodeId, VectorSet};

pub const MANN_MAGIC: &[u8; 4] = b"MANN";
pub const MANN_VERSION: u32 = 1;

/// On-disk vector formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorFormat {
    Fvecs,
    Mann,
}

impl VectorFormat {
    /// Guesses the format from a file extension (`.fvecs` or `.mann`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "fvecs" => Some(Self::Fvecs),
            "mann" => Some(Self::Mann),
            _ => None,
        }
    }
}

/// Little-endian cursor that remembers where it is for error messages.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.offset(),
                format!("truncated {what}: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8, what)?.try_into().unwrap()))
    }

    /// Reads `n` finite `f32` values.
    pub(crate) fn f32s(&mut self, n: usize, out: &mut Vec<f32>, what: &str) -> Result<()> {
        let start = self.offset();
        let raw = self.bytes(n.checked_mul(4).ok_or_else(|| Error::format(start, "size overflow"))?, what)?;
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(start + 4 * i as u64, format!("non-finite value in {what}")));
            }
            out.push(v);
        }
        Ok(())
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.bytes(4, "magic")?;
        if got != magic {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(
                self.offset(),
                format!("{} trailing bytes", self.remaining()),
            ));
        }
        Ok(())
    }
}

pub fn decode_fvecs(buf: &[u8]) -> Result<VectorSet> {
    let mut r = Reader::new(buf);
    let mut dim = None;
    let mut data = Vec::new();
    while r.remaining() > 0 {
        let at = r.offset();
        let d = r.i32("record dimension")?;
        if d <= 0 {
            return Err(Error::format(at, format!("record dimension {d} is not positive")));
        }
        match dim {
            None => dim = Some(d as usize),
            Some(prev) if prev != d as usize => {
                return Err(Error::format(
                    at,
                    format!("record dimension {d} differs from the first record's {prev}"),
                ))
            }
            _ => {}
        }
        r.f32s(d as usize, &mut data, "record payload")?;
    }
    let dim = dim.ok_or_else(|| Error::format(0, "empty fvecs file"))?;
    VectorSet::new(dim, data)
}

pub fn encode_fvecs(set: &VectorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(set.len() * (4 + 4 * set.dim()));
    for row in set.rows() {
        out.extend_from_slice(&(set.dim() as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_ivecs(buf: &[u8]) -> Result<Vec<Vec<NodeId>>> {
    let mut r = Reader::new(buf);
    let mut dim = None;
    let mut rows = Vec::new();
    while r.remaining() > 0 {
        let at = r.offset();
        let d = r.i32("record dimension")?;
        if d < 0 {
            return Err(Error::format(at, format!("record dimension {d} is negative")));
        }
        match dim {
            None => dim = Some(d as usize),
            Some(prev) if prev != d as usize => {
                return Err(Error::format(
                    at,
                    format!("record dimension {d} differs from the first record's {prev}"),
                ))
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(d as usize);
        for _ in 0..d {
            let at = r.offset();
            let v = r.i32("record payload")?;
            if v < 0 {
                return Err(Error::format(at, format!("negative id {v}")));
            }
            row.push(v as NodeId);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn encode_ivecs<R: AsRef<[NodeId]>>(rows: &[R]) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        let row = row.as_ref();
        out.extend_from_slice(&(row.len() as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&(*v as i32).to_le_bytes());
        }
    }
    out
}

pub fn decode_mann(buf: &[u8]) -> Result<VectorSet> {
    let mut r = Reader::new(buf);
    r.expect_magic(MANN_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != MANN_VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let at = r.offset();
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::format(at, "dimension is zero"));
    }
    let count = r.u64("count")? as usize;
    let n = count
        .checked_mul(dim)
        .ok_or_else(|| Error::format(at, "count * dim overflows"))?;
    let mut data = Vec::with_capacity(n.min(r.remaining() / 4));
    r.f32s(n, &mut data, "payload")?;
    r.finish()?;
    VectorSet::new(dim, data)
}

pub fn encode_mann(set: &VectorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * set.as_slice().len());
    out.extend_from_slice(MANN_MAGIC);
    out.extend_from_slice(&MANN_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for v in set.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<VectorSet> {
    let buf = fs::read(path)?;
    match format {
        VectorFormat::Fvecs => decode_fvecs(&buf),
        VectorFormat::Mann => decode_mann(&buf),
    }
}

pub fn write_vectors(set: &VectorSet, path: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    let bytes = match format {
        VectorFormat::Fvecs => encode_fvecs(set),
        VectorFormat::Mann => encode_mann(set),
    };
    write_atomic(path, &bytes)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<VectorSet> {
    read_vectors(path, VectorFormat::Fvecs)
}

pub fn write_fvecs(set: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    write_vectors(set, path, VectorFormat::Fvecs)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<NodeId>>> {
    decode_ivecs(&fs::read(path)?)
}

pub fn write_ivecs<R: AsRef<[NodeId]>>(rows: &[R], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_ivecs(rows))
}

/// Reads an ivecs ground-truth file as id-only neighbor lists.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<NeighborList>> {
    Ok(read_ivecs(path)?.into_iter().map(NeighborList::from_ids).collect())
}

pub fn write_ground_truth(gt: &[NeighborList], path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<&[NodeId]> = gt.iter().map(|n| n.ids.as_slice()).collect();
    write_ivecs(&rows, path)
}

/// Writes `bytes` to a sibling temporary file and renames it into place, so
/// a failed write never leaves a partial file at `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = temp_sibling(path);
    let res = (|| -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(bytes)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_fvecs() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&2i32.to_le_bytes());
        b.extend_from_slice(&1.0f32.to_le_bytes());
        b.extend_from_slice(&2.0f32.to_le_bytes());
        b
    }

    #[test]
    fn minimal_fvecs_record() {
        let set = decode_fvecs(&minimal_fvecs()).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.len(), 1);
        assert_eq!(set.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut b = minimal_fvecs();
        b.extend_from_slice(&2i32.to_le_bytes());
        b.extend_from_slice(&1.0f32.to_le_bytes());
        match decode_fvecs(&b).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 16),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn inconsistent_dimension_reports_offset() {
        let mut b = minimal_fvecs();
        b.extend_from_slice(&1i32.to_le_bytes());
        b.extend_from_slice(&1.0f32.to_le_bytes());
        match decode_fvecs(&b).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_finite_value_reports_offset() {
        let mut b = minimal_fvecs();
        b[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode_fvecs(&b).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 8),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ivecs_matches_hand_encoded_bytes() {
        // 10 ids per query, written field by field the way the reference
        // tooling does it
        let queries: Vec<Vec<u32>> = vec![(0..10).collect(), (100..110).rev().collect()];
        let mut by_hand = Vec::new();
        for q in &queries {
            by_hand.extend_from_slice(&10i32.to_le_bytes());
            for id in q {
                by_hand.extend_from_slice(&(*id as i32).to_le_bytes());
            }
        }
        assert_eq!(encode_ivecs(&queries), by_hand);
        assert_eq!(decode_ivecs(&by_hand).unwrap(), queries);
    }

    #[test]
    fn mann_rejects_bad_magic_and_trailing_bytes() {
        let set = VectorSet::from_rows(&[[1.0f32, 2.0, 3.0]]).unwrap();
        let mut b = encode_mann(&set);
        assert_eq!(decode_mann(&b).unwrap(), set);
        b.push(0);
        assert!(matches!(decode_mann(&b), Err(Error::Format { .. })));
        let mut bad = encode_mann(&set);
        bad[0] = b'X';
        assert!(matches!(decode_mann(&bad), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let set = decode_fvecs(&minimal_fvecs()).unwrap();
        write_fvecs(&set, &p).unwrap();
        assert_eq!(read_fvecs(&p).unwrap(), set);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
