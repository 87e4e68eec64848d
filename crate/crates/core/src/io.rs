//! File formats: binary grids, CSV tables, atomic writes.
//!
//! Binary grid layout (all little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `FQLGRID\0` |
//! | 4 | format version (u32, currently 1) |
//! | 4 | spatial dimension n (u32) |
//! | 4 | layout (u32): 0 Cartesian, 1 polar (rings × angles) |
//! | 4 | components per node (u32) |
//! | 4 | rank r of the shape (u32) |
//! | 8·r | shape (u64 each), slowest axis first |
//! | 16·r | bounding box, (lo, hi) as f64 per axis |
//! | 8 | extra count e (u64) |
//! | 8·e | extra f64 values (polar: the centre value) |
//! | 8·Π shape·components | data, row-major f64 |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FQLGRID\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    Cartesian,
    Polar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub dim: usize,
    pub layout: GridLayout,
    pub components: usize,
    pub shape: Vec<usize>,
    pub bbox: Vec<[f64; 2]>,
    pub extra: Vec<f64>,
    pub data: Vec<f64>,
}

impl GridFile {
    pub fn cartesian(shape: Vec<usize>, bbox: Vec<[f64; 2]>, components: usize, data: Vec<f64>) -> Self {
        GridFile { dim: shape.len(), layout: GridLayout::Cartesian, components, shape, bbox, extra: Vec::new(), data }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        let layout: u32 = match self.layout {
            GridLayout::Cartesian => 0,
            GridLayout::Polar => 1,
        };
        out.extend_from_slice(&layout.to_le_bytes());
        out.extend_from_slice(&(self.components as u32).to_le_bytes());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for s in &self.shape {
            out.extend_from_slice(&(*s as u64).to_le_bytes());
        }
        for b in &self.bbox {
            out.extend_from_slice(&b[0].to_le_bytes());
            out.extend_from_slice(&b[1].to_le_bytes());
        }
        out.extend_from_slice(&(self.extra.len() as u64).to_le_bytes());
        for v in self.extra.iter().chain(&self.data) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Io("not a freqlab grid file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Io(format!("unsupported grid format version {version}")));
        }
        let dim = cur.u32()? as usize;
        let layout = match cur.u32()? {
            0 => GridLayout::Cartesian,
            1 => GridLayout::Polar,
            l => return Err(Error::Io(format!("unknown grid layout {l}"))),
        };
        let components = cur.u32()? as usize;
        let rank = cur.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| cur.u64().map(|v| v as usize)).collect::<Result<_>>()?;
        let bbox: Vec<[f64; 2]> = (0..rank).map(|_| Ok([cur.f64()?, cur.f64()?])).collect::<Result<_>>()?;
        let n_extra = cur.u64()? as usize;
        let extra: Vec<f64> = (0..n_extra).map(|_| cur.f64()).collect::<Result<_>>()?;
        let count = shape.iter().product::<usize>() * components;
        let data: Vec<f64> = (0..count).map(|_| cur.f64()).collect::<Result<_>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Io("trailing bytes after grid data".into()));
        }
        Ok(GridFile { dim, layout, components, shape, bbox, extra, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Io("truncated grid file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let name = path.file_name().ok_or_else(|| Error::Io(format!("invalid output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest round-trip decimal representation; stable across runs.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Builds an RFC-4180 CSV document from a header and rows of numbers.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// CSV document with string cells.
pub fn csv_records(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Pretty JSON with a trailing newline.
pub fn json_string<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}
