//! Binary embedding dumps and their line-delimited sidecars.
//!
//! A dump is a fixed header — 8 magic bytes, `u64` row count, `u32` dimension,
//! all little-endian — followed by row-major vectors stored as 32-bit
//! little-endian floats. The sidecar carries one JSON object per row mapping
//! it back to its source example, layer, and masked flag; rows that could not
//! be encoded are written as all-NaN sentinels and flagged there.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 8] = b"LXEMB001";

/// One sidecar line: where row `row` of the dump came from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SidecarEntry {
    pub row: usize,
    /// Position of the source example in the encoded collection.
    pub example: usize,
    pub lemma: String,
    pub sense_id: String,
    pub layer: usize,
    pub masked: bool,
    /// Present when the row is a sentinel instead of a real vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// In-memory view of a dump: `rows x dim`, sentinel rows kept as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl EmbeddingDump {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row content, or `None` for sentinel (all-NaN) rows.
    pub fn valid_row(&self, i: usize) -> Option<&[f64]> {
        let row = self.rows.get(i)?;
        if row.iter().all(|x| x.is_nan()) { None } else { Some(row) }
    }
}

pub fn write_dump<W: Write>(w: &mut W, dim: usize, rows: &[Vec<f64>]) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    for row in rows {
        if row.len() != dim {
            return Err(Error::Format(format!(
                "row length {} does not match dump dimension {dim}",
                row.len()
            )));
        }
        for &x in row {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dump<R: Read>(r: &mut R) -> Result<EmbeddingDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Format("bad magic bytes: not an embedding dump".into()));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n_rows = u64::from_le_bytes(buf8) as usize;
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut buf4)?;
            row.push(f32::from_le_bytes(buf4) as f64);
        }
        rows.push(row);
    }
    Ok(EmbeddingDump { dim, rows })
}

pub fn write_dump_file(path: &Path, dim: usize, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dump(&mut w, dim, rows)?;
    w.flush()?;
    Ok(())
}

pub fn read_dump_file(path: &Path) -> Result<EmbeddingDump> {
    read_dump(&mut BufReader::new(File::open(path)?))
}

pub fn write_sidecar<W: Write>(w: &mut W, entries: &[SidecarEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_sidecar<R: BufRead>(r: R) -> Result<Vec<SidecarEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: SidecarEntry = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_is_bit_stable() {
        let rows = vec![vec![1.0, -2.5, 3.25], vec![f64::NAN, f64::NAN, f64::NAN]];
        let mut a = Vec::new();
        write_dump(&mut a, 3, &rows).unwrap();
        let mut b = Vec::new();
        write_dump(&mut b, 3, &rows).unwrap();
        assert_eq!(a, b);

        let back = read_dump(&mut a.as_slice()).unwrap();
        assert_eq!(back.dim, 3);
        assert_eq!(back.valid_row(0), Some(&[1.0, -2.5, 3.25][..]));
        assert_eq!(back.valid_row(1), None);
    }

    #[test]
    fn empty_dump_has_valid_header() {
        let mut buf = Vec::new();
        write_dump(&mut buf, 8, &[]).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 4);
        let back = read_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dim, 8);
        assert!(back.is_empty());
    }

    #[test]
    fn rejects_foreign_bytes() {
        let mut buf = b"NOTADUMP".to_vec();
        buf.extend_from_slice(&[0; 12]);
        assert!(matches!(read_dump(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let entries = vec![
            SidecarEntry {
                row: 0,
                example: 0,
                lemma: "run".into(),
                sense_id: "run_1".into(),
                layer: 4,
                masked: false,
                error: None,
            },
            SidecarEntry {
                row: 1,
                example: 1,
                lemma: "run".into(),
                sense_id: "run_2".into(),
                layer: 4,
                masked: false,
                error: Some("alignment error: span maps to zero subtokens".into()),
            },
        ];
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &entries).unwrap();
        let back = read_sidecar(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back, entries);
    }
}
