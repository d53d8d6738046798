//! Whole-matrix sparse spill: separate row-index, column-index and value
//! files plus a small JSON descriptor.

use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::codec::{checksum, decode_indices, decode_values, encode_indices, encode_values};
use super::durable::{durable_write, read_file, FaultInjector};
use crate::error::{Error, Result};
use crate::matrix::{IndexWidth, MatrixId, SparseBlock};
use crate::precision::Precision;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseStoreLayout {
    pub matrix: MatrixId,
    pub rows: usize,
    pub cols: usize,
    pub nnz: u64,
    pub precision: Precision,
    pub index_width: IndexWidth,
    pub row_checksum: u64,
    pub col_checksum: u64,
    pub value_checksum: u64,
}

fn paths(dir: &Path, matrix: MatrixId) -> [PathBuf; 4] {
    [
        dir.join(format!("{matrix}.rows")),
        dir.join(format!("{matrix}.cols")),
        dir.join(format!("{matrix}.vals")),
        dir.join(format!("{matrix}.coo.json")),
    ]
}

impl SparseStoreLayout {
    /// Spill a whole sparse matrix. The descriptor is published last, so a
    /// readable descriptor implies complete data files.
    pub fn write(dir: &Path, matrix: MatrixId, block: &SparseBlock, faults: &FaultInjector) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let [rp, cp, vp, dp] = paths(dir, matrix);
        let rows = encode_indices(block.row_indices());
        let cols = encode_indices(block.col_indices());
        let vals = encode_values(block.values());
        durable_write(&rp, &rows, faults)?;
        durable_write(&cp, &cols, faults)?;
        durable_write(&vp, &vals, faults)?;
        let layout = SparseStoreLayout {
            matrix,
            rows: block.rows().end,
            cols: block.cols().end,
            nnz: block.nnz() as u64,
            precision: block.values().precision(),
            index_width: block.index_width(),
            row_checksum: checksum(&rows),
            col_checksum: checksum(&cols),
            value_checksum: checksum(&vals),
        };
        let json = serde_json::to_vec_pretty(&layout).expect("layout serializes");
        durable_write(&dp, &json, faults)?;
        Ok(layout)
    }

    pub fn open(dir: &Path, matrix: MatrixId) -> Result<Self> {
        let [.., dp] = paths(dir, matrix);
        let bytes = read_file(&dp)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::BlockCorrupt {
            path: dp,
            reason: e.to_string(),
        })
    }

    /// Read every entry, verifying all three checksums and equal entry counts.
    pub fn read_all(&self, dir: &Path) -> Result<SparseBlock> {
        let [rp, cp, vp, _] = paths(dir, self.matrix);
        let w = self.index_width.bytes();
        let mut parts = Vec::new();
        for (p, sum, entry) in [
            (&rp, self.row_checksum, w),
            (&cp, self.col_checksum, w),
            (&vp, self.value_checksum, self.precision.bytes()),
        ] {
            let bytes = read_file(p)?;
            let corrupt = |reason: &str| Error::BlockCorrupt {
                path: p.clone(),
                reason: reason.into(),
            };
            if bytes.len() as u64 != self.nnz * entry as u64 {
                return Err(corrupt("entry count does not match descriptor"));
            }
            if checksum(&bytes) != sum {
                return Err(corrupt("checksum mismatch"));
            }
            parts.push(bytes);
        }
        SparseBlock::from_parts(
            0..self.rows,
            0..self.cols,
            decode_indices(&parts[0], self.index_width),
            decode_indices(&parts[1], self.index_width),
            decode_values(&parts[2], self.precision),
        )
    }

    /// Entries whose row lies in `rows`, read without loading the whole
    /// matrix: the row file is binary searched in place.
    pub fn read_rows(&self, dir: &Path, rows: Range<usize>) -> Result<SparseBlock> {
        let [rp, cp, vp, _] = paths(dir, self.matrix);
        let w = self.index_width.bytes();
        let mut rf = File::open(&rp).map_err(|e| Error::io(&rp, e))?;
        let lo = lower_bound(&mut rf, &rp, w, self.nnz, rows.start as u64)?;
        let hi = lower_bound(&mut rf, &rp, w, self.nnz, rows.end as u64)?;
        let n = (hi - lo) as usize;
        let r = read_span(&rp, lo * w as u64, n * w)?;
        let c = read_span(&cp, lo * w as u64, n * w)?;
        let v = read_span(&vp, lo * self.precision.bytes() as u64, n * self.precision.bytes())?;
        SparseBlock::from_parts(
            rows,
            0..self.cols,
            decode_indices(&r, self.index_width),
            decode_indices(&c, self.index_width),
            decode_values(&v, self.precision),
        )
    }
}

fn index_at(f: &mut File, path: &Path, width: usize, i: u64) -> Result<u64> {
    let mut buf = [0u8; 8];
    f.seek(SeekFrom::Start(i * width as u64)).map_err(|e| Error::io(path, e))?;
    f.read_exact(&mut buf[..width]).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(buf))
}

fn lower_bound(f: &mut File, path: &Path, width: usize, n: u64, bound: u64) -> Result<u64> {
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if index_at(f, path, width, mid)? < bound {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn read_span(path: &Path, offset: u64, len: usize) -> Result<Vec<u8>> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    f.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; len];
    f.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}
