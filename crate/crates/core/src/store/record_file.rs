//! Whole-matrix export files: a plain concatenation of native block
//! records (header plus payload), written one tile at a time.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::codec::{decode_block, encode_block, BlockFileHeader, HEADER_LEN};
use crate::error::{Error, Result};
use crate::matrix::{Block, MatrixId};

/// Appends block records to a temp file and publishes it on `finish`.
pub struct RecordFileWriter {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<File>,
}

impl RecordFileWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        Ok(RecordFileWriter {
            path: path.to_path_buf(),
            tmp,
            out: BufWriter::new(f),
        })
    }

    pub fn append(&mut self, matrix: MatrixId, block: &Block) -> Result<()> {
        self.out
            .write_all(&encode_block(matrix, block))
            .map_err(|e| Error::io(&self.tmp, e))
    }

    /// Flush, fsync and rename into place.
    pub fn finish(self) -> Result<()> {
        let f = self.out.into_inner().map_err(|e| Error::io(&self.tmp, e.into_error()))?;
        f.sync_all().map_err(|e| Error::io(&self.tmp, e))?;
        drop(f);
        fs::rename(&self.tmp, &self.path).map_err(|e| Error::io(&self.path, e))
    }
}

/// Every record of an export file, each verified against its checksum.
pub fn read_record_file(path: &Path) -> Result<Vec<Block>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::BlockCorrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let header = BlockFileHeader::parse(&bytes[pos..]).map_err(corrupt)?;
        let end = pos + HEADER_LEN + header.payload_len as usize;
        if end > bytes.len() {
            return Err(corrupt("truncated record".into()));
        }
        let (_, block) = decode_block(&bytes[pos..end]).map_err(corrupt)?;
        blocks.push(block);
        pos = end;
    }
    Ok(blocks)
}

/// Assemble the records of a dense export file into a row-major buffer.
pub fn read_dense_record_file(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let blocks = read_record_file(path)?;
    let rows = blocks.iter().map(|b| b.rows().end).max().unwrap_or(0);
    let cols = blocks.iter().map(|b| b.cols().end).max().unwrap_or(0);
    let mut out = vec![0.0; rows * cols];
    for b in &blocks {
        for i in b.rows() {
            for j in b.cols() {
                out[i * cols + j] = b.get(i, j);
            }
        }
    }
    Ok((rows, cols, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseBlock;
    use crate::precision::Precision;

    #[test]
    fn records_concatenate_and_reassemble() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("U.blk");
        let mut w = RecordFileWriter::create(&path).unwrap();
        for r in [0..2, 2..3] {
            let b = DenseBlock::from_fn(r, 0..2, Precision::Double, |i, j| (i * 2 + j) as f64);
            w.append(MatrixId(5), &Block::Dense(b)).unwrap();
        }
        assert!(!path.exists());
        w.finish().unwrap();
        let (m, n, v) = read_dense_record_file(&path).unwrap();
        assert_eq!((m, n), (3, 2));
        assert_eq!(v, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_record_file(&path), Err(Error::BlockCorrupt { .. })));
    }
}
