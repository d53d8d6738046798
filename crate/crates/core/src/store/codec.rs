//! Native block file encoding.
//!
//! Layout (little-endian, fixed 64-byte header, payload follows directly):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `XSVD`                           |
//! | 4      | 4    | format version (u32)                   |
//! | 8      | 4    | matrix id (u32)                        |
//! | 12     | 32   | row start, row end, col start, col end |
//! | 44     | 1    | density (1 dense, 2 sparse)            |
//! | 45     | 1    | precision (1 half, 2 single, 3 double) |
//! | 46     | 1    | index width in bytes (0 dense, 4, 8)   |
//! | 47     | 1    | reserved, zero                         |
//! | 48     | 8    | payload length in bytes (u64)          |
//! | 56     | 8    | XXH64 (seed 0) of the payload          |
//!
//! Sparse payloads are the row-index array, then the col-index array, then
//! the value array.

use std::ops::Range;

use twox_hash::XxHash64;

use crate::matrix::{Block, Density, DenseBlock, IndexArray, IndexWidth, MatrixId, SparseBlock, Values};
use crate::precision::{Half, Precision};

pub const MAGIC: [u8; 4] = *b"XSVD";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockFileHeader {
    pub version: u32,
    pub matrix: MatrixId,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    pub density: Density,
    pub precision: Precision,
    pub index_width: Option<IndexWidth>,
    pub payload_len: u64,
    pub checksum: u64,
}

pub fn checksum(payload: &[u8]) -> u64 {
    XxHash64::oneshot(0, payload)
}

impl BlockFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(&MAGIC);
        h[4..8].copy_from_slice(&self.version.to_le_bytes());
        h[8..12].copy_from_slice(&self.matrix.0.to_le_bytes());
        h[12..20].copy_from_slice(&(self.rows.start as u64).to_le_bytes());
        h[20..28].copy_from_slice(&(self.rows.end as u64).to_le_bytes());
        h[28..36].copy_from_slice(&(self.cols.start as u64).to_le_bytes());
        h[36..44].copy_from_slice(&(self.cols.end as u64).to_le_bytes());
        h[44] = self.density.code();
        h[45] = self.precision.code();
        h[46] = self.index_width.map_or(0, |w| w.code());
        h[48..56].copy_from_slice(&self.payload_len.to_le_bytes());
        h[56..64].copy_from_slice(&self.checksum.to_le_bytes());
        h
    }

    pub fn parse(h: &[u8]) -> Result<Self, String> {
        if h.len() < HEADER_LEN {
            return Err(format!("header truncated at {} bytes", h.len()));
        }
        if h[0..4] != MAGIC {
            return Err("bad magic".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let density = Density::from_code(h[44]).ok_or("bad density code")?;
        let precision = Precision::from_code(h[45]).ok_or("bad precision code")?;
        let index_width = match (density, h[46]) {
            (Density::Dense, 0) => None,
            (Density::Sparse, c) => Some(IndexWidth::from_code(c).ok_or("bad index width")?),
            _ => return Err("dense block with index width".into()),
        };
        let (r0, r1, c0, c1) = (u64_at(12), u64_at(20), u64_at(28), u64_at(36));
        if r0 > r1 || c0 > c1 {
            return Err("inverted block range".into());
        }
        Ok(BlockFileHeader {
            version,
            matrix: MatrixId(u32_at(8)),
            rows: r0 as usize..r1 as usize,
            cols: c0 as usize..c1 as usize,
            density,
            precision,
            index_width,
            payload_len: u64_at(48),
            checksum: u64_at(56),
        })
    }
}

fn put_values(out: &mut Vec<u8>, values: &Values) {
    match values {
        Values::Half(v) => v.iter().for_each(|x| out.extend_from_slice(&x.0.to_le_bytes())),
        Values::Single(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Values::Double(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
}

fn put_indices(out: &mut Vec<u8>, idx: &IndexArray) {
    match idx {
        IndexArray::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        IndexArray::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
}

pub(crate) fn encode_values(values: &Values) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.bytes());
    put_values(&mut out, values);
    out
}

pub(crate) fn encode_indices(idx: &IndexArray) -> Vec<u8> {
    let mut out = Vec::with_capacity(idx.bytes());
    put_indices(&mut out, idx);
    out
}

pub(crate) fn decode_values(bytes: &[u8], precision: Precision) -> Values {
    match precision {
        Precision::Half => Values::Half(
            bytes
                .chunks_exact(2)
                .map(|c| Half(u16::from_le_bytes([c[0], c[1]])))
                .collect(),
        ),
        Precision::Single => Values::Single(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        Precision::Double => Values::Double(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    }
}

pub(crate) fn decode_indices(bytes: &[u8], width: IndexWidth) -> IndexArray {
    match width {
        IndexWidth::W32 => IndexArray::U32(
            bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        IndexWidth::W64 => IndexArray::U64(
            bytes
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    }
}

/// Serialize a block to header + payload bytes.
pub fn encode_block(matrix: MatrixId, block: &Block) -> Vec<u8> {
    let mut payload = Vec::with_capacity(block.bytes());
    match block {
        Block::Dense(b) => put_values(&mut payload, b.values()),
        Block::Sparse(b) => {
            put_indices(&mut payload, b.row_indices());
            put_indices(&mut payload, b.col_indices());
            put_values(&mut payload, b.values());
        }
    }
    let header = BlockFileHeader {
        version: FORMAT_VERSION,
        matrix,
        rows: block.rows(),
        cols: block.cols(),
        density: block.density(),
        precision: block.precision(),
        index_width: block.index_width(),
        payload_len: payload.len() as u64,
        checksum: checksum(&payload),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Parse and verify a block file image.
pub fn decode_block(bytes: &[u8]) -> Result<(BlockFileHeader, Block), String> {
    let header = BlockFileHeader::parse(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != header.payload_len {
        return Err(format!(
            "payload length {} does not match header {}",
            payload.len(),
            header.payload_len
        ));
    }
    if checksum(payload) != header.checksum {
        return Err("checksum mismatch".into());
    }
    let block = match header.density {
        Density::Dense => {
            let n = header.rows.len() * header.cols.len();
            if payload.len() != n * header.precision.bytes() {
                return Err("dense payload size does not match block range".into());
            }
            let values = decode_values(payload, header.precision);
            Block::Dense(
                DenseBlock::new(header.rows.clone(), header.cols.clone(), values)
                    .map_err(|e| e.to_string())?,
            )
        }
        Density::Sparse => {
            let width = header.index_width.expect("sparse header carries width");
            let entry = 2 * width.bytes() + header.precision.bytes();
            if payload.len() % entry != 0 {
                return Err("sparse payload is not a whole number of entries".into());
            }
            let nnz = payload.len() / entry;
            let ib = nnz * width.bytes();
            let rows = decode_indices(&payload[..ib], width);
            let cols = decode_indices(&payload[ib..2 * ib], width);
            let values = decode_values(&payload[2 * ib..], header.precision);
            Block::Sparse(
                SparseBlock::from_parts(header.rows.clone(), header.cols.clone(), rows, cols, values)
                    .map_err(|e| e.to_string())?,
            )
        }
    };
    Ok((header, block))
}
