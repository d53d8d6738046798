//! Moving matrices between external files and the workspace.
//!
//! Inputs are cut into tiles that respect the workspace's tile limit. PGM
//! images are read and written one tile at a time with positioned I/O, so
//! only a tile's worth of pixels is ever in memory.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Block, DenseBlock, IndexArray, MatrixDescriptor, MatrixId, SparseBlock};
use crate::planner::{partition_for_limit, sparse_partition};
use crate::precision::Precision;
use crate::store::mtx::{parse_matrix_market, MtxHeader};
use crate::store::pgm::{grey_level, parse_pgm_header, PgmHeader};
use crate::store::RecordFileWriter;
use crate::workspace::{Role, TiledMatrix, Workspace};

const PGM_HEADER_PROBE: u64 = 64 * 1024;

/// Cut an in-memory sparse matrix into tiles and hand it to the workspace.
pub fn sparse_input(ws: &Workspace, id: MatrixId, entries: &SparseBlock, role: Role) -> Result<TiledMatrix> {
    let (rows, cols) = (entries.rows().end, entries.cols().end);
    let precision = entries.values().precision();
    let width = entries.index_width();
    let desc = MatrixDescriptor::sparse(id, rows, cols, entries.nnz() as u64, precision, width)?;
    let partition = sparse_partition(entries, desc.entry_bytes() as u64, ws.tile_limit(role));
    let mut b = ws.builder(desc.clone(), partition.clone(), role, desc.payload_bytes());
    for ti in 0..partition.tile_rows() {
        for tj in 0..partition.tile_cols() {
            let (r, c) = (partition.row_range(ti), partition.col_range(tj));
            let hits: Vec<(u64, u64, f64)> = entries.range_query(r.clone(), c.clone()).collect();
            let tile = SparseBlock::from_parts(
                r,
                c,
                IndexArray::with_width(width, hits.iter().map(|t| t.0)),
                IndexArray::with_width(width, hits.iter().map(|t| t.1)),
                crate::matrix::Values::from_f64(precision, hits.iter().map(|t| t.2)),
            )?;
            b.put(Block::Sparse(tile))?;
        }
    }
    b.finish()
}

/// Parse a Matrix Market file and store it as matrix `id`.
pub fn matrix_market_input(
    ws: &Workspace,
    id: MatrixId,
    path: &Path,
    precision: Precision,
) -> Result<(TiledMatrix, MtxHeader)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_matrix_market(BufReader::new(f), precision)?;
    let m = sparse_input(ws, id, &parsed.entries, Role::Input)?;
    Ok((m, parsed.header))
}

fn read_header(file: &mut File, path: &Path) -> Result<PgmHeader> {
    let mut probe = Vec::new();
    Read::by_ref(file)
        .take(PGM_HEADER_PROBE)
        .read_to_end(&mut probe)
        .map_err(|e| Error::io(path, e))?;
    parse_pgm_header(&probe)
}

/// Stream a P5 image into matrix `id`, one tile at a time.
pub fn pgm_input(ws: &Workspace, id: MatrixId, path: &Path, precision: Precision) -> Result<TiledMatrix> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let header = read_header(&mut file, path)?;
    let (h, w) = (header.height, header.width);
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if len < header.raster_offset + (h * w) as u64 {
        return Err(Error::UnsupportedFormat("truncated PGM raster".into()));
    }
    let desc = MatrixDescriptor::dense(id, h, w, precision)?;
    let partition = partition_for_limit(&desc, ws.tile_limit(Role::Input));
    let mut b = ws.dense_builder(id, h, w, precision, partition.clone(), Role::Input)?;
    let mut row = Vec::new();
    for ti in 0..partition.tile_rows() {
        for tj in 0..partition.tile_cols() {
            let (rr, cr) = (partition.row_range(ti), partition.col_range(tj));
            let _hold = b.charge_tile((rr.len() * cr.len() * precision.work().bytes()) as u64);
            let mut pixels = Vec::with_capacity(rr.len() * cr.len());
            row.resize(cr.len(), 0u8);
            for i in rr.clone() {
                let at = header.raster_offset + (i * w + cr.start) as u64;
                file.seek(SeekFrom::Start(at)).map_err(|e| Error::io(path, e))?;
                file.read_exact(&mut row).map_err(|e| Error::io(path, e))?;
                pixels.extend(row.iter().map(|&p| p as f64));
            }
            let (c0, cw) = (cr.start, cr.len());
            let r0 = rr.start;
            let tile = DenseBlock::from_fn(rr, cr, precision, |i, j| pixels[(i - r0) * cw + (j - c0)]);
            b.put(Block::Dense(tile))?;
        }
    }
    b.finish()
}

/// Write `m` as a P5 image, clamping and rounding each value, one stored
/// tile at a time.
pub fn pgm_output(ws: &Workspace, m: &TiledMatrix, path: &Path) -> Result<()> {
    let (h, w) = m.shape();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let header = format!("P5\n{w} {h}\n255\n");
    file.write_all(header.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    let base = header.len() as u64;
    file.set_len(base + (h * w) as u64).map_err(|e| Error::io(&tmp, e))?;
    let p = m.stored_partition().clone();
    for ti in 0..p.tile_rows() {
        for tj in 0..p.tile_cols() {
            let tile = ws.fetch(m, ti, tj)?;
            let block = tile.block();
            let (rr, cr) = (block.rows(), block.cols());
            if m.is_transposed() {
                // stored row i is image column i
                for i in rr {
                    for j in cr.clone() {
                        file.seek(SeekFrom::Start(base + (j * w + i) as u64)).map_err(|e| Error::io(&tmp, e))?;
                        file.write_all(&[grey_level(block.get(i, j))]).map_err(|e| Error::io(&tmp, e))?;
                    }
                }
            } else {
                let mut line = vec![0u8; cr.len()];
                for i in rr {
                    for (k, j) in cr.clone().enumerate() {
                        line[k] = grey_level(block.get(i, j));
                    }
                    file.seek(SeekFrom::Start(base + (i * w + cr.start) as u64)).map_err(|e| Error::io(&tmp, e))?;
                    file.write_all(&line).map_err(|e| Error::io(&tmp, e))?;
                }
            }
        }
    }
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Export the stored tiles of `m` as a block-record file.
pub fn record_file_output(ws: &Workspace, m: &TiledMatrix, path: &Path) -> Result<()> {
    let mut w = RecordFileWriter::create(path)?;
    let p = m.stored_partition().clone();
    for ti in 0..p.tile_rows() {
        for tj in 0..p.tile_cols() {
            w.append(m.id(), ws.fetch(m, ti, tj)?.block())?;
        }
    }
    w.finish()
}
