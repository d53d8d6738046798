use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::codec::{decode_block, encode_block};
use super::durable::{durable_write, read_file, FaultInjector};
use super::lane::IoLane;
use crate::error::{Error, Result};
use crate::matrix::{Block, MatrixId};

/// Identity of a stored block: its matrix and the top-left corner of its
/// range. Stable across process restarts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId {
    pub matrix: MatrixId,
    pub row_start: usize,
    pub col_start: usize,
}

impl BlockId {
    pub fn of(matrix: MatrixId, block: &Block) -> BlockId {
        BlockId {
            matrix,
            row_start: block.rows().start,
            col_start: block.cols().start,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}_{}.blk", self.matrix, self.row_start, self.col_start)
    }
}

/// Block files under `<workdir>/blocks`, with an attached I/O lane.
pub struct BlockStore {
    root: PathBuf,
    blocks: PathBuf,
    faults: Arc<FaultInjector>,
    lane: IoLane,
}

impl BlockStore {
    pub fn open(workdir: impl AsRef<Path>) -> Result<BlockStore> {
        BlockStore::with_faults(workdir, FaultInjector::never())
    }

    pub fn with_faults(workdir: impl AsRef<Path>, faults: FaultInjector) -> Result<BlockStore> {
        let root = workdir.as_ref().to_path_buf();
        let blocks = root.join("blocks");
        fs::create_dir_all(&blocks).map_err(|e| Error::io(&blocks, e))?;
        Ok(BlockStore {
            root,
            blocks,
            faults: Arc::new(faults),
            lane: IoLane::spawn(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn faults(&self) -> &FaultInjector {
        &self.faults
    }

    pub fn lane(&self) -> &IoLane {
        &self.lane
    }

    pub fn block_path(&self, id: &BlockId) -> PathBuf {
        self.blocks.join(id.file_name())
    }

    /// Write a block durably, blocking the caller.
    pub fn store_block(&self, matrix: MatrixId, block: &Block) -> Result<BlockId> {
        let id = BlockId::of(matrix, block);
        durable_write(&self.block_path(&id), &encode_block(matrix, block), &self.faults)?;
        Ok(id)
    }

    /// Queue a block write on the I/O lane. Loads see the block immediately.
    pub fn store_block_async(&self, matrix: MatrixId, block: Arc<Block>) -> BlockId {
        let id = BlockId::of(matrix, &block);
        let path = self.block_path(&id);
        let faults = Arc::clone(&self.faults);
        self.lane.submit_block(id, block, move |b| {
            durable_write(&path, &encode_block(matrix, b), &faults)
        });
        id
    }

    /// As [`BlockStore::store_block_async`], holding `hold` until the write
    /// completes.
    pub fn store_block_async_with<H: Send + 'static>(&self, matrix: MatrixId, block: Arc<Block>, hold: H) -> BlockId {
        let id = BlockId::of(matrix, &block);
        let path = self.block_path(&id);
        let faults = Arc::clone(&self.faults);
        self.lane.submit_block(id, block, move |b| {
            let r = durable_write(&path, &encode_block(matrix, b), &faults);
            drop(hold);
            r
        });
        id
    }

    /// Queue an arbitrary durable file write behind the blocks already queued.
    pub fn write_file_async(&self, path: PathBuf, bytes: Vec<u8>) {
        let faults = Arc::clone(&self.faults);
        self.lane.submit_write(move || durable_write(&path, &bytes, &faults));
    }

    pub fn write_file(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        durable_write(path, bytes, &self.faults)
    }

    pub fn flush(&self) -> Result<()> {
        self.lane.flush()
    }

    /// Load and verify a block. Missing file: [`Error::BlockAbsent`];
    /// any decoding or checksum failure: [`Error::BlockCorrupt`].
    pub fn load_block(&self, id: &BlockId) -> Result<Arc<Block>> {
        if let Some(b) = self.lane.pending(id) {
            return Ok(b);
        }
        let path = self.block_path(id);
        let bytes = read_file(&path)?;
        let (header, block) =
            decode_block(&bytes).map_err(|reason| Error::BlockCorrupt { path: path.clone(), reason })?;
        if header.matrix != id.matrix
            || header.rows.start != id.row_start
            || header.cols.start != id.col_start
        {
            return Err(Error::BlockCorrupt {
                path,
                reason: "header does not match block id".into(),
            });
        }
        Ok(Arc::new(block))
    }

    /// Check that a block is on disk and intact without keeping it.
    pub fn verify_block(&self, id: &BlockId) -> Result<()> {
        self.load_block(id).map(|_| ())
    }

    /// Delete every block file of `matrix`.
    pub fn remove_matrix(&self, matrix: MatrixId) -> Result<()> {
        let prefix = format!("{matrix}_");
        let entries = fs::read_dir(&self.blocks).map_err(|e| Error::io(&self.blocks, e))?;
        for entry in entries.flatten() {
            if entry.file_name().to_string_lossy().starts_with(&prefix) {
                let _ = fs::remove_file(entry.path());
            }
        }
        Ok(())
    }
}

/// One-shot helper: store `block` of `matrix` under `workdir`.
pub fn store_block(matrix: MatrixId, block: &Block, workdir: impl AsRef<Path>) -> Result<BlockId> {
    BlockStore::open(workdir)?.store_block(matrix, block)
}

/// One-shot helper: load a block previously stored under `workdir`.
pub fn load_block(id: &BlockId, workdir: impl AsRef<Path>) -> Result<Block> {
    let store = BlockStore::open(workdir)?;
    store.load_block(id).map(|b| (*b).clone())
}
