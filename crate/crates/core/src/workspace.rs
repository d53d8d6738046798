//! Tiled matrices bound to a working directory, a memory budget and a
//! worker pool.

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Block, BlockPartition, DenseBlock, MatrixDescriptor, MatrixId, Residency, Values};
use crate::planner::{choose_threads, CostEstimate, MemoryBudget, ResidencyTracker, DEFAULT_MIN_OPS_PER_THREAD};
use crate::planner::Charge;
use crate::precision::Real;
use crate::store::{BlockId, BlockStore, FaultInjector};

/// Account that holds blocks queued on the I/O lane.
pub const IO_LANE_ACCOUNT: MatrixId = MatrixId(u32::MAX);

/// Which limit of the budget applies to a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Supplied by the caller.
    Input,
    /// Produced during processing.
    New,
    /// Small `r x r`-sized factor, always in core.
    Small,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRecord {
    descriptor: MatrixDescriptor,
    role: Role,
}

pub struct WorkspaceConfig {
    pub workdir: PathBuf,
    pub budget: MemoryBudget,
    pub threads: usize,
    pub min_ops_per_thread: u64,
    pub faults: FaultInjector,
}

impl WorkspaceConfig {
    pub fn new(workdir: impl Into<PathBuf>, budget: MemoryBudget) -> Self {
        WorkspaceConfig {
            workdir: workdir.into(),
            budget,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            min_ops_per_thread: DEFAULT_MIN_OPS_PER_THREAD,
            faults: FaultInjector::never(),
        }
    }
}

/// Counters gathered while kernels run.
#[derive(Debug, Default)]
pub struct Stats {
    pub multiply_adds: AtomicU64,
    pub skipped_pairs: AtomicU64,
    pub tiles_loaded: AtomicU64,
    pub bytes_loaded: AtomicU64,
    threads: Mutex<Vec<(String, usize)>>,
}

impl Stats {
    pub fn record_threads(&self, op: &str, n: usize) {
        self.threads.lock().unwrap().push((op.to_string(), n));
    }

    /// Worker counts chosen per operation, in call order.
    pub fn threads(&self) -> Vec<(String, usize)> {
        self.threads.lock().unwrap().clone()
    }

    pub fn multiply_adds(&self) -> u64 {
        self.multiply_adds.load(Ordering::Relaxed)
    }
}

pub struct Workspace {
    store: BlockStore,
    tracker: Arc<ResidencyTracker>,
    budget: MemoryBudget,
    threads: usize,
    min_ops_per_thread: u64,
    pools: Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>,
    registry: Mutex<Vec<Weak<MatrixInner>>>,
    clock: AtomicU64,
    stats: Stats,
}

impl Workspace {
    pub fn open(config: WorkspaceConfig) -> Result<Self> {
        let store = BlockStore::with_faults(&config.workdir, config.faults)?;
        let dir = config.workdir.join("matrices");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tracker = ResidencyTracker::new(config.budget.global);
        Ok(Workspace {
            store,
            tracker,
            budget: config.budget,
            threads: config.threads.max(1),
            min_ops_per_thread: config.min_ops_per_thread,
            pools: Mutex::new(HashMap::new()),
            registry: Mutex::new(Vec::new()),
            clock: AtomicU64::new(1),
            stats: Stats::default(),
        })
    }

    /// Unlimited budget, default threads.
    pub fn in_dir(workdir: impl Into<PathBuf>) -> Result<Self> {
        Workspace::open(WorkspaceConfig::new(workdir, MemoryBudget::unlimited()))
    }

    pub fn root(&self) -> &Path {
        self.store.root()
    }

    pub fn store(&self) -> &BlockStore {
        &self.store
    }

    pub fn tracker(&self) -> &Arc<ResidencyTracker> {
        &self.tracker
    }

    pub fn budget(&self) -> &MemoryBudget {
        &self.budget
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn max_threads(&self) -> usize {
        self.threads
    }

    /// Wait for queued writes; report the first failure.
    pub fn flush(&self) -> Result<()> {
        self.store.flush()
    }

    /// Pool sized for an operation of the given cost.
    pub fn pool_for(&self, op: &str, cost: &CostEstimate) -> Arc<rayon::ThreadPool> {
        let n = choose_threads(cost, self.threads, self.min_ops_per_thread);
        self.stats.record_threads(op, n);
        self.pool(n)
    }

    pub fn pool(&self, n: usize) -> Arc<rayon::ThreadPool> {
        let mut pools = self.pools.lock().unwrap();
        Arc::clone(pools.entry(n).or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .thread_name(|i| format!("oocsvd-worker-{i}"))
                    .build()
                    .expect("build worker pool"),
            )
        }))
    }

    /// Per-tile limit for a matrix of `role`.
    pub fn tile_limit(&self, role: Role) -> Option<u64> {
        match role {
            Role::Input => self.budget.tile_limit(false),
            Role::New => self.budget.tile_limit(true),
            Role::Small => None,
        }
    }

    /// Whole-matrix limit for `role`.
    pub fn limit_for(&self, role: Role) -> Option<u64> {
        match role {
            Role::Input => self.budget.effective_per_matrix(),
            Role::New => self.budget.effective_new_matrix(),
            Role::Small => None,
        }
    }

    /// Whether a `bytes`-sized matrix of `role` would be kept in core.
    pub fn fits_in_core(&self, role: Role, bytes: u64) -> bool {
        role == Role::Small || (self.limit_for(role).is_none_or(|l| bytes <= l) && self.tracker.fits_globally(bytes))
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::Relaxed)
    }

    /// Mark the start of an operation: matrices touched from now on are not
    /// eviction candidates until the next call.
    pub fn begin_op(&self) -> u64 {
        self.tick()
    }

    /// Drop the in-core copy of the least recently used matrices until
    /// `bytes` more fit under the global limit. Matrices used since
    /// `protect_since` stay.
    fn make_room(&self, bytes: u64, protect_since: u64) -> bool {
        loop {
            if self.tracker.fits_globally(bytes) {
                return true;
            }
            let victim = {
                let mut reg = self.registry.lock().unwrap();
                reg.retain(|w| w.strong_count() > 0);
                reg.iter()
                    .filter_map(|w| w.upgrade())
                    .filter(|m| m.is_resident() && m.role != Role::Small)
                    .filter(|m| m.last_use.load(Ordering::Relaxed) < protect_since)
                    .min_by_key(|m| m.last_use.load(Ordering::Relaxed))
            };
            match victim {
                Some(m) => m.drop_resident(),
                None => return false,
            }
        }
    }

    /// Start a matrix of `desc.rows x desc.cols` with `partition`. Dense
    /// tiles are kept at their work precision; `estimated_payload` sizes
    /// sparse outputs.
    pub fn builder(
        &self,
        mut desc: MatrixDescriptor,
        partition: BlockPartition,
        role: Role,
        estimated_payload: u64,
    ) -> MatrixBuilder<'_> {
        desc.partition = partition;
        desc.transposed = false;
        let limit = self.limit_for(role);
        self.tracker.set_limit(desc.id, limit);
        let want_in_core = limit.is_none_or(|l| estimated_payload <= l);
        let now = self.clock.load(Ordering::Relaxed);
        let in_core = want_in_core && (role == Role::Small || self.make_room(estimated_payload, now));
        desc.residency = if in_core {
            Residency::InCore
        } else {
            Residency::OutOfCore
        };
        let charge = in_core.then(|| self.tracker.charge(desc.id, estimated_payload));
        let n = desc.partition.tile_count();
        MatrixBuilder {
            ws: self,
            desc,
            role,
            slots: vec![None; n],
            written: vec![false; n],
            charge,
        }
    }

    /// Dense matrix with a partition chosen for `role`'s limit.
    pub fn dense_builder(
        &self,
        id: MatrixId,
        rows: usize,
        cols: usize,
        precision: crate::precision::Precision,
        partition: BlockPartition,
        role: Role,
    ) -> Result<MatrixBuilder<'_>> {
        let desc = MatrixDescriptor::dense(id, rows, cols, precision.work())?;
        let payload = (rows * cols * precision.work().bytes()) as u64;
        Ok(self.builder(desc, partition, role, payload))
    }

    /// Re-open a matrix persisted earlier in this workdir.
    pub fn open_matrix(&self, id: MatrixId) -> Result<TiledMatrix> {
        let path = matrix_record_path(self.root(), id);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::BlockAbsent { path: path.clone() },
            _ => Error::io(&path, e),
        })?;
        let rec: MatrixRecord = serde_json::from_slice(&bytes).map_err(|e| Error::BlockCorrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let mut desc = rec.descriptor;
        let limit = self.limit_for(rec.role);
        self.tracker.set_limit(id, limit);
        let payload = resident_payload(&desc, &self.store)?;
        let now = self.clock.load(Ordering::Relaxed);
        let in_core = limit.is_none_or(|l| payload <= l) && (rec.role == Role::Small || self.make_room(payload, now));
        let inner = if in_core {
            let charge = self.tracker.charge(id, payload);
            let mut slots = Vec::with_capacity(desc.partition.tile_count());
            for id in tile_ids(&desc) {
                let stored = self.store.load_block(&id)?;
                slots.push(Arc::new(widen_block(&stored)));
            }
            desc.residency = Residency::InCore;
            MatrixInner::new(desc, rec.role, Some(slots), Some(charge))
        } else {
            desc.residency = Residency::OutOfCore;
            MatrixInner::new(desc, rec.role, None, None)
        };
        let inner = Arc::new(inner);
        self.registry.lock().unwrap().push(Arc::downgrade(&inner));
        Ok(TiledMatrix {
            inner,
            transposed: false,
        })
    }

    /// Drop the in-core copy of `m`; later reads load tiles from disk.
    pub fn evict(&self, m: &TiledMatrix) {
        m.inner.drop_resident();
    }

    /// Fetch a stored tile (storage coordinates).
    pub fn fetch(&self, m: &TiledMatrix, ti: usize, tj: usize) -> Result<Tile> {
        let inner = &m.inner;
        inner.last_use.store(self.tick(), Ordering::Relaxed);
        let t = ti * inner.desc.partition.tile_cols() + tj;
        if let Some(slots) = inner.slots.lock().unwrap().as_ref() {
            return Ok(Tile {
                block: Arc::clone(&slots[t]),
                _charge: None,
            });
        }
        let id = BlockId {
            matrix: inner.desc.id,
            row_start: inner.desc.partition.row_cuts()[ti],
            col_start: inner.desc.partition.col_cuts()[tj],
        };
        let stored = self.store.load_block(&id)?;
        let block = match stored.as_ref() {
            Block::Dense(d) if d.values().precision() != d.values().precision().work() => Arc::new(widen_block(&stored)),
            _ => stored,
        };
        let charge = self.tracker.charge(inner.desc.id, block.bytes() as u64);
        self.stats.tiles_loaded.fetch_add(1, Ordering::Relaxed);
        self.stats.bytes_loaded.fetch_add(block.bytes() as u64, Ordering::Relaxed);
        Ok(Tile {
            block,
            _charge: Some(charge),
        })
    }

    /// Hold `bytes` against matrix `id` while a tile is being assembled.
    pub fn charge(&self, id: MatrixId, bytes: u64) -> Charge {
        self.tracker.charge(id, bytes)
    }
}

fn matrix_record_path(root: &Path, id: MatrixId) -> PathBuf {
    root.join("matrices").join(format!("{id}.json"))
}

/// Relative path of a matrix's descriptor file inside the workdir.
pub fn matrix_record_name(id: MatrixId) -> String {
    format!("matrices/{id}.json")
}

fn tile_ids(desc: &MatrixDescriptor) -> Vec<BlockId> {
    let p = &desc.partition;
    let mut ids = Vec::with_capacity(p.tile_count());
    for i in 0..p.tile_rows() {
        for j in 0..p.tile_cols() {
            ids.push(BlockId {
                matrix: desc.id,
                row_start: p.row_cuts()[i],
                col_start: p.col_cuts()[j],
            });
        }
    }
    ids
}

fn resident_payload(desc: &MatrixDescriptor, store: &BlockStore) -> Result<u64> {
    if desc.is_sparse() {
        let _ = store;
        Ok(desc.payload_bytes())
    } else {
        Ok((desc.rows * desc.cols * desc.precision.work().bytes()) as u64)
    }
}

/// Dense blocks at their work precision; sparse blocks unchanged.
fn widen_block(b: &Block) -> Block {
    match b {
        Block::Dense(d) => {
            let work = d.values().precision().work();
            if work == d.values().precision() {
                b.clone()
            } else {
                Block::Dense(DenseBlock::new(d.rows(), d.cols(), d.values().convert(work)).expect("same shape"))
            }
        }
        Block::Sparse(_) => b.clone(),
    }
}

struct MatrixInner {
    desc: MatrixDescriptor,
    role: Role,
    slots: Mutex<Option<Vec<Arc<Block>>>>,
    charge: Mutex<Option<Charge>>,
    last_use: AtomicU64,
}

impl MatrixInner {
    fn new(desc: MatrixDescriptor, role: Role, slots: Option<Vec<Arc<Block>>>, charge: Option<Charge>) -> Self {
        MatrixInner {
            desc,
            role,
            slots: Mutex::new(slots),
            charge: Mutex::new(charge),
            last_use: AtomicU64::new(0),
        }
    }

    fn is_resident(&self) -> bool {
        self.slots.lock().unwrap().is_some()
    }

    fn drop_resident(&self) {
        self.slots.lock().unwrap().take();
        self.charge.lock().unwrap().take();
    }
}

/// A matrix stored as a grid of blocks, possibly viewed transposed.
#[derive(Clone)]
pub struct TiledMatrix {
    inner: Arc<MatrixInner>,
    transposed: bool,
}

impl std::fmt::Debug for TiledMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (m, n) = self.shape();
        write!(f, "TiledMatrix({} {m}x{n}{})", self.id(), if self.transposed { " T" } else { "" })
    }
}

impl TiledMatrix {
    pub fn id(&self) -> MatrixId {
        self.inner.desc.id
    }

    /// Descriptor as seen through this view.
    pub fn descriptor(&self) -> MatrixDescriptor {
        let mut d = self.inner.desc.clone();
        d.transposed = self.transposed;
        d.residency = if self.inner.is_resident() {
            Residency::InCore
        } else {
            Residency::OutOfCore
        };
        d
    }

    pub fn shape(&self) -> (usize, usize) {
        let d = &self.inner.desc;
        if self.transposed {
            (d.cols, d.rows)
        } else {
            (d.rows, d.cols)
        }
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn is_sparse(&self) -> bool {
        self.inner.desc.is_sparse()
    }

    pub fn is_resident(&self) -> bool {
        self.inner.is_resident()
    }

    pub fn role(&self) -> Role {
        self.inner.role
    }

    pub fn precision(&self) -> crate::precision::Precision {
        self.inner.desc.precision
    }

    /// Storage-orientation partition.
    pub fn stored_partition(&self) -> &BlockPartition {
        &self.inner.desc.partition
    }

    /// Partition as seen through this view.
    pub fn partition(&self) -> BlockPartition {
        if self.transposed {
            self.inner.desc.partition.transposed()
        } else {
            self.inner.desc.partition.clone()
        }
    }

    /// Transposed view sharing the same storage.
    pub fn t(&self) -> TiledMatrix {
        TiledMatrix {
            inner: Arc::clone(&self.inner),
            transposed: !self.transposed,
        }
    }

    /// Ids of every stored tile, row-major over the stored grid.
    pub fn block_ids(&self) -> Vec<BlockId> {
        tile_ids(&self.inner.desc)
    }

    pub fn same_storage(&self, other: &TiledMatrix) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// Gather the whole matrix (as viewed) into a dense row-major buffer.
    /// For tests and small matrices only.
    pub fn to_dense_f64(&self, ws: &Workspace) -> Result<Vec<f64>> {
        let (m, n) = self.shape();
        let mut out = vec![0.0; m * n];
        let p = self.stored_partition().clone();
        for ti in 0..p.tile_rows() {
            for tj in 0..p.tile_cols() {
                let tile = ws.fetch(self, ti, tj)?;
                let mut put = |r: usize, c: usize, v: f64| {
                    let (i, j) = if self.transposed { (c, r) } else { (r, c) };
                    out[i * n + j] = v;
                };
                match tile.block() {
                    Block::Dense(d) => {
                        for r in d.rows() {
                            for c in d.cols() {
                                put(r, c, d.get(r, c));
                            }
                        }
                    }
                    Block::Sparse(s) => {
                        for (r, c, v) in s.triples() {
                            put(r as usize, c as usize, v);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A fetched tile. Holds its residency charge until dropped.
pub struct Tile {
    block: Arc<Block>,
    _charge: Option<Charge>,
}

impl Tile {
    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn arc(&self) -> &Arc<Block> {
        &self.block
    }

    /// Dense payload at the working precision `T`.
    pub fn dense_values<T: Real>(&self) -> Option<&[T]> {
        match self.block.as_ref() {
            Block::Dense(d) => T::slice(d.values()),
            Block::Sparse(_) => None,
        }
    }
}

/// Keeps at most one tile of a matrix resident, reusing it across
/// consecutive requests for the same tile.
pub struct TileCursor<'m> {
    matrix: &'m TiledMatrix,
    current: Option<((usize, usize), Tile)>,
}

impl<'m> TileCursor<'m> {
    pub fn new(matrix: &'m TiledMatrix) -> Self {
        TileCursor {
            matrix,
            current: None,
        }
    }

    pub fn matrix(&self) -> &TiledMatrix {
        self.matrix
    }

    /// Tile at storage coordinates `(ti, tj)`.
    pub fn get(&mut self, ws: &Workspace, ti: usize, tj: usize) -> Result<&Tile> {
        if self.current.as_ref().is_none_or(|(k, _)| *k != (ti, tj)) {
            // release the old tile before loading the next
            self.current = None;
            self.current = Some(((ti, tj), ws.fetch(self.matrix, ti, tj)?));
        }
        Ok(&self.current.as_ref().unwrap().1)
    }

    /// Tile covering logical position `(row, col)` of the view.
    pub fn get_logical(&mut self, ws: &Workspace, ti: usize, tj: usize) -> Result<&Tile> {
        if self.matrix.transposed {
            self.get(ws, tj, ti)
        } else {
            self.get(ws, ti, tj)
        }
    }

    pub fn release(&mut self) {
        self.current = None;
    }
}

/// Assembles a new matrix tile by tile. Every tile goes to disk through the
/// I/O lane; in-core matrices also keep it in memory.
pub struct MatrixBuilder<'w> {
    ws: &'w Workspace,
    desc: MatrixDescriptor,
    role: Role,
    slots: Vec<Option<Arc<Block>>>,
    written: Vec<bool>,
    charge: Option<Charge>,
}

impl<'w> MatrixBuilder<'w> {
    pub fn descriptor(&self) -> &MatrixDescriptor {
        &self.desc
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.desc.partition
    }

    pub fn id(&self) -> MatrixId {
        self.desc.id
    }

    pub fn is_in_core(&self) -> bool {
        self.desc.residency == Residency::InCore
    }

    /// Charge for a tile under construction, unless the whole matrix is
    /// already accounted for in core.
    pub fn charge_tile(&self, bytes: u64) -> Option<Charge> {
        (!self.is_in_core()).then(|| self.ws.tracker.charge(self.desc.id, bytes))
    }

    fn tile_index(&self, rows: &Range<usize>, cols: &Range<usize>) -> Result<usize> {
        let p = &self.desc.partition;
        let ti = p.row_cuts().iter().position(|&c| c == rows.start);
        let tj = p.col_cuts().iter().position(|&c| c == cols.start);
        match (ti, tj) {
            (Some(ti), Some(tj))
                if ti < p.tile_rows() && tj < p.tile_cols() && p.row_range(ti) == *rows && p.col_range(tj) == *cols =>
            {
                Ok(ti * p.tile_cols() + tj)
            }
            _ => Err(Error::DimensionMismatch {
                op: "tile placement",
                left: (rows.len(), cols.len()),
                right: (p.rows(), p.cols()),
            }),
        }
    }

    /// Add one finished tile.
    pub fn put(&mut self, block: Block) -> Result<()> {
        let t = self.tile_index(&block.rows(), &block.cols())?;
        let block = Arc::new(block);
        let id = self.desc.id;
        if self.is_in_core() {
            let resident = match block.as_ref() {
                Block::Dense(d) if d.values().precision() != d.values().precision().work() => Arc::new(widen_block(&block)),
                _ => Arc::clone(&block),
            };
            self.slots[t] = Some(resident);
            self.ws.store.store_block_async(id, block);
        } else {
            let lane_charge = self.ws.tracker.charge(IO_LANE_ACCOUNT, block.bytes() as u64);
            self.ws.store.store_block_async_with(id, block, lane_charge);
        }
        self.written[t] = true;
        Ok(())
    }

    /// Publish the descriptor once every tile is queued.
    pub fn finish(self) -> Result<TiledMatrix> {
        if let Some(t) = self.written.iter().position(|w| !w) {
            return Err(Error::LengthMismatch(format!("tile {t} of {} was never written", self.desc.id)));
        }
        let mut desc = self.desc;
        let slots = if desc.residency == Residency::InCore {
            Some(self.slots.into_iter().map(|s| s.expect("written")).collect::<Vec<_>>())
        } else {
            None
        };
        if desc.is_sparse() {
            desc.nnz = match &slots {
                Some(s) => s.iter().map(|b: &Arc<Block>| b.stored_len() as u64).sum(),
                None => desc.nnz,
            };
        }
        let rec = MatrixRecord {
            descriptor: MatrixDescriptor {
                residency: Residency::OutOfCore,
                ..desc.clone()
            },
            role: self.role,
        };
        let bytes = serde_json::to_vec_pretty(&rec).expect("matrix record serializes");
        self.ws.store.write_file_async(matrix_record_path(self.ws.root(), desc.id), bytes);
        let inner = Arc::new(MatrixInner::new(desc, self.role, slots, self.charge));
        inner.last_use.store(self.ws.tick(), Ordering::Relaxed);
        self.ws.registry.lock().unwrap().push(Arc::downgrade(&inner));
        Ok(TiledMatrix {
            inner,
            transposed: false,
        })
    }
}

/// Build a dense in-workspace matrix from a row-major buffer, cut by
/// `partition`. Values are rounded to `precision`.
pub fn dense_from_fn(
    ws: &Workspace,
    id: MatrixId,
    rows: usize,
    cols: usize,
    precision: crate::precision::Precision,
    partition: BlockPartition,
    role: Role,
    f: impl Fn(usize, usize) -> f64,
) -> Result<TiledMatrix> {
    let mut b = ws.builder(
        MatrixDescriptor::dense(id, rows, cols, precision)?,
        partition.clone(),
        role,
        (rows * cols * precision.work().bytes()) as u64,
    );
    for ti in 0..partition.tile_rows() {
        for tj in 0..partition.tile_cols() {
            let (r, c) = (partition.row_range(ti), partition.col_range(tj));
            b.put(Block::Dense(DenseBlock::from_fn(r, c, precision, &f)))?;
        }
    }
    b.finish()
}

/// Payload helper for tests: wrap a typed vector as a dense block.
pub fn dense_block<T: Real>(rows: Range<usize>, cols: Range<usize>, data: Vec<T>) -> DenseBlock {
    DenseBlock::new(rows, cols, Values::from_elems(data)).expect("shape matches data")
}
