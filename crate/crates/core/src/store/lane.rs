//! The I/O lane: a single background writer that drains store traffic in
//! submission order so compute threads never wait on eviction writes.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use crate::error::{Error, Result};
use crate::matrix::Block;

use super::BlockId;

type Job = Box<dyn FnOnce() -> Result<()> + Send>;

const QUEUE_DEPTH: usize = 64;

#[derive(Default)]
struct LaneState {
    outstanding: Mutex<usize>,
    drained: Condvar,
    first_error: Mutex<Option<Error>>,
    // blocks queued for writing, readable before they reach disk
    pending: Mutex<HashMap<BlockId, Arc<Block>>>,
    bytes_in_flight: AtomicUsize,
    peak_bytes: AtomicUsize,
}

pub struct IoLane {
    tx: Mutex<Option<SyncSender<Job>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
    state: Arc<LaneState>,
}

impl IoLane {
    pub fn spawn() -> IoLane {
        let (tx, rx) = sync_channel::<Job>(QUEUE_DEPTH);
        let state = Arc::new(LaneState::default());
        let st = Arc::clone(&state);
        let worker = std::thread::Builder::new()
            .name("oocsvd-io".into())
            .spawn(move || {
                for job in rx {
                    if let Err(e) = job() {
                        st.first_error.lock().unwrap().get_or_insert(e);
                    }
                    let mut n = st.outstanding.lock().unwrap();
                    *n -= 1;
                    if *n == 0 {
                        st.drained.notify_all();
                    }
                }
            })
            .expect("spawn I/O lane");
        IoLane {
            tx: Mutex::new(Some(tx)),
            worker: Mutex::new(Some(worker)),
            state,
        }
    }

    fn submit(&self, job: Job) {
        *self.state.outstanding.lock().unwrap() += 1;
        let tx = self.tx.lock().unwrap().clone().expect("lane open");
        tx.send(job).expect("I/O lane worker alive");
    }

    /// Queue an arbitrary write. Runs after everything submitted before it.
    pub fn submit_write(&self, job: impl FnOnce() -> Result<()> + Send + 'static) {
        self.submit(Box::new(job));
    }

    /// Queue a block write. The block stays visible through
    /// [`IoLane::pending`] until the write finishes.
    pub(crate) fn submit_block(
        &self,
        id: BlockId,
        block: Arc<Block>,
        write: impl FnOnce(&Block) -> Result<()> + Send + 'static,
    ) {
        let bytes = block.bytes();
        let now = self.state.bytes_in_flight.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.state.peak_bytes.fetch_max(now, Ordering::SeqCst);
        self.state.pending.lock().unwrap().insert(id, Arc::clone(&block));
        let st = Arc::clone(&self.state);
        self.submit(Box::new(move || {
            let r = write(&block);
            st.pending.lock().unwrap().remove(&id);
            st.bytes_in_flight.fetch_sub(bytes, Ordering::SeqCst);
            r
        }));
    }

    pub(crate) fn pending(&self, id: &BlockId) -> Option<Arc<Block>> {
        self.state.pending.lock().unwrap().get(id).cloned()
    }

    /// Wait until every queued write has run; report the first failure.
    pub fn flush(&self) -> Result<()> {
        let mut n = self.state.outstanding.lock().unwrap();
        while *n > 0 {
            n = self.state.drained.wait(n).unwrap();
        }
        drop(n);
        match self.state.first_error.lock().unwrap().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Largest number of payload bytes ever queued at once.
    pub fn peak_bytes(&self) -> usize {
        self.state.peak_bytes.load(Ordering::SeqCst)
    }
}

impl Drop for IoLane {
    fn drop(&mut self) {
        self.tx.lock().unwrap().take();
        if let Some(h) = self.worker.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}
