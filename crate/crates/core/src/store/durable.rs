//! Crash-consistent file publication and a fault injector for testing it.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use crate::error::{Error, Result};

/// Simulated process death at a numbered write boundary.
///
/// Every durable write passes three boundaries: before the temp file is
/// created, halfway through its payload, and after `fsync` but before the
/// rename that publishes it. Once a boundary fires, every later boundary
/// fails too, like a killed process that never writes again.
#[derive(Debug, Default)]
pub struct FaultInjector {
    fail_at: Option<usize>,
    seen: AtomicUsize,
    dead: AtomicBool,
}

impl FaultInjector {
    pub fn never() -> Self {
        FaultInjector::default()
    }

    pub fn fail_at(boundary: usize) -> Self {
        FaultInjector {
            fail_at: Some(boundary),
            ..Default::default()
        }
    }

    /// Boundaries passed so far.
    pub fn boundaries(&self) -> usize {
        self.seen.load(Ordering::SeqCst)
    }

    pub fn tripped(&self) -> bool {
        self.dead.load(Ordering::SeqCst)
    }

    pub(crate) fn boundary(&self) -> Result<()> {
        if self.dead.load(Ordering::SeqCst) {
            return Err(Error::Interrupted(self.seen.load(Ordering::SeqCst)));
        }
        let k = self.seen.fetch_add(1, Ordering::SeqCst);
        if self.fail_at == Some(k) {
            self.dead.store(true, Ordering::SeqCst);
            return Err(Error::Interrupted(k));
        }
        Ok(())
    }
}

/// Write `bytes` to `path` so that `path` either keeps its old content or
/// holds all of `bytes`: temp file, fsync, rename, directory fsync.
pub fn durable_write(path: &Path, bytes: &[u8], faults: &FaultInjector) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);

    faults.boundary()?;
    let mut f = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&tmp)
        .map_err(|e| Error::io(&tmp, e))?;
    let half = bytes.len() / 2;
    f.write_all(&bytes[..half]).map_err(|e| Error::io(&tmp, e))?;
    faults.boundary()?;
    f.write_all(&bytes[half..]).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    faults.boundary()?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    if let Some(dir) = path.parent() {
        // directory fsync is best effort; not every filesystem supports it
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::BlockAbsent {
            path: path.to_path_buf(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}
