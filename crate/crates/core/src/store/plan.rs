//! Execution-plan headers and per-step records used for resume.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::durable::{durable_write, FaultInjector};
use super::{BlockId, BlockStore};
use crate::error::{Error, Result};
use crate::matrix::MatrixId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pending,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub plan_id: String,
    pub step_id: u32,
    pub operation: String,
    pub inputs: Vec<MatrixId>,
    pub outputs: Vec<BlockId>,
    /// Extra files (relative to the workdir) the step's result depends on.
    #[serde(default)]
    pub artifacts: Vec<String>,
    pub status: StepStatus,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    /// Scalars the step measured, needed by later decisions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

impl StepRecord {
    pub fn is_done(&self) -> bool {
        self.status == StepStatus::Done
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub plan_id: String,
    pub config_digest: String,
    pub format_version: u32,
}

pub fn plan_dir(workdir: &Path) -> PathBuf {
    workdir.join("plan")
}

pub fn step_path(workdir: &Path, step_id: u32) -> PathBuf {
    plan_dir(workdir).join(format!("step_{step_id:05}.json"))
}

fn header_path(workdir: &Path) -> PathBuf {
    plan_dir(workdir).join("plan.json")
}

pub fn encode_step(record: &StepRecord) -> Vec<u8> {
    serde_json::to_vec_pretty(record).expect("step record serializes")
}

/// Durably write one step record. Callers must have made the step's outputs
/// durable first.
pub fn write_step(record: &StepRecord, workdir: &Path) -> Result<()> {
    write_step_with(record, workdir, &FaultInjector::never())
}

pub(crate) fn write_step_with(record: &StepRecord, workdir: &Path, faults: &FaultInjector) -> Result<()> {
    let dir = plan_dir(workdir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    durable_write(&step_path(workdir, record.step_id), &encode_step(record), faults)
}

pub fn write_plan_header(header: &PlanHeader, workdir: &Path, faults: &FaultInjector) -> Result<()> {
    let dir = plan_dir(workdir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let bytes = serde_json::to_vec_pretty(header).expect("plan header serializes");
    durable_write(&header_path(workdir), &bytes, faults)
}

pub fn read_plan_header(workdir: &Path) -> Result<Option<PlanHeader>> {
    let path = header_path(workdir);
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::BlockCorrupt {
                path,
                reason: e.to_string(),
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// All step records in the workdir, ordered by step id.
///
/// A record that cannot be read, or whose outputs are missing or fail their
/// checksum, is reported as pending.
pub fn scan_plan(workdir: &Path) -> Result<Vec<StepRecord>> {
    let store = BlockStore::open(workdir)?;
    let mut records = load_plan(workdir)?;
    for record in &mut records {
        if record.is_done() && !outputs_intact(record, &store, workdir) {
            record.status = StepStatus::Pending;
        }
    }
    Ok(records)
}

/// All step records in the workdir as written, ordered by step id.
/// Unreadable records are reported as pending; outputs are not checked.
pub fn load_plan(workdir: &Path) -> Result<Vec<StepRecord>> {
    let dir = plan_dir(workdir);
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&dir, e)),
    };
    let mut records = Vec::new();
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(id) = name
            .strip_prefix("step_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u32>().ok())
        else {
            continue;
        };
        let parsed = fs::read(entry.path())
            .ok()
            .and_then(|b| serde_json::from_slice::<StepRecord>(&b).ok())
            .filter(|r| r.step_id == id);
        let record = parsed.unwrap_or_else(|| StepRecord {
            plan_id: String::new(),
            step_id: id,
            operation: "unreadable".into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            artifacts: Vec::new(),
            status: StepStatus::Pending,
            rng_seed: None,
            values: BTreeMap::new(),
        });
        records.push(record);
    }
    records.sort_by_key(|r| r.step_id);
    Ok(records)
}

fn outputs_intact(record: &StepRecord, store: &BlockStore, workdir: &Path) -> bool {
    record.outputs.iter().all(|id| store.verify_block(id).is_ok())
        && record.artifacts.iter().all(|a| workdir.join(a).is_file())
}
