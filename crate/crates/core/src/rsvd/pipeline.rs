//! The randomized SVD as a checkpointed sequence of steps.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::hash::Hasher;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use super::config::{PowerMode, RsvdConfig, Stage, StageTimings};
use super::layout::{ids, last_use, layout, resume_point, should_stop, StepSpec};
use super::sketch::gaussian_matrix;
use crate::error::{Error, Result};
use crate::exchange::{matrix_market_input, pgm_input};
use crate::kernels::{
    apply_reflectors, block_multiply, form_q, gather_rows, svd_small, thin_qr, to_mat, Mat, ProductTarget, QrFactors,
    ThinQr,
};
use crate::matrix::MatrixId;
use crate::planner::{partition_for_limit, residency_check};
use crate::precision::{Precision, Real};
use crate::store::plan::write_step_with;
use crate::store::{
    durable_write, load_plan, plan_dir, read_plan_header, step_path, write_plan_header, PlanHeader, StepRecord,
    StepStatus,
};
use crate::workspace::{dense_from_fn, matrix_record_name, Role, TiledMatrix, Workspace};

const PLAN_FORMAT: u32 = 1;

/// Where the input matrix comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    MatrixMarket(PathBuf),
    Pgm(PathBuf),
    /// A matrix already persisted in the workspace.
    Stored(MatrixId),
}

impl InputSource {
    fn matrix_id(&self) -> MatrixId {
        match self {
            InputSource::Stored(id) => *id,
            _ => ids::INPUT,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            InputSource::Stored(id) if ids::RESERVED.contains(&id.0) => Err(Error::InvalidConfig(format!(
                "input matrix id {id} collides with the pipeline's working matrices"
            ))),
            _ => Ok(()),
        }
    }

    /// Content fingerprint, so a plan is never resumed against other data.
    fn identity(&self, ws: &Workspace) -> Result<String> {
        let (kind, path) = match self {
            InputSource::MatrixMarket(p) => ("mtx", p.clone()),
            InputSource::Pgm(p) => ("pgm", p.clone()),
            InputSource::Stored(id) => ("stored", ws.root().join(matrix_record_name(*id))),
        };
        let mut f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut h = XxHash64::with_seed(0);
        let mut buf = vec![0u8; 1 << 16];
        let mut len = 0u64;
        loop {
            let n = f.read(&mut buf).map_err(|e| Error::io(&path, e))?;
            if n == 0 {
                break;
            }
            h.write(&buf[..n]);
            len += n as u64;
        }
        Ok(format!("{kind}:{len}:{:016x}", h.finish()))
    }
}

/// Factors of a run, held as workspace matrices.
#[derive(Debug)]
pub struct RsvdResult {
    pub u: TiledMatrix,
    pub s: Vec<f64>,
    pub v: TiledMatrix,
    pub chosen_q: u32,
    pub timings: StageTimings,
    /// `log2` of the average entry norm of each power iterate.
    pub log2_norms: Vec<f64>,
    pub steps_executed: usize,
    pub steps_reused: usize,
}

/// Called after each step's record is durable. An error stops the run.
pub type StepObserver<'a> = &'a mut dyn FnMut(&StepRecord) -> Result<()>;

#[derive(Serialize, Deserialize)]
struct Job {
    source: InputSource,
    config: RsvdConfig,
}

fn job_path(workdir: &Path) -> PathBuf {
    plan_dir(workdir).join("job.json")
}

/// The input and configuration a workdir's plan was started with.
pub fn stored_job(workdir: &Path) -> Result<(InputSource, RsvdConfig)> {
    let path = job_path(workdir);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NoPlan(workdir.to_path_buf())),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let job: Job = serde_json::from_slice(&bytes).map_err(|e| Error::BlockCorrupt {
        path,
        reason: e.to_string(),
    })?;
    Ok((job.source, job.config))
}

/// Run from scratch, discarding any plan already in the workdir.
pub fn randomized_svd(ws: &Workspace, source: &InputSource, config: &RsvdConfig) -> Result<RsvdResult> {
    run(ws, source, config, false, None)
}

pub fn randomized_svd_observed(
    ws: &Workspace,
    source: &InputSource,
    config: &RsvdConfig,
    observer: StepObserver<'_>,
) -> Result<RsvdResult> {
    run(ws, source, config, false, Some(observer))
}

/// Finish the plan in the workdir, executing only steps without a usable
/// record. The configuration must match the one the plan was built for.
pub fn resume(ws: &Workspace, source: &InputSource, config: &RsvdConfig) -> Result<RsvdResult> {
    run(ws, source, config, true, None)
}

pub fn resume_observed(
    ws: &Workspace,
    source: &InputSource,
    config: &RsvdConfig,
    observer: StepObserver<'_>,
) -> Result<RsvdResult> {
    run(ws, source, config, true, Some(observer))
}

fn run(
    ws: &Workspace,
    source: &InputSource,
    config: &RsvdConfig,
    resuming: bool,
    observer: Option<StepObserver<'_>>,
) -> Result<RsvdResult> {
    let started = Instant::now();
    config.validate()?;
    source.check()?;
    ws.flush()?;
    let root = ws.root().to_path_buf();
    let stored_header = if resuming {
        Some(read_plan_header(&root)?.ok_or_else(|| Error::NoPlan(root.clone()))?)
    } else {
        None
    };
    let digest = config.digest(&source.identity(ws)?);
    let plan_id = format!("rsvd-{digest}");
    let faults = ws.store().faults();

    let mut records = Vec::new();
    if let Some(header) = stored_header {
        if header.config_digest != digest {
            return Err(Error::ConfigMismatch {
                stored: header.config_digest,
                requested: digest,
            });
        }
        records = load_plan(&root)?;
    } else {
        let dir = plan_dir(&root);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let job = serde_json::to_vec_pretty(&Job {
            source: source.clone(),
            config: config.clone(),
        })
        .expect("job serializes");
        durable_write(&job_path(&root), &job, faults)?;
        write_plan_header(
            &PlanHeader {
                plan_id: plan_id.clone(),
                config_digest: digest,
                format_version: PLAN_FORMAT,
            },
            &root,
            faults,
        )?;
    }

    let a = source.matrix_id();
    let initial_q = decided_q(config, &records).unwrap_or(match config.power {
        PowerMode::Fixed(q) => q,
        PowerMode::Auto => config.q_max,
    });
    let steps = layout(a, initial_q, config.gram_path);
    let done = records
        .iter()
        .enumerate()
        .take_while(|(i, r)| {
            r.step_id as usize == *i && r.is_done() && r.plan_id == plan_id && steps.get(*i).is_some_and(|s| s.op == r.operation)
        })
        .count();
    let existing: Vec<u32> = records.iter().map(|r| r.step_id).collect();
    records.truncate(done);
    let resume_at = resume_point(&steps, &records, ws);
    records.truncate(resume_at);
    for id in existing.into_iter().filter(|&id| id as usize >= resume_at) {
        let p = step_path(&root, id);
        std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
    }

    let mut runner = Runner {
        ws,
        plan_id,
        steps: Vec::new(),
        evictions: Vec::new(),
        sizes: HashMap::new(),
        prior: records,
        next: 0,
        cache: HashMap::new(),
        timings: StageTimings::default(),
        observer,
        executed: 0,
        reused: 0,
    };
    runner.set_steps(steps);
    runner.timings.add(Stage::TextParsing, started.elapsed());
    match config.precision.work() {
        Precision::Double => execute::<f64>(&mut runner, source, config),
        _ => execute::<f32>(&mut runner, source, config),
    }
}

/// The q an auto or fixed run settled on, if its records already show it.
fn decided_q(config: &RsvdConfig, records: &[StepRecord]) -> Option<u32> {
    let mut hist = Vec::new();
    for r in records.iter().take_while(|r| r.is_done()) {
        let t = if r.operation == "power_y0" {
            0
        } else if let Some(t) = r.operation.strip_prefix("power_y").and_then(|t| t.parse::<u32>().ok()) {
            t
        } else {
            continue;
        };
        if t as usize != hist.len() {
            return None;
        }
        hist.push(r.values.get("log2_nu")? + r.values.get("exponent")?);
        if power_done(config, &hist) {
            return Some(t);
        }
    }
    None
}

fn power_done(config: &RsvdConfig, hist: &[f64]) -> bool {
    match config.power {
        PowerMode::Fixed(q) => hist.len() > q as usize,
        PowerMode::Auto => should_stop(hist, config.tau, config.q_max),
    }
}

struct StepOutput {
    matrices: Vec<TiledMatrix>,
    values: BTreeMap<String, f64>,
}

impl StepOutput {
    fn of(matrices: Vec<TiledMatrix>) -> Self {
        StepOutput {
            matrices,
            values: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }
}

struct Runner<'w, 'o> {
    ws: &'w Workspace,
    plan_id: String,
    steps: Vec<StepSpec>,
    /// Matrices to drop from memory before each step.
    evictions: Vec<Vec<MatrixId>>,
    sizes: HashMap<MatrixId, (u64, Role)>,
    prior: Vec<StepRecord>,
    next: usize,
    cache: HashMap<MatrixId, TiledMatrix>,
    timings: StageTimings,
    observer: Option<StepObserver<'o>>,
    executed: usize,
    reused: usize,
}

impl Runner<'_, '_> {
    fn get(&mut self, id: MatrixId) -> Result<TiledMatrix> {
        if let Some(m) = self.cache.get(&id) {
            return Ok(m.clone());
        }
        let m = self.ws.open_matrix(id)?;
        self.cache.insert(id, m.clone());
        Ok(m)
    }

    fn set_steps(&mut self, steps: Vec<StepSpec>) {
        self.steps = steps;
        self.plan_evictions();
    }

    /// Expected in-core bytes of the pipeline's matrices, once the input's
    /// shape is known.
    fn set_sizes(&mut self, a: &TiledMatrix, k: usize, rank: usize, scalar: usize) {
        let (m, n) = a.shape();
        let thin = |rows: usize, cols: usize| (rows * cols * scalar) as u64;
        self.sizes = HashMap::from([
            (a.id(), (a.descriptor().payload_bytes(), Role::Input)),
            (ids::SKETCH, (thin(n, k), Role::New)),
            (ids::Y, (thin(m, k), Role::New)),
            (ids::Z, (thin(n, k), Role::New)),
            (ids::Y_REFLECTORS, (thin(m, k), Role::New)),
            (ids::Q, (thin(m, k), Role::New)),
            (ids::BT, (thin(n, k), Role::New)),
            (ids::B_REFLECTORS, (thin(n, k), Role::New)),
            (ids::U, (thin(m, rank), Role::New)),
            (ids::V, (thin(n, rank), Role::New)),
        ]);
        self.plan_evictions();
    }

    /// Spill schedule for the global limit. When no schedule fits, the
    /// workspace falls back to evicting the least recently used matrix.
    fn plan_evictions(&mut self) {
        self.evictions = vec![Vec::new(); self.steps.len()];
        let Some(global) = self.ws.budget().global else {
            return;
        };
        let usage: Vec<Vec<(MatrixId, u64)>> = self
            .steps
            .iter()
            .map(|s| {
                s.inputs
                    .iter()
                    .chain(&s.outputs)
                    .filter_map(|id| {
                        let &(bytes, role) = self.sizes.get(id)?;
                        let in_core = self.ws.limit_for(role).is_none_or(|l| bytes <= l);
                        in_core.then_some((*id, bytes))
                    })
                    .collect()
            })
            .collect();
        if let Ok(schedule) = residency_check(&usage, Some(global)) {
            for e in schedule {
                self.evictions[e.before_step].push(e.key);
            }
        }
    }

    fn step(&mut self, op: &str, body: impl FnOnce(&mut Self) -> Result<StepOutput>) -> Result<BTreeMap<String, f64>> {
        let s = self.next;
        let spec = self.steps[s].clone();
        debug_assert_eq!(spec.op, op, "step {s} out of order");
        self.next += 1;
        if let Some(done) = self.prior.get(s) {
            self.reused += 1;
            let values = done.values.clone();
            self.release_dead(s);
            return Ok(values);
        }
        for id in &spec.outputs {
            self.cache.remove(id);
        }
        for id in &self.evictions[s] {
            if let Some(m) = self.cache.get(id) {
                self.ws.evict(m);
            }
        }
        let t0 = Instant::now();
        self.ws.begin_op();
        let out = body(self)?;
        self.ws.flush()?;
        let record = StepRecord {
            plan_id: self.plan_id.clone(),
            step_id: s as u32,
            operation: spec.op.clone(),
            inputs: spec.inputs.clone(),
            outputs: out.matrices.iter().flat_map(|m| m.block_ids()).collect(),
            artifacts: out.matrices.iter().map(|m| matrix_record_name(m.id())).collect(),
            status: StepStatus::Done,
            rng_seed: None,
            values: out.values,
        };
        write_step_with(&record, self.ws.root(), self.ws.store().faults())?;
        for m in out.matrices {
            self.cache.insert(m.id(), m);
        }
        self.release_dead(s);
        self.timings.add(spec.stage, t0.elapsed());
        self.executed += 1;
        if let Some(obs) = self.observer.as_mut() {
            obs(&record)?;
        }
        Ok(record.values)
    }

    fn release_dead(&mut self, s: usize) {
        let steps = &self.steps;
        self.cache.retain(|id, _| last_use(steps, *id).is_some_and(|u| u > s));
    }
}

/// `log2` of `||m||_F / sqrt(rows * cols)`, summed in row-major order so
/// the value does not depend on the partition.
fn log2_average_norm(ws: &Workspace, m: &TiledMatrix) -> Result<f64> {
    let (rows, cols) = m.shape();
    let p = m.partition();
    let mut acc = 0.0f64;
    for ti in 0..p.tile_rows() {
        for v in gather_rows::<f64>(ws, m, p.row_range(ti))? {
            acc += v * v;
        }
    }
    Ok(0.5 * (acc / (rows as f64 * cols as f64)).log2())
}

/// `x * y` scaled by the power of two nearest `1 / nu(y)`.
/// Returns the product, its stored `log2` norm and the exponent removed.
fn rescaled_product(
    ws: &Workspace,
    x: &TiledMatrix,
    y: &TiledMatrix,
    id: MatrixId,
    log2_nu_y: f64,
) -> Result<(TiledMatrix, f64, f64)> {
    let e = if log2_nu_y.is_finite() { log2_nu_y.round() } else { 0.0 };
    let out = block_multiply(ws, x, y, ProductTarget::new(id, Role::New).scaled((-e).exp2()))?;
    let nu = log2_average_norm(ws, &out)?;
    Ok((out, nu, e))
}

fn store_mat<T: Real>(ws: &Workspace, id: MatrixId, m: &Mat<T>, role: Role) -> Result<TiledMatrix> {
    let (rows, cols) = (m.rows(), m.cols());
    let desc = crate::matrix::MatrixDescriptor::dense(id, rows, cols, T::PRECISION)?;
    let partition = match role {
        Role::Small => desc.partition.clone(),
        _ => partition_for_limit(&desc, ws.tile_limit(role)),
    };
    dense_from_fn(ws, id, rows, cols, T::PRECISION, partition, role, |i, j| {
        num_traits::ToPrimitive::to_f64(&m.get(i, j)).unwrap_or(f64::NAN)
    })
}

fn reopen_qr<T: Real>(r: &mut Runner, reflectors: MatrixId, factors: MatrixId) -> Result<ThinQr<T>> {
    let w = r.get(reflectors)?;
    let f = r.get(factors)?;
    let packed = to_mat::<T>(r.ws, &f)?;
    Ok(ThinQr {
        reflectors: w,
        factors: QrFactors::unpack(&packed)?,
    })
}

fn value(v: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    v.get(key)
        .copied()
        .ok_or_else(|| Error::LengthMismatch(format!("step record lacks `{key}`")))
}

fn ingest(ws: &Workspace, source: &InputSource, precision: Precision) -> Result<TiledMatrix> {
    match source {
        InputSource::MatrixMarket(p) => Ok(matrix_market_input(ws, ids::INPUT, p, precision)?.0),
        InputSource::Pgm(p) => pgm_input(ws, ids::INPUT, p, precision),
        InputSource::Stored(id) => ws.open_matrix(*id),
    }
}

fn execute<T: Real>(r: &mut Runner, source: &InputSource, cfg: &RsvdConfig) -> Result<RsvdResult> {
    let ws = r.ws;
    let a_id = source.matrix_id();
    let v = r.step("ingest", |_| {
        let a = ingest(ws, source, cfg.precision)?;
        let (m, n) = a.shape();
        Ok(StepOutput::of(vec![a]).with("rows", m as f64).with("cols", n as f64))
    })?;
    let (m, n) = (value(&v, "rows")? as usize, value(&v, "cols")? as usize);
    cfg.validate_for(m, n)?;
    let k = cfg.sketch_width(m, n);
    let a = r.get(a_id)?;
    r.set_sizes(&a, k, cfg.rank, T::PRECISION.bytes());
    drop(a);

    r.step("sketch", |_| {
        let o = gaussian_matrix(ws, ids::SKETCH, n, k, cfg.seed, T::PRECISION)?;
        Ok(StepOutput::of(vec![o]))
    })?;

    // power iterates are stored as 2^-exponent times their true value
    let v = r.step("power_y0", |r| {
        let (a, o) = (r.get(a_id)?, r.get(ids::SKETCH)?);
        let (y, nu, _) = rescaled_product(ws, &a, &o, ids::Y, 0.0)?;
        Ok(StepOutput::of(vec![y]).with("log2_nu", nu).with("exponent", 0.0))
    })?;
    let (mut nu, mut exponent) = (value(&v, "log2_nu")?, value(&v, "exponent")?);
    let mut hist = vec![nu + exponent];
    let mut q = 0u32;
    while !power_done(cfg, &hist) {
        q += 1;
        let v = r.step(&format!("power_z{q}"), |r| {
            let (a, y) = (r.get(a_id)?, r.get(ids::Y)?);
            let (z, nz, e) = rescaled_product(ws, &a.t(), &y, ids::Z, nu)?;
            Ok(StepOutput::of(vec![z]).with("log2_nu", nz).with("exponent", exponent + e))
        })?;
        let (nz, ez) = (value(&v, "log2_nu")?, value(&v, "exponent")?);
        let v = r.step(&format!("power_y{q}"), |r| {
            let (a, z) = (r.get(a_id)?, r.get(ids::Z)?);
            let (y, ny, e) = rescaled_product(ws, &a, &z, ids::Y, nz)?;
            Ok(StepOutput::of(vec![y]).with("log2_nu", ny).with("exponent", ez + e))
        })?;
        nu = value(&v, "log2_nu")?;
        exponent = value(&v, "exponent")?;
        hist.push(nu + exponent);
    }
    if r.steps.len() != layout(a_id, q, cfg.gram_path).len() {
        r.set_steps(layout(a_id, q, cfg.gram_path));
    }

    r.step("qr_y", |r| {
        let y = r.get(ids::Y)?;
        let qr = thin_qr::<T>(ws, &y, ids::Y_REFLECTORS)?;
        let f = store_mat(ws, ids::Y_FACTORS, &qr.factors.pack(), Role::Small)?;
        let deficient = qr.factors.rank_deficient().len() as f64;
        Ok(StepOutput::of(vec![qr.reflectors, f]).with("rank_deficient", deficient))
    })?;
    r.step("form_q", |r| {
        let qr = reopen_qr::<T>(r, ids::Y_REFLECTORS, ids::Y_FACTORS)?;
        Ok(StepOutput::of(vec![form_q(ws, &qr, ids::Q)?]))
    })?;

    let mut basis = (ids::Q, 0.0, 0.0);
    if cfg.gram_path {
        for t in 1..=q {
            let (b_id, nb, eb) = basis;
            let v = r.step(&format!("gram_z{t}"), |r| {
                let (a, x) = (r.get(a_id)?, r.get(b_id)?);
                let (z, nz, e) = rescaled_product(ws, &a.t(), &x, ids::Z, nb)?;
                Ok(StepOutput::of(vec![z]).with("log2_nu", nz).with("exponent", eb + e))
            })?;
            let (nz, ez) = (value(&v, "log2_nu")?, value(&v, "exponent")?);
            let v = r.step(&format!("gram_x{t}"), |r| {
                let (a, z) = (r.get(a_id)?, r.get(ids::Z)?);
                let (x, nx, e) = rescaled_product(ws, &a, &z, ids::Y, nz)?;
                Ok(StepOutput::of(vec![x]).with("log2_nu", nx).with("exponent", ez + e))
            })?;
            basis = (ids::Y, value(&v, "log2_nu")?, value(&v, "exponent")?);
        }
    }
    let (b_id, nb, eb) = basis;
    let v = r.step("project", |r| {
        let (a, x) = (r.get(a_id)?, r.get(b_id)?);
        let (bt, _, e) = rescaled_product(ws, &a.t(), &x, ids::BT, if cfg.gram_path { nb } else { 0.0 })?;
        Ok(StepOutput::of(vec![bt]).with("exponent", eb + e))
    })?;
    let b_exponent = value(&v, "exponent")?;

    r.step("qr_bt", |r| {
        let bt = r.get(ids::BT)?;
        let qr = thin_qr::<T>(ws, &bt, ids::B_REFLECTORS)?;
        let f = store_mat(ws, ids::B_FACTORS, &qr.factors.pack(), Role::Small)?;
        Ok(StepOutput::of(vec![qr.reflectors, f]))
    })?;
    let rank = cfg.rank;
    r.step("svd_small", |r| {
        let f = to_mat::<T>(ws, &r.get(ids::B_FACTORS)?)?;
        let rb = QrFactors::unpack(&f)?.r;
        // B = R_b^T Q_b^T
        let svd = svd_small(&rb.transpose())?;
        let us = Mat::from_fn(k, rank, |i, j| svd.u.get(i, j));
        let vs = Mat::from_fn(k, rank, |i, j| svd.v.get(i, j));
        let s = Mat::from_fn(1, rank, |_, j| svd.s[j]);
        Ok(StepOutput::of(vec![
            store_mat(ws, ids::U_SMALL, &us, Role::Small)?,
            store_mat(ws, ids::SIGMA, &s, Role::Small)?,
            store_mat(ws, ids::V_SMALL, &vs, Role::Small)?,
        ]))
    })?;
    r.step("form_u", |r| {
        let (qm, us) = (r.get(ids::Q)?, r.get(ids::U_SMALL)?);
        Ok(StepOutput::of(vec![block_multiply(ws, &qm, &us, ProductTarget::new(ids::U, Role::New))?]))
    })?;
    r.step("form_v", |r| {
        let qr = reopen_qr::<T>(r, ids::B_REFLECTORS, ids::B_FACTORS)?;
        let vs = to_mat::<T>(ws, &r.get(ids::V_SMALL)?)?;
        Ok(StepOutput::of(vec![apply_reflectors(ws, &qr, &vs, ids::V, Role::New)?]))
    })?;

    let t0 = Instant::now();
    let raw = r.get(ids::SIGMA)?.to_dense_f64(ws)?;
    let s = if cfg.gram_path {
        let root = (2 * q + 1) as f64;
        raw.iter()
            .map(|&x| if x > 0.0 { ((x.log2() + b_exponent) / root).exp2() } else { 0.0 })
            .collect()
    } else {
        raw
    };
    let result = RsvdResult {
        u: r.get(ids::U)?,
        s,
        v: r.get(ids::V)?,
        chosen_q: q,
        timings: StageTimings::default(),
        log2_norms: hist,
        steps_executed: r.executed,
        steps_reused: r.reused,
    };
    r.timings.add(Stage::Postprocessing, t0.elapsed());
    Ok(RsvdResult {
        timings: r.timings,
        ..result
    })
}

/// Choose q for `a` by running the power sequence of the pipeline without
/// recording a plan. Uses the pipeline's working matrix ids.
pub fn auto_select_q(ws: &Workspace, a: &TiledMatrix, rank: usize, q_max: u32, tau: f64, seed: u64) -> Result<u32> {
    let cfg = RsvdConfig {
        rank,
        q_max,
        tau,
        seed,
        power: PowerMode::Auto,
        precision: a.precision(),
        ..RsvdConfig::new(rank)
    };
    cfg.validate()?;
    let (m, n) = a.shape();
    cfg.validate_for(m, n)?;
    let k = cfg.sketch_width(m, n);
    let o = gaussian_matrix(ws, ids::SKETCH, n, k, seed, a.precision().work())?;
    let mut y = block_multiply(ws, a, &o, ProductTarget::new(ids::Y, Role::New))?;
    drop(o);
    let (mut nu, mut exponent) = (log2_average_norm(ws, &y)?, 0.0);
    let mut hist = vec![nu];
    while !should_stop(&hist, tau, q_max) {
        let (z, nz, ez) = rescaled_product(ws, &a.t(), &y, ids::Z, nu)?;
        drop(y);
        let (next, ny, ey) = rescaled_product(ws, a, &z, ids::Y, nz)?;
        y = next;
        nu = ny;
        exponent += ez + ey;
        hist.push(nu + exponent);
    }
    Ok(hist.len() as u32 - 1)
}

/// `(A A^T)^q A O` as `2q + 1` thin products, right to left, alternating
/// between two buffers `y_id` and `z_id`.
pub fn power_apply(
    ws: &Workspace,
    a: &TiledMatrix,
    o: &TiledMatrix,
    q: u32,
    y_id: MatrixId,
    z_id: MatrixId,
) -> Result<TiledMatrix> {
    let mut y = block_multiply(ws, a, o, ProductTarget::new(y_id, Role::New))?;
    for _ in 0..q {
        let z = block_multiply(ws, &a.t(), &y, ProductTarget::new(z_id, Role::New))?;
        drop(y);
        y = block_multiply(ws, a, &z, ProductTarget::new(y_id, Role::New))?;
    }
    Ok(y)
}

/// Exact SVD of `a` (all `min(m, n)` values) by a streamed QR of the tall
/// orientation followed by the in-core SVD of its triangular factor.
pub fn full_svd(ws: &Workspace, a: &TiledMatrix, precision: Precision) -> Result<RsvdResult> {
    match precision.work() {
        Precision::Double => full_svd_at::<f64>(ws, a),
        _ => full_svd_at::<f32>(ws, a),
    }
}

fn full_svd_at<T: Real>(ws: &Workspace, a: &TiledMatrix) -> Result<RsvdResult> {
    if ids::RESERVED.contains(&a.id().0) {
        return Err(Error::InvalidConfig(format!("input matrix id {} is reserved", a.id())));
    }
    let mut timings = StageTimings::default();
    let (m, n) = a.shape();
    let tall = if m >= n { a.clone() } else { a.t() };
    let t0 = Instant::now();
    let qr = thin_qr::<T>(ws, &tall, ids::Y_REFLECTORS)?;
    timings.add(Stage::Svd0Preparation, t0.elapsed());
    let t0 = Instant::now();
    let svd = svd_small(&qr.factors.r)?;
    timings.add(Stage::Svd0, t0.elapsed());
    let t0 = Instant::now();
    let left = apply_reflectors(ws, &qr, &svd.u, ids::U, Role::New)?;
    let right = store_mat(ws, ids::V, &svd.v, Role::New)?;
    let (u, v) = if m >= n { (left, right) } else { (right, left) };
    let s = svd.s.iter().map(|&x| num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)).collect();
    timings.add(Stage::Postprocessing, t0.elapsed());
    Ok(RsvdResult {
        u,
        s,
        v,
        chosen_q: 0,
        timings,
        log2_norms: Vec::new(),
        steps_executed: 0,
        steps_reused: 0,
    })
}
