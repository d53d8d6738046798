//! The work behind each subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use oocsvd::exchange::{matrix_market_input, pgm_output, record_file_output};
use oocsvd::kernels::{block_multiply, ProductTarget};
use oocsvd::matrix::{BlockPartition, IndexWidth, MatrixDescriptor, MatrixId};
use oocsvd::planner::{partition_for_budget, MemoryBudget};
use oocsvd::precision::Precision;
use oocsvd::rsvd::{
    full_svd, ids, randomized_svd_observed, resume_observed, stored_job, InputSource, RsvdConfig, RsvdResult,
};
use oocsvd::store::mtx::{read_mtx_header, MtxSymmetry};
use oocsvd::store::{durable_write, RecordFileWriter, StepRecord};
use oocsvd::workspace::{dense_block, dense_from_fn, Role, TiledMatrix, Workspace, WorkspaceConfig, IO_LANE_ACCOUNT};
use serde::{Deserialize, Serialize};

use crate::args::{Command, ImageArgs, InfoArgs, ResumeArgs, RsvdArgs, RunArgs, SvdArgs};
use crate::exit::{CliError, CliResult};
use crate::profile::ProfileReport;

const JOB_FILE: &str = "cli-job.json";
const DONE_MARKER: &str = "outputs.done";

/// Ids of the reconstruction products, clear of the pipeline's own.
const DIAG_S: MatrixId = MatrixId(40);
const U_SCALED: MatrixId = MatrixId(41);
const RECONSTRUCTION: MatrixId = MatrixId(42);

/// What to produce once the factorization is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Deliverable {
    /// `U.blk`, `S.blk`, `V.blk` and `S.txt` in a directory.
    Factors { outdir: PathBuf },
    /// The rank-r reconstruction as a PGM image.
    Image { output: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CliJob {
    deliverable: Deliverable,
    profile_out: Option<PathBuf>,
    /// Budget the job started with; block layout of the outputs follows it.
    budget: MemoryBudget,
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Rsvd(a) => cmd_rsvd(a),
        Command::Svd(a) => cmd_svd(a),
        Command::CompressImage(a) => cmd_compress_image(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Info(a) => {
            print!("{}", info_report(&a)?);
            Ok(())
        }
    }
}

fn open_workspace(workdir: &Path, budget: MemoryBudget, threads: Option<u32>) -> CliResult<Workspace> {
    std::fs::create_dir_all(workdir).map_err(|e| CliError::io(workdir, e))?;
    let mut config = WorkspaceConfig::new(workdir, budget);
    if let Some(t) = threads {
        config.threads = t as usize;
    }
    Ok(Workspace::open(config)?)
}

fn existing_file(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn abort_after(n: Option<u32>) -> impl FnMut(&StepRecord) -> oocsvd::Result<()> {
    move |record| {
        if n.is_some_and(|n| record.step_id + 1 >= n) {
            std::process::abort();
        }
        Ok(())
    }
}

fn config_of(f: &crate::args::FactorArgs) -> RsvdConfig {
    RsvdConfig::new(f.rank as usize)
        .with_power(f.power)
        .with_seed(f.seed)
        .with_precision(f.precision.into())
}

fn cmd_rsvd(a: RsvdArgs) -> CliResult<()> {
    let input = existing_file(&a.input)?;
    create_dir(&a.outdir)?;
    let workdir = a.run.workdir.clone().unwrap_or_else(|| a.outdir.join("work"));
    let job = CliJob {
        deliverable: Deliverable::Factors { outdir: absolute(&a.outdir)? },
        profile_out: Some(absolute(&a.run.profile_out.clone().unwrap_or_else(|| a.outdir.join("profile.tsv")))?),
        budget: a.run.budget.budget(),
    };
    start(&workdir, &a.run, job, InputSource::MatrixMarket(input), config_of(&a.factor))
}

fn cmd_compress_image(a: ImageArgs) -> CliResult<()> {
    let input = existing_file(&a.input)?;
    let output = absolute(&a.output)?;
    let workdir = a.run.workdir.clone().unwrap_or_else(|| {
        let mut w = output.clone().into_os_string();
        w.push(".work");
        PathBuf::from(w)
    });
    let job = CliJob {
        deliverable: Deliverable::Image { output },
        profile_out: a.run.profile_out.as_deref().map(absolute).transpose()?,
        budget: a.run.budget.budget(),
    };
    start(&workdir, &a.run, job, InputSource::Pgm(input), config_of(&a.factor))
}

fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

fn start(workdir: &Path, run: &RunArgs, job: CliJob, source: InputSource, config: RsvdConfig) -> CliResult<()> {
    let ws = open_workspace(workdir, run.budget.budget(), run.threads)?;
    let marker = workdir.join(DONE_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?;
    }
    let bytes = serde_json::to_vec_pretty(&job).expect("job serializes");
    durable_write(&workdir.join(JOB_FILE), &bytes, ws.store().faults())?;
    let started = Instant::now();
    let res = randomized_svd_observed(&ws, &source, &config, &mut abort_after(run.abort_after_step))?;
    deliver(&ws, &job, &res, started.elapsed())
}

fn cmd_resume(a: ResumeArgs) -> CliResult<()> {
    let job_path = a.workdir.join(JOB_FILE);
    let mut job: CliJob = match std::fs::read(&job_path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| oocsvd::Error::BlockCorrupt {
            path: job_path.clone(),
            reason: e.to_string(),
        })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(oocsvd::Error::NoPlan(a.workdir).into()),
        Err(e) => return Err(CliError::io(&job_path, e)),
    };
    if a.profile_out.is_some() {
        job.profile_out = a.profile_out.clone();
    }
    let (source, config) = stored_job(&a.workdir)?;
    let budget = if a.budget.budget() == MemoryBudget::unlimited() {
        job.budget
    } else {
        a.budget.budget()
    };
    let ws = open_workspace(&a.workdir, budget, a.threads)?;
    let started = Instant::now();
    let res = resume_observed(&ws, &source, &config, &mut abort_after(a.abort_after_step))?;
    if res.steps_executed == 0 && a.workdir.join(DONE_MARKER).exists() {
        return Ok(());
    }
    deliver(&ws, &job, &res, started.elapsed())
}

fn deliver(ws: &Workspace, job: &CliJob, res: &RsvdResult, elapsed: Duration) -> CliResult<()> {
    let blocks = match &job.deliverable {
        Deliverable::Factors { outdir } => write_factors(ws, res, outdir)?,
        Deliverable::Image { output } => {
            let image = reconstruct(ws, res)?;
            pgm_output(ws, &image, output)?;
            vec![("reconstruction".to_string(), image.block_ids().len())]
        }
    };
    if let Some(path) = &job.profile_out {
        let report = profile(ws, res, elapsed, blocks);
        write_text(path, &report.render())?;
    }
    ws.flush()?;
    let marker = ws.root().join(DONE_MARKER);
    durable_write(&marker, b"", ws.store().faults())?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    f.sync_all().map_err(|e| CliError::io(path, e))
}

/// Writes the factors and returns the block count of each.
fn write_factors(ws: &Workspace, res: &RsvdResult, outdir: &Path) -> CliResult<Vec<(String, usize)>> {
    create_dir(outdir)?;
    record_file_output(ws, &res.u, &outdir.join("U.blk"))?;
    record_file_output(ws, &res.v, &outdir.join("V.blk"))?;
    let r = res.s.len();
    let mut w = RecordFileWriter::create(&outdir.join("S.blk"))?;
    w.append(ids::SIGMA, &dense_block::<f64>(0..r, 0..1, res.s.clone()).into())?;
    w.finish()?;
    let mut text = String::new();
    for s in &res.s {
        let _ = writeln!(text, "{s}");
    }
    write_text(&outdir.join("S.txt"), &text)?;
    Ok(vec![
        ("U".to_string(), res.u.block_ids().len()),
        ("S".to_string(), 1),
        ("V".to_string(), res.v.block_ids().len()),
    ])
}

/// `U diag(S) V^T`, tile by tile.
fn reconstruct(ws: &Workspace, res: &RsvdResult) -> CliResult<TiledMatrix> {
    let r = res.s.len();
    let d = dense_from_fn(
        ws,
        DIAG_S,
        r,
        r,
        Precision::Double,
        BlockPartition::single(r, r),
        Role::Small,
        |i, j| if i == j { res.s[i] } else { 0.0 },
    )?;
    let us = block_multiply(ws, &res.u, &d, ProductTarget::new(U_SCALED, Role::New))?;
    Ok(block_multiply(ws, &us, &res.v.t(), ProductTarget::new(RECONSTRUCTION, Role::New))?)
}

fn profile(ws: &Workspace, res: &RsvdResult, elapsed: Duration, blocks: Vec<(String, usize)>) -> ProfileReport {
    let mut threads = BTreeMap::<String, usize>::new();
    for (op, n) in ws.stats().threads() {
        let e = threads.entry(op).or_default();
        *e = (*e).max(n);
    }
    ProfileReport {
        stages: res.timings,
        total: elapsed,
        peak_resident_bytes: ws.tracker().global_peak(),
        matrix_peaks: ws
            .tracker()
            .peaks()
            .into_iter()
            .filter(|(id, _)| *id != IO_LANE_ACCOUNT)
            .map(|(id, b)| (id.0, b))
            .collect(),
        blocks,
        threads: threads.into_iter().collect(),
        chosen_q: Some(res.chosen_q),
        steps_executed: res.steps_executed,
        steps_reused: res.steps_reused,
    }
}

fn cmd_svd(a: SvdArgs) -> CliResult<()> {
    let input = existing_file(&a.input)?;
    create_dir(&a.outdir)?;
    let workdir = a.run.workdir.clone().unwrap_or_else(|| a.outdir.join("work"));
    let ws = open_workspace(&workdir, a.run.budget.budget(), a.run.threads)?;
    let precision = a.precision.into();
    let started = Instant::now();
    let (m, _) = matrix_market_input(&ws, ids::INPUT, &input, precision)?;
    let res = full_svd(&ws, &m, precision)?;
    let elapsed = started.elapsed();
    let blocks = write_factors(&ws, &res, &a.outdir)?;
    let path = a.run.profile_out.clone().unwrap_or_else(|| a.outdir.join("profile.tsv"));
    let mut report = profile(&ws, &res, elapsed, blocks);
    report.chosen_q = None;
    write_text(&path, &report.render())?;
    Ok(ws.flush()?)
}

/// Summary of a Matrix Market file from its header alone.
pub fn info_report(a: &InfoArgs) -> CliResult<String> {
    let file = File::open(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let (header, _) = read_mtx_header(&mut BufReader::new(file))?;
    let precision: Precision = a.precision.into();
    let desc = MatrixDescriptor::sparse(
        ids::INPUT,
        header.rows,
        header.cols,
        header.declared_entries,
        precision,
        IndexWidth::for_shape(header.rows, header.cols),
    )?;
    let dense_bytes = header.rows as u128 * header.cols as u128 * precision.bytes() as u128;
    let partition = partition_for_budget(&desc, &a.budget.budget());
    let mut out = String::new();
    let _ = writeln!(out, "rows\t{}", header.rows);
    let _ = writeln!(out, "cols\t{}", header.cols);
    let _ = writeln!(out, "nnz\t{}", header.declared_entries);
    if header.symmetry == MtxSymmetry::Symmetric {
        let _ = writeln!(out, "symmetry\tsymmetric (nnz counts stored triangle entries)");
    }
    let _ = writeln!(out, "density\t{:e}", desc.density_ratio());
    let _ = writeln!(out, "sparse_bytes\t{}", desc.payload_bytes());
    let _ = writeln!(out, "dense_bytes\t{dense_bytes}");
    let _ = writeln!(out, "dense_size\t{}", human_bytes(dense_bytes));
    let _ = writeln!(out, "partition\t{}x{}", partition.tile_rows(), partition.tile_cols());
    Ok(out)
}

/// Decimal units, two decimals.
fn human_bytes(b: u128) -> String {
    const UNITS: [&str; 6] = ["B", "KB", "MB", "GB", "TB", "PB"];
    let mut v = b as f64;
    let mut u = 0;
    while v >= 1000.0 && u + 1 < UNITS.len() {
        v /= 1000.0;
        u += 1;
    }
    if u == 0 {
        format!("{b} B")
    } else {
        format!("{v:.2} {}", UNITS[u])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn human_sizes() {
        assert_eq!(human_bytes(999), "999 B");
        assert_eq!(human_bytes(1_447_360u128 * 1_447_360 * 8), "16.76 TB");
        assert_eq!(human_bytes(1_500_000), "1.50 MB");
    }

    #[test]
    fn deliverable_round_trips() {
        let job = CliJob {
            deliverable: Deliverable::Image { output: "/x/out.pgm".into() },
            profile_out: None,
            budget: MemoryBudget::per_matrix(1024),
        };
        let back: CliJob = serde_json::from_slice(&serde_json::to_vec(&job).unwrap()).unwrap();
        assert_eq!(back.deliverable, job.deliverable);
        assert_eq!(back.budget, job.budget);
    }
}
