//! The linear step sequence of a run, and where an interrupted run picks up.

use super::config::Stage;
use crate::matrix::MatrixId;
use crate::store::StepRecord;
use crate::workspace::{matrix_record_name, Workspace};

/// Matrix ids used by the pipeline. Inputs stored by the caller must use
/// an id outside `RESERVED`.
pub mod ids {
    use crate::matrix::MatrixId;

    pub const INPUT: MatrixId = MatrixId(1);
    pub const SKETCH: MatrixId = MatrixId(2);
    /// Running sketch; later reused for the projected power iterates.
    pub const Y: MatrixId = MatrixId(3);
    pub const Z: MatrixId = MatrixId(4);
    pub const Y_REFLECTORS: MatrixId = MatrixId(5);
    pub const Y_FACTORS: MatrixId = MatrixId(6);
    pub const Q: MatrixId = MatrixId(7);
    pub const BT: MatrixId = MatrixId(8);
    pub const B_REFLECTORS: MatrixId = MatrixId(9);
    pub const B_FACTORS: MatrixId = MatrixId(10);
    pub const U_SMALL: MatrixId = MatrixId(11);
    pub const SIGMA: MatrixId = MatrixId(12);
    pub const V_SMALL: MatrixId = MatrixId(13);
    pub const U: MatrixId = MatrixId(14);
    pub const V: MatrixId = MatrixId(15);
    pub const RESERVED: std::ops::RangeInclusive<u32> = 2..=31;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSpec {
    pub op: String,
    pub stage: Stage,
    pub inputs: Vec<MatrixId>,
    pub outputs: Vec<MatrixId>,
}

fn spec(op: impl Into<String>, stage: Stage, inputs: &[MatrixId], outputs: &[MatrixId]) -> StepSpec {
    StepSpec {
        op: op.into(),
        stage,
        inputs: inputs.to_vec(),
        outputs: outputs.to_vec(),
    }
}

/// Steps of a run with `q` power rounds: `10 + 2q`, or `10 + 4q` on the
/// Gram path.
pub fn layout(a: MatrixId, q: u32, gram_path: bool) -> Vec<StepSpec> {
    use ids::*;
    let mut s = vec![
        spec("ingest", Stage::TextParsing, &[], &[a]),
        spec("sketch", Stage::PreparationOfO, &[], &[SKETCH]),
        spec("power_y0", Stage::SketchProduct, &[a, SKETCH], &[Y]),
    ];
    for t in 1..=q {
        s.push(spec(format!("power_z{t}"), Stage::SketchProduct, &[a, Y], &[Z]));
        s.push(spec(format!("power_y{t}"), Stage::SketchProduct, &[a, Z], &[Y]));
    }
    s.push(spec("qr_y", Stage::Orthogonalization, &[Y], &[Y_REFLECTORS, Y_FACTORS]));
    s.push(spec("form_q", Stage::Orthogonalization, &[Y_REFLECTORS, Y_FACTORS], &[Q]));
    let mut basis = Q;
    if gram_path {
        for t in 1..=q {
            s.push(spec(format!("gram_z{t}"), Stage::ProjectionProduct, &[a, basis], &[Z]));
            s.push(spec(format!("gram_x{t}"), Stage::ProjectionProduct, &[a, Z], &[Y]));
            basis = Y;
        }
    }
    s.push(spec("project", Stage::ProjectionProduct, &[a, basis], &[BT]));
    s.push(spec("qr_bt", Stage::Svd0Preparation, &[BT], &[B_REFLECTORS, B_FACTORS]));
    s.push(spec("svd_small", Stage::Svd0, &[B_FACTORS], &[U_SMALL, SIGMA, V_SMALL]));
    s.push(spec("form_u", Stage::Postprocessing, &[Q, U_SMALL], &[U]));
    s.push(spec("form_v", Stage::Postprocessing, &[B_REFLECTORS, B_FACTORS, V_SMALL], &[V]));
    s
}

/// Index of the last step that reads `id`.
pub fn last_use(steps: &[StepSpec], id: MatrixId) -> Option<usize> {
    steps.iter().rposition(|s| s.inputs.contains(&id))
}

/// The auto-q stopping rule on the sequence of `log2` average norms
/// `log2_nu[0..=q]` (true scale).
///
/// Stops at `q_max`, or for `q >= 1` when the norm has fallen below `tau`
/// times its initial value, or when successive ratios
/// `rho_q = nu_q / nu_{q-1}` (with `rho_0 = 1`) agree to within 1%.
pub fn should_stop(log2_nu: &[f64], tau: f64, q_max: u32) -> bool {
    let q = log2_nu.len() - 1;
    if q >= q_max as usize {
        return true;
    }
    if q == 0 {
        return false;
    }
    if log2_nu[q] == f64::NEG_INFINITY {
        return true;
    }
    if log2_nu[q] < tau.log2() + log2_nu[0] {
        return true;
    }
    let rho = |t: usize| if t == 0 { 1.0 } else { (log2_nu[t] - log2_nu[t - 1]).exp2() };
    let (now, before) = (rho(q), rho(q - 1));
    (now - before).abs() <= 0.01 * now
}

/// First step to execute when resuming, given the done prefix `records`
/// (whose step ids are `0..records.len()`).
///
/// Buffers are reused, so a step after the prefix may have been partly
/// redone before the interruption. The prefix is shortened until every
/// matrix a remaining step reads is intact and was not overwritten since
/// its writer finished.
pub fn resume_point(steps: &[StepSpec], records: &[StepRecord], ws: &Workspace) -> usize {
    let mut s = records.len().min(steps.len());
    'scan: loop {
        for t in s..steps.len() {
            for &x in &steps[t].inputs {
                let w = match (0..t).rev().find(|&u| steps[u].outputs.contains(&x)) {
                    Some(w) if w < s => w,
                    _ => continue,
                };
                let overwritten = (s..steps.len().min(records.len() + 1)).any(|u| steps[u].outputs.contains(&x));
                let intact = || {
                    records[w]
                        .outputs
                        .iter()
                        .filter(|b| b.matrix == x)
                        .all(|b| ws.store().verify_block(b).is_ok())
                        && ws.root().join(matrix_record_name(x)).is_file()
                };
                if overwritten || !intact() {
                    s = w;
                    continue 'scan;
                }
            }
        }
        return s;
    }
}
