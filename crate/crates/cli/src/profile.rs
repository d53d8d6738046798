//! Flat `key<TAB>value` run report.

use std::fmt::Write as _;
use std::time::Duration;

use oocsvd::rsvd::{Stage, StageTimings};

#[derive(Debug, Clone, Default)]
pub struct ProfileReport {
    pub stages: StageTimings,
    /// Wall time of the whole factorization.
    pub total: Duration,
    pub peak_resident_bytes: u64,
    /// Peak resident bytes per matrix id.
    pub matrix_peaks: Vec<(u32, u64)>,
    /// Stored block count per named result matrix.
    pub blocks: Vec<(String, usize)>,
    /// Largest worker count chosen per kernel operation.
    pub threads: Vec<(String, usize)>,
    pub chosen_q: Option<u32>,
    pub steps_executed: usize,
    pub steps_reused: usize,
}

impl ProfileReport {
    /// Stage lines come first and use the stage names as keys; every other
    /// key is namespaced with a dot or underscore.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (stage, d) in self.stages.iter() {
            let _ = writeln!(out, "{}\t{:.9}", stage.name(), d.as_secs_f64());
        }
        let _ = writeln!(out, "total_seconds\t{:.9}", self.total.as_secs_f64());
        let _ = writeln!(out, "peak_resident_bytes\t{}", self.peak_resident_bytes);
        for (id, bytes) in &self.matrix_peaks {
            let _ = writeln!(out, "peak_bytes.{id}\t{bytes}");
        }
        for (name, n) in &self.blocks {
            let _ = writeln!(out, "blocks.{name}\t{n}");
        }
        for (op, n) in &self.threads {
            let _ = writeln!(out, "threads.{op}\t{n}");
        }
        if let Some(q) = self.chosen_q {
            let _ = writeln!(out, "power_iterations\t{q}");
        }
        let _ = writeln!(out, "steps_executed\t{}", self.steps_executed);
        let _ = writeln!(out, "steps_reused\t{}", self.steps_reused);
        out
    }
}

/// Parses rendered lines back into `(key, value)` pairs.
pub fn parse_profile(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Sum of the eight stage durations in a rendered report, in seconds.
pub fn stage_seconds(text: &str) -> Option<Vec<(String, f64)>> {
    let pairs = parse_profile(text);
    Stage::ALL
        .iter()
        .map(|s| {
            let (_, v) = pairs.iter().find(|(k, _)| k == s.name())?;
            Some((s.name().to_string(), v.parse().ok()?))
        })
        .collect()
}
