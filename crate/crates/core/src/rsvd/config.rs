use std::hash::Hasher;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::precision::Precision;

/// Iteration parameter for the power scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// Pick q from the norm sequence of the running sketch.
    Auto,
    Fixed(u32),
}

impl std::str::FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(PowerMode::Auto);
        }
        s.parse::<u32>()
            .map(PowerMode::Fixed)
            .map_err(|_| Error::InvalidConfig(format!("power must be `auto` or a non-negative integer, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvdConfig {
    pub rank: usize,
    pub power: PowerMode,
    pub q_max: u32,
    /// Stop once the average norm falls below `tau` times its first value.
    pub tau: f64,
    pub seed: u64,
    /// Storage precision of the input; arithmetic runs at its work precision.
    pub precision: Precision,
    /// Extra sketch columns, dropped from the result.
    pub oversampling: usize,
    /// Factor `(A A^T)^q A` itself and take the `2q+1`-th root of its
    /// singular values.
    pub gram_path: bool,
}

pub const DEFAULT_Q_MAX: u32 = 5;
pub const DEFAULT_TAU: f64 = 1e-6;

impl RsvdConfig {
    pub fn new(rank: usize) -> Self {
        RsvdConfig {
            rank,
            power: PowerMode::Auto,
            q_max: DEFAULT_Q_MAX,
            tau: DEFAULT_TAU,
            seed: 0,
            precision: Precision::Double,
            oversampling: 0,
            gram_path: false,
        }
    }

    pub fn with_power(mut self, power: PowerMode) -> Self {
        self.power = power;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    /// Checks that do not depend on the input's shape.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be a finite non-negative number, got {}", self.tau));
        }
        if let PowerMode::Fixed(q) = self.power {
            if q > self.q_max {
                return bad(format!("power {q} exceeds q-max {}", self.q_max));
            }
        }
        Ok(())
    }

    /// Checks against an `m x n` input.
    pub fn validate_for(&self, m: usize, n: usize) -> Result<()> {
        self.validate()?;
        if self.rank > m.min(n) {
            return Err(Error::InvalidConfig(format!(
                "rank {} exceeds min(rows, cols) = {} of the {m} x {n} input",
                self.rank,
                m.min(n)
            )));
        }
        Ok(())
    }

    /// Sketch width: rank plus oversampling, capped by the input's shape.
    pub fn sketch_width(&self, m: usize, n: usize) -> usize {
        (self.rank + self.oversampling).min(m.min(n))
    }

    /// Hex digest of every setting that affects the numbers, plus the
    /// input's identity. Budget and thread count do not change results and
    /// are left out.
    pub fn digest(&self, input_identity: &str) -> String {
        #[derive(Serialize)]
        struct Fields<'a> {
            config: &'a RsvdConfig,
            input: &'a str,
        }
        let bytes = serde_json::to_vec(&Fields {
            config: self,
            input: input_identity,
        })
        .expect("config serializes");
        let mut h = XxHash64::with_seed(0);
        h.write(&bytes);
        format!("{:016x}", h.finish())
    }
}

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    TextParsing,
    PreparationOfO,
    SketchProduct,
    Orthogonalization,
    ProjectionProduct,
    Svd0Preparation,
    Svd0,
    Postprocessing,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::TextParsing,
        Stage::PreparationOfO,
        Stage::SketchProduct,
        Stage::Orthogonalization,
        Stage::ProjectionProduct,
        Stage::Svd0Preparation,
        Stage::Svd0,
        Stage::Postprocessing,
    ];

    /// Profile key.
    pub fn name(self) -> &'static str {
        match self {
            Stage::TextParsing => "Text Parsing",
            Stage::PreparationOfO => "Preparation of O",
            Stage::SketchProduct => "O*A^T",
            Stage::Orthogonalization => "Orthogonalization",
            Stage::ProjectionProduct => "A^T*Q_r",
            Stage::Svd0Preparation => "SVD0 Preparation",
            Stage::Svd0 => "SVD0",
            Stage::Postprocessing => "Postprocessing",
        }
    }
}

/// Wall-clock time spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings([Duration; 8]);

impl StageTimings {
    pub fn add(&mut self, stage: Stage, d: Duration) {
        self.0[stage as usize] += d;
    }

    pub fn get(&self, stage: Stage) -> Duration {
        self.0[stage as usize]
    }

    pub fn total(&self) -> Duration {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, Duration)> + '_ {
        Stage::ALL.iter().map(|&s| (s, self.get(s)))
    }
}
