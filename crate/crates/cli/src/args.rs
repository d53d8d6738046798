use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oocsvd::planner::MemoryBudget;
use oocsvd::precision::Precision;
use oocsvd::rsvd::{PowerMode, DEFAULT_Q_MAX};

use crate::bytes::parse_bytes;

#[derive(Debug, Parser)]
#[command(name = "oocsvd", version, about = "Randomized SVD of matrices larger than memory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomized rank-r SVD of a Matrix Market file.
    Rsvd(RsvdArgs),
    /// Full thin SVD of a Matrix Market file.
    Svd(SvdArgs),
    /// Rank-r approximation of a binary (P5) greyscale image.
    CompressImage(ImageArgs),
    /// Finish the job left in a work directory.
    Resume(ResumeArgs),
    /// Shape, density and a suggested partition of a Matrix Market file.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Half,
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Half => Precision::Half,
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

fn parse_power(s: &str) -> Result<PowerMode, String> {
    let mode: PowerMode = s.parse().map_err(|e: oocsvd::Error| e.to_string())?;
    match mode {
        PowerMode::Fixed(q) if q > DEFAULT_Q_MAX => Err(format!("power must be `auto` or 0..={DEFAULT_Q_MAX}")),
        m => Ok(m),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct BudgetArgs {
    /// Resident bytes allowed per matrix (K/M/G suffixes are powers of 1024).
    #[arg(long, value_name = "BYTES", value_parser = parse_bytes)]
    pub memory_per_matrix: Option<u64>,
    /// Resident bytes allowed per intermediate matrix.
    #[arg(long, value_name = "BYTES", value_parser = parse_bytes)]
    pub memory_new: Option<u64>,
    /// Resident bytes allowed across all matrices.
    #[arg(long, value_name = "BYTES", value_parser = parse_bytes)]
    pub memory_global: Option<u64>,
}

impl BudgetArgs {
    pub fn budget(&self) -> MemoryBudget {
        MemoryBudget {
            per_matrix: self.memory_per_matrix,
            new_matrix: self.memory_new,
            global: self.memory_global,
        }
    }
}

/// Options shared by every command that runs a factorization.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Worker threads [default: all cores].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Directory for blocks and the checkpoint plan.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Where to write the per-stage profile.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Abort the process once this many steps have completed.
    #[arg(long, hide = true)]
    pub abort_after_step: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct FactorArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rank: u32,
    /// Power iterations: `auto` or a fixed count.
    #[arg(long, default_value = "auto", value_parser = parse_power)]
    pub power: PowerMode,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RsvdArgs {
    /// Matrix Market input.
    pub input: PathBuf,
    /// Output directory for U.blk, S.blk, V.blk and S.txt.
    pub outdir: PathBuf,
    #[command(flatten)]
    pub factor: FactorArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SvdArgs {
    pub input: PathBuf,
    pub outdir: PathBuf,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// P5 greyscale image.
    pub input: PathBuf,
    /// Reconstructed image.
    pub output: PathBuf,
    #[command(flatten)]
    pub factor: FactorArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    pub workdir: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Overrides the profile path recorded with the job.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub abort_after_step: Option<u32>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Storage precision assumed for byte estimates.
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::error::ErrorKind;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("oocsvd").chain(args.iter().copied()))
    }

    #[test]
    fn full_rsvd_invocation() {
        let cli = parse(&[
            "rsvd", "--rank", "10", "--power", "3", "--memory-per-matrix", "1M", "--memory-global", "4G", "--seed", "7",
            "--precision", "half", "--threads", "2", "in.mtx", "out",
        ])
        .unwrap();
        let Command::Rsvd(a) = cli.command else { panic!() };
        assert_eq!(a.factor.rank, 10);
        assert_eq!(a.factor.power, PowerMode::Fixed(3));
        assert_eq!(a.factor.precision, PrecisionArg::Half);
        assert_eq!(a.run.budget.budget(), MemoryBudget { per_matrix: Some(1 << 20), new_matrix: None, global: Some(4 << 30) });
        assert_eq!(a.run.threads, Some(2));
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        for args in [
            &["rsvd", "--rank", "0", "a", "b"][..],
            &["rsvd", "--rank", "2", "--power", "6", "a", "b"],
            &["rsvd", "--rank", "2", "--power", "often", "a", "b"],
            &["rsvd", "--rank", "2", "--memory-per-matrix", "1Q", "a", "b"],
            &["rsvd", "--rank", "2", "--precision", "quad", "a", "b"],
            &["rsvd", "--rank", "2", "--threads", "0", "a", "b"],
            &["rsvd", "a", "b"],
            &["resume"],
            &["frobnicate"],
        ] {
            let err = parse(args).unwrap_err();
            assert_ne!(err.kind(), ErrorKind::DisplayHelp, "{args:?}");
            assert_eq!(err.exit_code(), 2, "{args:?}");
        }
    }

    #[test]
    fn abort_flag_is_hidden() {
        let help = parse(&["rsvd", "--help"]).unwrap_err().to_string();
        assert!(help.contains("--memory-per-matrix"));
        assert!(!help.contains("abort-after-step"));
    }
}
