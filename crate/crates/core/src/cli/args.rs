use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Gaussian-mixture posterior surrogates from multistart optimization and
/// Laplace approximations.
#[derive(Debug, Parser)]
#[command(name = "gola", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `gola-out`).
    #[arg(long, global = true, env = "GOLA_OUT_DIR", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Reference mixture JSON for JSD traces, or `target` to use the
    /// target's own normalized density when it has one.
    #[arg(long, global = true, value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to a target.
    Fit {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        gola: GolaArgs,
    },
    /// Variational refinement from a mixture, a cold start, or a fresh fit.
    Refine {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        gola: GolaArgs,
        /// Initial mixture JSON.
        #[arg(long, value_name = "PATH")]
        init: Option<PathBuf>,
        /// Random initialization with this many components.
        #[arg(long, value_name = "K")]
        cold_start: Option<usize>,
        /// Maximum number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Adam learning rate.
        #[arg(long)]
        step_size: Option<f64>,
        /// Monte Carlo samples per gradient estimate.
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Normalized JSD between two mixture files.
    Eval {
        /// First mixture JSON.
        p: PathBuf,
        /// Second mixture JSON.
        q: PathBuf,
        /// Draws per half of the estimate.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Score fits on random test mixtures.
    Robustness {
        /// `table1` or `table2`.
        #[arg(long)]
        table: Option<String>,
        /// Number of random test mixtures.
        #[arg(long)]
        cases: Option<usize>,
        /// Cap on the dimension factor.
        #[arg(long)]
        max_dim: Option<i64>,
        /// Draws per half of each JSD estimate.
        #[arg(long)]
        jsd_samples: Option<usize>,
    },
    /// Sensitivity indices of the fit score with respect to the mixture factors.
    Sensitivity {
        /// `table1` or `table2`.
        #[arg(long)]
        table: Option<String>,
        /// Base sample size of the design.
        #[arg(long)]
        n: Option<usize>,
        /// Bootstrap replicates.
        #[arg(long)]
        replicates: Option<usize>,
        /// Draws per half of each JSD estimate.
        #[arg(long)]
        jsd_samples: Option<usize>,
    },
    /// Shear-frame damping identification.
    Exemplar {
        /// Observation noise standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Number of synthetic observations.
        #[arg(long)]
        n_obs: Option<usize>,
        /// Seed of the observation noise.
        #[arg(long)]
        data_seed: Option<u64>,
        /// Mixture draws for the response bands.
        #[arg(long)]
        pushforward_samples: Option<usize>,
    },
    /// Write a test mixture built from the five factors.
    Generate {
        /// Sample factors from `table1` or `table2` instead of giving them.
        #[arg(long)]
        table: Option<String>,
        /// Dimension.
        #[arg(long)]
        d: Option<usize>,
        /// Number of components.
        #[arg(long = "m")]
        m: Option<usize>,
        /// Geometric weight decay factor.
        #[arg(long)]
        omega: Option<f64>,
        /// Constant correlation of every covariance.
        #[arg(long)]
        c: Option<f64>,
        /// Largest pairwise overlap.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct TargetArgs {
    /// Built-in target: gauss2d, bimodal2d, sinh_arcsinh, exemplar.
    #[arg(long)]
    pub target: Option<String>,
    /// Target given by a mixture JSON file.
    #[arg(long, value_name = "PATH", conflicts_with = "target")]
    pub mixture: Option<PathBuf>,
    /// Dimension for built-ins that take one.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Seed of randomly parameterized built-ins.
    #[arg(long)]
    pub target_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GolaArgs {
    /// Multistart count (default 32 per dimension).
    #[arg(long)]
    pub n_starts: Option<usize>,
    /// Survival threshold of the duplicate-mode test.
    #[arg(long)]
    pub dedup_threshold: Option<f64>,
    /// Sample size of the weight fit (default 1024 per component).
    #[arg(long)]
    pub weight_samples: Option<usize>,
    /// Gradient-norm tolerance of the local descents.
    #[arg(long)]
    pub gradient_tol: Option<f64>,
}
