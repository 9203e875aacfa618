use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "qre",
    version,
    about = "Logit and structural quantal response equilibria"
)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file. Defaults to `<output-dir>/<subcommand>.<csv|json>`.
    #[arg(long, short, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Directory for default output files.
    #[arg(long, global = true, env = "QRE_OUTPUT_DIR", default_value = ".")]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Output encoding; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Fixed-point residual tolerance [default: 1e-10].
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Fixed-point iteration cap [default: 100000].
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Weight on the new response per iteration [default: 0.5].
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    /// Monte Carlo sample count [default: 100000].
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Quadrature nodes per integral [default: 2048].
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Run on one thread.
    #[arg(long, global = true)]
    pub serial: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GameArgs {
    /// `prism`, `paradox`, or a path to a game JSON file.
    #[arg(long, default_value = "prism")]
    pub game: String,
    /// Player 1's action count for `paradox`.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Opponents' action counts for `paradox`.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub opponents: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarginalArgs {
    /// `gumbel`, `normal` or `uniform`.
    #[arg(long, default_value = "gumbel")]
    pub marginal: String,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Logit equilibria from the uniform profile and random starts.
    SolveLogit {
        #[command(flatten)]
        game: GameArgs,
        /// One lambda per player, or a single value for all.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        lambda: Vec<f64>,
        /// Random starts in addition to the uniform one.
        #[arg(long, default_value_t = 0)]
        starts: usize,
    },
    /// Follow the principal logit branch from lambda = 0.
    TraceLogit {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 50.0)]
        lambda_max: f64,
        /// Per-player direction of the ray; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        direction: Option<Vec<f64>>,
        /// Fail (exit 1) if any point has sigma_1(a_{K-1}) > 1/K + 1e-6.
        #[arg(long)]
        check_bound: bool,
    },
    /// Monte Carlo choice probabilities of `x + noise`.
    QrfMc {
        #[command(flatten)]
        marginal: MarginalArgs,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x: Vec<f64>,
    },
    /// Quadrature choice probabilities of `x + noise`.
    QrfQuad {
        #[command(flatten)]
        marginal: MarginalArgs,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x: Vec<f64>,
    },
    /// Structural equilibria by damped fixed-point iteration.
    SolveStructural {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        marginal: MarginalArgs,
        /// Family JSON file; overrides --marginal/--scale.
        #[arg(long)]
        family: Option<PathBuf>,
        /// `quadrature` or `monte-carlo`.
        #[arg(long, default_value = "quadrature")]
        method: String,
        #[arg(long, default_value_t = 0)]
        starts: usize,
    },
    /// Sampled ordinal-equivalence check of an i.i.d. response function.
    CheckMonotone {
        #[command(flatten)]
        marginal: MarginalArgs,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Enumerate the faces of one dice perturbation.
    DiceOracle {
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        base: Vec<f64>,
        /// Report probability intervals instead of failing on tied faces.
        #[arg(long)]
        intervals: bool,
    },
    /// Exhaustive dice check of P(a_{K-1}) <= 1/K over a grid.
    VerifyDiceBound {
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Grid step for both gaps d1 and d2.
        #[arg(long, default_value_t = 0.1)]
        d_step: f64,
        #[arg(long, default_value_t = 1.0)]
        d1_max: f64,
        #[arg(long, default_value_t = 2.0)]
        d2_max: f64,
        #[arg(long, default_value_t = 0.25)]
        base_step: f64,
        #[arg(long, default_value_t = 5.0)]
        base_max: f64,
        /// Use vectors `(0, d1, .., d1 + d2)` with d2 < d1 and skip the premise
        /// check (negative control).
        #[arg(long)]
        reverse_gaps: bool,
    },
    /// Quadrature check of P(a_{K-1}) <= 1/K on premise-satisfying vectors.
    Prop1Check {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "gumbel,normal,uniform")]
        marginals: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Number of grid vectors.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 1e-6)]
        bound_tol: f64,
    },
    /// Certify an equilibrium-free ball around a Nash equilibrium.
    ExclusionCertificate {
        #[command(flatten)]
        game: GameArgs,
        /// Player 1 plays (0, alpha, .., alpha, 1 - (K-2) alpha), opponents their first action.
        #[arg(long)]
        alpha: Option<f64>,
        /// Explicit profile, players separated by `;`, entries by `,`.
        #[arg(long)]
        sigma_star: Option<String>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',', default_value = "gumbel,normal,uniform")]
        marginals: Vec<String>,
        /// One scale per marginal, or a single value for all.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        starts: usize,
    },
    /// Uniform samples of profiles, classified by region.
    RegionSample {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long = "count", default_value_t = 1000)]
        count: usize,
    },
    /// Nash and payoff-monotonicity verdicts for a profile.
    NashCheck {
        #[command(flatten)]
        game: GameArgs,
        /// Players separated by `;`, entries by `,`.
        #[arg(long, allow_hyphen_values = true)]
        profile: String,
        #[arg(long, default_value_t = 1e-9)]
        tie_tol: f64,
    },
    /// Write a built-in game as JSON.
    BuildGame {
        /// `prism` or `paradox`.
        #[arg(long, default_value = "prism")]
        family: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        opponents: Vec<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveLogit { .. } => "solve-logit",
            Command::TraceLogit { .. } => "trace-logit",
            Command::QrfMc { .. } => "qrf-mc",
            Command::QrfQuad { .. } => "qrf-quad",
            Command::SolveStructural { .. } => "solve-structural",
            Command::CheckMonotone { .. } => "check-monotone",
            Command::DiceOracle { .. } => "dice-oracle",
            Command::VerifyDiceBound { .. } => "verify-dice-bound",
            Command::Prop1Check { .. } => "prop1-check",
            Command::ExclusionCertificate { .. } => "exclusion-certificate",
            Command::RegionSample { .. } => "region-sample",
            Command::NashCheck { .. } => "nash-check",
            Command::BuildGame { .. } => "build-game",
        }
    }

    /// Formats the subcommand can write; the first is the default.
    pub fn formats(&self) -> &'static [Format] {
        match self {
            Command::TraceLogit { .. }
            | Command::VerifyDiceBound { .. }
            | Command::RegionSample { .. } => &[Format::Csv, Format::Json],
            _ => &[Format::Json],
        }
    }
}
