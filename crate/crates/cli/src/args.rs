use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use samdiag_core::experiments::HeatmapMethod;

#[derive(Debug, Parser)]
#[command(name = "samdiag", version, about = "SAM implicit-bias experiments on diagonal linear networks")]
pub struct Cli {
    /// Read `key = value` defaults for the subcommand from FILE; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Dominant-index grid over (alpha, t).
    #[command(args_override_self = true)]
    Heatmap(HeatmapArgs),
    /// Closed-form thresholds, alpha1 and the staircase.
    #[command(args_override_self = true)]
    Thresholds(ThresholdsArgs),
    /// Amplification lower-bound table.
    #[command(args_override_self = true)]
    Lb(LbArgs),
    /// Regime of a balanced initialization with its certificate.
    #[command(args_override_self = true)]
    Regime(RegimeArgs),
    /// Exact l1 / l2 hard-margin solutions.
    #[command(args_override_self = true)]
    Maxmargin(MaxmarginArgs),
    /// Run the built-in invariant checks.
    #[command(args_override_self = true)]
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gd,
    SamL2,
    SamLinf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Flow {
    Discrete,
    Original,
    Rescaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Balanced,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Norm {
    L1,
    L2,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct MuRho {
    /// Feature vector, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "4,5,6,7,8")]
    pub mu: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub mr: MuRho,
    /// `onepoint:MU`, `twocluster:MU:SIGMA:N` or a CSV path; defaults to the
    /// single point `--mu`.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, value_enum, default_value_t = Method::SamL2)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Flow::Rescaled)]
    pub flow: Flow,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 6.0)]
    pub t_max: f64,
    /// Scalar initialization scale.
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// Per-coordinate scale, in the order given to `--mu`.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub alpha_vec: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Init::Balanced)]
    pub init: Init,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record every N-th step.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub collapse_threshold: f64,
    #[arg(long, default_value_t = 1e12)]
    pub blowup_threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub mr: MuRho,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value = "l2-rescaled", value_parser = parse_heatmap_method)]
    pub method: HeatmapMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 47)]
    pub alpha_steps: usize,
    #[arg(long, default_value_t = 6.0)]
    pub t_max: f64,
    /// Uniform grid points on (0, t_max]; at t = 0 a balanced start has
    /// no dominant coordinate.
    #[arg(long, default_value_t = 61)]
    pub t_steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub collapse_threshold: f64,
    #[arg(long, default_value_t = 1e12)]
    pub blowup_threshold: f64,
    /// Skip the numeric alpha1 search.
    #[arg(long)]
    pub no_alpha1: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes PREFIX.csv and PREFIX.json.
    #[arg(long, default_value = "heatmap")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    #[command(flatten)]
    pub mr: MuRho,
    #[arg(long)]
    pub no_alpha1: bool,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct LbArgs {
    #[command(flatten)]
    pub mr: MuRho,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// Lower end of the alpha window; defaults to the numeric alpha1.
    #[arg(long)]
    pub alpha_lo: Option<f64>,
    /// Write the table as CSV instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub mr: MuRho,
    #[arg(long)]
    pub alpha: f64,
    /// Use this alpha1 instead of searching for it.
    #[arg(long)]
    pub alpha1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MaxmarginArgs {
    /// `onepoint:MU`, `twocluster:MU:SIGMA:N` or a CSV path.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = Norm::Both)]
    pub norm: Norm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_heatmap_method(s: &str) -> Result<HeatmapMethod, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = HeatmapMethod::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}
