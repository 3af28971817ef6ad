use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "phasenoise", version, about = "Oscillator phase-noise models, generators and link simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase-noise PSD sweep of one or more processes.
    Psd(PsdArgs),
    /// Phase and phasor autocorrelation against lag.
    Autocorr(AutocorrArgs),
    /// Generate a discrete-time phase-noise stream.
    Gen(GenArgs),
    /// Generate a stream and compare its Welch PSD with the model.
    Validate(ValidateArgs),
    /// Discretization errors and SIR of the symbol-rate channel.
    Errors(ErrorsArgs),
    /// Monte-Carlo SIR after the matched filter against rho and roll-off.
    Sir(SirArgs),
    /// Uncoded BER against Es/N0.
    Ber(BerArgs),
    /// Fit independent processes to a measured or tabulated PSD.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Oscillator given by flags or by a JSON file holding one process or a list.
#[derive(Debug, Args)]
pub struct OscArgs {
    /// PLL 3-dB bandwidth, Hz; 0 for a free-running oscillator.
    #[arg(long, default_value_t = 0.0)]
    pub f3db: f64,
    /// Level at 100 kHz offset, dBc/Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub l100_db: Option<f64>,
    /// White floor, dBc/Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub linf_db: Option<f64>,
    /// JSON oscillator or list of oscillators.
    #[arg(long, conflicts_with_all = ["l100_db", "linf_db"])]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[command(flatten)]
    pub osc: OscArgs,
    #[arg(long, default_value_t = 1.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 1e8)]
    pub fmax: f64,
    /// Number of log-spaced frequencies.
    #[arg(long, default_value_t = 201)]
    pub n_points: usize,
    /// Evaluate at the frequencies of a `freq_hz,level_db` file instead;
    /// its levels are echoed as `input_db`.
    #[arg(long, conflicts_with_all = ["fmin", "fmax", "n_points"])]
    pub points: Option<PathBuf>,
    /// Add the 45 GHz pole/zero mask as a column.
    #[arg(long)]
    pub mask: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AutocorrArgs {
    #[command(flatten)]
    pub osc: OscArgs,
    /// Largest lag, s.
    #[arg(long, default_value_t = 0.1)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 201)]
    pub n_points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub osc: OscArgs,
    /// Sampling period, s.
    #[arg(long)]
    pub ts: f64,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the binary dump instead of CSV/JSON (requires --output).
    #[arg(long, requires = "output")]
    pub binary: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub osc: OscArgs,
    #[arg(long)]
    pub ts: f64,
    #[arg(short, long, default_value_t = 1 << 22)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Welch segment length.
    #[arg(long, default_value_t = 1 << 14)]
    pub segment: usize,
    /// Lower band edge, Hz; ten resolution bins when omitted.
    #[arg(long)]
    pub fmin: Option<f64>,
    /// Upper band edge, Hz; 0.4/ts when omitted.
    #[arg(long)]
    pub fmax: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[command(flatten)]
    pub osc: OscArgs,
    /// Symbol period, s.
    #[arg(long, required_unless_present = "sweep_rho")]
    pub ts: Option<f64>,
    /// Sweep rho directly, `lo:hi`, instead of deriving it from an oscillator.
    #[arg(long, conflicts_with_all = ["ts", "l100_db", "config"])]
    pub sweep_rho: Option<String>,
    #[arg(long, default_value_t = 41)]
    pub n_points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SirArgs {
    /// `lo:hi`, log-spaced.
    #[arg(long, default_value = "1e-5:1e-1")]
    pub sweep_rho: String,
    #[arg(long, default_value_t = 9)]
    pub n_points: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5")]
    pub rolloffs: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub n_symbols: usize,
    #[arg(long, default_value_t = 5)]
    pub osf: usize,
    /// RRC length in symbols.
    #[arg(long, default_value_t = 128)]
    pub span: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PnKind {
    None,
    /// Oversampled, applied before the matched filter.
    Ct,
    /// Symbol-rate AR model.
    Dt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstellationArg {
    Qpsk,
    Qam16,
}

#[derive(Debug, Args)]
pub struct BerArgs {
    /// Es/N0 points, dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub esn0: Vec<f64>,
    /// JSON link configuration; the flags below are ignored when given.
    #[arg(long)]
    pub link_config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "qpsk")]
    pub constellation: ConstellationArg,
    #[arg(long, default_value_t = 0.3)]
    pub rolloff: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub ts: f64,
    #[arg(long, default_value_t = 200_000)]
    pub n_symbols: usize,
    #[arg(long, value_enum, default_value = "dt")]
    pub pn: PnKind,
    #[command(flatten)]
    pub osc: OscArgs,
    #[arg(long, default_value_t = 36)]
    pub pilot_len: usize,
    #[arg(long, default_value_t = 1476)]
    pub pilot_period: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Points CSV with header `freq_hz,level_db`.
    #[arg(long, required_unless_present = "mask")]
    pub points: Option<PathBuf>,
    /// Fit the 45 GHz pole/zero mask sampled over [fmin, fmax].
    #[arg(long, conflicts_with = "points")]
    pub mask: bool,
    #[arg(long, default_value_t = 10.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 1e9)]
    pub fmax: f64,
    /// Mask samples, log-spaced.
    #[arg(long, default_value_t = 81)]
    pub n_points: usize,
    /// Number of processes.
    #[arg(short, long, default_value_t = 2)]
    pub k: usize,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// `json` gives the full fit result, `csv` one row per process.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}
