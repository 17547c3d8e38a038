//! Command line front end for the Finsler geometry laboratory.
//!
//! Subcommands:
//! - `classify`   residual tests for the curvature class hierarchy,
//! - `tensor`     one curvature tensor at one state point,
//! - `identities` curvature identity suites over sampled points,
//! - `projective` invariance and transport laws under a projective change,
//! - `gallery`    list or export the bundled metrics.
//!
//! Exit codes: 0 on success (`classify`, `tensor`, `projective` report
//! verdicts without failing on them), 1 when an `identities` row exceeds its
//! bound, 2 on input errors (bad files, unknown names, malformed expressions,
//! violated hypotheses), 3 on numeric failures discovered while evaluating.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Format;

#[derive(Parser)]
#[command(
    name = "finsler",
    version,
    about = "Numerical laboratory for projective Finsler geometry",
    long_about = "Computes curvature tensors of Finsler metrics by truncated Taylor \
                  arithmetic, classifies metrics against a hierarchy of curvature \
                  conditions, and checks identity and projective-invariance suites."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a metric against the curvature class hierarchy.
    Classify(ClassifyArgs),
    /// Evaluate one curvature tensor at a single state point.
    Tensor(TensorArgs),
    /// Check curvature identity suites over sampled state points.
    Identities(IdentitiesArgs),
    /// Compare a spray with its projective deformation.
    Projective(ProjectiveArgs),
    /// List or export the bundled metric gallery.
    Gallery(GalleryArgs),
}

/// Where the metric comes from: a file on disk or the bundled gallery.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct MetricSource {
    /// Path to a metric definition file.
    #[arg(long, value_name = "PATH")]
    metric: Option<PathBuf>,
    /// Name of a bundled gallery metric (see `finsler gallery list`).
    #[arg(long, value_name = "NAME")]
    gallery: Option<String>,
}

/// Deterministic state sampling: `x` uniform in the metric's region, `y`
/// uniform on the unit sphere and rescaled to `F(x, y) = 1`.
#[derive(Args)]
struct SampleOpts {
    /// Number of sampled state points.
    #[arg(long, default_value_t = 10)]
    points: usize,
    /// Seed for the state sampler; equal seeds give byte-identical reports.
    #[arg(long, default_value_t = 0x00c0_ffee)]
    seed: u64,
}

#[derive(Args)]
struct OutputOpts {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Jet truncation order: a number, or `auto` for the command's default.
#[derive(Copy, Clone)]
enum OrderArg {
    Auto,
    Fixed(usize),
}

impl OrderArg {
    fn resolve(self, auto: usize) -> usize {
        match self {
            OrderArg::Auto => auto,
            OrderArg::Fixed(n) => n,
        }
    }
}

fn parse_order(s: &str) -> Result<OrderArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(OrderArg::Auto);
    }
    s.parse::<usize>()
        .map(OrderArg::Fixed)
        .map_err(|_| format!("expected a truncation order or `auto`, got `{s}`"))
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    source: MetricSource,
    #[command(flatten)]
    sample: SampleOpts,
    /// Residual tolerance for class verdicts.
    #[arg(long, default_value_t = finsler::classify::DEFAULT_TOLERANCE)]
    tol: f64,
    /// Jet truncation order (`auto` = lowest order valid for every class).
    #[arg(long, value_parser = parse_order, default_value = "auto")]
    order: OrderArg,
    #[command(flatten)]
    output: OutputOpts,
    /// Worker threads for point-level parallelism (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct TensorArgs {
    #[command(flatten)]
    source: MetricSource,
    /// Tensor to evaluate: one of fundamental, fundamental_inverse, angular,
    /// spray, nonlinear_connection, berwald, riemann, ricci, weyl, douglas,
    /// and the other symbols listed by `tensor --help`.
    #[arg(long, value_name = "TENSOR")]
    name: String,
    /// State point, written as `x=0.1,0.2,0;y=1,0.5,0.3`.
    #[arg(long, value_name = "POINT")]
    at: String,
    /// Jet truncation order (`auto` = minimum valid for the tensor).
    #[arg(long, value_parser = parse_order, default_value = "auto")]
    order: OrderArg,
    #[command(flatten)]
    output: OutputOpts,
}

/// Identity suites; `all` unions every suite that applies to the metric.
#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    /// Every suite below that applies to the metric.
    #[value(name = "all")]
    All,
    /// Exchange identity between Berwald derivatives and the Riemann tensor.
    #[value(name = "riemann_berwald")]
    RiemannBerwald,
    /// Mean Berwald curvature against the fiber Hessian of the S-curvature.
    #[value(name = "es")]
    Es,
    /// Weyl/Douglas-type exchange, two Douglas routes, traces, annihilations.
    #[value(name = "lemma_wdtheta")]
    LemmaWdtheta,
    /// Horizontal-derivative identities of a constant-length Killing form.
    #[value(name = "killing")]
    Killing,
    /// Projective transport and invariance laws with default factors.
    #[value(name = "projective")]
    Projective,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::RiemannBerwald => "riemann_berwald",
            Suite::Es => "es",
            Suite::LemmaWdtheta => "lemma_wdtheta",
            Suite::Killing => "killing",
            Suite::Projective => "projective",
        }
    }
}

#[derive(Args)]
struct IdentitiesArgs {
    #[command(flatten)]
    source: MetricSource,
    /// Identity suite to run.
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    #[command(flatten)]
    sample: SampleOpts,
    /// Jet truncation order (`auto` = high enough for every row).
    #[arg(long, value_parser = parse_order, default_value = "auto")]
    order: OrderArg,
    /// Resolution multiplier for the quadrature-based S-curvature row.
    #[arg(long, default_value_t = 1, value_name = "N")]
    quad: usize,
    #[command(flatten)]
    output: OutputOpts,
    /// Worker threads for point-level parallelism (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ProjectiveArgs {
    #[command(flatten)]
    source: MetricSource,
    /// Projective factor `P(x, y)`: `beta`, `alpha`, `F`, a scaled form such
    /// as `0.1*F`, or any 1-homogeneous expression in the state variables.
    #[arg(long, value_name = "EXPR")]
    factor: String,
    #[command(flatten)]
    sample: SampleOpts,
    /// Residual tolerance for the W-GDW verdict comparison.
    #[arg(long, default_value_t = finsler::classify::DEFAULT_TOLERANCE)]
    tol: f64,
    /// Jet truncation order (`auto` = high enough for every row).
    #[arg(long, value_parser = parse_order, default_value = "auto")]
    order: OrderArg,
    #[command(flatten)]
    output: OutputOpts,
    /// Worker threads for point-level parallelism (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct GalleryArgs {
    #[command(subcommand)]
    action: GalleryAction,
}

#[derive(Subcommand)]
enum GalleryAction {
    /// List the bundled metrics with a one-line summary each.
    List {
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Write a bundled metric definition file.
    Export {
        /// Gallery metric name.
        name: String,
        /// Write to this file instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
