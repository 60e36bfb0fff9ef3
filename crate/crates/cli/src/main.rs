use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use winprob::data::{embedded_epds, read_wide_csv_from, CsvOptions, EPDS_LISTING};
use winprob::estimators::{convert_effects, LandmarkVariance};
use winprob::report::input_digest;
use winprob::sim::{format_reports, run_study_methods, threads_from_env, Mechanism, Scenario, StudyConfig, Trajectory};
use winprob::{analyze, write_result, Direction, Error, EstimatorOptions, Method, OutputFormat};

#[derive(Parser)]
#[command(name = "winprob", version, about = "Landmark win probability for longitudinal two-arm trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the landmark win probability from a wide CSV file or the built-in dataset.
    Analyze(AnalyzeArgs),
    /// Run the Monte Carlo study for one scenario.
    Simulate(SimulateArgs),
    /// Convert a win probability to net benefit, win odds and SMD.
    Convert {
        #[arg(long)]
        theta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gpc,
    Cca,
    Mmrm,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Gpc => vec![Method::Gpc],
            MethodArg::Cca => vec![Method::Cca],
            MethodArg::Mmrm => vec![Method::Mmrm],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Higher,
    Lower,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Higher => Direction::Higher,
            DirectionArg::Lower => Direction::Lower,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Table => OutputFormat::Table,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Epds,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceArg {
    GroupReml,
    Sandwich,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    None,
    Mcar,
    Mar,
    Mnar,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    /// Which scores win; the built-in dataset defaults to lower.
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    no_baseline_covariate: bool,
    /// Variance model of the GPC and CCA regressions.
    #[arg(long, value_enum, default_value = "group-reml")]
    landmark_variance: VarianceArg,
    #[arg(long, value_enum, default_value = "table")]
    output: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long, default_value = "trt")]
    arm_column: String,
    #[arg(long, default_value = "y0")]
    baseline_column: String,
    /// Comma-separated follow-up columns in visit order (default: all other columns).
    #[arg(long, value_delimiter = ',')]
    outcome_columns: Option<Vec<String>>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    trajectory: u8,
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    /// Trigger combination for mar/mnar.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    case: Option<u8>,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    n0: usize,
    #[arg(long, default_value_t = 50)]
    n1: usize,
    #[arg(long, value_enum, default_value = "table")]
    output: FormatArg,
    /// Worker threads (default: WINPROB_THREADS, 0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run_analyze(a: AnalyzeArgs) -> Result<(), Error> {
    let (data, digest) = match (&a.input, a.builtin) {
        (_, Some(Builtin::Epds)) => {
            let mut d = embedded_epds();
            if let Some(dir) = a.direction {
                d = d.with_direction(dir.into());
            }
            (d, input_digest(EPDS_LISTING.as_bytes()))
        }
        (Some(path), None) => {
            let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let opts = CsvOptions {
                id_column: a.id_column.clone(),
                arm_column: a.arm_column.clone(),
                baseline_column: a.baseline_column.clone(),
                outcome_columns: a.outcome_columns.clone(),
                direction: a.direction.map(Into::into).unwrap_or_default(),
                ..CsvOptions::default()
            };
            (read_wide_csv_from(bytes.as_slice(), &opts)?, input_digest(&bytes))
        }
        (None, None) => return Err(Error::Config("either --input or --builtin is required".into())),
    };
    let options = EstimatorOptions::default()
        .with_alpha(a.alpha)
        .with_baseline_covariate(!a.no_baseline_covariate)
        .with_landmark_variance(match a.landmark_variance {
            VarianceArg::GroupReml => LandmarkVariance::GroupReml,
            VarianceArg::Sandwich => LandmarkVariance::Sandwich,
        });
    let results = a
        .method
        .methods()
        .into_iter()
        .map(|m| analyze(&data, m, &options, &digest))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &results {
        for w in &r.warnings {
            log::warn!("{}: {w}", r.method);
        }
    }
    emit(&write_result(&results, a.output.into())?, a.out.as_ref())
}

fn run_simulate(s: SimulateArgs) -> Result<(), Error> {
    let mechanism = match s.mechanism {
        MechanismArg::None => Mechanism::None,
        MechanismArg::Mcar => Mechanism::Mcar,
        MechanismArg::Mar => Mechanism::Mar,
        MechanismArg::Mnar => Mechanism::Mnar,
    };
    let trajectory = Trajectory::from_number(s.trajectory).ok_or_else(|| Error::Config("trajectory must be 1 to 4".into()))?;
    let scenario = Scenario::new(trajectory, mechanism, s.case, [s.n0, s.n1])?;
    let mut config = StudyConfig::new(s.reps, s.seed);
    config.threads = s.threads.unwrap_or_else(threads_from_env);
    let reports = run_study_methods(&scenario, &s.method.methods(), &config)?;
    for r in &reports {
        if r.n_failed > 0 {
            log::warn!("{}: {} replicate(s) failed and were excluded", r.method, r.n_failed);
        }
        if r.n_degenerate > 0 {
            log::warn!("{}: {} replicate(s) had no usable interval", r.method, r.n_degenerate);
        }
    }
    let text = match s.output {
        FormatArg::Table => format_reports(&reports),
        FormatArg::Json => {
            let mut t = serde_json::to_string_pretty(&reports).map_err(|e| Error::Io(e.to_string()))?;
            t.push('\n');
            t
        }
    };
    emit(&text, None)
}

/// Up to four decimals with trailing zeros removed.
fn compact(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn run_convert(theta: f64) -> Result<(), Error> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!("--theta must lie strictly between 0 and 1, got {theta}")));
    }
    let c = convert_effects(theta)?;
    emit(
        &format!(
            "NB={} WO={} SMD={}\n",
            compact(c.net_benefit),
            compact(c.win_odds),
            compact(c.smd_equivalent)
        ),
        None,
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Simulate(s) => run_simulate(s),
        Command::Convert { theta } => run_convert(theta),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
