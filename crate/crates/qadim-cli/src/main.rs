use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qadim::analysis::{self, AnalysisConfig, Bundle, Command, Format, Subject};
use qadim::field::{parse_decimal, Rational};
use qadim::presets;
use qadim::spec::{load_spec, System};

const EXIT_INPUT: u8 = 1;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "qadim", version, about = "Exact net-interval analysis of self-similar measures on [0,1]")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Every module: net tree, finite type, separation, dimensions, H(δ), checks
    Analyze(Opts),
    /// Net intervals level by level
    NetTree(Opts),
    /// Gap sequence a_n, envelope f(n), g(n) and the AWSC bound
    Separation(Opts),
    /// Characteristic vectors and the transition graph
    FiniteType(Opts),
    /// Endpoint and local dimensions, Qₙ, regularity and the doubling ledger
    Dims(Opts),
    /// H(δ) lower estimates from witness triples
    Hdelta(Opts),
    /// Internal consistency checks
    Checks(Opts),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Opts {
    /// Built-in system
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec", value_parser = clap::builder::PossibleValuesParser::new(presets::NAMES))]
    preset: Option<String>,
    /// JSON system file (exact string literals only)
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 2_000_000)]
    word_budget: usize,
    #[arg(long, default_value_t = 100_000)]
    state_budget: usize,
    #[arg(long, default_value_t = 100_000)]
    window_budget: usize,
    /// Quasi-doubling grid, each > 1 (comma separated; decimals or p/q)
    #[arg(long, value_delimiter = ',', default_value = "1.05,1.1,1.2,2", value_parser = parse_decimal)]
    q: Vec<Rational>,
    /// Gap exponents δ > 0 (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "0.5,1", value_parser = parse_decimal)]
    delta: Vec<Rational>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Directory for the report bundle; without it the summary goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random witness points
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the transition graph JSON here (finite-type)
    #[arg(long)]
    emit: Option<PathBuf>,
}

impl Cmd {
    fn split(&self) -> (Command, &Opts) {
        match self {
            Cmd::Analyze(o) => (Command::Analyze, o),
            Cmd::NetTree(o) => (Command::NetTree, o),
            Cmd::Separation(o) => (Command::Separation, o),
            Cmd::FiniteType(o) => (Command::FiniteType, o),
            Cmd::Dims(o) => (Command::Dims, o),
            Cmd::Hdelta(o) => (Command::HDelta, o),
            Cmd::Checks(o) => (Command::Checks, o),
        }
    }
}

fn number_arg(q: &Rational) -> String {
    let l = analysis::q_label(q);
    if l.contains('_') {
        q.to_string()
    } else {
        l
    }
}

/// The full command line that reproduces this run, defaults spelled out.
fn repro(cmd: Command, o: &Opts) -> String {
    let input = match (&o.preset, &o.spec) {
        (Some(p), _) => format!("--preset {p}"),
        (None, Some(s)) => format!("--spec {}", s.display()),
        (None, None) => unreachable!("clap requires one input"),
    };
    let list = |v: &[Rational]| v.iter().map(number_arg).collect::<Vec<_>>().join(",");
    let format = match o.format {
        FormatArg::Csv => "csv",
        FormatArg::Json => "json",
    };
    format!(
        "qadim {} {input} --depth {} --word-budget {} --state-budget {} --window-budget {} --q {} --delta {} --format {format} --seed {}",
        cmd.name(),
        o.depth,
        o.word_budget,
        o.state_budget,
        o.window_budget,
        list(&o.q),
        list(&o.delta),
        o.seed
    )
}

fn write_bundle(dir: &Path, bundle: &Bundle) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in &bundle.files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, o) = cli.command.split();
    let cfg = AnalysisConfig {
        depth: o.depth,
        word_budget: o.word_budget,
        state_budget: o.state_budget,
        window_budget: o.window_budget,
        q_grid: o.q.clone(),
        deltas: o.delta.clone(),
        format: match o.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        seed: o.seed,
        ..AnalysisConfig::default()
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error[cli-report]: {e}\n  reproduce: {}", repro(cmd, o));
        return ExitCode::from(EXIT_INPUT);
    }
    let (system, name, is_preset): (System, String, bool) = match (&o.preset, &o.spec) {
        (Some(p), _) => (presets::by_name(p).expect("clap checked the preset name"), p.clone(), true),
        (None, Some(path)) => match load_spec(path) {
            Ok(s) => (s, path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), false),
            Err(e) => {
                eprintln!("error[cli-report]: {e}\n  reproduce: {}", repro(cmd, o));
                return ExitCode::from(EXIT_INPUT);
            }
        },
        (None, None) => unreachable!("clap requires one input"),
    };
    let bundle = analysis::run(cmd, &Subject { name: &name, is_preset, system: &system }, &cfg);

    match &o.out {
        Some(dir) => {
            if let Err(e) = write_bundle(dir, &bundle) {
                eprintln!("error[cli-report]: cannot write {}: {e}", dir.display());
                return ExitCode::from(EXIT_INPUT);
            }
        }
        None => print!("{}", bundle.files[&format!("{}.json", cmd.name())]),
    }
    let mut failed = bundle.is_partial();
    if let Some(path) = &o.emit {
        match bundle.files.get("graph.json") {
            Some(g) => {
                if let Err(e) = fs::write(path, g) {
                    eprintln!("error[cli-report]: cannot write {}: {e}", path.display());
                    return ExitCode::from(EXIT_INPUT);
                }
            }
            None => {
                eprintln!("error[finite-type]: no transition graph to emit (not closed within {} levels)\n  reproduce: {}", analysis::FINITE_TYPE_LEVELS, repro(cmd, o));
                failed = true;
            }
        }
    }
    for f in &bundle.failures {
        eprintln!("error[{}]: {}\n  reproduce: {}", f.module, f.message, repro(cmd, o));
    }
    if failed {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}
