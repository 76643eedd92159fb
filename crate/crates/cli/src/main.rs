use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gapdyn::pipeline::{
    read_records, run_analyze, run_gaps, run_interpolate, run_primes, run_returns, run_synthetic_gaps,
    write_records, FailureKind, Replay, RunConfig, RunReport, Stage, StageError,
};
use gapdyn::problem::ProblemFile;
use gapdyn::reduction::ProblemInstance;
use gapdyn::report::summary;

#[derive(Parser, Debug)]
#[command(name = "gapdyn", version, about = "Return sets, avoidance certificates and gap reports for polynomial orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bad primes and per-prime avoidance certificates.
    Primes(Common),
    /// The full pipeline, from primes to the density report.
    Analyze(Common),
    /// Return set up to N_max, with the density report.
    Returns(Common),
    /// Build and certify the interpolant, or re-certify a replayed one.
    Interpolate(Common),
    /// Gap report from replayed or freshly computed upstream stages.
    Gaps(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Problem file (TOML). Optional for `gaps` on synthetic classes.
    file: Option<PathBuf>,
    /// Prime range as `LO..HI` or `LO,HI`.
    #[arg(long, value_parser = parse_range)]
    prime_range: Option<(u64, u64)>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long)]
    mahler_terms: Option<usize>,
    #[arg(long)]
    screen_primes: Option<usize>,
    /// Height budget in bits for exact certification of returns.
    #[arg(long)]
    exact_budget: Option<u64>,
    #[arg(long)]
    density_m: Option<u32>,
    /// Write line-delimited JSON records here (`-` for stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upstream records to replay.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s
        .split_once("..")
        .or_else(|| s.split_once(','))
        .ok_or_else(|| format!("expected LO..HI, found `{s}`"))?;
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn input_error(message: impl Into<String>) -> StageError {
    StageError::new(Stage::Input, FailureKind::InputError, message)
}

impl Common {
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, StageError> {
        if let Some(r) = self.prime_range {
            cfg.prime_range = r;
        }
        if let Some(k) = self.precision {
            cfg.precision = k;
        }
        if let Some(n) = self.n_max {
            cfg.n_max = n;
        }
        if let Some(t) = self.mahler_terms {
            cfg.mahler_terms = t;
        }
        if let Some(s) = self.screen_primes {
            cfg.screen_primes = s;
        }
        if let Some(b) = self.exact_budget {
            cfg.exact_budget = b;
        }
        if let Some(m) = self.density_m {
            cfg.density_m = m;
        }
        cfg.validate().map_err(|(f, m)| input_error(format!("--{}: {m}", f.replace('_', "-"))))?;
        Ok(cfg)
    }

    fn load(&self) -> Result<Option<(ProblemInstance, RunConfig)>, StageError> {
        let Some(path) = &self.file else {
            return Ok(None);
        };
        let pf = ProblemFile::load(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let inst = pf.instance().map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let cfg = pf.run_config().map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        Ok(Some((inst, self.apply(cfg)?)))
    }

    fn replay(&self) -> Result<Replay, StageError> {
        let Some(path) = &self.replay else {
            return Ok(Replay::default());
        };
        let f = File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let records = read_records(BufReader::new(f)).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        Ok(Replay::from_records(records))
    }
}

fn run(cmd: &Command) -> Result<RunReport, StageError> {
    let common = match cmd {
        Command::Primes(c) | Command::Analyze(c) | Command::Returns(c) | Command::Interpolate(c) | Command::Gaps(c) => c,
    };
    let loaded = common.load()?;
    let replay = common.replay()?;
    if let (Command::Gaps(_), None) = (cmd, &loaded) {
        if replay.synthetic.is_empty() {
            return Err(input_error("gaps needs a problem file or synthetic classes in --replay"));
        }
        let cfg = common.apply(RunConfig::default())?;
        return Ok(run_synthetic_gaps(cfg, replay.synthetic));
    }
    let (inst, cfg) = loaded.ok_or_else(|| input_error("missing problem file"))?;
    Ok(match cmd {
        Command::Primes(_) => run_primes(&inst, cfg),
        Command::Analyze(_) => run_analyze(&inst, cfg),
        Command::Returns(_) => run_returns(&inst, cfg),
        Command::Interpolate(_) => run_interpolate(&inst, cfg, &replay),
        Command::Gaps(_) if !replay.synthetic.is_empty() && replay.returns.is_none() => {
            run_synthetic_gaps(cfg, replay.synthetic)
        }
        Command::Gaps(_) => run_gaps(&inst, cfg, &replay),
    })
}

fn emit(report: &RunReport, out: Option<&Path>) -> io::Result<()> {
    let records = report.records();
    match out {
        Some(p) if p == Path::new("-") => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_records(&mut w, &records)?;
            eprint!("{}", summary(report));
        }
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_records(&mut w, &records)?;
            w.flush()?;
            print!("{}", summary(report));
        }
        None => print!("{}", summary(report)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Primes(c) | Command::Analyze(c) | Command::Returns(c) | Command::Interpolate(c) | Command::Gaps(c) => {
            c.out.clone()
        }
    };
    let report = match run(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = emit(&report, out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(FailureKind::InputError.exit_code() as u8);
    }
    if let Some(f) = &report.failure {
        eprintln!("error: {f}");
    }
    ExitCode::from(report.exit_code() as u8)
}
