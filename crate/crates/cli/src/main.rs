mod state;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hamlet_core::frontend::{parse_query, render, QueryType, Report};
use hamlet_core::holarchy::{export_dot, EntityKind, HolonId};
use hamlet_core::ml::DataSource;
use hamlet_core::protocol::Config;
use hamlet_core::runtime::{TraceLevel, TraceLine};
use hamlet_core::scenario::{Scenario, ScenarioError};
use hamlet_core::session::{ResourceFile, Session, SessionError};
use hamlet_core::system::{Executor, Options, System};

use state::{Entry, State};

#[derive(Parser)]
#[command(name = "hamlet", version, about = "Grow and query a holarchy of algorithms, datasets and trained models")]
struct Cli {
    /// State directory holding the config and the command journal.
    #[arg(long, env = "HAMLET_STATE", default_value = ".hamlet", global = true)]
    state: PathBuf,
    /// Report directory.
    #[arg(long, env = "HAMLET_OUT", default_value = "out", global = true)]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded scheduler, no wall-clock timings.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Write every message of this invocation as JSON lines.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Ask every child during placement instead of stopping at the first winner.
    #[arg(long, global = true)]
    strict_cfp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a fresh holarchy, optionally from a config file.
    #[command(alias = "bootstrap")]
    Init { config: Option<PathBuf> },
    /// Insert an algorithm from a resource file.
    AddAlg { file: PathBuf },
    /// Insert a dataset from a resource file.
    AddData { file: PathBuf },
    /// Run a training or test query file and write its reports.
    Query { file: PathBuf },
    /// Replay a scenario on a fresh system; state is left alone.
    Run { scenario: PathBuf },
    /// Print the current holarchy.
    Export {
        format: ExportFormat,
        #[arg(long)]
        no_models: bool,
        /// Subtree root: SYS, ALG, DATA or a holon id.
        #[arg(long, default_value = "SYS")]
        root: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    pub fn config(message: impl Into<String>) -> Fail {
        Fail { code: 2, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Fail {
        Fail { code: 3, message: message.into() }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ScenarioError> for Fail {
    fn from(e: ScenarioError) -> Fail {
        Fail { code: e.kind.exit_code() as u8, message: e.to_string() }
    }
}

impl From<SessionError> for Fail {
    fn from(e: SessionError) -> Fail {
        ScenarioError::from(e).into()
    }
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Fail {
        Fail { code: 1, message: format!("{e:#}") }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Fail {
        Fail { code: 1, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hamlet: {f}");
            ExitCode::from(f.code)
        }
    }
}

impl Cli {
    fn apply(&self, config: &mut Config) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(a) = self.alpha {
            config.similarity.alpha = a;
        }
        if let Some(b) = self.beta {
            config.similarity.beta = b;
        }
        config.strict_cfp |= self.strict_cfp;
    }

    fn options(&self, mut config: Config, deterministic: bool) -> Options {
        self.apply(&mut config);
        config.timing = !deterministic;
        let mut opts = Options::deterministic(config);
        if !deterministic {
            let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2);
            opts.executor = Executor::Threaded(n);
        }
        if self.trace.is_some() {
            opts.trace = TraceLevel::Full;
        }
        opts
    }
}

fn execute(cli: &Cli) -> Result<(), Fail> {
    let state = State::new(&cli.state);
    match &cli.command {
        Command::Init { config } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Fail::config(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Fail::config(format!("{}: {e}", p.display())))?
                }
                None => Config::default(),
            };
            cli.apply(&mut cfg);
            // Rejects bad similarity weights before anything is written.
            System::new(Options::deterministic(cfg.clone()), hamlet_core::catalog::registry()).map_err(SessionError::from)?;
            state.reset(&cfg)?;
            println!("initialized {}", cli.state.display());
            Ok(())
        }
        Command::Run { scenario } => {
            let s = Scenario::load(scenario)?;
            let mut config = s.config.clone().unwrap_or_default();
            config.seed = s.seed;
            let opts = cli.options(config, s.deterministic || cli.deterministic);
            let base = scenario.parent().unwrap_or(Path::new("."));
            let mut run = s.run(opts, base)?;
            for r in &run.reports {
                write_report(r, &cli.out)?;
            }
            write_trace(cli, run.session.system_mut().take_log())?;
            println!("{}: {} steps, {} reports", scenario.display(), s.steps.len(), run.reports.len());
            Ok(())
        }
        command => {
            let mut session = open(cli, &state)?;
            let result = stateful(cli, &state, &mut session, command);
            write_trace(cli, session.system_mut().take_log())?;
            result
        }
    }
}

fn open(cli: &Cli, state: &State) -> Result<Session, Fail> {
    let opts = cli.options(state.config()?, cli.deterministic);
    let seed = opts.config.seed;
    let sys = System::new(opts, hamlet_core::catalog::registry()).map_err(SessionError::from)?;
    let mut session = Session::new(sys, seed);
    state.replay(&mut session)?;
    Ok(session)
}

fn stateful(cli: &Cli, state: &State, session: &mut Session, command: &Command) -> Result<(), Fail> {
    match command {
        Command::AddAlg { file } | Command::AddData { file } => {
            let want = if matches!(command, Command::AddAlg { .. }) { EntityKind::Algorithm } else { EntityKind::Data };
            let res = resource_file(file)?;
            if res.kind != want {
                return Err(Fail::validation(format!("{}: kind is {:?}, expected {want:?}", file.display(), res.kind)));
            }
            let id = session.submit_add(None, &res)?;
            for r in session.run()? {
                for p in &r.outcome.placements {
                    println!("{id}: {} {:?}", res.name, p.1);
                }
                for w in &r.outcome.warnings {
                    eprintln!("warning: {w}");
                }
            }
            state.append(&Entry::Add(res))?;
            Ok(())
        }
        Command::Query { file } => {
            let mut text = fs::read_to_string(file).map_err(|e| Fail::config(format!("{}: {e}", file.display())))?;
            if let Ok(mut value) = serde_json::from_str::<serde_json::Value>(&text) {
                rebase_sources(&mut value, file);
                text = value.to_string();
            }
            let q = parse_query(&text, session.system().registry())
                .map_err(|d| Fail::validation(d.iter().map(|x| format!("{}: {x}", file.display())).collect::<Vec<_>>().join("\n")))?;
            session.submit_query(&q, false)?;
            let reports = session.run()?;
            for r in &reports {
                write_report(r, &cli.out)?;
            }
            if q.kind == QueryType::Train {
                state.append(&Entry::Train(text))?;
            }
            Ok(())
        }
        Command::Export { format, no_models, root, output } => {
            let root: HolonId = root.parse().map_err(Fail::validation)?;
            let h = session.system().snapshot();
            if h.get(root).is_none() {
                return Err(Fail::validation(format!("no holon {root}")));
            }
            let text = match format {
                ExportFormat::Dot => export_dot(&h, root, !no_models),
                ExportFormat::Json => h.to_json() + "\n",
            };
            match output {
                Some(p) => fs::write(p, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Init { .. } | Command::Run { .. } => unreachable!("handled without state"),
    }
}

fn resource_file(path: &Path) -> Result<ResourceFile, Fail> {
    let text = fs::read_to_string(path).map_err(|e| Fail::config(format!("{}: {e}", path.display())))?;
    let mut res: ResourceFile = serde_json::from_str(&text).map_err(|e| Fail::validation(format!("{}: {e}", path.display())))?;
    res.source = res.source.map(|s| absolute(s, path));
    Ok(res)
}

fn base_of(file: &Path) -> PathBuf {
    let dir = file.parent().unwrap_or(Path::new("."));
    std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf())
}

// CSV paths are relative to the file that names them; the journal needs
// them absolute so replays work from any directory.
fn absolute(source: DataSource, file: &Path) -> DataSource {
    match source {
        DataSource::Csv { path, descriptor } if path.is_relative() => DataSource::Csv { path: base_of(file).join(path), descriptor },
        other => other,
    }
}

fn rebase_sources(v: &mut serde_json::Value, file: &Path) {
    let Some(delta) = v.get_mut("delta").and_then(|d| d.as_array_mut()) else { return };
    for entry in delta {
        if let Some(path) = entry.pointer_mut("/source/path") {
            if let Some(p) = path.as_str().map(PathBuf::from).filter(|p| p.is_relative()) {
                *path = serde_json::Value::String(base_of(file).join(p).to_string_lossy().into_owned());
            }
        }
    }
}

fn write_report(report: &Report, out: &Path) -> Result<(), Fail> {
    for path in render::write(report, out)? {
        println!("{}", path.display());
    }
    for w in &report.outcome.warnings {
        eprintln!("warning: {}: {w}", report.outcome.query_id);
    }
    Ok(())
}

fn write_trace(cli: &Cli, lines: Vec<TraceLine>) -> Result<(), Fail> {
    let Some(path) = &cli.trace else { return Ok(()) };
    let mut text = String::new();
    for l in lines {
        text.push_str(&serde_json::to_string(&l).map_err(|e| Fail::from(anyhow::Error::from(e)))?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

