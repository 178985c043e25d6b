use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use screenagent::config::Config;
use screenagent::pipeline::{AutoApprove, Mode, Phase, Session, SessionState};
use screenagent::score::evaluate_stores;
use screenagent::service::RunningService;
use screenagent::store::{dataset_stats, export_pairs, ExportItem, NewSession, OsTag, Store};

#[derive(Parser)]
#[command(
    name = "screenagent",
    version,
    about = "Computer-control agent runner and dataset tools"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true, env = "SCREENAGENT_CONFIG")]
    config: Option<PathBuf>,
    /// Session store root; overrides the config.
    #[arg(long, global = true, env = "SCREENAGENT_STORE")]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one autonomous session and store it.
    Run {
        /// The task prompt.
        task: String,
        #[arg(long)]
        theme: Option<String>,
    },
    /// Score a prediction store against a gold store.
    Eval {
        gold_dir: PathBuf,
        pred_dir: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write preference pairs (JSON lines) for every corrected step.
    Export {
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics as JSON.
    Stats,
    /// Start the HTTP control service.
    Serve {
        #[arg(long)]
        addr: Option<SocketAddr>,
    },
}

fn load_config(cli: &Cli) -> Result<Config, String> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if let Some(s) = &cli.store {
        c.store = s.clone();
    }
    Ok(c)
}

fn run(cli: &Cli, task: &str, theme: Option<String>) -> Result<ExitCode, String> {
    let cfg = load_config(cli)?;
    let store = Store::open(&cfg.store).map_err(|e| e.to_string())?;
    let gateway = cfg.gateway().map_err(|e| e.to_string())?;
    let templates = cfg.templates().map_err(|e| e.to_string())?;
    let mut env = cfg.env.connect().map_err(|e| e.to_string())?;
    let screen = env.screen_size();
    let mut new = NewSession::new(task, screen, Mode::Autonomous);
    new.theme = theme.or(cfg.run.theme.clone());
    new.os = OsTag::Linux;
    if let Some(l) = &cfg.run.language {
        new.language = l.clone();
    }
    let mut writer = store.create_session(new).map_err(|e| e.to_string())?;
    let log = screenagent::gateway::JsonlLog::open(writer.request_log_path())
        .map_err(|e| e.to_string())?;
    let gateway = gateway.relogged(std::sync::Arc::new(log));
    let id = writer.id().to_string();
    let state = SessionState::new(task, screen, Mode::Autonomous, cfg.run.budgets);
    let end = Session::new(state, &mut *env, &gateway, &mut writer, &templates)
        .with_gate(&AutoApprove)
        .run();
    println!("{id} {}", end.phase);
    if let Some(f) = &end.failure {
        eprintln!("failure: {f}");
    }
    Ok(if end.phase == Phase::Done {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { task, theme } => run(&cli, task, theme.clone()),
        Command::Eval {
            gold_dir,
            pred_dir,
            json,
        } => (|| {
            let gold = Store::open(gold_dir).map_err(|e| e.to_string())?;
            let pred = Store::open(pred_dir).map_err(|e| e.to_string())?;
            let r = evaluate_stores(&gold, &pred).map_err(|e| e.to_string())?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&r).unwrap());
            } else {
                print!("{}", r.report.to_table());
                for s in &r.missing_sessions {
                    eprintln!("missing prediction session {s}");
                }
                for s in &r.missing_steps {
                    eprintln!("missing prediction step {s}");
                }
            }
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Export { out } => (|| {
            let cfg = load_config(&cli)?;
            let store = Store::open(&cfg.store).map_err(|e| e.to_string())?;
            let items = export_pairs(&store).map_err(|e| e.to_string())?;
            let mut w: Box<dyn Write> = match out {
                Some(p) => Box::new(std::fs::File::create(p).map_err(|e| e.to_string())?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut pairs = 0;
            for item in &items {
                match item {
                    ExportItem::Pair(p) => {
                        pairs += 1;
                        writeln!(w, "{}", serde_json::to_string(p).unwrap())
                            .map_err(|e| e.to_string())?;
                    }
                    ExportItem::Skipped { .. } => {
                        eprintln!("skipped: {}", serde_json::to_string(item).unwrap())
                    }
                }
            }
            eprintln!("{pairs} pairs");
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Stats => (|| {
            let cfg = load_config(&cli)?;
            let store = Store::open(&cfg.store).map_err(|e| e.to_string())?;
            let st = dataset_stats(&store).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&st).unwrap());
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Serve { addr } => (|| {
            let cfg = load_config(&cli)?;
            let addr = match addr {
                Some(a) => *a,
                None => cfg
                    .serve
                    .addr
                    .parse()
                    .map_err(|e| format!("bad serve.addr: {e}"))?,
            };
            let svc = RunningService::start(cfg.service().map_err(|e| e.to_string())?, addr)
                .map_err(|e| e.to_string())?;
            eprintln!("listening on http://{}", svc.addr);
            loop {
                std::thread::park();
            }
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
