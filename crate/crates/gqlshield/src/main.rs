use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gqlshield::bench::{self, BenchOptions};
use gqlshield::logger::{BatchLogger, DEFAULT_BATCH, DEFAULT_INTERVAL};
use gqlshield::service::{self, AppState};
use gqlshield::setup::{self, EngineSources};
use gqlshield_core::config::{heuristic_generate, llm_generate, HttpLlmClient, RuleSet};
use gqlshield_core::engine::{analyze, AnalysisRequest, Decision};

#[derive(Parser)]
#[command(name = "gqlshield", version, about = "GraphQL query firewall: static DoS checks, SSRF and ML payload detection")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze one query; exit 0 allow, 2 block, 1 error.
    Analyze(AnalyzeArgs),
    /// Generate or validate a security config.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Run the HTTP analysis service.
    Serve(ServeArgs),
    /// Load-test a running service.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Query file, or `-` for stdin.
    #[arg(long)]
    query: String,
    /// JSON object of variable values.
    #[arg(long)]
    variables: Option<PathBuf>,
    #[arg(long)]
    operation_name: Option<String>,
    /// Directory with the detector bundles; read only when an ML check is enabled.
    #[arg(long, default_value = setup::DEFAULT_MODELS_DIR)]
    models: PathBuf,
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Derive a config from a schema, heuristically or through an LLM.
    Generate {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, requires = "llm_model")]
        llm_endpoint: Option<String>,
        #[arg(long, requires = "llm_endpoint")]
        llm_model: Option<String>,
        #[arg(long, default_value_t = 60)]
        llm_timeout_secs: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file, listing every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Check worker threads; defaults to the CPU count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = setup::DEFAULT_MODELS_DIR)]
    models: PathBuf,
    /// Event log file; defaults to GQLSHIELD_LOG_PATH when set.
    #[arg(long)]
    log_path: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Service base URL or its /analyze URL.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 10)]
    users: usize,
    #[arg(long, default_value_t = 10.0)]
    spawn_rate: f64,
    /// Run length in seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// JSON array of {"weight": n, "body": {...}}; defaults to a built-in mix.
    #[arg(long)]
    mix: Option<PathBuf>,
    /// Per-second time series.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    request_timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Analyze(a) => run_analyze(a),
        Cmd::Config(c) => run_config(c).map(|_| ExitCode::SUCCESS),
        Cmd::Serve(s) => run_serve(s).map(|_| ExitCode::SUCCESS),
        Cmd::Bench(b) => run_bench(b),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}

fn read_query(arg: &str) -> Result<String> {
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading query from stdin")?;
        Ok(s)
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading query {arg}"))
    }
}

fn run_analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let sources = EngineSources { schema: Some(a.schema), config: a.config, models: a.models, workers: setup::default_workers() };
    let schema = sources.schema()?;
    let cfg = setup::load_config(&sources.config, schema.as_deref())?;
    let ctx = sources.build(schema, cfg)?;
    let variables = match &a.variables {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading variables {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("{} must hold a JSON object", p.display()))?)
        }
        None => None,
    };
    let req = AnalysisRequest { query: read_query(&a.query)?, variables, operation_name: a.operation_name, schema_id: None };
    let report = analyze(&req, &ctx)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(match report.decision {
        Decision::Allow => ExitCode::SUCCESS,
        Decision::Block => ExitCode::from(2),
    })
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_config(c: ConfigCmd) -> Result<()> {
    match c {
        ConfigCmd::Generate { schema, llm_endpoint, llm_model, llm_timeout_secs, out } => {
            let sdl = std::fs::read_to_string(&schema).with_context(|| format!("reading schema {}", schema.display()))?;
            let rules = RuleSet::default();
            let cfg = match (llm_endpoint, llm_model) {
                (Some(endpoint), Some(model)) => {
                    let mut client = HttpLlmClient::new(endpoint, model);
                    client.timeout = Duration::from_secs(llm_timeout_secs);
                    let generated = llm_generate(&sdl, &rules, &client)?;
                    eprintln!("provenance: {}", serde_json::to_string(&generated.provenance)?);
                    generated.config
                }
                _ => heuristic_generate(&gqlshield_graphql::parse_schema(&sdl)?, &rules),
            };
            write_out(&out, &format!("{}\n", cfg.to_json_pretty()))
        }
        ConfigCmd::Validate { config, schema } => {
            let schema = schema.as_deref().map(setup::load_schema).transpose()?;
            let cfg = setup::load_config(&config, schema.as_ref())?;
            println!("ok: enabled checks {}", setup::enabled_names(&cfg).join(", "));
            Ok(())
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
}

fn run_serve(s: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();
    let workers = s.workers.unwrap_or_else(setup::default_workers).max(1);
    let sources = EngineSources { schema: s.schema, config: s.config, models: s.models, workers };
    // Fail fast on anything that does not need the model bundles.
    let schema = sources.schema()?;
    let cfg = setup::load_config(&sources.config, schema.as_deref())?;
    if setup::needs_models(&cfg) && !sources.models.is_dir() {
        bail!("ML checks are enabled but {} is not a directory (pass --models or disable sqli/osi/xss)", sources.models.display());
    }
    let logger = match &s.log_path {
        Some(p) => Some(BatchLogger::open(p, DEFAULT_BATCH, DEFAULT_INTERVAL).with_context(|| format!("opening {}", p.display()))?),
        None => BatchLogger::from_env().context("opening GQLSHIELD_LOG_PATH")?,
    };
    let addr: SocketAddr = format!("{}:{}", s.host, s.port).parse().context("listen address")?;
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(workers).enable_all().build()?;
    rt.block_on(async move {
        let state = Arc::new(AppState::new(logger, Some(sources.clone()), schema.clone()));
        let mut running = service::start(addr, state, move || sources.build(schema, cfg)).await?;
        tracing::info!("listening on {}; loading engine", running.addr);
        tokio::select! {
            r = running.wait_ready() => {
                if let Err(e) = r {
                    running.stop().await?;
                    return Err(e);
                }
                tracing::info!("ready");
            }
            _ = shutdown_signal() => {
                return running.stop().await;
            }
        }
        shutdown_signal().await;
        tracing::info!("shutting down");
        running.stop().await
    })
}

fn run_bench(b: BenchArgs) -> Result<ExitCode> {
    let mix = match &b.mix {
        Some(p) => bench::load_mix(p)?,
        None => bench::default_mix(),
    };
    let opts = BenchOptions {
        target: b.target,
        users: b.users,
        spawn_rate: b.spawn_rate,
        duration: Duration::from_secs_f64(b.duration),
        mix,
        request_timeout: Duration::from_secs_f64(b.request_timeout),
        seed: b.seed,
    };
    let rt = tokio::runtime::Runtime::new()?;
    let report = rt.block_on(bench::run(&opts))?;
    if let Some(out) = &b.out {
        bench::write_csv(&report, out)?;
    }
    let mut summary = serde_json::to_value(&report)?;
    summary.as_object_mut().map(|o| o.remove("timeseries"));
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if report.requests > 0 && report.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
