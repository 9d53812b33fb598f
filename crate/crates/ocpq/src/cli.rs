//! The `ocpq` command line.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 parse or validation
//! error (also bad flags), 3 a node exceeded `--max-rows`, 4 the engine and
//! the brute-force oracle disagree.

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use ocpq_core::synthetic::{generate_loan_log, generate_synthetic, LoanConfig, SyntheticConfig};
use ocpq_core::{
    brute_force_evaluate, build_index, evaluate_tree, summarize, EngineError, EvalOptions,
    OracleError,
};
use serde::Deserialize;

use crate::export::{export_csv, CsvOptions};
use crate::ocel::{export_ocel2_json, import_ocel2_json, ImportError};
use crate::query_json::parse_query_json;
use crate::server::{AppState, ServerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TOO_LARGE: i32 = 3;
pub const EXIT_ORACLE_MISMATCH: i32 = 4;

#[derive(Parser)]
#[command(name = "ocpq", version, about = "Object-centric process querying")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query tree on a log and print per-node summaries.
    Run(RunArgs),
    /// Check a log and print its size.
    Validate {
        #[arg(long)]
        log: PathBuf,
        /// Treat events without objects and dangling references as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Write a seeded synthetic log as OCEL 2.0 JSON.
    Generate(GenerateArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Directory receiving one `<node>.csv` per node.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    strict: bool,
    /// Cross-check every node table against brute-force evaluation.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = EvalOptions::default().max_rows_per_node)]
    max_rows: usize,
    /// Keep CBS-excluded rows in the CSV files.
    #[arg(long)]
    include_basic_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Orders,
    Loan,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "orders")]
    shape: Shape,
    /// JSON object overriding generator parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "OCPQ_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory with the editor bundle, served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = EvalOptions::default().max_rows_per_node)]
    max_rows: usize,
    #[arg(long, default_value_t = 8)]
    max_logs: usize,
    #[arg(long, default_value_t = 64)]
    max_results: usize,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 1024)]
    max_body_mb: usize,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OrdersJson {
    num_customers: usize,
    orders_per_customer: usize,
    items_per_order: usize,
    reminder_probability: f64,
    skip_payment_probability: f64,
    seed: u64,
}

impl Default for OrdersJson {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        OrdersJson {
            num_customers: d.num_customers,
            orders_per_customer: d.orders_per_customer,
            items_per_order: d.items_per_order,
            reminder_probability: d.reminder_probability,
            skip_payment_probability: d.skip_payment_probability,
            seed: d.seed,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LoanJson {
    num_applications: usize,
    max_offers: usize,
    num_resources: usize,
    workflow_events: usize,
    seed: u64,
}

impl Default for LoanJson {
    fn default() -> Self {
        let d = LoanConfig::default();
        LoanJson {
            num_applications: d.num_applications,
            max_offers: d.max_offers,
            num_resources: d.num_resources,
            workflow_events: d.workflow_events,
            seed: d.seed,
        }
    }
}

/// An error message plus the exit code it maps to.
struct Failure(i32, String);

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<ImportError> for Failure {
    fn from(e: ImportError) -> Self {
        Failure(EXIT_INVALID, e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(path, e))
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let r = match cli.cmd {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Validate { log, strict } => cmd_validate(&log, strict, out, err),
        Command::Generate(a) => cmd_generate(a, out),
        Command::Serve(a) => cmd_serve(a),
    };
    match r {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn cmd_validate(
    path: &Path,
    strict: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let imported = import_ocel2_json(&read(path)?, strict)?;
    for w in &imported.warnings {
        let _ = writeln!(err, "warning: {}: {}", w.code, w.message);
    }
    let _ = writeln!(
        out,
        "OK, {} events, {} objects",
        imported.log.events().len(),
        imported.log.objects().len()
    );
    Ok(())
}

fn cmd_run(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let Format::Csv = a.format;
    let imported = import_ocel2_json(&read(&a.log)?, a.strict)?;
    for w in &imported.warnings {
        log::warn!("{}: {}", w.code, w.message);
    }
    let tree =
        parse_query_json(&read(&a.query)?).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
    let idx = build_index(&imported.log).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
    let opts = EvalOptions {
        threads: a.threads,
        max_rows_per_node: a.max_rows,
    };
    let started = Instant::now();
    let result = evaluate_tree(&tree, &idx, opts).map_err(|e| match e {
        EngineError::ResultTooLarge { .. } => Failure(EXIT_TOO_LARGE, e.to_string()),
        EngineError::InvalidTree(_) | EngineError::Plan(_) => Failure(EXIT_INVALID, e.to_string()),
        EngineError::ThreadPool(_) => Failure(EXIT_IO, e.to_string()),
    })?;
    let wall = result.wall_time.unwrap_or_else(|| started.elapsed());
    log::info!(
        "evaluated {} nodes over {} events in {wall:?}",
        result.nodes.len(),
        idx.event_count()
    );

    if a.oracle {
        let expected = brute_force_evaluate(&tree, &imported.log).map_err(|e| match e {
            OracleError::TooLargeForOracle { .. } => Failure(EXIT_INVALID, e.to_string()),
            OracleError::InvalidTree(_) => Failure(EXIT_INVALID, e.to_string()),
        })?;
        for (got, want) in result.nodes.iter().zip(&expected.nodes) {
            if got != want {
                return Err(Failure(
                    EXIT_ORACLE_MISMATCH,
                    format!(
                        "node `{}` differs from the oracle ({} vs {} rows)",
                        got.node_id,
                        got.rows.len(),
                        want.rows.len()
                    ),
                ));
            }
        }
        let _ = writeln!(err, "oracle: all {} node tables match", result.nodes.len());
    }

    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        let csv_opts = CsvOptions {
            include_basic_only: a.include_basic_only,
            include_labels: true,
        };
        for n in &tree.nodes {
            let bytes = export_csv(&result, &tree, &idx, &n.id, csv_opts)
                .map_err(|e| Failure(EXIT_IO, e.to_string()))?;
            let path = dir.join(format!("{}.csv", n.id));
            std::fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        }
    }

    let _ = writeln!(out, "node\trows\tsatisfied\tviolated\tpercent\twall_ms");
    let wall_ms = wall.as_secs_f64() * 1000.0;
    for s in summarize(&result) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}%\t{wall_ms:.3}",
            s.node_id,
            s.total_basic,
            s.satisfied,
            s.violated,
            s.percent_text()
        );
    }
    Ok(())
}

fn parse_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_slice(&read(p)?)
            .map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", p.display()))),
    }
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let log = match a.shape {
        Shape::Orders => {
            let c: OrdersJson = parse_config(a.config.as_deref())?;
            let cfg = SyntheticConfig {
                num_customers: c.num_customers,
                orders_per_customer: c.orders_per_customer,
                items_per_order: c.items_per_order,
                reminder_probability: c.reminder_probability,
                skip_payment_probability: c.skip_payment_probability,
                seed: a.seed.unwrap_or(c.seed),
            };
            cfg.check()
                .map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
            generate_synthetic(&cfg)
        }
        Shape::Loan => {
            let c: LoanJson = parse_config(a.config.as_deref())?;
            generate_loan_log(&LoanConfig {
                num_applications: c.num_applications,
                max_offers: c.max_offers,
                num_resources: c.num_resources,
                workflow_events: c.workflow_events,
                seed: a.seed.unwrap_or(c.seed),
            })
        }
    };
    let bytes = export_ocel2_json(&log);
    match &a.out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::io(p, e)),
        None => out
            .write_all(&bytes)
            .map_err(|e| Failure(EXIT_IO, e.to_string())),
    }
}

fn cmd_serve(a: ServeArgs) -> Result<(), Failure> {
    let nonzero = |n: usize, flag: &str| {
        NonZeroUsize::new(n)
            .ok_or_else(|| Failure(EXIT_INVALID, format!("--{flag} must be positive")))
    };
    let cfg = ServerConfig {
        max_logs: nonzero(a.max_logs, "max-logs")?,
        max_results: nonzero(a.max_results, "max-results")?,
        max_body_bytes: a.max_body_mb.saturating_mul(1 << 20),
        eval_timeout: Duration::from_secs(a.timeout_secs),
        eval: EvalOptions {
            threads: a.threads,
            max_rows_per_node: a.max_rows,
        },
        static_dir: a.static_dir,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    rt.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure(EXIT_IO, format!("{addr}: {e}")))?;
        crate::server::serve(listener, AppState::new(cfg))
            .await
            .map_err(|e| Failure(EXIT_IO, e.to_string()))
    })
}

/// Logging filter from `OCPQ_LOG_LEVEL` (error, warn, info, debug), default `warn`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("OCPQ_LOG_LEVEL", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}
