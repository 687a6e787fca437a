use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use collector_cli::features_cmd::{self, FeatureMode, FeatureSource, FeaturesArgs};
use collector_cli::{simulate, Client, SimulationProfile};
use collector_core::{EventKind, LogStore, ReportFormat};
use collector_service::Collector;
use tokio::net::TcpListener;

#[derive(Parser)]
#[command(
    name = "collector",
    version,
    about = "Keyboard and mouse telemetry collection and feature extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ingestion service until SIGINT/SIGTERM.
    Serve {
        #[arg(long, env = "COLLECTOR_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
        /// Store log file, created if missing.
        #[arg(long, env = "COLLECTOR_STORE", default_value = "collector.log")]
        store: PathBuf,
        #[arg(long, env = "COLLECTOR_ADMIN_USER")]
        admin_user: Option<String>,
        #[arg(long, env = "COLLECTOR_ADMIN_PASS", hide_env_values = true)]
        admin_pass: Option<String>,
    },
    /// Type and move through a synthetic session against a running service.
    Simulate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, env = "COLLECTOR_TARGET")]
        target: String,
        #[arg(long)]
        user: String,
        #[arg(long, env = "COLLECTOR_PASS", hide_env_values = true)]
        pass: String,
    },
    /// Download one stream of stored events.
    Export {
        #[arg(long, env = "COLLECTOR_TARGET")]
        target: String,
        /// Account to log in as.
        #[arg(long)]
        user: String,
        #[arg(long, env = "COLLECTOR_PASS", hide_env_values = true)]
        pass: String,
        /// Whose events to export (admin only when not `--user`).
        #[arg(long)]
        of: Option<String>,
        #[arg(long)]
        kind: EventKindArg,
        #[arg(long, default_value_t = 0)]
        from: i64,
        #[arg(long, default_value_t = i64::MAX)]
        to: i64,
        #[arg(long, default_value = "jsonl")]
        format: ReportFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract features from an export file or directly from a store log.
    Features {
        /// Export file (CSV or JSONL).
        #[arg(
            long = "in",
            conflicts_with = "store",
            required_unless_present = "store"
        )]
        input: Option<PathBuf>,
        /// Store log to read instead of an export file.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: FeatureMode,
        /// User label in the output; selects the stream when reading a store.
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = 0)]
        from: i64,
        #[arg(long, default_value_t = i64::MAX)]
        to: i64,
        /// Output format; inferred from the --out extension when omitted.
        #[arg(long)]
        format: Option<ReportFormat>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EventKindArg {
    Keystroke,
    Mouse,
}

impl From<EventKindArg> for EventKind {
    fn from(k: EventKindArg) -> Self {
        match k {
            EventKindArg::Keystroke => EventKind::Keystroke,
            EventKindArg::Mouse => EventKind::Mouse,
        }
    }
}

fn write_output(out: Option<&PathBuf>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("SIGTERM handler installs");
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = interrupt.await;
    tracing::info!("shutting down");
}

async fn serve(
    addr: String,
    store_path: PathBuf,
    admin_user: Option<String>,
    admin_pass: Option<String>,
) -> anyhow::Result<()> {
    let store = Arc::new(
        LogStore::open(&store_path)
            .with_context(|| format!("opening store {}", store_path.display()))?,
    );
    let mut collector = Collector::new(store);
    match (admin_user, admin_pass) {
        (Some(user), Some(pass)) => collector = collector.with_admin(&user, &pass)?,
        (None, None) => {}
        _ => bail!("--admin-user and --admin-pass must be given together"),
    }
    let listener = TcpListener::bind(&addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))?;
    let local = listener.local_addr()?;
    println!("listening on {local}");
    std::io::stdout().flush()?;
    tracing::info!(%local, store = %store_path.display(), "serving");
    collector_service::serve(listener, Arc::new(collector), shutdown_signal()).await?;
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    match run(Cli::parse().command).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Serve {
            addr,
            store,
            admin_user,
            admin_pass,
        } => serve(addr, store, admin_user, admin_pass).await,
        Command::Simulate {
            profile,
            target,
            user,
            pass,
        } => {
            let profile = SimulationProfile::load(&profile)?;
            let report = simulate::run(&profile, &target, &user, &pass).await?;
            println!("sent {} events, {} accepted", report.sent, report.accepted);
            Ok(())
        }
        Command::Export {
            target,
            user,
            pass,
            of,
            kind,
            from,
            to,
            format,
            out,
        } => {
            let mut client = Client::new(&target);
            client.login(&user, &pass).await?;
            let body = client
                .export(
                    of.as_deref().unwrap_or(&user),
                    kind.into(),
                    from,
                    to,
                    format,
                )
                .await;
            client.logout().await?;
            write_output(out.as_ref(), &body?)
        }
        Command::Features {
            input,
            store,
            mode,
            user,
            from,
            to,
            format,
            out,
        } => {
            let source = match (input, store) {
                (Some(path), _) => FeatureSource::File(path),
                (None, Some(path)) => FeatureSource::Store {
                    path,
                    from_ms: from,
                    to_ms: to,
                },
                (None, None) => bail!("one of --in or --store is required"),
            };
            if matches!(source, FeatureSource::Store { .. }) && user.is_none() {
                bail!("--user is required with --store");
            }
            let args = FeaturesArgs {
                source,
                mode,
                user: user.unwrap_or_else(|| "unknown".into()),
                format: format.unwrap_or_else(|| features_cmd::format_for_path(out.as_deref())),
            };
            write_output(out.as_ref(), &features_cmd::run(&args)?)
        }
    }
}
