use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use deskcad_cli::commands::{self, PrintOptions};
use deskcad_cli::fabclient::FabBackend;
use deskcad_cli::kernel::Kernel;
use deskcad_cli::{app, CliError, EXIT_COMMAND, EXIT_OK};
use deskcad_core::scene::{default_room, load_document, load_room, SceneDocument};
use deskcad_core::script::Session;
use deskcad_fab::{FabService, MockNetwork, ServerConfig, SlicerChoice, SliceProfile, DEFAULT_TOKEN_TTL_SECS};

#[derive(Debug, Parser)]
#[command(name = "deskcad", version, about = "Desk-scale solid modeling from the command line")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Replay a design script and save the document.
    Run {
        script: PathBuf,
        /// Room description; a furnished default room otherwise.
        #[arg(long)]
        room: Option<PathBuf>,
        /// Output document; `<script>.scene.json` otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a document's objects, or its printer plate, as STL.
    Export {
        doc: PathBuf,
        #[arg(long)]
        stl: PathBuf,
        #[arg(long)]
        ascii: bool,
        /// Export the printer plate in printer coordinates.
        #[arg(long)]
        plate: bool,
    },
    /// Check that every object is watertight and the document consistent.
    Validate { doc: PathBuf },
    /// Send an STL, or a document's plate, to a fabrication server.
    Print {
        input: PathBuf,
        #[arg(long, env = "DESKCAD_SERVER")]
        server: Option<String>,
        #[arg(long)]
        printer: Option<String>,
        /// Poll the job until it ends.
        #[arg(long)]
        watch: bool,
        /// Polling period in milliseconds.
        #[arg(long, default_value_t = 500)]
        interval: u64,
        /// Where to save the STL when no server is given.
        #[arg(long)]
        save: Option<PathBuf>,
        #[arg(long, default_value_t = 0.2)]
        layer_height: f64,
        #[arg(long, default_value_t = 20.0)]
        infill_percent: f64,
        #[arg(long)]
        supports: bool,
    },
    /// Serve the kernel API under /api next to the fabrication endpoints.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        room: Option<PathBuf>,
        /// Start from this document instead of an empty scene.
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long, env = "FABSERVER_STORAGE_DIR", default_value = "fab-storage")]
        storage_dir: PathBuf,
        #[arg(long, env = "FABSERVER_SLICER", value_enum, default_value = "mock")]
        slicer: SlicerChoice,
        #[arg(long, env = "FABSERVER_SLICER_CMD")]
        slicer_cmd: Option<String>,
        #[arg(long, env = "FABSERVER_TOKEN_TTL_SECONDS", default_value_t = DEFAULT_TOKEN_TTL_SECS)]
        token_ttl_seconds: u64,
        #[arg(long, default_value_t = 500)]
        tick_ms: u64,
        #[arg(long, default_value_t = 1)]
        layers_per_tick: u32,
    },
}

fn serve(cmd: Cmd) -> Result<(), CliError> {
    let Cmd::Serve {
        host,
        port,
        room,
        doc,
        storage_dir,
        slicer,
        slicer_cmd,
        token_ttl_seconds,
        tick_ms,
        layers_per_tick,
    } = cmd
    else {
        unreachable!("serve called with another command")
    };
    let read = |p: &PathBuf| std::fs::read(p).map_err(|e| CliError::Command(format!("cannot read {}: {e}", p.display())));
    let scene = match (doc, room) {
        (Some(d), _) => load_document(&read(&d)?).map_err(|e| CliError::Command(format!("{}: {e}", d.display())))?,
        (None, Some(r)) => {
            SceneDocument::new(load_room(&read(&r)?).map_err(|e| CliError::Command(format!("{}: {e}", r.display())))?)
        }
        (None, None) => SceneDocument::new(default_room()),
    };
    let config = ServerConfig {
        host,
        port,
        storage_dir,
        slicer,
        slicer_cmd,
        token_ttl_secs: token_ttl_seconds,
        tick: Some(Duration::from_millis(tick_ms.max(1))),
        layers_per_tick,
    };
    let fab: Arc<FabService> = Arc::new(
        config
            .build_service(Arc::new(MockNetwork::new(layers_per_tick)), None)
            .map_err(|e| CliError::Command(e.to_string()))?,
    );
    let kernel = Arc::new(Kernel::new(Session::new(scene), Some(Arc::new(fab.clone()) as Arc<dyn FabBackend>)));
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Command(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port))
            .await
            .map_err(|e| CliError::Network(format!("cannot bind {}:{}: {e}", config.host, config.port)))?;
        if let Ok(addr) = listener.local_addr() {
            eprintln!("serving on http://{addr} (kernel API under /api)");
        }
        if let Some(every) = config.tick {
            tokio::spawn(deskcad_fab::server::run_ticker(fab.clone(), every));
        }
        axum::serve(listener, app(kernel, fab))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Network(e.to_string()))
    })
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    let mut out = std::io::stdout();
    match cmd {
        Cmd::Run { script, room, out: doc } => commands::run(&script, room.as_deref(), doc.as_deref(), &mut out).map(drop),
        Cmd::Export { doc, stl, ascii, plate } => commands::export(&doc, &stl, ascii, plate, &mut out),
        Cmd::Validate { doc } => commands::validate(&doc, &mut out),
        Cmd::Print {
            input,
            server,
            printer,
            watch,
            interval,
            save,
            layer_height,
            infill_percent,
            supports,
        } => {
            let opts = PrintOptions {
                server,
                printer,
                watch,
                interval: Duration::from_millis(interval),
                save,
                profile: SliceProfile {
                    layer_height,
                    infill_percent,
                    supports,
                },
            };
            commands::print(&input, &opts, &mut out).map(drop)
        }
        cmd @ Cmd::Serve { .. } => serve(cmd),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are command errors; exit 2 means a failed validation.
            return ExitCode::from(if e.use_stderr() { EXIT_COMMAND } else { EXIT_OK });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("deskcad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
