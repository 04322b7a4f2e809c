use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use deskcad_fab::{router, FabService, MockNetwork, ServerConfig, SlicerChoice, DEFAULT_TOKEN_TTL_SECS};

/// Slicing and print-job server.
#[derive(Debug, Parser)]
#[command(name = "fab-server", version)]
struct Args {
    #[arg(long, env = "FABSERVER_HOST", default_value = "0.0.0.0")]
    host: String,
    #[arg(long, env = "FABSERVER_PORT", default_value_t = 8080)]
    port: u16,
    /// Where uploaded models, G-code and job records are kept.
    #[arg(long, env = "FABSERVER_STORAGE_DIR", default_value = "fab-storage")]
    storage_dir: PathBuf,
    #[arg(long, env = "FABSERVER_SLICER", value_enum, default_value = "mock")]
    slicer: SlicerChoice,
    /// Command line for `--slicer external`; `{input}`, `{output}` and
    /// `{layer_height}` are substituted.
    #[arg(long, env = "FABSERVER_SLICER_CMD")]
    slicer_cmd: Option<String>,
    #[arg(long, env = "FABSERVER_TOKEN_TTL_SECONDS", default_value_t = DEFAULT_TOKEN_TTL_SECS)]
    token_ttl_seconds: u64,
    /// Printer polling period in milliseconds.
    #[arg(long, env = "FABSERVER_TICK_MS", default_value_t = 500)]
    tick_ms: u64,
    /// Layers a simulated printer completes per poll.
    #[arg(long, env = "FABSERVER_LAYERS_PER_TICK", default_value_t = 1)]
    layers_per_tick: u32,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let config = ServerConfig {
        host: args.host,
        port: args.port,
        storage_dir: args.storage_dir,
        slicer: args.slicer,
        slicer_cmd: args.slicer_cmd,
        token_ttl_secs: args.token_ttl_seconds,
        tick: Some(Duration::from_millis(args.tick_ms.max(1))),
        layers_per_tick: args.layers_per_tick,
    };
    let service: Arc<FabService> =
        match config.build_service(Arc::new(MockNetwork::new(config.layers_per_tick)), None) {
            Ok(s) => Arc::new(s),
            Err(e) => {
                eprintln!("fab-server: {e}");
                return std::process::ExitCode::from(2);
            }
        };
    let listener = match tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("fab-server: cannot bind {}:{}: {e}", config.host, config.port);
            return std::process::ExitCode::from(3);
        }
    };
    tracing::info!(
        "listening on {} (slicer {}, storage {})",
        listener.local_addr().map(|a| a.to_string()).unwrap_or_default(),
        service.slicer_name(),
        service.storage().root().display()
    );
    if let Some(every) = config.tick {
        tokio::spawn(deskcad_fab::server::run_ticker(service.clone(), every));
    }
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await {
        eprintln!("fab-server: {e}");
        return std::process::ExitCode::from(3);
    }
    std::process::ExitCode::SUCCESS
}
