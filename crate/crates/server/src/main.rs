use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use ganlab_core::distributions::Preset;
use ganlab_server::{serve, ServerConfig, DEFAULT_ADDR};
use tracing_subscriber::EnvFilter;

/// Serve GAN lab sessions over WebSocket at /session and the UI at /.
#[derive(Parser, Debug)]
#[command(name = "ganlab-server", version)]
struct Args {
    /// Listen address.
    #[arg(long, env = "GANLAB_ADDR", default_value = DEFAULT_ADDR)]
    addr: SocketAddr,
    /// Directory of a built UI; a minimal built-in page is served otherwise.
    #[arg(long, env = "GANLAB_UI_DIR")]
    ui_dir: Option<PathBuf>,
    /// Seed for new sessions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial real distribution for new sessions.
    #[arg(long, default_value = "two_gaussians", value_parser = |s: &str| Preset::from_name(s).ok_or(format!("unknown preset {s:?}")))]
    preset: Preset,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = ServerConfig {
        ui_dir: args.ui_dir,
        seed: args.seed,
        preset: args.preset,
        ..ServerConfig::default()
    };
    tokio::select! {
        result = serve(args.addr, config) => result,
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}
