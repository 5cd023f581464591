//! HTTP front end: `/session` upgrades to a WebSocket carrying one training
//! session; every other path is served from the UI directory, with a small
//! built-in page when no directory is configured.
//!
//! Each connection owns its session. The session runs on a dedicated thread
//! through [`driver::run`]; frames flow back through a bounded channel, so a
//! slow client throttles training instead of queueing frames without bound.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::mpsc as std_mpsc;
use std::thread;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use ganlab_core::distributions::{Distribution, Preset};
use ganlab_core::driver;
use ganlab_core::gan::GanConfig;
use ganlab_core::protocol::{decode_client, encode_server, ClientMessage};
use ganlab_core::session::{ServerMessage, Session, SessionCommand, SessionOptions};
use ganlab_core::Error;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tower_http::services::{ServeDir, ServeFile};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Encoded frames buffered per connection before training waits for the client.
pub const FRAME_BUFFER: usize = 4;

const FALLBACK_PAGE: &str = include_str!("../static/index.html");

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Directory holding a built UI; `index.html` is served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// Seed for every new session.
    pub seed: u64,
    pub preset: Preset,
    pub options: SessionOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            ui_dir: None,
            seed: 0,
            preset: Preset::TwoGaussians,
            options: SessionOptions::default(),
        }
    }
}

pub fn router(config: ServerConfig) -> Router {
    let app = Router::new().route("/session", get(session_upgrade));
    let app = match &config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => app.route("/", get(|| async { Html(FALLBACK_PAGE) })),
    };
    app.with_state(config)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(config)).await
}

async fn session_upgrade(ws: WebSocketUpgrade, State(config): State<ServerConfig>) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, config)).into_response()
}

fn encode(msg: &ServerMessage, epoch: u64) -> String {
    encode_server(msg).unwrap_or_else(|err| {
        encode_server(&ServerMessage::error(&err, epoch)).expect("error frames are small")
    })
}

/// Runs the session on its own thread. The first frame is a snapshot of
/// the freshly initialized model.
fn spawn_session(
    config: ServerConfig,
    commands: std_mpsc::Receiver<SessionCommand>,
    frames: mpsc::Sender<String>,
) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let source: Distribution = config.preset.into();
        let mut session = match Session::new(GanConfig::default(), source, config.seed, config.options) {
            Ok(s) => s,
            Err(err) => {
                let _ = frames.blocking_send(encode(&ServerMessage::error(&err, 0), 0));
                return;
            }
        };
        let first = match session.snapshot() {
            Ok(s) => ServerMessage::Snapshot(Box::new(s)),
            Err(err) => ServerMessage::error(&err, 0),
        };
        if frames.blocking_send(encode(&first, 0)).is_err() {
            return;
        }
        let stop = driver::run(&mut session, &commands, |msg| {
            let epoch = match &msg {
                ServerMessage::Snapshot(s) => s.epoch,
                ServerMessage::Error(e) => e.epoch,
                ServerMessage::Ack(a) => a.epoch,
            };
            frames.blocking_send(encode(&msg, epoch)).is_ok()
        });
        tracing::debug!(?stop, epoch = session.epoch(), "session ended");
    })
}

async fn run_connection(mut socket: WebSocket, config: ServerConfig) {
    let (cmd_tx, cmd_rx) = std_mpsc::channel();
    let (frame_tx, mut frame_rx) = mpsc::channel::<String>(FRAME_BUFFER);
    let worker = spawn_session(config, cmd_rx, frame_tx.clone());

    loop {
        tokio::select! {
            frame = frame_rx.recv() => {
                let Some(frame) = frame else { break };
                if socket.send(Message::Text(frame.into())).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Binary(_))) => {
                        let err = Error::Decode("binary frames are not supported".into());
                        if frame_tx.send(encode(&ServerMessage::error(&err, 0), 0)).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                match decode_client(text.as_str()) {
                    Ok(ClientMessage::Command(cmd)) => {
                        if cmd_tx.send(cmd).is_err() {
                            break;
                        }
                    }
                    Err(err) => {
                        if frame_tx.send(encode(&ServerMessage::error(&err, 0), 0)).await.is_err() {
                            break;
                        }
                    }
                }
            }
        }
    }

    // closing both ends lets the session thread stop at its next send or receive
    drop(cmd_tx);
    drop(frame_rx);
    drop(frame_tx);
    let _ = tokio::task::spawn_blocking(move || worker.join()).await;
}
