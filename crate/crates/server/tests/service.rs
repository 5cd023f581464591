use std::net::SocketAddr;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use ganlab_core::session::SessionOptions;
use ganlab_server::{router, ServerConfig};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(config: ServerConfig) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(config)).await.unwrap() });
    addr
}

async fn connect(addr: SocketAddr) -> Client {
    let (ws, _) = connect_async(format!("ws://{addr}/session")).await.unwrap();
    ws
}

async fn next(ws: &mut Client) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(20), ws.next())
            .await
            .expect("frame within timeout")
            .expect("stream open")
            .unwrap();
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).unwrap();
        }
    }
}

async fn command(ws: &mut Client, cmd: Value) {
    ws.send(Message::Text(cmd.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn session_round_trip() {
    let addr = start(ServerConfig::default()).await;
    let mut ws = connect(addr).await;

    let first = next(&mut ws).await;
    assert_eq!(first["kind"], "snapshot");
    assert_eq!(first["payload"]["epoch"], 0);
    assert_eq!(first["payload"]["mode"], "idle");

    command(&mut ws, json!({"kind": "command", "name": "StepBoth"})).await;
    let ack = next(&mut ws).await;
    assert_eq!(ack["kind"], "ack");
    assert_eq!(ack["payload"]["command"], "StepBoth");
    let frame = next(&mut ws).await;
    assert_eq!(frame["payload"]["epoch"], 1);

    command(&mut ws, json!({"kind": "command", "name": "Pause"})).await;
    let err = next(&mut ws).await;
    assert_eq!(err["kind"], "error");
    assert_eq!(err["payload"]["code"], "invalid_transition");

    ws.send(Message::Text("{\"kind\":\"comm".into())).await.unwrap();
    let err = next(&mut ws).await;
    assert_eq!(err["payload"]["code"], "decode");

    command(
        &mut ws,
        json!({"kind": "command", "name": "SetConfig", "args": {"field": "lr_g", "value": 0.01}}),
    )
    .await;
    assert_eq!(next(&mut ws).await["kind"], "ack");
    let frame = next(&mut ws).await;
    assert_eq!(frame["payload"]["config"]["optimizer_g"]["learning_rate"], 0.01);
}

#[tokio::test(flavor = "multi_thread")]
async fn running_session_streams_and_pauses() {
    let addr = start(ServerConfig {
        options: SessionOptions {
            frame_interval: 2,
            ..SessionOptions::default()
        },
        ..ServerConfig::default()
    })
    .await;
    let mut ws = connect(addr).await;
    next(&mut ws).await;
    command(&mut ws, json!({"kind": "command", "name": "Play"})).await;
    assert_eq!(next(&mut ws).await["kind"], "ack");
    let mut epochs = Vec::new();
    while epochs.len() < 3 {
        let frame = next(&mut ws).await;
        epochs.push(frame["payload"]["epoch"].as_u64().unwrap());
    }
    assert_eq!(epochs, [2, 4, 6]);
    command(&mut ws, json!({"kind": "command", "name": "Pause"})).await;
    // frames already in flight may arrive before the ack
    loop {
        let msg = next(&mut ws).await;
        if msg["kind"] == "ack" {
            assert_eq!(msg["payload"]["mode"], "paused");
            break;
        }
        assert_eq!(msg["kind"], "snapshot");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn slow_motion_frames_carry_phase() {
    let addr = start(ServerConfig {
        options: SessionOptions {
            slow_tick_millis: 5,
            ..SessionOptions::default()
        },
        ..ServerConfig::default()
    })
    .await;
    let mut ws = connect(addr).await;
    next(&mut ws).await;
    command(&mut ws, json!({"kind": "command", "name": "SlowMotionOn"})).await;
    assert_eq!(next(&mut ws).await["kind"], "ack");
    let mut labels = Vec::new();
    for _ in 0..10 {
        let p = next(&mut ws).await["payload"]["slow_phase"].clone();
        labels.push(format!("{}{}", p["submodel"].as_str().unwrap(), p["phase"]));
    }
    assert_eq!(labels[0], "discriminator1");
    assert_eq!(labels[9], "generator5");
}

async fn http_get(addr: SocketAddr, path: &str) -> String {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut body = String::new();
    stream.read_to_string(&mut body).await.unwrap();
    body
}

#[tokio::test(flavor = "multi_thread")]
async fn serves_builtin_page() {
    let addr = start(ServerConfig::default()).await;
    let resp = http_get(addr, "/").await;
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("/session"));
}

#[tokio::test(flavor = "multi_thread")]
async fn serves_ui_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>built ui</p>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let addr = start(ServerConfig {
        ui_dir: Some(dir.path().to_owned()),
        ..ServerConfig::default()
    })
    .await;
    assert!(http_get(addr, "/").await.contains("built ui"));
    assert!(http_get(addr, "/app.js").await.contains("console.log"));
}
