//! HTTP + WebSocket front door around the core loop.
//!
//! The engine runs on its own task and is the only owner of game state.
//! Client frames reach it through an mpsc queue; snapshots leave through a
//! `watch` channel, which hands slow clients the latest snapshot and never
//! an older one.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use tokio::io::{AsyncBufReadExt, AsyncRead, BufReader};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tower_http::services::ServeDir;
use tracing::{debug, error, info, warn};

use crate::config::{AppConfig, LiveSource, Mode};
use crate::engine::{Engine, EngineOptions, Source};
use crate::game::{load_question_bank, QuestionBank};
use crate::protocol::{error_json, handle_client_message, snapshot_json, ControlEvent};
use crate::scanlog::{parse_sample, RssiSample};
use crate::session::read_session_file;

const BUNDLED_QUESTIONS: &str = include_str!("../assets/questions.json");
const DEV_INDEX: &str = include_str!("../assets/index.html");

pub fn bundled_question_bank() -> QuestionBank {
    QuestionBank::from_json_str(BUNDLED_QUESTIONS).expect("bundled question bank is valid")
}

pub fn load_bank(cfg: &AppConfig) -> anyhow::Result<QuestionBank> {
    match &cfg.questions_path {
        Some(path) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("cannot open question bank {}", path.display()))?;
            load_question_bank(file).with_context(|| format!("invalid question bank {}", path.display()))
        }
        None => Ok(bundled_question_bank()),
    }
}

/// Builds the engine for `cfg.mode`. Replay adopts the run parameters of
/// the recording's header unless `seed_override` is given.
pub fn build_engine(cfg: &AppConfig, seed_override: Option<u64>) -> anyhow::Result<Engine> {
    let bank = Arc::new(load_bank(cfg)?);
    let mut opts = EngineOptions::from_config(cfg)?;
    let source = match cfg.mode {
        Mode::Sim => {
            if let Some(seed) = seed_override {
                opts.seed = seed;
            }
            Source::sim(&opts.room, opts.seed)
        }
        Mode::Live => Source::live(),
        Mode::Replay => {
            let path = cfg.replay_path.as_ref().context("replay mode needs a replay file")?;
            let session = read_session_file(path)
                .with_context(|| format!("cannot replay {}", path.display()))?;
            if let Some(h) = &session.header {
                opts.apply_header(h);
            }
            if let Some(seed) = seed_override {
                opts.seed = seed;
            }
            Source::replay(session)
        }
    };
    Ok(Engine::new(opts, bank, source)?)
}

#[derive(Clone)]
struct AppState {
    mode: Mode,
    public_config: Arc<serde_json::Value>,
    control: mpsc::Sender<ControlEvent>,
    snapshots: watch::Receiver<Arc<str>>,
    shutdown: watch::Receiver<bool>,
}

pub fn router(cfg: &AppConfig, state_parts: RouterParts) -> Router {
    let state = AppState {
        mode: cfg.mode,
        public_config: Arc::new(cfg.public_view()),
        control: state_parts.control,
        snapshots: state_parts.snapshots,
        shutdown: state_parts.shutdown,
    };
    let app = Router::new()
        .route("/healthz", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/config", get(config_handler))
        .route("/ws", get(ws_handler));
    let app = match &cfg.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(DEV_INDEX) })),
    };
    app.with_state(state)
}

pub struct RouterParts {
    pub control: mpsc::Sender<ControlEvent>,
    pub snapshots: watch::Receiver<Arc<str>>,
    pub shutdown: watch::Receiver<bool>,
}

async fn config_handler(State(state): State<AppState>) -> impl IntoResponse {
    Json((*state.public_config).clone())
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

async fn client_session(mut socket: WebSocket, state: AppState) {
    let AppState {
        mode,
        control,
        mut snapshots,
        mut shutdown,
        ..
    } = state;

    // late joiners get the current snapshot right away
    let current = snapshots.borrow_and_update().clone();
    if socket.send(Message::Text(current.as_ref().into())).await.is_err() {
        return;
    }

    loop {
        tokio::select! {
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                let latest = snapshots.borrow_and_update().clone();
                if socket.send(Message::Text(latest.as_ref().into())).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                match handle_client_message(text.as_str(), mode) {
                    Ok(event) => {
                        if control.send(event).await.is_err() {
                            break;
                        }
                    }
                    Err(reason) => {
                        if socket.send(Message::Text(error_json(reason).into())).await.is_err() {
                            break;
                        }
                    }
                }
            }
            _ = shutdown.changed() => break,
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

async fn pump_lines<R: AsyncRead + Unpin>(reader: R, samples: mpsc::Sender<RssiSample>) {
    let mut lines = BufReader::new(reader).lines();
    let mut line_no = 0;
    while let Ok(Some(line)) = lines.next_line().await {
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_sample(&line, line_no) {
            Ok(s) => {
                if samples.send(s).await.is_err() {
                    return;
                }
            }
            Err(e) => warn!(%e, "live feed: skipping malformed line"),
        }
    }
}

async fn spawn_live_feed(source: LiveSource, samples: mpsc::Sender<RssiSample>) -> anyhow::Result<()> {
    match source {
        LiveSource::Stdin => {
            tokio::spawn(pump_lines(tokio::io::stdin(), samples));
        }
        LiveSource::Tcp(addr) => {
            let listener = TcpListener::bind(&addr)
                .await
                .with_context(|| format!("cannot bind live feed on {addr}"))?;
            info!("live feed listening on {}", listener.local_addr()?);
            tokio::spawn(async move {
                while let Ok((stream, peer)) = listener.accept().await {
                    debug!(%peer, "live feed connected");
                    tokio::spawn(pump_lines(stream, samples.clone()));
                }
            });
        }
    }
    Ok(())
}

fn spawn_core_loop(
    mut engine: Engine,
    mut control: mpsc::Receiver<ControlEvent>,
    mut live: mpsc::Receiver<RssiSample>,
    snapshots: watch::Sender<Arc<str>>,
    mut shutdown: watch::Receiver<bool>,
) -> tokio::task::JoinHandle<()> {
    let period = Duration::from_millis(engine.options().tick_period_ms);
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                _ = interval.tick() => {}
                _ = shutdown.changed() => break,
            }
            while let Ok(event) = control.try_recv() {
                if let Err(e) = engine.submit(event) {
                    debug!(%e, "control event rejected");
                }
            }
            while let Ok(sample) = live.try_recv() {
                let _ = engine.feed_live(sample);
            }
            // a finished replay keeps serving its final state
            if engine.is_finished() {
                continue;
            }
            match engine.tick() {
                Ok(snapshot) => {
                    snapshots.send_replace(snapshot_json(&snapshot).into());
                }
                Err(e) => {
                    error!(%e, "core loop stopped");
                    break;
                }
            }
        }
        if let Err(e) = engine.flush_recording() {
            error!(%e, "failed to flush session recording");
        }
    })
}

/// Serves on an already-bound listener until `shutdown` resolves.
pub async fn serve_on<F>(
    listener: TcpListener,
    cfg: AppConfig,
    mut engine: Engine,
    record: Option<PathBuf>,
    shutdown: F,
) -> anyhow::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    if let Some(path) = &record {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create session log {}", path.display()))?;
        engine.record_to(Box::new(std::io::BufWriter::new(file)))?;
    }

    let (control_tx, control_rx) = mpsc::channel(256);
    let (live_tx, live_rx) = mpsc::channel(4096);
    let (snap_tx, snap_rx) = watch::channel::<Arc<str>>(snapshot_json(&engine.snapshot()).into());
    let (stop_tx, stop_rx) = watch::channel(false);

    if cfg.mode == Mode::Live {
        spawn_live_feed(cfg.live_source()?, live_tx).await?;
    } else {
        drop(live_tx);
    }

    let core = spawn_core_loop(engine, control_rx, live_rx, snap_tx, stop_rx.clone());
    let app = router(
        &cfg,
        RouterParts {
            control: control_tx,
            snapshots: snap_rx,
            shutdown: stop_rx,
        },
    );

    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            let _ = stop_tx.send(true);
        })
        .await?;
    core.await?;
    info!("shut down cleanly");
    Ok(())
}

/// Binds `cfg.listen` and serves until SIGINT or SIGTERM.
pub async fn run(cfg: AppConfig, seed_override: Option<u64>, record: Option<PathBuf>) -> anyhow::Result<()> {
    let engine = build_engine(&cfg, seed_override)?;
    let listener = TcpListener::bind(&cfg.listen)
        .await
        .with_context(|| format!("cannot listen on {}", cfg.listen))?;
    serve_on(listener, cfg, engine, record, shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
