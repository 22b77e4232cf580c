//! WebSocket server for live sessions. The simulation runs on one task and the
//! socket on another; they exchange messages over channels.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

use super::rig::STEP_MS;
use super::session::{write_log_records, ClientMessage, Session, SessionMetrics};
use crate::error::{Error, Result};

pub async fn bind(port: u16) -> Result<TcpListener> {
    TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| Error::Session(format!("cannot listen on port {port}: {e}")))
}

/// Runs one session over an accepted connection until the client disconnects,
/// writing the session log to `log`.
pub async fn serve_connection(stream: TcpStream, mut session: Session, log: &Path) -> Result<SessionMetrics> {
    let ws = tokio_tungstenite::accept_async(stream)
        .await
        .map_err(|e| Error::Session(format!("handshake: {e}")))?;
    let (mut sink, mut source) = ws.split();
    let (in_tx, mut in_rx) = mpsc::unbounded_channel::<ClientMessage>();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();

    let reader = tokio::spawn(async move {
        while let Some(msg) = source.next().await {
            let text = match msg {
                Ok(Message::Text(t)) => t,
                Ok(Message::Close(_)) | Err(_) => break,
                Ok(_) => continue,
            };
            match serde_json::from_str::<ClientMessage>(&text) {
                Ok(m) => {
                    if in_tx.send(m).is_err() {
                        break;
                    }
                }
                Err(e) => log::warn!("ignoring message {text:?}: {e}"),
            }
        }
    });
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    let file = std::fs::File::create(log).map_err(|e| Error::io(log, e))?;
    let mut log_out = std::io::BufWriter::new(file);
    let mut tick = tokio::time::interval(Duration::from_millis(STEP_MS as u64));
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);
    let mut connected = true;
    while connected {
        tick.tick().await;
        loop {
            match in_rx.try_recv() {
                Ok(m) => {
                    if let Err(e) = session.apply(m) {
                        log::warn!("rejected {m:?}: {e}");
                    }
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => {
                    connected = false;
                    break;
                }
            }
        }
        if !connected {
            break;
        }
        for msg in session.advance(STEP_MS)? {
            let _ = out_tx.send(serde_json::to_string(&msg)?);
        }
        write_log_records(&mut log_out, &session.drain_log()).map_err(|e| Error::io(log, e))?;
    }
    drop(out_tx);
    let (metrics, tail) = session.finish();
    write_log_records(&mut log_out, &tail).map_err(|e| Error::io(log, e))?;
    log_out.flush().map_err(|e| Error::io(log, e))?;
    reader.abort();
    let _ = writer.await;
    Ok(metrics)
}
