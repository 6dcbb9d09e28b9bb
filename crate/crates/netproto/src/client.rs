//! Control-socket client used by the glove when the simulator is served.

use futures_util::SinkExt;
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use wheelsim_core::gesture::{CommandSink, SendError};
use wheelsim_core::Command;

use crate::command::encode_command;

#[derive(Debug, thiserror::Error)]
#[error("cannot connect to {url}: {reason}")]
pub struct ConnectError {
    pub url: String,
    pub reason: String,
}

/// Synchronous handle to a background task that writes command frames.
pub struct WsCommandSink {
    tx: mpsc::UnboundedSender<Command>,
}

impl CommandSink for WsCommandSink {
    fn send(&mut self, c: Command) -> Result<(), SendError> {
        self.tx.send(c).map_err(|_| SendError::Closed)
    }
}

pub async fn connect(url: &str) -> Result<WsCommandSink, ConnectError> {
    let (mut ws, _) = tokio_tungstenite::connect_async(url)
        .await
        .map_err(|e| ConnectError { url: url.to_string(), reason: e.to_string() })?;
    let (tx, mut rx) = mpsc::unbounded_channel::<Command>();
    tokio::spawn(async move {
        while let Some(c) = rx.recv().await {
            if let Err(e) = ws.send(Message::Text(encode_command(c).into())).await {
                tracing::warn!(error = %e, "control socket write failed");
                break;
            }
        }
        let _ = ws.close(None).await;
    });
    Ok(WsCommandSink { tx })
}

/// Connect from synchronous code using a runtime handle.
pub fn connect_blocking(handle: &tokio::runtime::Handle, url: &str) -> Result<WsCommandSink, ConnectError> {
    handle.block_on(connect(url))
}
