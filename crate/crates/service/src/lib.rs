//! HTTP service over the extraction pipeline with durable, versioned
//! record storage.

pub mod api;
pub mod config;
pub mod error;
pub mod model;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use api::{router, AppState, OPENAPI};
pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use model::{BackendUsed, RecordSummary, StoredRecord};
pub use store::{FileStore, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("token variable {0} is not set")]
    MissingToken(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opens storage and builds the application state from a config.
pub fn build_state(config: Config) -> Result<AppState, ServeError> {
    let token = match &config.token_env {
        Some(var) => match std::env::var(var) {
            Ok(t) if !t.is_empty() => Some(t),
            _ => return Err(ServeError::MissingToken(var.clone())),
        },
        None => None,
    };
    let store: Arc<dyn Store> = FileStore::open(&config.storage_path)?;
    Ok(AppState::new(store, config, token))
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: AppState,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        (&mut self.task).await.map_err(std::io::Error::other)?
    }

    /// Waits for the server task to end without asking it to stop.
    pub async fn wait(mut self) -> std::io::Result<()> {
        (&mut self.task).await.map_err(std::io::Error::other)?
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

pub async fn spawn(config: Config) -> Result<RunningServer, ServeError> {
    let addr = config.listen;
    let state = build_state(config)?;
    let listener = TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(RunningServer { addr, state, shutdown: Some(tx), task })
}

/// Serves until the process is stopped.
pub async fn run(config: Config) -> Result<(), ServeError> {
    Ok(spawn(config).await?.wait().await?)
}
