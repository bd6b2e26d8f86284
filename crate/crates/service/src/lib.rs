//! REST server, results ingestion and the shared analysis layer behind the
//! `lde` command-line tool.

pub mod analysis;
pub mod api;
pub mod error;
pub mod ingest;

use std::net::SocketAddr;
use std::sync::Arc;

use lde_core::Store;
use tokio::net::TcpListener;

pub use api::router;
pub use error::{ApiError, ErrorCode};
pub use ingest::{ingest_meta_features, ingest_results, IngestReport};

/// Serves the API on an already bound listener until the future is dropped
/// or ctrl-c arrives.
pub async fn serve(store: Arc<Store>, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds `addr` and returns the listener with its resolved local address
/// (useful with port 0).
pub async fn bind(addr: &str) -> std::io::Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}
