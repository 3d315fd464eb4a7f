//! Read-only JSON API over a trained pairing model and its artifacts.
//!
//! [`ServiceConfig`] names the artifacts, [`Artifacts::load`] reads them once,
//! and [`router`] exposes them. Nothing is written after startup.

mod api;
mod config;

pub use api::{router, AppState, ScoreBody};
pub use config::{ArtifactPaths, Artifacts, ServiceConfig, ServiceError};

use std::future::Future;

use tokio::net::TcpListener;

/// Serves `state` on an already bound listener until `shutdown` resolves.
pub async fn run<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
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
        _ = ctrl_c => {},
        _ = term => {},
    }
}
