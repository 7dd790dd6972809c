//! Local service for interactive editing: scene state and edits over HTTP,
//! simulation frames over a WebSocket.
//!
//! | route | |
//! |---|---|
//! | `GET /scene` | current scene, revision and mesh hashes |
//! | `POST /objects` | add an object from the asset directory |
//! | `DELETE /objects/{id}` | delete an object |
//! | `POST /simulate` | settle the current state, streaming frames |
//! | `POST /simulate/cancel` | stop after the current frame |
//! | `GET /assets` | OBJ files available for addition |
//! | `GET /assets/{name}` | OBJ text by file name or mesh hash |
//! | `GET /frames` | WebSocket of [`api::StreamMessage`] |
//!
//! Mutations while a simulation runs get `409 Conflict`.

pub mod api;
pub mod error;
pub mod session;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use api::{Accepted, AddObjectRequest, AssetList, API_VERSION};
pub use error::{Result, ServiceError};
pub use session::{SessionHandle, SessionOptions};

pub fn router(session: SessionHandle) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/objects", post(add_object))
        .route("/objects/{id}", delete(delete_object))
        .route("/simulate", post(simulate))
        .route("/simulate/cancel", post(cancel))
        .route("/assets", get(list_assets))
        .route("/assets/{name}", get(get_asset))
        .route("/frames", get(frames))
        .with_state(session)
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener, session: SessionHandle) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}

async fn get_scene(State(s): State<SessionHandle>) -> Result<Json<api::SceneView>> {
    Ok(Json(s.view().await?))
}

async fn add_object(
    State(s): State<SessionHandle>,
    body: Bytes,
) -> Result<(StatusCode, Json<Accepted>)> {
    let req: AddObjectRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let revision = s.add(req).await?;
    Ok((StatusCode::CREATED, Json(Accepted::new(revision))))
}

async fn delete_object(
    State(s): State<SessionHandle>,
    Path(id): Path<String>,
) -> Result<Json<Accepted>> {
    Ok(Json(Accepted::new(s.delete(id).await?)))
}

async fn simulate(State(s): State<SessionHandle>) -> Result<(StatusCode, Json<Accepted>)> {
    Ok((
        StatusCode::ACCEPTED,
        Json(Accepted::new(s.simulate().await?)),
    ))
}

async fn cancel(State(s): State<SessionHandle>) -> Result<Json<serde_json::Value>> {
    let cancelled = s.cancel().await?;
    Ok(Json(
        serde_json::json!({ "api_version": API_VERSION, "cancelled": cancelled }),
    ))
}

async fn list_assets(State(s): State<SessionHandle>) -> Result<Json<AssetList>> {
    Ok(Json(AssetList {
        api_version: API_VERSION,
        assets: s.list_assets()?,
    }))
}

async fn get_asset(State(s): State<SessionHandle>, Path(name): Path<String>) -> Result<Response> {
    let text = s.asset(&name).await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn frames(State(s): State<SessionHandle>, ws: WebSocketUpgrade) -> Response {
    // subscribe before the upgrade so nothing sent in between is missed
    let rx = s.subscribe();
    ws.on_upgrade(move |socket| forward(socket, rx))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<String>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("frame stream lagged by {n} messages"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
