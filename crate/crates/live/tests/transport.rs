//! The WebSocket endpoint over a real socket, and the HTTP fallback.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use futures_util::{SinkExt, StreamExt};
use owah::baselines::HelperResources;
use owah::bench::{generate_dataset, Dataset, DatasetManifest, Split};
use owah::episode::{EpisodeRecord, MainController, PlannerMain};
use owah::goals::GoalSpec;
use owah::worldsim::{Action, SceneDoc, SceneGraph};
use owah_live::{router, LiveService};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn dataset() -> Dataset {
    generate_dataset(&DatasetManifest::new(Split::Test, 2, 1)).unwrap()
}

fn human_move(snapshot: &Value) -> Action {
    let doc: SceneDoc = serde_json::from_value(snapshot["state"].clone()).unwrap();
    let goal: GoalSpec = serde_json::from_value(snapshot["goal"].clone()).unwrap();
    PlannerMain.act(&SceneGraph::from_doc(&doc).unwrap(), &goal).unwrap()
}

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn roundtrip(ws: &mut Socket, msg: Value) -> Value {
    ws.send(Message::text(msg.to_string())).await.unwrap();
    loop {
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected frame {other:?}"),
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_session_runs_to_completion_and_survives_a_reconnect() {
    let data = dataset();
    let episode = data.episodes[0].entry.id.clone();
    let service = Arc::new(LiveService::new([data], HelperResources::default()));
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(service)).await.unwrap() });
    let url = format!("ws://{addr}/ws");

    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let mut snap = roundtrip(&mut ws, json!({"type": "create", "config": {"episode": episode, "helper": "hp_rg"}})).await;
    let session = snap["session"].as_str().unwrap().to_string();
    // play a few ticks, drop the socket, then finish on a fresh one
    for _ in 0..3 {
        let reply = roundtrip(&mut ws, json!({"type": "act", "action": human_move(&snap)})).await;
        assert_eq!(reply["type"], "result");
        snap = reply["snapshot"].clone();
    }
    ws.close(None).await.unwrap();

    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let resumed = roundtrip(&mut ws, json!({"type": "attach", "session": session})).await;
    assert_eq!(resumed["tick"], 3);
    assert_eq!(resumed["state_hash"], snap["state_hash"]);
    snap = resumed;
    while snap["status"] == "awaiting_human" {
        let reply = roundtrip(&mut ws, json!({"type": "act", "action": human_move(&snap)})).await;
        snap = reply["snapshot"].clone();
    }
    assert_eq!(snap["outcome"]["satisfied"], true);
    let reply = roundtrip(&mut ws, json!({"type": "transcript"})).await;
    let record: EpisodeRecord = serde_json::from_value(reply["record"].clone()).unwrap();
    assert_eq!(record.replay().unwrap().state_hash(), snap["state_hash"].as_str().unwrap());

    let bad = roundtrip(&mut ws, json!({"type": "act", "action": {"type": "Idle"}})).await;
    assert_eq!(bad["code"], "session_finished");
}

async fn post(app: &axum::Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn http_fallback_carries_the_same_messages() {
    let data = dataset();
    let episode = data.episodes[1].entry.id.clone();
    let app = router(Arc::new(LiveService::new([data], HelperResources::default())));

    let (status, mut snap) = post(&app, "/messages", json!({"type": "create", "config": {"episode": episode}})).await;
    assert_eq!(status, StatusCode::OK);
    let uri = format!("/messages?session={}", snap["session"].as_str().unwrap());
    let far = Action::Grab { object: owah::worldsim::EntityId(u32::MAX) };
    let (status, err) = post(&app, &uri, json!({"type": "act", "action": far})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "illegal_action");
    assert_eq!(err["legal_actions"], snap["legal_actions"]);

    while snap["status"] == "awaiting_human" {
        let (status, reply) = post(&app, &uri, json!({"type": "act", "action": human_move(&snap)})).await;
        assert_eq!(status, StatusCode::OK);
        snap = reply["snapshot"].clone();
    }
    let (status, _) = post(&app, &uri, json!({"type": "act", "action": {"type": "Idle"}})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = post(&app, "/messages?session=nope", json!({"type": "snapshot"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&app, "/messages", json!({"type": "snapshot"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let req = Request::get("/schema/server").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let schema: Value = serde_json::from_slice(&to_bytes(resp.into_body(), usize::MAX).await.unwrap()).unwrap();
    assert!(schema["oneOf"].is_array());
}
