use std::net::SocketAddr;
use std::time::Duration;

use backchannel_core::{Ladder, PolicyConfig};
use backchannel_server::{router, AppState, Hub};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

async fn start() -> SocketAddr {
    let hub = Hub::new(PolicyConfig::default(), Ladder::default());
    let app = router(AppState::with_tick(hub, Duration::from_millis(50)));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_frame(ws: &mut Ws) -> Option<Value> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Message::Close(_) => return None,
            _ => {}
        }
    }
}

/// Reads frames until one satisfies `pred`.
async fn wait_for(ws: &mut Ws, pred: impl Fn(&Value) -> bool) -> Value {
    loop {
        let f = next_frame(ws).await.expect("socket closed while waiting");
        if pred(&f) {
            return f;
        }
    }
}

#[tokio::test]
async fn meeting_over_http_and_websocket() {
    let addr = start().await;
    let http = reqwest::Client::new();
    let base = format!("http://{addr}");

    let bad = http
        .post(format!("{base}/meetings"))
        .json(&json!({ "ttl_ms": -1 }))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);

    let created = http.post(format!("{base}/meetings")).send().await.unwrap();
    assert_eq!(created.status(), 201);
    let created: Value = created.json().await.unwrap();
    let id = created["meeting_id"].as_str().unwrap().to_owned();
    let key = created["host_key"].as_str().unwrap().to_owned();

    let join = |role: &'static str, key: Option<String>| {
        let mut req = http.post(format!("{base}/meetings/{id}/join")).json(&json!({ "role": role }));
        if let Some(k) = key {
            req = req.header("X-Host-Key", k);
        }
        req.send()
    };
    assert_eq!(join("speaker", None).await.unwrap().status(), 401);
    let speaker: Value = join("speaker", Some(key.clone())).await.unwrap().json().await.unwrap();
    let listener_a: Value = join("listener", None).await.unwrap().json().await.unwrap();
    let listener_b: Value = join("listener", None).await.unwrap().json().await.unwrap();
    let tokens: Vec<String> = [&speaker, &listener_a, &listener_b]
        .iter()
        .map(|v| v["session_token"].as_str().unwrap().to_owned())
        .collect();

    let ws_url = |token: &str| format!("ws://{addr}/meetings/{id}/ws?token={token}");
    assert!(tokio_tungstenite::connect_async(ws_url("forged")).await.is_err());
    let (mut ws_s, _) = tokio_tungstenite::connect_async(ws_url(&tokens[0])).await.unwrap();
    let (mut ws_a, _) = tokio_tungstenite::connect_async(ws_url(&tokens[1])).await.unwrap();
    let (mut ws_b, _) = tokio_tungstenite::connect_async(ws_url(&tokens[2])).await.unwrap();
    let first = next_frame(&mut ws_a).await.unwrap();
    assert_eq!(first, json!({ "type": "aggregate", "counts": {}, "audience": 2 }));

    ws_a.send(Message::Text("\u{0}garbage".into())).await.unwrap();
    assert_eq!(
        wait_for(&mut ws_a, |f| f["type"] == "error").await,
        json!({ "type": "error", "code": "malformed_frame" })
    );
    ws_a.send(Message::Text(r#"{"type":"floor","phase":"paused"}"#.into())).await.unwrap();
    assert_eq!(wait_for(&mut ws_a, |f| f["type"] == "error").await["code"], "forbidden_frame");

    ws_b.send(Message::Text(r#"{"type":"signal","kind":"dialogue","mood":"self","strength":"normal"}"#.into()))
        .await
        .unwrap();
    let bid = wait_for(&mut ws_s, |f| f["type"] == "cue").await;
    assert_eq!(bid["level"], "bid");
    assert_eq!(bid["gestures"], json!(["raise_hand", "stare_speaker"]));

    ws_s.send(Message::Text(r#"{"type":"floor","phase":"paused"}"#.into())).await.unwrap();
    let grant = wait_for(&mut ws_b, |f| f["type"] == "floor_grant").await;
    assert_eq!(grant, json!({ "type": "floor_grant", "kind": "dialogue" }));
    let announce = wait_for(&mut ws_a, |f| f["type"] == "cue" && f["intent"] == "grant_announce").await;
    assert_eq!(announce["utterance"], "We have a comment from the audience");

    let snap: Value = http.get(format!("{base}/meetings/{id}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(snap["audience"], 2);
    assert_eq!(snap["floor"], "paused");

    let wrong = http
        .delete(format!("{base}/meetings/{id}"))
        .header("X-Host-Key", "nope")
        .send()
        .await
        .unwrap();
    assert_eq!(wrong.status(), 401);
    let ended = http
        .delete(format!("{base}/meetings/{id}"))
        .header("X-Host-Key", &key)
        .send()
        .await
        .unwrap();
    assert_eq!(ended.status(), 204);
    for ws in [&mut ws_a, &mut ws_b, &mut ws_s] {
        while next_frame(ws).await.is_some() {}
    }
    assert_eq!(http.get(format!("{base}/meetings/{id}")).send().await.unwrap().status(), 404);
    assert_eq!(join("listener", None).await.unwrap().status(), 404);
}

#[tokio::test]
async fn ticker_drives_decay_without_client_traffic() {
    let addr = start().await;
    let http = reqwest::Client::new();
    let base = format!("http://{addr}");
    let created: Value = http
        .post(format!("{base}/meetings"))
        .json(&json!({ "ttl_ms": 100, "decay_ms": 100, "dwell_ms": 0 }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["meeting_id"].as_str().unwrap();
    let joined: Value = http
        .post(format!("{base}/meetings/{id}/join"))
        .json(&json!({ "role": "listener" }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let token = joined["session_token"].as_str().unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/meetings/{id}/ws?token={token}"))
        .await
        .unwrap();
    ws.send(Message::Text(r#"{"type":"signal","kind":"mistake","mood":"general","strength":"normal"}"#.into()))
        .await
        .unwrap();
    assert_eq!(wait_for(&mut ws, |f| f["type"] == "cue").await["intent"], "mistake");
    let down = wait_for(&mut ws, |f| f["type"] == "cue").await;
    assert_eq!(down["intent"], "stand_down");
    assert_eq!(down["level"], 0);
}
