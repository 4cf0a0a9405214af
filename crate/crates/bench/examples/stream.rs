//! Starts the HTTP service on a free port, creates a session, subscribes to
//! its event stream and prints events while a scan and a burst run.

use futures_util::StreamExt;
use tokio_tungstenite::tungstenite::Message;
use zpltune_bench::server::{router, AppState};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let state = AppState::new();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await });

    let config = zpltune_bench::parse_config(include_str!("../configs/five_anthracene.json"))
        .map_err(|e| anyhow::anyhow!("{e:?}"))?;
    let id = state.insert(zpltune_bench::Session::new(config)?);
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await?;

    let h = state.handle(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut s = h.session.lock().unwrap();
        s.scan(&zpltune_bench::ScanRequest::window(-1.0, 1.0)).map(drop)?;
        s.burst(&zpltune_bench::BurstRequest {
            aim: zpltune_bench::Aim::Emitter("m0".into()),
            power: 2.0,
            duration: 1.0,
        })
        .map(drop)
    })
    .await??;

    while let Ok(Some(msg)) = tokio::time::timeout(std::time::Duration::from_millis(200), ws.next()).await {
        if let Message::Text(t) = msg? {
            let v: serde_json::Value = serde_json::from_str(t.as_str())?;
            println!("seq {:>2} {:<8} clock {:.3} s", v["seq"], v["kind"].as_str().unwrap_or(""), v["clock"]);
        }
    }
    Ok(())
}
