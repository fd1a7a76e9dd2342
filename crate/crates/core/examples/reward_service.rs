//! Start the scoring service on an ephemeral port, send one batch, and shut down.
//!
//! ```bash
//! cargo run -p toolreward --example reward_service
//! ```

use std::io::{Read, Write};
use std::net::TcpStream;
use toolreward::fixtures::{email_walmart_instance, TEMPLATE_REPLY};
use toolreward::service::{serve, ServiceConfig};

fn post(addr: std::net::SocketAddr, path: &str, body: &str) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "POST {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut response = String::new();
    stream.read_to_string(&mut response)?;
    Ok(response.split("\r\n\r\n").nth(1).unwrap_or_default().to_owned())
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = std::sync::mpsc::channel::<()>();
    let shutdown = async move {
        let _ = tokio::task::spawn_blocking(move || stopped.recv()).await;
    };
    let server = tokio::spawn(serve(listener, ServiceConfig::default(), shutdown));
    println!("listening on http://{addr}");

    let instance = email_walmart_instance();
    let body = serde_json::json!({
        "items": [
            {"instance": instance, "reply": TEMPLATE_REPLY},
            {"instance": instance, "reply": "no tags here", "scheme": "fine_grained_format_name"},
        ]
    })
    .to_string();
    let reply = tokio::task::spawn_blocking(move || post(addr, "/v1/score", &body))
        .await
        .expect("request thread")?;
    println!("{reply}");

    let _ = stop.send(());
    server.await.expect("server task")
}
