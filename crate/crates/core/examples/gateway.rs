//! WebSocket gateway in front of a control server; a browser-style client
//! says hello and starts a match.

use std::time::Duration;

use dojo::proto::{gateway, serve, GatewayConfig, ServerConfig};
use tungstenite::Message;

fn main() {
    let server = serve(ServerConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        replay_dir: None,
    })
    .unwrap();
    let gw = gateway(GatewayConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        upstream: server.local_addr(),
        connect_timeout: Duration::from_secs(5),
    })
    .unwrap();
    let url = format!("ws://{}", gw.local_addr());
    let (mut ws, _) = tungstenite::connect(url.as_str()).unwrap();
    for line in ["HELLO 1", "NEWGAME matchframes=100 distance=150", "QUIT"] {
        ws.send(Message::text(line)).unwrap();
        let reply = ws.read().unwrap();
        let text = reply.to_text().unwrap();
        println!("> {line}\n< {}", &text[..text.len().min(60)]);
    }
    server.shutdown();
}
