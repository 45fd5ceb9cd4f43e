//! WebSocket bridge for browser clients.
//!
//! Each browser connection gets its own upstream TCP connection to the control
//! server. Every text frame carries exactly one protocol line, without the
//! trailing newline. Frames are relayed unchanged in both directions.

use std::io::{self, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::{Message as WsMessage, WebSocket};

use super::server::read_line;

/// Default port of the WebSocket gateway.
pub const DEFAULT_GATEWAY_PORT: u16 = 7789;
/// Environment variable overriding the gateway port.
pub const GATEWAY_PORT_ENV: &str = "DOJO_GATEWAY_PORT";

const POLL: Duration = Duration::from_millis(5);

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub addr: SocketAddr,
    pub upstream: SocketAddr,
    pub connect_timeout: Duration,
}

pub struct GatewayHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn gateway(config: GatewayConfig) -> io::Result<GatewayHandle> {
    let listener = TcpListener::bind(config.addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    log::info!("gateway listening on {addr}, upstream {}", config.upstream);
    let thread = thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let cfg = config.clone();
                    thread::spawn(move || {
                        if let Err(e) = bridge(stream, &cfg) {
                            log::debug!("gateway connection ended: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("gateway accept failed: {e}"),
            }
        }
    });
    Ok(GatewayHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

fn reject(status: StatusCode, text: String) -> ErrorResponse {
    let mut r = ErrorResponse::new(Some(text));
    *r.status_mut() = status;
    r
}

fn bridge(browser: TcpStream, cfg: &GatewayConfig) -> io::Result<()> {
    let upstream = TcpStream::connect_timeout(&cfg.upstream, cfg.connect_timeout);
    let diagnostic = upstream
        .as_ref()
        .err()
        .map(|e| format!("upstream {} unreachable: {e}", cfg.upstream));
    let callback = |_req: &Request, resp: Response| match &diagnostic {
        Some(text) => Err(reject(StatusCode::BAD_GATEWAY, text.clone())),
        None => Ok(resp),
    };
    let mut ws =
        tungstenite::accept_hdr(browser, callback).map_err(|e| io::Error::other(e.to_string()))?;
    let upstream = upstream?;
    upstream.set_nodelay(true)?;
    ws.get_ref().set_read_timeout(Some(POLL))?;

    let lines = spawn_reader(upstream.try_clone()?);
    let result = relay(&mut ws, upstream, &lines);
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

fn spawn_reader(stream: TcpStream) -> Receiver<Option<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(stream);
        loop {
            match read_line(&mut reader) {
                Ok(Some(line)) => {
                    if tx.send(Some(line)).is_err() {
                        break;
                    }
                }
                _ => {
                    let _ = tx.send(None);
                    break;
                }
            }
        }
    });
    rx
}

fn relay(
    ws: &mut WebSocket<TcpStream>,
    mut upstream: TcpStream,
    lines: &Receiver<Option<String>>,
) -> io::Result<()> {
    let ws_err = |e: tungstenite::Error| io::Error::other(e.to_string());
    loop {
        // upstream -> browser
        loop {
            match lines.recv_timeout(Duration::ZERO) {
                Ok(Some(mut line)) => {
                    line.truncate(line.trim_end_matches(['\n', '\r']).len());
                    ws.send(WsMessage::Text(line)).map_err(ws_err)?;
                }
                Ok(None) | Err(RecvTimeoutError::Disconnected) => return Ok(()),
                Err(RecvTimeoutError::Timeout) => break,
            }
        }
        // browser -> upstream
        match ws.read() {
            Ok(WsMessage::Text(text)) => {
                let line = text.strip_suffix('\n').unwrap_or(&text);
                upstream.write_all(line.as_bytes())?;
                upstream.write_all(b"\n")?;
            }
            Ok(WsMessage::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed) => return Ok(()),
            Err(e) => return Err(ws_err(e)),
        }
    }
}
