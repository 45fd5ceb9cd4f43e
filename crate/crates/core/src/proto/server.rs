//! Threaded TCP server: one session per connection.

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::message::{decode, encode, ErrCode, Message};
use super::session::{Session, SessionConfig};

/// Lines longer than this are rejected and the connection is closed.
pub const MAX_LINE: usize = 64 * 1024;

/// Default TCP port of the control server.
pub const DEFAULT_PORT: u16 = 7788;
/// Environment variable overriding the control server port.
pub const PORT_ENV: &str = "DOJO_PORT";

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub replay_dir: Option<PathBuf>,
}

/// Running server; dropping it does not stop it, call [`ServerHandle::shutdown`].
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting connections. Sessions already running finish on their own.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Block until the accept loop ends.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Bind and start accepting connections on a background thread.
pub fn serve(config: ServerConfig) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(config.addr)?;
    let addr = listener.local_addr()?;
    if let Some(dir) = &config.replay_dir {
        std::fs::create_dir_all(dir)?;
    }
    let shared = Arc::new(SessionConfig::new(config.replay_dir.clone()));
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    log::info!("control server listening on {addr}");
    let thread = thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let shared = Arc::clone(&shared);
                    thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = run_connection(stream, shared) {
                            log::debug!("connection {peer:?} ended: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

/// Read one line of at most `MAX_LINE` bytes. `Ok(None)` on clean EOF.
pub fn read_line(reader: &mut impl BufRead) -> io::Result<Option<String>> {
    let mut buf = Vec::new();
    let n = reader
        .by_ref()
        .take(MAX_LINE as u64 + 1)
        .read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        if buf.len() > MAX_LINE {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long"));
        }
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "connection closed mid-line",
        ));
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "line is not utf-8"))
}

fn run_connection(stream: TcpStream, shared: Arc<SessionConfig>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut session = Session::new(shared);
    while let Some(line) = read_line(&mut reader)? {
        let replies = match decode(&line) {
            Ok(msg) => session.handle(msg),
            Err(e) => vec![Message::err(ErrCode::Malformed, e.to_string())],
        };
        for r in &replies {
            writer.write_all(encode(r).as_bytes())?;
        }
        writer.flush()?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}
