//! Synchronous controller-side client.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::state::GameState;
use crate::proto::{
    decode, encode, read_line, settings_kv, BuiltIn, DecodeError, ErrCode, FrameMsg, Message,
    Session, SessionConfig, PROTOCOL_VERSION,
};
use crate::rules::MatchSettings;
use crate::sim::{Action, SimError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection error: {0}")]
    Io(#[from] io::Error),
    #[error("cannot decode server line: {0}")]
    Decode(#[from] DecodeError),
    #[error("server error ({}): {text}", code.as_str())]
    Server { code: ErrCode, text: String },
    #[error("protocol order: {0}")]
    Order(String),
    #[error("invalid action: {0}")]
    Action(#[from] SimError),
    #[error("unexpected reply: {0}")]
    Unexpected(String),
    #[error("client is closed")]
    Closed,
}

enum Backend {
    Tcp {
        reader: BufReader<TcpStream>,
        writer: BufWriter<TcpStream>,
    },
    Local {
        session: Session,
        queue: std::collections::VecDeque<Message>,
    },
}

impl Backend {
    fn send(&mut self, m: &Message) -> Result<(), ClientError> {
        match self {
            Backend::Tcp { writer, .. } => {
                writer.write_all(encode(m).as_bytes())?;
                writer.flush()?;
            }
            Backend::Local { session, queue } => queue.extend(session.handle(m.clone())),
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, ClientError> {
        match self {
            Backend::Tcp { reader, .. } => match read_line(reader)? {
                Some(line) => Ok(decode(&line)?),
                None => Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed").into()),
            },
            Backend::Local { queue, .. } => queue
                .pop_front()
                .ok_or_else(|| ClientError::Unexpected("no reply from session".into())),
        }
    }

    fn ask(&mut self, m: &Message) -> Result<Message, ClientError> {
        self.send(m)?;
        match self.recv()? {
            Message::Err { code, text } => Err(ClientError::Server { code, text }),
            reply => Ok(reply),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    NoGame,
    /// A STATE arrived and has not been read yet.
    StateReady,
    AwaitingActions,
    Terminal,
    Closed,
}

/// One session with the control server, either over TCP or in-process.
pub struct Client {
    backend: Backend,
    phase: Phase,
    pending: Option<GameState>,
    delegate: bool,
}

impl Client {
    /// Connect and complete the handshake.
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Client, ClientError> {
        let mut last = io::Error::new(io::ErrorKind::InvalidInput, "address resolved to nothing");
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(s) => {
                    s.set_nodelay(true)?;
                    let backend = Backend::Tcp {
                        reader: BufReader::new(s.try_clone()?),
                        writer: BufWriter::new(s),
                    };
                    return Client::handshake(backend);
                }
                Err(e) => last = e,
            }
        }
        Err(last.into())
    }

    /// In-process session without sockets.
    pub fn local(config: Arc<SessionConfig>) -> Client {
        let backend = Backend::Local {
            session: Session::new(config),
            queue: Default::default(),
        };
        Client::handshake(backend).expect("local handshake")
    }

    fn handshake(mut backend: Backend) -> Result<Client, ClientError> {
        match backend.ask(&Message::Hello {
            version: PROTOCOL_VERSION,
        })? {
            Message::Ok => Ok(Client {
                backend,
                phase: Phase::NoGame,
                pending: None,
                delegate: false,
            }),
            other => Err(unexpected(&other)),
        }
    }

    /// Start a match. `builtin` set means player 2 may be delegated to it by
    /// passing `None` to [`Client::make_actions`].
    pub fn new_game(
        &mut self,
        settings: &MatchSettings,
        builtin: Option<BuiltIn>,
    ) -> Result<(), ClientError> {
        let kv = settings_kv(settings, builtin.unwrap_or(BuiltIn::Immobile));
        let msg = match self.phase {
            Phase::Closed => return Err(ClientError::Closed),
            Phase::NoGame => Message::NewGame { settings: kv },
            _ => Message::Reset { settings: kv },
        };
        let state = self.expect_state(&msg)?;
        self.delegate = builtin.is_some();
        self.pending = Some(state);
        self.phase = Phase::StateReady;
        Ok(())
    }

    /// The state of the current turn; once per turn.
    pub fn get_state(&mut self) -> Result<(GameState, bool), ClientError> {
        match self.phase {
            Phase::Closed => Err(ClientError::Closed),
            Phase::StateReady => {
                let s = self.pending.take().expect("pending state");
                self.phase = if s.terminal {
                    Phase::Terminal
                } else {
                    Phase::AwaitingActions
                };
                let t = s.terminal;
                Ok((s, t))
            }
            p => Err(ClientError::Order(format!(
                "get_state called in phase {p:?}"
            ))),
        }
    }

    /// Submit this turn's actions and advance one turn. `a2 = None` hands
    /// player 2 to the server's built-in policy.
    pub fn make_actions(&mut self, a1: &Action, a2: Option<&Action>) -> Result<(), ClientError> {
        match self.phase {
            Phase::Closed => return Err(ClientError::Closed),
            Phase::AwaitingActions => {}
            p => {
                return Err(ClientError::Order(format!(
                    "make_actions called in phase {p:?}"
                )))
            }
        }
        if a2.is_none() && !self.delegate {
            return Err(ClientError::Order(
                "player 2 action required: the match has no built-in opponent".into(),
            ));
        }
        for (player, action) in [(1u8, Some(*a1)), (2, a2.copied())] {
            match self.backend.ask(&Message::Act { player, action })? {
                Message::Ok => {}
                other => return Err(unexpected(&other)),
            }
        }
        let state = self.expect_state(&Message::Step)?;
        self.pending = Some(state);
        self.phase = Phase::StateReady;
        Ok(())
    }

    /// [`Client::make_actions`] from raw wire integers, validated before sending.
    pub fn make_actions_raw(&mut self, a1: &[i64], a2: Option<&[i64]>) -> Result<(), ClientError> {
        let a1 = Action::from_wire(a1)?;
        let a2 = a2.map(Action::from_wire).transpose()?;
        self.make_actions(&a1, a2.as_ref())
    }

    pub fn save_replay(&mut self, name: &str) -> Result<(), ClientError> {
        self.live()?;
        match self
            .backend
            .ask(&Message::ReplaySave { name: name.into() })?
        {
            Message::Ok => Ok(()),
            other => Err(unexpected(&other)),
        }
    }

    /// Every recorded frame of a saved replay.
    pub fn load_replay(&mut self, name: &str) -> Result<Vec<FrameMsg>, ClientError> {
        self.live()?;
        self.backend
            .send(&Message::ReplayLoad { name: name.into() })?;
        let mut frames = Vec::new();
        loop {
            match self.backend.recv()? {
                Message::Frame(f) => frames.push(*f),
                Message::Ok => return Ok(frames),
                Message::Err { code, text } => return Err(ClientError::Server { code, text }),
                other => return Err(unexpected(&other)),
            }
        }
    }

    /// End the session. Calling it again does nothing.
    pub fn close(&mut self) -> Result<(), ClientError> {
        if self.phase == Phase::Closed {
            return Ok(());
        }
        self.phase = Phase::Closed;
        self.pending = None;
        match self.backend.ask(&Message::Quit) {
            Ok(_) => Ok(()),
            // the server may already have gone away
            Err(ClientError::Io(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    fn live(&self) -> Result<(), ClientError> {
        if self.phase == Phase::Closed {
            Err(ClientError::Closed)
        } else {
            Ok(())
        }
    }

    fn expect_state(&mut self, msg: &Message) -> Result<GameState, ClientError> {
        match self.backend.ask(msg)? {
            Message::State(s) => Ok(GameState::from_wire(&s)),
            other => Err(unexpected(&other)),
        }
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn unexpected(m: &Message) -> ClientError {
    let line = encode(m);
    let short: String = line.trim_end().chars().take(60).collect();
    ClientError::Unexpected(short)
}
