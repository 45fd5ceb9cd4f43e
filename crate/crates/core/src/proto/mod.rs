//! Line-oriented control protocol, TCP server and WebSocket gateway.

mod gateway;
pub mod message;
mod server;
pub mod session;

pub use gateway::{gateway, GatewayConfig, GatewayHandle, DEFAULT_GATEWAY_PORT, GATEWAY_PORT_ENV};
pub use message::{
    decode, encode, DecodeError, ErrCode, FrameMsg, Message, PlayerBlock, StateMsg, WireWinner,
    PROTOCOL_VERSION,
};
pub use server::{read_line, serve, ServerConfig, ServerHandle, DEFAULT_PORT, MAX_LINE, PORT_ENV};
pub use session::{parse_settings, settings_kv, BuiltIn, Phase, Session, SessionConfig};
