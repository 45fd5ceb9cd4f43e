//! Line-oriented message grammar.
//!
//! Every message is one line of space-separated ASCII fields, tag first:
//!
//! ```text
//! HELLO <version>
//! OK
//! ERR <code> [text...]
//! NEWGAME [key=value ...]
//! STATE <terminal 0|1> <frames_played> <next_turnframes> <player 1: 158> <player 2: 158> <winner>
//! ACT <player 1|2> (<22 ints> | -)
//! STEP
//! RESET [key=value ...]
//! REPLAYSAVE <name>
//! REPLAYLOAD <name>
//! FRAME <cursor> <frame_index> <player 1: 158> <player 2: 158>
//! QUIT
//! ```
//!
//! A player block is 63 position floats (part id order, x y z), 63
//! velocity floats, 9 groin rotation floats (row-major), 20 joint modes
//! (1-4), 2 grips (1-2, right then left) and the injury. The STATE winner
//! field is 0 while the match runs, 1 or 2 for a winner and 3 for a draw.
//!
//! Every client line gets exactly one reply line, except REPLAYLOAD which
//! streams one FRAME per recorded frame before its OK. HELLO, ACT,
//! REPLAYSAVE and QUIT reply OK; NEWGAME, RESET and STEP reply STATE; any
//! failure replies ERR.
//!
//! Floats are written in the shortest form that parses back to the same
//! binary64 value.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::{Action, GripMode, JointMode, ACTION_LEN, JOINT_COUNT, PART_COUNT};

pub const PROTOCOL_VERSION: u32 = 1;

/// Fields in one player block of STATE and FRAME.
pub const PLAYER_FIELDS: usize = 2 * 3 * PART_COUNT + 9 + JOINT_COUNT + 2 + 1;
/// Fields after the STATE tag.
pub const STATE_FIELDS: usize = 3 + 2 * PLAYER_FIELDS + 1;
/// Fields after the FRAME tag.
pub const FRAME_FIELDS: usize = 2 + 2 * PLAYER_FIELDS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unknown or malformed tag `{0}`")]
    MalformedTag(String),
    #[error("expected {expected} fields, got {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("field {field} out of range: `{text}`")]
    Range { field: usize, text: String },
    #[error("field {field} is not a float: `{text}`")]
    FloatParse { field: usize, text: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrCode {
    /// Line could not be decoded.
    Malformed,
    /// Message not allowed in the current session phase.
    Order,
    /// Handshake version mismatch.
    Version,
    /// Bad NEWGAME/RESET settings.
    Settings,
    /// Replay could not be saved or loaded.
    Replay,
    /// Simulation fault or other server-side failure.
    Internal,
}

impl ErrCode {
    pub const ALL: [ErrCode; 6] = [
        ErrCode::Malformed,
        ErrCode::Order,
        ErrCode::Version,
        ErrCode::Settings,
        ErrCode::Replay,
        ErrCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrCode::Malformed => "malformed",
            ErrCode::Order => "order",
            ErrCode::Version => "version",
            ErrCode::Settings => "settings",
            ErrCode::Replay => "replay",
            ErrCode::Internal => "internal",
        }
    }

    pub fn parse(s: &str) -> Option<ErrCode> {
        ErrCode::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Observation of one player as carried on the wire.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerBlock {
    pub positions: [f64; 3 * PART_COUNT],
    pub velocities: [f64; 3 * PART_COUNT],
    pub groin_rotation: [f64; 9],
    pub joint_modes: [JointMode; JOINT_COUNT],
    pub grips: [GripMode; 2],
    pub injury: f64,
}

impl Default for PlayerBlock {
    fn default() -> Self {
        PlayerBlock {
            positions: [0.0; 3 * PART_COUNT],
            velocities: [0.0; 3 * PART_COUNT],
            groin_rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            joint_modes: [JointMode::Hold; JOINT_COUNT],
            grips: [GripMode::Release; 2],
            injury: 0.0,
        }
    }
}

/// STATE winner field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WireWinner {
    Pending = 0,
    Player1 = 1,
    Player2 = 2,
    Draw = 3,
}

impl WireWinner {
    fn from_code(v: i64) -> Option<WireWinner> {
        match v {
            0 => Some(WireWinner::Pending),
            1 => Some(WireWinner::Player1),
            2 => Some(WireWinner::Player2),
            3 => Some(WireWinner::Draw),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateMsg {
    pub terminal: bool,
    pub frames_played: u64,
    pub next_turnframes: u32,
    pub players: [PlayerBlock; 2],
    pub winner: WireWinner,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMsg {
    pub cursor: u64,
    pub frame_index: u64,
    pub players: [PlayerBlock; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Hello {
        version: u32,
    },
    Ok,
    Err {
        code: ErrCode,
        text: String,
    },
    NewGame {
        settings: Vec<(String, String)>,
    },
    State(Box<StateMsg>),
    /// `player` is 1 or 2; `None` delegates to the server's built-in policy.
    Act {
        player: u8,
        action: Option<Action>,
    },
    Step,
    Reset {
        settings: Vec<(String, String)>,
    },
    ReplaySave {
        name: String,
    },
    ReplayLoad {
        name: String,
    },
    Frame(Box<FrameMsg>),
    Quit,
}

impl Message {
    pub fn err(code: ErrCode, text: impl Into<String>) -> Message {
        let text: String = text.into();
        // keep the message on one printable line
        let text = text
            .chars()
            .map(|c| {
                if c.is_ascii_graphic() || c == ' ' {
                    c
                } else {
                    '?'
                }
            })
            .collect();
        Message::Err { code, text }
    }
}

/// Settings keys are lowercase words; values are any non-empty run of
/// printable characters without spaces.
pub fn valid_setting(key: &str, value: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && !value.is_empty()
        && value.bytes().all(|b| b.is_ascii_graphic())
}

/// Replay names double as file stems.
pub fn valid_replay_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && !name.starts_with('.')
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn put_f64(out: &mut String, v: f64) {
    out.push(' ');
    let _ = write!(out, "{v:?}");
}

fn put_int(out: &mut String, v: impl std::fmt::Display) {
    out.push(' ');
    let _ = write!(out, "{v}");
}

fn put_block(out: &mut String, b: &PlayerBlock) {
    for &v in b
        .positions
        .iter()
        .chain(&b.velocities)
        .chain(&b.groin_rotation)
    {
        put_f64(out, v);
    }
    for m in &b.joint_modes {
        put_int(out, m.wire());
    }
    for g in &b.grips {
        put_int(out, g.wire());
    }
    put_f64(out, b.injury);
}

fn put_settings(out: &mut String, settings: &[(String, String)]) {
    for (k, v) in settings {
        out.push(' ');
        out.push_str(k);
        out.push('=');
        out.push_str(v);
    }
}

/// Encode to one newline-terminated line.
pub fn encode(m: &Message) -> String {
    let mut out = String::new();
    match m {
        Message::Hello { version } => {
            out.push_str("HELLO");
            put_int(&mut out, version);
        }
        Message::Ok => out.push_str("OK"),
        Message::Err { code, text } => {
            out.push_str("ERR ");
            out.push_str(code.as_str());
            if !text.is_empty() {
                out.push(' ');
                out.push_str(text);
            }
        }
        Message::NewGame { settings } => {
            out.push_str("NEWGAME");
            put_settings(&mut out, settings);
        }
        Message::State(s) => {
            out.reserve(8 * STATE_FIELDS);
            out.push_str("STATE");
            put_int(&mut out, u8::from(s.terminal));
            put_int(&mut out, s.frames_played);
            put_int(&mut out, s.next_turnframes);
            put_block(&mut out, &s.players[0]);
            put_block(&mut out, &s.players[1]);
            put_int(&mut out, s.winner as u8);
        }
        Message::Act { player, action } => {
            out.push_str("ACT");
            put_int(&mut out, player);
            match action {
                Some(a) => a.to_wire().iter().for_each(|v| put_int(&mut out, v)),
                None => out.push_str(" -"),
            }
        }
        Message::Step => out.push_str("STEP"),
        Message::Reset { settings } => {
            out.push_str("RESET");
            put_settings(&mut out, settings);
        }
        Message::ReplaySave { name } => {
            out.push_str("REPLAYSAVE ");
            out.push_str(name);
        }
        Message::ReplayLoad { name } => {
            out.push_str("REPLAYLOAD ");
            out.push_str(name);
        }
        Message::Frame(f) => {
            out.reserve(8 * FRAME_FIELDS);
            out.push_str("FRAME");
            put_int(&mut out, f.cursor);
            put_int(&mut out, f.frame_index);
            put_block(&mut out, &f.players[0]);
            put_block(&mut out, &f.players[1]);
        }
        Message::Quit => out.push_str("QUIT"),
    }
    out.push('\n');
    out
}

struct Fields<'a> {
    items: Vec<&'a str>,
    next: usize,
}

impl<'a> Fields<'a> {
    fn expect(&self, n: usize) -> Result<(), DecodeError> {
        if self.items.len() != n {
            return Err(DecodeError::FieldCount {
                expected: n,
                got: self.items.len(),
            });
        }
        Ok(())
    }

    /// 1-based position of the next field (the tag is field 0).
    fn take(&mut self) -> (usize, &'a str) {
        let i = self.next;
        self.next += 1;
        (i + 1, self.items[i])
    }

    fn int(&mut self, lo: i64, hi: i64) -> Result<i64, DecodeError> {
        let (field, text) = self.take();
        match text.parse::<i64>() {
            Ok(v) if (lo..=hi).contains(&v) && !text.starts_with('+') => Ok(v),
            _ => Err(DecodeError::Range {
                field,
                text: text.into(),
            }),
        }
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        let (field, text) = self.take();
        match text.parse::<u64>() {
            Ok(v) if !text.starts_with('+') => Ok(v),
            _ => Err(DecodeError::Range {
                field,
                text: text.into(),
            }),
        }
    }

    fn float(&mut self) -> Result<f64, DecodeError> {
        let (field, text) = self.take();
        text.parse::<f64>().map_err(|_| DecodeError::FloatParse {
            field,
            text: text.into(),
        })
    }

    fn block(&mut self) -> Result<PlayerBlock, DecodeError> {
        let mut b = PlayerBlock::default();
        for v in b
            .positions
            .iter_mut()
            .chain(b.velocities.iter_mut())
            .chain(b.groin_rotation.iter_mut())
        {
            *v = self.float()?;
        }
        for m in &mut b.joint_modes {
            *m = JointMode::from_wire(self.int(1, 4)?).expect("range checked");
        }
        for g in &mut b.grips {
            *g = GripMode::from_wire(self.int(1, 2)?).expect("range checked");
        }
        b.injury = self.float()?;
        Ok(b)
    }

    fn settings(&mut self) -> Result<Vec<(String, String)>, DecodeError> {
        let mut out = Vec::new();
        while self.next < self.items.len() {
            let (field, text) = self.take();
            match text.split_once('=') {
                Some((k, v)) if valid_setting(k, v) => out.push((k.to_string(), v.to_string())),
                _ => {
                    return Err(DecodeError::Range {
                        field,
                        text: text.into(),
                    })
                }
            }
        }
        Ok(out)
    }

    fn name(&mut self) -> Result<String, DecodeError> {
        let (field, text) = self.take();
        if valid_replay_name(text) {
            Ok(text.to_string())
        } else {
            Err(DecodeError::Range {
                field,
                text: text.into(),
            })
        }
    }
}

/// Decode one line (a trailing `\n` or `\r\n` is accepted).
pub fn decode(line: &str) -> Result<Message, DecodeError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
    if tag == "ERR" {
        let (code, text) = rest.split_once(' ').unwrap_or((rest, ""));
        let code = ErrCode::parse(code).ok_or_else(|| DecodeError::Range {
            field: 1,
            text: code.into(),
        })?;
        if let Some(pos) = text.find(|c: char| !(c.is_ascii_graphic() || c == ' ')) {
            return Err(DecodeError::Range {
                field: 2,
                text: text[pos..].chars().take(1).collect(),
            });
        }
        return Ok(Message::Err {
            code,
            text: text.to_string(),
        });
    }
    let items: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(' ').collect()
    };
    let mut f = Fields { items, next: 0 };
    let msg = match tag {
        "HELLO" => {
            f.expect(1)?;
            Message::Hello {
                version: f.int(0, i64::from(u32::MAX))? as u32,
            }
        }
        "OK" => {
            f.expect(0)?;
            Message::Ok
        }
        "STEP" => {
            f.expect(0)?;
            Message::Step
        }
        "QUIT" => {
            f.expect(0)?;
            Message::Quit
        }
        "NEWGAME" => Message::NewGame {
            settings: f.settings()?,
        },
        "RESET" => Message::Reset {
            settings: f.settings()?,
        },
        "REPLAYSAVE" => {
            f.expect(1)?;
            Message::ReplaySave { name: f.name()? }
        }
        "REPLAYLOAD" => {
            f.expect(1)?;
            Message::ReplayLoad { name: f.name()? }
        }
        "ACT" => {
            let delegated = f.items.len() == 2 && f.items[1] == "-";
            if !delegated {
                f.expect(1 + ACTION_LEN)?;
            }
            let player = f.int(1, 2)? as u8;
            let action = if delegated {
                None
            } else {
                let mut raw = [0i64; ACTION_LEN];
                for (i, r) in raw.iter_mut().enumerate() {
                    *r = if i < JOINT_COUNT {
                        f.int(1, 4)?
                    } else {
                        f.int(1, 2)?
                    };
                }
                Some(Action::from_wire(&raw).expect("range checked"))
            };
            Message::Act { player, action }
        }
        "STATE" => {
            f.expect(STATE_FIELDS)?;
            let terminal = f.int(0, 1)? == 1;
            let frames_played = f.u64()?;
            let next_turnframes = f.int(0, i64::from(u32::MAX))? as u32;
            let players = [f.block()?, f.block()?];
            let winner = WireWinner::from_code(f.int(0, 3)?).expect("range checked");
            Message::State(Box::new(StateMsg {
                terminal,
                frames_played,
                next_turnframes,
                players,
                winner,
            }))
        }
        "FRAME" => {
            f.expect(FRAME_FIELDS)?;
            let cursor = f.u64()?;
            let frame_index = f.u64()?;
            let players = [f.block()?, f.block()?];
            Message::Frame(Box::new(FrameMsg {
                cursor,
                frame_index,
                players,
            }))
        }
        other => return Err(DecodeError::MalformedTag(other.chars().take(32).collect())),
    };
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_lines() {
        assert_eq!(encode(&Message::Ok), "OK\n");
        assert_eq!(encode(&Message::Hello { version: 1 }), "HELLO 1\n");
        let act = encode(&Message::Act {
            player: 1,
            action: Some(Action::hold()),
        });
        assert_eq!(act, format!("ACT 1{} 2 2\n", " 1".repeat(20)));
        assert_eq!(
            encode(&Message::Act {
                player: 2,
                action: None
            }),
            "ACT 2 -\n"
        );
    }

    #[test]
    fn layout_counts() {
        assert_eq!(PLAYER_FIELDS, 158);
        assert_eq!(STATE_FIELDS, 320);
        let line = encode(&Message::State(Box::new(StateMsg {
            terminal: false,
            frames_played: 0,
            next_turnframes: 10,
            players: [PlayerBlock::default(), PlayerBlock::default()],
            winner: WireWinner::Pending,
        })));
        assert_eq!(line.trim_end().split(' ').count(), 321);
    }

    #[test]
    fn strict_errors_name_the_position() {
        let mut fields = vec!["1"; 23];
        fields[5] = "5";
        let line = format!("ACT {}", fields.join(" "));
        assert_eq!(
            decode(&line),
            Err(DecodeError::Range {
                field: 6,
                text: "5".into()
            })
        );
        assert_eq!(
            decode("ACT 1 1"),
            Err(DecodeError::FieldCount {
                expected: 23,
                got: 2
            })
        );
        assert_eq!(
            decode("BOGUS 1"),
            Err(DecodeError::MalformedTag("BOGUS".into()))
        );
        assert_eq!(decode(""), Err(DecodeError::MalformedTag("".into())));
        assert_eq!(
            decode("OK extra"),
            Err(DecodeError::FieldCount {
                expected: 0,
                got: 1
            })
        );
        assert_eq!(
            decode("ACT 3 -"),
            Err(DecodeError::Range {
                field: 1,
                text: "3".into()
            })
        );
        assert!(matches!(
            decode("REPLAYSAVE ../etc"),
            Err(DecodeError::Range { field: 1, .. })
        ));
        assert!(matches!(
            decode("NEWGAME seed"),
            Err(DecodeError::Range { field: 1, .. })
        ));
    }

    #[test]
    fn state_with_one_missing_field() {
        let line = encode(&Message::State(Box::new(StateMsg {
            terminal: true,
            frames_played: 1000,
            next_turnframes: 10,
            players: [PlayerBlock::default(), PlayerBlock::default()],
            winner: WireWinner::Draw,
        })));
        let short = line.trim_end().rsplit_once(' ').unwrap().0;
        assert_eq!(
            decode(short),
            Err(DecodeError::FieldCount {
                expected: 320,
                got: 319
            })
        );
        let mut bad = line
            .trim_end()
            .split(' ')
            .map(String::from)
            .collect::<Vec<_>>();
        bad[10] = "x1".into();
        assert_eq!(
            decode(&bad.join(" ")),
            Err(DecodeError::FloatParse {
                field: 10,
                text: "x1".into()
            })
        );
    }

    #[test]
    fn float_text_round_trips_bitwise() {
        for v in [
            0.1,
            -0.0,
            1e300,
            5e-324,
            f64::MAX,
            -f64::MIN_POSITIVE,
            1.0 / 3.0,
            f64::INFINITY,
        ] {
            let mut s = String::new();
            put_f64(&mut s, v);
            assert_eq!(s.trim().parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn err_text_keeps_spaces() {
        let m = Message::err(ErrCode::Order, " step  before act ");
        assert_eq!(decode(&encode(&m)).unwrap(), m);
        assert_eq!(
            decode("ERR order").unwrap(),
            Message::err(ErrCode::Order, "")
        );
    }
}
