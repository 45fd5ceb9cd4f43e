//! Server-side session state machine, independent of the transport.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::message::{
    ErrCode, FrameMsg, Message, PlayerBlock, StateMsg, WireWinner, PROTOCOL_VERSION,
};
use crate::math::Vec3;
use crate::rules::{self, FrameSnapshot, MatchSettings, MatchState, Replay, Winner};
use crate::sim::{skeleton::GROIN, Action, CharacterState, PART_COUNT};

/// Policy that plays a player whose ACT is `-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltIn {
    /// Every joint held, hands released.
    Immobile,
    UniformRandom,
}

/// Read-only server configuration shared by all sessions.
#[derive(Debug, Default)]
pub struct SessionConfig {
    pub replay_dir: Option<PathBuf>,
    writing: Mutex<HashSet<String>>,
}

impl SessionConfig {
    pub fn new(replay_dir: Option<PathBuf>) -> SessionConfig {
        SessionConfig {
            replay_dir,
            writing: Mutex::new(HashSet::new()),
        }
    }

    fn replay_path(&self, name: &str) -> Result<PathBuf, String> {
        let dir = self
            .replay_dir
            .as_ref()
            .ok_or("server has no replay directory")?;
        Ok(dir.join(format!("{name}.replay")))
    }

    /// Write a replay; concurrent writers of one name are refused.
    pub fn save_replay(&self, name: &str, replay: &Replay) -> Result<(), String> {
        let path = self.replay_path(name)?;
        if !self
            .writing
            .lock()
            .expect("replay lock")
            .insert(name.to_string())
        {
            return Err(format!(
                "replay `{name}` is being written by another session"
            ));
        }
        let tmp = path.with_extension(format!("replay.tmp{}", std::process::id()));
        let result = fs::write(&tmp, replay.to_bytes())
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| format!("cannot write {}: {e}", path.display()));
        self.writing.lock().expect("replay lock").remove(name);
        result
    }

    pub fn load_replay(&self, name: &str) -> Result<Replay, String> {
        let path = self.replay_path(name)?;
        let data = fs::read(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Replay::from_bytes(&data).map_err(|e| e.to_string())
    }
}

/// Parse NEWGAME/RESET key=value settings.
///
/// Keys: `task` (preset id, applied first), `matchframes`, `turnframes`
/// (comma list), `distance`, `dojo_radius`, `dq` (0/1), `dismemberment`
/// (0/1), `gravity` (x,y,z), `seed`, `replay` (name; the finished match is
/// saved under it), `builtin` (`immobile` or `random`).
pub fn parse_settings(kv: &[(String, String)]) -> Result<(MatchSettings, BuiltIn), String> {
    let mut settings = MatchSettings::default();
    if let Some((_, id)) = kv.iter().find(|(k, _)| k == "task") {
        settings = rules::preset(id).ok_or_else(|| format!("unknown task `{id}`"))?;
    }
    let mut builtin = BuiltIn::Immobile;
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
        v.parse().map_err(|_| format!("bad value for {key}: `{v}`"))
    }
    fn flag(key: &str, v: &str) -> Result<bool, String> {
        match v {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("bad value for {key}: `{v}` (expected 0 or 1)")),
        }
    }
    for (k, v) in kv {
        match k.as_str() {
            "task" => {}
            "matchframes" => settings.matchframes = num(k, v)?,
            "turnframes" => {
                settings.turnframes_schedule =
                    v.split(',').map(|t| num(k, t)).collect::<Result<_, _>>()?;
            }
            "distance" => settings.engagement_distance = num(k, v)?,
            "dojo_radius" => settings.dojo_radius = num(k, v)?,
            "dq" => settings.dq_enabled = flag(k, v)?,
            "dismemberment" => settings.dismemberment_enabled = flag(k, v)?,
            "gravity" => {
                let c: Vec<f64> = v.split(',').map(|t| num(k, t)).collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(format!("gravity needs 3 components, got {}", c.len()));
                }
                settings.gravity = Vec3::new(c[0], c[1], c[2]);
            }
            "seed" => settings.seed = num(k, v)?,
            "replay" => {
                if !super::message::valid_replay_name(v) {
                    return Err(format!("bad replay name `{v}`"));
                }
                settings.replay_name = Some(v.clone());
            }
            "builtin" => {
                builtin = match v.as_str() {
                    "immobile" => BuiltIn::Immobile,
                    "random" => BuiltIn::UniformRandom,
                    _ => return Err(format!("unknown builtin `{v}`")),
                }
            }
            _ => return Err(format!("unknown setting `{k}`")),
        }
    }
    settings.validate().map_err(|e| e.to_string())?;
    Ok((settings, builtin))
}

/// Key=value form of `settings`, the inverse of [`parse_settings`].
pub fn settings_kv(settings: &MatchSettings, builtin: BuiltIn) -> Vec<(String, String)> {
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
    let g = settings.gravity;
    let mut kv = vec![
        ("matchframes", settings.matchframes.to_string()),
        (
            "turnframes",
            join(&mut settings.turnframes_schedule.iter().map(|t| t.to_string())),
        ),
        ("distance", format!("{:?}", settings.engagement_distance)),
        ("dojo_radius", format!("{:?}", settings.dojo_radius)),
        ("dq", u8::from(settings.dq_enabled).to_string()),
        (
            "dismemberment",
            u8::from(settings.dismemberment_enabled).to_string(),
        ),
        ("gravity", format!("{:?},{:?},{:?}", g.x, g.y, g.z)),
        ("seed", settings.seed.to_string()),
        (
            "builtin",
            match builtin {
                BuiltIn::Immobile => "immobile",
                BuiltIn::UniformRandom => "random",
            }
            .to_string(),
        ),
    ];
    if let Some(name) = &settings.replay_name {
        kv.push(("replay", name.clone()));
    }
    kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Wire block of one character.
pub fn player_block(ch: &CharacterState) -> PlayerBlock {
    let mut b = PlayerBlock::default();
    for (i, p) in ch.parts.iter().enumerate() {
        b.positions[3 * i..3 * i + 3].copy_from_slice(&p.position.to_array());
        b.velocities[3 * i..3 * i + 3].copy_from_slice(&p.velocity.to_array());
    }
    let r = ch.parts[GROIN].orientation.m;
    for (i, row) in r.iter().enumerate() {
        b.groin_rotation[3 * i..3 * i + 3].copy_from_slice(row);
    }
    for (m, j) in b.joint_modes.iter_mut().zip(&ch.joints) {
        *m = j.mode;
    }
    b.grips = ch.grips;
    b.injury = ch.injury;
    b
}

fn snapshot_block(s: &rules::PlayerSnapshot) -> PlayerBlock {
    let mut b = PlayerBlock::default();
    for i in 0..PART_COUNT {
        b.positions[3 * i..3 * i + 3].copy_from_slice(&s.positions[i].to_array());
        b.velocities[3 * i..3 * i + 3].copy_from_slice(&s.velocities[i].to_array());
    }
    for (i, row) in s.orientations[GROIN].m.iter().enumerate() {
        b.groin_rotation[3 * i..3 * i + 3].copy_from_slice(row);
    }
    b.joint_modes = s.joint_modes;
    b.grips = s.grips;
    b.injury = s.injury;
    b
}

/// STATE message for the start of the next turn.
pub fn state_message(m: &MatchState) -> StateMsg {
    let winner = match m.outcome.map(|o| o.winner) {
        None => WireWinner::Pending,
        Some(Winner::Player1) => WireWinner::Player1,
        Some(Winner::Player2) => WireWinner::Player2,
        Some(Winner::Draw) => WireWinner::Draw,
    };
    StateMsg {
        terminal: m.terminal,
        frames_played: m.frames_played,
        next_turnframes: m.current_turnframes,
        players: [
            player_block(&m.world.players[0]),
            player_block(&m.world.players[1]),
        ],
        winner,
    }
}

pub fn frame_message(cursor: usize, f: &FrameSnapshot) -> FrameMsg {
    FrameMsg {
        cursor: cursor as u64,
        frame_index: f.frame,
        players: [snapshot_block(&f.players[0]), snapshot_block(&f.players[1])],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Handshake,
    /// Handshake done, no match yet.
    Idle,
    /// Waiting for ACTs and STEP.
    Actions,
    Terminal,
    Closed,
}

#[derive(Clone, Copy, Debug)]
enum Pending {
    Explicit(Action),
    Delegated,
}

struct Game {
    m: MatchState,
    builtin: BuiltIn,
    rng: ChaCha8Rng,
    pending: [Option<Pending>; 2],
    kv: Vec<(String, String)>,
}

/// One connection's protocol state.
pub struct Session {
    config: Arc<SessionConfig>,
    phase: Phase,
    game: Option<Game>,
}

fn err(code: ErrCode, text: impl Into<String>) -> Vec<Message> {
    vec![Message::err(code, text)]
}

impl Session {
    pub fn new(config: Arc<SessionConfig>) -> Session {
        Session {
            config,
            phase: Phase::Handshake,
            game: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    /// Current match, if one was started.
    pub fn current_match(&self) -> Option<&MatchState> {
        self.game.as_ref().map(|g| &g.m)
    }

    /// Handle one decoded message and return the replies in order.
    pub fn handle(&mut self, msg: Message) -> Vec<Message> {
        use Phase::*;
        match (self.phase, msg) {
            (Closed, _) => err(ErrCode::Order, "session closed"),
            (_, Message::Quit) => {
                self.phase = Closed;
                self.game = None;
                vec![Message::Ok]
            }
            (Handshake, Message::Hello { version }) => {
                if version == PROTOCOL_VERSION {
                    self.phase = Idle;
                    vec![Message::Ok]
                } else {
                    self.phase = Closed;
                    err(
                        ErrCode::Version,
                        format!("protocol version {version} not supported, server speaks {PROTOCOL_VERSION}"),
                    )
                }
            }
            (Handshake, _) => err(ErrCode::Order, "HELLO required first"),
            (Idle | Terminal, Message::NewGame { settings }) => self.start(settings),
            (Actions | Terminal, Message::Reset { settings }) => {
                let kv = if settings.is_empty() {
                    self.game.as_ref().map(|g| g.kv.clone()).unwrap_or_default()
                } else {
                    settings
                };
                self.start(kv)
            }
            (Actions, Message::Act { player, action }) => {
                if !(1..=2).contains(&player) {
                    return err(ErrCode::Malformed, format!("player {player} out of range"));
                }
                let game = self.game.as_mut().expect("game in Actions phase");
                let slot = usize::from(player - 1);
                if game.pending[slot].is_some() {
                    return err(
                        ErrCode::Order,
                        format!("player {player} already acted this turn"),
                    );
                }
                game.pending[slot] = Some(match action {
                    Some(a) => Pending::Explicit(a),
                    None => Pending::Delegated,
                });
                vec![Message::Ok]
            }
            (Actions, Message::Step) => self.step(),
            (Actions | Terminal, Message::ReplaySave { name }) => {
                let game = self.game.as_ref().expect("game exists");
                let mut replay = game.m.replay();
                if !game.m.is_recording() {
                    replay = match replay.resimulate() {
                        Ok(r) => r,
                        Err(e) => return err(ErrCode::Replay, e.to_string()),
                    };
                }
                match self.config.save_replay(&name, &replay) {
                    Ok(()) => vec![Message::Ok],
                    Err(e) => err(ErrCode::Replay, e),
                }
            }
            (_, Message::ReplayLoad { name }) => match self.config.load_replay(&name) {
                Ok(replay) => {
                    let mut out: Vec<Message> = replay
                        .playback()
                        .enumerate()
                        .map(|(i, f)| Message::Frame(Box::new(frame_message(i, f))))
                        .collect();
                    out.push(Message::Ok);
                    out
                }
                Err(e) => err(ErrCode::Replay, e),
            },
            (phase, m) => err(
                ErrCode::Order,
                format!("{} not allowed in phase {phase:?}", tag_of(&m)),
            ),
        }
    }

    fn start(&mut self, kv: Vec<(String, String)>) -> Vec<Message> {
        let (settings, builtin) = match parse_settings(&kv) {
            Ok(x) => x,
            Err(e) => return err(ErrCode::Settings, e),
        };
        let seed = settings.seed;
        let m = match MatchState::new(settings) {
            Ok(m) => m,
            Err(e) => return err(ErrCode::Settings, e.to_string()),
        };
        let state = Message::State(Box::new(state_message(&m)));
        self.game = Some(Game {
            m,
            builtin,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b111),
            pending: [None, None],
            kv,
        });
        self.phase = Phase::Actions;
        vec![state]
    }

    fn step(&mut self) -> Vec<Message> {
        let game = self.game.as_mut().expect("game in Actions phase");
        let missing: Vec<String> = (0..2)
            .filter(|&p| game.pending[p].is_none())
            .map(|p| (p + 1).to_string())
            .collect();
        if !missing.is_empty() {
            return err(
                ErrCode::Order,
                format!("STEP before ACT from player {}", missing.join(" and ")),
            );
        }
        let mut actions = [Action::hold(); 2];
        for (a, pending) in actions.iter_mut().zip(game.pending) {
            *a = match pending.expect("checked") {
                Pending::Explicit(a) => a,
                Pending::Delegated => match game.builtin {
                    BuiltIn::Immobile => Action::hold(),
                    BuiltIn::UniformRandom => Action::random(&mut game.rng),
                },
            };
        }
        match game.m.submit_actions(&actions[0], &actions[1]) {
            Ok(_) => {}
            Err(e) => {
                game.pending = [None, None];
                return err(ErrCode::Internal, e.to_string());
            }
        }
        game.pending = [None, None];
        if game.m.terminal {
            self.phase = Phase::Terminal;
            if let Some(name) = game.m.settings.replay_name.clone() {
                if let Err(e) = self.config.save_replay(&name, &game.m.replay()) {
                    log::warn!("automatic replay save failed: {e}");
                }
            }
        }
        vec![Message::State(Box::new(state_message(&game.m)))]
    }
}

fn tag_of(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "HELLO",
        Message::Ok => "OK",
        Message::Err { .. } => "ERR",
        Message::NewGame { .. } => "NEWGAME",
        Message::State(_) => "STATE",
        Message::Act { .. } => "ACT",
        Message::Step => "STEP",
        Message::Reset { .. } => "RESET",
        Message::ReplaySave { .. } => "REPLAYSAVE",
        Message::ReplayLoad { .. } => "REPLAYLOAD",
        Message::Frame(_) => "FRAME",
        Message::Quit => "QUIT",
    }
}
