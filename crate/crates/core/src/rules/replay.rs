//! Versioned binary replay files.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic        8 bytes  "DOJOREPL"
//! version      u32
//! settings     matchframes u64, schedule (u32 count, u32 each),
//!              engagement_distance f64, dojo_radius f64, dq u8,
//!              dismemberment u8, gravity 3×f64, seed u64,
//!              replay_name (u8 present, u32 len, utf-8 bytes)
//! outcome      u8 present; winner u8, reason u8, injuries 2×f64,
//!              dq u8 present, player u8, part u8, inside u8
//! turns        u32 count; each 22 u8 (player 1), 22 u8 (player 2), frames u32
//! frames       u32 count; each u32 byte length followed by a snapshot
//! ```
//!
//! A snapshot is `frame u64` then per player: 21 positions, 21 velocities,
//! 21 orientations (row-major), 21 angular velocities, 21 attached flags,
//! 20 joint modes, 20 joint angles, 20 intact flags, 2 grips, injury; then
//! injury deltas 2×f64, contacts (u32 count; kind u8, player_a u8, part_a
//! u8, player_b u8, part_b u8 with 255 = none, impulse f64, point 3×f64,
//! struck u8), dismemberments (u32 count; player u8, joint u8) and ground
//! touches (u32 count; player u8, part u8).

use std::io::{Read, Write};

use thiserror::Error;

use super::{DqDetail, MatchError, MatchSettings, MatchState, Outcome, Reason, Winner};
use crate::math::{Mat3, Vec3};
use crate::sim::{
    Action, ContactEvent, ContactKind, FrameEvents, GripMode, JointMode, Struck, WorldState,
    ACTION_LEN, JOINT_COUNT, PART_COUNT,
};

pub const REPLAY_MAGIC: &[u8; 8] = b"DOJOREPL";
pub const REPLAY_VERSION: u32 = 1;

const NONE_U8: u8 = 255;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("replay version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("frame cursor {cursor} out of range (replay has {len} frames)")]
    Cursor { cursor: usize, len: usize },
    #[error("replay i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("re-simulation failed: {0}")]
    Match(#[from] MatchError),
    #[error("re-simulated frame {index} differs from the recording")]
    Diverged { index: usize },
}

/// The actions of one turn and how many frames it ran.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurnRecord {
    pub actions: [Action; 2],
    pub frames: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayerSnapshot {
    pub positions: [Vec3; PART_COUNT],
    pub velocities: [Vec3; PART_COUNT],
    pub orientations: [Mat3; PART_COUNT],
    pub angular_velocities: [Vec3; PART_COUNT],
    pub attached: [bool; PART_COUNT],
    pub joint_modes: [JointMode; JOINT_COUNT],
    pub joint_angles: [f64; JOINT_COUNT],
    pub intact: [bool; JOINT_COUNT],
    pub grips: [GripMode; 2],
    pub injury: f64,
}

/// Everything observable about one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSnapshot {
    pub frame: u64,
    pub players: [PlayerSnapshot; 2],
    pub events: FrameEvents,
}

impl PlayerSnapshot {
    fn capture(world: &WorldState, player: usize) -> PlayerSnapshot {
        let ch = &world.players[player];
        PlayerSnapshot {
            positions: std::array::from_fn(|i| ch.parts[i].position),
            velocities: std::array::from_fn(|i| ch.parts[i].velocity),
            orientations: std::array::from_fn(|i| ch.parts[i].orientation),
            angular_velocities: std::array::from_fn(|i| ch.parts[i].angular_velocity),
            attached: std::array::from_fn(|i| ch.parts[i].attached),
            joint_modes: std::array::from_fn(|j| ch.joints[j].mode),
            joint_angles: std::array::from_fn(|j| ch.joints[j].angle),
            intact: std::array::from_fn(|j| ch.joints[j].intact),
            grips: ch.grips,
            injury: ch.injury,
        }
    }

    pub fn groin_rotation(&self) -> Mat3 {
        self.orientations[crate::sim::skeleton::GROIN]
    }
}

impl FrameSnapshot {
    pub fn capture(world: &WorldState, events: Option<&FrameEvents>) -> FrameSnapshot {
        FrameSnapshot {
            frame: world.frame_index,
            players: [
                PlayerSnapshot::capture(world, 0),
                PlayerSnapshot::capture(world, 1),
            ],
            events: events.cloned().unwrap_or_default(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.frame);
        for p in &self.players {
            for v in p.positions.iter().chain(&p.velocities) {
                w.vec3(*v);
            }
            for m in &p.orientations {
                for row in m.m {
                    row.iter().for_each(|&x| w.f64(x));
                }
            }
            for v in &p.angular_velocities {
                w.vec3(*v);
            }
            p.attached.iter().for_each(|&b| w.u8(b.into()));
            p.joint_modes.iter().for_each(|m| w.u8(m.wire()));
            p.joint_angles.iter().for_each(|&a| w.f64(a));
            p.intact.iter().for_each(|&b| w.u8(b.into()));
            p.grips.iter().for_each(|g| w.u8(g.wire()));
            w.f64(p.injury);
        }
        let ev = &self.events;
        w.f64(ev.injury_deltas[0]);
        w.f64(ev.injury_deltas[1]);
        w.u32(ev.contacts.len() as u32);
        for c in &ev.contacts {
            w.u8(match c.kind {
                ContactKind::PlayerPlayer => 0,
                ContactKind::PlayerGround => 1,
            });
            w.u8(c.player_a as u8);
            w.u8(c.part_a as u8);
            w.u8(c.player_b.map_or(NONE_U8, |p| p as u8));
            w.u8(c.part_b.map_or(NONE_U8, |p| p as u8));
            w.f64(c.impulse_magnitude);
            w.vec3(c.point);
            w.u8(match c.struck {
                Struck::A => 0,
                Struck::B => 1,
                Struck::Both => 2,
            });
        }
        for list in [&ev.dismemberments, &ev.ground_touches] {
            w.u32(list.len() as u32);
            for &(a, b) in list.iter() {
                w.u8(a as u8);
                w.u8(b as u8);
            }
        }
        w.buf
    }

    fn read(r: &mut Reader) -> Result<FrameSnapshot, ReplayError> {
        let frame = r.u64()?;
        let mut players = Vec::with_capacity(2);
        for _ in 0..2 {
            let positions = r.vec3s()?;
            let velocities = r.vec3s()?;
            let mut orientations = [Mat3::IDENTITY; PART_COUNT];
            for m in &mut orientations {
                for row in &mut m.m {
                    for x in row.iter_mut() {
                        *x = r.f64()?;
                    }
                }
            }
            let angular_velocities = r.vec3s()?;
            let mut attached = [false; PART_COUNT];
            for a in &mut attached {
                *a = r.flag()?;
            }
            let mut joint_modes = [JointMode::Hold; JOINT_COUNT];
            for m in &mut joint_modes {
                let at = r.pos;
                let v = r.u8()?;
                *m = JointMode::from_wire(v.into())
                    .ok_or_else(|| r.err_at(at, format!("joint mode {v}")))?;
            }
            let mut joint_angles = [0.0; JOINT_COUNT];
            for a in &mut joint_angles {
                *a = r.f64()?;
            }
            let mut intact = [false; JOINT_COUNT];
            for a in &mut intact {
                *a = r.flag()?;
            }
            let mut grips = [GripMode::Release; 2];
            for g in &mut grips {
                let at = r.pos;
                let v = r.u8()?;
                *g = GripMode::from_wire(v.into())
                    .ok_or_else(|| r.err_at(at, format!("grip mode {v}")))?;
            }
            let injury = r.f64()?;
            players.push(PlayerSnapshot {
                positions,
                velocities,
                orientations,
                angular_velocities,
                attached,
                joint_modes,
                joint_angles,
                intact,
                grips,
                injury,
            });
        }
        let mut events = FrameEvents {
            injury_deltas: [r.f64()?, r.f64()?],
            ..Default::default()
        };
        let n = r.count()?;
        for _ in 0..n {
            let at = r.pos;
            let kind = match r.u8()? {
                0 => ContactKind::PlayerPlayer,
                1 => ContactKind::PlayerGround,
                k => return Err(r.err_at(at, format!("contact kind {k}"))),
            };
            let player_a = r.index(2)?;
            let part_a = r.index(PART_COUNT)?;
            let player_b = r.optional_index(2)?;
            let part_b = r.optional_index(PART_COUNT)?;
            let impulse_magnitude = r.f64()?;
            let point = r.vec3()?;
            let at = r.pos;
            let struck = match r.u8()? {
                0 => Struck::A,
                1 => Struck::B,
                2 => Struck::Both,
                k => return Err(r.err_at(at, format!("struck side {k}"))),
            };
            events.contacts.push(ContactEvent {
                kind,
                player_a,
                part_a,
                player_b,
                part_b,
                impulse_magnitude,
                point,
                struck,
            });
        }
        for (list, limit) in [
            (&mut events.dismemberments, JOINT_COUNT),
            (&mut events.ground_touches, PART_COUNT),
        ] {
            let n = r.count()?;
            for _ in 0..n {
                list.push((r.index(2)?, r.index(limit)?));
            }
        }
        let [a, b]: [PlayerSnapshot; 2] = players.try_into().expect("two players");
        Ok(FrameSnapshot {
            frame,
            players: [a, b],
            events,
        })
    }
}

/// A recorded match: settings, the per-turn actions and per-frame snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub settings: MatchSettings,
    pub turns: Vec<TurnRecord>,
    /// Snapshot of the initial world followed by one per simulated frame.
    pub frames: Vec<FrameSnapshot>,
    pub outcome: Option<Outcome>,
}

impl Replay {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(REPLAY_MAGIC);
        w.u32(REPLAY_VERSION);
        let s = &self.settings;
        w.u64(s.matchframes);
        w.u32(s.turnframes_schedule.len() as u32);
        s.turnframes_schedule.iter().for_each(|&t| w.u32(t));
        w.f64(s.engagement_distance);
        w.f64(s.dojo_radius);
        w.u8(s.dq_enabled.into());
        w.u8(s.dismemberment_enabled.into());
        w.vec3(s.gravity);
        w.u64(s.seed);
        match &s.replay_name {
            Some(name) => {
                w.u8(1);
                w.u32(name.len() as u32);
                w.buf.extend_from_slice(name.as_bytes());
            }
            None => w.u8(0),
        }
        match &self.outcome {
            Some(o) => {
                w.u8(1);
                w.u8(o.winner.code());
                w.u8(match o.reason {
                    Reason::Score => 0,
                    Reason::Disqualification => 1,
                    Reason::TimeoutDraw => 2,
                });
                w.f64(o.final_injuries[0]);
                w.f64(o.final_injuries[1]);
                match o.dq_detail {
                    Some(d) => {
                        w.u8(1);
                        w.u8(d.player as u8);
                        w.u8(d.part as u8);
                        w.u8(d.inside_dojo.into());
                    }
                    None => w.u8(0),
                }
            }
            None => w.u8(0),
        }
        w.u32(self.turns.len() as u32);
        for t in &self.turns {
            for a in &t.actions {
                w.buf.extend_from_slice(&a.to_wire());
            }
            w.u32(t.frames);
        }
        w.u32(self.frames.len() as u32);
        for f in &self.frames {
            let bytes = f.to_bytes();
            w.u32(bytes.len() as u32);
            w.buf.extend_from_slice(&bytes);
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Replay, ReplayError> {
        let mut r = Reader { data, pos: 0 };
        let magic = r.take(REPLAY_MAGIC.len())?;
        if magic != REPLAY_MAGIC {
            return Err(r.err_at(0, "bad magic".into()));
        }
        let version = r.u32()?;
        if version != REPLAY_VERSION {
            return Err(ReplayError::Version {
                found: version,
                expected: REPLAY_VERSION,
            });
        }
        let matchframes = r.u64()?;
        let n = r.count()?;
        let mut turnframes_schedule = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            turnframes_schedule.push(r.u32()?);
        }
        let engagement_distance = r.f64()?;
        let dojo_radius = r.f64()?;
        let dq_enabled = r.flag()?;
        let dismemberment_enabled = r.flag()?;
        let gravity = r.vec3()?;
        let seed = r.u64()?;
        let replay_name = if r.flag()? {
            let len = r.count()?;
            let at = r.pos;
            let bytes = r.take(len)?;
            Some(
                String::from_utf8(bytes.to_vec())
                    .map_err(|_| r.err_at(at, "replay name is not utf-8".into()))?,
            )
        } else {
            None
        };
        let settings = MatchSettings {
            matchframes,
            turnframes_schedule,
            engagement_distance,
            dojo_radius,
            dq_enabled,
            dismemberment_enabled,
            gravity,
            seed,
            replay_name,
        };
        let outcome = if r.flag()? {
            let at = r.pos;
            let winner = match r.u8()? {
                0 => Winner::Draw,
                1 => Winner::Player1,
                2 => Winner::Player2,
                v => return Err(r.err_at(at, format!("winner {v}"))),
            };
            let at = r.pos;
            let reason = match r.u8()? {
                0 => Reason::Score,
                1 => Reason::Disqualification,
                2 => Reason::TimeoutDraw,
                v => return Err(r.err_at(at, format!("reason {v}"))),
            };
            let final_injuries = [r.f64()?, r.f64()?];
            let dq_detail = if r.flag()? {
                Some(DqDetail {
                    player: r.index(2)?,
                    part: r.index(PART_COUNT)?,
                    inside_dojo: r.flag()?,
                })
            } else {
                None
            };
            Some(Outcome {
                winner,
                reason,
                final_injuries,
                dq_detail,
            })
        } else {
            None
        };
        let n = r.count()?;
        let mut turns = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let mut actions = [Action::hold(); 2];
            for a in &mut actions {
                let at = r.pos;
                let raw: Vec<i64> = r.take(ACTION_LEN)?.iter().map(|&b| i64::from(b)).collect();
                *a = Action::from_wire(&raw).map_err(|e| r.err_at(at, e.to_string()))?;
            }
            turns.push(TurnRecord {
                actions,
                frames: r.u32()?,
            });
        }
        let n = r.count()?;
        let mut frames = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let len = r.count()?;
            let start = r.pos;
            let body = r.take(len)?;
            let mut sub = Reader {
                data: &data[..start + body.len()],
                pos: start,
            };
            frames.push(FrameSnapshot::read(&mut sub)?);
            if sub.pos != start + len {
                return Err(r.err_at(sub.pos, "frame length does not match its contents".into()));
            }
        }
        if r.pos != data.len() {
            return Err(r.err_at(r.pos, "trailing bytes".into()));
        }
        Ok(Replay {
            settings,
            turns,
            frames,
            outcome,
        })
    }

    pub fn save(&self, mut sink: impl Write) -> Result<(), ReplayError> {
        sink.write_all(&self.to_bytes())?;
        sink.flush()?;
        Ok(())
    }

    pub fn load(mut source: impl Read) -> Result<Replay, ReplayError> {
        let mut data = Vec::new();
        source.read_to_end(&mut data)?;
        Replay::from_bytes(&data)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Snapshot at `cursor` (0 is the initial world).
    pub fn frame(&self, cursor: usize) -> Result<&FrameSnapshot, ReplayError> {
        self.frames.get(cursor).ok_or(ReplayError::Cursor {
            cursor,
            len: self.frames.len(),
        })
    }

    /// Snapshots in order, without re-simulating.
    pub fn playback(&self) -> impl Iterator<Item = &FrameSnapshot> {
        self.frames.iter()
    }

    /// Play the logged actions again from the header settings.
    pub fn resimulate(&self) -> Result<Replay, ReplayError> {
        let mut m = MatchState::recorded(self.settings.clone())?;
        for t in &self.turns {
            if m.terminal {
                break;
            }
            m.submit_actions(&t.actions[0], &t.actions[1])?;
        }
        Ok(m.replay())
    }

    /// Re-simulate and compare every frame bitwise on the serialized form.
    pub fn verify(&self) -> Result<(), ReplayError> {
        let again = self.resimulate()?;
        for (index, (a, b)) in self.frames.iter().zip(again.frames.iter()).enumerate() {
            if a.to_bytes() != b.to_bytes() {
                return Err(ReplayError::Diverged { index });
            }
        }
        if again.frames.len() != self.frames.len() {
            return Err(ReplayError::Diverged {
                index: again.frames.len().min(self.frames.len()),
            });
        }
        Ok(())
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: usize, message: String) -> ReplayError {
        ReplayError::Parse { offset, message }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ReplayError> {
        if self.data.len() - self.pos < n {
            return Err(self.err_at(
                self.pos,
                format!(
                    "unexpected end of input: need {n} bytes, {} left",
                    self.data.len() - self.pos
                ),
            ));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ReplayError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ReplayError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ReplayError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, ReplayError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn vec3(&mut self) -> Result<Vec3, ReplayError> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn vec3s(&mut self) -> Result<[Vec3; PART_COUNT], ReplayError> {
        let mut out = [Vec3::ZERO; PART_COUNT];
        for v in &mut out {
            *v = self.vec3()?;
        }
        Ok(out)
    }

    fn flag(&mut self) -> Result<bool, ReplayError> {
        let at = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(self.err_at(at, format!("flag byte {v}"))),
        }
    }

    fn count(&mut self) -> Result<usize, ReplayError> {
        Ok(self.u32()? as usize)
    }

    fn index(&mut self, limit: usize) -> Result<usize, ReplayError> {
        let at = self.pos;
        let v = self.u8()? as usize;
        if v >= limit {
            return Err(self.err_at(at, format!("index {v} out of range 0..{limit}")));
        }
        Ok(v)
    }

    fn optional_index(&mut self, limit: usize) -> Result<Option<usize>, ReplayError> {
        if self.data.get(self.pos) == Some(&NONE_U8) {
            self.pos += 1;
            return Ok(None);
        }
        self.index(limit).map(Some)
    }
}
