//! Decoded game state, observation normalization and rewards.

use crate::math::{Mat3, Vec3};
use crate::proto::{PlayerBlock, StateMsg, WireWinner};
use crate::sim::skeleton::{mirror_joint, mirror_part, GROIN};
use crate::sim::{GripMode, JointMode, JOINT_COUNT, PART_COUNT};

/// World units per observation unit.
pub const OBS_SCALE: f64 = 10.0;
/// Observation entries are clipped to `[-OBS_CLIP, OBS_CLIP]`.
pub const OBS_CLIP: f64 = 30.0;
/// Length of the relative position block: 21 parts, 2 players, 3 axes.
pub const RELATIVE_LEN: usize = PART_COUNT * 2 * 3;
/// Divisor of the next-turn length extra.
pub const TURNFRAMES_NORM: f64 = 50.0;
/// Injury divisor of the single-agent reward.
pub const REWARD_DIVISOR: f64 = 5000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PlayerState {
    pub positions: [Vec3; PART_COUNT],
    pub velocities: [Vec3; PART_COUNT],
    pub groin_rotation: Mat3,
    pub joint_modes: [JointMode; JOINT_COUNT],
    pub grips: [GripMode; 2],
    pub injury: f64,
}

impl PlayerState {
    fn from_block(b: &PlayerBlock) -> PlayerState {
        let v = |a: &[f64], i: usize| Vec3::new(a[3 * i], a[3 * i + 1], a[3 * i + 2]);
        let r = &b.groin_rotation;
        PlayerState {
            positions: std::array::from_fn(|i| v(&b.positions, i)),
            velocities: std::array::from_fn(|i| v(&b.velocities, i)),
            groin_rotation: Mat3 {
                m: [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]],
            },
            joint_modes: b.joint_modes,
            grips: b.grips,
            injury: b.injury,
        }
    }

    fn to_block(&self) -> PlayerBlock {
        let mut b = PlayerBlock::default();
        for i in 0..PART_COUNT {
            b.positions[3 * i..3 * i + 3].copy_from_slice(&self.positions[i].to_array());
            b.velocities[3 * i..3 * i + 3].copy_from_slice(&self.velocities[i].to_array());
        }
        b.groin_rotation
            .copy_from_slice(&self.groin_rotation.to_row_major());
        b.joint_modes = self.joint_modes;
        b.grips = self.grips;
        b.injury = self.injury;
        b
    }

    fn mirrored(&self) -> PlayerState {
        PlayerState {
            positions: std::array::from_fn(|i| self.positions[mirror_part(i)].reflect_x()),
            velocities: std::array::from_fn(|i| self.velocities[mirror_part(i)].reflect_x()),
            groin_rotation: self.groin_rotation.mirror_orientation(),
            joint_modes: std::array::from_fn(|j| self.joint_modes[mirror_joint(j)]),
            grips: [self.grips[1], self.grips[0]],
            injury: self.injury,
        }
    }
}

/// STATE message reshaped per player. Values are the wire values, unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct GameState {
    pub players: [PlayerState; 2],
    pub terminal: bool,
    pub winner: WireWinner,
    pub frames_played: u64,
    pub next_turnframes: u32,
}

impl GameState {
    pub fn from_wire(s: &StateMsg) -> GameState {
        GameState {
            players: [
                PlayerState::from_block(&s.players[0]),
                PlayerState::from_block(&s.players[1]),
            ],
            terminal: s.terminal,
            winner: s.winner,
            frames_played: s.frames_played,
            next_turnframes: s.next_turnframes,
        }
    }

    pub fn to_wire(&self) -> StateMsg {
        StateMsg {
            terminal: self.terminal,
            frames_played: self.frames_played,
            next_turnframes: self.next_turnframes,
            players: [self.players[0].to_block(), self.players[1].to_block()],
            winner: self.winner,
        }
    }

    pub fn injuries(&self) -> [f64; 2] {
        [self.players[0].injury, self.players[1].injury]
    }

    /// Reflection across x = 0 with the players exchanged.
    pub fn mirrored(&self) -> GameState {
        GameState {
            players: [self.players[1].mirrored(), self.players[0].mirrored()],
            winner: match self.winner {
                WireWinner::Player1 => WireWinner::Player2,
                WireWinner::Player2 => WireWinner::Player1,
                w => w,
            },
            ..self.clone()
        }
    }
}

/// Optional trailing observation blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObsBlocks {
    Positions,
    /// Dojo distances, frames left and next turn length.
    WithMatchInfo {
        matchframes: u64,
        dojo_center: Vec3,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchInfo {
    /// Horizontal groin distance from the dojo center, own then opponent.
    pub dojo_distance: [f64; 2],
    /// Frames left over matchframes.
    pub frames_left: f64,
    /// Next turn length over 50.
    pub next_turnframes: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Own 21 parts then the opponent's, each x y z in the viewpoint groin frame.
    pub relative_positions: Vec<f64>,
    pub match_info: Option<MatchInfo>,
}

impl Observation {
    /// Flat vector in block order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.relative_positions.clone();
        if let Some(m) = &self.match_info {
            v.extend(m.dojo_distance);
            v.push(m.frames_left);
            v.push(m.next_turnframes);
        }
        v
    }

    pub fn len(&self) -> usize {
        RELATIVE_LEN + if self.match_info.is_some() { 4 } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn clip(v: f64) -> f64 {
    v.clamp(-OBS_CLIP, OBS_CLIP)
}

/// Observation of the state as seen by player `viewpoint` (0 or 1).
///
/// Part positions of both players are translated by minus the viewpoint
/// groin, rotated into the groin frame, and scaled by [`OBS_SCALE`]. The
/// viewpoint groin's own height entry holds its absolute world height.
pub fn normalize_observation(gs: &GameState, viewpoint: usize, blocks: ObsBlocks) -> Observation {
    assert!(viewpoint < 2, "viewpoint must be 0 or 1");
    let me = &gs.players[viewpoint];
    let other = &gs.players[1 - viewpoint];
    let origin = me.positions[GROIN];
    let r = me.groin_rotation;
    let mut rel = Vec::with_capacity(RELATIVE_LEN);
    for p in me.positions.iter().chain(other.positions.iter()) {
        let local = r.tmul_vec(*p - origin);
        rel.extend(local.to_array());
    }
    rel[3 * GROIN + 2] = origin.z;
    for v in &mut rel {
        *v = clip(*v / OBS_SCALE);
    }
    let match_info = match blocks {
        ObsBlocks::Positions => None,
        ObsBlocks::WithMatchInfo {
            matchframes,
            dojo_center,
        } => {
            let dist = |p: &PlayerState| {
                let d = p.positions[GROIN] - dojo_center;
                d.x.hypot(d.y)
            };
            let left = matchframes.saturating_sub(gs.frames_played) as f64;
            Some(MatchInfo {
                dojo_distance: [clip(dist(me) / OBS_SCALE), clip(dist(other) / OBS_SCALE)],
                frames_left: clip(left / matchframes as f64),
                next_turnframes: clip(f64::from(gs.next_turnframes) / TURNFRAMES_NORM),
            })
        }
    };
    Observation {
        relative_positions: rel,
        match_info,
    }
}

/// `(Δu - Δp) / 5000` with the agent as player 1 and the opponent as player 2.
pub fn reward_destroy_uke(prev: &GameState, cur: &GameState) -> f64 {
    let du = cur.players[1].injury - prev.players[1].injury;
    let dp = cur.players[0].injury - prev.players[0].injury;
    (du - dp) / REWARD_DIVISOR
}

/// Terminal win/loss reward of player `viewpoint`: +1, -1, or 0 for a draw
/// or an unfinished match.
pub fn reward_win_loss(cur: &GameState, viewpoint: usize) -> f64 {
    match (cur.winner, viewpoint) {
        (WireWinner::Player1, 0) | (WireWinner::Player2, 1) => 1.0,
        (WireWinner::Player1, _) | (WireWinner::Player2, _) => -1.0,
        _ => 0.0,
    }
}
