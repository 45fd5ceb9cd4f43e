//! Turn loop, disqualification and outcome rules on top of the simulator.

mod replay;

use thiserror::Error;

use crate::math::Vec3;
use crate::sim::{
    self, make_world, step_frame, Action, FrameEvents, SimError, WorldSettings, WorldState,
    DEFAULT_GRAVITY,
};

pub use replay::{
    FrameSnapshot, PlayerSnapshot, Replay, ReplayError, TurnRecord, REPLAY_MAGIC, REPLAY_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("invalid setting `{field}`: {reason}")]
    InvalidSetting { field: &'static str, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("match is already over")]
    Terminal,
    #[error("simulation fault at frame {frame}: {message}")]
    Fault { frame: u64, message: String },
}

/// Rule configuration of one match.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchSettings {
    pub matchframes: u64,
    /// Frames per turn, consumed one entry per turn; the last entry repeats.
    pub turnframes_schedule: Vec<u32>,
    pub engagement_distance: f64,
    /// 0 disables the dojo rule.
    pub dojo_radius: f64,
    pub dq_enabled: bool,
    pub dismemberment_enabled: bool,
    pub gravity: Vec3,
    pub seed: u64,
    pub replay_name: Option<String>,
}

impl Default for MatchSettings {
    fn default() -> Self {
        MatchSettings {
            matchframes: 1000,
            turnframes_schedule: vec![10],
            engagement_distance: 150.0,
            dojo_radius: 0.0,
            dq_enabled: false,
            dismemberment_enabled: true,
            gravity: DEFAULT_GRAVITY,
            seed: 0,
            replay_name: None,
        }
    }
}

/// Preset id of the single-agent task against an immobile opponent.
pub const DESTROY_UKE: &str = "destroy-uke-v1";
/// Preset id of the two-agent dojo task.
pub const AIKIDO_DOJO: &str = "aikido-dojo-v1";

/// Radius of the dojo in the two-agent preset.
pub const AIKIDO_DOJO_RADIUS: f64 = 200.0;

/// Match settings template of a named task preset.
pub fn preset(id: &str) -> Option<MatchSettings> {
    match id {
        DESTROY_UKE => Some(MatchSettings::default()),
        AIKIDO_DOJO => Some(MatchSettings {
            matchframes: 500,
            turnframes_schedule: rising_schedule(),
            dojo_radius: AIKIDO_DOJO_RADIUS,
            dq_enabled: true,
            ..Default::default()
        }),
        _ => None,
    }
}

/// Turn lengths that grow from 10 to 50 frames in steps of 5.
pub fn rising_schedule() -> Vec<u32> {
    (0..9).map(|i| (10 + 5 * i).min(50)).collect()
}

impl MatchSettings {
    pub fn validate(&self) -> Result<(), MatchError> {
        let bad = |field, reason: String| Err(MatchError::InvalidSetting { field, reason });
        if self.matchframes == 0 {
            return bad("matchframes", "must be at least 1".into());
        }
        if self.turnframes_schedule.is_empty() {
            return bad("turnframes_schedule", "must not be empty".into());
        }
        if let Some(i) = self.turnframes_schedule.iter().position(|&t| t == 0) {
            return bad("turnframes_schedule", format!("entry {i} is 0"));
        }
        if !(self.dojo_radius >= 0.0) || !self.dojo_radius.is_finite() {
            return bad(
                "dojo_radius",
                format!("must be finite and >= 0, got {}", self.dojo_radius),
            );
        }
        self.world_settings().validate()?;
        Ok(())
    }

    pub fn world_settings(&self) -> WorldSettings {
        WorldSettings {
            engagement_distance: self.engagement_distance,
            gravity: self.gravity,
            dismemberment_enabled: self.dismemberment_enabled,
        }
    }

    /// Frames in turn `index` (0-based).
    pub fn turnframes(&self, index: usize) -> u32 {
        let s = &self.turnframes_schedule;
        s[index.min(s.len() - 1)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Winner {
    Player1,
    Player2,
    Draw,
}

impl Winner {
    /// Wire code: 0 none/draw, 1 or 2 for a player.
    pub fn code(self) -> u8 {
        match self {
            Winner::Draw => 0,
            Winner::Player1 => 1,
            Winner::Player2 => 2,
        }
    }

    pub fn from_player(player: usize) -> Winner {
        if player == 0 {
            Winner::Player1
        } else {
            Winner::Player2
        }
    }

    /// Score of player 1 in this result: win 1, draw 0.5, loss 0.
    pub fn score_p1(self) -> f64 {
        match self {
            Winner::Player1 => 1.0,
            Winner::Draw => 0.5,
            Winner::Player2 => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    Score,
    Disqualification,
    TimeoutDraw,
}

/// Why a player was disqualified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DqDetail {
    pub player: usize,
    pub part: usize,
    /// Whether the offending contact was inside the dojo.
    pub inside_dojo: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub winner: Winner,
    pub reason: Reason,
    pub final_injuries: [f64; 2],
    pub dq_detail: Option<DqDetail>,
}

impl Outcome {
    fn by_score(injuries: [f64; 2]) -> Outcome {
        let (winner, reason) = if injuries[0] < injuries[1] {
            (Winner::Player1, Reason::Score)
        } else if injuries[1] < injuries[0] {
            (Winner::Player2, Reason::Score)
        } else {
            (Winner::Draw, Reason::TimeoutDraw)
        };
        Outcome {
            winner,
            reason,
            final_injuries: injuries,
            dq_detail: None,
        }
    }

    fn by_dq(detail: DqDetail, injuries: [f64; 2]) -> Outcome {
        Outcome {
            winner: Winner::from_player(1 - detail.player),
            reason: Reason::Disqualification,
            final_injuries: injuries,
            dq_detail: Some(detail),
        }
    }
}

/// Result of one submitted turn.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnReport {
    pub frames_advanced: u32,
    pub injury_deltas: [f64; 2],
    pub events: Vec<FrameEvents>,
    pub terminal: bool,
    pub outcome: Option<Outcome>,
}

/// First offending player, if any, for one frame's ground touches.
///
/// Players are checked in index order and parts in id order. A touch by a
/// severed part always disqualifies. Otherwise a touch outside the dojo
/// disqualifies, and inside it only hands and feet may touch.
pub fn check_disqualification(
    world: &WorldState,
    settings: &MatchSettings,
    dojo_center: Vec3,
    events: &FrameEvents,
) -> Option<DqDetail> {
    if !settings.dq_enabled {
        return None;
    }
    for player in 0..2 {
        let ch = &world.players[player];
        let mut parts: Vec<usize> = events
            .ground_touches
            .iter()
            .filter(|&&(p, _)| p == player)
            .map(|&(_, part)| part)
            .collect();
        parts.sort_unstable();
        parts.dedup();
        for part in parts {
            let p = &ch.parts[part];
            let inside = settings.dojo_radius == 0.0
                || (p.position - dojo_center).horizontal_norm() <= settings.dojo_radius;
            let offends = !p.attached || !inside || !sim::skeleton::is_hand_or_foot(part);
            if offends {
                return Some(DqDetail {
                    player,
                    part,
                    inside_dojo: inside,
                });
            }
        }
    }
    None
}

/// A match in progress.
#[derive(Clone, Debug)]
pub struct MatchState {
    pub world: WorldState,
    pub settings: MatchSettings,
    pub frames_played: u64,
    pub current_turnframes: u32,
    pub terminal: bool,
    pub outcome: Option<Outcome>,
    pub turn_log: Vec<TurnRecord>,
    /// Horizontal center of the dojo: midpoint of the initial groins.
    pub dojo_center: Vec3,
    turn_index: usize,
    recorder: Option<Vec<FrameSnapshot>>,
}

impl MatchState {
    /// Fresh match; frames are recorded when `settings.replay_name` is set.
    pub fn new(settings: MatchSettings) -> Result<MatchState, MatchError> {
        let record = settings.replay_name.is_some();
        MatchState::build(settings, record)
    }

    /// Fresh match that records every frame for a replay.
    pub fn recorded(settings: MatchSettings) -> Result<MatchState, MatchError> {
        MatchState::build(settings, true)
    }

    fn build(settings: MatchSettings, record: bool) -> Result<MatchState, MatchError> {
        settings.validate()?;
        let world = make_world(&settings.world_settings(), settings.seed)?;
        let g = [
            world.players[0].groin().position,
            world.players[1].groin().position,
        ];
        let dojo_center = Vec3::new(0.5 * (g[0].x + g[1].x), 0.5 * (g[0].y + g[1].y), 0.0);
        let recorder = record.then(|| vec![FrameSnapshot::capture(&world, None)]);
        Ok(MatchState {
            current_turnframes: settings.turnframes(0),
            world,
            settings,
            frames_played: 0,
            terminal: false,
            outcome: None,
            turn_log: Vec::new(),
            dojo_center,
            turn_index: 0,
            recorder,
        })
    }

    /// Start over with new settings, keeping the recording choice.
    pub fn reset(&mut self, settings: MatchSettings) -> Result<(), MatchError> {
        let record = self.recorder.is_some() || settings.replay_name.is_some();
        *self = MatchState::build(settings, record)?;
        Ok(())
    }

    pub fn turn_index(&self) -> usize {
        self.turn_index
    }

    pub fn injuries(&self) -> [f64; 2] {
        [self.world.players[0].injury, self.world.players[1].injury]
    }

    pub fn is_recording(&self) -> bool {
        self.recorder.is_some()
    }

    /// Validate raw wire actions, then play a turn; nothing changes on error.
    pub fn submit_raw(&mut self, a1: &[i64], a2: &[i64]) -> Result<TurnReport, MatchError> {
        let a1 = Action::from_wire(a1)?;
        let a2 = Action::from_wire(a2)?;
        self.submit_actions(&a1, &a2)
    }

    /// Apply both actions and advance one turn (clamped at `matchframes`).
    pub fn submit_actions(&mut self, a1: &Action, a2: &Action) -> Result<TurnReport, MatchError> {
        if self.terminal {
            return Err(MatchError::Terminal);
        }
        if let Some(message) = &self.world.fault {
            return Err(MatchError::Fault {
                frame: self.world.frame_index,
                message: message.clone(),
            });
        }
        self.world.set_joint_modes(0, a1)?;
        self.world.set_joint_modes(1, a2)?;
        let remaining = self.settings.matchframes - self.frames_played;
        let frames = u64::from(self.current_turnframes).min(remaining) as u32;
        let mut report = TurnReport {
            frames_advanced: 0,
            injury_deltas: [0.0, 0.0],
            events: Vec::with_capacity(frames as usize),
            terminal: false,
            outcome: None,
        };
        let mut dq = None;
        for _ in 0..frames {
            let ev = step_frame(&mut self.world);
            if let Some(message) = &self.world.fault {
                self.turn_log.push(TurnRecord {
                    actions: [*a1, *a2],
                    frames: report.frames_advanced,
                });
                return Err(MatchError::Fault {
                    frame: self.world.frame_index,
                    message: message.clone(),
                });
            }
            self.frames_played += 1;
            report.frames_advanced += 1;
            report.injury_deltas[0] += ev.injury_deltas[0];
            report.injury_deltas[1] += ev.injury_deltas[1];
            dq = check_disqualification(&self.world, &self.settings, self.dojo_center, &ev);
            if let Some(rec) = self.recorder.as_mut() {
                rec.push(FrameSnapshot::capture(&self.world, Some(&ev)));
            }
            report.events.push(ev);
            if dq.is_some() {
                break;
            }
        }
        self.turn_log.push(TurnRecord {
            actions: [*a1, *a2],
            frames: report.frames_advanced,
        });
        self.turn_index += 1;
        self.current_turnframes = self.settings.turnframes(self.turn_index);
        let injuries = self.injuries();
        if let Some(detail) = dq {
            self.finish(Outcome::by_dq(detail, injuries));
        } else if self.frames_played >= self.settings.matchframes {
            self.finish(Outcome::by_score(injuries));
        }
        report.terminal = self.terminal;
        report.outcome = self.outcome;
        Ok(report)
    }

    fn finish(&mut self, outcome: Outcome) {
        self.terminal = true;
        self.outcome = Some(outcome);
        log::debug!(
            "match over after {} frames: {:?} by {:?}",
            self.frames_played,
            outcome.winner,
            outcome.reason
        );
    }

    /// Replay of everything played so far. Frame snapshots are present only
    /// for recorded matches.
    pub fn replay(&self) -> Replay {
        Replay {
            settings: self.settings.clone(),
            turns: self.turn_log.clone(),
            frames: self.recorder.clone().unwrap_or_default(),
            outcome: self.outcome,
        }
    }
}
