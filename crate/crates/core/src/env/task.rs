//! Packaged tasks behind a reset/step interface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::client::{Client, ClientError};
use super::state::{
    normalize_observation, reward_destroy_uke, reward_win_loss, GameState, ObsBlocks, Observation,
};
use crate::math::Vec3;
use crate::proto::BuiltIn;
use crate::rules::{self, MatchSettings};
use crate::sim::Action;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskId {
    /// One agent against an immobile opponent, rewarded for injury dealt.
    DestroyUke,
    /// Two agents in a dojo, rewarded for winning.
    AikidoDojo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardKind {
    InjuryDelta,
    WinLoss,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskConfig {
    pub id: TaskId,
    pub preset_id: &'static str,
    pub settings: MatchSettings,
    /// Engagement distance is drawn uniformly from this closed range on reset.
    pub distance_range: (f64, f64),
    /// Built-in policy playing player 2, or `None` for a two-agent task.
    pub opponent: Option<BuiltIn>,
    pub match_info: bool,
    pub reward: RewardKind,
}

impl TaskConfig {
    pub fn destroy_uke() -> TaskConfig {
        TaskConfig {
            id: TaskId::DestroyUke,
            preset_id: rules::DESTROY_UKE,
            settings: rules::preset(rules::DESTROY_UKE).expect("preset"),
            distance_range: (100.0, 200.0),
            opponent: Some(BuiltIn::Immobile),
            match_info: false,
            reward: RewardKind::InjuryDelta,
        }
    }

    pub fn aikido_dojo() -> TaskConfig {
        let settings = rules::preset(rules::AIKIDO_DOJO).expect("preset");
        let d = settings.engagement_distance;
        TaskConfig {
            id: TaskId::AikidoDojo,
            preset_id: rules::AIKIDO_DOJO,
            settings,
            distance_range: (d, d),
            opponent: None,
            match_info: true,
            reward: RewardKind::WinLoss,
        }
    }

    pub fn by_id(id: &str) -> Option<TaskConfig> {
        match id {
            rules::DESTROY_UKE => Some(TaskConfig::destroy_uke()),
            rules::AIKIDO_DOJO => Some(TaskConfig::aikido_dojo()),
            _ => None,
        }
    }

    /// Number of agents that act each step.
    pub fn agents(&self) -> usize {
        if self.opponent.is_some() {
            1
        } else {
            2
        }
    }

    /// Match settings for one episode: seeded distance draw and match seed.
    pub fn episode_settings(&self, seed: u64) -> MatchSettings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.distance_range;
        let mut s = self.settings.clone();
        s.engagement_distance = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        s.seed = seed;
        s
    }

    fn blocks(&self) -> ObsBlocks {
        if self.match_info {
            ObsBlocks::WithMatchInfo {
                matchframes: self.settings.matchframes,
                // initial groins sit symmetric about the origin
                dojo_center: Vec3::ZERO,
            }
        } else {
            ObsBlocks::Positions
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub frames_played: u64,
    pub injuries: [f64; 2],
    pub state: GameState,
}

/// Result of one step: one observation and reward per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub terminal: bool,
    pub info: StepInfo,
}

/// Gym-style environment over a [`Client`].
pub struct Env {
    client: Client,
    task: TaskConfig,
    last: Option<GameState>,
}

impl Env {
    pub fn new(client: Client, task: TaskConfig) -> Env {
        Env {
            client,
            task,
            last: None,
        }
    }

    pub fn task(&self) -> &TaskConfig {
        &self.task
    }

    pub fn client_mut(&mut self) -> &mut Client {
        &mut self.client
    }

    /// Start an episode; returns one observation per agent.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<Observation>, ClientError> {
        let settings = self.task.episode_settings(seed);
        self.client.new_game(&settings, self.task.opponent)?;
        let (gs, _) = self.client.get_state()?;
        let obs = self.observe(&gs);
        self.last = Some(gs);
        Ok(obs)
    }

    /// Advance one turn with one action per agent.
    pub fn step(&mut self, actions: &[Action]) -> Result<Step, ClientError> {
        let prev = match &self.last {
            None => return Err(ClientError::Order("step before reset".into())),
            Some(s) if s.terminal => return Err(ClientError::Order("step after terminal".into())),
            Some(s) => s.clone(),
        };
        if actions.len() != self.task.agents() {
            return Err(ClientError::Order(format!(
                "task takes {} action(s), got {}",
                self.task.agents(),
                actions.len()
            )));
        }
        self.client.make_actions(&actions[0], actions.get(1))?;
        let (gs, terminal) = self.client.get_state()?;
        let rewards = match self.task.reward {
            RewardKind::InjuryDelta => vec![reward_destroy_uke(&prev, &gs)],
            RewardKind::WinLoss => (0..2).map(|v| reward_win_loss(&gs, v)).collect(),
        };
        let step = Step {
            observations: self.observe(&gs),
            rewards,
            terminal,
            info: StepInfo {
                frames_played: gs.frames_played,
                injuries: gs.injuries(),
                state: gs.clone(),
            },
        };
        self.last = Some(gs);
        Ok(step)
    }

    pub fn close(&mut self) -> Result<(), ClientError> {
        self.client.close()
    }

    fn observe(&self, gs: &GameState) -> Vec<Observation> {
        (0..self.task.agents())
            .map(|v| normalize_observation(gs, v, self.task.blocks()))
            .collect()
    }
}
