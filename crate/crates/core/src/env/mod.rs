//! Controller-side environment API.

mod client;
mod state;
mod task;

pub use client::{Client, ClientError};
pub use state::{
    normalize_observation, reward_destroy_uke, reward_win_loss, GameState, MatchInfo, ObsBlocks,
    Observation, PlayerState, OBS_CLIP, OBS_SCALE, RELATIVE_LEN, REWARD_DIVISOR, TURNFRAMES_NORM,
};
pub use task::{Env, RewardKind, Step, StepInfo, TaskConfig, TaskId};
